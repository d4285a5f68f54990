//! Uplink spectral efficiency of cell-free massive MIMO with stacked
//! intelligent metasurfaces at the access points.
//!
//! Everything is generic over [`num::Float`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod channel_stats;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod network;
pub mod num;
pub mod optimizers;
pub mod scenario;
pub mod se_engine;
pub mod sim_physics;

pub use error::{Error, Result};
pub use scenario::SystemConfig;
pub use se_engine::Decoder;

pub type Drop64 = scenario::Drop<f64>;
pub type Network64 = network::Network<f64>;
pub type SimModel64 = network::SimModel<f64>;
pub type PhaseTensor64 = sim_physics::PhaseTensor<f64>;
pub type ClosedFormTerms64 = se_engine::ClosedFormTerms<f64>;
pub type UeSe64 = se_engine::UeSe<f64>;

pub type Drop32 = scenario::Drop<f32>;
pub type Network32 = network::Network<f32>;
pub type SimModel32 = network::SimModel<f32>;
pub type PhaseTensor32 = sim_physics::PhaseTensor<f32>;
