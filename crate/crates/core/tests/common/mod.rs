#![allow(dead_code)]

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simcf_core::network::{Network, SimModel};
use simcf_core::scenario::{generate_drop, SystemConfig};
use simcf_core::sim_physics::PhaseTensor;

pub fn small_config(l: usize, k: usize, n: usize, m: usize, tau_p: usize) -> SystemConfig {
    SystemConfig {
        l,
        k,
        u: 2,
        m,
        n,
        tau_p,
        ..SystemConfig::default()
    }
}

/// Random-phase network with round-robin pilots.
pub fn random_network(cfg: &SystemConfig, seed: u64) -> Network<f64> {
    let pilots: Vec<usize> = (0..cfg.k).map(|k| k % cfg.tau_p).collect();
    let drop = generate_drop::<f64>(cfg, seed).unwrap().with_pilots(&pilots);
    let sim = Arc::new(SimModel::new(cfg).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let phases = PhaseTensor::random(cfg.l, cfg.m, sim.atoms(), &mut rng);
    Network::new(cfg, &drop, sim, phases).unwrap()
}
