//! Specs for the standard sweeps at desk scale. Drop counts default to 20
//! and can be overridden by the caller.

use simcf_core::optimizers::BeamformingConfig;
use simcf_core::scenario::DEFAULT_WAVELENGTH;
use simcf_core::{Decoder, SystemConfig};

use crate::spec::{ExperimentSpec, Scheme, SweepVariable};

/// Reference point: `L = 10`, `M = 5`, `N = 64`, `K = 5`, `U = 2`, `τ_p = 4`.
pub fn reference_system() -> SystemConfig {
    SystemConfig::default()
}

/// LSFD vs EGCD with random and optimized phases at the reference point.
pub fn decoder_comparison(n_drops: usize) -> ExperimentSpec {
    ExperimentSpec {
        name: "decoders".into(),
        system: reference_system(),
        n_drops,
        schemes: vec![Scheme::RANDOM_FULL, Scheme::OPT_FULL],
        decoders: vec![Decoder::Lsfd, Decoder::Egcd],
        ..ExperimentSpec::default()
    }
}

/// Meta-atom pitch sweep `{λ, λ/2, λ/4, λ/8}` with the atom itself held at
/// `λ/2`, LSFD, full power.
pub fn table1(n_drops: usize) -> ExperimentSpec {
    let lambda = DEFAULT_WAVELENGTH;
    ExperimentSpec {
        name: "table1".into(),
        system: SystemConfig {
            wavelength: lambda,
            atom_size: Some(lambda / 2.0),
            ..reference_system()
        },
        sweep: SweepVariable::DMeta,
        values: vec![lambda, lambda / 2.0, lambda / 4.0, lambda / 8.0],
        n_drops,
        schemes: vec![Scheme::RANDOM_FULL, Scheme::OPT_FULL],
        decoders: vec![Decoder::Lsfd],
        ..ExperimentSpec::default()
    }
}

/// AP-count sweep with `L·M·N = 1200` meta-atoms in total, `U = 1`.
pub fn fig3(n_drops: usize) -> ExperimentSpec {
    ExperimentSpec {
        name: "fig3".into(),
        system: SystemConfig {
            u: 1,
            m: 5,
            rect_grid: true,
            ..reference_system()
        },
        sweep: SweepVariable::L,
        values: vec![5.0, 10.0, 15.0, 20.0, 30.0, 40.0],
        n_total: Some(1200),
        n_drops,
        schemes: vec![Scheme::RANDOM_FULL, Scheme::OPT_FULL],
        decoders: vec![Decoder::Lsfd, Decoder::Egcd],
        ..ExperimentSpec::default()
    }
}

/// The four phase/power combinations at `L = 10`, `M = 10`, `N = 64`.
pub fn power_control(n_drops: usize) -> ExperimentSpec {
    ExperimentSpec {
        name: "power_control".into(),
        system: SystemConfig {
            m: 10,
            ..reference_system()
        },
        n_drops,
        schemes: vec![Scheme::RANDOM_FULL, Scheme::OPT_FULL, Scheme::RANDOM_MAXMIN, Scheme::OPT_MAXMIN],
        decoders: vec![Decoder::Lsfd, Decoder::Egcd],
        beamforming: BeamformingConfig::default(),
        ..ExperimentSpec::default()
    }
}

pub fn by_name(name: &str, n_drops: usize) -> Option<ExperimentSpec> {
    match name {
        "decoders" => Some(decoder_comparison(n_drops)),
        "table1" => Some(table1(n_drops)),
        "fig3" => Some(fig3(n_drops)),
        "power_control" => Some(power_control(n_drops)),
        _ => None,
    }
}
