//! Experiment descriptions. A spec is one base [`SystemConfig`], an
//! optional sweep over one of its fields, and the schemes and decoders to
//! evaluate on every drop.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simcf_core::optimizers::{BeamformingConfig, PowerControlConfig};
use simcf_core::{Decoder, SystemConfig};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Values only label replicate points.
    None,
    L,
    K,
    U,
    M,
    N,
    DMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    Random,
    Optimized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    Full,
    Maxmin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scheme {
    pub phase: PhaseMode,
    pub power: PowerMode,
}

impl Scheme {
    pub const RANDOM_FULL: Scheme = Scheme::new(PhaseMode::Random, PowerMode::Full);
    pub const OPT_FULL: Scheme = Scheme::new(PhaseMode::Optimized, PowerMode::Full);
    pub const RANDOM_MAXMIN: Scheme = Scheme::new(PhaseMode::Random, PowerMode::Maxmin);
    pub const OPT_MAXMIN: Scheme = Scheme::new(PhaseMode::Optimized, PowerMode::Maxmin);

    pub const fn new(phase: PhaseMode, power: PowerMode) -> Self {
        Self { phase, power }
    }

    pub fn tag(self) -> &'static str {
        match (self.phase, self.power) {
            (PhaseMode::Random, PowerMode::Full) => "random-full",
            (PhaseMode::Optimized, PowerMode::Full) => "opt-full",
            (PhaseMode::Random, PowerMode::Maxmin) => "random-maxmin",
            (PhaseMode::Optimized, PowerMode::Maxmin) => "opt-maxmin",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub system: SystemConfig,
    pub sweep: SweepVariable,
    pub values: Vec<f64>,
    /// Fixed meta-atom budget `L·M·N`; when set, `N` follows from `L` and
    /// `M` at every sweep point.
    pub n_total: Option<usize>,
    pub n_drops: usize,
    /// Monte-Carlo trials per evaluated UE set; 0 means closed form only.
    pub n_mc_trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub schemes: Vec<Scheme>,
    pub decoders: Vec<Decoder>,
    pub beamforming: BeamformingConfig,
    pub power: PowerControlConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            system: SystemConfig::default(),
            sweep: SweepVariable::None,
            values: vec![0.0],
            n_total: None,
            n_drops: 20,
            n_mc_trials: 0,
            seed: 0,
            output: None,
            schemes: vec![Scheme::RANDOM_FULL, Scheme::OPT_FULL],
            decoders: vec![Decoder::Lsfd, Decoder::Egcd],
            beamforming: BeamformingConfig::default(),
            power: PowerControlConfig::default(),
        }
    }
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(HarnessError::Spec(format!("{what} = {v} is not a positive integer")))
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks the spec and every sweep point's derived configuration.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Spec(m.into()));
        if self.values.is_empty() {
            return bad("values must be non-empty");
        }
        if self.n_drops == 0 {
            return bad("n_drops must be at least 1");
        }
        if self.schemes.is_empty() || self.decoders.is_empty() {
            return bad("schemes and decoders must be non-empty");
        }
        if self.n_total.is_some() && self.sweep == SweepVariable::N {
            return bad("n_total fixes N; it cannot be combined with an N sweep");
        }
        self.beamforming.validate()?;
        if !(self.power.eps > 0.0) {
            return bad("power.eps must be positive");
        }
        for &v in &self.values {
            self.config_at(v)?;
        }
        Ok(())
    }

    /// Base configuration with the sweep variable set to `value`.
    pub fn config_at(&self, value: f64) -> Result<SystemConfig> {
        let mut cfg = self.system.clone();
        match self.sweep {
            SweepVariable::None => {}
            SweepVariable::L => cfg.l = as_count(value, "L")?,
            SweepVariable::K => cfg.k = as_count(value, "K")?,
            SweepVariable::U => cfg.u = as_count(value, "U")?,
            SweepVariable::M => cfg.m = as_count(value, "M")?,
            SweepVariable::N => cfg.n = as_count(value, "N")?,
            SweepVariable::DMeta => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(HarnessError::Spec(format!("d_meta = {value} must be positive")));
                }
                cfg.d_meta = Some(value);
            }
        }
        if let Some(total) = self.n_total {
            let per_layer = cfg.l * cfg.m;
            if total % per_layer != 0 || total < per_layer {
                return Err(HarnessError::Spec(format!(
                    "n_total {total} is not a positive multiple of L·M = {per_layer}"
                )));
            }
            cfg.n = total / per_layer;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn needs_optimization(&self) -> bool {
        self.schemes.iter().any(|s| s.phase == PhaseMode::Optimized)
    }
}
