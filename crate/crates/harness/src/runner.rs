//! Runs an [`ExperimentSpec`]: every (sweep point, drop) pair is an
//! independent job on the rayon pool; results are gathered in
//! (point, drop) order and aggregated single-threaded.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use simcf_core::network::{Network, SimModel};
use simcf_core::optimizers::{
    allocate_pilots, bisection_bound, maxmin_power_network, optimize_beamforming, BeamformingConfig,
};
use simcf_core::scenario::generate_drop;
use simcf_core::se_engine::{evaluate, uatf_monte_carlo};
use simcf_core::sim_physics::PhaseTensor;
use simcf_core::{Decoder, Network64, SimModel64, SystemConfig};

use crate::error::Result;
use crate::spec::{ExperimentSpec, PhaseMode, PowerMode};
use crate::stats::{summarize, Summary};

/// Independent random streams derived from the master seed.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Drop = 1,
    Phase = 2,
    Beamforming = 3,
    MonteCarlo = 4,
}

/// Seed for item `index` of `stream`. Drop seeds ignore the sweep point, so
/// drop `d` has the same layout and shadowing at every point that keeps
/// `L` and `K` fixed.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream as u64);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RawRow {
    pub sweep_value: f64,
    pub drop: usize,
    pub ue: usize,
    pub decoder: Decoder,
    pub scheme: &'static str,
    pub sinr: f64,
    pub se: f64,
    pub mc_sinr: Option<f64>,
    pub mc_std_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub sweep_value: f64,
    pub drop: usize,
    pub iteration: usize,
    pub objective: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeamformingRecord {
    pub sweep_value: f64,
    pub drop: usize,
    pub initial: f64,
    pub objective: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerRecord {
    pub sweep_value: f64,
    pub drop: usize,
    pub phase: PhaseMode,
    pub iterations: usize,
    pub bound: usize,
    pub t_star: f64,
    pub t_max: f64,
    /// Smallest LSFD SINR at full power.
    pub min_sinr_full: f64,
    /// Smallest LSFD SINR after power control.
    pub min_sinr_after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureRecord {
    pub sweep_value: f64,
    pub drop: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub sweep_value: f64,
    pub decoder: Decoder,
    pub scheme: &'static str,
    pub n_samples: usize,
    pub mean_se: f64,
    pub std_err: f64,
    pub likely95_se: f64,
    pub failed_drops: usize,
}

impl AggregateRow {
    fn new(sweep_value: f64, decoder: Decoder, scheme: &'static str, s: Summary, failed_drops: usize) -> Self {
        Self {
            sweep_value,
            decoder,
            scheme,
            n_samples: s.n,
            mean_se: s.mean,
            std_err: s.std_err,
            likely95_se: s.likely95,
            failed_drops,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct DropResult {
    rows: Vec<RawRow>,
    traces: Vec<TraceRow>,
    beamforming: Option<BeamformingRecord>,
    power: Vec<PowerRecord>,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub name: String,
    pub raw: Vec<RawRow>,
    pub aggregates: Vec<AggregateRow>,
    pub traces: Vec<TraceRow>,
    pub beamforming: Vec<BeamformingRecord>,
    pub power: Vec<PowerRecord>,
    pub failures: Vec<FailureRecord>,
    /// Calls into the Monte-Carlo estimator.
    pub mc_invocations: usize,
}

impl ExperimentOutput {
    pub fn aggregate(&self, sweep_value: f64, decoder: Decoder, scheme: &str) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.sweep_value == sweep_value && a.decoder == decoder && a.scheme == scheme)
    }

    /// Per-UE SE samples of one (point, decoder, scheme) group.
    pub fn samples(&self, sweep_value: f64, decoder: Decoder, scheme: &str) -> Vec<f64> {
        self.raw
            .iter()
            .filter(|r| r.sweep_value == sweep_value && r.decoder == decoder && r.scheme == scheme)
            .map(|r| r.se)
            .collect()
    }
}

fn min_lsfd_sinr(net: &Network64) -> Result<f64> {
    Ok(evaluate(net, Decoder::Lsfd)?
        .iter()
        .map(|u| u.breakdown.sinr)
        .fold(f64::INFINITY, f64::min))
}

struct DropJob<'a> {
    spec: &'a ExperimentSpec,
    cfg: &'a SystemConfig,
    sim: Arc<SimModel64>,
    value: f64,
    drop: usize,
    mc_calls: &'a AtomicUsize,
}

impl DropJob<'_> {
    fn run(&self) -> Result<DropResult> {
        let (spec, cfg, d) = (self.spec, self.cfg, self.drop as u64);
        let layout = generate_drop::<f64>(cfg, derive_seed(spec.seed, Stream::Drop, d))?;
        let pilots = allocate_pilots(&layout.beta, cfg.tau_p)?;
        let layout = layout.with_pilots(&pilots.pilot_of);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, Stream::Phase, d));
        let phases = PhaseTensor::random(cfg.l, cfg.m, self.sim.atoms(), &mut rng);
        let random = Network::new(cfg, &layout, self.sim.clone(), phases)?;

        let mut out = DropResult::default();
        let optimized = if spec.needs_optimization() {
            let mut net = random.clone();
            let bf = BeamformingConfig {
                seed: derive_seed(spec.seed, Stream::Beamforming, d),
                ..spec.beamforming.clone()
            };
            let res = optimize_beamforming(&mut net, &bf)?;
            out.traces = res
                .trace
                .iter()
                .map(|t| TraceRow {
                    sweep_value: self.value,
                    drop: self.drop,
                    iteration: t.iteration,
                    objective: t.objective,
                    accepted: t.accepted,
                })
                .collect();
            out.beamforming = Some(BeamformingRecord {
                sweep_value: self.value,
                drop: self.drop,
                initial: res.initial,
                objective: res.objective,
                evaluations: res.evaluations,
            });
            Some(net)
        } else {
            None
        };

        for (si, scheme) in spec.schemes.iter().enumerate() {
            let mut net = match scheme.phase {
                PhaseMode::Random => random.clone(),
                PhaseMode::Optimized => optimized.clone().expect("optimized network built above"),
            };
            if scheme.power == PowerMode::Maxmin {
                let min_sinr_full = min_lsfd_sinr(&net)?;
                let sol = maxmin_power_network(&mut net, cfg.p_max, &spec.power)?;
                out.power.push(PowerRecord {
                    sweep_value: self.value,
                    drop: self.drop,
                    phase: scheme.phase,
                    iterations: sol.iterations,
                    bound: bisection_bound(sol.t_max, spec.power.eps),
                    t_star: sol.t_star,
                    t_max: sol.t_max,
                    min_sinr_full,
                    min_sinr_after: min_lsfd_sinr(&net)?,
                });
            }
            for (di, &decoder) in spec.decoders.iter().enumerate() {
                let ues = evaluate(&net, decoder)?;
                let mc = if spec.n_mc_trials > 0 {
                    self.mc_calls.fetch_add(1, Ordering::Relaxed);
                    let a: Vec<_> = ues.iter().map(|u| u.weights.clone()).collect();
                    let idx = (d << 16) | ((si as u64) << 8) | di as u64;
                    let seed = derive_seed(spec.seed, Stream::MonteCarlo, idx);
                    Some(uatf_monte_carlo(&net, &a, spec.n_mc_trials, seed))
                } else {
                    None
                };
                out.rows.extend(ues.iter().map(|u| RawRow {
                    sweep_value: self.value,
                    drop: self.drop,
                    ue: u.k,
                    decoder,
                    scheme: scheme.tag(),
                    sinr: u.breakdown.sinr,
                    se: u.se,
                    mc_sinr: mc.as_ref().map(|m| m[u.k].sinr),
                    mc_std_err: mc.as_ref().map(|m| m[u.k].std_err),
                }));
            }
        }
        Ok(out)
    }
}

/// Pools per-UE SE over drops for every (point, decoder, scheme) group.
/// The result is independent of the order of `rows`.
pub fn aggregate(rows: &[RawRow], failures: &[FailureRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(f64, Decoder, &'static str)> = rows.iter().map(|r| (r.sweep_value, r.decoder, r.scheme)).collect();
    let order = |a: &(f64, Decoder, &str), b: &(f64, Decoder, &str)| {
        a.0.total_cmp(&b.0).then(a.1.tag().cmp(b.1.tag())).then(a.2.cmp(b.2))
    };
    keys.sort_by(order);
    keys.dedup_by(|a, b| order(a, b).is_eq());
    keys.into_iter()
        .map(|(value, decoder, scheme)| {
            let xs: Vec<f64> = rows
                .iter()
                .filter(|r| r.sweep_value == value && r.decoder == decoder && r.scheme == scheme)
                .map(|r| r.se)
                .collect();
            let failed = failures.iter().filter(|f| f.sweep_value == value).count();
            AggregateRow::new(value, decoder, scheme, summarize(&xs), failed)
        })
        .collect()
}

/// Runs every sweep point and drop of `spec` on the current rayon pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let configs: Vec<SystemConfig> = spec.values.iter().map(|&v| spec.config_at(v)).collect::<Result<_>>()?;
    let sims: Vec<Arc<SimModel64>> = configs
        .iter()
        .map(|c| SimModel::new(c).map(Arc::new))
        .collect::<Result<_, _>>()?;
    let mc_calls = AtomicUsize::new(0);
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|p| (0..spec.n_drops).map(move |d| (p, d)))
        .collect();
    let results: Vec<(usize, usize, Result<DropResult>)> = jobs
        .into_par_iter()
        .map(|(p, d)| {
            let job = DropJob {
                spec,
                cfg: &configs[p],
                sim: sims[p].clone(),
                value: spec.values[p],
                drop: d,
                mc_calls: &mc_calls,
            };
            log::debug!("{}: point {} drop {d}", spec.name, spec.values[p]);
            (p, d, job.run())
        })
        .collect();

    let mut out = ExperimentOutput {
        name: spec.name.clone(),
        ..ExperimentOutput::default()
    };
    for (p, d, res) in results {
        match res {
            Ok(r) => {
                out.raw.extend(r.rows);
                out.traces.extend(r.traces);
                out.beamforming.extend(r.beamforming);
                out.power.extend(r.power);
            }
            Err(e) => {
                log::warn!("{}: point {} drop {d} skipped: {e}", spec.name, spec.values[p]);
                out.failures.push(FailureRecord {
                    sweep_value: spec.values[p],
                    drop: d,
                    error: e.to_string(),
                });
            }
        }
    }
    out.aggregates = aggregate(&out.raw, &out.failures);
    out.mc_invocations = mc_calls.into_inner();
    Ok(out)
}
