//! CSV and JSON emission. Every file is written from rows already in
//! deterministic order, so identical runs give identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use simcf_core::Decoder;

use crate::error::Result;
use crate::runner::ExperimentOutput;
use crate::stats::{cdf_report, CDF_MIN_SAMPLES};

pub const RAW_CSV: &str = "raw.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const CDF_CSV: &str = "cdf.csv";
pub const TRACE_CSV: &str = "trace.csv";
pub const BEAMFORMING_CSV: &str = "beamforming.csv";
pub const POWER_CSV: &str = "power.csv";
pub const FAILURES_CSV: &str = "failures.csv";
pub const SUMMARY_JSON: &str = "summary.json";

pub fn write_rows<W: Write, R: Serialize>(w: W, rows: &[R]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

/// Writes with an explicit header so empty tables still name their columns.
fn write_table<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    let mut csv = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(File::create(path)?));
    csv.write_record(header)?;
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CdfRow {
    sweep_value: f64,
    decoder: Decoder,
    scheme: &'static str,
    se: f64,
    cdf: f64,
}

fn cdf_rows(out: &ExperimentOutput) -> Vec<CdfRow> {
    let mut rows = Vec::new();
    for a in &out.aggregates {
        let xs = out.samples(a.sweep_value, a.decoder, a.scheme);
        if xs.len() < CDF_MIN_SAMPLES {
            log::info!("no CDF for {} {} {}: {} samples", a.sweep_value, a.decoder, a.scheme, xs.len());
            continue;
        }
        let report = cdf_report(&xs).expect("sample count checked");
        rows.extend(report.points.into_iter().map(|(se, cdf)| CdfRow {
            sweep_value: a.sweep_value,
            decoder: a.decoder,
            scheme: a.scheme,
            se,
            cdf,
        }));
    }
    rows
}

#[derive(Serialize)]
struct RunSummary<'a> {
    name: &'a str,
    rows: usize,
    failed_drops: usize,
    mc_invocations: usize,
    files: Vec<&'static str>,
}

/// Writes every table of `out` into `dir` and returns the paths written.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let p = |f: &str| dir.join(f);
    write_table(
        &p(RAW_CSV),
        &["sweep_value", "drop", "ue", "decoder", "scheme", "sinr", "se", "mc_sinr", "mc_std_err"],
        &out.raw,
    )?;
    write_table(
        &p(AGGREGATE_CSV),
        &["sweep_value", "decoder", "scheme", "n_samples", "mean_se", "std_err", "likely95_se", "failed_drops"],
        &out.aggregates,
    )?;
    write_table(&p(CDF_CSV), &["sweep_value", "decoder", "scheme", "se", "cdf"], &cdf_rows(out))?;
    write_table(&p(TRACE_CSV), &["sweep_value", "drop", "iteration", "objective", "accepted"], &out.traces)?;
    write_table(
        &p(BEAMFORMING_CSV),
        &["sweep_value", "drop", "initial", "objective", "evaluations"],
        &out.beamforming,
    )?;
    write_table(
        &p(POWER_CSV),
        &["sweep_value", "drop", "phase", "iterations", "bound", "t_star", "t_max", "min_sinr_full", "min_sinr_after"],
        &out.power,
    )?;
    write_table(&p(FAILURES_CSV), &["sweep_value", "drop", "error"], &out.failures)?;
    let files = vec![RAW_CSV, AGGREGATE_CSV, CDF_CSV, TRACE_CSV, BEAMFORMING_CSV, POWER_CSV, FAILURES_CSV, SUMMARY_JSON];
    let summary = RunSummary {
        name: &out.name,
        rows: out.raw.len(),
        failed_drops: out.failures.len(),
        mc_invocations: out.mc_invocations,
        files: files.clone(),
    };
    let mut w = BufWriter::new(File::create(p(SUMMARY_JSON))?);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(files.into_iter().map(p).collect())
}
