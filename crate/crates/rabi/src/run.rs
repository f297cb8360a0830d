//! Orchestration of the five experiment modes.
//!
//! Every output is rendered in memory first; files are written only once
//! the whole computation has succeeded, so a failed run leaves nothing
//! behind. `manifest.cfg` echoes the resolved configuration and can be fed
//! back in as a config to repeat the run.

use std::fs;
use std::path::PathBuf;

use rabi_core::estimator::{
    build_grid, run_with_snapshots, simulate_shared_records, BankConfig, InfoGainConfig, OmegaGrid, SharedRecords, TrajectoryBank,
};
use rabi_core::record::steps_for;
use rabi_core::supersystem::ostensible_rate_or_floor;
use rabi_core::wtd::{ideal_wtd_curve, inefficient_wtd, realistic_wtd, uniform_grid};
use rabi_core::{AtomState, DetectorModel, MeasurementRecord, OstensibleRate, SystemParams};
use rayon::prelude::*;

use crate::config::{DetectorKind, ExperimentConfig, Mode};
use crate::ensemble::{info_gain_parallel, thread_pool};
use crate::error::{FormatError, RunError};
use crate::format::{self, round_trip};

pub const MANIFEST: &str = "manifest.cfg";

/// Output file name and contents.
type Output = (String, Vec<u8>);

fn render(name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<(), FormatError>) -> Result<Output, RunError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|source| RunError::Format { path: PathBuf::from(name), source })?;
    Ok((name.to_string(), buf))
}

/// Runs the experiment and returns the paths written.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, RunError> {
    let mode = cfg.validate()?;
    let mut outputs = match mode {
        Mode::SimulateRecord => simulate_record(cfg)?,
        Mode::Posterior => posterior(cfg)?,
        Mode::ConditionalState => conditional_state(cfg)?,
        Mode::InfoGain => info_gain(cfg)?,
        Mode::Wtd => wtd(cfg)?,
    };
    outputs.push((MANIFEST.to_string(), cfg.to_manifest().into_bytes()));

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
    let mut written = Vec::new();
    for (name, bytes) in outputs {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|source| RunError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}

fn header(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> Vec<(String, String)> {
    let mut h: Vec<(String, String)> = extra.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    if let Some(w) = cfg.omega_true {
        h.push(("omega_true".into(), round_trip(w)));
    }
    for (k, v) in
        [("gamma", cfg.gamma), ("eta", cfg.eta), ("gamma_r", cfg.gamma_r), ("gamma_dk", cfg.gamma_dk), ("tau_dd", cfg.tau_dd)]
    {
        h.push((k.into(), round_trip(v)));
    }
    h.push(("master_seed".into(), cfg.master_seed.to_string()));
    h.push(("prng".into(), rabi_core::seed::PRNG_FAMILY.into()));
    h
}

fn shared_records(cfg: &ExperimentConfig, with_detector: bool) -> Result<SharedRecords, RunError> {
    let det = cfg.detector_params()?;
    let omega = cfg.require_omega_true()?;
    Ok(simulate_shared_records(
        &SystemParams::new(omega, cfg.gamma)?,
        det.eta,
        with_detector.then_some(&det),
        cfg.duration,
        cfg.dt,
        cfg.master_seed,
        0,
    )?)
}

fn record_output(cfg: &ExperimentConfig, name: &str, kind: &str, rec: &MeasurementRecord) -> Result<Output, RunError> {
    let h = header(cfg, &[("record", kind.to_string())]);
    render(name, |w| format::write_record(w, rec, &h))
}

fn simulate_record(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let avalanche = cfg.detector == DetectorKind::Avalanche;
    let recs = shared_records(cfg, avalanche)?;
    let mut out = vec![record_output(cfg, "absorptions.csv", "absorptions", &recs.absorptions)?];
    if let Some(a) = &recs.avalanches {
        out.push(record_output(cfg, "avalanches.csv", "avalanches", a)?);
    }
    Ok(out)
}

fn bank_config(cfg: &ExperimentConfig, model: DetectorModel, eps: OstensibleRate) -> BankConfig {
    BankConfig { gamma: cfg.gamma, model, eps, dt: cfg.dt, scheme: cfg.scheme, initial: AtomState::ground() }
}

fn snapshot_steps(cfg: &ExperimentConfig) -> u64 {
    steps_for(cfg.snapshot_every, cfg.dt).max(1)
}

fn posterior(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let model = cfg.detector_model()?;
    let mut out = Vec::new();
    let (record, eps) = match &cfg.record_file {
        Some(path) => {
            let file = fs::File::open(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
            let (rec, _) = format::read_record(std::io::BufReader::new(file))
                .map_err(|source| RunError::Format { path: path.clone(), source })?;
            // without a known drive, use the observed event rate
            let rate = rec.len() as f64 / rec.duration();
            let eps = if rate > 0.0 { OstensibleRate::new(rate)? } else { OstensibleRate::floor(cfg.gamma) };
            (rec, eps)
        }
        None => {
            let recs = shared_records(cfg, matches!(model, DetectorModel::Realistic(_)))?;
            let eps = ostensible_rate_or_floor(cfg.require_omega_true()?, cfg.gamma, model.eta())?;
            let rec = recs.avalanches.unwrap_or(recs.absorptions);
            out.push(record_output(cfg, "record.csv", "observed", &rec)?);
            (rec, eps)
        }
    };
    let grid = build_grid(cfg.omega_max, cfg.n_nodes)?;
    let mut bank = TrajectoryBank::new(grid.clone(), bank_config(cfg, model, eps))?;
    let mut rows = Vec::new();
    let mut summary = (Vec::new(), Vec::new(), Vec::new());
    run_with_snapshots(&mut bank, &record, snapshot_steps(cfg), |b| {
        let p = b.posterior()?;
        summary.0.push(p.time);
        summary.1.push(p.info_gain_bits);
        summary.2.push(p.mean_abs_omega(&grid));
        rows.push((p.time, p.probabilities));
        Ok(())
    })?;
    out.push(render("posterior.csv", |w| format::write_posterior(w, grid.nodes(), &rows))?);
    out.push(render("posterior_summary.csv", |w| {
        format::write_columns(w, &["info_gain_bits", "mean_abs_omega"], &summary.0, &[summary.1, summary.2])
    })?);
    Ok(out)
}

/// The four observers compared in the conditional-state experiment.
const VARIANTS: [&str; 4] = ["known_ideal", "unknown_ideal", "known_realistic", "unknown_realistic"];

fn conditional_state(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let det = cfg.detector_params()?;
    let omega = cfg.require_omega_true()?.abs();
    let recs = shared_records(cfg, true)?;
    let avalanches = recs.avalanches.as_ref().expect("detector given");
    let eps = ostensible_rate_or_floor(omega, cfg.gamma, det.eta)?;
    let full = build_grid(cfg.omega_max, cfg.n_nodes)?;
    let known = if omega > 0.0 {
        OmegaGrid::from_nodes(vec![-omega, omega], vec![1.0, 1.0])?
    } else {
        OmegaGrid::from_nodes(vec![0.0], vec![1.0])?
    };
    let every = snapshot_steps(cfg);
    let pool = thread_pool()?;
    let traces = pool.install(|| {
        VARIANTS
            .par_iter()
            .map(|name| {
                let grid = if name.starts_with("known") { known.clone() } else { full.clone() };
                let (model, record) = if name.ends_with("ideal") {
                    (DetectorModel::Ideal { eta: det.eta }, &recs.absorptions)
                } else {
                    (DetectorModel::Realistic(det), avalanches)
                };
                let mut bank = TrajectoryBank::new(grid, bank_config(cfg, model, eps))?;
                let mut rows = Vec::new();
                run_with_snapshots(&mut bank, record, every, |b| {
                    rows.push((b.elapsed(), b.best_state()?));
                    Ok(())
                })?;
                Ok(rows)
            })
            .collect::<Result<Vec<Vec<(f64, AtomState)>>, rabi_core::Error>>()
    })?;
    let time: Vec<f64> = traces[0].iter().map(|r| r.0).collect();
    let z: Vec<Vec<f64>> = traces.iter().map(|t| t.iter().map(|r| r.1.z).collect()).collect();
    let mut out = vec![
        record_output(cfg, "record_ideal.csv", "absorptions", &recs.absorptions)?,
        record_output(cfg, "record_avalanche.csv", "avalanches", avalanches)?,
        render("z_traces.csv", |w| format::write_columns(w, &VARIANTS, &time, &z))?,
    ];
    for (name, rows) in VARIANTS.iter().zip(&traces) {
        out.push(render(&format!("state_{name}.csv"), |w| format::write_states(w, rows))?);
    }
    Ok(out)
}

fn info_gain(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let ig = InfoGainConfig {
        omega_max: cfg.omega_max,
        n_nodes: cfg.n_nodes,
        gamma: cfg.gamma,
        dt: cfg.dt,
        duration: cfg.duration,
        snapshot_every: cfg.snapshot_every,
        model: cfg.detector_model()?,
        scheme: cfg.scheme,
        ensemble_size: cfg.ensemble_size,
        master_seed: cfg.master_seed,
    };
    let curve = info_gain_parallel(&ig, &thread_pool()?)?;
    Ok(vec![render("info_gain.csv", |w| format::write_info_gain(w, &curve))?])
}

fn wtd(cfg: &ExperimentConfig) -> Result<Vec<Output>, RunError> {
    let omega = cfg.require_omega_true()?;
    let det = cfg.detector_params()?;
    let grid = uniform_grid(cfg.tau_max, cfg.tau_step);
    let (kind, curve) = match cfg.detector {
        DetectorKind::Avalanche => ("avalanche", realistic_wtd(omega, &det, &grid)?),
        DetectorKind::Ideal if det.eta < 1.0 => ("inefficient", inefficient_wtd(omega, cfg.gamma, det.eta, &grid)?),
        DetectorKind::Ideal => ("ideal", ideal_wtd_curve(omega, cfg.gamma, &grid)),
    };
    let h = header(cfg, &[("wtd", kind.to_string())]);
    Ok(vec![render("wtd.csv", |w| format::write_wtd(w, &curve, &h))?])
}
