//! Rayon drivers that reproduce the serial core results exactly.

use entroscan_core::bandwidth::{
    best_of, check_bracket, grid_points, objective_detail, BandwidthResult, ObjectiveConfig,
};
use entroscan_core::hypothesis::{
    calibration_trial, quantiles_from_samples, CalibrationConfig, QuantileTable,
};
use entroscan_core::pipeline::{check_scan, scan_positions, scan_records, ScanParams, ScanReport};
use entroscan_core::simulate::{
    check_tau, power_trial, size_trial, ExperimentConfig, RejectionTally, TrialOutcome,
};
use entroscan_core::window::BlockStream;
use entroscan_core::SymbolSequence;
use rayon::prelude::*;

use crate::Result;

/// Positions handled by one scan task; each task slides its own windows.
const SCAN_CHUNK: usize = 4096;

pub fn calibrate_quantiles(cfg: &CalibrationConfig) -> Result<QuantileTable> {
    cfg.validate()?;
    let samples = (0..cfg.sims as u64)
        .into_par_iter()
        .map(|i| calibration_trial(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(quantiles_from_samples(
        cfg,
        samples.into_iter().flatten().collect(),
    )?)
}

fn tally<F>(trials: usize, trial: F) -> Result<RejectionTally>
where
    F: Fn(u64) -> entroscan_core::Result<TrialOutcome> + Sync + Send,
{
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(trial)
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = RejectionTally::default();
    for o in outcomes {
        t.push(o);
    }
    Ok(t)
}

pub fn run_size_experiment(cfg: &ExperimentConfig) -> Result<RejectionTally> {
    cfg.validate()?;
    tally(cfg.trials, |i| size_trial(cfg, i))
}

pub fn run_power_experiment(cfg: &ExperimentConfig, tau: f64) -> Result<RejectionTally> {
    cfg.validate()?;
    check_tau(tau)?;
    tally(cfg.trials, |i| power_trial(cfg, tau, i))
}

pub fn rolling_scan(
    seq: &SymbolSequence,
    w: usize,
    k: usize,
    quantile: f64,
    step: usize,
) -> Result<ScanReport> {
    let stream = BlockStream::new(seq, k)?;
    check_scan(&stream, w, quantile, step)?;
    let positions = scan_positions(seq.len(), w, step);
    let chunks = positions
        .par_chunks(SCAN_CHUNK)
        .map(|c| scan_records(&stream, w, quantile, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScanReport {
        records: chunks.into_iter().flatten().collect(),
        params: ScanParams {
            w,
            k,
            quantile,
            step,
            thresholds: None,
        },
    })
}

/// Objective on every grid point, evaluated concurrently.
pub fn grid_search(
    seq: &SymbolSequence,
    cfg: &ObjectiveConfig,
    w_min: usize,
    w_max: usize,
    step: usize,
) -> Result<BandwidthResult> {
    cfg.validate()?;
    check_bracket(w_min, w_max, cfg.k, seq.len())?;
    let stream = BlockStream::new(seq, cfg.k)?;
    let evaluations = grid_points(w_min, w_max, step)
        .into_par_iter()
        .map(|w| Ok((w, objective_detail(&stream, w, cfg)?.value)))
        .collect::<Result<Vec<_>, entroscan_core::Error>>()?;
    Ok(best_of(evaluations, w_min, w_max)?)
}
