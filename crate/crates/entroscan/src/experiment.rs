//! Size, power and bandwidth-recovery experiments with CSV output.

use std::fmt::Write as _;

use entroscan_core::bandwidth::{default_bounds, optimize_bandwidth, ObjectiveConfig};
use entroscan_core::simulate::{
    derive_seed, gen_stepwise, h_tau, ExperimentConfig, RejectionTally, StepwiseSpec,
};
use entroscan_core::WindowLayout;
use rayon::prelude::*;

use crate::parallel;
use crate::Result;

/// The τ grid of the power study; 0.25 is the null.
pub const POWER_TAUS: [f64; 5] = [0.25, 0.28, 0.29, 0.30, 0.31];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerRow {
    pub tau: f64,
    pub h_tau: f64,
    pub tally: RejectionTally,
}

/// Rejection rate of a uniform sequence against a τ-process for each τ.
/// Every τ reuses the same trial streams.
pub fn power_table(cfg: &ExperimentConfig, taus: &[f64]) -> Result<Vec<PowerRow>> {
    taus.iter()
        .map(|&tau| {
            Ok(PowerRow {
                tau,
                h_tau: h_tau(tau)?,
                tally: parallel::run_power_experiment(cfg, tau)?,
            })
        })
        .collect()
}

pub fn format_power_table(rows: &[PowerRow]) -> String {
    let mut out = String::from("tau,h_tau,trials,rejections,untestable,power\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.5},{},{},{},{}",
            r.tau,
            r.h_tau,
            r.tally.trials,
            r.tally.rejections,
            r.tally.untestable,
            r.tally.rate()
        );
    }
    out
}

pub fn format_size(cfg: &ExperimentConfig, t: &RejectionTally) -> String {
    format!(
        "trials,n,k,quantile,seed,rejections,untestable,size\n{},{},{},{},{},{},{},{}\n",
        t.trials,
        cfg.n,
        cfg.k,
        cfg.quantile,
        cfg.seed,
        t.rejections,
        t.untestable,
        t.rate()
    )
}

/// Bandwidth selection on stepwise processes over a grid of middle lengths
/// and middle τ.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub total_length: usize,
    pub middle_lengths: Vec<usize>,
    pub taus: Vec<f64>,
    pub runs: usize,
    pub k: usize,
    pub q99: f64,
    pub seed: u64,
    pub layout: WindowLayout,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRun {
    pub l: usize,
    pub tau: f64,
    pub run: usize,
    pub seed: u64,
    pub w_opt: usize,
    pub objective_value: f64,
    pub stationary_verdict: bool,
    pub w_min: usize,
    pub w_max: usize,
}

/// Seed of run `run`. It does not depend on `(l, τ)`, so every cell of the
/// grid sees the same uniform segments.
pub fn sweep_seed(master: u64, run: usize) -> u64 {
    derive_seed(master, 4, run as u64)
}

pub fn sweep_run(cfg: &SweepConfig, l: usize, tau: f64, run: usize) -> Result<SweepRun> {
    let seed = sweep_seed(cfg.seed, run);
    let seq = gen_stepwise(&StepwiseSpec::new(cfg.total_length, l, tau, seed))?;
    let ocfg = ObjectiveConfig {
        k: cfg.k,
        q99: cfg.q99,
        layout: cfg.layout,
    };
    let (lo, hi) = default_bounds(&seq, cfg.k)?;
    let r = optimize_bandwidth(&seq, &ocfg, lo, hi)?;
    Ok(SweepRun {
        l,
        tau,
        run,
        seed,
        w_opt: r.w_opt,
        objective_value: r.objective_value,
        stationary_verdict: r.stationary_verdict,
        w_min: r.w_min,
        w_max: r.w_max,
    })
}

/// All runs, ordered by `l`, then τ, then run.
pub fn run_bandwidth_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRun>> {
    let cells: Vec<(usize, f64, usize)> = cfg
        .middle_lengths
        .iter()
        .flat_map(|&l| {
            cfg.taus
                .iter()
                .flat_map(move |&tau| (0..cfg.runs).map(move |run| (l, tau, run)))
        })
        .collect();
    cells
        .into_par_iter()
        .map(|(l, tau, run)| sweep_run(cfg, l, tau, run))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSummary {
    pub l: usize,
    pub tau: f64,
    pub runs: usize,
    pub mean_w_opt: f64,
    /// Sample standard deviation.
    pub sd_w_opt: f64,
    pub min_w_opt: usize,
    pub max_w_opt: usize,
    /// Share of runs with `w_opt ≥ 0.9 · w_max`.
    pub near_max_share: f64,
    pub stationary_share: f64,
}

/// One summary per `(l, τ)` cell, in first-seen order.
pub fn summarize_sweep(runs: &[SweepRun]) -> Vec<SweepSummary> {
    let mut keys: Vec<(usize, f64)> = Vec::new();
    for r in runs {
        if !keys.iter().any(|&(l, t)| l == r.l && t == r.tau) {
            keys.push((r.l, r.tau));
        }
    }
    keys.into_iter()
        .map(|(l, tau)| {
            let cell: Vec<&SweepRun> = runs.iter().filter(|r| r.l == l && r.tau == tau).collect();
            let n = cell.len() as f64;
            let mean = cell.iter().map(|r| r.w_opt as f64).sum::<f64>() / n;
            let ss = cell
                .iter()
                .map(|r| (r.w_opt as f64 - mean).powi(2))
                .sum::<f64>();
            let sd = if cell.len() > 1 {
                (ss / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let share = |pred: &dyn Fn(&SweepRun) -> bool| {
                cell.iter().filter(|r| pred(r)).count() as f64 / n
            };
            SweepSummary {
                l,
                tau,
                runs: cell.len(),
                mean_w_opt: mean,
                sd_w_opt: sd,
                min_w_opt: cell.iter().map(|r| r.w_opt).min().unwrap_or(0),
                max_w_opt: cell.iter().map(|r| r.w_opt).max().unwrap_or(0),
                near_max_share: share(&|r| r.w_opt as f64 >= 0.9 * r.w_max as f64),
                stationary_share: share(&|r| r.stationary_verdict),
            }
        })
        .collect()
}

pub fn format_sweep_runs(runs: &[SweepRun]) -> String {
    let mut out =
        String::from("l,tau,run,seed,w_opt,objective_value,stationary_verdict,w_min,w_max\n");
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.l,
            r.tau,
            r.run,
            r.seed,
            r.w_opt,
            r.objective_value,
            r.stationary_verdict,
            r.w_min,
            r.w_max
        );
    }
    out
}

pub fn format_sweep_summary(rows: &[SweepSummary]) -> String {
    let mut out = String::from(
        "l,tau,runs,mean_w_opt,sd_w_opt,min_w_opt,max_w_opt,near_max_share,stationary_share\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.1},{:.1},{},{},{},{}",
            r.l,
            r.tau,
            r.runs,
            r.mean_w_opt,
            r.sd_w_opt,
            r.min_w_opt,
            r.max_w_opt,
            r.near_max_share,
            r.stationary_share
        );
    }
    out
}
