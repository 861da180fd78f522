//! Seeded generators for the synthetic processes and the size and power
//! experiment trials.
//!
//! Every random stream is a ChaCha8 generator seeded from
//! `(master seed, stream, index)`, so any trial can be replayed on its own and
//! parallel runs reproduce serial ones exactly.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropy::{count_blocks, SymbolSequence};
use crate::hypothesis::z_score;
use crate::math::ln;
use crate::pipeline::PriceSeries;
use crate::variance::estimate_from_counts;
use crate::{Error, Result};

/// Length of the uniform lead-in segment of the stepwise process.
pub const STEPWISE_LEAD: usize = 10_000;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for stream `stream` of trial `index` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn rng_for(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}

pub(crate) fn uniform_symbols<R: Rng>(rng: &mut R, length: usize, alphabet_size: u32) -> Vec<u32> {
    (0..length)
        .map(|_| rng.random_range(0..alphabet_size))
        .collect()
}

fn tau_symbols<R: Rng>(rng: &mut R, length: usize, alphabet_size: u32, tau: f64) -> Vec<u32> {
    let mut out = Vec::with_capacity(length);
    if length == 0 {
        return out;
    }
    let mut prev = rng.random_range(0..alphabet_size);
    out.push(prev);
    for _ in 1..length {
        if rng.random::<f64>() >= tau {
            let r = rng.random_range(0..alphabet_size - 1);
            prev = if r >= prev { r + 1 } else { r };
        }
        out.push(prev);
    }
    out
}

fn check_length(length: usize, alphabet_size: u32) -> Result<()> {
    if length == 0 {
        return Err(Error::invalid("length", "must be at least 1"));
    }
    if alphabet_size < 2 {
        return Err(Error::invalid("alphabet_size", "must be at least 2"));
    }
    Ok(())
}

pub fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("tau", "must lie in (0, 1)"))
    }
}

/// I.i.d. uniform symbols.
pub fn gen_uniform(length: usize, alphabet_size: u32, seed: u64) -> Result<SymbolSequence> {
    check_length(length, alphabet_size)?;
    let mut rng = rng_for(seed, 0, 0);
    Ok(SymbolSequence::from_trusted(
        uniform_symbols(&mut rng, length, alphabet_size),
        alphabet_size,
    ))
}

/// Chain that repeats the previous symbol with probability `tau` and
/// otherwise moves to one of the other symbols uniformly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauProcessSpec {
    pub tau: f64,
    pub alphabet_size: u32,
    pub length: usize,
    pub seed: u64,
}

impl TauProcessSpec {
    pub fn new(tau: f64, length: usize, seed: u64) -> Self {
        TauProcessSpec {
            tau,
            alphabet_size: 4,
            length,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_length(self.length, self.alphabet_size)?;
        check_tau(self.tau)
    }
}

pub fn gen_tau_process(spec: &TauProcessSpec) -> Result<SymbolSequence> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, 0, 0);
    let symbols = tau_symbols(&mut rng, spec.length, spec.alphabet_size, spec.tau);
    Ok(SymbolSequence::from_trusted(symbols, spec.alphabet_size))
}

/// `H(τ) = −2(τ ln(τ/4) + (1−τ) ln((1−τ)/12))`.
pub fn h_tau(tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(-2.0 * (tau * ln(tau / 4.0) + (1.0 - tau) * ln((1.0 - tau) / 12.0)))
}

/// Uniform lead-in, a τ-process middle of length `l`, uniform tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepwiseSpec {
    pub total_length: usize,
    pub middle_length: usize,
    pub middle_tau: f64,
    pub alphabet_size: u32,
    pub seed: u64,
}

impl StepwiseSpec {
    pub fn new(total_length: usize, middle_length: usize, middle_tau: f64, seed: u64) -> Self {
        StepwiseSpec {
            total_length,
            middle_length,
            middle_tau,
            alphabet_size: 4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_length(self.total_length, self.alphabet_size)?;
        check_tau(self.middle_tau)?;
        if self.total_length < STEPWISE_LEAD + self.middle_length {
            return Err(Error::invalid(
                "total_length",
                "must be at least 10000 + middle_length",
            ));
        }
        Ok(())
    }

    /// Index range of the middle segment.
    pub fn middle(&self) -> core::ops::Range<usize> {
        STEPWISE_LEAD..STEPWISE_LEAD + self.middle_length
    }
}

pub fn gen_stepwise(spec: &StepwiseSpec) -> Result<SymbolSequence> {
    spec.validate()?;
    let a = spec.alphabet_size;
    let tail = spec.total_length - STEPWISE_LEAD - spec.middle_length;
    let mut symbols = uniform_symbols(&mut rng_for(spec.seed, 0, 0), STEPWISE_LEAD, a);
    symbols.extend(tau_symbols(
        &mut rng_for(spec.seed, 1, 0),
        spec.middle_length,
        a,
        spec.middle_tau,
    ));
    symbols.extend(uniform_symbols(&mut rng_for(spec.seed, 2, 0), tail, a));
    Ok(SymbolSequence::from_trusted(symbols, a))
}

/// Continuous returns whose quartile bins reproduce `symbols`: symbol `s`
/// maps to `scale · (s − 2 + u)` with `u` uniform on (0, 1).
pub fn returns_from_symbols(symbols: &SymbolSequence, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 3, 0);
    symbols
        .symbols()
        .iter()
        .map(|&s| {
            let u: f64 = rng.random();
            scale * (f64::from(s) - 2.0 + u.max(1e-12))
        })
        .collect()
}

/// Price path `P₀ exp(Σ r)` with timestamps `t0, t0 + dt, …`.
pub fn prices_from_returns(p0: f64, returns: &[f64], t0: i64, dt: i64) -> Result<PriceSeries> {
    let mut prices = Vec::with_capacity(returns.len() + 1);
    let mut log_p = ln(p0);
    prices.push(p0);
    for r in returns {
        log_p += r;
        prices.push(crate::math::exp(log_p));
    }
    let timestamps = (0..prices.len() as i64).map(|i| t0 + i * dt).collect();
    PriceSeries::new(timestamps, prices)
}

/// Shared settings of the size and power experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub n: usize,
    pub k: usize,
    pub quantile: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::ZeroBlockLength);
        }
        if self.k > self.n {
            return Err(Error::BlockTooLong {
                k: self.k,
                len: self.n,
            });
        }
        if self.quantile.is_nan() || self.quantile <= 0.0 {
            return Err(Error::invalid("quantile", "must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one experiment trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialOutcome {
    Rejected,
    Accepted,
    /// A plug-in variance was clamped; the pair is not tested.
    Untestable,
}

/// Tally of experiment trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RejectionTally {
    pub trials: usize,
    pub rejections: usize,
    pub untestable: usize,
}

impl RejectionTally {
    pub fn push(&mut self, outcome: TrialOutcome) {
        self.trials += 1;
        match outcome {
            TrialOutcome::Rejected => self.rejections += 1,
            TrialOutcome::Accepted => {}
            TrialOutcome::Untestable => self.untestable += 1,
        }
    }

    pub fn merge(mut self, other: RejectionTally) -> Self {
        self.trials += other.trials;
        self.rejections += other.rejections;
        self.untestable += other.untestable;
        self
    }

    /// Rejections over tested pairs.
    pub fn rate(&self) -> f64 {
        let tested = self.trials - self.untestable;
        if tested == 0 {
            0.0
        } else {
            self.rejections as f64 / tested as f64
        }
    }
}

fn pair_outcome(
    a: &SymbolSequence,
    b: &SymbolSequence,
    k: usize,
    quantile: f64,
) -> Result<TrialOutcome> {
    let ea = estimate_from_counts(&count_blocks(a, k)?);
    let eb = estimate_from_counts(&count_blocks(b, k)?);
    match z_score(&ea, &eb) {
        Ok(z) if z.abs() > quantile => Ok(TrialOutcome::Rejected),
        Ok(_) => Ok(TrialOutcome::Accepted),
        Err(Error::Untestable) => Ok(TrialOutcome::Untestable),
        Err(e) => Err(e),
    }
}

/// Two independent uniform 4-symbol sequences, plug-in variances.
pub fn size_trial(cfg: &ExperimentConfig, index: u64) -> Result<TrialOutcome> {
    let a = SymbolSequence::from_trusted(
        uniform_symbols(&mut rng_for(cfg.seed, 0, index), cfg.n, 4),
        4,
    );
    let b = SymbolSequence::from_trusted(
        uniform_symbols(&mut rng_for(cfg.seed, 1, index), cfg.n, 4),
        4,
    );
    pair_outcome(&a, &b, cfg.k, cfg.quantile)
}

/// A uniform sequence against a τ-process, plug-in variances.
pub fn power_trial(cfg: &ExperimentConfig, tau: f64, index: u64) -> Result<TrialOutcome> {
    let a = SymbolSequence::from_trusted(
        uniform_symbols(&mut rng_for(cfg.seed, 0, index), cfg.n, 4),
        4,
    );
    let b = SymbolSequence::from_trusted(
        tau_symbols(&mut rng_for(cfg.seed, 1, index), cfg.n, 4, tau),
        4,
    );
    pair_outcome(&a, &b, cfg.k, cfg.quantile)
}

/// Rejection rate under the null.
pub fn run_size_experiment(cfg: &ExperimentConfig) -> Result<RejectionTally> {
    cfg.validate()?;
    let mut tally = RejectionTally::default();
    for i in 0..cfg.trials as u64 {
        tally.push(size_trial(cfg, i)?);
    }
    Ok(tally)
}

/// Rejection rate against a τ-process alternative.
pub fn run_power_experiment(cfg: &ExperimentConfig, tau: f64) -> Result<RejectionTally> {
    cfg.validate()?;
    check_tau(tau)?;
    let mut tally = RejectionTally::default();
    for i in 0..cfg.trials as u64 {
        tally.push(power_trial(cfg, tau, i)?);
    }
    Ok(tally)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_tau_fixtures() {
        let four_ln4 = 4.0 * 4f64.ln();
        assert!((h_tau(0.25).unwrap() - four_ln4).abs() < 1e-14);
        for (tau, want) in [
            (0.28, 5.5405),
            (0.29, 5.53692),
            (0.30, 5.53237),
            (0.31, 5.52688),
        ] {
            let got = h_tau(tau).unwrap();
            assert!((got - want).abs() < 5e-5 + 1e-12, "tau={tau}: {got}");
        }
        assert!((h_tau(0.5).unwrap() - 5.257_495_6).abs() < 1e-6);
        assert!(h_tau(0.0).is_err() && h_tau(1.0).is_err());
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
        assert_ne!(derive_seed(0, 0, 0), derive_seed(0, 0, 1));
        assert_eq!(
            gen_uniform(100, 4, 9).unwrap(),
            gen_uniform(100, 4, 9).unwrap()
        );
        assert_ne!(
            gen_uniform(100, 4, 9).unwrap(),
            gen_uniform(100, 4, 10).unwrap()
        );
    }

    #[test]
    fn stepwise_layout() {
        let spec = StepwiseSpec::new(12_000, 0, 0.5, 5);
        assert_eq!(gen_stepwise(&spec).unwrap().len(), 12_000);
        assert!(gen_stepwise(&StepwiseSpec::new(12_000, 2001, 0.5, 5)).is_err());
        let s = gen_stepwise(&StepwiseSpec::new(15_000, 3000, 0.99, 5)).unwrap();
        let mid = &s.symbols()[10_001..13_000];
        let repeats = mid.windows(2).filter(|p| p[0] == p[1]).count();
        assert!(repeats > 2900);
    }

    #[test]
    fn tau_chain_never_repeats_by_accident() {
        // with τ tiny almost every step must change symbol
        let s = gen_tau_process(&TauProcessSpec::new(1e-9, 10_000, 3)).unwrap();
        assert!(s.symbols().windows(2).all(|p| p[0] != p[1]));
    }

    #[test]
    fn returns_land_in_their_bins() {
        let s = gen_uniform(1000, 4, 1).unwrap();
        let r = returns_from_symbols(&s, 1e-3, 2);
        for (&sym, &x) in s.symbols().iter().zip(&r) {
            let lo = 1e-3 * (f64::from(sym) - 2.0);
            assert!(x > lo && x < lo + 1e-3);
        }
        let p = prices_from_returns(100.0, &r, 0, 60).unwrap();
        assert_eq!(p.len(), 1001);
    }

    #[test]
    fn infinite_quantile_never_rejects() {
        let cfg = ExperimentConfig {
            trials: 20,
            n: 500,
            k: 2,
            quantile: f64::INFINITY,
            seed: 4,
        };
        assert_eq!(run_size_experiment(&cfg).unwrap().rejections, 0);
    }
}
