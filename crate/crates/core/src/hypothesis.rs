//! The two-window equal-entropy test and Monte Carlo calibration of its
//! critical values.
//!
//! The statistic is `z = (Ĥ₂ − Ĥ₁) / sqrt(Var₁ + Var₂)` with `Ĥ₂` the later
//! window. Near maximum entropy `z` is not normal, so it is compared against
//! empirical quantiles of `|z|` rather than normal ones.

use alloc::vec::Vec;
use core::ops::Range;

use crate::entropy::SymbolSequence;
use crate::entropy::{count_blocks, entropy_plugin, min_length, EntropyEstimate};
use crate::math::{ceil, sqrt};
use crate::simulate::{rng_for, uniform_symbols};
use crate::variance::{estimate_from_counts, variance_max};
use crate::{Error, Result};

/// Empirical 99% quantile of `|z|` for uniform 4-symbol sequences,
/// `n = 2·10⁵`, `k = 7`.
pub const DEFAULT_Q99: f64 = 3.30722;
/// Empirical 95% quantile, same setting as [`DEFAULT_Q99`].
pub const DEFAULT_Q95: f64 = 2.54542;

/// Sign of the entropy change from the earlier to the later window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Increase,
    Decrease,
    NoChange,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Increase => "increase",
            Direction::Decrease => "decrease",
            Direction::NoChange => "none",
        }
    }
}

/// Outcome of one two-window test.
#[derive(Clone, Debug, PartialEq)]
pub struct TestResult {
    pub z: f64,
    pub significant: bool,
    pub direction: Direction,
    pub quantile_used: f64,
    pub window_a: Option<Range<usize>>,
    pub window_b: Option<Range<usize>>,
}

impl TestResult {
    pub fn with_windows(mut self, a: Range<usize>, b: Range<usize>) -> Self {
        self.window_a = Some(a);
        self.window_b = Some(b);
        self
    }
}

/// How the variance enters `z` during calibration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarianceMode {
    /// The uniform closed form for both windows.
    AnalyticUniform,
    /// The plug-in estimate of each window.
    Plugin,
}

impl VarianceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            VarianceMode::AnalyticUniform => "analytic",
            VarianceMode::Plugin => "plugin",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuantileSource {
    ReferenceDefault,
    Calibrated,
}

impl QuantileSource {
    pub fn as_str(self) -> &'static str {
        match self {
            QuantileSource::ReferenceDefault => "reference_default",
            QuantileSource::Calibrated => "calibrated",
        }
    }
}

/// Settings of a calibration run, kept with its quantiles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationInfo {
    pub sims: usize,
    /// Trials whose `|z|` entered the quantiles.
    pub used: usize,
    pub n: usize,
    pub k: usize,
    pub alphabet_size: u32,
    pub seed: u64,
    pub variance_mode: VarianceMode,
}

/// Critical values for `|z|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantileTable {
    pub q95: f64,
    pub q99: f64,
    pub source: QuantileSource,
    pub calibration: Option<CalibrationInfo>,
}

/// Percentile rule used for every empirical quantile in this crate.
pub const PERCENTILE_RULE: &str = "nearest-rank";

impl QuantileTable {
    pub fn reference_default() -> Self {
        QuantileTable {
            q95: DEFAULT_Q95,
            q99: DEFAULT_Q99,
            source: QuantileSource::ReferenceDefault,
            calibration: None,
        }
    }

    pub fn new(
        q95: f64,
        q99: f64,
        source: QuantileSource,
        calibration: Option<CalibrationInfo>,
    ) -> Result<Self> {
        if !(q95 > 0.0 && q99 > q95 && q99.is_finite()) {
            return Err(Error::DegenerateQuantiles { q95, q99 });
        }
        Ok(QuantileTable {
            q95,
            q99,
            source,
            calibration,
        })
    }
}

impl Default for QuantileTable {
    fn default() -> Self {
        QuantileTable::reference_default()
    }
}

/// `z` from raw entropy values and variances.
pub fn z_from_parts(h1: f64, var1: f64, h2: f64, var2: f64) -> Result<f64> {
    let v = var1 + var2;
    if v.is_nan() || v <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((h2 - h1) / sqrt(v))
}

/// `z = (Ĥ₂ − Ĥ₁) / sqrt(Var₁ + Var₂)`; `est2` is the later window.
pub fn z_score(est1: &EntropyEstimate, est2: &EntropyEstimate) -> Result<f64> {
    if !est1.is_testable() || !est2.is_testable() {
        return Err(Error::Untestable);
    }
    z_from_parts(est1.value, est1.variance, est2.value, est2.variance)
}

/// Verdict for a given `z`.
pub fn classify(z: f64, quantile: f64) -> TestResult {
    let significant = z.abs() > quantile;
    let direction = match (significant, z > 0.0) {
        (false, _) => Direction::NoChange,
        (true, true) => Direction::Increase,
        (true, false) => Direction::Decrease,
    };
    TestResult {
        z,
        significant,
        direction,
        quantile_used: quantile,
        window_a: None,
        window_b: None,
    }
}

/// Reject equal entropy when `|z| > quantile`.
pub fn test_equal_entropy(
    est1: &EntropyEstimate,
    est2: &EntropyEstimate,
    quantile: f64,
) -> Result<TestResult> {
    if quantile.is_nan() || quantile <= 0.0 {
        return Err(Error::invalid("quantile", "must be positive"));
    }
    Ok(classify(z_score(est1, est2)?, quantile))
}

/// Nearest-rank percentile of sorted data: `sorted[⌈q·N⌉ − 1]`.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid("q", "must lie in (0, 1]"));
    }
    let rank = ceil(q * sorted.len() as f64 - 1e-9).max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

/// Parameters of a null-hypothesis calibration run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationConfig {
    pub n: usize,
    pub k: usize,
    pub alphabet_size: u32,
    pub sims: usize,
    pub seed: u64,
    pub variance_mode: VarianceMode,
    /// Require `n ≥ min_length(|A|^k)` in analytic mode.
    pub enforce_min_length: bool,
}

/// Smallest accepted number of simulations.
pub const MIN_SIMS: usize = 100;

impl CalibrationConfig {
    pub fn new(
        n: usize,
        k: usize,
        alphabet_size: u32,
        sims: usize,
        seed: u64,
        variance_mode: VarianceMode,
    ) -> Self {
        CalibrationConfig {
            n,
            k,
            alphabet_size,
            sims,
            seed,
            variance_mode,
            enforce_min_length: true,
        }
    }

    fn events(&self) -> Result<u64> {
        u64::from(self.alphabet_size)
            .checked_pow(self.k as u32)
            .ok_or_else(|| Error::invalid("k", "alphabet_size^k overflows"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sims < MIN_SIMS {
            return Err(Error::invalid("sims", "must be at least 100"));
        }
        if self.alphabet_size < 2 {
            return Err(Error::invalid("alphabet_size", "must be at least 2"));
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
        let m = self.events()?;
        if self.variance_mode == VarianceMode::AnalyticUniform && self.enforce_min_length {
            let needed = min_length(m)?;
            if (self.n as u64) < needed {
                return Err(Error::TooShort {
                    needed: needed as usize,
                    got: self.n,
                });
            }
        }
        Ok(())
    }
}

/// `|z|` for trial `index`, or `None` when a plug-in variance was clamped.
pub fn calibration_trial(cfg: &CalibrationConfig, index: u64) -> Result<Option<f64>> {
    let draw = |stream: u64| {
        let mut rng = rng_for(cfg.seed, stream, index);
        SymbolSequence::new(
            uniform_symbols(&mut rng, cfg.n, cfg.alphabet_size),
            cfg.alphabet_size,
        )
    };
    let a = count_blocks(&draw(0)?, cfg.k)?;
    let b = count_blocks(&draw(1)?, cfg.k)?;
    match cfg.variance_mode {
        VarianceMode::AnalyticUniform => {
            let v = variance_max(cfg.events()?, cfg.n as u64, cfg.k as u64)?;
            Ok(Some(
                z_from_parts(entropy_plugin(&a), v, entropy_plugin(&b), v)?.abs(),
            ))
        }
        VarianceMode::Plugin => match z_score(&estimate_from_counts(&a), &estimate_from_counts(&b))
        {
            Ok(z) => Ok(Some(z.abs())),
            Err(Error::Untestable) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

/// Quantile table from the collected `|z|` of a calibration run.
pub fn quantiles_from_samples(
    cfg: &CalibrationConfig,
    mut abs_z: Vec<f64>,
) -> Result<QuantileTable> {
    abs_z.sort_by(f64::total_cmp);
    let q95 = nearest_rank(&abs_z, 0.95)?;
    let q99 = nearest_rank(&abs_z, 0.99)?;
    let info = CalibrationInfo {
        sims: cfg.sims,
        used: abs_z.len(),
        n: cfg.n,
        k: cfg.k,
        alphabet_size: cfg.alphabet_size,
        seed: cfg.seed,
        variance_mode: cfg.variance_mode,
    };
    QuantileTable::new(q95, q99, QuantileSource::Calibrated, Some(info))
}

/// Empirical 95% and 99% quantiles of `|z|` for pairs of independent
/// uniform sequences.
pub fn calibrate_quantiles(cfg: &CalibrationConfig) -> Result<QuantileTable> {
    cfg.validate()?;
    let mut samples = Vec::with_capacity(cfg.sims);
    for i in 0..cfg.sims as u64 {
        if let Some(z) = calibration_trial(cfg, i)? {
            samples.push(z);
        }
    }
    quantiles_from_samples(cfg, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(value: f64, variance: f64) -> EntropyEstimate {
        EntropyEstimate {
            value,
            variance,
            raw_variance: variance,
            k: 1,
            n_eff: 100,
            m_hat: 4,
            variance_clamped: false,
            below_min_length: false,
        }
    }

    #[test]
    fn z_fixtures() {
        let a = est(5.54, 2e-5);
        let b = est(5.52, 2e-5);
        assert!((z_score(&a, &b).unwrap() + 3.162_277_660_168_379).abs() < 1e-12);
        assert_eq!(z_score(&a, &a).unwrap(), 0.0);
        assert_eq!(z_score(&a, &b).unwrap(), -z_score(&b, &a).unwrap());
        assert_eq!(
            z_score(&est(1.0, 0.0), &est(2.0, 0.0)),
            Err(Error::ZeroVariance)
        );
        let mut c = est(1.0, 0.0);
        c.variance_clamped = true;
        assert_eq!(z_score(&a, &c), Err(Error::Untestable));
    }

    #[test]
    fn verdicts() {
        let r = classify(0.0, DEFAULT_Q99);
        assert!(!r.significant);
        assert_eq!(r.direction, Direction::NoChange);
        let r = classify(-3.5, DEFAULT_Q99);
        assert!(r.significant);
        assert_eq!(r.direction, Direction::Decrease);
        let r = classify(DEFAULT_Q99, DEFAULT_Q99);
        assert!(!r.significant);
        assert_eq!(classify(4.0, DEFAULT_Q99).direction, Direction::Increase);
        assert!(test_equal_entropy(&est(1.0, 1.0), &est(1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn nearest_rank_rule() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.99).unwrap(), 99.0);
        assert_eq!(nearest_rank(&v, 0.95).unwrap(), 95.0);
        assert_eq!(nearest_rank(&v, 1.0).unwrap(), 100.0);
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap(), 1.0);
        assert_eq!(nearest_rank(&[7.0], 0.01).unwrap(), 7.0);
        assert!(nearest_rank(&[], 0.5).is_err());
    }

    #[test]
    fn table_invariants() {
        assert!(QuantileTable::new(3.0, 2.0, QuantileSource::Calibrated, None).is_err());
        assert!(QuantileTable::new(0.0, 2.0, QuantileSource::Calibrated, None).is_err());
        let t = QuantileTable::reference_default();
        assert!(t.q99 > t.q95);
    }

    #[test]
    fn calibration_validation() {
        let mut cfg = CalibrationConfig::new(2000, 7, 4, 100, 1, VarianceMode::AnalyticUniform);
        assert!(matches!(
            cfg.validate(),
            Err(Error::TooShort {
                needed: 234_436,
                ..
            })
        ));
        cfg.enforce_min_length = false;
        assert!(cfg.validate().is_ok());
        cfg.sims = 99;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn small_calibration_is_nearest_rank() {
        let cfg = CalibrationConfig::new(500, 2, 4, 100, 11, VarianceMode::Plugin);
        let t = calibrate_quantiles(&cfg).unwrap();
        assert!(t.q99 >= t.q95);
        let mut zs: Vec<f64> = (0..100)
            .filter_map(|i| calibration_trial(&cfg, i).unwrap())
            .collect();
        zs.sort_by(f64::total_cmp);
        assert!(zs.contains(&t.q95) && zs.contains(&t.q99));
        assert_eq!(t, calibrate_quantiles(&cfg).unwrap());
    }
}
