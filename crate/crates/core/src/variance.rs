//! Variance of the plug-in entropy estimator.
//!
//! [`variance_true`] is the `O(n⁻⁴)` approximation from known probabilities,
//! [`variance_plugin`] its estimator from observed counts, and
//! [`variance_max`] the closed form at the uniform distribution. The
//! [`SeriesExpansion`] evaluates the Taylor-series expectations built from
//! exact central moments; it is the independent route used to check the
//! closed forms.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::entropy::{
    count_blocks, min_length, validate_probabilities, BlockCounts, EntropyEstimate, SymbolSequence,
};
use crate::math::{fsum, ln, powi, round};
use crate::moments::{binomial_central_moment, MomentOrder, MomentTable, TRUNCATION_ORDER};
use crate::poly::MomentPolynomial;
use crate::{Error, Result};

/// The three bracketed coefficients of the variance expansion and their sum
/// `term1/n + term2/n² + term3/n³` at a given `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceBreakdown {
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub n: f64,
    pub total: f64,
}

impl VarianceBreakdown {
    fn new(term1: f64, term2: f64, term3: f64, n: f64) -> Self {
        let total = term1 / n + term2 / (n * n) + term3 / (n * n * n);
        VarianceBreakdown {
            term1,
            term2,
            term3,
            n,
            total,
        }
    }
}

/// Variance of `Ĥ` for `n` independent draws from `probs`, through `n⁻³`.
///
/// ```text
/// term1 = Σ p ln²p − H²
/// term2 = (M − 1)/2
/// term3 = [(1 − H) Σ 1/p − Σ ln p / p − 1] / 6
/// ```
pub fn variance_true(probs: &[f64], n: u64) -> Result<VarianceBreakdown> {
    validate_probabilities(probs)?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let m = probs.len() as f64;
    let h = fsum(probs.iter().map(|&p| -p * ln(p)));
    let total_p = fsum(probs.iter().copied());
    // Σ p ln²p − H² = Σ p (ln p + H)² + H²(1 − Σ p), free of cancellation
    let term1 = fsum(probs.iter().map(|&p| {
        let d = ln(p) + h;
        p * d * d
    })) + h * h * (1.0 - total_p);
    let sum_inv = fsum(probs.iter().map(|&p| 1.0 / p));
    let sum_log_over_p = fsum(probs.iter().map(|&p| ln(p) / p));
    let term2 = (m - 1.0) / 2.0;
    let term3 = ((1.0 - h) * sum_inv - sum_log_over_p - 1.0) / 6.0;
    Ok(VarianceBreakdown::new(term1, term2, term3, n as f64))
}

/// Variance at the uniform distribution over `M` events with
/// `n_eff = n − k + 1`: `(M−1)/(2 n_eff²) + (M²−1)/(6 n_eff³)`.
pub fn variance_max(m: u64, n: u64, k: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("M", "must be at least 1"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid("(n, k)", "require 1 <= k <= n"));
    }
    let n_eff = (n - k + 1) as f64;
    let m = m as f64;
    Ok((m - 1.0) / (2.0 * n_eff * n_eff) + (m * m - 1.0) / (6.0 * n_eff * n_eff * n_eff))
}

/// Sufficient statistics of observed frequencies for the plug-in formulas.
///
/// All sums run over observed events only, with `p̂ = f / n`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PluginSums {
    pub n: f64,
    pub m_hat: usize,
    /// `Σ p̂ ln p̂` (that is, `−Ĥ`).
    pub plogp: f64,
    /// `Σ p̂ ln² p̂`.
    pub plog2p: f64,
    /// `Σ ln p̂`.
    pub logp: f64,
    /// `Σ 1/p̂`.
    pub invp: f64,
    /// `Σ ln p̂ / p̂`.
    pub logp_over_p: f64,
}

/// Fixed-point scale for accumulating per-event terms.
const FIXED_SCALE: f64 = (1u64 << 60) as f64;

/// Per-event contributions `(p ln p, p ln² p, ln p, 1/p, ln p / p)` in
/// fixed point.
#[inline]
pub(crate) fn event_terms(count: u64, n: f64) -> [i128; 5] {
    let p = count as f64 / n;
    let lp = ln(p);
    [p * lp, p * lp * lp, lp, 1.0 / p, lp / p].map(|x| round(x * FIXED_SCALE) as i128)
}

/// Integer accumulator behind [`PluginSums`]. Sums of fixed-point terms do
/// not depend on the order of updates, so a window slid into place and one
/// built from scratch agree exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct FixedSums {
    pub(crate) m_hat: usize,
    acc: [i128; 5],
}

impl FixedSums {
    #[inline]
    pub(crate) fn add(&mut self, t: &[i128; 5]) {
        for (a, x) in self.acc.iter_mut().zip(t) {
            *a += x;
        }
    }

    #[inline]
    pub(crate) fn sub(&mut self, t: &[i128; 5]) {
        for (a, x) in self.acc.iter_mut().zip(t) {
            *a -= x;
        }
    }

    pub(crate) fn to_sums(self, n: f64) -> PluginSums {
        let f = |i: usize| self.acc[i] as f64 / FIXED_SCALE;
        PluginSums {
            n,
            m_hat: self.m_hat,
            plogp: f(0),
            plog2p: f(1),
            logp: f(2),
            invp: f(3),
            logp_over_p: f(4),
        }
    }
}

impl PluginSums {
    pub fn from_counts(counts: &BlockCounts) -> Self {
        let n = counts.n_eff() as f64;
        let mut acc = FixedSums {
            m_hat: counts.m_hat(),
            ..FixedSums::default()
        };
        for f in counts.counts() {
            acc.add(&event_terms(f, n));
        }
        acc.to_sums(n)
    }

    pub fn entropy(&self) -> f64 {
        let h = -self.plogp;
        if h < 0.0 {
            0.0
        } else {
            h
        }
    }

    /// Unclamped plug-in variance with `M := M̂` and `n := n_eff`:
    ///
    /// ```text
    /// V̂ar = a/n + [a − MĤ − Σ ln p̂ − M/2 + 1/2]/n²
    ///     + [a − MĤ − Σ ln p̂ − (Ĥ/3)Σ1/p̂ − (1/3)Σ ln p̂/p̂ − (1/12)Σ1/p̂ − M²/4 − M/2 + 5/6]/n³
    /// ```
    /// with `a = Σ p̂ ln² p̂ − Ĥ²`.
    pub fn raw_variance(&self) -> f64 {
        let n = self.n;
        let m = self.m_hat as f64;
        let h = self.entropy();
        let a = self.plog2p - h * h;
        let common = a - m * h - self.logp;
        // brackets scaled by 2 and 12 so the rational constants stay exact
        let bracket2 = (2.0 * common - m + 1.0) / 2.0;
        let bracket3 = (12.0 * common
            - 4.0 * h * self.invp
            - 4.0 * self.logp_over_p
            - self.invp
            - 3.0 * m * m
            - 6.0 * m
            + 10.0)
            / 12.0;
        a / n + bracket2 / (n * n) + bracket3 / (n * n * n)
    }
}

/// Plug-in variance with its clamping and sample-size flags.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PluginVariance {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
    pub below_min_length: bool,
}

fn below_min_length(m_hat: usize, n_eff: u64) -> bool {
    m_hat >= 2
        && min_length(m_hat as u64)
            .map(|n_min| n_eff < n_min)
            .unwrap_or(false)
}

fn plugin_from_sums(sums: &PluginSums, n_eff: u64) -> PluginVariance {
    let raw = sums.raw_variance();
    let clamped = raw < 0.0 || raw.is_nan();
    PluginVariance {
        value: if clamped { 0.0 } else { raw },
        raw,
        clamped,
        below_min_length: below_min_length(sums.m_hat, n_eff),
    }
}

/// Plug-in variance estimate from observed block counts.
pub fn variance_plugin(counts: &BlockCounts) -> PluginVariance {
    plugin_from_sums(&PluginSums::from_counts(counts), counts.n_eff())
}

pub(crate) fn estimate_from_sums(sums: &PluginSums, k: usize, n_eff: u64) -> EntropyEstimate {
    let v = plugin_from_sums(sums, n_eff);
    EntropyEstimate {
        value: sums.entropy(),
        variance: v.value,
        raw_variance: v.raw,
        k,
        n_eff,
        m_hat: sums.m_hat,
        variance_clamped: v.clamped,
        below_min_length: v.below_min_length,
    }
}

/// Entropy and plug-in variance from counts.
pub fn estimate_from_counts(counts: &BlockCounts) -> EntropyEstimate {
    estimate_from_sums(&PluginSums::from_counts(counts), counts.k(), counts.n_eff())
}

/// Entropy and plug-in variance of the k-blocks of `seq`.
pub fn estimate(seq: &SymbolSequence, k: usize) -> Result<EntropyEstimate> {
    Ok(estimate_from_counts(&count_blocks(seq, k)?))
}

/// Harmonic number `S_m = Σ_{j=1}^{m} 1/j`, exactly.
pub fn harmonic_number(m: u32) -> BigRational {
    (1..=m).fold(BigRational::zero(), |acc, j| {
        acc + BigRational::new(BigInt::one(), BigInt::from(j))
    })
}

/// Taylor-series expectations of `p̂ ln p̂`, `p̂² ln² p̂` and
/// `p̂₁ ln p̂₁ · p̂₂ ln p̂₂`, truncated at total moment order `max_order` and
/// optionally at a power of `1/n`.
#[derive(Clone, Debug)]
pub struct SeriesExpansion {
    max_order: u32,
    max_inv_n_power: Option<u32>,
    binomial: Vec<MomentPolynomial>,
    mixed: BTreeMap<MomentOrder, MomentPolynomial>,
}

impl SeriesExpansion {
    /// `max_order` is the largest total moment order kept (at most 6).
    pub fn new(max_order: u32, max_inv_n_power: Option<u32>) -> Result<Self> {
        if max_order > TRUNCATION_ORDER {
            return Err(Error::invalid("max_order", "must be at most 6"));
        }
        let trunc = |p: MomentPolynomial| match max_inv_n_power {
            Some(c) => p.truncate_inv_n(c),
            None => p,
        };
        let binomial = (0..=max_order)
            .map(|m| trunc(binomial_central_moment(m)))
            .collect();
        let mut table = MomentTable::new();
        let mut mixed = BTreeMap::new();
        for m in 0..=max_order {
            for k in 0..=(max_order - m) {
                let order = MomentOrder::new(m, k);
                mixed.insert(order, trunc(table.get(order)));
            }
        }
        Ok(SeriesExpansion {
            max_order,
            max_inv_n_power,
            binomial,
            mixed,
        })
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn max_inv_n_power(&self) -> Option<u32> {
        self.max_inv_n_power
    }

    fn check_p(p: f64) -> Result<BigRational> {
        if p > 0.0 && p <= 1.0 {
            BigRational::from_float(p).ok_or_else(|| Error::invalid("p", "must be finite"))
        } else {
            Err(Error::invalid("p", "must lie in (0, 1]"))
        }
    }

    fn inv_n(n: u64) -> Result<BigRational> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        Ok(BigRational::new(BigInt::one(), BigInt::from(n)))
    }

    fn mu(&self, m: u32, p: &BigRational, u: &BigRational) -> f64 {
        let v = self.binomial[m as usize].evaluate_exact_unchecked(p, &BigRational::zero(), u);
        v.to_f64().unwrap_or(f64::NAN)
    }

    fn mu_mixed(&self, m: u32, k: u32, p1: &BigRational, p2: &BigRational, u: &BigRational) -> f64 {
        let v = self.mixed[&MomentOrder::new(m, k)].evaluate_exact_unchecked(p1, p2, u);
        v.to_f64().unwrap_or(f64::NAN)
    }

    /// `E(p̂ ln p̂) ≈ p ln p + Σ_{m=2}^{max} (−1)^m μ_m / (m(m−1) p^{m−1})`.
    pub fn plogp(&self, p: f64, n: u64) -> Result<f64> {
        let pr = Self::check_p(p)?;
        let u = Self::inv_n(n)?;
        let mut acc = p * ln(p);
        for m in 2..=self.max_order {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * self.mu(m, &pr, &u) / (f64::from(m * (m - 1)) * powi(p, m - 1));
        }
        Ok(acc)
    }

    /// `E(p̂² ln² p̂) ≈ p² ln² p + (ln²p + 3 ln p + 1) μ₂
    ///   + 4 Σ_{m≥1} (−1)^{m+1} [ln p − S_{m−1} + 3/2] μ_{m+2} / (m(m+1)(m+2) p^m)`.
    pub fn p2log2p(&self, p: f64, n: u64) -> Result<f64> {
        let pr = Self::check_p(p)?;
        let u = Self::inv_n(n)?;
        let lp = ln(p);
        let mut acc = p * p * lp * lp;
        if self.max_order >= 2 {
            acc += (lp * lp + 3.0 * lp + 1.0) * self.mu(2, &pr, &u);
        }
        let mut harmonic = 0.0; // S_{m−1}
        for m in 1..=self.max_order.saturating_sub(2) {
            if m > 1 {
                harmonic += 1.0 / f64::from(m - 1);
            }
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            let denom = f64::from(m * (m + 1) * (m + 2)) * powi(p, m);
            acc += 4.0 * sign * (lp - harmonic + 1.5) * self.mu(m + 2, &pr, &u) / denom;
        }
        Ok(acc)
    }

    /// `E(p̂₁ ln p̂₁ p̂₂ ln p̂₂)` from the mixed moments `μ_{m,k}`, `m + k ≤ max`.
    pub fn cross(&self, p1: f64, p2: f64, n: u64) -> Result<f64> {
        let r1 = Self::check_p(p1)?;
        let r2 = Self::check_p(p2)?;
        if p1 + p2 > 1.0 + 1e-12 {
            return Err(Error::invalid("(p1, p2)", "p1 + p2 must not exceed 1"));
        }
        let u = Self::inv_n(n)?;
        let (l1, l2) = (ln(p1), ln(p2));
        let coef = |m: u32| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sign / f64::from(m * (m - 1))
        };
        let max = self.max_order;
        let mut acc = p1 * p2 * l1 * l2;
        if max >= 2 {
            acc += (l1 + 1.0) * (l2 + 1.0) * self.mu_mixed(1, 1, &r1, &r2, &u);
        }
        for m in 2..=max {
            acc += coef(m)
                * (p1 * l1 * self.mu_mixed(0, m, &r1, &r2, &u) / powi(p2, m - 1)
                    + p2 * l2 * self.mu_mixed(m, 0, &r1, &r2, &u) / powi(p1, m - 1));
        }
        for m in 2..max {
            acc += coef(m)
                * ((l1 + 1.0) * self.mu_mixed(1, m, &r1, &r2, &u) / powi(p2, m - 1)
                    + (l2 + 1.0) * self.mu_mixed(m, 1, &r1, &r2, &u) / powi(p1, m - 1));
        }
        for m in 2..=max {
            for k in 2..=(max - m) {
                acc += coef(m) * coef(k) * self.mu_mixed(m, k, &r1, &r2, &u)
                    / (powi(p1, m - 1) * powi(p2, k - 1));
            }
        }
        Ok(acc)
    }

    /// `E(Ĥ)` assembled from the per-event `E(p̂ ln p̂)` series.
    pub fn expected_entropy(&self, probs: &[f64], n: u64) -> Result<f64> {
        validate_probabilities(probs)?;
        let mut acc = 0.0;
        for &p in probs {
            acc -= self.plogp(p, n)?;
        }
        Ok(acc)
    }

    /// `E(Ĥ²) = Σ_j E(p̂_j² ln² p̂_j) + Σ_{i≠j} E(p̂_i ln p̂_i p̂_j ln p̂_j)`.
    pub fn expected_entropy_squared(&self, probs: &[f64], n: u64) -> Result<f64> {
        validate_probabilities(probs)?;
        let mut acc = 0.0;
        for (j, &pj) in probs.iter().enumerate() {
            acc += self.p2log2p(pj, n)?;
            for (i, &pi) in probs.iter().enumerate() {
                if i != j {
                    acc += self.cross(pi, pj, n)?;
                }
            }
        }
        Ok(acc)
    }
}

/// [`SeriesExpansion::plogp`] with untruncated moments.
pub fn series_expectation_plogp(p: f64, n: u64, max_order: u32) -> Result<f64> {
    SeriesExpansion::new(max_order, None)?.plogp(p, n)
}

/// [`SeriesExpansion::p2log2p`] with untruncated moments.
pub fn series_expectation_p2log2p(p: f64, n: u64, max_order: u32) -> Result<f64> {
    SeriesExpansion::new(max_order, None)?.p2log2p(p, n)
}

/// [`SeriesExpansion::cross`] with untruncated moments.
pub fn series_expectation_cross(p1: f64, p2: f64, n: u64, max_order: u32) -> Result<f64> {
    SeriesExpansion::new(max_order, None)?.cross(p1, p2, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{entropy_bias_expansion, entropy_true};
    use crate::poly::rational;
    use alloc::vec;

    #[test]
    fn uniform_four_breakdown() {
        let v = variance_true(&[0.25; 4], 1000).unwrap();
        assert!(v.term1.abs() < 1e-15);
        assert_eq!(v.term2, 1.5);
        assert!((v.term3 - 2.5).abs() < 1e-13);
        assert!((v.total - 1.5025e-6).abs() < 1e-19);
    }

    #[test]
    fn deterministic_distribution_has_no_variance() {
        let v = variance_true(&[1.0], 10).unwrap();
        assert_eq!((v.term1, v.term2, v.term3, v.total), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn fair_coin_breakdown() {
        let v = variance_true(&[0.5, 0.5], 100).unwrap();
        assert!(v.term1.abs() < 1e-16);
        assert_eq!(v.term2, 0.5);
        // [(1 − ln2)·4 + 4 ln2 − 1]/6: the logarithms cancel
        assert!((v.term3 - 0.5).abs() < 1e-15);
        assert!((v.total - 5.05e-5).abs() < 1e-18);
    }

    #[test]
    fn variance_max_examples() {
        let v = variance_max(16384, 200_000, 7).unwrap();
        let n_eff = 199_994.0f64;
        let first = 16383.0 / (2.0 * n_eff * n_eff);
        let second = (16384.0f64 * 16384.0 - 1.0) / (6.0 * n_eff * n_eff * n_eff);
        assert!((first - 2.047_997_878e-7).abs() < 1e-16);
        assert!((second - 5.592_908_659e-9).abs() < 1e-17);
        assert!((v - 2.103_926_965e-7).abs() < 1e-16);
        assert_eq!(variance_max(1, 100, 1).unwrap(), 0.0);
        assert!(variance_max(4, 3, 4).is_err());
    }

    #[test]
    fn variance_max_matches_uniform_true() {
        let probs = vec![1.0 / 16384.0; 16384];
        let t = variance_true(&probs, 199_994).unwrap().total;
        let m = variance_max(16384, 200_000, 7).unwrap();
        assert!((t - m).abs() <= 1e-12 * m);
    }

    #[test]
    fn single_event_plugin_is_zero() {
        // p̂ = 1, M = 1, n = 1: every bracket cancels exactly
        let c = BlockCounts::from_frequencies(1, 1, vec![(0, 1)]).unwrap();
        let v = variance_plugin(&c);
        assert_eq!(v.raw, 0.0);
        assert!(!v.clamped);
        assert!(!v.below_min_length);
    }

    #[test]
    fn equal_counts_plugin() {
        let c = BlockCounts::from_frequencies(1, 2, vec![(0, 500), (1, 500)]).unwrap();
        let e = estimate_from_counts(&c);
        assert!((e.value - core::f64::consts::LN_2).abs() < 1e-15);
        let s = PluginSums::from_counts(&c);
        // first-order term vanishes at equal frequencies
        assert!((s.plog2p - e.value * e.value).abs() < 1e-15);
        // brackets reduce to −1/2 and −3/2, so the estimate falls below zero
        let n = 1000.0f64;
        let expected = -0.5 / (n * n) - 1.5 / (n * n * n);
        assert!((e.raw_variance - expected).abs() < 1e-12 * expected.abs());
        assert!(e.variance_clamped);
        assert_eq!(e.variance, 0.0);
    }

    #[test]
    fn plugin_flags() {
        // 3 events over n_eff = 5 < min_length(3)
        let c = BlockCounts::from_frequencies(1, 3, vec![(0, 1), (1, 1), (2, 3)]).unwrap();
        let v = variance_plugin(&c);
        assert!(v.below_min_length);
        // tiny sample with many singletons drives the raw value negative
        let c = BlockCounts::from_frequencies(1, 8, (0..8).map(|i| (i, 1)).collect()).unwrap();
        let v = variance_plugin(&c);
        assert!(v.raw < 0.0);
        assert!(v.clamped);
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn harmonic_fixtures() {
        assert_eq!(harmonic_number(0), rational(0, 1));
        assert_eq!(harmonic_number(1), rational(1, 1));
        assert_eq!(harmonic_number(3), rational(11, 6));
    }

    #[test]
    fn plogp_series_examples() {
        for order in 2..=6 {
            assert_eq!(series_expectation_plogp(1.0, 40, order).unwrap(), 0.0);
        }
        let v = series_expectation_plogp(0.5, 50, 2).unwrap();
        assert!((v - (0.5 * 0.5f64.ln() + 0.5 * (0.25 / 50.0) / 0.5)).abs() < 1e-15);
        assert!((v + 0.341_573_590_3).abs() < 1e-9);
        assert!(series_expectation_plogp(0.0, 10, 2).is_err());
        assert!(series_expectation_plogp(0.5, 10, 7).is_err());
    }

    #[test]
    fn plogp_series_reproduces_bias_formula() {
        let truncated = SeriesExpansion::new(6, Some(3)).unwrap();
        let series = truncated.expected_entropy(&[0.25; 4], 1000).unwrap();
        let bias = entropy_bias_expansion(&[0.25; 4], 1000).unwrap();
        assert!((series - bias).abs() < 1e-12, "{series} vs {bias}");

        // full moments differ only through the n⁻⁴ tail
        let full = SeriesExpansion::new(6, None)
            .unwrap()
            .expected_entropy(&[0.25; 4], 1000)
            .unwrap();
        let gap = (full - bias).abs();
        assert!(gap > 1e-12 && gap < 1e-10, "gap {gap}");

        let probs = [0.4, 0.3, 0.2, 0.1];
        let s = truncated.expected_entropy(&probs, 500).unwrap();
        let b = entropy_bias_expansion(&probs, 500).unwrap();
        assert!((s - b).abs() < 1e-12);
    }

    #[test]
    fn p2log2p_at_one() {
        assert_eq!(series_expectation_p2log2p(1.0, 30, 2).unwrap(), 0.0);
    }

    #[test]
    fn cross_is_symmetric() {
        let e = SeriesExpansion::new(6, None).unwrap();
        let a = e.cross(0.3, 0.2, 500).unwrap();
        let b = e.cross(0.2, 0.3, 500).unwrap();
        assert!((a - b).abs() < 1e-16);
        let c = e.cross(0.5, 0.5, 77).unwrap();
        assert!(c.is_finite());
        assert!(e.cross(0.7, 0.5, 10).is_err());
    }

    fn closed_form_second_moment(probs: &[f64], n: f64) -> f64 {
        let h = entropy_true(probs).unwrap();
        let m = probs.len() as f64;
        let s1: f64 = probs.iter().map(|p| 1.0 / p).sum();
        let s2: f64 = probs.iter().map(|p| 1.0 / (p * p)).sum();
        let plog2: f64 = probs.iter().map(|p| p * p.ln() * p.ln()).sum();
        let lop: f64 = probs.iter().map(|p| p.ln() / p).sum();
        h * h
            + (-h * h + plog2 - (m - 1.0) * h) / n
            + (h / 6.0 * (1.0 - s1) + m * m / 4.0 - 0.25) / (n * n)
            + (m / 12.0 * s1 + s1 / 12.0 - 1.0 / 12.0 - m / 12.0 - h * s2 / 6.0 - lop / 6.0)
                / (n * n * n)
    }

    #[test]
    fn second_moment_reconstruction() {
        let probs = [0.25; 4];
        let n = 2000;
        let closed = closed_form_second_moment(&probs, n as f64);
        let truncated = SeriesExpansion::new(6, Some(3))
            .unwrap()
            .expected_entropy_squared(&probs, n)
            .unwrap();
        assert!(
            (truncated - closed).abs() < 1e-13,
            "{truncated} vs {closed}"
        );
        let full = SeriesExpansion::new(6, None)
            .unwrap()
            .expected_entropy_squared(&probs, n)
            .unwrap();
        let fitted_c = (full - closed).abs() * (n as f64).powi(4);
        assert!(fitted_c < 1e4, "C = {fitted_c}");

        let probs = [0.4, 0.3, 0.2, 0.1];
        let closed = closed_form_second_moment(&probs, 700.0);
        let truncated = SeriesExpansion::new(6, Some(3))
            .unwrap()
            .expected_entropy_squared(&probs, 700)
            .unwrap();
        assert!((truncated - closed).abs() < 1e-12);
    }

    #[test]
    fn series_variance_matches_exact_form() {
        // Var = E(Ĥ²) − E(Ĥ)², both from the series, versus the closed form
        for probs in [vec![0.25; 4], vec![0.4, 0.3, 0.2, 0.1], vec![0.5, 0.3, 0.2]] {
            for n in [300u64, 1000, 5000] {
                let e = SeriesExpansion::new(6, Some(3)).unwrap();
                let m1 = e.expected_entropy(&probs, n).unwrap();
                let m2 = e.expected_entropy_squared(&probs, n).unwrap();
                let series_var = m2 - m1 * m1;
                let closed = variance_true(&probs, n).unwrap().total;
                let budget = 1e3 / (n as f64).powi(4) + 1e-14;
                assert!(
                    (series_var - closed).abs() < budget,
                    "{probs:?} n={n}: {series_var} vs {closed}"
                );
            }
        }
    }
}
