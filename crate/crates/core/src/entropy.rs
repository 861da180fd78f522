//! Symbol sequences, overlapping k-block counts and the plug-in estimator.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ceil, exp, ln, ln_1p};
use crate::{Error, Result};

/// Tolerance on `Σ p = 1` for probability vectors.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Largest number of bits a block code may use.
pub const MAX_BLOCK_BITS: u32 = 62;

/// A finite-alphabet discrete series.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolSequence {
    symbols: Vec<u32>,
    alphabet_size: u32,
}

impl SymbolSequence {
    pub fn new(symbols: Vec<u32>, alphabet_size: u32) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptySequence);
        }
        if alphabet_size == 0 {
            return Err(Error::invalid("alphabet_size", "must be positive"));
        }
        if let Some((position, &symbol)) = symbols
            .iter()
            .enumerate()
            .find(|(_, &s)| s >= alphabet_size)
        {
            return Err(Error::SymbolOutOfRange {
                position,
                symbol,
                alphabet_size,
            });
        }
        Ok(SymbolSequence {
            symbols,
            alphabet_size,
        })
    }

    /// Alphabet size taken as `max + 1`.
    pub fn with_inferred_alphabet(symbols: Vec<u32>) -> Result<Self> {
        let max = symbols.iter().copied().max().ok_or(Error::EmptySequence)?;
        SymbolSequence::new(symbols, max + 1)
    }

    pub(crate) fn from_trusted(symbols: Vec<u32>, alphabet_size: u32) -> Self {
        debug_assert!(!symbols.is_empty());
        debug_assert!(symbols.iter().all(|&s| s < alphabet_size));
        SymbolSequence {
            symbols,
            alphabet_size,
        }
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Contiguous sub-sequence `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<SymbolSequence> {
        if start >= end || end > self.symbols.len() {
            return Err(Error::invalid("range", "empty or out of bounds"));
        }
        Ok(SymbolSequence::from_trusted(
            self.symbols[start..end].to_vec(),
            self.alphabet_size,
        ))
    }

    /// Concatenate two sequences over the same alphabet.
    pub fn concat(&self, other: &SymbolSequence) -> Result<SymbolSequence> {
        if self.alphabet_size != other.alphabet_size {
            return Err(Error::invalid(
                "alphabet_size",
                "sequences use different alphabets",
            ));
        }
        let mut symbols = self.symbols.clone();
        symbols.extend_from_slice(&other.symbols);
        Ok(SymbolSequence::from_trusted(symbols, self.alphabet_size))
    }

    pub fn into_symbols(self) -> Vec<u32> {
        self.symbols
    }
}

/// Bits needed for one symbol: `⌈log₂ |A|⌉`.
fn bits_per_symbol(alphabet_size: u32) -> u32 {
    if alphabet_size <= 1 {
        0
    } else {
        32 - (alphabet_size - 1).leading_zeros()
    }
}

pub(crate) fn check_block_encoding(k: usize, alphabet_size: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::ZeroBlockLength);
    }
    let bits = (k as u64).saturating_mul(u64::from(bits_per_symbol(alphabet_size)));
    if bits > u64::from(MAX_BLOCK_BITS) {
        return Err(Error::BlockEncodingOverflow { k, alphabet_size });
    }
    Ok(())
}

/// Codes of all overlapping k-blocks, `codes[i]` encoding
/// `x_i … x_{i+k−1}` in base `|A|` with the first symbol most significant.
pub fn block_codes(seq: &SymbolSequence, k: usize) -> Result<Vec<u64>> {
    check_block_encoding(k, seq.alphabet_size)?;
    if k > seq.len() {
        return Err(Error::BlockTooLong { k, len: seq.len() });
    }
    let base = u64::from(seq.alphabet_size);
    let top = base.pow(k as u32 - 1);
    let s = seq.symbols();
    let mut out = Vec::with_capacity(s.len() - k + 1);
    let mut code = 0u64;
    for &sym in &s[..k] {
        code = code * base + u64::from(sym);
    }
    out.push(code);
    for &sym in &s[k..] {
        code = (code % top) * base + u64::from(sym);
        out.push(code);
    }
    Ok(out)
}

/// Number of distinct possible k-blocks, `|A|^k`, if it fits in a `u64`.
pub fn block_space(alphabet_size: u32, k: usize) -> Option<u64> {
    u64::from(alphabet_size).checked_pow(u32::try_from(k).ok()?)
}

/// Frequencies of overlapping k-blocks.
///
/// Entries are `(code, count)` sorted by code; only observed blocks are
/// stored, so every count is at least 1 and `M̂` is the number of entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockCounts {
    k: usize,
    alphabet_size: u32,
    n_eff: u64,
    entries: Vec<(u64, u64)>,
}

impl BlockCounts {
    /// Build from raw `(code, count)` pairs; zero counts are dropped and
    /// duplicate codes merged.
    pub fn from_frequencies(
        k: usize,
        alphabet_size: u32,
        mut entries: Vec<(u64, u64)>,
    ) -> Result<Self> {
        check_block_encoding(k, alphabet_size)?;
        entries.retain(|&(_, c)| c > 0);
        if entries.is_empty() {
            return Err(Error::EmptyCounts);
        }
        entries.sort_unstable_by_key(|&(code, _)| code);
        let mut merged: Vec<(u64, u64)> = Vec::with_capacity(entries.len());
        for (code, count) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == code => last.1 += count,
                _ => merged.push((code, count)),
            }
        }
        let n_eff = merged.iter().map(|&(_, c)| c).sum();
        Ok(BlockCounts {
            k,
            alphabet_size,
            n_eff,
            entries: merged,
        })
    }

    /// Counts from a plain frequency vector (`k = 1`, one entry per symbol).
    pub fn from_symbol_counts(counts: &[u64]) -> Result<Self> {
        let alphabet = u32::try_from(counts.len().max(1))
            .map_err(|_| Error::invalid("counts", "too many categories"))?;
        let entries = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u64, c))
            .collect();
        BlockCounts::from_frequencies(1, alphabet, entries)
    }

    pub(crate) fn from_codes(codes: &[u64], k: usize, alphabet_size: u32) -> Self {
        debug_assert!(!codes.is_empty());
        let n_eff = codes.len() as u64;
        let dense_limit = 4 * n_eff + 1024;
        let entries = match block_space(alphabet_size, k) {
            Some(space) if space <= dense_limit => {
                let mut dense = vec![0u64; space as usize];
                for &c in codes {
                    dense[c as usize] += 1;
                }
                dense
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, c)| c > 0)
                    .map(|(code, c)| (code as u64, c))
                    .collect()
            }
            _ => {
                let mut sorted = codes.to_vec();
                sorted.sort_unstable();
                let mut out: Vec<(u64, u64)> = Vec::new();
                for c in sorted {
                    match out.last_mut() {
                        Some(last) if last.0 == c => last.1 += 1,
                        _ => out.push((c, 1)),
                    }
                }
                out
            }
        };
        BlockCounts {
            k,
            alphabet_size,
            n_eff,
            entries,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    /// Number of counted blocks, `n − k + 1` for a sequence of length `n`.
    pub fn n_eff(&self) -> u64 {
        self.n_eff
    }

    /// Number of distinct observed blocks.
    pub fn m_hat(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(u64, u64)] {
        &self.entries
    }

    pub fn counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|&(_, c)| c)
    }

    pub fn get(&self, code: u64) -> u64 {
        self.entries
            .binary_search_by_key(&code, |&(c, _)| c)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Count of the block spelled by `symbols`.
    pub fn get_block(&self, symbols: &[u32]) -> u64 {
        if symbols.len() != self.k {
            return 0;
        }
        let base = u64::from(self.alphabet_size);
        let code = symbols
            .iter()
            .fold(0u64, |acc, &s| acc * base + u64::from(s));
        self.get(code)
    }

    /// Symbols of a block code.
    pub fn decode(&self, code: u64) -> Vec<u32> {
        let base = u64::from(self.alphabet_size);
        let mut out = vec![0u32; self.k];
        let mut c = code;
        for slot in out.iter_mut().rev() {
            *slot = (c % base) as u32;
            c /= base;
        }
        out
    }
}

/// Counts of every overlapping k-block of `seq`.
pub fn count_blocks(seq: &SymbolSequence, k: usize) -> Result<BlockCounts> {
    let codes = block_codes(seq, k)?;
    Ok(BlockCounts::from_codes(&codes, k, seq.alphabet_size))
}

/// Plug-in entropy `Ĥ = −Σ p̂ ln p̂` in nats, `p̂ = f / n_eff`.
pub fn entropy_plugin(counts: &BlockCounts) -> f64 {
    let n = counts.n_eff as f64;
    counts
        .counts()
        .map(|f| {
            let p = f as f64 / n;
            -p * ln(p)
        })
        .sum()
}

/// Check that `probs` is a valid, strictly positive distribution.
pub fn validate_probabilities(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::EmptyProbabilities);
    }
    if let Some((index, &value)) = probs
        .iter()
        .enumerate()
        .find(|(_, &p)| !(p > 0.0 && p.is_finite()))
    {
        return Err(Error::NonPositiveProbability { index, value });
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized { sum });
    }
    Ok(())
}

/// Entropy `H = −Σ p ln p` of a strictly positive distribution.
pub fn entropy_true(probs: &[f64]) -> Result<f64> {
    validate_probabilities(probs)?;
    Ok(probs.iter().map(|&p| -p * ln(p)).sum())
}

/// Expected plug-in entropy through order `n⁻³`:
///
/// `E(Ĥ) ≈ H − (M−1)/(2n) + (1 − Σ1/p)/(12n²) + Σ(1/p − 1/p²)/(12n³)`.
pub fn entropy_bias_expansion(probs: &[f64], n: u64) -> Result<f64> {
    let h = entropy_true(probs)?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let n = n as f64;
    let m = probs.len() as f64;
    let sum_inv: f64 = probs.iter().map(|&p| 1.0 / p).sum();
    let sum_inv_diff: f64 = probs.iter().map(|&p| 1.0 / p - 1.0 / (p * p)).sum();
    Ok(h - (m - 1.0) / (2.0 * n)
        + (1.0 - sum_inv) / (12.0 * n * n)
        + sum_inv_diff / (12.0 * n * n * n))
}

/// Smallest sequence length `n` with `M (1 − 1/M)^n < 0.01`, i.e. with fewer
/// than 0.01 unseen events expected under the uniform distribution.
pub fn min_length(m: u64) -> Result<u64> {
    if m < 2 {
        return Err(Error::invalid("M", "must be at least 2"));
    }
    let mf = m as f64;
    let step = ln_1p(-1.0 / mf);
    let target = ln(0.01 / mf);
    let satisfied = |n: u64| (n as f64) * step < target;
    let mut n = ceil(target / step) as u64;
    while n > 0 && satisfied(n - 1) {
        n -= 1;
    }
    while !satisfied(n) {
        n += 1;
    }
    Ok(n)
}

/// Expected number of distinct events seen in `n` draws: `M − Σ(1−p)^n`.
pub fn expected_observed_events(probs: &[f64], n: u64) -> Result<f64> {
    validate_probabilities(probs)?;
    let n = n as f64;
    let unseen: f64 = probs
        .iter()
        .map(|&p| if p >= 1.0 { 0.0 } else { exp(n * ln_1p(-p)) })
        .sum();
    Ok(probs.len() as f64 - unseen)
}

/// Entropy value together with its plug-in variance and bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyEstimate {
    /// `Ĥ` in nats.
    pub value: f64,
    /// Plug-in variance, clamped at 0.
    pub variance: f64,
    /// Plug-in variance before clamping.
    pub raw_variance: f64,
    pub k: usize,
    pub n_eff: u64,
    pub m_hat: usize,
    /// The raw variance was negative and has been replaced by 0.
    pub variance_clamped: bool,
    /// `n_eff < min_length(M̂)`: some events are likely unobserved.
    pub below_min_length: bool,
}

impl EntropyEstimate {
    /// Estimates with a clamped variance are not used in tests.
    pub fn is_testable(&self) -> bool {
        !self.variance_clamped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn seq(v: &[u32], a: u32) -> SymbolSequence {
        SymbolSequence::new(v.to_vec(), a).unwrap()
    }

    #[test]
    fn sequence_validation() {
        assert_eq!(SymbolSequence::new(vec![], 4), Err(Error::EmptySequence));
        assert!(matches!(
            SymbolSequence::new(vec![0, 4], 4),
            Err(Error::SymbolOutOfRange {
                position: 1,
                symbol: 4,
                ..
            })
        ));
        assert_eq!(
            SymbolSequence::with_inferred_alphabet(vec![0, 2, 1])
                .unwrap()
                .alphabet_size(),
            3
        );
    }

    #[test]
    fn counts_pairs() {
        let c = count_blocks(&seq(&[0, 1, 0, 1], 2), 2).unwrap();
        assert_eq!(c.n_eff(), 3);
        assert_eq!(c.m_hat(), 2);
        assert_eq!(c.get_block(&[0, 1]), 2);
        assert_eq!(c.get_block(&[1, 0]), 1);
        assert_eq!(c.get_block(&[1, 1]), 0);
    }

    #[test]
    fn counts_constant() {
        let c = count_blocks(&seq(&[0, 0, 0, 0], 1), 1).unwrap();
        assert_eq!(c.n_eff(), 4);
        assert_eq!(c.m_hat(), 1);
        assert_eq!(entropy_plugin(&c), 0.0);
    }

    #[test]
    fn counts_errors() {
        let s = seq(&[0, 1, 2], 3);
        assert_eq!(
            count_blocks(&s, 4),
            Err(Error::BlockTooLong { k: 4, len: 3 })
        );
        assert_eq!(count_blocks(&s, 0), Err(Error::ZeroBlockLength));
        // 32 blocks of 2 bits = 64 > 62
        let long = SymbolSequence::new(vec![0; 40], 4).unwrap();
        assert!(matches!(
            count_blocks(&long, 32),
            Err(Error::BlockEncodingOverflow { .. })
        ));
        assert!(count_blocks(&long, 31).is_ok());
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let symbols: Vec<u32> = (0..500u32).map(|i| (i * 7 + i / 3) % 5).collect();
        let s = seq(&symbols, 5);
        // k = 6 gives 15625 possible blocks > 4·495 + 1024, forcing the sort path
        let codes = block_codes(&s, 6).unwrap();
        let sparse = BlockCounts::from_codes(&codes, 6, 5);
        let rebuilt =
            BlockCounts::from_frequencies(6, 5, codes.iter().map(|&c| (c, 1)).collect()).unwrap();
        assert_eq!(sparse, rebuilt);
        let c3 = count_blocks(&s, 3).unwrap();
        let r3 = BlockCounts::from_frequencies(
            3,
            5,
            block_codes(&s, 3)
                .unwrap()
                .into_iter()
                .map(|c| (c, 1))
                .collect(),
        )
        .unwrap();
        assert_eq!(c3, r3);
    }

    #[test]
    fn decode_roundtrip() {
        let c = count_blocks(&seq(&[3, 1, 2, 0, 3], 4), 3).unwrap();
        for &(code, _) in c.entries() {
            let sym = c.decode(code);
            assert_eq!(c.get_block(&sym), c.get(code));
        }
        assert_eq!(c.decode(c.entries()[0].0).len(), 3);
    }

    #[test]
    fn plugin_examples() {
        let c = BlockCounts::from_frequencies(1, 2, vec![(0, 2), (1, 2)]).unwrap();
        assert!((entropy_plugin(&c) - core::f64::consts::LN_2).abs() < 1e-15);
        let c = BlockCounts::from_frequencies(1, 2, vec![(0, 1)]).unwrap();
        assert_eq!(entropy_plugin(&c), 0.0);
        let c = count_blocks(&seq(&[0, 1, 2, 3], 4), 1).unwrap();
        assert!((entropy_plugin(&c) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn true_entropy() {
        assert!((entropy_true(&[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(entropy_true(&[1.0]).unwrap(), 0.0);
        assert!(matches!(
            entropy_true(&[0.5, 0.5, 0.0]),
            Err(Error::NonPositiveProbability { index: 2, .. })
        ));
        assert!(matches!(
            entropy_true(&[0.5, 0.4]),
            Err(Error::NotNormalized { .. })
        ));
        assert_eq!(entropy_true(&[]), Err(Error::EmptyProbabilities));
    }

    #[test]
    fn bias_examples() {
        let v = entropy_bias_expansion(&[0.25; 4], 1000).unwrap();
        let expected = 4f64.ln() - 3.0 / 2000.0 + (1.0 - 16.0) / 12e6 + (16.0 - 64.0) / 12e9;
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 1.384_793_107).abs() < 1e-9);
        assert_eq!(entropy_bias_expansion(&[1.0], 17).unwrap(), 0.0);
        let probs = [0.1, 0.2, 0.3, 0.4];
        let far = entropy_bias_expansion(&probs, 1_000_000_000).unwrap();
        assert!((far - entropy_true(&probs).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn min_length_fixtures() {
        assert_eq!(min_length(256).unwrap(), 2594);
        assert_eq!(min_length(2).unwrap(), 8);
        assert!(min_length(1).is_err());
    }

    #[test]
    fn min_length_matches_direct_scan() {
        // oracle: the first n with M(1 − 1/M)^n < 0.01, scanning upward
        for m in [2u64, 3, 4, 5, 16, 64, 255, 256, 1000, 1024, 4096, 16384] {
            let mf = m as f64;
            let holds = |n: u64| mf * ((mf - 1.0) / mf).powf(n as f64) < 0.01;
            let mut n = 0;
            while !holds(n) {
                n += 1;
            }
            assert_eq!(min_length(m).unwrap(), n, "M = {m}");
        }
    }

    #[test]
    fn observed_events() {
        assert!((expected_observed_events(&[0.25; 4], 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((expected_observed_events(&[0.25; 4], u64::MAX).unwrap() - 4.0).abs() < 1e-15);
        let probs = vec![1.0 / 256.0; 256];
        assert!(expected_observed_events(&probs, 2594).unwrap() >= 255.99);
    }
}
