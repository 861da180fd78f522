//! Rolling-window length selection.
//!
//! For a candidate length `w` the objective tests adjacent pairs of windows.
//! If more than 1% of the pairs differ significantly it returns the largest
//! `|z|`, otherwise `−1/w`, so a stationary sequence favours the longest
//! window and a sequence with entropy regimes favours the `w` that separates
//! them most sharply. The maximiser is a bounded golden-section search on
//! integers.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::entropy::{count_blocks, min_length, SymbolSequence};
use crate::hypothesis::z_score;
use crate::window::{BlockStream, SlidingWindow};
use crate::{Error, Result};

/// Which adjacent window pairs the objective tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WindowLayout {
    /// Every pair `[t−2w, t−w)`, `[t−w, t)` for `t = 2w, 2w+step, …`.
    Sliding { step: usize },
    /// Consecutive non-overlapping blocks of length `w` starting at 0; a
    /// trailing remainder shorter than `w` is dropped.
    Tiled,
}

impl Default for WindowLayout {
    fn default() -> Self {
        WindowLayout::Sliding { step: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveConfig {
    pub k: usize,
    pub q99: f64,
    pub layout: WindowLayout,
}

impl ObjectiveConfig {
    pub fn new(k: usize, q99: f64) -> Self {
        ObjectiveConfig {
            k,
            q99,
            layout: WindowLayout::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::ZeroBlockLength);
        }
        if self.q99.is_nan() || self.q99 <= 0.0 {
            return Err(Error::invalid("q99", "must be positive"));
        }
        if self.layout == (WindowLayout::Sliding { step: 0 }) {
            return Err(Error::invalid("step", "must be at least 1"));
        }
        Ok(())
    }
}

/// Objective value with the counts behind it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveDetail {
    pub w: usize,
    pub value: f64,
    pub pairs: usize,
    /// Pairs whose estimates both have an unclamped variance.
    pub testable_pairs: usize,
    pub exceedances: usize,
    pub max_abs_z: f64,
}

/// Fraction of significant pairs that switches the objective to `max |z|`.
pub const EXCEEDANCE_THRESHOLD: f64 = 0.01;

#[derive(Default)]
struct PairTally {
    pairs: usize,
    testable: usize,
    exceed: usize,
    max_abs_z: f64,
}

impl PairTally {
    fn push(&mut self, z: Result<f64>, q99: f64) -> Result<()> {
        self.pairs += 1;
        match z {
            Ok(z) => {
                self.testable += 1;
                if z.abs() > q99 {
                    self.exceed += 1;
                }
                if z.abs() > self.max_abs_z {
                    self.max_abs_z = z.abs();
                }
                Ok(())
            }
            Err(Error::Untestable) | Err(Error::ZeroVariance) => Ok(()),
            Err(e) => Err(e),
        }
    }

    fn finish(self, w: usize) -> ObjectiveDetail {
        let exceeding = self.testable > 0
            && (self.exceed as f64) / (self.testable as f64) > EXCEEDANCE_THRESHOLD;
        ObjectiveDetail {
            w,
            value: if exceeding {
                self.max_abs_z
            } else {
                -1.0 / w as f64
            },
            pairs: self.pairs,
            testable_pairs: self.testable,
            exceedances: self.exceed,
            max_abs_z: self.max_abs_z,
        }
    }
}

/// Objective at `w` on a prepared block stream.
pub fn objective_detail(
    stream: &BlockStream,
    w: usize,
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveDetail> {
    cfg.validate()?;
    if stream.k() != cfg.k {
        return Err(Error::invalid(
            "k",
            "stream was built for a different block length",
        ));
    }
    if w < cfg.k {
        return Err(Error::invalid("w", "must be at least k"));
    }
    let len = stream.len();
    if 2 * w > len {
        return Err(Error::WindowTooLarge { w, len });
    }
    let mut tally = PairTally::default();
    match cfg.layout {
        WindowLayout::Sliding { step } => {
            let mut a = SlidingWindow::new(stream, w, 0)?;
            let mut b = SlidingWindow::new(stream, w, w)?;
            let mut t = 2 * w;
            loop {
                tally.push(z_score(&a.estimate(), &b.estimate()), cfg.q99)?;
                t += step;
                if t > len {
                    break;
                }
                a.move_to(t - 2 * w)?;
                b.move_to(t - w)?;
            }
        }
        WindowLayout::Tiled => {
            let mut win = SlidingWindow::new(stream, w, 0)?;
            let mut prev = win.estimate();
            for i in 1..len / w {
                win.move_to(i * w)?;
                let cur = win.estimate();
                tally.push(z_score(&prev, &cur), cfg.q99)?;
                prev = cur;
            }
        }
    }
    Ok(tally.finish(w))
}

/// `f(w)` for a sequence.
pub fn objective(seq: &SymbolSequence, w: usize, cfg: &ObjectiveConfig) -> Result<f64> {
    let stream = BlockStream::new(seq, cfg.k)?;
    Ok(objective_detail(&stream, w, cfg)?.value)
}

/// Outcome of a bandwidth search.
#[derive(Clone, Debug, PartialEq)]
pub struct BandwidthResult {
    pub w_opt: usize,
    pub objective_value: f64,
    /// Every probed `(w, f(w))` in probe order.
    pub evaluations: Vec<(usize, f64)>,
    /// No bandwidth produced significant changes: `f(w_opt) < 0`.
    pub stationary_verdict: bool,
    pub w_min: usize,
    pub w_max: usize,
}

/// Largest admissible window, `⌊(L − k + 1)/2⌋`.
pub fn n_max(len: usize, k: usize) -> usize {
    (len + 1).saturating_sub(k) / 2
}

/// Default search bracket: `[max(k, min_length(M̂)), ⌊(L − k + 1)/2⌋]`
/// with `M̂` the distinct k-blocks of the whole sequence.
pub fn default_bounds(seq: &SymbolSequence, k: usize) -> Result<(usize, usize)> {
    let m_hat = count_blocks(seq, k)?.m_hat() as u64;
    let floor = if m_hat >= 2 {
        min_length(m_hat)? as usize
    } else {
        k
    };
    Ok((floor.max(k), n_max(seq.len(), k)))
}

pub fn check_bracket(w_min: usize, w_max: usize, k: usize, len: usize) -> Result<()> {
    if w_min < k || w_min >= w_max || w_max > n_max(len, k) {
        return Err(Error::InvalidBracket { w_min, w_max });
    }
    Ok(())
}

const INV_PHI2: f64 = 0.381_966_011_250_105_1;

/// Maximise `f` over the integers of `[lo, hi]` by golden-section search.
///
/// The bracket shrinks until it is at most 3 wide and is then swept. Ties
/// keep the right part of the bracket and resolve to the larger `w`. The
/// result is the best probed point.
pub fn golden_section_max<F>(lo: usize, hi: usize, mut f: F) -> Result<BandwidthResult>
where
    F: FnMut(usize) -> Result<f64>,
{
    if lo > hi {
        return Err(Error::InvalidBracket {
            w_min: lo,
            w_max: hi,
        });
    }
    let mut memo: BTreeMap<usize, f64> = BTreeMap::new();
    let mut log = Vec::new();
    let mut eval = |w: usize, memo: &mut BTreeMap<usize, f64>| -> Result<f64> {
        if let Some(&v) = memo.get(&w) {
            return Ok(v);
        }
        let v = f(w)?;
        memo.insert(w, v);
        log.push((w, v));
        Ok(v)
    };
    let (mut a, mut b) = (lo, hi);
    while b - a > 3 {
        let span = (b - a) as f64;
        let mut c = a + crate::math::round(INV_PHI2 * span) as usize;
        c = c.clamp(a + 1, b - 2);
        let d = (a + b - c).max(c + 1);
        if eval(c, &mut memo)? > eval(d, &mut memo)? {
            b = d;
        } else {
            a = c;
        }
    }
    for w in a..=b {
        eval(w, &mut memo)?;
    }
    best_of(log, lo, hi)
}

/// Golden-section search for the `w` maximising the objective on
/// `[w_min, w_max]`.
pub fn optimize_bandwidth(
    seq: &SymbolSequence,
    cfg: &ObjectiveConfig,
    w_min: usize,
    w_max: usize,
) -> Result<BandwidthResult> {
    cfg.validate()?;
    check_bracket(w_min, w_max, cfg.k, seq.len())?;
    let stream = BlockStream::new(seq, cfg.k)?;
    golden_section_max(w_min, w_max, |w| {
        Ok(objective_detail(&stream, w, cfg)?.value)
    })
}

/// [`optimize_bandwidth`] over [`default_bounds`].
pub fn optimize_bandwidth_default(
    seq: &SymbolSequence,
    cfg: &ObjectiveConfig,
) -> Result<BandwidthResult> {
    let (lo, hi) = default_bounds(seq, cfg.k)?;
    optimize_bandwidth(seq, cfg, lo, hi)
}

/// Grid points `w_min, w_min + step, …` plus `w_max`.
pub fn grid_points(w_min: usize, w_max: usize, step: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (w_min..=w_max).step_by(step.max(1)).collect();
    if out.last() != Some(&w_max) {
        out.push(w_max);
    }
    out
}

/// Result of a search from already evaluated points; ties go to larger `w`.
pub fn best_of(
    evaluations: Vec<(usize, f64)>,
    w_min: usize,
    w_max: usize,
) -> Result<BandwidthResult> {
    let (w_opt, objective_value) = evaluations
        .iter()
        .copied()
        .fold(None::<(usize, f64)>, |best, (w, v)| match best {
            Some((bw, bv)) if bv > v || (bv == v && bw > w) => best,
            _ => Some((w, v)),
        })
        .ok_or(Error::InvalidBracket { w_min, w_max })?;
    Ok(BandwidthResult {
        w_opt,
        objective_value,
        evaluations,
        stationary_verdict: objective_value < 0.0,
        w_min,
        w_max,
    })
}

/// Exhaustive evaluation on a grid, for diagnostics.
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
        .into_iter()
        .map(|w| Ok((w, objective_detail(&stream, w, cfg)?.value)))
        .collect::<Result<Vec<_>>>()?;
    best_of(evaluations, w_min, w_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::DEFAULT_Q99;
    use crate::simulate::gen_uniform;
    use crate::variance::estimate;

    #[test]
    fn golden_section_finds_peak() {
        for peak in [0usize, 1, 17, 500, 998, 1000] {
            let r = golden_section_max(0, 1000, |w| Ok(-((w as f64) - peak as f64).abs())).unwrap();
            assert_eq!(r.w_opt, peak);
            assert!(r.evaluations.len() < 40);
            assert!(r.evaluations.iter().all(|&(w, _)| w <= 1000));
        }
        let r = golden_section_max(5, 5, |_| Ok(1.0)).unwrap();
        assert_eq!(r.w_opt, 5);
    }

    #[test]
    fn golden_section_prefers_larger_on_plateau() {
        let r = golden_section_max(10, 200, |_| Ok(-1.0)).unwrap();
        assert_eq!(r.w_opt, 200);
    }

    #[test]
    fn two_tiles_match_direct_test() {
        let seq = gen_uniform(20_000, 4, 8).unwrap();
        let cfg = ObjectiveConfig {
            k: 4,
            q99: DEFAULT_Q99,
            layout: WindowLayout::Tiled,
        };
        let d = objective_detail(&BlockStream::new(&seq, 4).unwrap(), 10_000, &cfg).unwrap();
        assert_eq!(d.pairs, 1);
        let a = estimate(&seq.slice(0, 10_000).unwrap(), 4).unwrap();
        let b = estimate(&seq.slice(10_000, 20_000).unwrap(), 4).unwrap();
        let z = z_score(&a, &b).unwrap();
        assert!((d.max_abs_z - z.abs()).abs() < 1e-12);
        if z.abs() <= DEFAULT_Q99 {
            assert_eq!(d.value, -1.0 / 10_000.0);
        } else {
            assert_eq!(d.value, z.abs());
        }
    }

    #[test]
    fn sliding_pair_count() {
        let seq = gen_uniform(1000, 4, 8).unwrap();
        let stream = BlockStream::new(&seq, 2).unwrap();
        let d = objective_detail(&stream, 300, &ObjectiveConfig::new(2, DEFAULT_Q99)).unwrap();
        assert_eq!(d.pairs, 401);
        let cfg = ObjectiveConfig {
            layout: WindowLayout::Sliding { step: 100 },
            ..ObjectiveConfig::new(2, DEFAULT_Q99)
        };
        assert_eq!(objective_detail(&stream, 300, &cfg).unwrap().pairs, 5);
        assert!(objective_detail(&stream, 501, &cfg).is_err());
    }

    #[test]
    fn bounds() {
        assert_eq!(n_max(30_000, 4), 14_998);
        let seq = gen_uniform(30_000, 4, 1).unwrap();
        assert_eq!(default_bounds(&seq, 4).unwrap(), (2594, 14_998));
        let cfg = ObjectiveConfig::new(4, DEFAULT_Q99);
        assert!(optimize_bandwidth(&seq, &cfg, 3, 100).is_err());
        assert!(optimize_bandwidth(&seq, &cfg, 100, 100).is_err());
        assert!(optimize_bandwidth(&seq, &cfg, 100, 14_999).is_err());
    }

    #[test]
    fn grid_points_include_ends() {
        assert_eq!(grid_points(10, 20, 4), [10, 14, 18, 20]);
        assert_eq!(grid_points(10, 18, 4), [10, 14, 18]);
    }
}
