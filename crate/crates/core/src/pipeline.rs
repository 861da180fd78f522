//! From prices to a rolling change-detection report.
//!
//! Prices become log-returns, returns become four symbols by the quartiles
//! of a training sample, and the testing symbols are scanned with adjacent
//! windows of length `w`. Returns are taken as given: any filtering of
//! intraday patterns or microstructure noise belongs upstream, and a
//! pre-filtered [`ReturnSeries`] can be fed to [`analyze_returns`] directly.

use alloc::vec::Vec;
use core::ops::Range;

use crate::bandwidth::{
    default_bounds, n_max, optimize_bandwidth, BandwidthResult, ObjectiveConfig, WindowLayout,
};
use crate::entropy::SymbolSequence;
use crate::hypothesis::{classify, nearest_rank, z_score, Direction};
use crate::math::ln;
use crate::window::{BlockStream, SlidingWindow};
use crate::{Error, Result};

/// Prices with strictly increasing integer timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries {
    timestamps: Vec<i64>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(timestamps: Vec<i64>, prices: Vec<f64>) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return Err(Error::invalid(
                "prices",
                "timestamps and prices differ in length",
            ));
        }
        if prices.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        if let Some(index) = timestamps.windows(2).position(|t| t[1] <= t[0]) {
            return Err(Error::UnsortedTimestamps { index: index + 1 });
        }
        if let Some((index, &value)) = prices
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p > 0.0 && p.is_finite()))
        {
            return Err(Error::NonPositivePrice { index, value });
        }
        Ok(PriceSeries { timestamps, prices })
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Returns stamped with the timestamp at which each one ends.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSeries {
    timestamps: Vec<i64>,
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::invalid(
                "returns",
                "timestamps and values differ in length",
            ));
        }
        if let Some(index) = timestamps.windows(2).position(|t| t[1] <= t[0]) {
            return Err(Error::UnsortedTimestamps { index: index + 1 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("returns", "values must be finite"));
        }
        Ok(ReturnSeries { timestamps, values })
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Returns whose timestamps fall in `[range.start, range.end)`.
    pub fn select(&self, range: &Range<i64>) -> ReturnSeries {
        let lo = self.timestamps.partition_point(|&t| t < range.start);
        let hi = self.timestamps.partition_point(|&t| t < range.end);
        ReturnSeries {
            timestamps: self.timestamps[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
        }
    }
}

/// `R_t = ln(P_t / P_{t−1})`.
pub fn log_returns(ps: &PriceSeries) -> Result<ReturnSeries> {
    if ps.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: ps.len(),
        });
    }
    let values = ps.prices.windows(2).map(|p| ln(p[1] / p[0])).collect();
    ReturnSeries::new(ps.timestamps[1..].to_vec(), values)
}

/// Quartile thresholds fitted on a training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct QuartileThresholds {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// Number of returns the thresholds were fitted on.
    pub fitted_on: usize,
    /// Timestamp range of the training sample, when known.
    pub training_range: Option<Range<i64>>,
    /// Two or more thresholds coincide, so some symbols cannot occur.
    pub degenerate: bool,
}

/// 25th, 50th and 75th nearest-rank percentiles.
pub fn fit_quartiles(returns: &[f64]) -> Result<QuartileThresholds> {
    if returns.len() < 4 {
        return Err(Error::TooShort {
            needed: 4,
            got: returns.len(),
        });
    }
    if returns.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("returns", "values must be finite"));
    }
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = nearest_rank(&sorted, 0.25)?;
    let q2 = nearest_rank(&sorted, 0.5)?;
    let q3 = nearest_rank(&sorted, 0.75)?;
    Ok(QuartileThresholds {
        q1,
        q2,
        q3,
        fitted_on: returns.len(),
        training_range: None,
        degenerate: q1 == q2 || q2 == q3,
    })
}

/// `≤ Q1 → 0`, `(Q1, Q2] → 1`, `(Q2, Q3] → 2`, `> Q3 → 3`.
pub fn discretize(returns: &[f64], q: &QuartileThresholds) -> Result<SymbolSequence> {
    let symbols = returns
        .iter()
        .map(|&r| {
            if r <= q.q1 {
                0
            } else if r <= q.q2 {
                1
            } else if r <= q.q3 {
                2
            } else {
                3
            }
        })
        .collect();
    SymbolSequence::new(symbols, 4)
}

/// One comparison of `[t−2w, t−w)` (earlier) with `[t−w, t)` (later).
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRecord {
    /// End of the later window (exclusive) in the scanned sequence.
    pub position: usize,
    /// Timestamp of the last return in the later window, when known.
    pub time: Option<i64>,
    pub h_prev: f64,
    pub h: f64,
    pub var_prev: f64,
    pub var: f64,
    /// `None` when either window's plug-in variance was clamped.
    pub z: Option<f64>,
    pub significant: bool,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanParams {
    pub w: usize,
    pub k: usize,
    pub quantile: f64,
    pub step: usize,
    pub thresholds: Option<QuartileThresholds>,
}

/// Maximal run of consecutive significant records with one direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChangeRun {
    pub direction: Direction,
    /// Indices into [`ScanReport::records`], half-open.
    pub first: usize,
    pub end: usize,
    pub first_position: usize,
    pub last_position: usize,
}

impl ChangeRun {
    pub fn len(&self) -> usize {
        self.end - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.first
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    pub records: Vec<ScanRecord>,
    pub params: ScanParams,
}

impl ScanReport {
    pub fn tests(&self) -> usize {
        self.records.len()
    }

    pub fn count(&self, direction: Direction) -> usize {
        self.records
            .iter()
            .filter(|r| r.direction == direction)
            .count()
    }

    pub fn significant(&self) -> usize {
        self.records.iter().filter(|r| r.significant).count()
    }

    /// Records that were tested (no clamped variance).
    pub fn tested(&self) -> usize {
        self.records.iter().filter(|r| r.z.is_some()).count()
    }

    /// Runs of consecutive significant records sharing a direction.
    pub fn runs(&self) -> Vec<ChangeRun> {
        let mut out: Vec<ChangeRun> = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            if !r.significant {
                continue;
            }
            match out.last_mut() {
                Some(run) if run.end == i && run.direction == r.direction => {
                    run.end = i + 1;
                    run.last_position = r.position;
                }
                _ => out.push(ChangeRun {
                    direction: r.direction,
                    first: i,
                    end: i + 1,
                    first_position: r.position,
                    last_position: r.position,
                }),
            }
        }
        out
    }

    pub fn decrease_runs(&self) -> Vec<ChangeRun> {
        self.runs()
            .into_iter()
            .filter(|r| r.direction == Direction::Decrease)
            .collect()
    }
}

/// Scan positions `2w, 2w + step, …, ≤ len`.
pub fn scan_positions(len: usize, w: usize, step: usize) -> Vec<usize> {
    (2 * w..len + 1).step_by(step.max(1)).collect()
}

pub fn check_scan(stream: &BlockStream, w: usize, quantile: f64, step: usize) -> Result<()> {
    if step == 0 {
        return Err(Error::invalid("step", "must be at least 1"));
    }
    if quantile.is_nan() || quantile <= 0.0 {
        return Err(Error::invalid("quantile", "must be positive"));
    }
    if w < stream.k() {
        return Err(Error::invalid("w", "must be at least k"));
    }
    if 2 * w > stream.len() {
        return Err(Error::WindowTooLarge {
            w,
            len: stream.len(),
        });
    }
    Ok(())
}

/// Records for the given ascending positions; every position `t` needs
/// `2w ≤ t ≤ len`.
pub fn scan_records(
    stream: &BlockStream,
    w: usize,
    quantile: f64,
    positions: &[usize],
) -> Result<Vec<ScanRecord>> {
    let Some(&first) = positions.first() else {
        return Ok(Vec::new());
    };
    if first < 2 * w {
        return Err(Error::invalid("positions", "must be at least 2w"));
    }
    let mut a = SlidingWindow::new(stream, w, first - 2 * w)?;
    let mut b = SlidingWindow::new(stream, w, first - w)?;
    let mut out = Vec::with_capacity(positions.len());
    for &t in positions {
        a.move_to(t - 2 * w)?;
        b.move_to(t - w)?;
        let (ea, eb) = (a.estimate(), b.estimate());
        let (z, significant, direction) = match z_score(&ea, &eb) {
            Ok(z) => {
                let r = classify(z, quantile);
                (Some(z), r.significant, r.direction)
            }
            Err(Error::Untestable) | Err(Error::ZeroVariance) => (None, false, Direction::NoChange),
            Err(e) => return Err(e),
        };
        out.push(ScanRecord {
            position: t,
            time: None,
            h_prev: ea.value,
            h: eb.value,
            var_prev: ea.variance,
            var: eb.variance,
            z,
            significant,
            direction,
        });
    }
    Ok(out)
}

/// Compare every pair of adjacent windows ending at `t = 2w, 2w + step, …`.
/// Windows share no blocks.
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
    Ok(ScanReport {
        records: scan_records(&stream, w, quantile, &positions)?,
        params: ScanParams {
            w,
            k,
            quantile,
            step,
            thresholds: None,
        },
    })
}

/// Settings of [`analyze_returns`].
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzeConfig {
    pub train: Range<i64>,
    pub test: Range<i64>,
    pub k: usize,
    pub quantile: f64,
    /// Fixed window; `None` selects it on the training symbols.
    pub w: Option<usize>,
    pub step: usize,
    pub layout: WindowLayout,
}

impl AnalyzeConfig {
    pub fn new(train: Range<i64>, test: Range<i64>, k: usize, quantile: f64) -> Self {
        AnalyzeConfig {
            train,
            test,
            k,
            quantile,
            w: None,
            step: 1,
            layout: WindowLayout::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.start >= self.train.end || self.test.start >= self.test.end {
            return Err(Error::invalid(
                "range",
                "training and testing ranges must be non-empty",
            ));
        }
        if self.train.end > self.test.start {
            return Err(Error::invalid(
                "range",
                "training range must end before the testing range starts",
            ));
        }
        Ok(())
    }
}

/// Summary block of an analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisSummary {
    pub w: usize,
    /// `f(w_opt)` when the window was selected.
    pub objective_value: Option<f64>,
    pub stationary_verdict: Option<bool>,
    /// `⌊(L_train − k + 1)/2⌋`.
    pub n_max: usize,
    pub tests: usize,
    pub increases: usize,
    pub decreases: usize,
    pub train_returns: usize,
    pub test_returns: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub report: ScanReport,
    pub bandwidth: Option<BandwidthResult>,
    pub summary: AnalysisSummary,
}

/// The training part of an analysis: thresholds, training and testing
/// symbols.
pub fn prepare(
    returns: &ReturnSeries,
    cfg: &AnalyzeConfig,
) -> Result<(
    QuartileThresholds,
    SymbolSequence,
    ReturnSeries,
    SymbolSequence,
)> {
    cfg.validate()?;
    let train = returns.select(&cfg.train);
    let test = returns.select(&cfg.test);
    let mut thresholds = fit_quartiles(train.values())?;
    thresholds.training_range = Some(cfg.train.clone());
    let train_symbols = discretize(train.values(), &thresholds)?;
    let test_symbols = discretize(test.values(), &thresholds)?;
    Ok((thresholds, train_symbols, test, test_symbols))
}

/// Thresholds from the training range, window from `cfg.w` or a bandwidth
/// search on the training symbols, then a rolling scan of the testing range.
pub fn analyze_returns(returns: &ReturnSeries, cfg: &AnalyzeConfig) -> Result<Analysis> {
    let (thresholds, train_symbols, test, test_symbols) = prepare(returns, cfg)?;
    let bandwidth = match cfg.w {
        Some(_) => None,
        None => {
            let ocfg = ObjectiveConfig {
                k: cfg.k,
                q99: cfg.quantile,
                layout: cfg.layout,
            };
            let (lo, hi) = default_bounds(&train_symbols, cfg.k)?;
            Some(optimize_bandwidth(&train_symbols, &ocfg, lo, hi)?)
        }
    };
    let w = cfg.w.or(bandwidth.as_ref().map(|b| b.w_opt)).unwrap_or(0);
    let mut report = rolling_scan(&test_symbols, w, cfg.k, cfg.quantile, cfg.step)?;
    attach_times(&mut report, test.timestamps());
    report.params.thresholds = Some(thresholds);
    let summary = summarize(
        &report,
        bandwidth.as_ref(),
        n_max(train_symbols.len(), cfg.k),
        train_symbols.len(),
        test_symbols.len(),
    );
    Ok(Analysis {
        report,
        bandwidth,
        summary,
    })
}

/// Stamp each record with the timestamp of the last return of its later
/// window.
pub fn attach_times(report: &mut ScanReport, timestamps: &[i64]) {
    for r in &mut report.records {
        r.time = timestamps.get(r.position - 1).copied();
    }
}

pub fn summarize(
    report: &ScanReport,
    bandwidth: Option<&BandwidthResult>,
    n_max: usize,
    train_returns: usize,
    test_returns: usize,
) -> AnalysisSummary {
    AnalysisSummary {
        w: report.params.w,
        objective_value: bandwidth.map(|b| b.objective_value),
        stationary_verdict: bandwidth.map(|b| b.stationary_verdict),
        n_max,
        tests: report.tests(),
        increases: report.count(Direction::Increase),
        decreases: report.count(Direction::Decrease),
        train_returns,
        test_returns,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::DEFAULT_Q99;
    use crate::simulate::gen_uniform;
    use alloc::vec;

    #[test]
    fn price_validation() {
        assert!(PriceSeries::new(vec![1, 2], vec![1.0, 2.0]).is_ok());
        assert_eq!(
            PriceSeries::new(vec![1, 1], vec![1.0, 2.0]),
            Err(Error::UnsortedTimestamps { index: 1 })
        );
        assert!(matches!(
            PriceSeries::new(vec![1, 2, 3], vec![1.0, 0.0, 2.0]),
            Err(Error::NonPositivePrice { index: 1, .. })
        ));
    }

    #[test]
    fn returns_examples() {
        let r = log_returns(&PriceSeries::new(vec![0, 1, 2], vec![5.0; 3]).unwrap()).unwrap();
        assert_eq!(r.values(), [0.0, 0.0]);
        let r =
            log_returns(&PriceSeries::new(vec![0, 1], vec![1.0, core::f64::consts::E]).unwrap())
                .unwrap();
        assert_eq!(r.values(), [1.0]);
        assert_eq!(r.timestamps(), [1]);
        assert!(log_returns(&PriceSeries::new(vec![0], vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn quartile_examples() {
        let q = fit_quartiles(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((q.q1, q.q2, q.q3), (1.0, 2.0, 3.0));
        assert!(!q.degenerate);
        assert!(fit_quartiles(&[0.5; 10]).unwrap().degenerate);
        assert!(fit_quartiles(&[1.0, 2.0, 3.0]).is_err());

        let x: Vec<f64> = (1..=8).map(f64::from).collect();
        let q = fit_quartiles(&x).unwrap();
        assert_eq!(
            discretize(&x, &q).unwrap().symbols(),
            [0, 0, 1, 1, 2, 2, 3, 3]
        );
        assert_eq!(discretize(&[q.q1], &q).unwrap().symbols(), [0]);
    }

    #[test]
    fn scan_counts() {
        let seq = gen_uniform(5000, 4, 3).unwrap();
        let r = rolling_scan(&seq, 1000, 2, DEFAULT_Q99, 1).unwrap();
        assert_eq!(r.tests(), 5000 - 2000 + 1);
        assert_eq!(r.records[0].position, 2000);
        assert_eq!(r.records.last().unwrap().position, 5000);
        let r = rolling_scan(&seq, 1000, 2, DEFAULT_Q99, 5000).unwrap();
        assert_eq!(r.tests(), 1);
        assert!(rolling_scan(&seq, 2501, 2, DEFAULT_Q99, 1).is_err());
        for rec in &r.records {
            assert_eq!(rec.significant, rec.direction != Direction::NoChange);
        }
    }

    #[test]
    fn runs_group_consecutive_records() {
        let mk = |position, d: Direction| ScanRecord {
            position,
            time: None,
            h_prev: 0.0,
            h: 0.0,
            var_prev: 0.0,
            var: 0.0,
            z: Some(0.0),
            significant: d != Direction::NoChange,
            direction: d,
        };
        use Direction::*;
        let report = ScanReport {
            records: vec![
                mk(1, Decrease),
                mk(2, Decrease),
                mk(3, NoChange),
                mk(4, Decrease),
                mk(5, Increase),
                mk(6, Increase),
            ],
            params: ScanParams {
                w: 1,
                k: 1,
                quantile: 1.0,
                step: 1,
                thresholds: None,
            },
        };
        let runs = report.runs();
        assert_eq!(runs.len(), 3);
        assert_eq!(
            (runs[0].first_position, runs[0].last_position, runs[0].len()),
            (1, 2, 2)
        );
        assert_eq!(runs[2].direction, Increase);
        assert_eq!(report.decrease_runs().len(), 2);
    }

    #[test]
    fn analyze_ranges() {
        let r = ReturnSeries::new(vec![1, 2, 3], vec![0.0; 3]).unwrap();
        let bad = AnalyzeConfig::new(0..10, 5..20, 1, DEFAULT_Q99);
        assert!(analyze_returns(&r, &bad).is_err());
        assert_eq!(r.select(&(2..3)).timestamps(), [2]);
    }
}
