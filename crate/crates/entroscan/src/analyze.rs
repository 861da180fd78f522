//! The price-file workflow with a parallel rolling scan.

use std::path::Path;

use entroscan_core::bandwidth::{default_bounds, n_max, optimize_bandwidth, ObjectiveConfig};
use entroscan_core::pipeline::{
    attach_times, log_returns, prepare, summarize, Analysis, AnalyzeConfig, ReturnSeries,
};

use crate::{io, parallel, Result};

/// Same result as the core `analyze_returns`, with the scan spread over
/// threads.
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
    let mut report = parallel::rolling_scan(&test_symbols, w, cfg.k, cfg.quantile, cfg.step)?;
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

/// Log-returns of a `timestamp,price` CSV, analysed.
pub fn analyze_prices(path: &Path, cfg: &AnalyzeConfig) -> Result<Analysis> {
    let returns = log_returns(&io::read_prices(path)?)?;
    analyze_returns(&returns, cfg)
}

/// A `timestamp,return` CSV of filtered returns, analysed as given.
pub fn analyze_filtered_returns(path: &Path, cfg: &AnalyzeConfig) -> Result<Analysis> {
    analyze_returns(&io::read_returns(path)?, cfg)
}
