//! Text formats: symbol sequences, probability vectors, price CSVs, quantile
//! tables, bandwidth probe logs and scan reports.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use entroscan_core::bandwidth::BandwidthResult;
use entroscan_core::hypothesis::{
    CalibrationInfo, QuantileSource, QuantileTable, VarianceMode, PERCENTILE_RULE,
};
use entroscan_core::pipeline::{
    Analysis, AnalyzeConfig, PriceSeries, ReturnSeries, ScanRecord, ScanReport,
};
use entroscan_core::{SymbolSequence, WindowLayout};
use serde_json::{json, Map, Value};

use crate::{Error, Result};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parse a sequence written one symbol per line or as comma-separated
/// symbols. Without `alphabet` the size is `max + 1`.
pub fn parse_sequence(text: &str, origin: &Path, alphabet: Option<u32>) -> Result<SymbolSequence> {
    let mut symbols = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for field in line.split(',') {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            let s = field.parse::<u32>().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: format!("`{field}` is not a non-negative integer symbol"),
            })?;
            symbols.push(s);
        }
    }
    let seq = match alphabet {
        Some(a) => SymbolSequence::new(symbols, a),
        None => SymbolSequence::with_inferred_alphabet(symbols),
    };
    seq.map_err(Error::from)
}

pub fn read_sequence(path: &Path, alphabet: Option<u32>) -> Result<SymbolSequence> {
    parse_sequence(&read_text(path)?, path, alphabet)
}

/// One symbol per line.
pub fn format_sequence(seq: &SymbolSequence) -> String {
    let mut out = String::with_capacity(2 * seq.len());
    for s in seq.symbols() {
        let _ = writeln!(out, "{s}");
    }
    out
}

pub fn write_sequence(path: &Path, seq: &SymbolSequence) -> Result<()> {
    write_text(path, &format_sequence(seq))
}

/// Probabilities separated by commas or whitespace.
pub fn parse_probs(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::Format(format!("`{f}` is not a number")))
        })
        .collect()
}

/// `arg` names a file when one exists at that path, otherwise it is an
/// inline list.
pub fn read_probs(arg: &str) -> Result<Vec<f64>> {
    let path = Path::new(arg);
    if path.is_file() {
        parse_probs(&read_text(path)?)
    } else {
        parse_probs(arg)
    }
}

const DATETIME_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

/// An epoch integer as is, or an ISO-8601 date or date-time as Unix
/// seconds (UTC when no offset is given).
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    for f in DATETIME_FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return Some(t.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp())
}

/// A half-open range `t0:t1` or `t0..t1`. With `:` the split is taken at
/// the first colon that leaves two valid timestamps, so ISO times work.
pub fn parse_time_range(s: &str) -> Result<Range<i64>> {
    let bad = || Error::Format(format!("`{s}` is not a range t0:t1"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (
            parse_timestamp(a).ok_or_else(bad)?,
            parse_timestamp(b).ok_or_else(bad)?,
        );
        return Ok(a..b);
    }
    for (i, _) in s.match_indices(':') {
        if let (Some(a), Some(b)) = (parse_timestamp(&s[..i]), parse_timestamp(&s[i + 1..])) {
            return Ok(a..b);
        }
    }
    Err(bad())
}

fn read_columns<R: Read>(
    reader: R,
    origin: &Path,
    value: &str,
    positive: bool,
) -> Result<(Vec<i64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::csv(origin, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Format(format!("{}: missing `{name}` column", origin.display())))
    };
    let (tc, vc) = (column("timestamp")?, column(value)?);
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::csv(origin, e))?;
        let row = i + 1;
        let fail = |message: String| Error::Row {
            path: origin.to_path_buf(),
            row,
            line: record.position().map_or(0, |p| p.line()),
            message,
        };
        let ts_field = record.get(tc).unwrap_or("");
        let ts =
            parse_timestamp(ts_field).ok_or_else(|| fail(format!("bad timestamp `{ts_field}`")))?;
        let field = record.get(vc).unwrap_or("");
        let v = field
            .parse::<f64>()
            .map_err(|_| fail(format!("bad {value} `{field}`")))?;
        if !v.is_finite() || (positive && v <= 0.0) {
            let need = if positive {
                "positive and finite"
            } else {
                "finite"
            };
            return Err(fail(format!("{value} must be {need}, got {field}")));
        }
        if timestamps.last().is_some_and(|&prev| ts <= prev) {
            return Err(fail("timestamp is not after the previous row".to_string()));
        }
        timestamps.push(ts);
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Format(format!("{}: no data rows", origin.display())));
    }
    Ok((timestamps, values))
}

/// Read a `timestamp,price` CSV with a header. Column order is free and
/// extra columns are ignored. Rows are numbered from 1 after the header.
pub fn read_prices_from<R: Read>(reader: R, origin: &Path) -> Result<PriceSeries> {
    let (t, p) = read_columns(reader, origin, "price", true)?;
    PriceSeries::new(t, p).map_err(Error::from)
}

/// Read already filtered returns from a `timestamp,return` CSV, in place
/// of log-returns computed from prices.
pub fn read_returns(path: &Path) -> Result<ReturnSeries> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (t, r) = read_columns(std::io::BufReader::new(file), path, "return", false)?;
    ReturnSeries::new(t, r).map_err(Error::from)
}

pub fn read_prices(path: &Path) -> Result<PriceSeries> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_prices_from(std::io::BufReader::new(file), path)
}

/// Epoch timestamps and shortest round-trip prices.
pub fn format_prices(ps: &PriceSeries) -> String {
    let mut out = String::from("timestamp,price\n");
    for (t, p) in ps.timestamps().iter().zip(ps.prices()) {
        let _ = writeln!(out, "{t},{p}");
    }
    out
}

pub fn write_prices(path: &Path, ps: &PriceSeries) -> Result<()> {
    write_text(path, &format_prices(ps))
}

/// Flat `key=value` lines with the calibration settings.
pub fn format_quantile_table(t: &QuantileTable) -> String {
    let mut out = format!(
        "q95={}\nq99={}\nsource={}\npercentile_rule={PERCENTILE_RULE}\n",
        t.q95,
        t.q99,
        t.source.as_str()
    );
    if let Some(c) = &t.calibration {
        let _ = write!(
            out,
            "sims={}\nused={}\nn={}\nk={}\nalphabet_size={}\nseed={}\nvariance_mode={}\n",
            c.sims,
            c.used,
            c.n,
            c.k,
            c.alphabet_size,
            c.seed,
            c.variance_mode.as_str()
        );
    }
    out
}

fn key_values(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message: "expected key=value".to_string(),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_quantile_table(text: &str, origin: &Path) -> Result<QuantileTable> {
    let kv = key_values(text, origin)?;
    let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let missing = |key: &str| Error::Format(format!("{}: missing `{key}`", origin.display()));
    fn num<T: std::str::FromStr>(v: &str, key: &str) -> Result<T> {
        v.parse()
            .map_err(|_| Error::Format(format!("bad value for `{key}`: {v}")))
    }
    let field = |key: &str| get(key).ok_or_else(|| missing(key));
    let q95 = num::<f64>(field("q95")?, "q95")?;
    let q99 = num::<f64>(field("q99")?, "q99")?;
    let source = match get("source") {
        None | Some("reference_default") => QuantileSource::ReferenceDefault,
        Some("calibrated") => QuantileSource::Calibrated,
        Some(other) => return Err(Error::Format(format!("unknown source `{other}`"))),
    };
    let calibration = match get("sims") {
        None => None,
        Some(sims) => Some(CalibrationInfo {
            sims: num(sims, "sims")?,
            used: num(field("used")?, "used")?,
            n: num(field("n")?, "n")?,
            k: num(field("k")?, "k")?,
            alphabet_size: num(field("alphabet_size")?, "alphabet_size")?,
            seed: num(field("seed")?, "seed")?,
            variance_mode: parse_variance_mode(field("variance_mode")?)?,
        }),
    };
    QuantileTable::new(q95, q99, source, calibration).map_err(Error::from)
}

pub fn parse_variance_mode(s: &str) -> Result<VarianceMode> {
    match s {
        "analytic" => Ok(VarianceMode::AnalyticUniform),
        "plugin" => Ok(VarianceMode::Plugin),
        other => Err(Error::Format(format!("unknown variance mode `{other}`"))),
    }
}

pub fn read_quantile_table(path: &Path) -> Result<QuantileTable> {
    parse_quantile_table(&read_text(path)?, path)
}

pub fn write_quantile_table(path: &Path, t: &QuantileTable) -> Result<()> {
    write_text(path, &format_quantile_table(t))
}

pub fn layout_name(layout: WindowLayout) -> String {
    match layout {
        WindowLayout::Sliding { step } => format!("sliding:{step}"),
        WindowLayout::Tiled => "tiled".to_string(),
    }
}

/// `sliding`, `sliding:<step>` or `tiled`.
pub fn parse_layout(s: &str) -> Result<WindowLayout> {
    match s.split_once(':') {
        None if s == "sliding" => Ok(WindowLayout::Sliding { step: 1 }),
        None if s == "tiled" => Ok(WindowLayout::Tiled),
        Some(("sliding", step)) => match step.parse::<usize>() {
            Ok(step) if step >= 1 => Ok(WindowLayout::Sliding { step }),
            _ => Err(Error::Format(format!("bad sliding step `{step}`"))),
        },
        _ => Err(Error::Format(format!("unknown layout `{s}`"))),
    }
}

/// One `optimum` row followed by one `probe` row per evaluation, in probe
/// order.
pub fn format_bandwidth(r: &BandwidthResult) -> String {
    let mut out = String::from("kind,w,f\n");
    let _ = writeln!(out, "optimum,{},{}", r.w_opt, r.objective_value);
    for (w, f) in &r.evaluations {
        let _ = writeln!(out, "probe,{w},{f}");
    }
    out
}

pub fn write_bandwidth(path: &Path, r: &BandwidthResult) -> Result<()> {
    write_text(path, &format_bandwidth(r))
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn verdict(r: &ScanRecord) -> &'static str {
    match (r.z, r.significant) {
        (None, _) => "untestable",
        (Some(_), true) => "reject",
        (Some(_), false) => "accept",
    }
}

/// One row per test.
pub fn format_report(report: &ScanReport) -> String {
    let mut out = String::from("position,time,h_prev,h,var_prev,var,z,verdict,direction\n");
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.position,
            opt(r.time),
            r.h_prev,
            r.h,
            r.var_prev,
            r.var,
            opt(r.z),
            verdict(r),
            r.direction.as_str()
        );
    }
    out
}

/// Significant records only.
pub fn format_points(report: &ScanReport) -> String {
    let mut out = String::from("position,time,h,z,direction\n");
    for r in report.records.iter().filter(|r| r.significant) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.position,
            opt(r.time),
            r.h,
            opt(r.z),
            r.direction.as_str()
        );
    }
    out
}

/// Flat parameter block of an analysis.
pub fn format_params(analysis: &Analysis, cfg: &AnalyzeConfig) -> String {
    let s = &analysis.summary;
    let p = &analysis.report.params;
    let mut m = Map::new();
    m.insert("w".into(), json!(s.w));
    m.insert("w_selected".into(), json!(analysis.bandwidth.is_some()));
    m.insert("objective_value".into(), json!(s.objective_value));
    m.insert("stationary_verdict".into(), json!(s.stationary_verdict));
    m.insert("n_max".into(), json!(s.n_max));
    m.insert("tests".into(), json!(s.tests));
    m.insert("increases".into(), json!(s.increases));
    m.insert("decreases".into(), json!(s.decreases));
    m.insert("train_returns".into(), json!(s.train_returns));
    m.insert("test_returns".into(), json!(s.test_returns));
    m.insert("k".into(), json!(p.k));
    m.insert("quantile".into(), json!(p.quantile));
    m.insert("step".into(), json!(p.step));
    m.insert("layout".into(), json!(layout_name(cfg.layout)));
    m.insert("train_start".into(), json!(cfg.train.start));
    m.insert("train_end".into(), json!(cfg.train.end));
    m.insert("test_start".into(), json!(cfg.test.start));
    m.insert("test_end".into(), json!(cfg.test.end));
    m.insert("quartile_rule".into(), json!(PERCENTILE_RULE));
    if let Some(t) = &p.thresholds {
        m.insert("q1".into(), json!(t.q1));
        m.insert("q2".into(), json!(t.q2));
        m.insert("q3".into(), json!(t.q3));
        m.insert("thresholds_fitted_on".into(), json!(t.fitted_on));
        m.insert("thresholds_degenerate".into(), json!(t.degenerate));
    }
    if let Some(b) = &analysis.bandwidth {
        m.insert("w_min".into(), json!(b.w_min));
        m.insert("w_max".into(), json!(b.w_max));
        m.insert("evaluations".into(), json!(b.evaluations.len()));
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(m)).expect("plain values serialize");
    text.push('\n');
    text
}

/// Paths of the files written by [`write_analysis`].
#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub report: PathBuf,
    pub points: PathBuf,
    pub params: PathBuf,
}

/// Write `report.csv`, `report_points.csv` and `params.json` into `dir`.
pub fn write_analysis(dir: &Path, analysis: &Analysis, cfg: &AnalyzeConfig) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        report: dir.join("report.csv"),
        points: dir.join("report_points.csv"),
        params: dir.join("params.json"),
    };
    write_text(&files.report, &format_report(&analysis.report))?;
    write_text(&files.points, &format_points(&analysis.report))?;
    write_text(&files.params, &format_params(analysis, cfg))?;
    Ok(files)
}
