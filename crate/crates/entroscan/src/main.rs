use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use entroscan::experiment::{self, SweepConfig, POWER_TAUS};
use entroscan::{analyze, io, parallel};
use entroscan_core::bandwidth::{default_bounds, optimize_bandwidth, ObjectiveConfig};
use entroscan_core::entropy::{count_blocks, entropy_plugin, min_length};
use entroscan_core::hypothesis::{CalibrationConfig, QuantileTable, DEFAULT_Q99};
use entroscan_core::moments::{
    exact_moment_bruteforce, multinomial_central_moment, BRUTEFORCE_MAX_N,
};
use entroscan_core::pipeline::AnalyzeConfig;
use entroscan_core::simulate::{
    gen_stepwise, gen_tau_process, gen_uniform, ExperimentConfig, StepwiseSpec, TauProcessSpec,
};
use entroscan_core::variance::{variance_plugin, variance_true};
use entroscan_core::{MomentOrder, SymbolSequence};

#[derive(Parser)]
#[command(
    name = "entroscan",
    version,
    about = "Entropy estimation and entropy-change detection for symbol sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the central moment polynomial of order (m, k).
    Moments {
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 0)]
        k: u32,
        /// Evaluate at `p1,p2,n`.
        #[arg(long, value_name = "p1,p2,n")]
        eval: Option<String>,
        /// Compare against full enumeration for n = 1..=N at the `--eval`
        /// probabilities.
        #[arg(long, value_name = "N")]
        check_bruteforce: Option<u64>,
    },
    /// Variance of the plug-in entropy: from probabilities or from a sequence.
    Variance {
        /// Inline comma-separated probabilities or a file of them.
        #[arg(long, conflicts_with = "seq", requires = "n")]
        probs: Option<String>,
        #[arg(long)]
        n: Option<u64>,
        /// Sequence file.
        #[arg(long, requires = "k")]
        seq: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        alphabet: Option<u32>,
    },
    /// Monte Carlo quantiles of |z| under equal entropy.
    Calibrate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        alphabet: u32,
        #[arg(long, default_value_t = 20_000)]
        sims: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = VarianceArg::Plugin)]
        variance: VarianceArg,
        /// Allow analytic variance below the minimum length for all blocks.
        #[arg(long)]
        allow_short: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select the rolling-window length of a sequence.
    Bandwidth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        alphabet: Option<u32>,
        #[arg(long)]
        q99: Option<f64>,
        /// Quantile table file; its q99 is used unless `--q99` is given.
        #[arg(long)]
        quantiles: Option<PathBuf>,
        #[arg(long)]
        wmin: Option<usize>,
        #[arg(long)]
        wmax: Option<usize>,
        /// Evaluate every `step`-th window instead of the golden-section search.
        #[arg(long, value_name = "step")]
        grid: Option<usize>,
        /// `sliding`, `sliding:<step>` or `tiled`.
        #[arg(long, default_value = "sliding")]
        layout: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic sequence.
    Simulate {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        tau: Option<f64>,
        /// Middle segment length of the stepwise process.
        #[arg(long)]
        l: Option<usize>,
        #[arg(long, default_value_t = 4)]
        alphabet: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Size, power and bandwidth-recovery studies as CSV tables.
    Experiment {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_Q99)]
        quantile: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated τ values.
        #[arg(long)]
        taus: Option<String>,
        /// Comma-separated middle lengths for the bandwidth sweep.
        #[arg(long, default_value = "4000,10000")]
        ls: String,
        /// Total length of each stepwise sequence.
        #[arg(long, default_value_t = 30_000)]
        length: usize,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value = "sliding")]
        layout: String,
        /// Per-run rows of the bandwidth sweep.
        #[arg(long)]
        runs_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rolling comparison of adjacent windows of a sequence.
    Scan {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        w: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        alphabet: Option<u32>,
        #[arg(long)]
        quantile: Option<f64>,
        #[arg(long)]
        quantiles: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train thresholds and window on one time range, scan another.
    Analyze {
        #[arg(long, required_unless_present = "returns", conflicts_with = "returns")]
        prices: Option<PathBuf>,
        /// Filtered returns (`timestamp,return`) used in place of log-returns.
        #[arg(long)]
        returns: Option<PathBuf>,
        #[arg(long, value_name = "t0:t1")]
        train: String,
        #[arg(long, value_name = "t0:t1")]
        test: String,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long)]
        w: Option<usize>,
        #[arg(long)]
        quantile: Option<f64>,
        #[arg(long)]
        quantiles: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long, default_value = "sliding")]
        layout: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VarianceArg {
    Analytic,
    Plugin,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Uniform,
    Tau,
    Stepwise,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Size,
    Power,
    BandwidthSweep,
}

fn q99(explicit: Option<f64>, table: Option<&Path>) -> Result<f64> {
    if let Some(q) = explicit {
        return Ok(q);
    }
    match table {
        Some(p) => Ok(io::read_quantile_table(p)?.q99),
        None => Ok(QuantileTable::reference_default().q99),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn numbers<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|f| {
            f.trim()
                .parse::<T>()
                .map_err(|_| anyhow::anyhow!("bad {what} `{f}`"))
        })
        .collect()
}

fn moments(m: u32, k: u32, eval: Option<String>, check: Option<u64>) -> Result<()> {
    let order = MomentOrder::new(m, k);
    let poly = multinomial_central_moment(order);
    println!("mu_{{{m},{k}}} = {poly}");
    if order.beyond_truncation() {
        println!(
            "note: total order {} is beyond the truncation order 6",
            order.total()
        );
    }
    let point = match &eval {
        Some(s) => {
            let v: Vec<f64> = numbers(s, "evaluation point")?;
            if v.len() != 3 {
                bail!("--eval expects p1,p2,n");
            }
            Some((v[0], v[1], v[2] as u64))
        }
        None => None,
    };
    if let Some((p1, p2, n)) = point {
        println!(
            "value({p1}, {p2}, {n}) = {:e}",
            entroscan_core::moments::evaluate(&poly, p1, p2, n)?
        );
    }
    if let Some(max_n) = check {
        let (p1, p2) = point.map_or((0.3, 0.2), |(a, b, _)| (a, b));
        if max_n > BRUTEFORCE_MAX_N {
            bail!("--check-bruteforce supports n <= {BRUTEFORCE_MAX_N}");
        }
        let rest = 1.0 - p1 - p2;
        let probs: Vec<f64> = if k == 0 {
            vec![p1, 1.0 - p1]
        } else if rest > 1e-12 {
            vec![p1, p2, rest]
        } else {
            vec![p1, p2]
        };
        let mut worst = 0.0f64;
        for n in 1..=max_n {
            let a = entroscan_core::moments::evaluate(&poly, p1, if k == 0 { 0.0 } else { p2 }, n)?;
            let b = exact_moment_bruteforce(&probs, n, order)?;
            worst = worst.max((a - b).abs());
        }
        println!("max |recursion - enumeration| over n = 1..={max_n}: {worst:e}");
    }
    Ok(())
}

fn variance(
    probs: Option<String>,
    n: Option<u64>,
    seq: Option<PathBuf>,
    k: Option<usize>,
    alphabet: Option<u32>,
) -> Result<()> {
    if let Some(probs) = probs {
        let p = io::read_probs(&probs)?;
        let n = n.context("--n is required with --probs")?;
        let v = variance_true(&p, n)?;
        println!(
            "term1={:e}\nterm2={:e}\nterm3={:e}\nn={}\ntotal={:e}",
            v.term1, v.term2, v.term3, v.n, v.total
        );
        return Ok(());
    }
    let path = seq.context("give either --probs or --seq")?;
    let k = k.context("--k is required with --seq")?;
    let s = io::read_sequence(&path, alphabet)?;
    let counts = count_blocks(&s, k)?;
    let v = variance_plugin(&counts);
    println!(
        "entropy={}\nvariance={:e}\nraw_variance={:e}\nclamped={}\nbelow_min_length={}\nk={}\nn_eff={}\nm_hat={}",
        entropy_plugin(&counts),
        v.value,
        v.raw,
        v.clamped,
        v.below_min_length,
        k,
        counts.n_eff(),
        counts.m_hat()
    );
    if counts.m_hat() >= 2 {
        println!("min_length={}", min_length(counts.m_hat() as u64)?);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Moments {
            m,
            k,
            eval,
            check_bruteforce,
        } => moments(m, k, eval, check_bruteforce),
        Command::Variance {
            probs,
            n,
            seq,
            k,
            alphabet,
        } => variance(probs, n, seq, k, alphabet),
        Command::Calibrate {
            n,
            k,
            alphabet,
            sims,
            seed,
            variance,
            allow_short,
            out,
        } => {
            let mode = match variance {
                VarianceArg::Analytic => entroscan_core::hypothesis::VarianceMode::AnalyticUniform,
                VarianceArg::Plugin => entroscan_core::hypothesis::VarianceMode::Plugin,
            };
            let mut cfg = CalibrationConfig::new(n, k, alphabet, sims, seed, mode);
            cfg.enforce_min_length = !allow_short;
            let table = parallel::calibrate_quantiles(&cfg)?;
            emit(out.as_deref(), &io::format_quantile_table(&table))
        }
        Command::Bandwidth {
            input,
            k,
            alphabet,
            q99: q,
            quantiles,
            wmin,
            wmax,
            grid,
            layout,
            out,
        } => {
            let seq = io::read_sequence(&input, alphabet)?;
            let cfg = ObjectiveConfig {
                k,
                q99: q99(q, quantiles.as_deref())?,
                layout: io::parse_layout(&layout)?,
            };
            let (lo, hi) = default_bounds(&seq, k)?;
            let (lo, hi) = (wmin.unwrap_or(lo), wmax.unwrap_or(hi));
            let r = match grid {
                Some(step) => parallel::grid_search(&seq, &cfg, lo, hi, step)?,
                None => optimize_bandwidth(&seq, &cfg, lo, hi)?,
            };
            eprintln!(
                "w_opt={} f(w_opt)={} stationary={} probes={}",
                r.w_opt,
                r.objective_value,
                r.stationary_verdict,
                r.evaluations.len()
            );
            emit(out.as_deref(), &io::format_bandwidth(&r))
        }
        Command::Simulate {
            mode,
            length,
            tau,
            l,
            alphabet,
            seed,
            out,
        } => {
            let seq: SymbolSequence = match mode {
                Mode::Uniform => gen_uniform(length, alphabet, seed)?,
                Mode::Tau => {
                    let mut spec = TauProcessSpec::new(
                        tau.context("--tau is required for the tau process")?,
                        length,
                        seed,
                    );
                    spec.alphabet_size = alphabet;
                    gen_tau_process(&spec)?
                }
                Mode::Stepwise => {
                    let mut spec = StepwiseSpec::new(
                        length,
                        l.context("--l is required for the stepwise process")?,
                        tau.context("--tau is required for the stepwise process")?,
                        seed,
                    );
                    spec.alphabet_size = alphabet;
                    gen_stepwise(&spec)?
                }
            };
            io::write_sequence(&out, &seq)?;
            Ok(())
        }
        Command::Experiment {
            kind,
            trials,
            n,
            k,
            quantile,
            seed,
            taus,
            ls,
            length,
            runs,
            layout,
            runs_out,
            out,
        } => {
            let cfg = ExperimentConfig {
                trials,
                n,
                k,
                quantile,
                seed,
            };
            match kind {
                Kind::Size => {
                    let t = parallel::run_size_experiment(&cfg)?;
                    emit(out.as_deref(), &experiment::format_size(&cfg, &t))
                }
                Kind::Power => {
                    let taus = match taus {
                        Some(s) => numbers(&s, "tau")?,
                        None => POWER_TAUS.to_vec(),
                    };
                    let rows = experiment::power_table(&cfg, &taus)?;
                    emit(out.as_deref(), &experiment::format_power_table(&rows))
                }
                Kind::BandwidthSweep => {
                    let sweep = SweepConfig {
                        total_length: length,
                        middle_lengths: numbers(&ls, "middle length")?,
                        taus: match taus {
                            Some(s) => numbers(&s, "tau")?,
                            None => vec![0.5],
                        },
                        runs,
                        k,
                        q99: quantile,
                        seed,
                        layout: io::parse_layout(&layout)?,
                    };
                    let rows = experiment::run_bandwidth_sweep(&sweep)?;
                    if let Some(p) = runs_out {
                        emit(Some(&p), &experiment::format_sweep_runs(&rows))?;
                    }
                    emit(
                        out.as_deref(),
                        &experiment::format_sweep_summary(&experiment::summarize_sweep(&rows)),
                    )
                }
            }
        }
        Command::Scan {
            input,
            w,
            k,
            alphabet,
            quantile,
            quantiles,
            step,
            out,
        } => {
            let seq = io::read_sequence(&input, alphabet)?;
            let report =
                parallel::rolling_scan(&seq, w, k, q99(quantile, quantiles.as_deref())?, step)?;
            eprintln!(
                "tests={} increases={} decreases={}",
                report.tests(),
                report.count(entroscan_core::Direction::Increase),
                report.count(entroscan_core::Direction::Decrease)
            );
            emit(out.as_deref(), &io::format_report(&report))
        }
        Command::Analyze {
            prices,
            returns,
            train,
            test,
            k,
            w,
            quantile,
            quantiles,
            step,
            layout,
            out,
        } => {
            let mut cfg = AnalyzeConfig::new(
                io::parse_time_range(&train)?,
                io::parse_time_range(&test)?,
                k,
                q99(quantile, quantiles.as_deref())?,
            );
            cfg.w = w;
            cfg.step = step;
            cfg.layout = io::parse_layout(&layout)?;
            let analysis = match (prices, returns) {
                (Some(p), _) => analyze::analyze_prices(&p, &cfg)?,
                (None, Some(r)) => analyze::analyze_filtered_returns(&r, &cfg)?,
                (None, None) => bail!("give --prices or --returns"),
            };
            io::write_analysis(&out, &analysis, &cfg)?;
            let s = &analysis.summary;
            println!(
                "w={} f(w)={} n_max={} tests={} increases={} decreases={}",
                s.w,
                s.objective_value.map_or("-".to_string(), |v| v.to_string()),
                s.n_max,
                s.tests,
                s.increases,
                s.decreases
            );
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
