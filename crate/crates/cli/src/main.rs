//! `unicomp`: complexities and bound certification for finite learning
//! problems given as JSON.
//!
//! Exit status is 0 when every requested check passes, 1 when one fails or
//! is inconclusive, 2 on bad input.

mod input;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use unicomp::estimators::{block_comp_exact, eta_grid_select, two_part_mdl, PriorOverClass, SplitRule};
use unicomp::harness::{
    default_rate_ns, equalizer_experiment, model_select_experiment, rate_experiment, threshold_grid, write_csv,
    RateEstimator,
};
use unicomp::measure::DEFAULT_EXACT_CAP;
use unicomp::shtarkov::{comp_max, shtarkov_luckiness, shtarkov_simple, GeneralizedComplexity, Variant};
use unicomp::{ComputeConfig, EntropifiedModel, Luckiness, McConfig, VerificationResult};

use input::{load, parse_list, read_json, read_penalty, read_prior, require, Loaded, Pairing};

#[derive(Debug, Parser)]
#[command(name = "unicomp", version, about = "Unified complexities for finite learning problems")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Problem description (JSON).
    #[arg(long, global = true)]
    problem: Option<PathBuf>,
    /// Generator description (JSON), instead of --problem.
    #[arg(long, global = true)]
    generator: Option<PathBuf>,
    /// Rescale losses that break the 1/2 range bound instead of rejecting.
    #[arg(long, global = true)]
    allow_unscaled: bool,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Largest |Z|^n enumerated exactly; beyond it Monte Carlo is used.
    #[arg(long, global = true, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: u64,
    #[arg(long, global = true, default_value_t = 10_000)]
    mc_trials: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    out: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Shtarkov integral and complexity of one estimator and luckiness.
    Comp(CompArgs),
    /// Certify identities and inequalities; prints a JSON array of results.
    Verify(verify::VerifyArgs),
    /// Mean excess risk against n and the fitted log-log slope.
    Rates(RatesArgs),
    /// Two-part MDL against ERM on the full class and on the best block.
    Select(SelectArgs),
    /// Regret of the luckiness-NML strategy on every sample.
    Equalizer(EqualizerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Simple,
    Max,
    Luckiness,
    Generalized,
    Full,
}

#[derive(Debug, Args)]
struct CompArgs {
    #[command(flatten)]
    pairing: Pairing,
    #[arg(long, value_enum, default_value_t = Mode::Generalized)]
    mode: Mode,
    /// Comma-separated outcome indices z^n; adds the per-sample terms.
    #[arg(long)]
    sample: Option<String>,
}

#[derive(Debug, Args)]
struct RatesArgs {
    /// Grid size of the default threshold problem.
    #[arg(long, default_value_t = 1024)]
    m: usize,
    /// Margin of the default threshold problem.
    #[arg(long, default_value_t = 0.0)]
    h: f64,
    /// Comma-separated sample sizes (default 16,32,...,1024).
    #[arg(long)]
    ns: Option<String>,
    /// erm | oracle | bayes:<eta>
    #[arg(long, default_value = "erm")]
    estimator: String,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// Partition file {"blocks": [[...], ...]}; optional for nested-blocks generators.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// JSON array of block-prior masses (default uniform).
    #[arg(long)]
    block_prior: Option<PathBuf>,
    /// `exact`, or a JSON file with one complexity bound per block.
    #[arg(long, default_value = "exact")]
    comp_bounds: String,
    #[arg(long, conflicts_with = "eta_grid")]
    eta: Option<f64>,
    /// Comma-separated η grid searched by held-out loss.
    #[arg(long)]
    eta_grid: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "1,2,3,4")]
    ns: String,
}

#[derive(Debug, Args)]
struct EqualizerArgs {
    #[command(flatten)]
    pairing: Pairing,
    /// Penalized path: penalized ERM with penalty luckiness and comparator
    /// min_f(−ln p_f + Γ(f)). Needs a log-loss problem at η = 1.
    #[arg(long = "penalized")]
    penalized: bool,
}

fn compute_config(g: &Global) -> ComputeConfig {
    let mut cfg = ComputeConfig {
        exact_cap: g.exact_cap,
        mc: McConfig { trials: g.mc_trials, seed: g.seed, stream_id: 0 },
        ..ComputeConfig::default()
    };
    if let Some(t) = g.threads {
        cfg.threads = t.max(1);
    }
    cfg
}

fn emit_json<T: Serialize>(value: &T) -> Result<()> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    serde_json::to_writer_pretty(&mut lock, value)?;
    writeln!(lock)?;
    Ok(())
}

fn emit_csv<T: Serialize>(rows: &[T]) -> Result<()> {
    write_csv(rows, std::io::stdout().lock())?;
    Ok(())
}

#[derive(Serialize)]
struct ResultRow<'a> {
    name: &'a str,
    relation: unicomp::report::Relation,
    lhs: f64,
    rhs: f64,
    slack: f64,
    tolerance: f64,
    verdict: unicomp::Verdict,
    notes: String,
}

fn emit_results(format: Format, results: &[VerificationResult]) -> Result<()> {
    match format {
        Format::Json => emit_json(&results),
        Format::Csv => {
            let rows: Vec<ResultRow<'_>> = results
                .iter()
                .map(|r| ResultRow {
                    name: &r.name,
                    relation: r.relation,
                    lhs: r.lhs,
                    rhs: r.rhs,
                    slack: r.slack,
                    tolerance: r.tolerance,
                    verdict: r.verdict,
                    notes: r.notes.join("; "),
                })
                .collect();
            emit_csv(&rows)
        }
    }
}

fn sample_arg(s: &Option<String>) -> Result<Option<Vec<usize>>> {
    s.as_deref().map(parse_list).transpose()
}

fn comp(args: &CompArgs, loaded: &Loaded, cfg: &ComputeConfig, format: Format) -> Result<bool> {
    let problem = &loaded.problem;
    let model = EntropifiedModel::new(problem);
    let sample = sample_arg(&args.sample)?;
    if let Some(s) = &sample {
        problem.check_sample(s)?;
    }
    let report = match args.mode {
        Mode::Max => comp_max(&model, cfg)?.report,
        mode => {
            let est = args.pairing.estimator(&model)?;
            let (variant, w) = match mode {
                Mode::Simple => {
                    shtarkov_simple(&model, &est, cfg)?;
                    (Variant::Simple, Luckiness::one())
                }
                Mode::Luckiness => {
                    let w = args.pairing.luckiness(problem, &est)?;
                    shtarkov_luckiness(&model, &est, &w, cfg)?;
                    (Variant::Luckiness, w)
                }
                _ => (Variant::Generalized, args.pairing.luckiness(problem, &est)?),
            };
            if mode == Mode::Full && sample.is_none() {
                bail!("--mode full needs --sample");
            }
            GeneralizedComplexity::compute(&model, &est, &w, cfg)?.report(variant, sample.as_deref())
        }
    };
    match format {
        Format::Json => emit_json(&report)?,
        Format::Csv => emit_csv(&[report])?,
    }
    Ok(true)
}

fn rates(args: &RatesArgs, loaded: Option<Loaded>, cfg: &ComputeConfig, format: Format) -> Result<bool> {
    let (problem, threshold) = match loaded {
        Some(l) => (l.problem, l.threshold),
        None => {
            let (p, g) = threshold_grid(args.m, args.h, 1.0, 1)?;
            (p, Some(g))
        }
    };
    let estimator = match args.estimator.as_str() {
        "erm" => RateEstimator::Erm,
        "oracle" => RateEstimator::Oracle,
        other => match other.strip_prefix("bayes:") {
            Some(eta) => RateEstimator::GeneralizedBayes { eta: eta.parse().context("bad eta")? },
            None => bail!("unknown rate estimator {other:?}"),
        },
    };
    let ns = match &args.ns {
        Some(s) => parse_list(s)?,
        None => default_rate_ns(),
    };
    let report = rate_experiment(&problem, estimator, &ns, threshold.as_ref(), cfg)?;
    match format {
        Format::Json => emit_json(&report)?,
        Format::Csv => emit_csv(&report.rows)?,
    }
    Ok(report.pass)
}

#[derive(Serialize)]
struct SelectOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_selection: Option<unicomp::estimators::EtaSelection>,
    #[serde(flatten)]
    report: unicomp::harness::SelectReport,
}

fn select(args: &SelectArgs, loaded: Loaded, cfg: &ComputeConfig, format: Format) -> Result<bool> {
    let problem = &loaded.problem;
    let partition = match (&args.partition, loaded.partition) {
        (Some(path), _) => input::read_partition(path, problem.num_predictors())?,
        (None, Some(p)) => p,
        (None, None) => bail!("--partition <file> is required"),
    };
    let k = partition.num_blocks();
    let pi_k = match &args.block_prior {
        Some(p) => read_prior(p)?,
        None => PriorOverClass::uniform(k),
    };
    let bounds: Option<Vec<f64>> = match args.comp_bounds.as_str() {
        "exact" => None,
        path => Some(read_json(std::path::Path::new(path))?),
    };
    let (eta, eta_selection) = match (&args.eta, &args.eta_grid) {
        (Some(e), _) => (*e, None),
        (None, Some(grid)) => {
            let grid: Vec<f64> = parse_list(grid)?;
            let family = |eta: f64| {
                let at = problem.with_eta(eta)?;
                let comps = match &bounds {
                    Some(b) => b.clone(),
                    None => block_comp_exact(&EntropifiedModel::new(&at), &partition, cfg)?,
                };
                two_part_mdl(&at, &partition, &pi_k, &comps, eta)
            };
            let sel = eta_grid_select(problem, &grid, family, SplitRule::default(), &cfg.mc)?;
            (sel.eta, Some(sel))
        }
        (None, None) => (problem.eta(), None),
    };
    let ns: Vec<usize> = parse_list(&args.ns)?;
    let report = model_select_experiment(problem, &partition, &pi_k, eta, &ns, bounds.as_deref(), cfg)?;
    let pass = report.bound.passed() && report.overhead.passed();
    match format {
        Format::Json => emit_json(&SelectOutput { eta_selection, report })?,
        Format::Csv => emit_csv(&report.rows)?,
    }
    Ok(pass)
}

fn equalizer(args: &EqualizerArgs, loaded: &Loaded, cfg: &ComputeConfig, format: Format) -> Result<bool> {
    let problem = &loaded.problem;
    let model = EntropifiedModel::new(problem);
    let report = if args.penalized {
        let path = args.pairing.penalty.as_deref().context("--penalized needs --penalty <file>")?;
        let gamma = read_penalty(path)?;
        let est = unicomp::estimators::penalized_erm(problem, &gamma, problem.eta())?;
        let w = Luckiness::penalty(gamma.gamma.clone(), est.clone())?;
        equalizer_experiment(&model, &est, &w, Some(&gamma.gamma), cfg)?
    } else {
        let est = args.pairing.estimator(&model)?;
        let w = args.pairing.luckiness(problem, &est)?;
        equalizer_experiment(&model, &est, &w, None, cfg)?
    };
    let pass = report.result().passed();
    match format {
        Format::Json => emit_json(&report)?,
        Format::Csv => emit_results(format, &[report.spread.clone(), report.constant.clone()])?,
    }
    Ok(pass)
}

fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    let cfg = compute_config(g);
    let loaded = load(g.problem.as_deref(), g.generator.as_deref(), g.allow_unscaled)?;
    match &cli.command {
        Command::Comp(a) => comp(a, &require(loaded)?, &cfg, g.out),
        Command::Verify(a) => {
            let results = verify::run(a, &require(loaded)?, &cfg)?;
            emit_results(g.out, &results)?;
            Ok(results.iter().all(|r| r.passed()))
        }
        Command::Rates(a) => rates(a, loaded, &cfg, g.out),
        Command::Select(a) => select(a, require(loaded)?, &cfg, g.out),
        Command::Equalizer(a) => equalizer(a, &require(loaded)?, &cfg, g.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
