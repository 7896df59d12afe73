use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use subgauss::adversarial::{infvar_stress, InfvarParams};
use subgauss::combiner::{combine, FamilyBuilder};
use subgauss::distributions::{parse_distribution, regularity_probe, DistributionSpec, Sample};
use subgauss::estimators::{median_of_means, mom_block_count};
use subgauss::harness::{
    run_tail_experiment, write_report, EstimatorKind, ExperimentConfig, ReportFormat,
};
use subgauss::kurtosis::{kurtosis_diagnostics, KurtosisConfig};
use subgauss::numeric::ceil_snap;

#[derive(Parser, Debug)]
#[command(
    name = "subgauss",
    version,
    about = "Sub-Gaussian mean estimators and tail benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the mean of a file holding one number per line.
    Estimate(EstimateArgs),
    /// Monte Carlo tail report for an estimator on a distribution.
    Bench(BenchArgs),
    /// Run a lower-bound construction against a built-in estimator.
    Adversary(AdversaryArgs),
    /// Estimate P(S_j <= j mu) and P(S_j >= j mu).
    Probe(ProbeArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
enum EstimatorName {
    Empirical,
    Mom,
    QuantileKreg,
    CombinedFixedSigma,
    CombinedAdaptive,
    Kurtosis,
}

#[derive(clap::Args, Debug)]
struct EstimatorFlags {
    /// Confidence level; δ_min for the combined estimators.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of blocks for the variance and centre estimates (kurtosis).
    #[arg(long)]
    b_max: Option<usize>,
    /// Known upper bound on the variance (combined_fixed_sigma).
    #[arg(long)]
    sigma2_hi: Option<f64>,
    /// Regularity parameter k (quantile_kreg).
    #[arg(long)]
    k_reg: Option<usize>,
    /// Kurtosis bound κ (kurtosis).
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(clap::Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    estimator: EstimatorName,
    #[command(flatten)]
    flags: EstimatorFlags,
    /// Also print intermediate quantities and unmet conditions.
    #[arg(long)]
    diagnostics: bool,
}

#[derive(clap::Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    dist: String,
    #[arg(long, value_enum)]
    estimator: EstimatorName,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    deltas: Vec<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: FormatName,
    /// δ_min for the combined estimators; defaults to the smallest grid δ.
    #[arg(long)]
    delta_min: Option<f64>,
    #[arg(long)]
    b_max: Option<usize>,
    #[arg(long)]
    sigma2_hi: Option<f64>,
    #[arg(long)]
    k_reg: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatName {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum AdversaryMode {
    Infvar,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum AdversaryEstimator {
    Empirical,
    Mom,
    /// Always answers 0.
    Zero,
}

#[derive(clap::Args, Debug)]
struct AdversaryArgs {
    #[arg(long, value_enum)]
    mode: AdversaryMode,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    moment: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_enum, default_value = "empirical")]
    estimator: AdversaryEstimator,
}

#[derive(clap::Args, Debug)]
struct ProbeArgs {
    #[arg(long)]
    dist: String,
    #[arg(long)]
    j: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
}

/// Reports a semantic usage error the way clap does (exit code 2).
fn usage(msg: impl std::fmt::Display) -> ! {
    Cli::command()
        .error(clap::error::ErrorKind::ArgumentConflict, msg)
        .exit()
}

fn require<T>(value: Option<T>, flag: &str, estimator: &str) -> T {
    value.unwrap_or_else(|| usage(format!("--{flag} is required for estimator {estimator}")))
}

fn read_sample(path: &Path) -> anyhow::Result<Sample> {
    let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let x: f64 = line
            .parse()
            .with_context(|| format!("{}:{}: not a number: `{line}`", path.display(), i + 1))?;
        values.push(x);
    }
    Sample::new(values).with_context(|| format!("reading {}", path.display()))
}

/// Plug-in kurtosis `m₄/m₂²`, at least 1.
fn sample_kurtosis(sample: &Sample) -> f64 {
    let mean = sample.mean();
    let (mut m2, mut m4) = (0.0, 0.0);
    for &x in sample.values() {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    let n = sample.len() as f64;
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 > 0.0 {
        (m4 / (m2 * m2)).max(1.0)
    } else {
        1.0
    }
}

/// Smallest block count whose guarantee range reaches `delta`.
fn b_max_for_delta(delta: f64) -> usize {
    let probe = KurtosisConfig {
        b_max: 1,
        kappa_bound: 1.0,
    };
    // delta_min(b) = delta_min(1)·e^{1−b}
    let b = ceil_snap(1.0 + (probe.delta_min() / delta).ln());
    b.max(1.0) as usize
}

fn estimator_kind(
    name: EstimatorName,
    flags: &EstimatorFlags,
    sample: Option<&Sample>,
) -> EstimatorKind {
    let label = name
        .to_possible_value()
        .map(|v| v.get_name().to_owned())
        .unwrap_or_default();
    match name {
        EstimatorName::Empirical => EstimatorKind::Empirical,
        EstimatorName::Mom => EstimatorKind::Mom,
        EstimatorName::QuantileKreg => EstimatorKind::QuantileKreg {
            k: flags.k_reg.unwrap_or(1),
            delta_min: flags.delta,
        },
        EstimatorName::CombinedFixedSigma => EstimatorKind::CombinedFixedSigma {
            sigma2_hi: require(flags.sigma2_hi, "sigma2-hi", &label),
            delta_min: require(flags.delta, "delta", &label),
        },
        EstimatorName::CombinedAdaptive => EstimatorKind::CombinedAdaptive {
            delta_min: require(flags.delta, "delta", &label),
        },
        EstimatorName::Kurtosis => {
            let b_max = match (flags.b_max, flags.delta) {
                (Some(b), _) => b,
                (None, Some(d)) => b_max_for_delta(d),
                (None, None) => usage("--b-max or --delta is required for estimator kurtosis"),
            };
            let kappa_bound = flags
                .kappa
                .or_else(|| sample.map(sample_kurtosis))
                .unwrap_or_else(|| usage("--kappa is required for estimator kurtosis"));
            EstimatorKind::Kurtosis { b_max, kappa_bound }
        }
    }
}

fn run_estimate(args: &EstimateArgs) -> anyhow::Result<()> {
    if args.estimator == EstimatorName::Mom && args.flags.delta.is_none() {
        usage("--delta is required for estimator mom");
    }
    let sample = read_sample(&args.input)?;
    let kind = estimator_kind(args.estimator, &args.flags, Some(&sample));
    match kind {
        EstimatorKind::Kurtosis { b_max, kappa_bound } if args.diagnostics => {
            let d = kurtosis_diagnostics(&sample, &KurtosisConfig::new(b_max, kappa_bound)?)?;
            println!("{}", d.estimate);
            println!("mu_hat={}", d.mu_hat);
            println!("nu2_hat={}", d.nu2_hat);
            println!("truncation_radius={}", d.radius);
            println!("kappa_bound={kappa_bound}");
            println!("xi={} xi1={} xi2={}", d.xi.xi, d.xi.xi1, d.xi.xi2);
            println!("constant={}", d.xi.constant());
            for w in &d.warnings {
                println!("warning: {w}");
            }
        }
        EstimatorKind::Mom if args.diagnostics => {
            let delta = args.flags.delta.expect("checked above");
            println!("{}", median_of_means(&sample, delta)?);
            println!("blocks={}", mom_block_count(delta));
        }
        EstimatorKind::QuantileKreg { k, delta_min } if args.diagnostics => {
            print_combined(&sample, &FamilyBuilder::QuantileKreg { k, delta_min })?;
        }
        EstimatorKind::CombinedFixedSigma {
            sigma2_hi,
            delta_min,
        } if args.diagnostics => {
            print_combined(
                &sample,
                &FamilyBuilder::FixedSigma {
                    sigma2_hi,
                    delta_min,
                },
            )?;
        }
        EstimatorKind::CombinedAdaptive { delta_min } if args.diagnostics => {
            print_combined(&sample, &FamilyBuilder::Adaptive { delta_min })?;
        }
        kind => println!("{}", kind.estimate(&sample, args.flags.delta)?),
    }
    Ok(())
}

fn print_combined(sample: &Sample, builder: &FamilyBuilder) -> anyhow::Result<()> {
    let family = builder.build(sample)?;
    let res = combine(&family);
    println!("{}", res.estimate);
    println!("levels={}", family.m());
    println!("k_hat={}", res.k_hat);
    println!(
        "interval=[{}, {}]",
        res.final_interval.lo(),
        res.final_interval.hi()
    );
    Ok(())
}

fn parse_dist(spec: &str) -> DistributionSpec {
    parse_distribution(spec).unwrap_or_else(|e| usage(e))
}

fn run_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let dist = parse_dist(&args.dist);
    let smallest = args.deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let flags = EstimatorFlags {
        delta: args.delta_min.or(match args.estimator {
            EstimatorName::QuantileKreg => None,
            _ => Some(smallest),
        }),
        b_max: args.b_max,
        sigma2_hi: args.sigma2_hi.or(Some(dist.variance())),
        k_reg: args.k_reg,
        kappa: args.kappa.or(dist.kurtosis().finite()),
    };
    let estimator = estimator_kind(args.estimator, &flags, None);
    let config = ExperimentConfig::new(
        dist,
        estimator,
        args.n,
        args.trials,
        args.deltas.clone(),
        args.seed,
    )
    .with_threads(args.threads);
    if let Err(e) = config.validate() {
        usage(e);
    }
    let started = Instant::now();
    let mut report = run_tail_experiment(&config)?;
    report.wall_time_secs = None;
    let format = match args.format {
        FormatName::Csv => ReportFormat::Csv,
        FormatName::Json => ReportFormat::Json,
    };
    write_report(&report, format, &args.out)?;
    eprintln!(
        "wrote {} rows to {} in {:.3}s on {} thread(s)",
        report.rows.len(),
        args.out.display(),
        started.elapsed().as_secs_f64(),
        args.threads
    );
    Ok(())
}

fn run_adversary(args: &AdversaryArgs) -> anyhow::Result<()> {
    let AdversaryMode::Infvar = args.mode;
    let params = InfvarParams {
        n: args.n,
        delta: args.delta,
        alpha: args.alpha,
        moment: args.moment,
        trials: args.trials,
        seed: args.seed,
        p_override: args.p,
    };
    let delta = args.delta;
    let report = match args.estimator {
        AdversaryEstimator::Empirical => infvar_stress(|s: &Sample| Ok(s.mean()), &params)?,
        AdversaryEstimator::Mom => infvar_stress(|s: &Sample| median_of_means(s, delta), &params)?,
        AdversaryEstimator::Zero => infvar_stress(|_: &Sample| Ok(0.0), &params)?,
    };
    println!("p={}", report.p);
    println!("c={}", report.c);
    println!("radius={}", report.radius);
    println!("failure_rate_plus={}", report.failure_rate_plus);
    println!("failure_rate_minus={}", report.failure_rate_minus);
    println!("match_rate={}", report.match_rate);
    println!("expected_match={}", report.expected_match(args.n));
    println!("mechanism_holds={}", report.mechanism_holds(3.0));
    Ok(())
}

fn run_probe(args: &ProbeArgs) -> anyhow::Result<()> {
    let dist = parse_dist(&args.dist);
    let (minus, plus) = regularity_probe(&dist, args.j, args.trials, args.seed)?;
    println!("{minus} {plus}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Bench(a) => run_bench(a),
        Command::Adversary(a) => run_adversary(a),
        Command::Probe(a) => run_probe(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
