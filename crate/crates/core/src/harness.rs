//! Monte Carlo engine for tail reports.
//!
//! For each trial `t` a fresh sample is drawn from the generator seeded with
//! [`trial_seed`](crate::rng::trial_seed)`(seed, t)` and the absolute error
//! `|Ê − μ_P|` is recorded. Multiple-δ estimators are run once per trial and
//! scored at every δ of the grid; δ-dependent estimators (median-of-means)
//! are re-run per δ on the same sample.
//!
//! Per δ the report gives the sub-Gaussian radius `L σ_P √((1+ln(1/δ))/n)`
//! for the estimator's theoretical constant `L`, the fraction of trials
//! exceeding it, the empirical `(1−δ)`-quantile of the errors (sorted rank
//! `⌈(1−δ)T⌉`) and the normalized constant `L̂ = quantile/(σ_P √(…))`.
//!
//! Trials run on a dedicated rayon pool and are merged in trial order, so the
//! report does not depend on the thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiner::{dyadic_levels, multiple_delta_estimate, FamilyBuilder};
use crate::distributions::{DistributionSpec, Kurtosis, Sample};
use crate::error::{Error, Result};
use crate::estimators::{
    k_regular_constant, median_of_means, mom_delta_min, quantile_rank, select_rank, MOM_CONSTANT,
};
use crate::kurtosis::{kurtosis_estimate, xi_terms, KurtosisConfig};
use crate::numeric::sub_gaussian_scale;
use crate::rng::{rng_from_seed, splitmix64, trial_rng};

/// Default number of per-trial errors kept exactly (per δ column).
pub const DEFAULT_ERROR_CAP: usize = 1 << 22;

/// Rows with `δ < UNDERSAMPLED_FACTOR / T` are flagged as undersampled.
pub const UNDERSAMPLED_FACTOR: f64 = 10.0;

/// `√(1 + 2 ln 2)`, the price of combining a dyadic family.
fn combination_factor() -> f64 {
    (1.0 + 2.0 * std::f64::consts::LN_2).sqrt()
}

/// Estimators the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EstimatorKind {
    Empirical,
    /// δ-dependent median-of-means, re-run at every δ.
    Mom,
    /// Combined quantile intervals for a `k`-regular class.
    QuantileKreg {
        k: usize,
        delta_min: Option<f64>,
    },
    CombinedFixedSigma {
        sigma2_hi: f64,
        delta_min: f64,
    },
    CombinedAdaptive {
        delta_min: f64,
    },
    Kurtosis {
        b_max: usize,
        kappa_bound: f64,
    },
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Empirical => "empirical",
            EstimatorKind::Mom => "mom",
            EstimatorKind::QuantileKreg { .. } => "quantile_kreg",
            EstimatorKind::CombinedFixedSigma { .. } => "combined_fixed_sigma",
            EstimatorKind::CombinedAdaptive { .. } => "combined_adaptive",
            EstimatorKind::Kurtosis { .. } => "kurtosis",
        }
    }

    pub fn is_multiple_delta(&self) -> bool {
        !matches!(self, EstimatorKind::Mom)
    }

    fn builder(&self) -> Option<FamilyBuilder> {
        match *self {
            EstimatorKind::QuantileKreg { k, delta_min } => {
                Some(FamilyBuilder::QuantileKreg { k, delta_min })
            }
            EstimatorKind::CombinedFixedSigma {
                sigma2_hi,
                delta_min,
            } => Some(FamilyBuilder::FixedSigma {
                sigma2_hi,
                delta_min,
            }),
            EstimatorKind::CombinedAdaptive { delta_min } => {
                Some(FamilyBuilder::Adaptive { delta_min })
            }
            _ => None,
        }
    }

    /// Runs the estimator; `delta` is consulted only by δ-dependent ones.
    pub fn estimate(&self, sample: &Sample, delta: Option<f64>) -> Result<f64> {
        match *self {
            EstimatorKind::Empirical => Ok(sample.mean()),
            EstimatorKind::Mom => {
                let delta = delta.ok_or_else(|| {
                    Error::invalid("delta", "median-of-means needs a confidence level")
                })?;
                median_of_means(sample, delta)
            }
            EstimatorKind::Kurtosis { b_max, kappa_bound } => {
                kurtosis_estimate(sample, &KurtosisConfig::new(b_max, kappa_bound)?)
            }
            _ => multiple_delta_estimate(sample, &self.builder().expect("combined estimator")),
        }
    }

    /// Range `[δ_lo, 1)` on which the estimator's guarantee is stated.
    pub fn delta_range(&self, n: usize) -> (f64, f64) {
        let lo = match *self {
            EstimatorKind::Empirical => 0.0,
            EstimatorKind::Mom => mom_delta_min(n),
            EstimatorKind::Kurtosis { b_max, .. } => KurtosisConfig {
                b_max,
                kappa_bound: 1.0,
            }
            .delta_min(),
            _ => {
                let builder = self.builder().expect("combined estimator");
                match dyadic_levels(builder.delta_min(n)) {
                    Ok(m) => 0.5f64.powi(m as i32),
                    Err(_) => 1.0,
                }
            }
        };
        (lo, 1.0)
    }

    pub fn delta_in_range(&self, delta: f64, n: usize) -> bool {
        let (lo, hi) = self.delta_range(n);
        delta >= lo && delta < hi && delta > 0.0
    }

    /// Theoretical constant `L` such that the radius is `L σ_P √((1+ln(1/δ))/n)`.
    ///
    /// `None` when it cannot be expressed relative to `σ_P` (zero variance
    /// with a known-variance bound); the radius is then [`Self::radius`].
    pub fn theoretical_constant(&self, dist: &DistributionSpec, n: usize) -> Option<f64> {
        let sigma = dist.std_dev();
        match *self {
            EstimatorKind::Empirical => Some(std::f64::consts::SQRT_2),
            EstimatorKind::Mom => Some(MOM_CONSTANT),
            EstimatorKind::QuantileKreg { .. } => Some(k_regular_constant()),
            EstimatorKind::CombinedFixedSigma { sigma2_hi, .. } => (sigma > 0.0)
                .then(|| 2.0 * MOM_CONSTANT * combination_factor() * sigma2_hi.sqrt() / sigma),
            EstimatorKind::CombinedAdaptive { .. } => {
                Some(4.0 * MOM_CONSTANT * combination_factor())
            }
            EstimatorKind::Kurtosis { b_max, kappa_bound } => {
                Some(xi_terms(kappa_bound, n, b_max).constant())
            }
        }
    }

    /// Radius the error is compared against at level δ.
    pub fn radius(&self, dist: &DistributionSpec, n: usize, delta: f64) -> f64 {
        let scale = sub_gaussian_scale(delta, n);
        match (self, self.theoretical_constant(dist, n)) {
            (_, Some(l)) => l * dist.std_dev() * scale,
            (EstimatorKind::CombinedFixedSigma { sigma2_hi, .. }, None) => {
                2.0 * MOM_CONSTANT * combination_factor() * sigma2_hi.sqrt() * scale
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dist: DistributionSpec,
    pub estimator: EstimatorKind,
    pub n: usize,
    pub trials: usize,
    pub deltas: Vec<f64>,
    pub seed: u64,
    pub threads: usize,
    /// Errors kept exactly per δ column; beyond this a reservoir is used.
    pub error_cap: usize,
}

impl ExperimentConfig {
    pub fn new(
        dist: DistributionSpec,
        estimator: EstimatorKind,
        n: usize,
        trials: usize,
        deltas: Vec<f64>,
        seed: u64,
    ) -> Self {
        Self {
            dist,
            estimator,
            n,
            trials,
            deltas,
            seed,
            threads: 1,
            error_cap: DEFAULT_ERROR_CAP,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.threads == 0 {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        if self.error_cap == 0 {
            return Err(Error::invalid("error_cap", "must be at least 1"));
        }
        if self.deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(Error::invalid("deltas", "every δ must lie in (0, 1)"));
        }
        let increasing = self.deltas.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.deltas.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(Error::invalid("deltas", "must be strictly monotone"));
        }
        Ok(())
    }
}

/// Configuration echoed into reports. The thread count is left out: reports
/// are identical for every degree of parallelism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dist: DistributionSpec,
    pub mu: f64,
    pub sigma2: f64,
    /// `None` when the kurtosis is infinite.
    pub kappa: Option<f64>,
    pub estimator: EstimatorKind,
    pub n: usize,
    pub trials: usize,
    pub deltas: Vec<f64>,
    pub seed: u64,
    pub error_cap: usize,
}

impl From<&ExperimentConfig> for ConfigEcho {
    fn from(c: &ExperimentConfig) -> Self {
        Self {
            dist: c.dist,
            mu: c.dist.mean(),
            sigma2: c.dist.variance(),
            kappa: match c.dist.kurtosis() {
                Kurtosis::Finite(k) => Some(k),
                Kurtosis::Infinite => None,
            },
            estimator: c.estimator,
            n: c.n,
            trials: c.trials,
            deltas: c.deltas.clone(),
            seed: c.seed,
            error_cap: c.error_cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFlag {
    Ok,
    /// `δ < 10/T`: too few trials for a meaningful `(1−δ)`-quantile.
    Undersampled,
    /// δ outside the estimator's range; the row is not computed.
    OutOfRange,
}

impl RowFlag {
    fn label(self) -> &'static str {
        match self {
            RowFlag::Ok => "ok",
            RowFlag::Undersampled => "undersampled",
            RowFlag::OutOfRange => "out_of_range",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub delta: f64,
    pub radius: Option<f64>,
    pub exceedance: Option<f64>,
    pub quantile_error: Option<f64>,
    pub l_hat: Option<f64>,
    pub flag: RowFlag,
    /// Set when the quantile comes from the reservoir rather than all errors.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub approximate_quantile: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub config: ConfigEcho,
    pub rows: Vec<TailRow>,
    /// Wall time of the run; not written by the CLI so files stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(
                "format",
                format!("expected csv or json, got `{other}`"),
            )),
        }
    }
}

/// Fraction of `errors` strictly greater than `radius`.
pub fn exceedance_rate(errors: &[f64], radius: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::invalid("errors", "must be non-empty"));
    }
    Ok(errors.iter().filter(|&&e| e > radius).count() as f64 / errors.len() as f64)
}

/// Order statistic of rank `⌈(1−δ)T⌉` of `errors`.
pub fn empirical_quantile(errors: &[f64], delta: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::invalid("errors", "must be non-empty"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(
            "delta",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    let mut scratch = errors.to_vec();
    Ok(select_rank(
        &mut scratch,
        quantile_rank(errors.len(), 1.0 - delta),
    ))
}

/// `L̂(δ)` = empirical `(1−δ)`-quantile of errors over `σ√((1+ln(1/δ))/n)`.
pub fn normalized_quantile_curve(
    errors: &[f64],
    sigma: f64,
    n: usize,
    deltas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::invalid(
            "sigma",
            "normalized curve needs σ > 0; report raw quantiles instead",
        ));
    }
    deltas
        .iter()
        .map(|&d| {
            Ok((
                d,
                empirical_quantile(errors, d)? / (sigma * sub_gaussian_scale(d, n)),
            ))
        })
        .collect()
}

/// Errors of every trial, one column per δ for δ-dependent estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialErrors {
    /// One column for multiple-δ estimators; otherwise aligned with the
    /// in-range δ values of the grid.
    pub columns: Vec<ErrorColumn>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorColumn {
    /// `None` for a column shared by all δ.
    pub delta: Option<f64>,
    /// All errors when `trials ≤ error_cap`, else a uniform reservoir.
    pub kept: Vec<f64>,
    pub exact: bool,
    /// Exact exceedance counts against the radius of each grid δ.
    pub exceed_counts: Vec<(f64, usize)>,
}

impl TrialErrors {
    fn column_for(&self, delta: f64) -> Option<&ErrorColumn> {
        self.columns
            .iter()
            .find(|c| c.delta.is_none() || c.delta == Some(delta))
    }
}

/// Reservoir sampling (Algorithm R) with a seeded generator, fed in trial order.
struct Reservoir {
    cap: usize,
    seen: u64,
    items: Vec<f64>,
    rng: crate::rng::SimRng,
}

impl Reservoir {
    fn new(cap: usize, seed: u64) -> Self {
        Self {
            cap,
            seen: 0,
            items: Vec::with_capacity(cap.min(1 << 20)),
            rng: rng_from_seed(seed),
        }
    }

    fn push(&mut self, x: f64) {
        self.seen += 1;
        if self.items.len() < self.cap {
            self.items.push(x);
        } else {
            let j = self.rng.random_range(0..self.seen);
            if (j as usize) < self.cap {
                self.items[j as usize] = x;
            }
        }
    }
}

/// Runs all trials and returns the per-trial errors.
///
/// δ values outside the estimator's range get no column.
pub fn run_trials(config: &ExperimentConfig) -> Result<TrialErrors> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;

    let dist = config.dist;
    let est = config.estimator;
    let n = config.n;
    let mu = dist.mean();
    let column_deltas: Vec<Option<f64>> = if est.is_multiple_delta() {
        vec![None]
    } else {
        config
            .deltas
            .iter()
            .copied()
            .filter(|&d| est.delta_in_range(d, n))
            .map(Some)
            .collect()
    };
    let radii: Vec<(f64, f64)> = config
        .deltas
        .iter()
        .map(|&d| (d, est.radius(&dist, n, d)))
        .collect();

    let exact = config.trials <= config.error_cap;
    let mut reservoirs: Vec<Reservoir> = column_deltas
        .iter()
        .enumerate()
        .map(|(i, _)| Reservoir::new(config.error_cap, splitmix64(config.seed ^ (i as u64 + 1))))
        .collect();
    let mut counts: Vec<Vec<usize>> = vec![vec![0; radii.len()]; column_deltas.len()];

    let chunk = config.error_cap.max(1);
    let mut start = 0usize;
    while start < config.trials {
        let end = (start + chunk).min(config.trials);
        let rows: Vec<Vec<f64>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|t| -> Result<Vec<f64>> {
                    let mut rng = trial_rng(config.seed, t as u64);
                    let sample = dist.sample_with(&mut rng, n)?;
                    column_deltas
                        .iter()
                        .map(|&d| Ok((est.estimate(&sample, d)? - mu).abs()))
                        .collect()
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for row in rows {
            for (col, &err) in row.iter().enumerate() {
                reservoirs[col].push(err);
                for (slot, &(_, r)) in counts[col].iter_mut().zip(&radii) {
                    *slot += usize::from(err > r);
                }
            }
        }
        start = end;
    }

    let columns = column_deltas
        .into_iter()
        .zip(reservoirs)
        .zip(counts)
        .map(|((delta, res), cnt)| ErrorColumn {
            delta,
            kept: res.items,
            exact,
            exceed_counts: radii.iter().map(|&(d, _)| d).zip(cnt).collect(),
        })
        .collect();
    Ok(TrialErrors { columns })
}

/// Runs the experiment and assembles a [`TailReport`].
pub fn run_tail_experiment(config: &ExperimentConfig) -> Result<TailReport> {
    let started = Instant::now();
    let errors = run_trials(config)?;
    let dist = config.dist;
    let est = config.estimator;
    let (n, trials) = (config.n, config.trials);
    let sigma = dist.std_dev();

    let rows = config
        .deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| -> Result<TailRow> {
            let column = match errors.column_for(delta) {
                Some(c) if est.delta_in_range(delta, n) => c,
                _ => {
                    return Ok(TailRow {
                        delta,
                        radius: None,
                        exceedance: None,
                        quantile_error: None,
                        l_hat: None,
                        flag: RowFlag::OutOfRange,
                        approximate_quantile: false,
                    })
                }
            };
            let radius = est.radius(&dist, n, delta);
            let exceedance = column.exceed_counts[i].1 as f64 / trials as f64;
            let quantile = empirical_quantile(&column.kept, delta)?;
            let l_hat = if sigma > 0.0 {
                quantile / (sigma * sub_gaussian_scale(delta, n))
            } else {
                0.0
            };
            let flag = if delta < UNDERSAMPLED_FACTOR / trials as f64 {
                RowFlag::Undersampled
            } else {
                RowFlag::Ok
            };
            Ok(TailRow {
                delta,
                radius: Some(radius),
                exceedance: Some(exceedance),
                quantile_error: Some(quantile),
                l_hat: (sigma > 0.0 || quantile == 0.0).then_some(l_hat),
                flag,
                approximate_quantile: !column.exact,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TailReport {
        config: ConfigEcho::from(config),
        rows,
        wall_time_secs: Some(started.elapsed().as_secs_f64()),
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV rendering: `#`-prefixed metadata, then
/// `delta,radius,exceedance,quantile_error,l_hat`.
pub fn render_csv(report: &TailReport) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "# config={}", serde_json::to_string(&report.config)?);
    if let Some(t) = report.wall_time_secs {
        let _ = writeln!(out, "# wall_time_secs={t}");
    }
    for row in &report.rows {
        if row.flag != RowFlag::Ok || row.approximate_quantile {
            let _ = write!(out, "# flag delta={} {}", row.delta, row.flag.label());
            if row.approximate_quantile {
                out.push_str(" approximate_quantile");
            }
            out.push('\n');
        }
    }
    out.push_str("delta,radius,exceedance,quantile_error,l_hat\n");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.delta,
            fmt_opt(row.radius),
            fmt_opt(row.exceedance),
            fmt_opt(row.quantile_error),
            fmt_opt(row.l_hat)
        );
    }
    Ok(out)
}

pub fn render_json(report: &TailReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn write_report(report: &TailReport, format: ReportFormat, path: &Path) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => render_csv(report)?,
        ReportFormat::Json => render_json(report)?,
    };
    fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json_report(path: &Path) -> Result<TailReport> {
    let body = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&body)?)
}
