//! Truncated empirical mean for classes with kurtosis bounded by κ.
//!
//! 1. `μ̂` = median-of-means on `b_max` blocks, `ν̂²` = median of the
//!    per-block unbiased variances on the same blocks.
//! 2. `R̂ = ν̂·√(n/(2 b_max))`.
//! 3. The estimate is the mean of `Ψ_{μ̂,R̂}(X_i)`, where `Ψ_{μ,R}` clips to
//!    `[μ − R, μ + R]`.
//!
//! Under the smallness conditions reported by [`SmallnessWarning`], the
//! estimate is `√2(1+ξ)`-sub-Gaussian for `δ ≥ (4e/(e−2))·e^{−b_max}`.

use serde::{Deserialize, Serialize};

use crate::distributions::Sample;
use crate::error::{Error, Result};
use crate::estimators::{median_of_means_raw, mom_variance, BlockPartition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KurtosisConfig {
    pub b_max: usize,
    /// Class bound κ on the kurtosis; only enters ξ and the warnings.
    pub kappa_bound: f64,
}

impl KurtosisConfig {
    pub fn new(b_max: usize, kappa_bound: f64) -> Result<Self> {
        if b_max == 0 {
            return Err(Error::invalid("b_max", "must be at least 1"));
        }
        if !(kappa_bound >= 1.0 && kappa_bound.is_finite()) {
            return Err(Error::invalid(
                "kappa_bound",
                format!("must be a finite value ≥ 1, got {kappa_bound}"),
            ));
        }
        Ok(Self { b_max, kappa_bound })
    }

    /// Smallest confidence level covered, `(4e/(e−2))·e^{−b_max}`.
    pub fn delta_min(&self) -> f64 {
        let e = std::f64::consts::E;
        4.0 * e / (e - 2.0) * (-(self.b_max as f64)).exp()
    }
}

/// `ξ = ξ₁ + ξ₂` with `ξ₁ = 36√(κ b/n)` and
/// `ξ₂ = 2√2 κ b^{3/2}/n + 1120 √κ b/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiTerms {
    pub xi: f64,
    pub xi1: f64,
    pub xi2: f64,
}

impl XiTerms {
    /// Effective sub-Gaussian constant `√2(1 + ξ)`.
    pub fn constant(&self) -> f64 {
        std::f64::consts::SQRT_2 * (1.0 + self.xi)
    }
}

pub fn xi_terms(kappa: f64, n: usize, b_max: usize) -> XiTerms {
    let (n, b) = (n as f64, b_max as f64);
    let xi1 = 36.0 * (kappa * b / n).sqrt();
    let xi2 =
        2.0 * std::f64::consts::SQRT_2 * kappa * b.powf(1.5) / n + 1120.0 * kappa.sqrt() * b / n;
    XiTerms {
        xi: xi1 + xi2,
        xi1,
        xi2,
    }
}

/// `Ψ_{μ,R}(x) = μ + min(R/|x−μ|, 1)(x − μ)`, i.e. `x` clipped to `[μ−R, μ+R]`.
pub fn psi(mu: f64, radius: f64, x: f64) -> f64 {
    x.clamp(mu - radius, mu + radius)
}

/// Mean of `Ψ_{μ,R}` over the sample.
pub fn truncated_mean(sample: &Sample, mu: f64, radius: f64) -> Result<f64> {
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::invalid(
            "radius",
            format!("must be non-negative, got {radius}"),
        ));
    }
    let sum: f64 = sample.values().iter().map(|&x| psi(mu, radius, x)).sum();
    Ok(sum / sample.len() as f64)
}

/// A smallness condition of the guarantee that the data/configuration violates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum SmallnessWarning {
    /// `96e(κ+3)b_max/n ≤ 1` fails; `value` is the left-hand side.
    VarianceBlocks { value: f64 },
    /// `2(ε_μ + ε_R) ≤ √(n/(2 b_max))` fails.
    TruncationWindow { lhs: f64, rhs: f64 },
    /// `ε_μ = 2√2e√(b_max/n) ≤ √κ` fails.
    MeanAccuracy { eps_mu: f64, sqrt_kappa: f64 },
}

impl std::fmt::Display for SmallnessWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            SmallnessWarning::VarianceBlocks { value } => {
                write!(
                    f,
                    "96e(κ+3)b_max/n = {value} exceeds 1 (margin {})",
                    value - 1.0
                )
            }
            SmallnessWarning::TruncationWindow { lhs, rhs } => write!(
                f,
                "2(ε_μ+ε_R) = {lhs} exceeds √(n/(2b_max)) = {rhs} (margin {})",
                lhs - rhs
            ),
            SmallnessWarning::MeanAccuracy { eps_mu, sqrt_kappa } => write!(
                f,
                "ε_μ = {eps_mu} exceeds √κ = {sqrt_kappa} (margin {})",
                eps_mu - sqrt_kappa
            ),
        }
    }
}

/// Conditions under which the √2(1+ξ) guarantee is proved, checked for `n`.
pub fn smallness_warnings(config: &KurtosisConfig, n: usize) -> Vec<SmallnessWarning> {
    let e = std::f64::consts::E;
    let (nf, b, kappa) = (n as f64, config.b_max as f64, config.kappa_bound);
    let mut warnings = Vec::new();
    let value = 96.0 * e * (kappa + 3.0) * b / nf;
    if value > 1.0 {
        warnings.push(SmallnessWarning::VarianceBlocks { value });
    }
    let eps_mu = 2.0 * std::f64::consts::SQRT_2 * e * (b / nf).sqrt();
    let eps_r = 2.0 * e * (3.0 * (kappa + 3.0)).sqrt();
    let (lhs, rhs) = (2.0 * (eps_mu + eps_r), (nf / (2.0 * b)).sqrt());
    if lhs > rhs {
        warnings.push(SmallnessWarning::TruncationWindow { lhs, rhs });
    }
    if eps_mu > kappa.sqrt() {
        warnings.push(SmallnessWarning::MeanAccuracy {
            eps_mu,
            sqrt_kappa: kappa.sqrt(),
        });
    }
    warnings
}

/// Intermediate quantities of one run of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KurtosisDiagnostics {
    pub estimate: f64,
    pub mu_hat: f64,
    pub nu2_hat: f64,
    pub radius: f64,
    pub xi: XiTerms,
    pub warnings: Vec<SmallnessWarning>,
}

pub fn kurtosis_estimate(sample: &Sample, config: &KurtosisConfig) -> Result<f64> {
    kurtosis_diagnostics(sample, config).map(|d| d.estimate)
}

pub fn kurtosis_diagnostics(
    sample: &Sample,
    config: &KurtosisConfig,
) -> Result<KurtosisDiagnostics> {
    let n = sample.len();
    if n < 4 {
        return Err(Error::SampleTooSmall {
            n,
            reason: "the truncated mean needs at least 4 points".into(),
        });
    }
    let b = config.b_max;
    let partition = BlockPartition::new(n, b)?;
    if partition.min_block_size() < 2 {
        return Err(Error::SampleTooSmall {
            n,
            reason: format!("b_max = {b} leaves fewer than 2 points per block"),
        });
    }
    let mu_hat = median_of_means_raw(sample, b)?;
    let nu2_hat = mom_variance(sample, b)?;
    let radius = nu2_hat.max(0.0).sqrt() * (n as f64 / (2.0 * b as f64)).sqrt();
    let estimate = truncated_mean(sample, mu_hat, radius)?;
    Ok(KurtosisDiagnostics {
        estimate,
        mu_hat,
        nu2_hat,
        radius,
        xi: xi_terms(config.kappa_bound, n, b),
        warnings: smallness_warnings(config, n),
    })
}
