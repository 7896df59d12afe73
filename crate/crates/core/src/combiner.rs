//! Combining a dyadic family of confidence intervals into one estimator.
//!
//! Interval `k` of a family targets confidence `2^{-k}`. The combined
//! estimate is the midpoint of `⋂_{j=k̂}^{m} Î_j`, where `k̂` is the smallest
//! index whose suffix intersection is nonempty. The estimate never looks at
//! a δ, so one value serves every level in `[2^{-m}, 1)`.

use serde::{Deserialize, Serialize};

use crate::distributions::Sample;
use crate::error::{Error, Result};
use crate::estimators::{
    median_of_means, mom_delta_min, mom_variance, quantile_delta_min, quantile_interval,
    ConfidenceInterval, MOM_CONSTANT,
};
use crate::numeric::{ceil_snap, floor_snap};

/// Intervals `Î_1, …, Î_m`, interval `k` targeting confidence `2^{-k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalFamily {
    intervals: Vec<ConfidenceInterval>,
}

impl IntervalFamily {
    pub fn new(intervals: Vec<ConfidenceInterval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::invalid("family", "needs at least one interval"));
        }
        Ok(Self { intervals })
    }

    pub fn m(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[ConfidenceInterval] {
        &self.intervals
    }

    /// Interval for level `k` (1-based).
    pub fn get(&self, k: usize) -> Option<&ConfidenceInterval> {
        k.checked_sub(1).and_then(|i| self.intervals.get(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombineResult {
    /// Smallest level with a nonempty suffix intersection (1-based).
    pub k_hat: usize,
    pub estimate: f64,
    pub final_interval: ConfidenceInterval,
}

/// Suffix-intersection combination; never fails on a nonempty family.
pub fn combine(family: &IntervalFamily) -> CombineResult {
    let intervals = family.intervals();
    let m = intervals.len();
    let mut acc = intervals[m - 1];
    let mut k_hat = m;
    for k in (1..m).rev() {
        match acc.intersect(&intervals[k - 1]) {
            Some(next) => {
                acc = next;
                k_hat = k;
            }
            None => break,
        }
    }
    CombineResult {
        k_hat,
        estimate: acc.midpoint(),
        final_interval: acc,
    }
}

/// Number of levels `m = ⌊log₂(1/δ_min)⌋ − 1`; errors unless `m ≥ 1`.
pub fn dyadic_levels(delta_min: f64) -> Result<usize> {
    if !(delta_min > 0.0 && delta_min < 1.0) {
        return Err(Error::invalid(
            "delta_min",
            format!("must lie in (0, 1), got {delta_min}"),
        ));
    }
    let m = floor_snap((1.0 / delta_min).log2()) - 1.0;
    if m < 1.0 {
        return Err(Error::invalid(
            "delta_min",
            format!("{delta_min} yields no dyadic level; need δ_min ≤ 1/4"),
        ));
    }
    Ok(m as usize)
}

/// Level serving confidence δ: the smallest `k ≥ 1` with `2^{1−k} ≤ δ`.
pub fn level_for_delta(delta: f64) -> usize {
    (1.0 + ceil_snap((1.0 / delta).log2())).max(1.0) as usize
}

fn level_delta(k: usize) -> f64 {
    0.5f64.powi(k as i32)
}

/// Dyadic radius factor `2√2·e·√((1 + k ln 2)/n)`.
fn dyadic_radius_factor(k: usize, n: usize) -> f64 {
    MOM_CONSTANT * ((1.0 + k as f64 * std::f64::consts::LN_2) / n as f64).sqrt()
}

fn check_mom_range(sample: &Sample, delta_min: f64) -> Result<()> {
    let min = mom_delta_min(sample.len());
    if delta_min < min {
        return Err(Error::DeltaOutOfRange {
            delta: delta_min,
            min,
            max: 1.0,
        });
    }
    Ok(())
}

/// Intervals centred at median-of-means with a known variance upper bound.
pub fn fixed_sigma_family(
    sample: &Sample,
    sigma2_hi: f64,
    delta_min: f64,
) -> Result<IntervalFamily> {
    if !(sigma2_hi > 0.0 && sigma2_hi.is_finite()) {
        return Err(Error::invalid(
            "sigma2_hi",
            format!("must be positive, got {sigma2_hi}"),
        ));
    }
    let m = dyadic_levels(delta_min)?;
    check_mom_range(sample, delta_min)?;
    let sigma_hi = sigma2_hi.sqrt();
    let intervals = (1..=m)
        .map(|k| {
            let centre = median_of_means(sample, level_delta(k))?;
            ConfidenceInterval::centred(centre, sigma_hi * dyadic_radius_factor(k, sample.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    IntervalFamily::new(intervals)
}

/// Block count for the variance estimate at level `k`, `max(2, ⌈k ln 2⌉)`.
pub fn adaptive_variance_blocks(k: usize) -> usize {
    (ceil_snap(k as f64 * std::f64::consts::LN_2) as usize).max(2)
}

/// Like [`fixed_sigma_family`], with `σ₂` replaced by `2ν̂_{b_k}` where
/// `ν̂²_{b}` is the median-of-means variance estimate on `b` blocks.
pub fn adaptive_family(sample: &Sample, delta_min: f64) -> Result<IntervalFamily> {
    let m = dyadic_levels(delta_min)?;
    check_mom_range(sample, delta_min)?;
    let n = sample.len();
    if n / adaptive_variance_blocks(m) < 2 {
        return Err(Error::SampleTooSmall {
            n,
            reason: format!(
                "{} variance blocks leave fewer than 2 points per block",
                adaptive_variance_blocks(m)
            ),
        });
    }
    let intervals = (1..=m)
        .map(|k| {
            let centre = median_of_means(sample, level_delta(k))?;
            let nu = mom_variance(sample, adaptive_variance_blocks(k))?.sqrt();
            ConfidenceInterval::centred(centre, 2.0 * nu * dyadic_radius_factor(k, n))
        })
        .collect::<Result<Vec<_>>>()?;
    IntervalFamily::new(intervals)
}

/// Default lower confidence limit for the k-regular estimator,
/// `4e^{3 − n/(124k)}`.
pub fn k_regular_delta_min(n: usize, k: usize) -> f64 {
    4.0 * quantile_delta_min(n, k)
}

/// Quantile intervals at `δ = 2^{-k}` for a k-regular class.
pub fn quantile_family(
    sample: &Sample,
    k_reg: usize,
    delta_min: Option<f64>,
) -> Result<IntervalFamily> {
    if k_reg == 0 {
        return Err(Error::invalid(
            "k_reg",
            "regularity index must be at least 1",
        ));
    }
    let delta_min = delta_min.unwrap_or_else(|| k_regular_delta_min(sample.len(), k_reg));
    let m = dyadic_levels(delta_min)?;
    let intervals = (1..=m)
        .map(|k| quantile_interval(sample, level_delta(k), k_reg))
        .collect::<Result<Vec<_>>>()?;
    IntervalFamily::new(intervals)
}

/// Which interval family feeds the combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum FamilyBuilder {
    FixedSigma { sigma2_hi: f64, delta_min: f64 },
    Adaptive { delta_min: f64 },
    QuantileKreg { k: usize, delta_min: Option<f64> },
}

impl FamilyBuilder {
    pub fn build(&self, sample: &Sample) -> Result<IntervalFamily> {
        match *self {
            FamilyBuilder::FixedSigma {
                sigma2_hi,
                delta_min,
            } => fixed_sigma_family(sample, sigma2_hi, delta_min),
            FamilyBuilder::Adaptive { delta_min } => adaptive_family(sample, delta_min),
            FamilyBuilder::QuantileKreg { k, delta_min } => quantile_family(sample, k, delta_min),
        }
    }

    /// Lower confidence limit the builder is configured for on `n` points.
    pub fn delta_min(&self, n: usize) -> f64 {
        match *self {
            FamilyBuilder::FixedSigma { delta_min, .. } | FamilyBuilder::Adaptive { delta_min } => {
                delta_min
            }
            FamilyBuilder::QuantileKreg { k, delta_min } => {
                delta_min.unwrap_or_else(|| k_regular_delta_min(n, k))
            }
        }
    }
}

/// The multiple-δ estimate: midpoint of the combined family.
pub fn multiple_delta_estimate(sample: &Sample, builder: &FamilyBuilder) -> Result<f64> {
    Ok(combine(&builder.build(sample)?).estimate)
}
