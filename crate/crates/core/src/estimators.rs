//! Block partitions, order-statistic quantiles, median-of-means and the
//! quantile-interval estimator for k-regular classes.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::distributions::Sample;
use crate::error::{Error, Result};
use crate::numeric::{ceil_snap, mean};

/// Constant of the δ-dependent median-of-means bound, `2√2·e`.
pub const MOM_CONSTANT: f64 = 2.0 * std::f64::consts::SQRT_2 * std::f64::consts::E;

/// Relative entropy between Bernoulli(1/4) and Bernoulli(1/3).
pub fn quantile_rate() -> f64 {
    0.25 * (0.75f64).ln() + 0.75 * (9.0f64 / 8.0).ln()
}

/// Half-width multiplier `L₀ = 2e^{2d+1/2}` of a single quantile interval.
pub fn quantile_l0() -> f64 {
    2.0 * (2.0 * quantile_rate() + 0.5).exp()
}

/// Constant `L★ = 4√(2(1+2ln2)(1+62 ln3))·e^{5/2}` of the multiple-δ
/// estimator for k-regular classes.
pub fn k_regular_constant() -> f64 {
    let ln2 = std::f64::consts::LN_2;
    4.0 * (2.0 * (1.0 + 2.0 * ln2) * (1.0 + 62.0 * 3f64.ln())).sqrt() * 2.5f64.exp()
}

/// A partition of `0..n` into `b` contiguous blocks; the first `n mod b`
/// blocks hold `⌈n/b⌉` indices and the rest `⌊n/b⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPartition {
    n: usize,
    b: usize,
}

impl BlockPartition {
    pub fn new(n: usize, b: usize) -> Result<Self> {
        if b == 0 || b > n {
            return Err(Error::invalid(
                "b",
                format!("block count must lie in [1, n = {n}], got {b}"),
            ));
        }
        Ok(Self { n, b })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.b
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Size of the smallest block, `⌊n/b⌋`.
    pub fn min_block_size(&self) -> usize {
        self.n / self.b
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        let (q, r) = (self.n / self.b, self.n % self.b);
        (0..self.b).map(move |i| {
            let start = i * q + i.min(r);
            let size = q + usize::from(i < r);
            start..start + size
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks().map(|r| r.len()).collect()
    }
}

pub fn partition_blocks(n: usize, b: usize) -> Result<BlockPartition> {
    BlockPartition::new(n, b)
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    lo: f64,
    hi: f64,
}

impl ConfidenceInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::invalid(
                "interval",
                format!("lo = {lo} exceeds hi = {hi}"),
            ));
        }
        Ok(Self { lo, hi })
    }

    /// `[centre − radius, centre + radius]`.
    pub fn centred(centre: f64, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::invalid(
                "radius",
                format!("must be non-negative, got {radius}"),
            ));
        }
        Self::new(centre - radius, centre + radius)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        self.lo + (self.hi - self.lo) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Intersection with `other`; touching intervals meet in a point.
    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self { lo, hi })
    }
}

/// Order statistic of rank `⌈α·len⌉` (1-based).
///
/// The returned value `y` satisfies `#{v ≤ y} ≥ α·len` and
/// `#{v ≥ y} ≥ (1 − α)·len`.
pub fn quantile_select(values: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("must lie in (0, 1), got {alpha}"),
        ));
    }
    if values.is_empty() {
        return Err(Error::invalid("values", "must be non-empty"));
    }
    let mut scratch = values.to_vec();
    Ok(select_rank(
        &mut scratch,
        quantile_rank(values.len(), alpha),
    ))
}

/// 1-based rank `⌈α·len⌉`, clamped to `[1, len]`.
pub(crate) fn quantile_rank(len: usize, alpha: f64) -> usize {
    (ceil_snap(alpha * len as f64) as usize).clamp(1, len)
}

/// Selects the element of 1-based rank `rank`, permuting `values`.
pub(crate) fn select_rank(values: &mut [f64], rank: usize) -> f64 {
    *values.select_nth_unstable_by(rank - 1, f64::total_cmp).1
}

fn block_means(values: &[f64], partition: &BlockPartition) -> Vec<f64> {
    partition.blocks().map(|r| mean(&values[r])).collect()
}

/// Number of blocks `max(1, ⌈ln(1/δ)⌉)` used by median-of-means at level δ.
pub fn mom_block_count(delta: f64) -> usize {
    (ceil_snap((1.0 / delta).ln()) as usize).max(1)
}

/// Smallest admissible δ for median-of-means on `n` points, `e^{1−n/2}`.
pub fn mom_delta_min(n: usize) -> f64 {
    (1.0 - n as f64 / 2.0).exp()
}

/// δ-dependent median-of-means with `b = max(1, ⌈ln(1/δ)⌉)` blocks.
pub fn median_of_means(sample: &Sample, delta: f64) -> Result<f64> {
    let n = sample.len();
    if n < 4 {
        return Err(Error::SampleTooSmall {
            n,
            reason: "median-of-means needs at least 4 points".into(),
        });
    }
    let min = mom_delta_min(n);
    if !(delta >= min && delta < 1.0) {
        return Err(Error::DeltaOutOfRange {
            delta,
            min,
            max: 1.0,
        });
    }
    median_of_means_raw(sample, mom_block_count(delta))
}

/// Median (rank `⌈b/2⌉`) of the `b` block means.
pub fn median_of_means_raw(sample: &Sample, b: usize) -> Result<f64> {
    let partition = BlockPartition::new(sample.len(), b)?;
    let mut means = block_means(sample.values(), &partition);
    let rank = quantile_rank(b, 0.5);
    Ok(select_rank(&mut means, rank))
}

/// Unbiased variance of a block, i.e. the mean of `(x_j − x_k)²/2` over
/// unordered pairs, computed in one pass.
pub fn pairwise_block_variance(values: &[f64]) -> Result<f64> {
    let m = values.len();
    if m < 2 {
        return Err(Error::invalid(
            "values",
            format!("need at least 2 points, got {m}"),
        ));
    }
    let centre = mean(values);
    let ss: f64 = values.iter().map(|x| (x - centre) * (x - centre)).sum();
    Ok((ss / (m - 1) as f64).max(0.0))
}

/// Median (rank `⌈b/2⌉`) of per-block unbiased variances.
pub fn mom_variance(sample: &Sample, b: usize) -> Result<f64> {
    let partition = BlockPartition::new(sample.len(), b)?;
    if partition.min_block_size() < 2 {
        return Err(Error::SampleTooSmall {
            n: sample.len(),
            reason: format!("{b} blocks leave fewer than 2 points per block"),
        });
    }
    let mut variances = partition
        .blocks()
        .map(|r| pairwise_block_variance(&sample.values()[r]))
        .collect::<Result<Vec<_>>>()?;
    Ok(select_rank(&mut variances, quantile_rank(b, 0.5)))
}

/// `[q_{1/4}, q_{3/4}]` of the `b` block means.
pub fn quantile_interval_raw(sample: &Sample, b: usize) -> Result<ConfidenceInterval> {
    let partition = BlockPartition::new(sample.len(), b)?;
    let mut means = block_means(sample.values(), &partition);
    let lo = select_rank(&mut means, quantile_rank(b, 0.25));
    let hi = select_rank(&mut means, quantile_rank(b, 0.75));
    ConfidenceInterval::new(lo, hi)
}

/// Number of blocks `⌈62 ln(3/δ)⌉` for the k-regular quantile interval.
pub fn quantile_block_count(delta: f64) -> usize {
    ceil_snap(62.0 * (3.0 / delta).ln()) as usize
}

/// Smallest admissible δ for the quantile interval, `e^{3 − n/(124k)}`.
pub fn quantile_delta_min(n: usize, k: usize) -> f64 {
    (3.0 - n as f64 / (124.0 * k as f64)).exp()
}

/// Quantile interval at level δ for a k-regular class.
pub fn quantile_interval(sample: &Sample, delta: f64, k: usize) -> Result<ConfidenceInterval> {
    if k == 0 {
        return Err(Error::invalid("k", "regularity index must be at least 1"));
    }
    let n = sample.len();
    let required = (3.0 + 4f64.ln()) * 124.0 * k as f64;
    if (n as f64) < required {
        return Err(Error::SampleTooSmall {
            n,
            reason: format!("k = {k} needs n ≥ {}", required.ceil()),
        });
    }
    let min = quantile_delta_min(n, k);
    if !(delta >= min && delta < 1.0) {
        return Err(Error::DeltaOutOfRange {
            delta,
            min,
            max: 1.0,
        });
    }
    let b = quantile_block_count(delta);
    if 2 * b * k > n {
        return Err(Error::SampleTooSmall {
            n,
            reason: format!("b·k = {} exceeds n/2", b * k),
        });
    }
    quantile_interval_raw(sample, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    /// Counting predicate: `#{v ≤ y} ≥ αb` and `#{v ≥ y} ≥ (1−α)b`.
    fn satisfies_quantile_predicate(values: &[f64], alpha: f64, y: f64) -> bool {
        let b = values.len() as f64;
        let below = values.iter().filter(|&&v| v <= y).count() as f64;
        let above = values.iter().filter(|&&v| v >= y).count() as f64;
        below >= alpha * b - 1e-9 && above >= (1.0 - alpha) * b - 1e-9
    }

    #[test]
    fn partition_examples() {
        let p = partition_blocks(10, 3).unwrap();
        assert_eq!(p.sizes(), vec![4, 3, 3]);
        assert_eq!(p.blocks().collect::<Vec<_>>(), vec![0..4, 4..7, 7..10]);
        assert_eq!(partition_blocks(6, 6).unwrap().sizes(), vec![1; 6]);
        assert_eq!(partition_blocks(7, 2).unwrap().sizes(), vec![4, 3]);
        assert!(partition_blocks(3, 4).is_err());
        assert!(partition_blocks(3, 0).is_err());
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile_select(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
        assert_eq!(quantile_select(&[5.0], 0.1).unwrap(), 5.0);
        assert_eq!(quantile_select(&[5.0], 0.9).unwrap(), 5.0);
        assert_eq!(quantile_select(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap(), 1.0);
        assert_eq!(quantile_select(&[1.0, 2.0, 3.0, 4.0], 0.75).unwrap(), 3.0);
        assert!(quantile_select(&[1.0], 0.0).is_err());
        assert!(quantile_select(&[1.0], 1.0).is_err());
        assert!(quantile_select(&[], 0.5).is_err());
    }

    #[test]
    fn mom_examples() {
        let x = sample(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let delta = (-2.0f64).exp();
        assert_eq!(mom_block_count(delta), 2);
        assert_eq!(median_of_means(&x, delta).unwrap(), 2.0);
        assert_eq!(median_of_means(&x, 0.9).unwrap(), x.mean());
        assert_eq!(median_of_means_raw(&x, 3).unwrap(), 3.5);
        assert_eq!(median_of_means_raw(&x, 1).unwrap(), x.mean());
        let c = sample(&[4.25; 9]);
        assert_eq!(median_of_means(&c, 0.1).unwrap(), 4.25);
    }

    #[test]
    fn mom_rejects_out_of_range_delta() {
        let x = sample(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(median_of_means(&x, 1.0).is_err());
        assert!(median_of_means(&x, mom_delta_min(6) * 0.99).is_err());
        assert!(median_of_means(&x, mom_delta_min(6)).is_ok());
        assert!(median_of_means(&sample(&[1.0, 2.0, 3.0]), 0.5).is_err());
        assert!(median_of_means_raw(&x, 7).is_err());
    }

    #[test]
    fn pairwise_variance_examples() {
        assert_eq!(pairwise_block_variance(&[0.0, 2.0]).unwrap(), 2.0);
        assert_eq!(pairwise_block_variance(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(pairwise_block_variance(&[0.0, 1.0, 2.0]).unwrap(), 1.0);
        assert!(pairwise_block_variance(&[1.0]).is_err());
    }

    #[test]
    fn mom_variance_examples() {
        let x = sample(&[0.0, 2.0, 1.0, 1.0, 0.0, 10.0]);
        assert_eq!(mom_variance(&x, 3).unwrap(), 2.0);
        assert_eq!(mom_variance(&sample(&[1.5; 8]), 2).unwrap(), 0.0);
        assert!(mom_variance(&x, 4).is_err());
    }

    #[test]
    fn quantile_interval_examples() {
        let x = sample(&[0.0, 2.0, 1.0, 3.0, 2.0, 4.0, 3.0, 5.0]);
        let ci = quantile_interval_raw(&x, 4).unwrap();
        assert_eq!((ci.lo(), ci.hi()), (1.0, 3.0));
        let c = quantile_interval_raw(&sample(&[2.0; 10]), 5).unwrap();
        assert_eq!((c.lo(), c.hi(), c.length()), (2.0, 2.0, 0.0));
    }

    #[test]
    fn quantile_block_counts() {
        assert_eq!(quantile_block_count(0.05), 254);
        assert_eq!(quantile_block_count(0.99), 69);
    }

    #[test]
    fn quantile_interval_preconditions() {
        let n = 1000;
        let c = sample(&vec![-1.0; n]);
        let ci = quantile_interval(&c, 0.5, 1).unwrap();
        assert!(ci.contains(-1.0));
        assert_eq!(ci.length(), 0.0);
        assert!(quantile_interval(&c, 1.0, 1).is_err());
        assert!(quantile_interval(&c, 0.5, 2).is_err());
        assert!(quantile_interval(&c, 0.5, 0).is_err());
        // n = 1000 admits δ ≥ e^{3−1000/124} ≈ 6.3e-3.
        assert!(quantile_interval(&c, 0.01, 1).is_ok());
        assert!(quantile_interval(&c, 0.005, 1).is_err());
        assert!(quantile_interval(&sample(&vec![0.0; 500]), 0.5, 1).is_err());
    }

    #[test]
    fn quantile_constants() {
        let d = quantile_rate();
        assert!(d >= 1.0 / 62.0);
        assert!(quantile_l0() <= 2.0 * 2.5f64.exp());
        assert!((k_regular_constant() - 885.0).abs() < 1.0);
    }

    #[test]
    fn interval_intersection_rules() {
        let a = ConfidenceInterval::new(0.0, 1.0).unwrap();
        let b = ConfidenceInterval::new(1.0, 2.0).unwrap();
        let c = ConfidenceInterval::new(1.5, 2.0).unwrap();
        assert_eq!(
            a.intersect(&b).unwrap(),
            ConfidenceInterval::new(1.0, 1.0).unwrap()
        );
        assert!(a.intersect(&c).is_none());
        assert!(ConfidenceInterval::new(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn quantile_is_element_and_satisfies_predicate(
            values in prop::collection::vec(-5i32..5, 1..40),
            alpha in 0.001f64..0.999,
        ) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let y = quantile_select(&values, alpha).unwrap();
            prop_assert!(values.contains(&y));
            prop_assert!(satisfies_quantile_predicate(&values, alpha, y));
        }

        #[test]
        fn fast_variance_matches_pair_sum(values in prop::collection::vec(-1e3f64..1e3, 2..9)) {
            let m = values.len();
            let mut pairs = 0.0;
            for j in 0..m {
                for k in j + 1..m {
                    pairs += (values[j] - values[k]).powi(2);
                }
            }
            let brute = pairs / (m * (m - 1)) as f64;
            let fast = pairwise_block_variance(&values).unwrap();
            prop_assert!((fast - brute).abs() <= 1e-12 * brute.max(1e-300) + 1e-300);
        }

        #[test]
        fn mom_ignores_within_block_permutations(
            values in prop::collection::vec(-1e3f64..1e3, 8..40),
            b in 1usize..5,
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let x = Sample::new(values.clone()).unwrap();
            let p = BlockPartition::new(values.len(), b).unwrap();
            let mut shuffled = values.clone();
            let mut rng = crate::rng::rng_from_seed(seed);
            for r in p.blocks() {
                shuffled[r].shuffle(&mut rng);
            }
            let y = Sample::new(shuffled).unwrap();
            let (a, c) = (median_of_means_raw(&x, b).unwrap(), median_of_means_raw(&y, b).unwrap());
            prop_assert!((a - c).abs() <= 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn quantile_interval_reflects(values in prop::collection::vec(-1e3f64..1e3, 8..40), b in 1usize..8, mu in -10.0f64..10.0) {
            let x = Sample::new(values.clone()).unwrap();
            let reflected = Sample::new(values.iter().map(|v| 2.0 * mu - v).collect()).unwrap();
            let ci = quantile_interval_raw(&x, b).unwrap();
            let cr = quantile_interval_raw(&reflected, b).unwrap();
            // Reflection sends rank ⌈b/4⌉ to rank b+1−⌈b/4⌉, which equals ⌈3b/4⌉
            // unless b is a multiple of 4.
            if b % 4 != 0 {
                prop_assert!((cr.lo() - (2.0 * mu - ci.hi())).abs() <= 1e-9 * (1.0 + cr.lo().abs()));
                prop_assert!((cr.hi() - (2.0 * mu - ci.lo())).abs() <= 1e-9 * (1.0 + cr.hi().abs()));
            }
            prop_assert!(cr.lo() <= cr.hi());
        }
    }
}
