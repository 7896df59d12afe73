//! Lower-bound constructions turned into executable stress tests.
//!
//! - A coupling of the scaled Bernoulli laws `P₊ = {0: 1−p, c: p}` and
//!   `P₋ = {0: 1−p, −c: p}`: the two samples coincide with probability
//!   `(1−p)ⁿ`, and on that event no estimator can be close to both means.
//! - The Laplace product-density ratio floor `dLa₀/dLa_λ ≥ e^{−λn}`.
//! - Poisson point-mass facts used by the multiple-δ impossibility argument.

use rand::Rng;

use crate::distributions::Sample;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, trial_rng};

/// Paired samples `x ~ P₊^{⊗n}`, `y ~ P₋^{⊗n}` with `x_i = 0 ⇔ y_i = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSample {
    pub x: Sample,
    pub y: Sample,
}

impl CoupledSample {
    pub fn coincide(&self) -> bool {
        self.x == self.y
    }
}

fn check_c_p(c: f64, p: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn draw_coupled<R: Rng>(rng: &mut R, c: f64, p: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        if rng.random_bool(p) {
            x[i] = c;
            y[i] = -c;
        }
    }
    (x, y)
}

pub fn coupled_scaled_bernoulli(c: f64, p: f64, n: usize, seed: u64) -> Result<CoupledSample> {
    check_c_p(c, p)?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let (x, y) = draw_coupled(&mut rng_from_seed(seed), c, p, n);
    Ok(CoupledSample {
        x: Sample::new(x)?,
        y: Sample::new(y)?,
    })
}

/// `(1+α)`-th central moment of either scaled Bernoulli law,
/// `c^{1+α} p(1−p)(p^α + (1−p)^α)`.
pub fn scaled_bernoulli_moment(c: f64, p: f64, alpha: f64) -> Result<f64> {
    check_c_p(c, p)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("must lie in (0, 1], got {alpha}"),
        ));
    }
    Ok(c.powf(1.0 + alpha) * p * (1.0 - p) * (p.powf(alpha) + (1.0 - p).powf(alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfvarParams {
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    /// Target `(1+α)`-th central moment `M`.
    pub moment: f64,
    pub trials: usize,
    pub seed: u64,
    /// Replaces the default `p = (2/n) ln(2/δ)`.
    pub p_override: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfvarReport {
    pub p: f64,
    pub c: f64,
    /// `(M^{1/α} ln(2/δ)/n)^{α/(1+α)}`.
    pub radius: f64,
    pub failure_rate_plus: f64,
    pub failure_rate_minus: f64,
    /// Fraction of trials where the two samples coincide.
    pub match_rate: f64,
    pub trials: usize,
}

impl InfvarReport {
    pub fn max_failure_rate(&self) -> f64 {
        self.failure_rate_plus.max(self.failure_rate_minus)
    }

    /// `(1−p)ⁿ`, the exact coincidence probability.
    pub fn expected_match(&self, n: usize) -> f64 {
        (1.0 - self.p).powi(n as i32)
    }

    /// Whether `max failure ≥ match/2 − slack·SE`, with SE the binomial
    /// standard error of `match/2`.
    pub fn mechanism_holds(&self, slack: f64) -> bool {
        let half = self.match_rate / 2.0;
        let se = (half * (1.0 - half) / self.trials as f64).sqrt();
        self.max_failure_rate() >= half - slack * se
    }
}

/// Runs the coupling `trials` times against `estimator`.
///
/// A trial fails on `P₊` when `|Ê(x) − pc| > radius` and on `P₋` when
/// `|Ê(y) + pc| > radius`. Trials are seeded independently.
pub fn infvar_stress<F>(estimator: F, params: &InfvarParams) -> Result<InfvarReport>
where
    F: Fn(&Sample) -> Result<f64>,
{
    let InfvarParams {
        n,
        delta,
        alpha,
        moment,
        trials,
        seed,
        p_override,
    } = *params;
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(
            "delta",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    if !(moment > 0.0 && moment.is_finite()) {
        return Err(Error::invalid(
            "moment",
            format!("must be positive, got {moment}"),
        ));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("must lie in (0, 1], got {alpha}"),
        ));
    }
    let log_term = (2.0 / delta).ln();
    let p = p_override.unwrap_or(2.0 / n as f64 * log_term);
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(
            "p",
            format!("p = {p} must lie in (0, 1); δ is too small for n = {n}"),
        ));
    }
    let c = (moment / (p * (1.0 - p) * (p.powf(alpha) + (1.0 - p).powf(alpha))))
        .powf(1.0 / (1.0 + alpha));
    let radius = (moment.powf(1.0 / alpha) * log_term / n as f64).powf(alpha / (1.0 + alpha));
    let mean = p * c;

    let (mut fail_plus, mut fail_minus, mut matches) = (0usize, 0usize, 0usize);
    for t in 0..trials {
        let (x, y) = draw_coupled(&mut trial_rng(seed, t as u64), c, p, n);
        matches += usize::from(x == y);
        let ex = estimator(&Sample::new(x)?)?;
        let ey = estimator(&Sample::new(y)?)?;
        fail_plus += usize::from((ex - mean).abs() > radius);
        fail_minus += usize::from((ey + mean).abs() > radius);
    }
    let rate = |k: usize| k as f64 / trials as f64;
    Ok(InfvarReport {
        p,
        c,
        radius,
        failure_rate_plus: rate(fail_plus),
        failure_rate_minus: rate(fail_minus),
        match_rate: rate(matches),
        trials,
    })
}

/// Log of the product density of `La_λ^{⊗n}` at `points`.
pub fn laplace_log_density(lambda: f64, points: &[f64]) -> f64 {
    points
        .iter()
        .map(|x| -(x - lambda).abs() - std::f64::consts::LN_2)
        .sum()
}

/// Checks `dLa₀^{⊗n}/dx ≥ e^{−λn}·dLa_λ^{⊗n}/dx` at `points`.
///
/// The comparison allows for the rounding of the two log-density sums.
pub fn laplace_ratio_floor(lambda: f64, n: usize, points: &Sample) -> Result<bool> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda",
            format!("must be non-negative, got {lambda}"),
        ));
    }
    if points.len() != n {
        return Err(Error::invalid(
            "points",
            format!("expected {n} coordinates, got {}", points.len()),
        ));
    }
    let pts = points.values();
    let log_ratio = laplace_log_density(0.0, pts) - laplace_log_density(lambda, pts);
    let magnitude: f64 = pts.iter().map(|x| x.abs() + lambda + 1.0).sum();
    let slack = 8.0 * f64::EPSILON * magnitude;
    Ok(log_ratio + slack >= -lambda * n as f64)
}

/// `Po_m({m}) = e^{−m} m^m / m!`, evaluated in log space.
pub fn poisson_point_mass(m: u64) -> f64 {
    let mf = m as f64;
    (-mf + mf * mf.ln() - libm::lgamma(mf + 1.0)).exp()
}

/// `Po_m({m}) ≥ 1/(4√m)`.
pub fn poisson_point_mass_check(m: u64) -> Result<bool> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    Ok(poisson_point_mass(m) >= 0.25 / (m as f64).sqrt())
}

/// `Po_m({m})·√(2πm)`, which tends to 1 by Stirling's formula.
pub fn poisson_stirling_ratio(m: u64) -> f64 {
    poisson_point_mass(m) * (2.0 * std::f64::consts::PI * m as f64).sqrt()
}

/// `Po_c({(1+2C)c})`, the off-centre point mass bounded below by `e^{−h(C)c}`.
pub fn poisson_offset_mass(c: u64, big_c: f64) -> f64 {
    let k = ((1.0 + 2.0 * big_c) * c as f64).round();
    let cf = c as f64;
    (-cf + k * cf.ln() - libm::lgamma(k + 1.0)).exp()
}

/// Stirling asymptote of [`poisson_offset_mass`]:
/// `e^{−[(1+2C)ln(1+2C) − 2C]c} / √(2π(1+2C)c)`.
pub fn poisson_offset_asymptote(c: u64, big_c: f64) -> f64 {
    let s = 1.0 + 2.0 * big_c;
    let cf = c as f64;
    (-(s * s.ln() - 2.0 * big_c) * cf).exp() / (2.0 * std::f64::consts::PI * s * cf).sqrt()
}
