//! Distribution families with closed-form moments, and the regularity probe.
//!
//! A [`DistributionSpec`] is parsed from a `family:p1,p2,...` string:
//!
//! | spec                | law                                               |
//! |---------------------|---------------------------------------------------|
//! | `gaussian:MU,SIGMA` | normal with mean `MU`, standard deviation `SIGMA` |
//! | `laplace:LAMBDA`    | density `e^{-|x-λ|}/2`                            |
//! | `poisson:LAMBDA`    | Poisson with rate `λ`                             |
//! | `pareto:ALPHA,SCALE`| Pareto(tail `α > 2`, scale `s`) shifted to mean 0 |
//! | `student:NU`        | Student-t with `ν > 4` degrees of freedom         |
//! | `lognormal:MU,SIGMA`| `exp(N(MU, SIGMA²))`                              |
//! | `bern2+:C,P`        | `c` w.p. `p`, `0` otherwise                       |
//! | `bern2-:C,P`        | `-c` w.p. `p`, `0` otherwise                      |
//! | `constant:C`        | point mass at `C`                                 |

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, Open01, Pareto, Poisson, StudentT};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Gaussian {
        mean: f64,
        std_dev: f64,
    },
    Laplace {
        location: f64,
    },
    Poisson {
        rate: f64,
    },
    /// Pareto with tail index `alpha` and scale `scale`, recentred to mean zero.
    Pareto {
        alpha: f64,
        scale: f64,
    },
    StudentT {
        dof: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    ScaledBernoulliPlus {
        c: f64,
        p: f64,
    },
    ScaledBernoulliMinus {
        c: f64,
        p: f64,
    },
    Constant {
        value: f64,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian { .. } => "gaussian",
            Family::Laplace { .. } => "laplace",
            Family::Poisson { .. } => "poisson",
            Family::Pareto { .. } => "pareto",
            Family::StudentT { .. } => "student",
            Family::LogNormal { .. } => "lognormal",
            Family::ScaledBernoulliPlus { .. } => "bern2+",
            Family::ScaledBernoulliMinus { .. } => "bern2-",
            Family::Constant { .. } => "constant",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Family::Gaussian { mean, std_dev } => vec![mean, std_dev],
            Family::Laplace { location } => vec![location],
            Family::Poisson { rate } => vec![rate],
            Family::Pareto { alpha, scale } => vec![alpha, scale],
            Family::StudentT { dof } => vec![dof],
            Family::LogNormal { mu, sigma } => vec![mu, sigma],
            Family::ScaledBernoulliPlus { c, p } | Family::ScaledBernoulliMinus { c, p } => {
                vec![c, p]
            }
            Family::Constant { value } => vec![value],
        }
    }
}

/// Kurtosis `E(X−μ)⁴/σ⁴`, which is infinite for some heavy-tailed families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kurtosis {
    Finite(f64),
    Infinite,
}

impl Kurtosis {
    pub fn finite(self) -> Option<f64> {
        match self {
            Kurtosis::Finite(k) => Some(k),
            Kurtosis::Infinite => None,
        }
    }
}

/// A distribution together with its exact mean, variance and kurtosis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    family: Family,
    mean: f64,
    variance: f64,
    kurtosis: Kurtosis,
}

fn spec_error(spec: &str, reason: impl Into<String>) -> Error {
    Error::DistributionSpec {
        spec: spec.to_string(),
        reason: reason.into(),
    }
}

/// Kurtosis of a two-point law `{0: 1−p, c: p}`; independent of `c`.
fn two_point_kurtosis(p: f64) -> Kurtosis {
    let v = p * (1.0 - p);
    if v == 0.0 {
        Kurtosis::Finite(1.0)
    } else {
        Kurtosis::Finite((1.0 - 3.0 * v) / v)
    }
}

impl DistributionSpec {
    /// Validates `family` and fills in its moments.
    pub fn new(family: Family) -> Result<Self> {
        let label = || format!("{}:{}", family.name(), join_params(&family.params()));
        let bad = |reason: &str| Err(spec_error(&label(), reason));
        if family.params().iter().any(|p| !p.is_finite()) {
            return bad("parameters must be finite");
        }
        let (mean, variance, kurtosis) = match family {
            Family::Gaussian { mean, std_dev } => {
                if std_dev <= 0.0 {
                    return bad("standard deviation must be positive");
                }
                (mean, std_dev * std_dev, Kurtosis::Finite(3.0))
            }
            Family::Laplace { location } => (location, 2.0, Kurtosis::Finite(6.0)),
            Family::Poisson { rate } => {
                if rate <= 0.0 {
                    return bad("rate must be positive");
                }
                (rate, rate, Kurtosis::Finite(3.0 + 1.0 / rate))
            }
            Family::Pareto { alpha: a, scale: s } => {
                if a <= 2.0 {
                    return bad("tail index must exceed 2 for finite variance");
                }
                if s <= 0.0 {
                    return bad("scale must be positive");
                }
                let variance = s * s * a / ((a - 1.0).powi(2) * (a - 2.0));
                let kurtosis = if a > 4.0 {
                    let excess =
                        6.0 * (a.powi(3) + a * a - 6.0 * a - 2.0) / (a * (a - 3.0) * (a - 4.0));
                    Kurtosis::Finite(3.0 + excess)
                } else {
                    Kurtosis::Infinite
                };
                (0.0, variance, kurtosis)
            }
            Family::StudentT { dof } => {
                if dof <= 4.0 {
                    return bad("degrees of freedom must exceed 4 for finite kurtosis");
                }
                (
                    0.0,
                    dof / (dof - 2.0),
                    Kurtosis::Finite(3.0 * (dof - 2.0) / (dof - 4.0)),
                )
            }
            Family::LogNormal { mu, sigma } => {
                if sigma <= 0.0 {
                    return bad("sigma must be positive");
                }
                let s2 = sigma * sigma;
                let mean = (mu + s2 / 2.0).exp();
                let variance = s2.exp_m1() * (2.0 * mu + s2).exp();
                let kurtosis =
                    (4.0 * s2).exp() + 2.0 * (3.0 * s2).exp() + 3.0 * (2.0 * s2).exp() - 3.0;
                (mean, variance, Kurtosis::Finite(kurtosis))
            }
            Family::ScaledBernoulliPlus { c, p } | Family::ScaledBernoulliMinus { c, p } => {
                if c <= 0.0 {
                    return bad("c must be positive");
                }
                if !(0.0..=1.0).contains(&p) {
                    return bad("p must lie in [0, 1]");
                }
                let sign = if matches!(family, Family::ScaledBernoulliPlus { .. }) {
                    1.0
                } else {
                    -1.0
                };
                (sign * p * c, c * c * p * (1.0 - p), two_point_kurtosis(p))
            }
            Family::Constant { value } => (value, 0.0, Kurtosis::Finite(1.0)),
        };
        Ok(Self {
            family,
            mean,
            variance,
            kurtosis,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn kurtosis(&self) -> Kurtosis {
        self.kurtosis
    }

    /// Fills `out` with i.i.d. draws.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        // Constructors below cannot fail: parameters were validated in `new`.
        match self.family {
            Family::Gaussian { mean, std_dev } => {
                let d = Normal::new(mean, std_dev).expect("validated");
                out.iter_mut().for_each(|x| *x = d.sample(rng));
            }
            Family::Laplace { location } => {
                for x in out.iter_mut() {
                    // u uniform on (-1/2, 1/2); inverse CDF of the unit Laplace.
                    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                    let tail = -(1.0 - 2.0 * u.abs()).ln();
                    *x = location + if u < 0.0 { -tail } else { tail };
                }
            }
            Family::Poisson { rate } => {
                let d = Poisson::new(rate).expect("validated");
                out.iter_mut().for_each(|x| *x = d.sample(rng));
            }
            Family::Pareto { alpha, scale } => {
                let d = Pareto::new(scale, alpha).expect("validated");
                let shift = alpha * scale / (alpha - 1.0);
                out.iter_mut().for_each(|x| *x = d.sample(rng) - shift);
            }
            Family::StudentT { dof } => {
                let d = StudentT::new(dof).expect("validated");
                out.iter_mut().for_each(|x| *x = d.sample(rng));
            }
            Family::LogNormal { mu, sigma } => {
                let d = LogNormal::new(mu, sigma).expect("validated");
                out.iter_mut().for_each(|x| *x = d.sample(rng));
            }
            Family::ScaledBernoulliPlus { c, p } => {
                out.iter_mut()
                    .for_each(|x| *x = if rng.random_bool(p) { c } else { 0.0 });
            }
            Family::ScaledBernoulliMinus { c, p } => {
                out.iter_mut()
                    .for_each(|x| *x = if rng.random_bool(p) { -c } else { 0.0 });
            }
            Family::Constant { value } => out.fill(value),
        }
    }

    /// `n` i.i.d. draws from a generator seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        self.sample_with(&mut rng_from_seed(seed), n)
    }

    pub fn sample_with(&self, rng: &mut SimRng, n: usize) -> Result<Sample> {
        if n == 0 {
            return Err(Error::invalid("n", "sample size must be at least 1"));
        }
        let mut values = vec![0.0; n];
        self.fill(rng, &mut values);
        Sample::new(values)
    }
}

fn join_params(params: &[f64]) -> String {
    params
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}",
            self.family.name(),
            join_params(&self.family.params())
        )
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_distribution(s)
    }
}

/// Parses `family:p1,p2,...` into a [`DistributionSpec`].
pub fn parse_distribution(spec: &str) -> Result<DistributionSpec> {
    let (name, rest) = spec
        .trim()
        .split_once(':')
        .ok_or_else(|| spec_error(spec, "expected `family:params`"))?;
    let params = rest
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| spec_error(spec, format!("`{p}` is not a decimal number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let arity = |k: usize| {
        if params.len() == k {
            Ok(())
        } else {
            Err(spec_error(
                spec,
                format!("`{name}` takes {k} parameter(s), got {}", params.len()),
            ))
        }
    };
    let family = match name {
        "gaussian" => {
            arity(2)?;
            Family::Gaussian {
                mean: params[0],
                std_dev: params[1],
            }
        }
        "laplace" => {
            arity(1)?;
            Family::Laplace {
                location: params[0],
            }
        }
        "poisson" => {
            arity(1)?;
            Family::Poisson { rate: params[0] }
        }
        "pareto" => {
            arity(2)?;
            Family::Pareto {
                alpha: params[0],
                scale: params[1],
            }
        }
        "student" => {
            arity(1)?;
            Family::StudentT { dof: params[0] }
        }
        "lognormal" => {
            arity(2)?;
            Family::LogNormal {
                mu: params[0],
                sigma: params[1],
            }
        }
        "bern2+" => {
            arity(2)?;
            Family::ScaledBernoulliPlus {
                c: params[0],
                p: params[1],
            }
        }
        "bern2-" => {
            arity(2)?;
            Family::ScaledBernoulliMinus {
                c: params[0],
                p: params[1],
            }
        }
        "constant" => {
            arity(1)?;
            Family::Constant { value: params[0] }
        }
        other => return Err(spec_error(spec, format!("unknown family `{other}`"))),
    };
    DistributionSpec::new(family).map_err(|e| match e {
        Error::DistributionSpec { reason, .. } => spec_error(spec, reason),
        other => other,
    })
}

impl Serialize for DistributionSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DistributionSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An ordered, non-empty sequence of finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample(Vec<f64>);

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSample);
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Empirical mean.
    pub fn mean(&self) -> f64 {
        crate::numeric::mean(&self.0)
    }

    /// `a·x + c` applied coordinate-wise.
    pub fn affine(&self, a: f64, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|x| a * x + c).collect())
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Monte Carlo estimate of `(P(S_j ≤ jμ), P(S_j ≥ jμ))` where `S_j` is a sum
/// of `j` independent draws. A sum exactly equal to `jμ` counts toward both.
pub fn regularity_probe(
    dist: &DistributionSpec,
    j: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if j == 0 {
        return Err(Error::invalid("j", "must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let centre = j as f64 * dist.mean();
    let mut buf = vec![0.0; j];
    let (mut below, mut above) = (0usize, 0usize);
    for _ in 0..trials {
        dist.fill(&mut rng, &mut buf);
        let sum: f64 = buf.iter().sum();
        below += usize::from(sum <= centre);
        above += usize::from(sum >= centre);
    }
    Ok((below as f64 / trials as f64, above as f64 / trials as f64))
}
