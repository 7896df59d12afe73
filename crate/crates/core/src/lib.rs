//! Sub-Gaussian mean estimation for heavy-tailed data.
//!
//! The crate provides:
//!
//! - samplers with closed-form moments for the test families ([`distributions`]),
//! - median-of-means, the pairwise-difference variance estimator and the
//!   quantile-interval estimator for k-regular classes ([`estimators`]),
//! - the dyadic confidence-interval combination that turns a family of
//!   intervals into a single multiple-δ estimator ([`combiner`]),
//! - the truncated empirical mean for bounded-kurtosis classes ([`kurtosis`]),
//! - executable lower-bound constructions used as stress tests ([`adversarial`]),
//! - a reproducible Monte Carlo engine producing tail reports ([`harness`]).
//!
//! Throughout, a mean estimator is called `L`-sub-Gaussian at confidence δ
//! when `P(|Ê − μ| > L σ √((1 + ln(1/δ))/n)) ≤ δ`.

pub mod adversarial;
pub mod combiner;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod kurtosis;
pub mod numeric;
pub mod rng;

pub use combiner::{combine, CombineResult, FamilyBuilder, IntervalFamily};
pub use distributions::{DistributionSpec, Family, Kurtosis, Sample};
pub use error::{Error, Result};
pub use estimators::{BlockPartition, ConfidenceInterval};
pub use harness::{EstimatorKind, ExperimentConfig, TailReport, TailRow};
pub use kurtosis::{KurtosisConfig, XiTerms};
