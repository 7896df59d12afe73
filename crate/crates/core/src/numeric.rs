//! Small numeric helpers shared by the estimators.

/// Slack used when snapping a real to an integer before `ceil`/`floor`.
///
/// Quantities like `ln(1/δ)` at `δ = e⁻²` or `(1 − 0.05)·100` land one ulp
/// away from the integer they represent; without snapping, `ceil` would jump
/// to the next integer.
const INTEGER_SNAP: f64 = 1e-9;

fn snapped(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= INTEGER_SNAP * r.abs().max(1.0)).then_some(r)
}

/// `⌈x⌉`, treating values within a relative 1e-9 of an integer as that integer.
pub fn ceil_snap(x: f64) -> f64 {
    snapped(x).unwrap_or_else(|| x.ceil())
}

/// `⌊x⌋`, treating values within a relative 1e-9 of an integer as that integer.
pub fn floor_snap(x: f64) -> f64 {
    snapped(x).unwrap_or_else(|| x.floor())
}

/// Arithmetic mean; `NaN` on empty input.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// The sub-Gaussian scale `√((1 + ln(1/δ))/n)`.
pub fn sub_gaussian_scale(delta: f64, n: usize) -> f64 {
    ((1.0 + (1.0 / delta).ln()) / n as f64).sqrt()
}
