use super::backend::MetricBackend;
use crate::error::{LabError, Result};
use crate::hypcore::BallPoint;

/// Least-squares fit of `log Vol(B(x, R))` against `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyFit {
    pub slope: f64,
    pub intercept: f64,
    /// Radii used by the fit.
    pub window: Vec<f64>,
    pub volumes: Vec<f64>,
}

/// Volume-growth entropy from the largest half of `radii`.
pub fn entropy_estimate(
    backend: &dyn MetricBackend,
    radii: &[f64],
    basepoint: &BallPoint,
) -> Result<f64> {
    Ok(entropy_fit(backend, radii, basepoint)?.slope)
}

pub fn entropy_fit(
    backend: &dyn MetricBackend,
    radii: &[f64],
    basepoint: &BallPoint,
) -> Result<EntropyFit> {
    if radii.len() < 4 {
        return Err(LabError::InsufficientRadii {
            needed: 4,
            got: radii.len(),
        });
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(LabError::InvalidInput("radii must be positive and increasing".into()));
    }
    let window = radii[radii.len() / 2..].to_vec();
    let volumes = backend.ball_volumes(basepoint, &window)?;
    let logs: Vec<f64> = volumes.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = least_squares(&window, &logs);
    Ok(EntropyFit {
        slope,
        intercept,
        window,
        volumes,
    })
}

/// Slope and intercept of the least-squares line through `(x, y)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
