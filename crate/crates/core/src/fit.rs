//! Least-squares lines and the power-law fits built on them.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, clamped to [0, 1]; 1 for exact data
    /// (including constant data, which a horizontal line fits exactly).
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit(format!("need at least two paired points, got {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy <= 1e-300 * n { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Fit of norm ≈ A (1+t)^{−exponent}: regression of log(norm) on log(1+t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLaw {
    pub exponent: f64,
    /// log A.
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn power_law(times: &[f64], values: &[f64]) -> Result<PowerLaw> {
    if let Some(i) = values.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit(format!("nonpositive value {} at t={}", values[i], times[i])));
    }
    let x: Vec<f64> = times.iter().map(|t| t.ln_1p()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let f = linear_fit(&x, &y)?;
    Ok(PowerLaw { exponent: -f.slope, intercept: f.intercept, r_squared: f.r_squared })
}
