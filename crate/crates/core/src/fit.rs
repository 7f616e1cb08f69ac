//! Least-squares line fits used for decay rates and convergence exponents.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::FitFailed(format!("need at least two points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::FitFailed("non-finite sample".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::FitFailed("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (intercept + slope * a)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LineFit { slope, intercept, r_squared, residuals })
}

/// Fits `log y = log C + θ log x`.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if y.iter().any(|&v| v <= 0.0) || x.iter().any(|&v| v <= 0.0) {
        return Err(Error::FitFailed("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Fits `y(t) ≈ C e^{−rt}` and returns `(r, fit)`; fails when `R² < r2_min`.
pub fn fit_decay_rate(t: &[f64], y: &[f64], r2_min: f64) -> Result<(f64, LineFit)> {
    if y.iter().any(|&v| v <= 0.0) {
        return Err(Error::FitFailed("decay fit needs positive data".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let fit = fit_line(t, &ly)?;
    if fit.r_squared < r2_min {
        return Err(Error::FitFailed(format!(
            "log-linear fit has R² = {:.6} < {r2_min}",
            fit.r_squared
        )));
    }
    Ok((-fit.slope, fit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn decay_and_power() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|s| 3.0 * (-1.7 * s).exp()).collect();
        let (r, _) = fit_decay_rate(&t, &y, 0.999).unwrap();
        assert!((r - 1.7).abs() < 1e-12);

        let x = [0.25, 0.125, 0.0625];
        let y: Vec<f64> = x.iter().map(|e: &f64| 5.0 * e.powf(1.3)).collect();
        assert!((fit_power_law(&x, &y).unwrap().slope - 1.3).abs() < 1e-12);
        assert!(fit_line(&[1.0], &[1.0]).is_err());
    }
}
