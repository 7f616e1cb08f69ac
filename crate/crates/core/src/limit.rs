//! Homogenised limit equations: independent complex OU modes
//! `dx_m = −μm² x_m dt + c_m dW_m`.

use crate::cell::CellSolution;
use crate::error::{Error, Result};
use crate::noise::{coeff_corollary, coeff_thm1, coeff_thm2, coeff_thm3, NoiseSpec};
use crate::rng::NoiseStream;
use crate::solver::PathOutput;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which limiting noise coefficient the model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitRule {
    /// `c_m = ⟨q_m, ρ⟩`.
    Strong,
    /// `c_m = ‖q̄ρ‖_{−α}` for the `ε^{−α}`-rescaled field.
    Weak,
    /// `c_m = (|⟨q_m,ρ⟩|² − |⟨q̄,ρ⟩|² + ‖q̄ρ‖²)^{1/2}`.
    WhiteNoise,
    /// White-noise coefficient with `‖q̄ρ‖²` replaced by `Σ_l |φ(l)|² |⟨q̄ρ,e_l⟩|²`.
    Smoothed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitModel {
    pub mu: f64,
    pub rule: LimitRule,
    coeffs: BTreeMap<i64, Complex64>,
}

impl LimitModel {
    pub fn new(mu: f64, rule: LimitRule, coeffs: BTreeMap<i64, Complex64>) -> Self {
        LimitModel { mu, rule, coeffs }
    }

    /// Coefficients for every `|m| ≤ m_max`.
    pub fn build(rule: LimitRule, spec: &NoiseSpec, cell: &CellSolution, m_max: i64) -> Result<Self> {
        let rho = &cell.rho;
        let mut coeffs = BTreeMap::new();
        let weak = if rule == LimitRule::Weak { coeff_thm2(spec, rho)? } else { 0.0 };
        for m in -m_max..=m_max {
            let c = match rule {
                LimitRule::Strong => coeff_thm1(spec, rho, m),
                LimitRule::Weak => Complex64::new(weak, 0.0),
                LimitRule::WhiteNoise => Complex64::new(coeff_thm3(spec, rho, m)?, 0.0),
                LimitRule::Smoothed => Complex64::new(coeff_corollary(spec, rho, m)?, 0.0),
            };
            coeffs.insert(m, c);
        }
        Ok(LimitModel { mu: cell.mu, rule, coeffs })
    }

    pub fn coefficient(&self, m: i64) -> Result<Complex64> {
        self.coeffs
            .get(&m)
            .copied()
            .ok_or_else(|| Error::Config(format!("limit model has no coefficient for mode {m}")))
    }

    /// Decay rate `μm²` of mode `m`.
    pub fn rate(&self, m: i64) -> f64 {
        self.mu * (m * m) as f64
    }

    /// `|c_m|² / (2μm²)`.
    pub fn stationary_variance(&self, m: i64) -> Result<f64> {
        if m == 0 {
            return Err(Error::ZeroMode);
        }
        Ok(self.coefficient(m)?.norm_sqr() / (2.0 * self.rate(m)))
    }

    /// `E|x_m(t)|²` from a zero start.
    pub fn variance_at(&self, m: i64, t: f64) -> Result<f64> {
        let c2 = self.coefficient(m)?.norm_sqr();
        let lam = self.rate(m);
        Ok(if lam == 0.0 { c2 * t } else { c2 * (1.0 - (-2.0 * lam * t).exp()) / (2.0 * lam) })
    }
}

fn increment_variance(lam: f64, dt: f64) -> f64 {
    if lam == 0.0 {
        dt
    } else {
        -(-2.0 * lam * dt).exp_m1() / (2.0 * lam)
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("time grid must start at 0 and increase".into()));
    }
    Ok(())
}

/// Samples `x_m` on `times` by the exact OU transition; draw `i` uses stream step `i`.
pub fn ou_exact_sample(model: &LimitModel, m: i64, times: &[f64], stream: &mut NoiseStream) -> Result<Vec<Complex64>> {
    check_grid(times)?;
    let c = model.coefficient(m)?;
    let lam = model.rate(m);
    let mut x = Complex64::new(0.0, 0.0);
    let mut out = vec![x];
    for (i, w) in times.windows(2).enumerate() {
        let dt = w[1] - w[0];
        let z = stream.standard(i as u64 + 1, m);
        x = x * (-lam * dt).exp() + c * increment_variance(lam, dt).sqrt() * z;
        out.push(x);
    }
    Ok(out)
}

/// Variance of [`ou_exact_sample`] propagated through the same recursion.
pub fn ou_exact_variance(model: &LimitModel, m: i64, times: &[f64]) -> Result<Vec<f64>> {
    check_grid(times)?;
    let c2 = model.coefficient(m)?.norm_sqr();
    let lam = model.rate(m);
    let mut v = 0.0;
    let mut out = vec![v];
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        v = v * (-2.0 * lam * dt).exp() + c2 * increment_variance(lam, dt);
        out.push(v);
    }
    Ok(out)
}

/// `sup_n Σ_{|m|≤M} (1+m²)^{−s} |⟨a(t_n) − b(t_n), e_m⟩|²` over the watched modes.
pub fn hminus_error_functional(a: &PathOutput, b: &PathOutput, s: f64, m_max: i64) -> Result<f64> {
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::GridMismatch("trajectories use different time grids".into()));
    }
    let wa: Vec<i64> = a.modes.iter().map(|m| m.0).collect();
    let wb: Vec<i64> = b.modes.iter().map(|m| m.0).collect();
    if wa != wb {
        return Err(Error::GridMismatch(format!("watch lists differ: {wa:?} vs {wb:?}")));
    }
    let mut sup: f64 = 0.0;
    for n in 0..a.times.len() {
        let mut acc = 0.0;
        for ((m, ta), (_, tb)) in a.modes.iter().zip(&b.modes) {
            if m.abs() <= m_max {
                acc += (1.0 + (m * m) as f64).powf(-s) * (ta[n] - tb[n]).norm_sqr();
            }
        }
        sup = sup.max(acc);
    }
    Ok(sup)
}
