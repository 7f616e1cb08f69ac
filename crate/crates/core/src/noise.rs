//! Noise families `{q_k}`, their validators, Wiener increments and every
//! limiting noise coefficient.

use crate::cell::Check;
use crate::error::{Error, Result};
use crate::fit::fit_power_law;
use crate::fourier::{CellRatio, SpectralField};
use crate::linalg::c64;
use crate::rng::NoiseStream;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Symbol `φ` of the noise smoothing operator `φ(ε∂x)`, with `φ(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mollifier {
    /// `φ ≡ 1`.
    Flat,
    /// `max(0, 1 − |ξ|/w)`.
    Tent { half_width: f64 },
    /// `exp(1 − 1/(1 − (ξ/R)²))` on `|ξ| < R`.
    Bump { radius: f64 },
}

impl Mollifier {
    pub fn eval(&self, xi: f64) -> f64 {
        match *self {
            Mollifier::Flat => 1.0,
            Mollifier::Tent { half_width } => (1.0 - xi.abs() / half_width).max(0.0),
            Mollifier::Bump { radius } => {
                let r = xi / radius;
                if r.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - r * r)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseFamily {
    /// `q_k ≡ 1`.
    ConstantWhite,
    /// `q_k = (1∨|k|)^{−α} p`.
    PowerDecay { alpha: f64, profile: SpectralField },
    /// `q_k = q̄ + (1∨|k|)^{−τ} r`.
    TailConvergent { qbar: SpectralField, tau: f64, r: SpectralField },
    /// `q_k = table[|k|]`, continued by `(1∨|k|)^{−α} q̄` past the table.
    Custom { alpha: f64, qbar: SpectralField, table: Vec<SpectralField> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub k_max: usize,
    pub eta: f64,
    pub mollifier: Option<Mollifier>,
}

fn weight(k: i64, exponent: f64) -> f64 {
    (k.unsigned_abs().max(1) as f64).powf(-exponent)
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, k_max: usize) -> Result<Self> {
        let spec = NoiseSpec { family, k_max, eta: 0.0, mollifier: None };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        self.eta = eta;
        self.check()?;
        Ok(self)
    }

    pub fn with_mollifier(mut self, m: Mollifier) -> Self {
        self.mollifier = Some(m);
        self
    }

    fn check(&self) -> Result<()> {
        let a = self.alpha();
        if !(0.0..1.0).contains(&a) {
            return Err(Error::Config(format!("decay exponent {a} outside [0, 1)")));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta {} outside [0, 1)", self.eta)));
        }
        let real = |f: &SpectralField| f.is_real(1e-12 * (1.0 + f.norm()));
        let ok = match &self.family {
            NoiseFamily::ConstantWhite => true,
            NoiseFamily::PowerDecay { profile, .. } => real(profile),
            NoiseFamily::TailConvergent { qbar, r, tau } => {
                if !(*tau > 0.0) {
                    return Err(Error::Config(format!("tail exponent {tau} must be positive")));
                }
                real(qbar) && real(r)
            }
            NoiseFamily::Custom { qbar, table, .. } => real(qbar) && table.iter().all(real),
        };
        if !ok {
            return Err(Error::Config("noise profiles must be real".into()));
        }
        Ok(())
    }

    /// Declared decay exponent `α`.
    pub fn alpha(&self) -> f64 {
        match &self.family {
            NoiseFamily::ConstantWhite | NoiseFamily::TailConvergent { .. } => 0.0,
            NoiseFamily::PowerDecay { alpha, .. } | NoiseFamily::Custom { alpha, .. } => *alpha,
        }
    }

    /// Tail profile `q̄`.
    pub fn qbar(&self) -> SpectralField {
        match &self.family {
            NoiseFamily::ConstantWhite => SpectralField::constant(4, 1.0),
            NoiseFamily::PowerDecay { profile, .. } => profile.clone(),
            NoiseFamily::TailConvergent { qbar, .. } | NoiseFamily::Custom { qbar, .. } => qbar.clone(),
        }
    }

    /// `q_k` ignoring the cutoff `K`.
    pub fn untruncated_profile(&self, k: i64) -> SpectralField {
        match &self.family {
            NoiseFamily::ConstantWhite => SpectralField::constant(4, 1.0),
            NoiseFamily::PowerDecay { alpha, profile } => profile.scale(c64(weight(k, *alpha))),
            NoiseFamily::TailConvergent { qbar, tau, r } => qbar.add(&r.scale(c64(weight(k, *tau)))),
            NoiseFamily::Custom { alpha, qbar, table } => {
                let i = k.unsigned_abs() as usize;
                match table.get(i) {
                    Some(f) => f.clone(),
                    None => qbar.scale(c64(weight(k, *alpha))),
                }
            }
        }
    }

    /// `q_k`, zero for `|k| > K`.
    pub fn profile(&self, k: i64) -> SpectralField {
        let q = self.untruncated_profile(k);
        if k.unsigned_abs() as usize > self.k_max {
            SpectralField::zeros(q.n())
        } else {
            q
        }
    }

    /// Highest harmonic of any profile.
    pub fn profile_bandwidth(&self) -> usize {
        let fields: Vec<SpectralField> = match &self.family {
            NoiseFamily::ConstantWhite => vec![],
            NoiseFamily::PowerDecay { profile, .. } => vec![profile.clone()],
            NoiseFamily::TailConvergent { qbar, r, .. } => vec![qbar.clone(), r.clone()],
            NoiseFamily::Custom { qbar, table, .. } => {
                let mut v = table.clone();
                v.push(qbar.clone());
                v
            }
        };
        fields.iter().map(|f| f.bandwidth(0.0)).max().unwrap_or(0)
    }

    /// Smoothing weight `φ(εk)`, or 1 without a mollifier.
    pub fn smoothing(&self, eps: f64, k: i64) -> f64 {
        self.mollifier.map_or(1.0, |m| m.eval(eps * k as f64))
    }
}

/// Evidence for an asymptotic assumption at finite `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub assumption: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// `(k, value)` samples of the monitored sequence.
    pub sequence: Vec<(i64, f64)>,
}

fn dyadic(k_test: usize) -> Vec<i64> {
    let mut v = Vec::new();
    let mut k = 1usize;
    while k <= k_test {
        v.push(k as i64);
        k *= 2;
    }
    v
}

/// Log-log slope of the positive entries; `None` with fewer than three.
fn tail_slope(seq: &[(i64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = seq.iter().filter(|(k, v)| *k >= 2 && *v > 0.0).map(|&(k, v)| (k as f64, v)).collect();
    if pts.len() < 3 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    fit_power_law(&x, &y).ok().map(|f| f.slope)
}

const GROWTH_TOL: f64 = 0.05;

fn h1_ratio_check(spec: &NoiseSpec, k_test: usize, checks: &mut Vec<Check>) {
    let mut sup: f64 = 0.0;
    let mut seq = Vec::new();
    for k in 0..=k_test as i64 {
        let q = spec.profile(k);
        let n = q.norm();
        if n == 0.0 {
            continue;
        }
        let r = q.sobolev_norm(1.0) / n;
        sup = sup.max(r);
        seq.push((k, r));
    }
    let slope = tail_slope(&seq).unwrap_or(0.0);
    checks.push(Check {
        name: "normalised H1 bound".into(),
        passed: sup.is_finite() && slope <= GROWTH_TOL,
        measured: sup,
        threshold: f64::MAX,
    });
}

/// `C = sup_k ‖q_k‖·max(1, |k|^α)`, with a growth test on the dyadic tail.
pub fn validate_assumption2(spec: &NoiseSpec, k_test: usize) -> NoiseReport {
    let alpha = spec.alpha();
    let k_test = k_test.min(spec.k_max);
    let mut checks = vec![Check {
        name: "alpha in (0,1)".into(),
        passed: alpha > 0.0 && alpha < 1.0,
        measured: alpha,
        threshold: 0.0,
    }];
    let mut c: f64 = 0.0;
    for k in 0..=k_test as i64 {
        let w = (k.unsigned_abs() as f64).powf(alpha).max(1.0);
        c = c.max(spec.profile(k).norm() * w);
    }
    let seq: Vec<(i64, f64)> = dyadic(k_test)
        .into_iter()
        .map(|k| (k, spec.profile(k).norm() * (k as f64).powf(alpha)))
        .collect();
    let slope = tail_slope(&seq).unwrap_or(0.0);
    checks.push(Check { name: "decay constant".into(), passed: c.is_finite(), measured: c, threshold: f64::MAX });
    checks.push(Check {
        name: "tail growth exponent".into(),
        passed: slope <= GROWTH_TOL,
        measured: slope,
        threshold: GROWTH_TOL,
    });
    if alpha <= 0.5 {
        h1_ratio_check(spec, k_test, &mut checks);
    }
    let passed = checks.iter().all(|c| c.passed);
    NoiseReport { assumption: "strong noise".into(), passed, checks, sequence: seq }
}

/// Dyadic samples of `‖|k|^α q_k − q̄‖`.
pub fn validate_assumption3(spec: &NoiseSpec, k_test: usize) -> NoiseReport {
    let alpha = spec.alpha();
    let qbar = spec.qbar();
    let k_test = k_test.min(spec.k_max);
    let seq: Vec<(i64, f64)> = dyadic(k_test)
        .into_iter()
        .map(|k| (k, spec.profile(k).scale(c64((k as f64).powf(alpha))).sub(&qbar).norm()))
        .collect();
    let scale = 1.0 + qbar.norm();
    let max_gap = seq.iter().map(|s| s.1).fold(0.0, f64::max);
    let vanishing = max_gap <= 1e-12 * scale;
    let monotone = seq.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9) + 1e-15 * scale);
    let slope = tail_slope(&seq).unwrap_or(0.0);
    let mut checks = vec![
        Check { name: "alpha in [0,1)".into(), passed: (0.0..1.0).contains(&alpha), measured: alpha, threshold: 1.0 },
        Check {
            name: "gap decreasing to zero".into(),
            passed: vanishing || (monotone && slope < -GROWTH_TOL),
            measured: seq.last().map_or(0.0, |s| s.1),
            threshold: 0.0,
        },
    ];
    if alpha > 0.0 && alpha <= 0.5 {
        h1_ratio_check(spec, k_test, &mut checks);
    }
    let passed = checks.iter().all(|c| c.passed);
    NoiseReport { assumption: "weak noise".into(), passed, checks, sequence: seq }
}

/// Partial sums `Σ_{|k|≤K'} (1∧|k|^{−η}) ‖q_k − q̄‖²_{H¹}` at dyadic `K'`.
pub fn validate_assumption4(spec: &NoiseSpec, k_test: usize, cauchy_tol: f64) -> NoiseReport {
    let qbar = spec.qbar();
    let k_test = k_test.min(spec.k_max);
    let term = |k: i64| {
        let w = (k.unsigned_abs() as f64).powf(-spec.eta).min(1.0);
        let d = spec.profile(k).sub(&qbar).sobolev_norm(1.0);
        w * d * d
    };
    let mut partial = term(0);
    let mut seq = vec![(0, partial)];
    let marks = dyadic(k_test);
    let mut next = 0;
    for k in 1..=k_test as i64 {
        partial += 2.0 * term(k);
        if next < marks.len() && k == marks[next] {
            seq.push((k, partial));
            next += 1;
        }
    }
    let total = seq.last().map_or(0.0, |s| s.1);
    let gap = if seq.len() >= 2 { seq[seq.len() - 1].1 - seq[seq.len() - 2].1 } else { 0.0 };
    let rel = if total > 0.0 { gap / total } else { 0.0 };
    let checks = vec![
        Check { name: "eta in [0,1)".into(), passed: (0.0..1.0).contains(&spec.eta), measured: spec.eta, threshold: 1.0 },
        Check { name: "Cauchy gap".into(), passed: rel <= cauchy_tol, measured: rel, threshold: cauchy_tol },
    ];
    let passed = checks.iter().all(|c| c.passed);
    NoiseReport { assumption: "white-noise tail".into(), passed, checks, sequence: seq }
}

/// `⟨q_m, ρ⟩`.
pub fn coeff_thm1(spec: &NoiseSpec, rho: &SpectralField, m: i64) -> Complex64 {
    spec.profile(m).inner_product(rho)
}

/// `‖q̄ρ‖_{−α}`.
pub fn coeff_thm2(spec: &NoiseSpec, rho: &SpectralField) -> Result<f64> {
    let prod = spec.qbar().multiply_full(rho);
    prod.seminorm_neg_tol(spec.alpha(), 1e-8 * (1.0 + prod.norm()))
}

fn radicand_root(r: f64) -> Result<f64> {
    if r < -1e-12 {
        return Err(Error::NegativeRadicand(r));
    }
    Ok(r.max(0.0).sqrt())
}

/// `(|⟨q_m,ρ⟩|² − |⟨q̄,ρ⟩|² + ‖q̄ρ‖²)^{1/2}`.
pub fn coeff_thm3(spec: &NoiseSpec, rho: &SpectralField, m: i64) -> Result<f64> {
    let qbar = spec.qbar();
    let prod = qbar.multiply_full(rho);
    let r = coeff_thm1(spec, rho, m).norm_sqr() - qbar.inner_product(rho).norm_sqr() + prod.norm().powi(2);
    radicand_root(r)
}

/// `(|⟨q_m,ρ⟩|² − |⟨q̄,ρ⟩|² + Σ_l |φ(l)|² |⟨q̄ρ, e_l⟩|²)^{1/2}`; without a mollifier `φ ≡ 1`.
pub fn coeff_corollary(spec: &NoiseSpec, rho: &SpectralField, m: i64) -> Result<f64> {
    let qbar = spec.qbar();
    let prod = qbar.multiply_full(rho);
    let phi = spec.mollifier.unwrap_or(Mollifier::Flat);
    let smoothed: f64 = prod.iter().map(|(l, c)| phi.eval(l as f64).powi(2) * c.norm_sqr()).sum();
    let r = coeff_thm1(spec, rho, m).norm_sqr() - qbar.inner_product(rho).norm_sqr() + smoothed;
    radicand_root(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSeries {
    /// `(l, λ^l)`.
    pub terms: Vec<(i64, Complex64)>,
    /// `Λ = (Σ |λ^l|²)^{1/2}`.
    pub total: f64,
    /// Zero when every nonzero term is included, else the last dyadic increment of `Λ`.
    pub tail_estimate: f64,
}

/// `⟨q e_l, ρ⟩ = Σ_j q_j conj(ρ_{j+l})`.
fn modulated_pairing(q: &SpectralField, rho: &SpectralField, l: i64) -> Complex64 {
    q.iter().map(|(j, c)| c * rho.get(j + l).conj()).sum()
}

/// `λ^l = s·φ(εm + l)·⟨q_{m+l/ε} e_l, ρ⟩` over `|m + l/ε| ≤ K`, with `s = ε^{−α}` when `scaled`.
pub fn lambda_series(
    spec: &NoiseSpec,
    rho: &SpectralField,
    eps: CellRatio,
    m: i64,
    scaled: bool,
) -> Result<LambdaSeries> {
    let e = eps.epsilon();
    if !(e * (m.unsigned_abs() as f64) < 0.5) {
        return Err(Error::Config(format!("mode {m} outside ε|m| < 1/2")));
    }
    let p = eps.cells() as i64;
    let kk = spec.k_max as i64;
    let l_lo = (-kk - m).div_euclid(p) + i64::from((-kk - m).rem_euclid(p) != 0);
    let l_hi = (kk - m).div_euclid(p);
    let support = (spec.profile_bandwidth() + rho.bandwidth(0.0) + 1) as i64;
    let complete = -l_lo >= support && l_hi >= support;
    let lo = l_lo.max(-support);
    let hi = l_hi.min(support);
    let s = if scaled { e.powf(-spec.alpha()) } else { 1.0 };
    let terms: Vec<(i64, Complex64)> = (lo..=hi)
        .map(|l| {
            let k = m + l * p;
            let w = spec.smoothing(e, k);
            (l, modulated_pairing(&spec.profile(k), rho, l) * (s * w))
        })
        .collect();
    let sum_within = |r: i64| terms.iter().filter(|(l, _)| l.abs() <= r).map(|(_, c)| c.norm_sqr()).sum::<f64>();
    let reach = (-lo).min(hi);
    let total = terms.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
    let tail_estimate = if complete {
        0.0
    } else {
        if reach < 1 {
            return Err(Error::TruncationTooSmall(format!("cutoff K = {kk} leaves no l ≠ 0 at ε = {e}")));
        }
        sum_within(reach).sqrt() - sum_within(reach / 2).sqrt()
    };
    if tail_estimate > 0.01 * total {
        return Err(Error::TruncationTooSmall(format!(
            "last dyadic increment {tail_estimate:e} exceeds 1% of Λ = {total:e}"
        )));
    }
    Ok(LambdaSeries { terms, total, tail_estimate })
}

/// One time step of Wiener increments `ΔW_k`, `0 ≤ k ≤ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerBatch {
    pub dt: f64,
    increments: Vec<Complex64>,
}

impl WienerBatch {
    pub fn k_max(&self) -> usize {
        self.increments.len() - 1
    }

    /// `ΔW_k`, with `ΔW_{−k} = conj(ΔW_k)`.
    pub fn get(&self, k: i64) -> Complex64 {
        let z = self.increments[k.unsigned_abs() as usize];
        if k < 0 {
            z.conj()
        } else {
            z
        }
    }
}

pub fn sample_increments(k_max: usize, dt: f64, stream: &mut NoiseStream, step: u64) -> WienerBatch {
    let increments = (0..=k_max as i64).map(|k| stream.increment(step, k, dt)).collect();
    WienerBatch { dt, increments }
}
