//! Unit-cell problems for `L = b∂x + (σ²/2)∂x²`.
//!
//! All operators are Galerkin matrices on the symmetric wavenumber window
//! `|k| < N/2`, which keeps real fields exactly conjugate-symmetric.

use crate::error::{Error, Result};
use crate::fit::fit_decay_rate;
use crate::fourier::{CellRatio, SpectralField};
use crate::linalg::{c64, trapezoid_propagator, CMatrix, CVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default number of Fourier modes for cell computations.
pub const DEFAULT_CELL_MODES: usize = 64;

const CHECK_GRID: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    b: SpectralField,
    sigma: SpectralField,
    a: SpectralField,
    delta: f64,
    delta_prime: f64,
}

fn grid_extrema(f: &SpectralField) -> (f64, f64) {
    let n = CHECK_GRID.max(8 * f.n());
    let vals = f.resample(n).to_grid();
    vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.re), hi.max(v.re)))
}

impl Coefficients {
    /// Ellipticity bounds default to the grid extrema of `σ`.
    pub fn new(b: SpectralField, sigma: SpectralField) -> Self {
        let (lo, hi) = grid_extrema(&sigma);
        let a = sigma.multiply_full(&sigma);
        Coefficients { b, sigma, a, delta: lo, delta_prime: hi }
    }

    pub fn with_bounds(mut self, delta: f64, delta_prime: f64) -> Self {
        self.delta = delta;
        self.delta_prime = delta_prime;
        self
    }

    /// `b = 0`, constant `σ`.
    pub fn heat(sigma: f64) -> Self {
        Self::new(SpectralField::zeros(4), SpectralField::constant(4, sigma))
    }

    /// Gradient drift `b = −V′` with constant `σ`.
    pub fn gradient(potential: &SpectralField, sigma: f64) -> Self {
        let b = potential.derivative().scale(c64(-1.0));
        Self::new(b, SpectralField::constant(4, sigma))
    }

    /// `V = A cos x`, so `b = A sin x`, and `σ = 1`.
    pub fn cosine_potential(amplitude: f64) -> Self {
        let v = SpectralField::from_modes(4, &[(1, c64(0.5 * amplitude)), (-1, c64(0.5 * amplitude))]);
        Self::gradient(&v, 1.0)
    }

    pub fn b(&self) -> &SpectralField {
        &self.b
    }

    pub fn sigma(&self) -> &SpectralField {
        &self.sigma
    }

    /// `σ²`.
    pub fn a(&self) -> &SpectralField {
        &self.a
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn delta_prime(&self) -> f64 {
        self.delta_prime
    }

    /// Highest harmonic present in `b` or `σ²`.
    pub fn harmonic_bound(&self) -> usize {
        self.b.bandwidth(1e-14 * self.b.norm()).max(self.a.bandwidth(1e-14 * self.a.norm()))
    }

    /// Galerkin matrix of `L_ε` on the listed wavenumbers:
    /// entry `(i, j)` is `⟨L_ε e_{k_j}, e_{k_i}⟩`.
    pub fn generator_block(&self, eps: CellRatio, ks: &[i64]) -> CMatrix {
        let p = eps.cells() as i64;
        let pf = p as f64;
        let n = ks.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &ki) in ks.iter().enumerate() {
            for (j, &kj) in ks.iter().enumerate() {
                let d = ki - kj;
                if d % p != 0 {
                    continue;
                }
                let h = d / p;
                let kf = kj as f64;
                m[(i, j)] = self.b.get(h) * Complex64::new(0.0, pf * kf) - self.a.get(h) * (0.5 * kf * kf);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn require(&self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::AssumptionViolated(self.failures().join(", ")))
        }
    }
}

/// Ellipticity, realness and centering checks on a fine grid.
pub fn validate_assumption1(c: &Coefficients) -> ValidationReport {
    let mut checks = Vec::new();
    let (smin, smax) = grid_extrema(&c.sigma);
    checks.push(Check {
        name: "delta positive".into(),
        passed: c.delta > 0.0,
        measured: c.delta,
        threshold: 0.0,
    });
    checks.push(Check {
        name: "lower ellipticity".into(),
        passed: smin >= c.delta && smin > 0.0,
        measured: smin,
        threshold: c.delta,
    });
    checks.push(Check {
        name: "upper ellipticity".into(),
        passed: smax <= c.delta_prime,
        measured: smax,
        threshold: c.delta_prime,
    });
    let real_tol = 1e-12 * (1.0 + c.b.norm() + c.sigma.norm());
    let real_defect = c.b.realness_defect().max(c.sigma.realness_defect());
    checks.push(Check {
        name: "real coefficients".into(),
        passed: real_defect <= real_tol,
        measured: real_defect,
        threshold: real_tol,
    });

    let n = CHECK_GRID.max(8 * c.b.n().max(c.sigma.n()));
    let bv = c.b.resample(n).to_grid();
    let sv = c.sigma.resample(n).to_grid();
    let ratio: Vec<f64> = bv.iter().zip(&sv).map(|(b, s)| b.re / (s.re * s.re)).collect();
    let mean = ratio.iter().sum::<f64>() / n as f64;
    let l2 = (ratio.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    let tol = 1e-10 * l2.max(f64::MIN_POSITIVE);
    checks.push(Check {
        name: "centering".into(),
        passed: mean.is_finite() && mean.abs() <= tol.max(1e-14),
        measured: mean.abs(),
        threshold: tol,
    });
    ValidationReport { checks }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    pub rho: SpectralField,
    pub chi: SpectralField,
    pub mu: f64,
    pub omega: f64,
    pub omega_r_squared: f64,
}

impl CellSolution {
    pub fn solve(c: &Coefficients, n: usize) -> Result<Self> {
        validate_assumption1(c).require()?;
        let rho = invariant_density(c, n)?;
        let chi = corrector_chi(c, &rho)?;
        let mu = effective_mu(c, &rho, &chi);
        let (omega, r2) = spectral_gap(c, &rho)?;
        Ok(CellSolution { rho, chi, mu, omega, omega_r_squared: r2 })
    }
}

/// Wavenumbers `−(N/2−1) ..= N/2−1`.
pub fn symmetric_window(n: usize) -> Vec<i64> {
    let h = n as i64 / 2 - 1;
    (-h..=h).collect()
}

fn to_field(n: usize, ks: &[i64], v: &CVector) -> SpectralField {
    let mut f = SpectralField::zeros(n);
    for (i, &k) in ks.iter().enumerate() {
        f.set(k, v[i]);
    }
    f
}

fn to_vector(ks: &[i64], f: &SpectralField) -> CVector {
    CVector::from_iterator(ks.len(), ks.iter().map(|&k| f.get(k)))
}

fn cell_window(c: &Coefficients, n: usize) -> Result<Vec<i64>> {
    let need = 2 * c.harmonic_bound() + 4;
    if n < need || n % 2 != 0 {
        return Err(Error::ResolutionTooSmall { need, got: n });
    }
    Ok(symmetric_window(n))
}

/// Solves `L*ρ = 0`, `⟨ρ, 1⟩ = 1` by shifted inverse iteration.
pub fn invariant_density(c: &Coefficients, n: usize) -> Result<SpectralField> {
    let ks = cell_window(c, n)?;
    let one = CellRatio::from_cells(1)?;
    let l = c.generator_block(one, &ks);
    let lstar = l.adjoint();
    let dim = ks.len();
    let scale = lstar.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let shift = 1e-10 * scale;
    let lu = (&lstar - CMatrix::identity(dim, dim) * c64(shift)).lu();
    let i0 = ks.iter().position(|&k| k == 0).unwrap();
    let mut x = CVector::zeros(dim);
    x[i0] = c64(1.0);
    for _ in 0..4 {
        x = lu
            .solve(&x)
            .ok_or_else(|| Error::SolveFailed("shifted adjoint is singular".into()))?;
        let m = x[i0];
        if m.norm() == 0.0 || !m.is_finite() {
            return Err(Error::SolveFailed("kernel vector has zero mass".into()));
        }
        x /= m;
    }
    let rho = to_field(n, &ks, &x).symmetrize_real();
    let resid = (&lstar * to_vector(&ks, &rho)).norm();
    if !(resid <= 1e-8 * rho.sobolev_norm(2.0)) {
        return Err(Error::SolveFailed(format!("adjoint residual {resid:e} too large")));
    }
    let (lo, _) = grid_extrema(&rho);
    if !(lo > 0.0) {
        return Err(Error::SolveFailed(format!("density not positive (min {lo:e})")));
    }
    Ok(rho)
}

/// Solves `Lχ = −b` with `⟨χ, ρ⟩ = 0` through a bordered system.
pub fn corrector_chi(c: &Coefficients, rho: &SpectralField) -> Result<SpectralField> {
    let n = rho.n();
    let ks = cell_window(c, n)?;
    let one = CellRatio::from_cells(1)?;
    let l = c.generator_block(one, &ks);
    let dim = ks.len();
    let i0 = ks.iter().position(|&k| k == 0).unwrap();
    let mut m = CMatrix::zeros(dim + 1, dim + 1);
    m.view_mut((0, 0), (dim, dim)).copy_from(&l);
    m[(i0, dim)] = c64(1.0);
    for (j, &k) in ks.iter().enumerate() {
        m[(dim, j)] = rho.get(k).conj();
    }
    let mut rhs = CVector::zeros(dim + 1);
    for (i, &k) in ks.iter().enumerate() {
        rhs[i] = -c.b.get(k);
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SolveFailed("bordered corrector system is singular".into()))?;
    let chi_vec = sol.rows(0, dim).into_owned();
    let chi = to_field(n, &ks, &chi_vec).symmetrize_real();
    let bv = to_vector(&ks, &c.b);
    let resid = (&l * to_vector(&ks, &chi) + &bv).norm();
    if !(resid <= 1e-8 * c.b.norm().max(1e-300)) && c.b.norm() > 0.0 {
        return Err(Error::SolveFailed(format!("corrector residual {resid:e} too large")));
    }
    Ok(chi)
}

/// `μ = ⟨(σ²/2)(1 + χ′)², ρ⟩`.
pub fn effective_mu(c: &Coefficients, rho: &SpectralField, chi: &SpectralField) -> f64 {
    let w = SpectralField::constant(chi.n(), 1.0).add(&chi.derivative());
    let w2 = w.multiply_full(&w);
    let integrand = w2.multiply_full(c.a()).scale(c64(0.5));
    integrand.inner_product(rho).re
}

fn fit_window_samples(times: &[f64], vals: &[f64], t_lo: f64, max_points: usize) -> (Vec<f64>, Vec<f64>) {
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= t_lo).collect();
    let stride = (idx.len() / max_points).max(1);
    let pick: Vec<usize> = idx.into_iter().step_by(stride).collect();
    (pick.iter().map(|&i| times[i]).collect(), pick.iter().map(|&i| vals[i]).collect())
}

/// Wavenumbers `m + jp` for `j ∈ [−n/2, n/2)`.
pub fn centered_class(m: i64, eps: CellRatio, n: usize) -> Vec<i64> {
    let p = eps.cells() as i64;
    let h = n as i64 / 2;
    (-h..h).map(|j| m + j * p).collect()
}

/// Places `ρ_j` at wavenumber `m + jp` on a class window.
pub fn modulated_density(rho: &SpectralField, eps: CellRatio, m: i64, ks: &[i64]) -> CVector {
    let p = eps.cells() as i64;
    CVector::from_iterator(ks.len(), ks.iter().map(|&k| rho.get((k - m) / p)))
}

/// Fits the decay of `⟨S*_ε(t) e_m, ρ^ε e_m⟩` and returns the rate divided by `m²`.
pub fn mu_decay_oracle(
    c: &Coefficients,
    rho: &SpectralField,
    eps: CellRatio,
    m: i64,
    t_final: f64,
    modes_per_class: usize,
) -> Result<f64> {
    let e = eps.epsilon();
    if m == 0 || !(e * (m.unsigned_abs() as f64) < 0.5) {
        return Err(Error::Config(format!("mode {m} outside ε|m| < 1/2 at ε = {e}")));
    }
    let ks = centered_class(m, eps, modes_per_class);
    let lstar = c.generator_block(eps, &ks).adjoint();
    let dt = (0.1 * e * e).min(1e-3);
    let steps = (t_final / dt).ceil() as usize;
    let (phi, _) = trapezoid_propagator(&lstar, None, dt)?;
    let target = modulated_density(rho, eps, m, &ks);
    let mut f = CVector::zeros(ks.len());
    f[ks.iter().position(|&k| k == m).unwrap()] = c64(1.0);
    let mut times = Vec::with_capacity(steps);
    let mut proj = Vec::with_capacity(steps);
    for s in 1..=steps {
        f = &phi * f;
        times.push(s as f64 * dt);
        proj.push(f.dotc(&target).norm());
    }
    let (t, y) = fit_window_samples(&times, &proj, 2.0 * e * e, 4000);
    if t.len() < 10 {
        return Err(Error::FitFailed("fit window holds fewer than 10 samples".into()));
    }
    let (rate, _) = fit_decay_rate(&t, &y, 0.999)?;
    Ok(rate / (m * m) as f64)
}

const GAP_ONSET: f64 = 1e-5;
const GAP_FLOOR: f64 = 1e-11;

/// Decay rate of `‖S*(t)(1 − ρ)‖` and the fit's `R²`, fitted once the relative
/// norm has fallen below `1e-5` so that faster modes have died out.
///
/// When `ρ` is constant the seed `e_1 + e_{−1}` is used instead.
pub fn spectral_gap(c: &Coefficients, rho: &SpectralField) -> Result<(f64, f64)> {
    let n = rho.n();
    let ks = cell_window(c, n)?;
    let one = CellRatio::from_cells(1)?;
    let lstar = c.generator_block(one, &ks).adjoint();
    let mut g0 = SpectralField::constant(n, 1.0).sub(rho);
    if g0.norm() < 1e-10 {
        g0 = SpectralField::from_modes(n, &[(1, c64(1.0)), (-1, c64(1.0))]);
    }
    g0 = g0.sub(&rho.scale(g0.mean()));
    let mut g = to_vector(&ks, &g0);
    let g_norm0 = g.norm();
    let scale = lstar.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dt = 1e-3_f64.min(0.1 / scale.max(1e-300)).max(1e-6);
    let (mut phi, _) = trapezoid_propagator(&lstar, None, dt)?;
    let mut stride = 1u64;
    while (2 * stride) as f64 * dt <= 1e-2 {
        phi = &phi * &phi;
        stride *= 2;
    }
    let mut times = Vec::new();
    let mut norms = Vec::new();
    let max_steps = 400_000 / stride;
    for s in 1..=max_steps {
        g = &phi * g;
        let r = g.norm() / g_norm0;
        times.push((s * stride) as f64 * dt);
        norms.push(r);
        if r < GAP_FLOOR {
            break;
        }
    }
    let window: Vec<usize> = (0..norms.len()).filter(|&i| norms[i] <= GAP_ONSET && norms[i] >= GAP_FLOOR).collect();
    let (t, y): (Vec<f64>, Vec<f64>) = if window.len() >= 20 {
        let stride = (window.len() / 4000).max(1);
        window.iter().step_by(stride).map(|&i| (times[i], norms[i])).unzip()
    } else {
        let half = norms.len() / 2;
        (times[half..].to_vec(), norms[half..].to_vec())
    };
    let (rate, fit) = fit_decay_rate(&t, &y, 0.999)?;
    if !(rate > 0.0) {
        return Err(Error::FitFailed(format!("non-positive decay rate {rate}")));
    }
    Ok((rate, fit.r_squared))
}
