//! Periodic fields on `[0, 2π]` stored by their Fourier coefficients.
//!
//! A field of resolution `N` holds `⟨f, e_k⟩` for `k ∈ [−N/2, N/2)` with
//! `e_k(x) = e^{ikx}` and `⟨f, g⟩ = (1/2π)∫ f ḡ`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Default relative tolerance for the mean-zero precondition of [`SpectralField::seminorm_neg`].
pub const MEAN_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    n: usize,
    coeffs: Vec<Complex64>,
}

/// Cell ratio `ε = 1/p` with `p` a positive integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellRatio(u32);

impl CellRatio {
    pub fn from_cells(p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidEpsilon(f64::INFINITY));
        }
        Ok(CellRatio(p))
    }

    pub fn from_epsilon(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidEpsilon(eps));
        }
        let p = (1.0 / eps).round();
        if ((1.0 / eps) - p).abs() > 1e-9 * p || p > u32::MAX as f64 {
            return Err(Error::InvalidEpsilon(eps));
        }
        Ok(CellRatio(p as u32))
    }

    /// Number of cells `1/ε`.
    pub fn cells(self) -> u32 {
        self.0
    }

    pub fn epsilon(self) -> f64 {
        1.0 / self.0 as f64
    }
}

fn check_even(n: usize) {
    assert!(n >= 2 && n % 2 == 0, "mode count must be even and positive, got {n}");
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        check_even(n);
        SpectralField { n, coeffs: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// The basis function `e_k` at resolution `n`.
    pub fn mode(n: usize, k: i64) -> Self {
        let mut f = Self::zeros(n);
        f.set(k, Complex64::new(1.0, 0.0));
        f
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut f = Self::zeros(n);
        f.set(0, Complex64::new(c, 0.0));
        f
    }

    /// Builds a field from `(k, amplitude)` pairs; repeated wavenumbers accumulate.
    pub fn from_modes(n: usize, modes: &[(i64, Complex64)]) -> Self {
        let mut f = Self::zeros(n);
        for &(k, c) in modes {
            let cur = f.get(k);
            f.set(k, cur + c);
        }
        f
    }

    /// Coefficients ordered by wavenumber, starting at `−N/2`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        check_even(coeffs.len());
        SpectralField { n: coeffs.len(), coeffs }
    }

    /// Smallest even resolution `≥ 4` that holds every wavenumber with `|k| ≤ kmax`.
    pub fn resolution_for(kmax: usize) -> usize {
        (2 * kmax + 2).max(4)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn kmin(&self) -> i64 {
        -(self.n as i64) / 2
    }

    pub fn kmax(&self) -> i64 {
        self.n as i64 / 2 - 1
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= self.kmin() && k <= self.kmax()
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = i64> + '_ {
        self.kmin()..=self.kmax()
    }

    /// Coefficient at `k`; zero outside the stored range.
    pub fn get(&self, k: i64) -> Complex64 {
        if self.contains(k) {
            self.coeffs[(k - self.kmin()) as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Panics if `k` is outside `[−N/2, N/2)`.
    pub fn set(&mut self, k: i64, c: Complex64) {
        assert!(self.contains(k), "wavenumber {k} outside resolution {}", self.n);
        let i = (k - self.kmin()) as usize;
        self.coeffs[i] = c;
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let k0 = self.kmin();
        self.coeffs.iter().enumerate().map(move |(i, &c)| (k0 + i as i64, c))
    }

    /// Largest `|k|` with a coefficient above `tol` in magnitude.
    ///
    /// Use a tolerance relative to [`norm`](Self::norm) for fields produced by transforms.
    pub fn bandwidth(&self, tol: f64) -> usize {
        self.iter()
            .filter(|(_, c)| c.norm() > tol)
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Zero-pads or truncates to resolution `n`.
    pub fn resample(&self, n: usize) -> Self {
        let mut out = Self::zeros(n);
        for (k, c) in self.iter() {
            if out.contains(k) {
                out.set(k, c);
            }
        }
        out
    }

    pub fn scale(&self, a: Complex64) -> Self {
        SpectralField { n: self.n, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    /// Sum at the finer of the two resolutions.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.n.max(other.n);
        let mut out = self.resample(n);
        for (k, c) in other.iter() {
            let cur = out.get(k);
            out.set(k, cur + c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// `∂x f`.
    pub fn derivative(&self) -> Self {
        let mut out = self.clone();
        for (i, k) in (self.kmin()..=self.kmax()).enumerate() {
            out.coeffs[i] *= Complex64::new(0.0, k as f64);
        }
        out
    }

    pub fn conj_reflect(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for (k, c) in self.iter() {
            if out.contains(-k) {
                out.set(-k, c.conj());
            }
        }
        out
    }

    /// Largest violation of `f_{−k} = conj(f_k)`; the unpaired Nyquist mode must be real.
    pub fn realness_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, c) in self.iter() {
            let partner = if self.contains(-k) { self.get(-k).conj() } else { c.conj() };
            worst = worst.max((c - partner).norm());
        }
        worst
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.realness_defect() <= tol
    }

    /// Projects onto real fields by averaging `f_k` with `conj(f_{−k})`.
    pub fn symmetrize_real(&self) -> Self {
        let mut out = self.clone();
        for (k, c) in self.iter() {
            let partner = if self.contains(-k) { self.get(-k).conj() } else { c.conj() };
            out.set(k, 0.5 * (c + partner));
        }
        out
    }

    /// `‖f‖ = (Σ |f_k|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn mean(&self) -> Complex64 {
        self.get(0)
    }

    /// `⟨f, g⟩ = Σ f_k conj(g_k)`; the coarser field is implicitly zero-padded.
    pub fn inner_product(&self, g: &Self) -> Complex64 {
        let (small, large, swap) = if self.n <= g.n { (self, g, false) } else { (g, self, true) };
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in small.iter() {
            let d = large.get(k);
            acc += if swap { d * c.conj() } else { c * d.conj() };
        }
        acc
    }

    /// `(Σ (1+k²)^s |f_k|²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.iter()
            .map(|(k, c)| (1.0 + (k * k) as f64).powf(s) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `(Σ_{k≠0} |k|^{−2s} |f_k|²)^{1/2}`, defined only for mean-zero fields.
    pub fn seminorm_neg(&self, s: f64) -> Result<f64> {
        self.seminorm_neg_tol(s, MEAN_ZERO_TOL * self.norm())
    }

    pub fn seminorm_neg_tol(&self, s: f64, tol: f64) -> Result<f64> {
        let mean = self.mean().norm();
        if mean > tol {
            return Err(Error::MeanNotZero { mean, tol });
        }
        Ok(self
            .iter()
            .filter(|&(k, _)| k != 0)
            .map(|(k, c)| (k.unsigned_abs() as f64).powf(-2.0 * s) * c.norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        out.set(0, Complex64::new(0.0, 0.0));
        out
    }

    /// Values `f(x_j)` at `x_j = 2πj/N`.
    pub fn to_grid(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (k, c) in self.iter() {
            buf[k.rem_euclid(n as i64) as usize] = c;
        }
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_inverse(n).process(&mut buf);
        buf
    }

    /// Inverse of [`to_grid`](Self::to_grid) for `N` equispaced samples.
    pub fn from_grid(values: &[Complex64]) -> Self {
        let n = values.len();
        check_even(n);
        let mut buf = values.to_vec();
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(n).process(&mut buf);
        let mut out = Self::zeros(n);
        let scale = 1.0 / n as f64;
        for k in out.kmin()..=out.kmax() {
            let v = buf[k.rem_euclid(n as i64) as usize] * scale;
            out.set(k, v);
        }
        out
    }

    /// Samples a function on an `n`-point grid and transforms.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Complex64) -> Self {
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let vals: Vec<Complex64> = (0..n).map(|j| f(h * j as f64)).collect();
        Self::from_grid(&vals)
    }

    /// Pointwise value at `x` by direct summation.
    pub fn eval(&self, x: f64) -> Complex64 {
        self.iter().map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * x)).sum()
    }

    /// Dealiased product, truncated to the finer input resolution.
    ///
    /// Both factors are transformed on a grid of at least `3N/2` points, so no
    /// product mode aliases into `[−N/2, N/2)`.
    pub fn multiply(&self, g: &Self) -> Self {
        let n = self.n.max(g.n);
        let mut m = (3 * n).div_ceil(2);
        m += m % 2;
        let a = self.resample(m).to_grid();
        let b = g.resample(m).to_grid();
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::from_grid(&prod).resample(n)
    }

    /// Product without truncation, by direct convolution of the coefficients.
    pub fn multiply_full(&self, g: &Self) -> Self {
        let mut out = Self::zeros(self.n + g.n);
        for (k, a) in self.iter().filter(|(_, a)| a.norm() > 0.0) {
            for (j, b) in g.iter() {
                let i = (k + j - out.kmin()) as usize;
                out.coeffs[i] += a * b;
            }
        }
        out
    }

    /// `q(x/ε) e^{ikx}`: coefficient `q_j` placed at wavenumber `k + j/ε`.
    pub fn oscillate(&self, eps: CellRatio, k: i64, n_out: usize) -> Result<Self> {
        let p = eps.cells() as usize;
        let need = p * self.n + k.unsigned_abs() as usize;
        if n_out < need {
            return Err(Error::ResolutionTooSmall { need, got: n_out });
        }
        let mut out = Self::zeros(n_out);
        for (j, c) in self.iter() {
            let target = k + j * p as i64;
            if out.contains(target) {
                out.set(target, c);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn orthonormality() {
        let e1 = SpectralField::mode(8, 1);
        let e2 = SpectralField::mode(16, 2);
        assert!((e1.inner_product(&e1) - c(1.0)).norm() < 1e-15);
        assert!(e1.inner_product(&e2).norm() < 1e-15);
    }

    #[test]
    fn sobolev_examples() {
        assert!((SpectralField::mode(8, 2).sobolev_norm(1.0) - 5f64.sqrt()).abs() < 1e-14);
        assert!((SpectralField::mode(8, 0).sobolev_norm(3.7) - 1.0).abs() < 1e-14);
        let f = SpectralField::from_modes(8, &[(1, c(1.0)), (-1, c(1.0))]);
        assert!((f.sobolev_norm(-1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn seminorm_examples() {
        let f = SpectralField::from_modes(8, &[(2, c(1.0)), (-2, c(1.0))]);
        assert!((f.seminorm_neg(0.5).unwrap() - 1.0).abs() < 1e-14);
        let one = SpectralField::constant(8, 1.0);
        assert!(matches!(one.seminorm_neg(0.5), Err(Error::MeanNotZero { .. })));
    }

    #[test]
    fn multiply_examples() {
        let e1 = SpectralField::mode(16, 1);
        let e2 = SpectralField::mode(16, 2);
        let p = e1.multiply(&e2);
        assert!((p.get(3) - c(1.0)).norm() < 1e-14);
        assert!((p.norm() - 1.0).abs() < 1e-14);

        let f = SpectralField::from_modes(16, &[(1, c(0.3)), (-4, Complex64::new(0.1, 2.0))]);
        let one = SpectralField::constant(16, 1.0);
        assert!(f.multiply(&one).sub(&f).norm() < 1e-14);

        let cosx2 = SpectralField::from_modes(16, &[(1, c(1.0)), (-1, c(1.0))]);
        let sq = cosx2.multiply(&cosx2);
        let want = SpectralField::from_modes(16, &[(2, c(1.0)), (0, c(2.0)), (-2, c(1.0))]);
        assert!(sq.sub(&want).norm() < 1e-14);
    }

    #[test]
    fn oscillate_examples() {
        let eps4 = CellRatio::from_epsilon(0.25).unwrap();
        let one = SpectralField::constant(4, 1.0);
        let out = one.oscillate(eps4, 2, 32).unwrap();
        assert!(out.sub(&SpectralField::mode(32, 2)).norm() < 1e-15);

        let e1 = SpectralField::mode(4, 1);
        let out = e1.oscillate(eps4, 0, 32).unwrap();
        assert!(out.sub(&SpectralField::mode(32, 4)).norm() < 1e-15);

        let eps8 = CellRatio::from_epsilon(0.125).unwrap();
        let cosx2 = SpectralField::from_modes(4, &[(1, c(1.0)), (-1, c(1.0))]);
        let out = cosx2.oscillate(eps8, 3, 64).unwrap();
        // Independent check: sample cos-type profile on a grid and transform back.
        let direct = SpectralField::from_fn(64, |x| {
            c(2.0 * (8.0 * x).cos()) * Complex64::from_polar(1.0, 3.0 * x)
        });
        assert!(out.sub(&direct).norm() < 1e-12);
        assert!((out.get(11) - c(1.0)).norm() < 1e-15);
        assert!((out.get(-5) - c(1.0)).norm() < 1e-15);

        assert!(matches!(
            cosx2.oscillate(eps8, 3, 16),
            Err(Error::ResolutionTooSmall { need: 35, got: 16 })
        ));
    }

    #[test]
    fn epsilon_validation() {
        assert_eq!(CellRatio::from_epsilon(1.0 / 16.0).unwrap().cells(), 16);
        assert!(CellRatio::from_epsilon(0.3).is_err());
        assert!(CellRatio::from_epsilon(0.0).is_err());
        assert!(CellRatio::from_epsilon(-0.5).is_err());
    }

    #[test]
    fn grid_round_trip() {
        let f = SpectralField::from_modes(
            16,
            &[(0, c(0.5)), (3, Complex64::new(0.2, -0.7)), (-8, c(0.1)), (7, c(-1.0))],
        );
        let back = SpectralField::from_grid(&f.to_grid());
        assert!(back.sub(&f).norm() < 1e-14);
        let x = 0.37;
        let g = f.to_grid();
        assert!((f.eval(0.0) - g[0]).norm() < 1e-13);
        assert!((f.eval(x) - f.eval(x + 2.0 * std::f64::consts::PI)).norm() < 1e-12);
    }
}
