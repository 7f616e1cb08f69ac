//! Dense complex matrix helpers shared by the cell solver and the SPDE blocks.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn c64(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// One step of the implicit trapezoidal rule for `x' = A x + G ξ`:
/// returns `Φ = (I − hA/2)⁻¹(I + hA/2)` and `Ψ = (I − hA/2)⁻¹ G`.
pub fn trapezoid_propagator(a: &CMatrix, g: Option<&CMatrix>, h: f64) -> Result<(CMatrix, CMatrix)> {
    let n = a.nrows();
    let id = CMatrix::identity(n, n);
    let half = a * c64(0.5 * h);
    let lu = (&id - &half).lu();
    let phi = lu
        .solve(&(&id + &half))
        .ok_or_else(|| Error::SolveFailed("trapezoid matrix is singular".into()))?;
    let psi = match g {
        Some(g) => lu
            .solve(g)
            .ok_or_else(|| Error::SolveFailed("trapezoid matrix is singular".into()))?,
        None => CMatrix::zeros(n, 0),
    };
    Ok((phi, psi))
}

/// `e^{hA}` and the exact noise covariance `∫₀ʰ e^{sA} GG* e^{sA*} ds` over one step.
pub fn van_loan(a: &CMatrix, gg: &CMatrix, h: f64) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let mut big = CMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(-a * c64(h)));
    big.view_mut((0, n), (n, n)).copy_from(&(gg * c64(h)));
    big.view_mut((n, n), (n, n)).copy_from(&(a.adjoint() * c64(h)));
    let e = big.exp();
    let phi = e.view((n, n), (n, n)).adjoint();
    let f12 = e.view((0, n), (n, n)).into_owned();
    let mut q = &phi * f12;
    hermitize(&mut q);
    (phi, q)
}

pub fn hermitize(m: &mut CMatrix) {
    let t = m.adjoint();
    *m += t;
    *m *= c64(0.5);
}

/// Max-abs row sum norm.
pub fn norm_inf(m: &CMatrix) -> f64 {
    m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Covariance after `n` identical steps `Σ ← ΦΣΦ* + Q`, starting from zero,
/// computed by binary doubling.
pub struct CovarianceDoubling {
    powers: Vec<(CMatrix, CMatrix)>,
}

impl CovarianceDoubling {
    pub fn new(phi: CMatrix, q: CMatrix) -> Self {
        CovarianceDoubling { powers: vec![(phi, q)] }
    }

    fn level(&mut self, j: usize) -> &(CMatrix, CMatrix) {
        while self.powers.len() <= j {
            let (p, q) = self.powers.last().unwrap();
            let p2 = p * p;
            let mut q2 = p * q * p.adjoint() + q;
            hermitize(&mut q2);
            self.powers.push((p2, q2));
        }
        &self.powers[j]
    }

    /// Advances `(Σ, steps)` by `n` steps.
    pub fn advance(&mut self, sigma: &CMatrix, n: u64) -> CMatrix {
        let mut s = sigma.clone();
        let mut bits = n;
        let mut j = 0;
        while bits > 0 {
            if bits & 1 == 1 {
                let (p, q) = self.level(j);
                s = p * &s * p.adjoint() + q;
                hermitize(&mut s);
            }
            bits >>= 1;
            j += 1;
        }
        s
    }

    /// `Φⁿ`.
    pub fn propagator_power(&mut self, n: u64) -> CMatrix {
        let dim = self.powers[0].0.nrows();
        let mut out = CMatrix::identity(dim, dim);
        let mut bits = n;
        let mut j = 0;
        while bits > 0 {
            if bits & 1 == 1 {
                out = &self.level(j).0 * out;
            }
            bits >>= 1;
            j += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_loan_scalar() {
        let lam = -2.0;
        let a = CMatrix::from_element(1, 1, c64(lam));
        let gg = CMatrix::from_element(1, 1, c64(3.0));
        let h = 0.7;
        let (phi, q) = van_loan(&a, &gg, h);
        assert!((phi[(0, 0)].re - (lam * h).exp()).abs() < 1e-14);
        let want = 3.0 * (1.0 - (2.0 * lam * h).exp()) / (-2.0 * lam);
        assert!((q[(0, 0)].re - want).abs() < 1e-13);
    }

    #[test]
    fn doubling_matches_sequential() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(-1.0, 0.3),
                c64(0.2),
                Complex64::new(0.0, 0.5),
                c64(-3.0),
            ],
        );
        let gg = CMatrix::from_row_slice(2, 2, &[c64(1.0), c64(0.1), c64(0.1), c64(2.0)]);
        let (phi, q) = van_loan(&a, &gg, 0.01);
        let mut seq = CMatrix::zeros(2, 2);
        for _ in 0..37 {
            seq = &phi * &seq * phi.adjoint() + &q;
        }
        let mut d = CovarianceDoubling::new(phi, q);
        let fast = d.advance(&CMatrix::zeros(2, 2), 37);
        assert!((seq - fast).norm() < 1e-12);
    }
}
