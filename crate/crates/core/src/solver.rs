//! Fourier-space time stepping of `du = L_ε u dt + Σ_k φ(εk) q_k(x/ε) e_k dW_k`.
//!
//! `L_ε` only couples wavenumbers in the same residue class modulo `1/ε`, and
//! the noise term `q_k(x/ε)e_k` lives in the class of `k`. Each class evolves
//! independently as a small dense linear SDE. The Nyquist mode is left out of
//! the dynamics so that classes `r` and `1/ε − r` are exact mirror images.

use crate::cell::Coefficients;
use crate::error::{Error, Result};
use crate::fourier::{CellRatio, SpectralField};
use crate::limit::LimitModel;
use crate::linalg::{c64, norm_inf, trapezoid_propagator, van_loan, CMatrix, CVector, CovarianceDoubling};
use crate::noise::NoiseSpec;
use crate::rng::NoiseStream;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const BLOWUP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Trapezoidal rule, noise added before the implicit solve.
    ImexCn,
    /// `u ← e^{hA}(u + GΔW)` per class.
    BlockExponential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub eps: CellRatio,
    pub n_modes: usize,
    pub dt: f64,
    pub t_final: f64,
    pub k_max: usize,
    pub watch: Vec<i64>,
    pub seed: u64,
    pub scheme: Scheme,
    /// Record every this many steps.
    pub record_every: usize,
    pub record_energy: bool,
}

impl SolverConfig {
    pub fn steps(&self) -> u64 {
        (self.t_final / self.dt).round() as u64
    }

    pub fn validate(&self, c: &Coefficients) -> Result<()> {
        let p = self.eps.cells() as usize;
        let j = c.harmonic_bound();
        let need = 2 * p * (j + 1) + 2 * self.k_max;
        if self.n_modes % 2 != 0 || self.n_modes < need {
            return Err(Error::ResolutionTooSmall { need, got: self.n_modes });
        }
        if !(self.dt > 0.0 && self.dt <= self.t_final) {
            return Err(Error::Config(format!("dt = {} must lie in (0, T = {}]", self.dt, self.t_final)));
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::Config("T must be an integer multiple of dt".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be positive".into()));
        }
        let wmax = self.watch.iter().map(|m| m.unsigned_abs()).max().unwrap_or(0);
        if !(self.eps.epsilon() * (wmax as f64) < 0.5) {
            return Err(Error::Config(format!("watched mode {wmax} violates ε|m| < 1/2")));
        }
        Ok(())
    }

    /// Largest active wavenumber `N/2 − 1`.
    pub fn k_active(&self) -> i64 {
        self.n_modes as i64 / 2 - 1
    }

    pub fn record_times(&self) -> Vec<f64> {
        let steps = self.steps();
        (0..=steps)
            .filter(|s| s % self.record_every as u64 == 0)
            .map(|s| s as f64 * self.dt)
            .collect()
    }
}

/// `L_ε u` with dealiased products; output at the resolution of `u`.
pub fn apply_generator(c: &Coefficients, eps: CellRatio, u: &SpectralField) -> Result<SpectralField> {
    let compact = |f: &SpectralField| f.resample(SpectralField::resolution_for(f.bandwidth(0.0)));
    let n = u.n();
    let pf = eps.cells() as f64;
    let b = compact(c.b()).oscillate(eps, 0, n)?;
    let a = compact(c.a()).oscillate(eps, 0, n)?;
    let du = u.derivative();
    let d2u = du.derivative();
    Ok(b.multiply(&du).scale(c64(pf)).add(&a.multiply(&d2u).scale(c64(0.5))))
}

/// `L_ε` restricted to one residue class, with its noise columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBlock {
    pub residue: i64,
    pub wavenumbers: Vec<i64>,
    pub generator: CMatrix,
    pub noise_modes: Vec<i64>,
    /// Column `i` holds the coefficients of `φ(εk) q_k(x/ε) e_k` for `k = noise_modes[i]`.
    pub noise: CMatrix,
}

impl ClassBlock {
    pub fn position(&self, k: i64) -> Option<usize> {
        self.wavenumbers.iter().position(|&w| w == k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    pub eps: CellRatio,
    pub n_modes: usize,
    pub blocks: Vec<ClassBlock>,
}

impl BlockOperator {
    pub fn block(&self, residue: i64) -> Option<&ClassBlock> {
        self.blocks.iter().find(|b| b.residue == residue)
    }

    /// Dense matrix over all active wavenumbers `−N/2+1 ..= N/2−1`.
    pub fn assemble(&self) -> CMatrix {
        let h = self.n_modes as i64 / 2 - 1;
        let dim = (2 * h + 1) as usize;
        let mut m = CMatrix::zeros(dim, dim);
        for b in &self.blocks {
            for (i, &ki) in b.wavenumbers.iter().enumerate() {
                for (j, &kj) in b.wavenumbers.iter().enumerate() {
                    m[((ki + h) as usize, (kj + h) as usize)] = b.generator[(i, j)];
                }
            }
        }
        m
    }
}

pub fn residue(k: i64, eps: CellRatio) -> i64 {
    k.rem_euclid(eps.cells() as i64)
}

/// Active wavenumbers of class `r`, ascending.
pub fn class_wavenumbers(n_modes: usize, eps: CellRatio, r: i64) -> Vec<i64> {
    let h = n_modes as i64 / 2 - 1;
    let p = eps.cells() as i64;
    let start = -h + (r - (-h)).rem_euclid(p);
    (0..).map(|j| start + j * p).take_while(|&k| k <= h).collect()
}

pub fn build_class(c: &Coefficients, noise: &NoiseSpec, config: &SolverConfig, r: i64) -> ClassBlock {
    let eps = config.eps;
    let p = eps.cells() as i64;
    let ks = class_wavenumbers(config.n_modes, eps, r);
    let generator = c.generator_block(eps, &ks);
    let kmax = config.k_max.min(noise.k_max) as i64;
    let mut cols: Vec<(i64, Vec<Complex64>)> = Vec::new();
    let start = -kmax + (r + kmax).rem_euclid(p);
    let mut k = start;
    while k <= kmax {
        let q = noise.profile(k);
        let w = noise.smoothing(eps.epsilon(), k);
        let col: Vec<Complex64> = ks.iter().map(|&n| q.get((n - k) / p) * w).collect();
        if col.iter().any(|z| z.norm() > 0.0) {
            cols.push((k, col));
        }
        k += p;
    }
    let mut g = CMatrix::zeros(ks.len(), cols.len());
    for (j, (_, col)) in cols.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            g[(i, j)] = *z;
        }
    }
    ClassBlock {
        residue: r,
        wavenumbers: ks,
        generator,
        noise_modes: cols.into_iter().map(|(k, _)| k).collect(),
        noise: g,
    }
}

pub fn build_blocks(c: &Coefficients, noise: &NoiseSpec, config: &SolverConfig) -> BlockOperator {
    let p = config.eps.cells() as i64;
    BlockOperator {
        eps: config.eps,
        n_modes: config.n_modes,
        blocks: (0..p).map(|r| build_class(c, noise, config, r)).collect(),
    }
}

/// One-step map `u ← Φu + ΨΔW` of a class.
struct Stepper {
    block: ClassBlock,
    phi: CMatrix,
    psi: CMatrix,
}

fn stepper(block: ClassBlock, scheme: Scheme, dt: f64) -> Result<Stepper> {
    let (phi, psi) = match scheme {
        Scheme::ImexCn => trapezoid_propagator(&block.generator, Some(&block.noise), dt)?,
        Scheme::BlockExponential => {
            let phi = (&block.generator * c64(dt)).exp();
            let psi = &phi * &block.noise;
            (phi, psi)
        }
    };
    Ok(Stepper { block, phi, psi })
}

fn needed_residues(config: &SolverConfig, all: bool) -> Vec<i64> {
    let p = config.eps.cells() as i64;
    if all {
        return (0..p).collect();
    }
    let mut r: Vec<i64> = config.watch.iter().map(|&m| residue(m, config.eps)).collect();
    r.sort_unstable();
    r.dedup();
    r
}

/// Recorded trajectory of one sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOutput {
    pub times: Vec<f64>,
    /// `(m, ⟨u(t_n), e_m⟩)` for each watched `m`.
    pub modes: Vec<(i64, Vec<Complex64>)>,
    pub energy: Option<Vec<f64>>,
    pub seed: u64,
    pub path: u64,
}

impl PathOutput {
    pub fn mode(&self, m: i64) -> Option<&[Complex64]> {
        self.modes.iter().find(|x| x.0 == m).map(|x| x.1.as_slice())
    }
}

fn run_class(st: &Stepper, config: &SolverConfig, stream: &mut NoiseStream) -> Result<Vec<CVector>> {
    let dim = st.block.wavenumbers.len();
    let mut u = CVector::zeros(dim);
    let mut dw = CVector::zeros(st.block.noise_modes.len());
    let mut rec = vec![u.clone()];
    for step in 1..=config.steps() {
        for (i, &k) in st.block.noise_modes.iter().enumerate() {
            dw[i] = stream.increment(step, k, config.dt);
        }
        u = &st.phi * &u + &st.psi * &dw;
        if step % config.record_every as u64 == 0 {
            let amp = u.camax();
            if !(amp <= BLOWUP) {
                return Err(Error::UnstableStep { amplitude: amp, t: step as f64 * config.dt });
            }
            rec.push(u.clone());
        }
    }
    Ok(rec)
}

/// Simulates one path from `u(0) = 0`.
pub fn simulate_path(c: &Coefficients, noise: &NoiseSpec, config: &SolverConfig, path: u64) -> Result<PathOutput> {
    config.validate(c)?;
    let steppers = residue_steppers(c, noise, config, config.record_energy)?;
    simulate_with(&steppers, config, path)
}

struct Steppers(BTreeMap<i64, Stepper>);

fn residue_steppers(c: &Coefficients, noise: &NoiseSpec, config: &SolverConfig, all: bool) -> Result<Steppers> {
    let mut map = BTreeMap::new();
    for r in needed_residues(config, all) {
        map.insert(r, stepper(build_class(c, noise, config, r), config.scheme, config.dt)?);
    }
    Ok(Steppers(map))
}

fn simulate_with(steppers: &Steppers, config: &SolverConfig, path: u64) -> Result<PathOutput> {
    let mut stream = NoiseStream::new(config.seed, path);
    let times = config.record_times();
    let mut energy = config.record_energy.then(|| vec![0.0; times.len()]);
    let mut modes: Vec<(i64, Vec<Complex64>)> = config.watch.iter().map(|&m| (m, Vec::new())).collect();
    for (&r, st) in &steppers.0 {
        let rec = run_class(st, config, &mut stream)?;
        if let Some(e) = energy.as_mut() {
            for (slot, v) in e.iter_mut().zip(&rec) {
                *slot += v.norm_squared();
            }
        }
        for (m, traj) in modes.iter_mut() {
            if residue(*m, config.eps) == r {
                let i = st
                    .block
                    .position(*m)
                    .ok_or_else(|| Error::Config(format!("watched mode {m} outside resolution")))?;
                *traj = rec.iter().map(|v| v[i]).collect();
            }
        }
    }
    Ok(PathOutput { times, modes, energy, seed: config.seed, path })
}

/// Reusable simulator for many paths of one configuration.
pub struct PathSimulator {
    config: SolverConfig,
    steppers: Steppers,
}

impl PathSimulator {
    pub fn new(c: &Coefficients, noise: &NoiseSpec, config: &SolverConfig) -> Result<Self> {
        config.validate(c)?;
        let steppers = residue_steppers(c, noise, config, config.record_energy)?;
        Ok(PathSimulator { config: config.clone(), steppers })
    }

    pub fn path(&self, path: u64) -> Result<PathOutput> {
        simulate_with(&self.steppers, &self.config, path)
    }

    /// The multiscale path and the limit driven by the same `ΔW_m`:
    /// `x_m ← e^{−μm²dt}(x_m + c_m ΔW_m)`.
    pub fn coupled(&self, limit: &LimitModel, path: u64) -> Result<(PathOutput, PathOutput)> {
        let fine = self.path(path)?;
        let cfg = &self.config;
        let mut stream = NoiseStream::new(cfg.seed, path);
        let mut modes = Vec::new();
        for &m in &cfg.watch {
            let c = limit.coefficient(m)?;
            let decay = (-limit.rate(m) * cfg.dt).exp();
            let mut x = Complex64::new(0.0, 0.0);
            let mut traj = vec![x];
            for step in 1..=cfg.steps() {
                x = decay * (x + c * stream.increment(step, m, cfg.dt));
                if step % cfg.record_every as u64 == 0 {
                    traj.push(x);
                }
            }
            modes.push((m, traj));
        }
        let coarse = PathOutput { times: fine.times.clone(), modes, energy: None, seed: cfg.seed, path };
        Ok((fine, coarse))
    }
}

pub fn simulate_coupled(
    c: &Coefficients,
    noise: &NoiseSpec,
    config: &SolverConfig,
    limit: &LimitModel,
    path: u64,
) -> Result<(PathOutput, PathOutput)> {
    PathSimulator::new(c, noise, config)?.coupled(limit, path)
}

/// `E|⟨u(t), e_m⟩|²` on a grid, for each watched mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceTable {
    pub times: Vec<f64>,
    /// `(m, variance at each time)`.
    pub modes: Vec<(i64, Vec<f64>)>,
}

impl CovarianceTable {
    pub fn mode(&self, m: i64) -> Option<&[f64]> {
        self.modes.iter().find(|x| x.0 == m).map(|x| x.1.as_slice())
    }
}

/// Exact second moments at `times` (each a multiple of `dt`), without sampling.
///
/// `imex-cn` gives the moments of the discrete scheme itself; `block-exponential`
/// gives the exact continuous-time moments, propagated with a sub-step small
/// enough for the Van Loan exponential to be well conditioned.
pub fn exact_mode_covariance(
    c: &Coefficients,
    noise: &NoiseSpec,
    config: &SolverConfig,
    times: &[f64],
) -> Result<CovarianceTable> {
    config.validate(c)?;
    let mut counts = Vec::with_capacity(times.len());
    for &t in times {
        let s = t / config.dt;
        if s < -1e-9 || (s - s.round()).abs() > 1e-6 * s.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("time {t} is not a multiple of dt = {}", config.dt)));
        }
        counts.push(s.round() as u64);
    }
    if counts.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::GridMismatch("times must be non-decreasing".into()));
    }
    let mut out: Vec<(i64, Vec<f64>)> = config.watch.iter().map(|&m| (m, Vec::new())).collect();
    for r in needed_residues(config, false) {
        let block = build_class(c, noise, config, r);
        let (mut dbl, sub) = match config.scheme {
            Scheme::ImexCn => {
                let (phi, psi) = trapezoid_propagator(&block.generator, Some(&block.noise), config.dt)?;
                let q = &psi * psi.adjoint() * c64(config.dt);
                (CovarianceDoubling::new(phi, q), 1u64)
            }
            Scheme::BlockExponential => {
                let norm = norm_inf(&block.generator) * config.dt;
                let q = if norm > 1.0 { norm.log2().ceil() as u32 } else { 0 };
                let h = config.dt / 2f64.powi(q as i32);
                let gg = &block.noise * block.noise.adjoint();
                let (phi, qh) = van_loan(&block.generator, &gg, h);
                (CovarianceDoubling::new(phi, qh), 1u64 << q)
            }
        };
        let dim = block.wavenumbers.len();
        let mut sigma = CMatrix::zeros(dim, dim);
        let mut done = 0u64;
        let mut snapshots = Vec::with_capacity(counts.len());
        for &n in &counts {
            sigma = dbl.advance(&sigma, (n - done) * sub);
            done = n;
            snapshots.push(sigma.clone());
        }
        for (m, vals) in out.iter_mut() {
            if residue(*m, config.eps) == r {
                let i = block
                    .position(*m)
                    .ok_or_else(|| Error::Config(format!("watched mode {m} outside resolution")))?;
                *vals = snapshots.iter().map(|s| s[(i, i)].re).collect();
            }
        }
    }
    Ok(CovarianceTable { times: times.to_vec(), modes: out })
}

/// Full-resolution reference built from [`apply_generator`] and
/// [`SpectralField::oscillate`], for checking the block solver.
pub mod dense {
    use super::*;

    /// Matrix of `L_ε` on the active wavenumbers, column `j` being `L_ε e_{k_j}`.
    pub fn generator_matrix(c: &Coefficients, eps: CellRatio, n_modes: usize) -> Result<CMatrix> {
        let h = n_modes as i64 / 2 - 1;
        let dim = (2 * h + 1) as usize;
        let mut m = CMatrix::zeros(dim, dim);
        for (j, k) in (-h..=h).enumerate() {
            let col = apply_generator(c, eps, &SpectralField::mode(n_modes, k))?;
            for (i, kk) in (-h..=h).enumerate() {
                m[(i, j)] = col.get(kk);
            }
        }
        Ok(m)
    }

    /// `Σ_k φ(εk) q_k(x/ε) e_k ΔW_k` on the active wavenumbers.
    pub fn noise_vector(
        noise: &NoiseSpec,
        eps: CellRatio,
        n_modes: usize,
        k_max: usize,
        stream: &mut NoiseStream,
        step: u64,
        dt: f64,
    ) -> Result<CVector> {
        let h = n_modes as i64 / 2 - 1;
        let kmax = k_max.min(noise.k_max) as i64;
        let p = eps.cells() as usize;
        let mut acc = SpectralField::zeros(n_modes);
        for k in -kmax..=kmax {
            let q = noise.profile(k);
            let need = p * q.n() + k.unsigned_abs() as usize;
            let big = q.oscillate(eps, k, need.max(n_modes) + (need.max(n_modes) % 2))?;
            let w = noise.smoothing(eps.epsilon(), k);
            acc = acc.add(&big.resample(n_modes).scale(stream.increment(step, k, dt) * w));
        }
        Ok(CVector::from_iterator((2 * h + 1) as usize, (-h..=h).map(|k| acc.get(k))))
    }

    /// Trapezoidal stepping of the full system; returns the state after each step.
    pub fn simulate(
        c: &Coefficients,
        noise: &NoiseSpec,
        config: &SolverConfig,
        path: u64,
    ) -> Result<Vec<CVector>> {
        let a = generator_matrix(c, config.eps, config.n_modes)?;
        let (phi, _) = trapezoid_propagator(&a, None, config.dt)?;
        let n = a.nrows();
        let id = CMatrix::identity(n, n);
        let lu = (&id - &a * c64(0.5 * config.dt)).lu();
        let mut stream = NoiseStream::new(config.seed, path);
        let mut u = CVector::zeros(n);
        let mut out = Vec::new();
        for step in 1..=config.steps() {
            let xi = noise_vector(noise, config.eps, config.n_modes, config.k_max, &mut stream, step, config.dt)?;
            let noise_part = lu.solve(&xi).ok_or_else(|| Error::SolveFailed("dense trapezoid".into()))?;
            u = &phi * &u + noise_part;
            out.push(u.clone());
        }
        Ok(out)
    }
}
