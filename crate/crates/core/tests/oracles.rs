//! Independent oracles for the cell problem and the multiscale solver.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use spde_homog::cell::{mu_decay_oracle, CellSolution, Coefficients};
use spde_homog::fourier::{CellRatio, SpectralField};
use spde_homog::limit::{ou_exact_sample, LimitModel, LimitRule};
use spde_homog::linalg::c64;
use spde_homog::noise::{NoiseFamily, NoiseSpec};
use spde_homog::rng::NoiseStream;
use spde_homog::solver::{
    apply_generator, build_blocks, dense, exact_mode_covariance, residue, PathSimulator, Scheme, SolverConfig,
};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// `I_n(x)` from its power series.
fn bessel_i(n: u32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(|j| j as f64).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= (x / 2.0).powi(2) / (k as f64 * (k + n) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Fourier coefficients of `f` by a direct DFT on `m` points.
fn dft(f: impl Fn(f64) -> f64, m: usize, kmax: i64) -> Vec<(i64, Complex64)> {
    let xs: Vec<f64> = (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect();
    (-kmax..=kmax)
        .map(|k| {
            let s: Complex64 =
                xs.iter().map(|&x| Complex64::from_polar(f(x), -(k as f64) * x)).sum::<Complex64>() / m as f64;
            (k, s)
        })
        .collect()
}

fn gibbs_case(potential: &SpectralField, sigma: f64) {
    let c = Coefficients::gradient(potential, sigma);
    let cell = CellSolution::solve(&c, 64).unwrap();
    let v = |x: f64| potential.eval(x).re;
    let w = 2.0 / (sigma * sigma);
    let z_minus = dft(|x| (-w * v(x)).exp(), 512, 0)[0].1.re;
    let z_plus = dft(|x| (w * v(x)).exp(), 512, 0)[0].1.re;
    let want = dft(|x| (-w * v(x)).exp() / z_minus, 512, 31);
    let err: f64 = want.iter().map(|(k, c)| (cell.rho.get(*k) - c).norm_sqr()).sum::<f64>().sqrt();
    assert!(err < 1e-8, "Gibbs density error {err:e}");
    let mu = 0.5 * sigma * sigma / (z_minus * z_plus);
    assert!((cell.mu - mu).abs() < 1e-8 * mu, "mu {} vs {mu}", cell.mu);
}

#[test]
fn series_bessel_matches_known_value() {
    assert!((bessel_i(0, 2.0) - 2.2795853023360673).abs() < 1e-14);
}

#[test]
fn gibbs_density_and_harmonic_mean_diffusivity() {
    let cosx = SpectralField::from_modes(4, &[(1, c64(0.5)), (-1, c64(0.5))]);
    gibbs_case(&cosx, 1.0);
    let s2 = SpectralField::from_modes(8, &[(2, Complex64::new(0.0, -0.25)), (-2, Complex64::new(0.0, 0.25))]);
    gibbs_case(&s2, 1.2);
    let mixed = SpectralField::from_modes(
        8,
        &[(1, Complex64::new(0.3, 0.1)), (-1, Complex64::new(0.3, -0.1)), (3, c64(0.1)), (-3, c64(0.1))],
    );
    gibbs_case(&mixed, 0.9);
}

#[test]
fn cosine_density_is_modified_bessel_ratio() {
    let cell = CellSolution::solve(&Coefficients::cosine_potential(1.0), 64).unwrap();
    let i0 = bessel_i(0, 2.0);
    for l in 0..8u32 {
        let want = if l % 2 == 0 { 1.0 } else { -1.0 } * bessel_i(l, 2.0) / i0;
        assert!((cell.rho.get(l as i64).re - want).abs() < 1e-12, "l = {l}");
    }
}

/// Spectrum of `L = ½∂² − V′∂` via the conjugate Schrödinger operator
/// `½∂² − ½(V′² − V″)`, which is real symmetric in the Fourier basis.
#[test]
fn spectral_gap_matches_schrodinger_eigenvalue() {
    let cell = CellSolution::solve(&Coefficients::cosine_potential(1.0), 64).unwrap();
    // V = cos x: ½(sin²x + cos x) = ¼ − ⅛(e_2 + e_{−2}) + ¼(e_1 + e_{−1}).
    let h = 40i64;
    let n = (2 * h + 1) as usize;
    let u = |d: i64| match d.abs() {
        0 => 0.25,
        1 => 0.25,
        2 => -0.125,
        _ => 0.0,
    };
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (ki, kj) = (i as i64 - h, j as i64 - h);
            s[(i, j)] = -u(ki - kj) - if i == j { 0.5 * (ki * ki) as f64 } else { 0.0 };
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    assert!(ev[0].abs() < 1e-12, "ground state {}", ev[0]);
    let omega = -ev[1];
    assert!((cell.omega - omega).abs() < 1e-4 * omega, "omega {} vs {omega}", cell.omega);
}

#[test]
fn decay_oracle_agrees_with_corrector_formula_on_heat_cell() {
    let c = Coefficients::heat(1.3);
    let cell = CellSolution::solve(&c, 16).unwrap();
    let eps = CellRatio::from_cells(4).unwrap();
    let fitted = mu_decay_oracle(&c, &cell.rho, eps, 1, 5.0, 16).unwrap();
    assert!((fitted - cell.mu).abs() < 0.02 * cell.mu);
}

#[test]
fn fast_time_rescaling_of_the_zero_class() {
    let c = Coefficients::cosine_potential(1.0);
    let eps = CellRatio::from_cells(4).unwrap();
    let one = CellRatio::from_cells(1).unwrap();
    let js: Vec<i64> = (-12..12).collect();
    let ks: Vec<i64> = js.iter().map(|j| 4 * j).collect();
    let rho = CellSolution::solve(&c, 64).unwrap().rho;
    let v0 = nalgebra::DVector::from_iterator(js.len(), js.iter().map(|&j| rho.get(j) + c64(0.1 * j as f64)));
    let t = 0.01;
    let fast = (c.generator_block(eps, &ks) * c64(t)).exp() * &v0;
    let slow = (c.generator_block(one, &js) * c64(t * 16.0)).exp() * &v0;
    assert!((fast - slow).norm() < 1e-10 * v0.norm());
}

fn config(p: u32, n: usize, k: usize, watch: Vec<i64>) -> SolverConfig {
    SolverConfig {
        eps: CellRatio::from_cells(p).unwrap(),
        n_modes: n,
        dt: 1e-3,
        t_final: 0.05,
        k_max: k,
        watch,
        seed: 3,
        scheme: Scheme::ImexCn,
        record_every: 1,
        record_energy: false,
    }
}

fn random_field(n: usize, seed: u64) -> SpectralField {
    let mut s = NoiseStream::new(seed, 0);
    let h = n as i64 / 2 - 1;
    let modes: Vec<(i64, Complex64)> = (-h..=h).map(|k| (k, s.standard(1, k + 1000))).collect();
    SpectralField::from_modes(n, &modes)
}

#[test]
fn generator_matches_entrywise_galerkin_matrix() {
    let c = Coefficients::cosine_potential(1.0);
    let eps = CellRatio::from_cells(2).unwrap();
    let n = 32;
    let u = random_field(n, 5);
    let lu = apply_generator(&c, eps, &u).unwrap();
    let h = n as i64 / 2 - 1;
    let ks: Vec<i64> = (-h..=h).collect();
    let a = c.generator_block(eps, &ks);
    for (i, &k) in ks.iter().enumerate() {
        let want: Complex64 = ks.iter().enumerate().map(|(j, &kj)| a[(i, j)] * u.get(kj)).sum();
        assert!((lu.get(k) - want).norm() < 1e-10 * (1.0 + want.norm()), "k = {k}");
    }
}

#[test]
fn generator_examples() {
    let heat = Coefficients::heat(2f64.sqrt());
    let one = CellRatio::from_cells(1).unwrap();
    let out = apply_generator(&heat, one, &SpectralField::mode(16, 3)).unwrap();
    assert!((out.get(3) + 9.0).norm() < 1e-12);
    let c = Coefficients::cosine_potential(1.0);
    let eps = CellRatio::from_cells(4).unwrap();
    let out = apply_generator(&c, eps, &SpectralField::constant(64, 1.0)).unwrap();
    assert!(out.norm() < 1e-12);
}

#[test]
fn blocks_reassemble_the_dense_operator() {
    let c = Coefficients::cosine_potential(1.0);
    let noise = NoiseSpec::new(NoiseFamily::ConstantWhite, 8).unwrap();
    for p in [1u32, 2, 4] {
        let cfg = config(p, 64, 8, vec![0]);
        let blocks = build_blocks(&c, &noise, &cfg);
        let dense = dense::generator_matrix(&c, cfg.eps, cfg.n_modes).unwrap();
        let diff = (blocks.assemble() - &dense).camax();
        assert!(diff < 1e-10 * dense.camax(), "p = {p}: {diff:e}");
    }
}

#[test]
fn mirrored_classes_are_conjugate() {
    let c = Coefficients::cosine_potential(1.0);
    let noise = NoiseSpec::new(NoiseFamily::ConstantWhite, 8).unwrap();
    let cfg = config(4, 64, 8, vec![0]);
    let blocks = build_blocks(&c, &noise, &cfg);
    let (b1, b3) = (blocks.block(1).unwrap(), blocks.block(3).unwrap());
    let n = b1.wavenumbers.len();
    assert_eq!(n, b3.wavenumbers.len());
    for i in 0..n {
        let i3 = b3.position(-b1.wavenumbers[i]).unwrap();
        for j in 0..n {
            let j3 = b3.position(-b1.wavenumbers[j]).unwrap();
            assert!((b1.generator[(i, j)] - b3.generator[(i3, j3)].conj()).norm() < 1e-12);
        }
    }
}

#[test]
fn block_structure_examples() {
    let noise = NoiseSpec::new(NoiseFamily::ConstantWhite, 4).unwrap();
    let heat = Coefficients::heat(1.0);
    for b in build_blocks(&heat, &noise, &config(4, 64, 4, vec![0])).blocks {
        let g = &b.generator;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                assert!(i == j || g[(i, j)].norm() == 0.0);
            }
        }
    }
    let sinx = SpectralField::from_modes(4, &[(1, Complex64::new(0.0, -0.5)), (-1, Complex64::new(0.0, 0.5))]);
    let c = Coefficients::new(sinx, SpectralField::constant(4, 1.0));
    for b in build_blocks(&c, &noise, &config(4, 64, 4, vec![0])).blocks {
        for (i, &ki) in b.wavenumbers.iter().enumerate() {
            for (j, &kj) in b.wavenumbers.iter().enumerate() {
                if b.generator[(i, j)].norm() > 0.0 {
                    assert!(ki == kj || (ki - kj).abs() == 4, "entry at offset {}", ki - kj);
                }
            }
        }
    }
    let one = config(1, 16, 4, vec![0]);
    let ops = build_blocks(&c, &noise, &one);
    assert_eq!(ops.blocks.len(), 1);
    let dense = dense::generator_matrix(&c, one.eps, 16).unwrap();
    assert!((ops.assemble() - dense).camax() < 1e-12);
}

#[test]
fn block_solver_matches_dense_trapezoid_pathwise() {
    let c = Coefficients::cosine_potential(1.0);
    let noise = NoiseSpec::new(NoiseFamily::ConstantWhite, 12).unwrap();
    let cfg = config(4, 64, 12, vec![-1, 0, 1]);
    let out = PathSimulator::new(&c, &noise, &cfg).unwrap().path(9).unwrap();
    let full = dense::simulate(&c, &noise, &cfg, 9).unwrap();
    let h = 31i64;
    let mut worst: f64 = 0.0;
    for (m, traj) in &out.modes {
        for (step, u) in full.iter().enumerate() {
            worst = worst.max((traj[step + 1] - u[(m + h) as usize]).norm());
        }
    }
    assert!(worst < 1e-8, "pathwise gap {worst:e}");
}

#[test]
fn zero_noise_gives_zero_solution() {
    let c = Coefficients::cosine_potential(1.0);
    let zero = SpectralField::zeros(4);
    let noise = NoiseSpec::new(NoiseFamily::PowerDecay { alpha: 0.75, profile: zero }, 8).unwrap();
    let cfg = config(4, 64, 8, vec![-1, 0, 1]);
    let out = PathSimulator::new(&c, &noise, &cfg).unwrap().path(0).unwrap();
    assert!(out.modes.iter().all(|(_, t)| t.iter().all(|z| z.norm() == 0.0)));
    let cell = CellSolution::solve(&c, 64).unwrap();
    let limit = LimitModel::build(LimitRule::Strong, &noise, &cell, 1).unwrap();
    let (fine, coarse) = PathSimulator::new(&c, &noise, &cfg).unwrap().coupled(&limit, 0).unwrap();
    assert_eq!(fine.modes, coarse.modes);
}

fn single_mode_noise(k_max: usize) -> NoiseSpec {
    let zero = SpectralField::zeros(4);
    let table = vec![zero.clone(), SpectralField::constant(4, 1.0)];
    NoiseSpec::new(NoiseFamily::Custom { alpha: 0.0, qbar: zero, table }, k_max).unwrap()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn single_mode_is_an_ou_process() {
    let c = Coefficients::heat(2f64.sqrt());
    let noise = single_mode_noise(4);
    let mut cfg = config(4, 16, 4, vec![1]);
    cfg.scheme = Scheme::BlockExponential;
    cfg.t_final = 5.0;
    cfg.record_every = 5000;
    let sim = PathSimulator::new(&c, &noise, &cfg).unwrap();
    let last: Vec<f64> =
        (0..2000).map(|p| sim.path(p).unwrap().mode(1).unwrap().last().unwrap().norm_sqr()).collect();
    let (m, se) = mean_se(&last);
    assert!((m - 0.5).abs() < 3.0 * se, "variance {m} ± {se}");
    let times = [0.0, 0.5, 1.0, 5.0];
    let cov = exact_mode_covariance(&c, &noise, &cfg, &times).unwrap();
    for (t, v) in times.iter().zip(cov.mode(1).unwrap()) {
        assert!((v - (1.0 - (-2.0 * t).exp()) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn trivial_cell_coupling_converges_with_dt() {
    let c = Coefficients::heat(2f64.sqrt());
    let noise = single_mode_noise(4);
    let cell = CellSolution::solve(&c, 16).unwrap();
    let limit = LimitModel::build(LimitRule::Strong, &noise, &cell, 1).unwrap();
    let gap = |dt: f64| {
        let mut cfg = config(4, 16, 4, vec![1]);
        cfg.dt = dt;
        cfg.t_final = 1.0;
        let sim = PathSimulator::new(&c, &noise, &cfg).unwrap();
        let d: Vec<f64> = (0..50)
            .map(|p| {
                let (a, b) = sim.coupled(&limit, p).unwrap();
                a.mode(1).unwrap().iter().zip(b.mode(1).unwrap()).map(|(x, y)| (x - y).norm_sqr()).fold(0.0, f64::max)
            })
            .collect();
        mean_se(&d).0
    };
    let (g1, g2) = (gap(0.02), gap(0.005));
    assert!(g2 < 0.25 * g1, "{g1:e} -> {g2:e}");
}

#[test]
fn paths_are_real_and_conjugate() {
    let c = Coefficients::cosine_potential(1.0);
    let noise = NoiseSpec::new(NoiseFamily::ConstantWhite, 16).unwrap();
    let mut cfg = config(8, 128, 16, vec![-3, -1, 0, 1, 3]);
    cfg.dt = 1e-4;
    cfg.t_final = 0.02;
    let out = PathSimulator::new(&c, &noise, &cfg).unwrap().path(4).unwrap();
    assert!(out.mode(0).unwrap().iter().all(|z| z.im.abs() < 1e-10 * (1.0 + z.norm())));
    for m in [1, 3] {
        let (a, b) = (out.mode(m).unwrap(), out.mode(-m).unwrap());
        assert!(a.iter().zip(b).all(|(x, y)| (x - y.conj()).norm() < 1e-10 * (1.0 + x.norm())));
    }
    assert!(out.modes.iter().all(|(_, t)| t[0].norm() == 0.0));
}

#[test]
fn exact_covariance_matches_monte_carlo() {
    let c = Coefficients::cosine_potential(1.0);
    let noise = NoiseSpec::new(NoiseFamily::ConstantWhite, 8).unwrap();
    let mut cfg = config(4, 64, 8, vec![1]);
    cfg.t_final = 1.0;
    cfg.record_every = 1000;
    let sim = PathSimulator::new(&c, &noise, &cfg).unwrap();
    let last: Vec<f64> =
        (0..2000).map(|p| sim.path(p).unwrap().mode(1).unwrap().last().unwrap().norm_sqr()).collect();
    let (m, se) = mean_se(&last);
    let exact = exact_mode_covariance(&c, &noise, &cfg, &[1.0]).unwrap().mode(1).unwrap()[0];
    assert!((m - exact).abs() <= 4.0 * se, "MC {m} ± {se} vs exact {exact}");
}

#[test]
fn crank_nicolson_covariance_is_second_order() {
    let c = Coefficients::cosine_potential(1.0);
    let noise = NoiseSpec::new(NoiseFamily::ConstantWhite, 8).unwrap();
    let var = |dt: f64| {
        let mut cfg = config(4, 32, 8, vec![1]);
        cfg.dt = dt;
        cfg.t_final = 1.0;
        exact_mode_covariance(&c, &noise, &cfg, &[1.0]).unwrap().mode(1).unwrap()[0]
    };
    let (a, b, d) = (var(4e-3), var(2e-3), var(1e-3));
    let ratio = (a - b) / (b - d);
    assert!((3.0..=5.0).contains(&ratio), "refinement ratio {ratio}");
}

#[test]
fn heat_energy_identity() {
    let c = Coefficients::heat(2f64.sqrt());
    let k = 8usize;
    let noise = NoiseSpec::new(NoiseFamily::ConstantWhite, k).unwrap();
    let watch: Vec<i64> = (-(k as i64)..=k as i64).collect();
    let mut cfg = config(32, 96, k, watch.clone());
    cfg.scheme = Scheme::BlockExponential;
    cfg.t_final = 12.0;
    cfg.dt = 0.01;
    let cov = exact_mode_covariance(&c, &noise, &cfg, &[12.0]).unwrap();
    let total: f64 = watch.iter().filter(|&&m| m != 0).map(|&m| cov.mode(m).unwrap()[0]).sum();
    let want: f64 = watch.iter().filter(|&&m| m != 0).map(|&m| 0.5 / (m * m) as f64).sum();
    assert!((total - want).abs() < 1e-9 * want, "{total} vs {want}");
    assert!((cov.mode(0).unwrap()[0] - 12.0).abs() < 1e-9);
}

#[test]
fn exact_sampler_monte_carlo() {
    let mut coeffs = BTreeMap::new();
    coeffs.insert(1, c64(1.0));
    let model = LimitModel::new(1.0, LimitRule::Strong, coeffs);
    let times = [0.0, 0.7, 2.0];
    let last: Vec<f64> = (0..10_000)
        .map(|p| ou_exact_sample(&model, 1, &times, &mut NoiseStream::new(1, p)).unwrap()[2].norm_sqr())
        .collect();
    let (m, se) = mean_se(&last);
    assert!((m - (1.0 - (-4.0f64).exp()) / 2.0).abs() < 3.0 * se);
}

#[test]
fn residue_helper() {
    let eps = CellRatio::from_cells(4).unwrap();
    assert_eq!(residue(-1, eps), 3);
    assert_eq!(residue(5, eps), 1);
}
