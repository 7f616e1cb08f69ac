//! JSON experiment configuration.

use crate::cell::{CellSolution, Coefficients, DEFAULT_CELL_MODES};
use crate::error::{Error, Result};
use crate::fourier::{CellRatio, SpectralField};
use crate::noise::{Mollifier, NoiseFamily, NoiseSpec};
use crate::solver::{Scheme, SolverConfig};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Fourier coefficient `(k, re, im)`.
pub type Mode = (i64, f64, f64);

fn field(modes: &[Mode]) -> SpectralField {
    let kmax = modes.iter().map(|m| m.0.unsigned_abs() as usize).max().unwrap_or(0);
    let list: Vec<(i64, Complex64)> = modes.iter().map(|&(k, re, im)| (k, Complex64::new(re, im))).collect();
    SpectralField::from_modes(SpectralField::resolution_for(kmax), &list)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    /// `"heat"` or `"cosine-potential"`; when absent `b` and `sigma` are used.
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    /// Constant `σ` for `"heat"`.
    #[serde(default)]
    pub sigma_value: Option<f64>,
    #[serde(default)]
    pub b: Vec<Mode>,
    #[serde(default)]
    pub sigma: Vec<Mode>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub delta_prime: Option<f64>,
    #[serde(default = "default_cell_modes")]
    pub cell_modes: usize,
}

fn default_cell_modes() -> usize {
    DEFAULT_CELL_MODES
}

impl CoefficientsConfig {
    pub fn build(&self) -> Result<Coefficients> {
        let c = match self.builtin.as_deref() {
            Some("heat") => Coefficients::heat(self.sigma_value.unwrap_or(2f64.sqrt())),
            Some("cosine-potential") => Coefficients::cosine_potential(self.amplitude.unwrap_or(1.0)),
            Some(other) => return Err(Error::Config(format!("unknown built-in coefficients {other:?}"))),
            None => {
                if self.sigma.is_empty() {
                    return Err(Error::Config("explicit coefficients need a sigma list".into()));
                }
                Coefficients::new(field(&self.b), field(&self.sigma))
            }
        };
        Ok(match (self.delta, self.delta_prime) {
            (None, None) => c,
            (lo, hi) => {
                let (d, dp) = (lo.unwrap_or(c.delta()), hi.unwrap_or(c.delta_prime()));
                c.with_bounds(d, dp)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// `constant-white`, `power-decay`, `tail-convergent` or `custom`.
    pub family: String,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub profile: Vec<Mode>,
    #[serde(default)]
    pub qbar: Vec<Mode>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub r: Vec<Mode>,
    #[serde(default)]
    pub table: Vec<Vec<Mode>>,
    /// Subtract `⟨p, ρ⟩` from the profile so that every `⟨q_k, ρ⟩` vanishes.
    #[serde(default)]
    pub center: bool,
    #[serde(default)]
    pub k_max: Option<usize>,
    /// Cutoff proportional to the number of cells: `K = k_max_per_cell / ε`.
    #[serde(default)]
    pub k_max_per_cell: Option<usize>,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub mollifier: Option<Mollifier>,
}

impl NoiseConfig {
    pub fn cutoff(&self, eps: CellRatio) -> Result<usize> {
        match (self.k_max, self.k_max_per_cell) {
            (Some(k), None) => Ok(k),
            (None, Some(k)) => Ok(k * eps.cells() as usize),
            (None, None) => Ok(64),
            _ => Err(Error::Config("give either k_max or k_max_per_cell, not both".into())),
        }
    }

    pub fn build(&self, k_max: usize, rho: Option<&SpectralField>) -> Result<NoiseSpec> {
        let centered = |f: SpectralField| -> Result<SpectralField> {
            if !self.center {
                return Ok(f);
            }
            let rho = rho.ok_or_else(|| Error::Config("centering needs the invariant density".into()))?;
            let m = f.inner_product(rho);
            Ok(f.sub(&SpectralField::constant(f.n(), m.re)))
        };
        let family = match self.family.as_str() {
            "constant-white" => NoiseFamily::ConstantWhite,
            "power-decay" => NoiseFamily::PowerDecay { alpha: self.alpha, profile: centered(field(&self.profile))? },
            "tail-convergent" => NoiseFamily::TailConvergent {
                qbar: field(&self.qbar),
                tau: self.tau.ok_or_else(|| Error::Config("tail-convergent needs tau".into()))?,
                r: field(&self.r),
            },
            "custom" => NoiseFamily::Custom {
                alpha: self.alpha,
                qbar: field(&self.qbar),
                table: self.table.iter().map(|t| field(t)).collect(),
            },
            other => return Err(Error::Config(format!("unknown noise family {other:?}"))),
        };
        let spec = NoiseSpec::new(family, k_max)?.with_eta(self.eta)?;
        Ok(match self.mollifier {
            Some(m) => spec.with_mollifier(m),
            None => spec,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Wavenumbers per residue class; `N = modes_per_class / ε`.
    #[serde(default = "default_modes_per_class")]
    pub modes_per_class: usize,
    /// Fixed step; default `1e-3·min(1, 16ε²)`, shrunk so that `T` is a whole number of steps.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    /// When set, `T = t_final_over_mu / μ`.
    #[serde(default)]
    pub t_final_over_mu: Option<f64>,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn default_scheme() -> Scheme {
    Scheme::ImexCn
}

fn default_modes_per_class() -> usize {
    32
}

fn default_t_final() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "d_theta")]
    pub theta_min: f64,
    #[serde(default = "d_r2")]
    pub r2_min: f64,
    #[serde(default = "d_gap")]
    pub final_gap: f64,
    #[serde(default)]
    pub enhancement_fraction: Option<f64>,
    #[serde(default = "d_exp_lo")]
    pub exponent_min: f64,
    #[serde(default = "d_exp_hi")]
    pub exponent_max: f64,
    #[serde(default = "d_bl")]
    pub boundary_rate: f64,
    #[serde(default = "d_factor")]
    pub lambda_factor: f64,
    #[serde(default = "d_tail")]
    pub lambda_tail: f64,
    /// Differences below this multiple of `Λ` count as converged to rounding.
    #[serde(default = "d_floor")]
    pub rounding_floor: f64,
    #[serde(default = "d_mc")]
    pub mc_sigmas: f64,
    /// Relative Cauchy gap allowed by the white-noise tail validator.
    #[serde(default = "d_tail")]
    pub cauchy_tol: f64,
}

fn d_theta() -> f64 {
    0.3
}
fn d_r2() -> f64 {
    0.9
}
fn d_gap() -> f64 {
    0.1
}
fn d_exp_lo() -> f64 {
    0.8
}
fn d_exp_hi() -> f64 {
    1.2
}
fn d_bl() -> f64 {
    0.1
}
fn d_factor() -> f64 {
    1.5
}
fn d_tail() -> f64 {
    0.01
}
fn d_floor() -> f64 {
    1e-13
}
fn d_mc() -> f64 {
    4.0
}

impl Default for Tolerances {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub epsilons: Vec<f64>,
    /// Sobolev index of the error norm; defaults per study.
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default = "default_m_max")]
    pub m_max: i64,
    #[serde(default = "default_watch")]
    pub watch: Vec<i64>,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    /// `weak`, `white-noise` or `smoothed` for variance studies.
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default = "default_bl_window")]
    pub boundary_window: (f64, f64),
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_m_max() -> i64 {
    8
}
fn default_watch() -> Vec<i64> {
    vec![1]
}
fn default_paths() -> usize {
    100
}
fn default_bl_window() -> (f64, f64) {
    (3.0, 12.0)
}
fn default_batches() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub coefficients: CoefficientsConfig,
    pub noise: NoiseConfig,
    #[serde(default = "default_solver")]
    pub solver: SolverSection,
    pub study: StudySection,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_solver() -> SolverSection {
    serde_json::from_str("{}").expect("defaults")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let eps = self.cell_ratios()?;
        if eps.windows(2).any(|w| w[1].cells() <= w[0].cells()) {
            return Err(Error::Config("epsilon list must be strictly decreasing".into()));
        }
        if self.study.paths < 2 {
            return Err(Error::Config("need at least two paths".into()));
        }
        if self.study.batches == 0 {
            return Err(Error::Config("batches must be positive".into()));
        }
        if self.solver.modes_per_class < 4 || self.solver.modes_per_class % 2 != 0 {
            return Err(Error::Config("modes_per_class must be even and at least 4".into()));
        }
        Ok(())
    }

    pub fn cell_ratios(&self) -> Result<Vec<CellRatio>> {
        if self.study.epsilons.is_empty() {
            return Err(Error::Config("epsilon list is empty".into()));
        }
        self.study.epsilons.iter().map(|&e| CellRatio::from_epsilon(e)).collect()
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn cell(&self, c: &Coefficients) -> Result<CellSolution> {
        CellSolution::solve(c, self.coefficients.cell_modes)
    }

    pub fn horizon(&self, mu: f64) -> f64 {
        match self.solver.t_final_over_mu {
            Some(x) => x / mu,
            None => self.solver.t_final,
        }
    }

    /// Solver settings at one `ε`.
    pub fn solver_config(&self, eps: CellRatio, mu: f64, watch: Vec<i64>) -> Result<SolverConfig> {
        let t = self.horizon(mu);
        let e = eps.epsilon();
        let target = self.solver.dt.unwrap_or(1e-3 * (16.0 * e * e).min(1.0));
        let steps = (t / target - 1e-9).ceil().max(1.0);
        Ok(SolverConfig {
            eps,
            n_modes: self.solver.modes_per_class * eps.cells() as usize,
            dt: t / steps,
            t_final: t,
            k_max: self.noise.cutoff(eps)?,
            watch,
            seed: self.study.seed,
            scheme: self.solver.scheme,
            record_every: self.solver.record_every,
            record_energy: false,
        })
    }
}
