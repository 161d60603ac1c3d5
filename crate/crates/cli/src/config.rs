//! Strict TOML configuration schema. Unknown keys are rejected everywhere;
//! the sha256 of the raw config file is echoed into every output.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mflab::hartree::{uniform_state, HartreeMethod};
use mflab::linalg::{C64, CMat};
use mflab::space::{
    make_fourier_mode_space, make_grid_space, two_mode_space, KernelSpec, Observable,
    SingleParticleSpace,
};
use mflab::{MflabError, Result};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceConfig,
    #[serde(default)]
    pub hartree: HartreeConfig,
    #[serde(default)]
    pub bogoliubov: BogoliubovConfig,
    #[serde(default)]
    pub observables: Vec<ObservableConfig>,
    #[serde(default)]
    pub study: StudyConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// "two-mode", "fourier", or "grid".
    pub kind: String,
    pub eps: Option<f64>,
    pub coupling: Option<f64>,
    pub length: Option<f64>,
    pub points: Option<usize>,
    pub k_max: Option<i64>,
    pub kernel: Option<KernelConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// "zero", "gaussian", "cosine", or "tabulated".
    pub kind: String,
    pub v0: Option<f64>,
    pub sigma: Option<f64>,
    pub n: Option<i64>,
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HartreeConfig {
    pub t_final: f64,
    pub dt: f64,
    /// "strang" or "rk4".
    pub method: String,
    /// Explicit initial state as [re, im] pairs; defaults to the space's
    /// uniform state.
    pub initial: Option<Vec<[f64; 2]>>,
}

impl Default for HartreeConfig {
    fn default() -> Self {
        HartreeConfig { t_final: 1.0, dt: 1e-3, method: "rk4".into(), initial: None }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BogoliubovConfig {
    pub dt: f64,
    /// "rk4" or "midpoint-magnus".
    pub integrator: String,
}

impl Default for BogoliubovConfig {
    fn default() -> Self {
        BogoliubovConfig { dt: 1e-3, integrator: "midpoint-magnus".into() }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    pub label: Option<String>,
    /// Row-major Hermitian matrix, entries as [re, im].
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Particle numbers for N-scans.
    pub n_list: Option<Vec<usize>>,
    /// Evaluation times; must be multiples of the Bogoliubov step.
    pub times: Option<Vec<f64>>,
    /// Points excluded at the small-N end of rate fits.
    pub skip_first: Option<usize>,
    /// Half-width of the tau tensor grid (default 3.0).
    pub tau_range: Option<f64>,
    /// Points per tau axis (default 13).
    pub tau_points: Option<usize>,
    /// Berry-Esseen interval [alpha, beta].
    pub interval: Option<[f64; 2]>,
    /// Single evaluation time (fluctuation/crosscheck studies).
    pub t: Option<f64>,
    /// Step for the quadratic limit flow; defaults to the Bogoliubov step.
    pub dt_quad: Option<f64>,
    /// Truncation ladder for the crosscheck study.
    pub n_max_list: Option<Vec<usize>>,
    pub xi_n_list: Option<Vec<usize>>,
    pub xi_l_max: Option<usize>,
    /// Acceptance thresholds; a study fails (exit 2) when violated.
    pub slope_max: Option<f64>,
    pub slope_min: Option<f64>,
    pub residual_max: Option<f64>,
    pub r12_max: Option<f64>,
    pub r3_max: Option<f64>,
    pub deviation_max: Option<f64>,
}

/// Parse and hash a config file. Errors name the path (missing file) or the
/// offending key (schema violation).
pub fn load_config(path: &Path) -> Result<(RunConfig, String)> {
    let raw = std::fs::read_to_string(path).map_err(|e| {
        MflabError::Config(format!("cannot read config file '{}': {e}", path.display()))
    })?;
    let cfg: RunConfig = toml::from_str(&raw)
        .map_err(|e| MflabError::Config(format!("{}: {e}", path.display())))?;
    let hash = format!("{:x}", Sha256::digest(raw.as_bytes()));
    Ok((cfg, hash))
}

pub fn build_space(cfg: &SpaceConfig) -> Result<SingleParticleSpace> {
    let need = |opt: Option<f64>, key: &str| {
        opt.ok_or_else(|| MflabError::Config(format!("space.{key} is required for kind '{}'", cfg.kind)))
    };
    match cfg.kind.as_str() {
        "two-mode" => Ok(two_mode_space(need(cfg.eps, "eps")?, need(cfg.coupling, "coupling")?)),
        "fourier" => {
            let k_max = cfg
                .k_max
                .ok_or_else(|| MflabError::Config("space.k_max is required for kind 'fourier'".into()))?;
            make_fourier_mode_space(need(cfg.length, "length")?, k_max, &build_kernel(cfg)?)
        }
        "grid" => {
            let points = cfg
                .points
                .ok_or_else(|| MflabError::Config("space.points is required for kind 'grid'".into()))?;
            make_grid_space(1, points, need(cfg.length, "length")?, &build_kernel(cfg)?)
        }
        other => Err(MflabError::Config(format!(
            "unknown space.kind '{other}' (expected two-mode, fourier, or grid)"
        ))),
    }
}

fn build_kernel(cfg: &SpaceConfig) -> Result<KernelSpec> {
    let k = match &cfg.kernel {
        Some(k) => k,
        None => return Ok(KernelSpec::Zero),
    };
    let need = |opt: Option<f64>, key: &str| {
        opt.ok_or_else(|| {
            MflabError::Config(format!("space.kernel.{key} is required for kind '{}'", k.kind))
        })
    };
    match k.kind.as_str() {
        "zero" => Ok(KernelSpec::Zero),
        "gaussian" => Ok(KernelSpec::Gaussian { v0: need(k.v0, "v0")?, sigma: need(k.sigma, "sigma")? }),
        "cosine" => Ok(KernelSpec::Cosine {
            v0: need(k.v0, "v0")?,
            n: k.n.ok_or_else(|| MflabError::Config("space.kernel.n is required for kind 'cosine'".into()))?,
        }),
        "tabulated" => Ok(KernelSpec::Tabulated(k.values.clone().ok_or_else(|| {
            MflabError::Config("space.kernel.values is required for kind 'tabulated'".into())
        })?)),
        other => Err(MflabError::Config(format!("unknown space.kernel.kind '{other}'"))),
    }
}

pub fn initial_state(space: &SingleParticleSpace, cfg: &HartreeConfig) -> Result<Vec<C64>> {
    match &cfg.initial {
        None => Ok(uniform_state(space)),
        Some(entries) => {
            if entries.len() != space.dim {
                return Err(MflabError::Config(format!(
                    "hartree.initial has {} entries, space has dimension {}",
                    entries.len(),
                    space.dim
                )));
            }
            let phi: Vec<C64> = entries.iter().map(|&[re, im]| C64::new(re, im)).collect();
            let nrm = space.norm(&phi);
            if (nrm - 1.0).abs() > 1e-8 {
                return Err(MflabError::Config(format!(
                    "hartree.initial has norm {nrm:.10}, expected 1"
                )));
            }
            Ok(phi.iter().map(|&c| c / nrm).collect())
        }
    }
}

pub fn hartree_method(cfg: &HartreeConfig) -> Result<HartreeMethod> {
    cfg.method.parse()
}

pub fn build_observables(cfg: &RunConfig, m: usize) -> Result<Vec<Observable>> {
    cfg.observables
        .iter()
        .map(|o| {
            if o.matrix.len() != m || o.matrix.iter().any(|row| row.len() != m) {
                return Err(MflabError::Config(format!(
                    "observable '{}' is not {m}x{m}",
                    o.label.as_deref().unwrap_or("<unlabeled>")
                )));
            }
            let mut mat = CMat::zeros(m);
            for (i, row) in o.matrix.iter().enumerate() {
                for (j, &[re, im]) in row.iter().enumerate() {
                    mat[(i, j)] = C64::new(re, im);
                }
            }
            Observable::new(mat, o.label.clone())
        })
        .collect()
}
