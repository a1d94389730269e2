//! Run configuration: a single TOML file selects a scenario and its
//! parameters. Unknown keys are rejected so typos surface as field-level
//! errors.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Toy,
    SlabConvergence,
    Lindblad,
    Gas,
    Young,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scenario::Toy => "toy",
            Scenario::SlabConvergence => "slab-convergence",
            Scenario::Lindblad => "lindblad",
            Scenario::Gas => "gas",
            Scenario::Young => "young",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Seed for randomized fixtures; identical config + seed reproduces the
    /// numeric outputs byte for byte.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub slab_convergence: SlabConvergenceParams,
    #[serde(default)]
    pub lindblad: LindbladParams,
    #[serde(default)]
    pub gas: GasParams,
    #[serde(default)]
    pub young: YoungParams,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlabConvergenceParams {
    pub particle_dim: usize,
    pub targets: usize,
    pub couplings: Vec<f64>,
}

impl Default for SlabConvergenceParams {
    fn default() -> Self {
        Self { particle_dim: 8, targets: 2, couplings: vec![0.02, 0.04, 0.08, 0.16] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LindbladParams {
    pub particle_dim: usize,
    pub targets: usize,
    pub coupling: f64,
    pub t_final: f64,
    pub dt: f64,
    pub save_every: usize,
    /// Also integrate the coherent/mixed split.
    pub split: bool,
}

impl Default for LindbladParams {
    fn default() -> Self {
        Self {
            particle_dim: 4,
            targets: 2,
            coupling: 0.35,
            t_final: 2.0,
            dt: 2e-3,
            save_every: 50,
            split: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum PotentialParams {
    Contact { strength: f64 },
    Gaussian { strength: f64, width: f64 },
    Yukawa { strength: f64, range: f64 },
    /// CSV file with a q,re,im header.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeParams {
    FirstBorn,
    LippmannSchwinger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitParams {
    HeavyTarget,
    HeavyParticle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasParams {
    /// m1/m2 values to sweep (the first is also used for the point reports).
    pub mass_ratios: Vec<f64>,
    pub k: f64,
    pub v1: f64,
    pub density: f64,
    pub grid_k_max: f64,
    pub grid_half_points: usize,
    pub target_grid_k_max: f64,
    pub target_grid_half_points: usize,
    pub eta: f64,
    pub ls_eta: f64,
    pub fd_step: Option<f64>,
    /// Coarser grid used for the decoherence-kernel reports (the amplitude
    /// sweep wants a fine quadrature grid, the kernel wants a small one).
    pub kernel_grid_k_max: f64,
    pub kernel_grid_half_points: usize,
    pub potential: PotentialParams,
    pub amplitude: AmplitudeParams,
    pub limit: LimitParams,
}

impl Default for GasParams {
    fn default() -> Self {
        Self {
            mass_ratios: vec![0.01, 0.02, 0.05, 0.1],
            k: 10.0,
            v1: 10.0,
            density: 0.01,
            grid_k_max: 60.0,
            grid_half_points: 6000,
            target_grid_k_max: 4.0,
            target_grid_half_points: 40,
            eta: 2.0,
            ls_eta: 0.4,
            fd_step: Some(1e-3),
            kernel_grid_k_max: 20.0,
            kernel_grid_half_points: 1000,
            potential: PotentialParams::Contact { strength: 0.05 },
            amplitude: AmplitudeParams::LippmannSchwinger,
            limit: LimitParams::HeavyTarget,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct YoungParams {
    pub slit_separation: f64,
    pub screen_distance: f64,
    pub wavenumber: f64,
    pub re_k_prime: f64,
    pub im_k_prime: f64,
    pub points_per_period: usize,
    pub window_periods: f64,
}

impl Default for YoungParams {
    fn default() -> Self {
        Self {
            slit_separation: 1.0,
            screen_distance: 1000.0,
            wavenumber: 2.0,
            re_k_prime: 2.0,
            im_k_prime: 5e-4,
            points_per_period: 64,
            window_periods: 10.0,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config error: {e}"))
    }
}
