//! Dry-run validation: schema plus physics sanity checks, no computation.

use crate::config::{AmplitudeParams, LimitParams, PotentialParams, RunConfig, Scenario};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub field: String,
    pub severity: Severity,
    pub message: String,
}

fn error(out: &mut Vec<Violation>, field: &str, message: String) {
    out.push(Violation { field: field.into(), severity: Severity::Error, message });
}

pub fn validate(cfg: &RunConfig) -> Vec<Violation> {
    let mut out = Vec::new();

    match cfg.scenario {
        Scenario::SlabConvergence => {
            let p = &cfg.slab_convergence;
            if p.couplings.len() < 4 {
                error(&mut out, "slab_convergence.couplings", "need at least 4 couplings for a fit".into());
            }
            if p.couplings.iter().any(|&l| l <= 0.0) {
                error(&mut out, "slab_convergence.couplings", "couplings must be positive".into());
            }
            if p.particle_dim * 2usize.pow(p.targets as u32) > 4096 {
                error(
                    &mut out,
                    "slab_convergence.targets",
                    "total tensor dimension exceeds the oracle cap 4096".into(),
                );
            }
        }
        Scenario::Lindblad => {
            let p = &cfg.lindblad;
            if p.dt <= 0.0 || p.t_final <= 0.0 {
                error(&mut out, "lindblad.dt", "dt and t_final must be positive".into());
            }
            if p.coupling.abs() > 1.0 {
                out.push(Violation {
                    field: "lindblad.coupling".into(),
                    severity: Severity::Warning,
                    message: "coupling above 1 leaves the weak-interaction regime".into(),
                });
            }
        }
        Scenario::Gas => {
            let p = &cfg.gas;
            for &r in &p.mass_ratios {
                let regime_broken = match p.limit {
                    LimitParams::HeavyTarget => r >= 1.0,
                    LimitParams::HeavyParticle => r <= 1.0,
                };
                if regime_broken {
                    out.push(Violation {
                        field: "gas.mass_ratios".into(),
                        severity: Severity::Warning,
                        message: format!(
                            "mass ratio {r} is outside the {:?} expansion regime",
                            p.limit
                        ),
                    });
                }
            }
            let dk = p.kernel_grid_k_max / p.kernel_grid_half_points as f64;
            let spacing = p.v1.abs() * dk;
            // the run halves eta for the convergence pair; both must resolve
            if p.eta / 2.0 < 2.0 * spacing {
                error(
                    &mut out,
                    "gas.eta",
                    format!(
                        "eta/2 = {} below twice the kernel energy-grid spacing {spacing:.3e}; \
                         the broadened delta is unresolved",
                        p.eta / 2.0
                    ),
                );
            }
            if p.eta <= 0.0 {
                error(&mut out, "gas.eta", "eta must be positive".into());
            }
            if let PotentialParams::Table { path } = &p.potential {
                if !path.exists() {
                    error(&mut out, "gas.potential.path", format!("{} does not exist", path.display()));
                }
            }
            if p.amplitude == AmplitudeParams::FirstBorn && p.mass_ratios.len() >= 2 {
                out.push(Violation {
                    field: "gas.amplitude".into(),
                    severity: Severity::Warning,
                    message: "first-Born amplitudes are mass-independent; the mass-ratio \
                              sweep will be flat"
                        .into(),
                });
            }
        }
        Scenario::Young => {
            let p = &cfg.young;
            if p.im_k_prime < 0.0 {
                error(&mut out, "young.im_k_prime", "Im(k') < 0 is unphysical gain".into());
            }
            if p.screen_distance < 20.0 * p.slit_separation {
                error(&mut out, "young.screen_distance", "far field requires L >> D (at least 20 D)".into());
            }
            if p.points_per_period < 8 {
                error(&mut out, "young.points_per_period", "need at least 8 points per fringe".into());
            }
        }
        Scenario::Toy => {}
    }
    out
}

pub fn has_errors(violations: &[Violation]) -> bool {
    violations.iter().any(|v| v.severity == Severity::Error)
}
