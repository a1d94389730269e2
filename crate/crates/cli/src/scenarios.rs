//! Scenario implementations: each writes plot-ready CSV files plus a
//! machine-readable report.json into the run directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use collisim::collision::CollisionMode;
use collisim::gas::{
    decoherence_kernel_heavy_particle, decoherence_kernel_heavy_target, refraction_index,
    AmplitudeModel, GasConfig, MassLimit, MomentumGrid, PotentialModel, TargetSpecies,
};
use collisim::generator::{build_generator_from_slab, evolve, split_evolve, EvolveOptions, SplitOptions};
use collisim::linalg::{fro_norm, identity, DensityMatrix, Tolerances};
use collisim::oracle::{convergence_sweep, fixtures, toy_footprint, toy_mixture, SweepOutcome};
use collisim::young::{fringe_maxima, pattern, pattern_to_csv, visibility, YoungConfig};
use num_complex::Complex64;
use serde_json::json;

use crate::config::{
    AmplitudeParams, GasParams, LimitParams, PotentialParams, RunConfig, Scenario,
};

pub struct RunContext {
    pub dir: PathBuf,
    pub quiet: bool,
}

impl RunContext {
    fn write_file(&self, name: &str, contents: &[u8]) -> Result<(), String> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }
}

/// Units: natural units with hbar = 1 throughout; momenta in 1/length,
/// energies in 1/time, rates in 1/time.
pub const UNITS_HEADER: &str = "# units: hbar = 1; momenta 1/length, energies 1/time";

pub fn run(cfg: &RunConfig, ctx: &RunContext) -> Result<serde_json::Value, String> {
    match cfg.scenario {
        Scenario::Toy => run_toy(ctx),
        Scenario::SlabConvergence => run_slab_convergence(cfg, ctx),
        Scenario::Lindblad => run_lindblad(cfg, ctx),
        Scenario::Gas => run_gas(cfg, ctx),
        Scenario::Young => run_young(cfg, ctx),
    }
}

fn matrix_json(m: &ndarray::Array2<Complex64>) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[[i, j]].re, m[[i, j]].im]).collect())
        .collect();
    json!(rows)
}

fn run_toy(ctx: &RunContext) -> Result<serde_json::Value, String> {
    let half = identity(2).mapv(|z| 0.5 * z);
    let fp = toy_footprint();
    let mix = toy_mixture();

    let fp_defect = fro_norm(&(fp.particle_reduced.elements() - &half));
    let mix_defect = fro_norm(&(mix.particle_reduced.elements() - &half));
    let box_defect = fro_norm(&(mix.box_after.elements() - &half));
    let pass = fp_defect < 1e-12 && mix_defect < 1e-12 && box_defect < 1e-12;

    let report = json!({
        "scenario": "toy",
        "footprint": {
            "particle_reduced": matrix_json(fp.particle_reduced.elements()),
            "box_after": matrix_json(fp.box_after.elements()),
            "footprint_weight": fp.footprint_weight,
            "defect_from_half_identity": fp_defect,
        },
        "mixture": {
            "particle_reduced": matrix_json(mix.particle_reduced.elements()),
            "box_after": matrix_json(mix.box_after.elements()),
            "footprint_weight": mix.footprint_weight,
            "defect_from_half_identity": mix_defect,
            "box_invariance_defect": box_defect,
        },
        "pass": pass,
    });
    ctx.note(&format!(
        "toy: particle defects {fp_defect:.2e} / {mix_defect:.2e}, box defect {box_defect:.2e} -> {}",
        if pass { "PASS" } else { "FAIL" }
    ));
    Ok(report)
}

fn run_slab_convergence(cfg: &RunConfig, ctx: &RunContext) -> Result<serde_json::Value, String> {
    let p = &cfg.slab_convergence;
    let family = fixtures::convergence_family(cfg.seed, p.particle_dim, p.targets);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed ^ 0x5eed);
    let rho0 = fixtures::random_density(&mut rng, p.particle_dim);
    let report = convergence_sweep(&family, &rho0, &p.couplings, CollisionMode::BornTruncated)
        .map_err(|e| format!("sweep failed: {e}"))?;

    let mut csv = String::from("lambda,error\n");
    csv.insert_str(0, &format!("{UNITS_HEADER}\n"));
    for (l, e) in report.couplings.iter().zip(report.errors.iter()) {
        csv.push_str(&format!("{l},{e}\n"));
    }
    ctx.write_file("sweep.csv", csv.as_bytes())?;

    let (outcome, slope) = match report.outcome {
        SweepOutcome::Exact => ("exact".to_string(), serde_json::Value::Null),
        SweepOutcome::Slope(s) => ("slope".to_string(), json!(s)),
    };
    if let SweepOutcome::Slope(s) = report.outcome {
        ctx.note(&format!("slab-convergence: fitted exponent {s:.3}"));
    } else {
        ctx.note("slab-convergence: map exact at machine precision");
    }
    Ok(json!({
        "scenario": "slab-convergence",
        "particle_dim": p.particle_dim,
        "targets": p.targets,
        "outcome": outcome,
        "fitted_exponent": slope,
        "errors": report.errors,
        "couplings": report.couplings,
    }))
}

fn run_lindblad(cfg: &RunConfig, ctx: &RunContext) -> Result<serde_json::Value, String> {
    let p = &cfg.lindblad;
    let family = fixtures::convergence_family(cfg.seed, p.particle_dim, p.targets);
    let slab = family
        .slab(p.coupling, CollisionMode::ExactUnitary)
        .map_err(|e| format!("slab construction failed: {e}"))?;
    let gen = build_generator_from_slab(&slab).map_err(|e| format!("generator: {e}"))?;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed ^ 0x5eed);
    let rho0 = fixtures::random_density(&mut rng, p.particle_dim);

    let opts = EvolveOptions { save_every: p.save_every };
    let traj = evolve(&rho0, &gen, p.t_final, p.dt, &opts)
        .map_err(|e| format!("integration failed: {e}"))?;
    let selected: Vec<(usize, usize)> = (0..p.particle_dim.min(2)).map(|i| (i, i)).collect();
    let mut buf = Vec::new();
    writeln!(buf, "{UNITS_HEADER}").ok();
    traj.to_csv(&selected, &mut buf).map_err(|e| format!("csv: {e}"))?;
    ctx.write_file("trajectory.csv", &buf)?;

    let final_state =
        DensityMatrix::new(traj.final_state().clone(), vec![p.particle_dim])
            .map_err(|e| format!("final state invalid: {e}"))?;
    let diag = final_state
        .validate(&Tolerances::default())
        .map_err(|e| format!("diagnostics: {e}"))?;

    let mut report = json!({
        "scenario": "lindblad",
        "coupling": p.coupling,
        "t_final": p.t_final,
        "dt": p.dt,
        "mixture_jumps": gen.jumps_mixture().len(),
        "footprint_jumps": gen.jumps_footprint().len(),
        "final_trace_deviation": diag.trace_deviation,
        "final_min_eigenvalue": diag.min_eigenvalue,
        "warnings": traj.warnings(),
    });

    if p.split {
        let sopts = SplitOptions { save_every: p.save_every, ..Default::default() };
        let split = split_evolve(&rho0, &gen, p.t_final, p.dt, &sopts)
            .map_err(|e| format!("split integration failed: {e}"))?;
        let mut buf = Vec::new();
        writeln!(buf, "{UNITS_HEADER}").ok();
        split.coh.to_csv(&selected, &mut buf).map_err(|e| format!("csv: {e}"))?;
        ctx.write_file("split_coherent.csv", &buf)?;
        let mut buf = Vec::new();
        writeln!(buf, "{UNITS_HEADER}").ok();
        split.mix.to_csv(&selected, &mut buf).map_err(|e| format!("csv: {e}"))?;
        ctx.write_file("split_mixed.csv", &buf)?;

        let mut worst = 0.0f64;
        for (idx, state) in traj.states().iter().enumerate() {
            let sum = &split.coh.states()[idx] + &split.mix.states()[idx];
            worst = worst.max(fro_norm(&(&sum - state)));
        }
        report["split_reconstruction_defect"] = json!(worst);
        ctx.note(&format!(
            "lindblad: trace dev {:.2e}, min eig {:.2e}, split defect {worst:.2e}",
            diag.trace_deviation, diag.min_eigenvalue
        ));
    } else {
        ctx.note(&format!(
            "lindblad: trace dev {:.2e}, min eig {:.2e}",
            diag.trace_deviation, diag.min_eigenvalue
        ));
    }
    Ok(report)
}

fn build_gas_config(p: &GasParams, mass_ratio: f64) -> Result<GasConfig, String> {
    let grid = MomentumGrid::symmetric(p.grid_k_max, p.grid_half_points)
        .map_err(|e| format!("grid: {e}"))?;
    let target_grid = MomentumGrid::symmetric(p.target_grid_k_max, p.target_grid_half_points)
        .map_err(|e| format!("target grid: {e}"))?;
    let potential = match &p.potential {
        PotentialParams::Contact { strength } => PotentialModel::Contact { strength: *strength },
        PotentialParams::Gaussian { strength, width } => {
            PotentialModel::Gaussian { strength: *strength, width: *width }
        }
        PotentialParams::Yukawa { strength, range } => {
            PotentialModel::Yukawa { strength: *strength, range: *range }
        }
        PotentialParams::Table { path } => {
            let file = std::fs::File::open(path)
                .map_err(|e| format!("cannot open {}: {e}", path.display()))?;
            PotentialModel::from_csv(std::io::BufReader::new(file))
                .map_err(|e| format!("potential table: {e}"))?
        }
    };
    let amplitude = match p.amplitude {
        AmplitudeParams::FirstBorn => AmplitudeModel::FirstBorn,
        AmplitudeParams::LippmannSchwinger => {
            AmplitudeModel::LippmannSchwinger { ls_eta: p.ls_eta }
        }
    };
    let targets = vec![TargetSpecies::gaussian(&target_grid, 0.0, 1.0, 1.0)];
    let cfg = GasConfig {
        m1: 1.0,
        m2: 1.0 / mass_ratio,
        density: p.density,
        v1: p.v1,
        grid,
        target_grid,
        potential,
        amplitude,
        targets,
        eta: p.eta,
        gas_at_rest: true,
        fd_step: p.fd_step,
    };
    cfg.validate().map_err(|e| format!("gas config: {e}"))?;
    Ok(cfg)
}

fn run_gas(cfg: &RunConfig, ctx: &RunContext) -> Result<serde_json::Value, String> {
    let p = &cfg.gas;
    let limit = match p.limit {
        LimitParams::HeavyTarget => MassLimit::HeavyTarget,
        LimitParams::HeavyParticle => MassLimit::HeavyParticle,
    };

    let mut csv = format!("{UNITS_HEADER}\nmass_ratio,re_index,im_index,fermi_re,fermi_im,difference\n");
    let mut diffs = Vec::new();
    let mut rows = Vec::new();
    for &ratio in &p.mass_ratios {
        let gcfg = build_gas_config(p, ratio)?;
        let r = refraction_index(&gcfg, p.k, limit, 0)
            .map_err(|e| format!("refraction index at ratio {ratio}: {e}"))?;
        csv.push_str(&format!(
            "{ratio},{},{},{},{},{}\n",
            r.ratio.re,
            r.ratio.im,
            r.fermi_form.re,
            r.fermi_form.im,
            r.difference.norm()
        ));
        diffs.push(r.difference.norm());
        rows.push(json!({
            "mass_ratio": ratio,
            "index": [r.ratio.re, r.ratio.im],
            "linearized": [r.linearized.re, r.linearized.im],
            "fermi_form": [r.fermi_form.re, r.fermi_form.im],
            "difference": r.difference.norm(),
            "perturbation_ratio": r.perturbation_ratio,
        }));
    }
    ctx.write_file("refraction.csv", csv.as_bytes())?;

    let slope = if diffs.iter().all(|&d| d > 1e-14) && p.mass_ratios.len() >= 2 {
        json!(collisim::collision::log_log_slope(&p.mass_ratios, &diffs))
    } else {
        serde_json::Value::Null
    };

    // eta-convergence pair for the kernel: mean-kinetic-energy drift at eta
    // and eta/2
    let mut drift_pair = Vec::new();
    for factor in [1.0, 0.5] {
        let mut gcfg = build_gas_config(p, p.mass_ratios[0])?;
        gcfg.grid = MomentumGrid::symmetric(p.kernel_grid_k_max, p.kernel_grid_half_points)
            .map_err(|e| format!("kernel grid: {e}"))?;
        gcfg.eta = p.eta * factor;
        let kernel = match limit {
            MassLimit::HeavyTarget => decoherence_kernel_heavy_target(&gcfg),
            MassLimit::HeavyParticle => decoherence_kernel_heavy_particle(&gcfg),
        }
        .map_err(|e| format!("kernel at eta {}: {e}", gcfg.eta))?;
        let n = gcfg.grid.len();
        let ki = gcfg.grid.index_of(p.k).map_err(|e| format!("k: {e}"))?;
        let mut rho_diag = vec![0.0; n];
        rho_diag[ki] = 1.0;
        let energies: Vec<f64> =
            gcfg.grid.points().iter().map(|&k| k * k / (2.0 * gcfg.m1)).collect();
        drift_pair.push(kernel.energy_drift_diagonal(&rho_diag, &energies));
    }

    ctx.note(&format!(
        "gas: {} mass ratios, energy-drift pair ({:.3e}, {:.3e})",
        p.mass_ratios.len(),
        drift_pair[0],
        drift_pair[1]
    ));
    Ok(json!({
        "scenario": "gas",
        "limit": format!("{:?}", p.limit),
        "k": p.k,
        "points": rows,
        "difference_exponent": slope,
        "eta_pair": [p.eta, p.eta / 2.0],
        "energy_drift_pair": drift_pair,
    }))
}

fn run_young(cfg: &RunConfig, ctx: &RunContext) -> Result<serde_json::Value, String> {
    let p = &cfg.young;
    let mut ycfg = YoungConfig::new(
        p.slit_separation,
        p.screen_distance,
        p.wavenumber,
        Complex64::new(p.re_k_prime, p.im_k_prime),
    )
    .map_err(|e| format!("young config: {e}"))?;
    ycfg.window_periods = p.window_periods;
    let ycfg = ycfg.with_screen_grid(p.points_per_period);

    let intensity = pattern(&ycfg).map_err(|e| format!("pattern: {e}"))?;
    let mut buf = Vec::new();
    writeln!(buf, "{UNITS_HEADER}").ok();
    pattern_to_csv(&ycfg, &intensity, &mut buf).map_err(|e| format!("csv: {e}"))?;
    ctx.write_file("pattern.csv", &buf)?;

    let report = visibility(&intensity, &ycfg).map_err(|e| format!("visibility: {e}"))?;
    let maxima = fringe_maxima(&intensity, &ycfg);
    let spacing = if maxima.len() >= 2 {
        json!(maxima.windows(2).map(|w| w[1] - w[0]).sum::<f64>() / (maxima.len() - 1) as f64)
    } else {
        serde_json::Value::Null
    };
    let dx = ycfg.screen_points[1] - ycfg.screen_points[0];
    let total: f64 = intensity.iter().map(|v| v * dx).sum();

    let measured = if report.infinite { serde_json::Value::Null } else { json!(report.measured) };
    let formula =
        if report.formula.is_infinite() { serde_json::Value::Null } else { json!(report.formula) };
    ctx.note(&format!(
        "young: visibility measured {} vs formula {}",
        if report.infinite { "inf".into() } else { format!("{:.4}", report.measured) },
        if report.formula.is_infinite() { "inf".into() } else { format!("{:.4}", report.formula) },
    ));
    Ok(json!({
        "scenario": "young",
        "damping_exponent": ycfg.damping_exponent(),
        "visibility_measured": measured,
        "visibility_formula": formula,
        "visibility_infinite": report.infinite,
        "contrast": report.contrast,
        "background": report.background,
        "fringe_period_expected": ycfg.fringe_period(),
        "fringe_period_measured": spacing,
        "total_intensity": total,
    }))
}

/// Run directory name: `<scenario>-<unix seconds>` under the output root.
pub fn run_dir(root: &Path, scenario: Scenario) -> PathBuf {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    root.join(format!("{scenario}-{stamp}"))
}
