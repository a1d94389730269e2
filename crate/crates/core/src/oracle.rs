//! Ground truth: exact unitary evolution of the full particle (x) targets
//! system followed by a partial trace, plus the two-level toy models as
//! executable fixtures. Everything the slab map approximates is quantified
//! against this module.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::collision::{log_log_slope, TargetEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{fro_norm, DensityMatrix, StateVector};
use crate::slabstep::{
    apply_particle_target_op, footprint_toy_collision, mixture_toy_collision, one_step,
    ApplicationMode, SlabFamily, SlabSpec,
};

/// Default cap on the total tensor-product dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;
/// Mixed slabs are expanded by exact enumeration up to this many
/// configurations; larger ensembles require pure-state fixtures.
pub const CONFIGURATION_CAP: usize = 64;

/// Result of one exact crossing compared against the slab map.
#[derive(Debug, Clone)]
pub struct ExactRun {
    /// Post-crossing state of particle (x) all targets.
    pub full_state: DensityMatrix,
    /// Exact reduced particle state.
    pub reduced: DensityMatrix,
    /// The one-step map's output for the same input.
    pub approx: DensityMatrix,
    /// Frobenius distance between the two.
    pub error: f64,
}

fn check_caps(slab: &SlabSpec, cap: usize) -> Result<()> {
    let dims = slab.full_dims();
    let total: usize = dims.iter().product();
    if total > cap {
        return Err(Error::DimensionCap { dim: total, cap });
    }
    let configs: usize = slab.targets().iter().map(|e| e.states().len()).product();
    if configs > CONFIGURATION_CAP {
        return Err(Error::ConfigurationCap { count: configs, cap: CONFIGURATION_CAP });
    }
    Ok(())
}

fn apply_sequential_s(
    rho_full: &Array2<Complex64>,
    slab: &SlabSpec,
    dims: &[usize],
) -> Array2<Complex64> {
    let total = rho_full.nrows();
    let mut current = rho_full.clone();
    for (j, c) in slab.collisions().iter().enumerate() {
        // rho -> S rho S^+, applied column-wise then row-wise.
        let mut after_left = Array2::zeros((total, total));
        for col in 0..total {
            let v = current.column(col).to_owned();
            let sv = apply_particle_target_op(c.s(), dims, j + 1, &v);
            after_left.column_mut(col).assign(&sv);
        }
        let s_conj = c.s().mapv(|z| z.conj());
        let mut after_both = Array2::zeros((total, total));
        for row in 0..total {
            let v: Array1<Complex64> = after_left.row(row).to_owned();
            let sv = apply_particle_target_op(&s_conj, dims, j + 1, &v);
            after_both.row_mut(row).assign(&sv);
        }
        current = after_both;
    }
    current
}

/// Exact crossing: apply each target's unitary S sequentially on the full
/// tensor state (mixed slabs by weighted enumeration of configurations),
/// returning the full post-crossing state.
pub fn exact_full_state(
    rho_particle: &DensityMatrix,
    slab: &SlabSpec,
    dim_cap: usize,
) -> Result<DensityMatrix> {
    check_caps(slab, dim_cap)?;
    for c in slab.collisions() {
        let defect = c.unitarity_defect();
        if defect > 1e-10 {
            return Err(Error::NotUnitary { defect, tol: 1e-10 });
        }
    }
    let dims = slab.full_dims();
    let total: usize = dims.iter().product();

    // Enumerate slab configurations as index tuples into each ensemble.
    let mut configs: Vec<(f64, Vec<usize>)> = vec![(1.0, Vec::new())];
    for e in slab.targets() {
        let mut next = Vec::new();
        for (w, idxs) in &configs {
            for (si, s) in e.states().iter().enumerate() {
                let nw = w * s.weight;
                if nw == 0.0 {
                    continue;
                }
                let mut ni = idxs.clone();
                ni.push(si);
                next.push((nw, ni));
            }
        }
        configs = next;
    }

    let mut acc: Array2<Complex64> = Array2::zeros((total, total));
    for (weight, idxs) in &configs {
        let mut joint = rho_particle.clone();
        for (e, &si) in slab.targets().iter().zip(idxs.iter()) {
            joint = joint.tensor(&DensityMatrix::from_pure(&e.states()[si].vector));
        }
        let evolved = apply_sequential_s(joint.elements(), slab, &dims);
        acc += &evolved.mapv(|z| *weight * z);
    }
    Ok(DensityMatrix::new_unchecked(acc, dims))
}

/// Order-dependence of the sequential oracle: Frobenius distance between
/// the reduced states obtained by crossing the targets in slab order and in
/// reversed order. The crossed products this measures are exactly what the
/// one-step map drops.
pub fn order_dependence(
    rho_particle: &DensityMatrix,
    slab: &SlabSpec,
    dim_cap: usize,
) -> Result<f64> {
    let forward = exact_crossing(rho_particle, slab, dim_cap)?;
    let mut rev_targets: Vec<_> = slab.targets().to_vec();
    rev_targets.reverse();
    let mut rev_collisions: Vec<_> = slab.collisions().to_vec();
    rev_collisions.reverse();
    let reversed_slab = SlabSpec::new(
        rev_targets,
        rev_collisions,
        slab.width(),
        slab.speed(),
        slab.density(),
    )?;
    let backward = exact_crossing(rho_particle, &reversed_slab, dim_cap)?;
    Ok(fro_norm(&(forward.elements() - backward.elements())))
}

/// Exact reduced particle state after one crossing.
pub fn exact_crossing(
    rho_particle: &DensityMatrix,
    slab: &SlabSpec,
    dim_cap: usize,
) -> Result<DensityMatrix> {
    exact_full_state(rho_particle, slab, dim_cap)?.partial_trace(&[0])
}

/// Run the exact crossing and the one-step map side by side. The map is
/// evaluated on `approx_slab` (typically Born-truncated collisions built
/// from the same kernels as the exact slab).
pub fn compare_one_step(
    rho_particle: &DensityMatrix,
    exact_slab: &SlabSpec,
    approx_slab: &SlabSpec,
    dim_cap: usize,
) -> Result<ExactRun> {
    let full_state = exact_full_state(rho_particle, exact_slab, dim_cap)?;
    let reduced = full_state.partial_trace(&[0])?;
    let approx = one_step(rho_particle, approx_slab)?;
    let error = fro_norm(&(approx.elements() - reduced.elements()));
    Ok(ExactRun { full_state, reduced, approx, error })
}

/// Outcome of a coupling sweep of || one_step - exact_crossing ||.
#[derive(Debug, Clone)]
pub enum SweepOutcome {
    /// Every error sat below the 1e-14 floor; the map is exact here.
    Exact,
    /// Fitted log-log exponent of the error against the coupling.
    Slope(f64),
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub couplings: Vec<f64>,
    pub errors: Vec<f64>,
    pub outcome: SweepOutcome,
}

const ERROR_FLOOR: f64 = 1e-14;

/// Sweep the coupling and fit the convergence exponent of the one-step map
/// against the exact crossing (exact-unitary collisions built from the same
/// kernels). `approx_mode` selects the collisions the map is built from:
/// Born truncation exposes the weak-potential error, exact-unitary isolates
/// the dropped crossed terms.
pub fn convergence_sweep(
    family: &SlabFamily,
    rho0: &DensityMatrix,
    couplings: &[f64],
    approx_mode: crate::collision::CollisionMode,
) -> Result<SweepReport> {
    if couplings.len() < 4 {
        return Err(Error::InvalidConfig("need at least 4 couplings for the fit".into()));
    }
    let mut errors = Vec::new();
    for &lam in couplings {
        let exact_slab = family.slab(lam, crate::collision::CollisionMode::ExactUnitary)?;
        let approx_slab = family.slab(lam, approx_mode)?;
        let run = compare_one_step(rho0, &exact_slab, &approx_slab, DEFAULT_DIMENSION_CAP)?;
        errors.push(run.error);
    }
    let below: usize = errors.iter().filter(|&&e| e <= ERROR_FLOOR).count();
    let outcome = if below == errors.len() {
        SweepOutcome::Exact
    } else if below > 0 {
        return Err(Error::DegenerateFit(format!(
            "{below} of {} errors at the {ERROR_FLOOR:.0e} floor",
            errors.len()
        )));
    } else {
        SweepOutcome::Slope(log_log_slope(couplings, &errors))
    };
    Ok(SweepReport { couplings: couplings.to_vec(), errors, outcome })
}

/// Outcome of a toy-model run.
#[derive(Debug, Clone)]
pub struct ToyOutcome {
    pub particle_reduced: DensityMatrix,
    pub box_after: DensityMatrix,
    /// Weight of the out-state component that changed the box.
    pub footprint_weight: f64,
}

fn toy_slab(
    collision: crate::collision::CollisionOperator,
    box_weights: &[f64],
) -> Result<SlabSpec> {
    let targets = vec![TargetEnsemble::from_weights(box_weights, 0.0)?];
    SlabSpec::new(targets, vec![collision], 1.0, 1.0, 1.0)
}

/// Footprint mechanism: particle |1>, box pure |a>, entangling interaction.
/// The reduced particle matrix comes out maximally mixed while the box keeps
/// a record of the particle's path.
pub fn toy_footprint() -> ToyOutcome {
    let slab = toy_slab(footprint_toy_collision(), &[1.0, 0.0]).expect("valid toy");
    let rho = DensityMatrix::from_pure(&StateVector::basis(2, 0));
    let full = exact_full_state(&rho, &slab, DEFAULT_DIMENSION_CAP).expect("toy fits caps");
    let particle_reduced = full.partial_trace(&[0]).expect("valid subsystem");
    let box_after = full.partial_trace(&[1]).expect("valid subsystem");

    let config = [slab.targets()[0].states()[0].clone()];
    let out = crate::slabstep::out_state(
        &StateVector::basis(2, 0),
        &config,
        &slab,
        ApplicationMode::Sequential,
    )
    .expect("toy out state");
    let (_, footprint) = crate::slabstep::footprint_decompose(&out, &config).expect("decompose");
    let w = footprint.norm();
    ToyOutcome { particle_reduced, box_after, footprint_weight: w * w }
}

/// Mixture mechanism: particle |1>, box maximally mixed, interaction that
/// flips the particle conditioned on the box state. The box never changes,
/// yet the particle decoheres.
pub fn toy_mixture() -> ToyOutcome {
    toy_mixture_with_box(&[0.5, 0.5])
}

/// Mixture toy with an arbitrary diagonal box ensemble; a pure box leaves
/// the particle pure.
pub fn toy_mixture_with_box(box_weights: &[f64]) -> ToyOutcome {
    let slab = toy_slab(mixture_toy_collision(), box_weights).expect("valid toy");
    let rho = DensityMatrix::from_pure(&StateVector::basis(2, 0));
    let full = exact_full_state(&rho, &slab, DEFAULT_DIMENSION_CAP).expect("toy fits caps");
    let particle_reduced = full.partial_trace(&[0]).expect("valid subsystem");
    let box_after = full.partial_trace(&[1]).expect("valid subsystem");

    // Configuration-averaged footprint weight.
    let mut weight = 0.0;
    for s in slab.targets()[0].states() {
        if s.weight == 0.0 {
            continue;
        }
        let config = [s.clone()];
        let out = crate::slabstep::out_state(
            &StateVector::basis(2, 0),
            &config,
            &slab,
            ApplicationMode::Sequential,
        )
        .expect("toy out state");
        let (_, footprint) =
            crate::slabstep::footprint_decompose(&out, &config).expect("decompose");
        weight += s.weight * footprint.norm().powi(2);
    }
    ToyOutcome { particle_reduced, box_after, footprint_weight: weight }
}

/// Fixture builders shared by the convergence studies and the acceptance
/// suite.
pub mod fixtures {
    use super::*;
    use crate::linalg::dagger;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> Array2<Complex64> {
        let m = Array2::from_shape_fn((d, d), |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        (&m + &dagger(&m)).mapv(|z| z / 2.0)
    }

    /// Random normalized density matrix on a single subsystem.
    pub fn random_density(rng: &mut impl Rng, d: usize) -> DensityMatrix {
        let m = Array2::from_shape_fn((d, d), |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let mut rho = m.dot(&dagger(&m));
        let tr = crate::linalg::trace_of(&rho);
        rho.mapv_inplace(|z| z / tr);
        DensityMatrix::new(rho, vec![d]).unwrap()
    }

    /// Kernel on particle (x) two-level target whose diagonal target blocks
    /// vanish: every collision changes the target state at first order, so
    /// the ensemble-averaged forward amplitude per slab is second order.
    /// This is the dilute regime, where the dropped crossed products of
    /// different targets' scattering operators are genuinely negligible.
    pub fn state_changing_kernel(rng: &mut impl Rng, particle_dim: usize) -> Array2<Complex64> {
        let x1 = random_hermitian(rng, particle_dim);
        let x2 = random_hermitian(rng, particle_dim);
        let mut sx = Array2::zeros((2, 2));
        sx[[0, 1]] = Complex64::new(1.0, 0.0);
        sx[[1, 0]] = Complex64::new(1.0, 0.0);
        let mut sy = Array2::zeros((2, 2));
        sy[[0, 1]] = Complex64::new(0.0, -1.0);
        sy[[1, 0]] = Complex64::new(0.0, 1.0);
        ndarray::linalg::kron(&x1, &sx) + ndarray::linalg::kron(&x2, &sy)
    }

    /// Slab family for the one-step convergence sweep: the first target
    /// carries a generic kernel (its cubic-order forward elements dominate
    /// the Born-truncation error), the rest are state-changing so the
    /// crossed second-order terms stay suppressed.
    pub fn convergence_family(seed: u64, particle_dim: usize, n_targets: usize) -> SlabFamily {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kernels = Vec::new();
        let mut ensembles = Vec::new();
        for j in 0..n_targets {
            let k = if j == 0 {
                random_hermitian(&mut rng, particle_dim * 2)
            } else {
                state_changing_kernel(&mut rng, particle_dim)
            };
            kernels.push(k);
            ensembles.push(TargetEnsemble::from_weights(&[0.6, 0.4], 0.0).unwrap());
        }
        SlabFamily { kernels, ensembles, particle_dim, width: 1.0, speed: 1.0, density: 1.0 }
    }

    /// Slab family with state-changing kernels only; used where the slab
    /// composition and continuum-limit checks need the dilute regime.
    pub fn dilute_family(seed: u64, particle_dim: usize, n_targets: usize) -> SlabFamily {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernels: Vec<_> =
            (0..n_targets).map(|_| state_changing_kernel(&mut rng, particle_dim)).collect();
        let ensembles: Vec<_> = (0..n_targets)
            .map(|_| TargetEnsemble::from_weights(&[0.6, 0.4], 0.0).unwrap())
            .collect();
        SlabFamily { kernels, ensembles, particle_dim, width: 1.0, speed: 1.0, density: 1.0 }
    }
}
