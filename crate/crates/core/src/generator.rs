//! From the one-step slab map to continuous time: the effective Hamiltonian,
//! the footprint and mixture jump families with their rates, a fixed-step
//! RK4 integrator for the master equation, and the coherent/mixed split of
//! the density matrix.
//!
//! Rate bookkeeping. With the dissipator written as
//! `D(A, rate)[rho] = rate (2 A rho A^+ - A^+A rho - rho A^+A)`,
//! a homogeneous slab of N targets crossed in time delta/v contributes
//! per target: footprint rates (v/delta) q_m / 2 for each (l, m), and
//! mixture rates (v/delta) q_n q_m / 2 for each unordered pair {n, m}
//! (equivalently q_n q_m / 4 per ordered pair). These values reproduce the
//! one-step map through second order in the coupling; the consistency is
//! checked numerically against the iterated map rather than trusted on
//! paper.

use ndarray::Array2;
use num_complex::Complex64;

use crate::collision::{SlabOperators, TargetEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{
    dagger, fro_norm, hermitian_eigenvalues, identity, log_unitary, DensityMatrix,
};
use crate::slabstep::SlabSpec;

/// One jump operator with its rate.
#[derive(Debug, Clone)]
pub struct Jump {
    pub op: Array2<Complex64>,
    pub rate: f64,
}

/// The continuous-time generator: hermitian effective Hamiltonian plus
/// weighted mixture and footprint jump families.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    dim: usize,
    h_eff: Array2<Complex64>,
    jumps_mixture: Vec<Jump>,
    jumps_footprint: Vec<Jump>,
    v_over_delta: f64,
    /// Slab-total ensemble-averaged D_M; kept for the pre-Lindblad
    /// sensitivity variant of the coherent Hamiltonian.
    dbar: Array2<Complex64>,
}

const ZERO_OP_CUTOFF: f64 = 1e-14;

impl LindbladGenerator {
    /// Generator with no medium at all (useful as a base for hand-built
    /// jump families in tests and fixtures).
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            h_eff: Array2::zeros((dim, dim)),
            jumps_mixture: Vec::new(),
            jumps_footprint: Vec::new(),
            v_over_delta: 1.0,
            dbar: Array2::zeros((dim, dim)),
        }
    }

    pub fn with_hamiltonian(mut self, h: Array2<Complex64>) -> Result<Self> {
        let scale = crate::linalg::max_abs(&h).max(1e-300);
        let defect = crate::linalg::hermiticity_defect(&h) / scale;
        if defect > 1e-12 {
            return Err(Error::NotHermitian { defect, tol: 1e-12 });
        }
        self.h_eff = h;
        Ok(self)
    }

    pub fn with_footprint_jump(mut self, op: Array2<Complex64>, rate: f64) -> Result<Self> {
        if rate < 0.0 {
            return Err(Error::InvalidConfig(format!("negative rate {rate}")));
        }
        self.jumps_footprint.push(Jump { op, rate });
        Ok(self)
    }

    pub fn with_mixture_jump(mut self, op: Array2<Complex64>, rate: f64) -> Result<Self> {
        if rate < 0.0 {
            return Err(Error::InvalidConfig(format!("negative rate {rate}")));
        }
        self.jumps_mixture.push(Jump { op, rate });
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h_eff(&self) -> &Array2<Complex64> {
        &self.h_eff
    }

    pub fn jumps_mixture(&self) -> &[Jump] {
        &self.jumps_mixture
    }

    pub fn jumps_footprint(&self) -> &[Jump] {
        &self.jumps_footprint
    }

    pub fn v_over_delta(&self) -> f64 {
        self.v_over_delta
    }

    pub fn jumps(&self) -> impl Iterator<Item = &Jump> {
        self.jumps_mixture.iter().chain(self.jumps_footprint.iter())
    }

    /// sum_k rate_k A_k^+ A_k.
    pub fn total_damping(&self) -> Array2<Complex64> {
        let mut acc = Array2::zeros((self.dim, self.dim));
        for j in self.jumps() {
            acc += &dagger(&j.op).dot(&j.op).mapv(|z| j.rate * z);
        }
        acc
    }

    /// The non-hermitian Hamiltonian driving the coherent part:
    /// H_eff - i sum rate A^+A, or, when `pre_lindblad` is set, the
    /// derivation's -(v/delta)(Dbar - (i/2) Dbar^2) with the quadratic term
    /// retained (useful for sensitivity studies; breaks the exact
    /// coherent+mixed reconstruction at higher order).
    pub fn h_coherent(&self, pre_lindblad: bool) -> Array2<Complex64> {
        if pre_lindblad {
            let d2 = self.dbar.dot(&self.dbar);
            (self.dbar.clone() - d2.mapv(|z| Complex64::new(0.0, 0.5) * z))
                .mapv(|z| -self.v_over_delta * z)
        } else {
            let damping = self.total_damping();
            &self.h_eff - &damping.mapv(|z| Complex64::new(0.0, 1.0) * z)
        }
    }

    /// Crude bound on the generator magnitude, used for step-size warnings.
    pub fn magnitude(&self) -> f64 {
        let mut m = 2.0 * fro_norm(&self.h_eff);
        for j in self.jumps() {
            m += 4.0 * j.rate * fro_norm(&j.op).powi(2);
        }
        m
    }

    /// Full Lindblad right-hand side.
    pub fn rhs(&self, rho: &Array2<Complex64>) -> Array2<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        let h_rho = self.h_eff.dot(rho);
        let rho_h = rho.dot(&self.h_eff);
        let mut acc = (h_rho - rho_h).mapv(|z| -i * z);
        for j in self.jumps() {
            acc += &dissipator(&j.op, j.rate, rho);
        }
        acc
    }
}

/// rate (2 A rho A^+ - A^+A rho - rho A^+A).
pub fn dissipator(
    a: &Array2<Complex64>,
    rate: f64,
    rho: &Array2<Complex64>,
) -> Array2<Complex64> {
    let ad = dagger(a);
    let ada = ad.dot(a);
    let mut acc = a.dot(rho).dot(&ad).mapv(|z| 2.0 * z);
    acc -= &ada.dot(rho);
    acc -= &rho.dot(&ada);
    acc.mapv(|z| rate * z)
}

/// Assemble the generator for a homogeneous slab from one target's operator
/// families; every one of the N targets contributes identically.
pub fn build_generator(
    ops: &SlabOperators,
    ensemble: &TargetEnsemble,
    slab: &SlabSpec,
) -> Result<LindbladGenerator> {
    let total: f64 = ensemble.weights().iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized((total - 1.0).abs()));
    }
    let n = slab.n_targets() as f64;
    let vd = slab.v_over_delta();
    let dim = ops.d_m()[0].1.nrows();

    let dbar_single = ops.averaged_d_m(ensemble);
    let dbar = dbar_single.mapv(|z| n * z);
    // H_eff = -(1/2)(v/delta) (Dbar + Dbar^+)
    let h_eff = (&dbar + &dagger(&dbar)).mapv(|z| -0.5 * vd * z);

    let weight_of = |label: usize| -> f64 {
        ensemble
            .states()
            .iter()
            .find(|s| s.label == label)
            .map(|s| s.weight)
            .unwrap_or(0.0)
    };

    let mut jumps_footprint = Vec::new();
    for ((_, m_label), a) in ops.a_e() {
        let q = weight_of(*m_label);
        if q == 0.0 || fro_norm(a) < ZERO_OP_CUTOFF {
            continue;
        }
        jumps_footprint.push(Jump { op: a.clone(), rate: 0.5 * vd * n * q });
    }
    let mut jumps_mixture = Vec::new();
    for ((n_label, m_label), a) in ops.a_m() {
        let qn = weight_of(*n_label);
        let qm = weight_of(*m_label);
        if qn * qm == 0.0 || fro_norm(a) < ZERO_OP_CUTOFF {
            continue;
        }
        // unordered pair: (v/delta) q_n q_m / 2
        jumps_mixture.push(Jump { op: a.clone(), rate: 0.5 * vd * n * qn * qm });
    }
    Ok(LindbladGenerator { dim, h_eff, jumps_mixture, jumps_footprint, v_over_delta: vd, dbar })
}

/// Assemble the generator for an arbitrary (possibly inhomogeneous) slab by
/// summing per-target families.
pub fn build_generator_from_slab(slab: &SlabSpec) -> Result<LindbladGenerator> {
    let dim = slab.particle_dim();
    let vd = slab.v_over_delta();
    let mut h_eff: Array2<Complex64> = Array2::zeros((dim, dim));
    let mut dbar: Array2<Complex64> = Array2::zeros((dim, dim));
    let mut jumps_mixture = Vec::new();
    let mut jumps_footprint = Vec::new();

    for (c, ensemble) in slab.collisions().iter().zip(slab.targets().iter()) {
        let basis = crate::collision::computational_basis(ensemble.dim());
        let ops = SlabOperators::build(c, ensemble, &basis)?;
        let d = ops.averaged_d_m(ensemble);
        h_eff += &(&d + &dagger(&d)).mapv(|z| -0.5 * vd * z);
        dbar += &d;
        let weight_of = |label: usize| -> f64 {
            ensemble
                .states()
                .iter()
                .find(|s| s.label == label)
                .map(|s| s.weight)
                .unwrap_or(0.0)
        };
        for ((_, m_label), a) in ops.a_e() {
            let q = weight_of(*m_label);
            if q == 0.0 || fro_norm(a) < ZERO_OP_CUTOFF {
                continue;
            }
            jumps_footprint.push(Jump { op: a.clone(), rate: 0.5 * vd * q });
        }
        for ((n_label, m_label), a) in ops.a_m() {
            let qn = weight_of(*n_label);
            let qm = weight_of(*m_label);
            if qn * qm == 0.0 || fro_norm(a) < ZERO_OP_CUTOFF {
                continue;
            }
            jumps_mixture.push(Jump { op: a.clone(), rate: 0.5 * vd * qn * qm });
        }
    }
    Ok(LindbladGenerator { dim, h_eff, jumps_mixture, jumps_footprint, v_over_delta: vd, dbar })
}

/// Effective Hamiltonian from a unitary one-step operator on the particle
/// space: (i v/delta) ln S, principal branch.
pub fn effective_hamiltonian_from_s(
    s: &Array2<Complex64>,
    slab: &SlabSpec,
) -> Result<Array2<Complex64>> {
    let defect = fro_norm(&(dagger(s).dot(s) - identity(s.nrows())));
    if defect > 1e-10 {
        return Err(Error::NotUnitary { defect, tol: 1e-10 });
    }
    let log = log_unitary(s, 1e-8)?;
    let h = log.mapv(|z| Complex64::new(0.0, slab.v_over_delta()) * z);
    let scale = crate::linalg::max_abs(&h).max(1e-300);
    let herm_defect = crate::linalg::hermiticity_defect(&h) / scale;
    if herm_defect > 1e-10 {
        return Err(Error::NotHermitian { defect: herm_defect, tol: 1e-10 });
    }
    // symmetrize away the roundoff
    Ok((&h + &dagger(&h)).mapv(|z| 0.5 * z))
}

/// Integrator output: states sampled along the trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Array2<Complex64>>,
    warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Array2<Complex64>] {
        &self.states
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn final_state(&self) -> &Array2<Complex64> {
        self.states.last().expect("trajectory never empty")
    }

    pub fn traces(&self) -> Vec<Complex64> {
        self.states.iter().map(crate::linalg::trace_of).collect()
    }

    pub fn purities(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.dot(s).diag().iter().map(|z| z.re).sum()).collect()
    }

    pub fn min_eigenvalues(&self) -> Result<Vec<f64>> {
        self.states
            .iter()
            .map(|s| {
                Ok(hermitian_eigenvalues(s)?.iter().cloned().fold(f64::INFINITY, f64::min))
            })
            .collect()
    }

    /// CSV export: t, trace, purity, smallest eigenvalue, then re/im of the
    /// selected matrix elements, one row per saved step.
    pub fn to_csv<W: std::io::Write>(&self, selected: &[(usize, usize)], mut w: W) -> Result<()> {
        let mut header = String::from("t,trace_re,trace_im,purity,min_eigenvalue");
        for (i, j) in selected {
            header.push_str(&format!(",re_{i}_{j},im_{i}_{j}"));
        }
        writeln!(w, "{header}")?;
        let mins = self.min_eigenvalues()?;
        let traces = self.traces();
        let purities = self.purities();
        for (idx, t) in self.times.iter().enumerate() {
            let mut row = format!(
                "{t},{},{},{},{}",
                traces[idx].re, traces[idx].im, purities[idx], mins[idx]
            );
            for (i, j) in selected {
                let z = self.states[idx][[*i, *j]];
                row.push_str(&format!(",{},{}", z.re, z.im));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// Record every n-th step (the initial and final states always are).
    pub save_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { save_every: 1 }
    }
}

const TRACE_DRIFT_PER_STEP: f64 = 1e-6;

fn rk4_step<F>(rho: &Array2<Complex64>, dt: f64, rhs: F) -> Array2<Complex64>
where
    F: Fn(&Array2<Complex64>) -> Array2<Complex64>,
{
    let k1 = rhs(rho);
    let k2 = rhs(&(rho + &k1.mapv(|z| 0.5 * dt * z)));
    let k3 = rhs(&(rho + &k2.mapv(|z| 0.5 * dt * z)));
    let k4 = rhs(&(rho + &k3.mapv(|z| dt * z)));
    rho + &(k1 + k2.mapv(|z| 2.0 * z) + k3.mapv(|z| 2.0 * z) + k4).mapv(|z| dt / 6.0 * z)
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if dt <= 0.0 || t_final < 0.0 {
        return Err(Error::InvalidConfig("need dt > 0 and t_final >= 0".into()));
    }
    Ok((t_final / dt).round().max(0.0) as usize)
}

/// Fixed-step RK4 integration of the Lindblad equation.
pub fn evolve(
    rho0: &DensityMatrix,
    gen: &LindbladGenerator,
    t_final: f64,
    dt: f64,
    options: &EvolveOptions,
) -> Result<Trajectory> {
    if rho0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs generator dim {}",
            rho0.dim(),
            gen.dim()
        )));
    }
    let steps = step_count(t_final, dt)?;
    let mut warnings = Vec::new();
    let magnitude = gen.magnitude();
    if dt * magnitude > 0.1 {
        warnings.push(format!(
            "dt * ||generator|| = {:.3e} exceeds 0.1; the fixed-step integrator may be inaccurate",
            dt * magnitude
        ));
    }
    let save_every = options.save_every.max(1);

    let mut rho = rho0.elements().clone();
    let mut times = vec![0.0];
    let mut states = vec![rho.clone()];
    for step in 0..steps {
        let before = crate::linalg::trace_of(&rho);
        rho = rk4_step(&rho, dt, |r| gen.rhs(r));
        let after = crate::linalg::trace_of(&rho);
        let drift = (after - before).norm();
        let blown_up = !drift.is_finite() || fro_norm(&rho) > 1e9;
        if drift > TRACE_DRIFT_PER_STEP || blown_up {
            return Err(Error::StepTooLarge(format!(
                "trace drifted by {drift:.3e} in one step at t = {:.6}",
                (step + 1) as f64 * dt
            )));
        }
        if (step + 1) % save_every == 0 || step + 1 == steps {
            times.push((step + 1) as f64 * dt);
            states.push(rho.clone());
        }
    }
    Ok(Trajectory { times, states, warnings })
}

#[derive(Debug, Clone, Default)]
pub struct SplitOptions {
    pub save_every: usize,
    /// Use the derivation's pre-Lindblad H (with the retained quadratic
    /// averaged-D term) for the coherent part instead of
    /// H_eff - i sum rate A^+A.
    pub pre_lindblad_h: bool,
}

/// Coherent and mixed trajectories of the split evolution.
#[derive(Debug, Clone)]
pub struct SplitTrajectory {
    pub coh: Trajectory,
    pub mix: Trajectory,
}

/// Evolve the coherent/mixed decomposition: rho_coh follows the damped
/// hamiltonian flow, rho_mix follows the full Lindblad equation fed by the
/// source 2 sum rate A rho_coh A^+. Initial conditions rho_coh = rho0,
/// rho_mix = 0; the sum reproduces `evolve` step by step.
pub fn split_evolve(
    rho0: &DensityMatrix,
    gen: &LindbladGenerator,
    t_final: f64,
    dt: f64,
    options: &SplitOptions,
) -> Result<SplitTrajectory> {
    if rho0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs generator dim {}",
            rho0.dim(),
            gen.dim()
        )));
    }
    let steps = step_count(t_final, dt)?;
    let save_every = options.save_every.max(1);
    let h_c = gen.h_coherent(options.pre_lindblad_h);
    let h_c_dag = dagger(&h_c);
    let i = Complex64::new(0.0, 1.0);

    let rhs_pair = |coh: &Array2<Complex64>,
                    mix: &Array2<Complex64>|
     -> (Array2<Complex64>, Array2<Complex64>) {
        let d_coh = (h_c.dot(coh) - coh.dot(&h_c_dag)).mapv(|z| -i * z);
        let mut d_mix = gen.rhs(mix);
        for j in gen.jumps() {
            d_mix += &j.op.dot(coh).dot(&dagger(&j.op)).mapv(|z| 2.0 * j.rate * z);
        }
        (d_coh, d_mix)
    };

    let dim = gen.dim();
    let mut coh = rho0.elements().clone();
    let mut mix: Array2<Complex64> = Array2::zeros((dim, dim));
    let mut times = vec![0.0];
    let mut coh_states = vec![coh.clone()];
    let mut mix_states = vec![mix.clone()];

    for step in 0..steps {
        let (k1c, k1m) = rhs_pair(&coh, &mix);
        let (k2c, k2m) = rhs_pair(
            &(&coh + &k1c.mapv(|z| 0.5 * dt * z)),
            &(&mix + &k1m.mapv(|z| 0.5 * dt * z)),
        );
        let (k3c, k3m) = rhs_pair(
            &(&coh + &k2c.mapv(|z| 0.5 * dt * z)),
            &(&mix + &k2m.mapv(|z| 0.5 * dt * z)),
        );
        let (k4c, k4m) =
            rhs_pair(&(&coh + &k3c.mapv(|z| dt * z)), &(&mix + &k3m.mapv(|z| dt * z)));
        coh = &coh
            + &(k1c + k2c.mapv(|z| 2.0 * z) + k3c.mapv(|z| 2.0 * z) + k4c)
                .mapv(|z| dt / 6.0 * z);
        mix = &mix
            + &(k1m + k2m.mapv(|z| 2.0 * z) + k3m.mapv(|z| 2.0 * z) + k4m)
                .mapv(|z| dt / 6.0 * z);

        let total = crate::linalg::trace_of(&coh) + crate::linalg::trace_of(&mix);
        let deviation = (total - Complex64::new(1.0, 0.0)).norm();
        if !deviation.is_finite()
            || fro_norm(&coh) > 1e9
            || deviation > TRACE_DRIFT_PER_STEP * (step + 1) as f64
        {
            return Err(Error::StepTooLarge(format!(
                "combined trace drifted to {:.6} at t = {:.6}",
                total.re,
                (step + 1) as f64 * dt
            )));
        }
        if (step + 1) % save_every == 0 || step + 1 == steps {
            times.push((step + 1) as f64 * dt);
            coh_states.push(coh.clone());
            mix_states.push(mix.clone());
        }
    }
    Ok(SplitTrajectory {
        coh: Trajectory { times: times.clone(), states: coh_states, warnings: Vec::new() },
        mix: Trajectory { times, states: mix_states, warnings: Vec::new() },
    })
}
