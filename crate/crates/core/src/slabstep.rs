//! One-step evolution of the particle across a thin slab of targets: the
//! reduced-density-matrix map, the slab's own update, and the orthogonal
//! footprint/coherent decomposition of the out state.
//!
//! The double sum over slab configurations is evaluated factorized per
//! target (the crossed products of different targets' scattering operators
//! are dropped by construction), so cost grows linearly in the number of
//! targets instead of exponentially.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::collision::{
    computational_basis, CollisionMode, CollisionOperator, SlabOperators, TargetEnsemble,
    TargetState,
};
use crate::error::{Error, Result};
use crate::linalg::{dagger, identity, DensityMatrix, StateVector};

/// A thin slab: per-target ensembles, per-target collisions, and geometry.
#[derive(Debug, Clone)]
pub struct SlabSpec {
    targets: Vec<TargetEnsemble>,
    collisions: Vec<CollisionOperator>,
    /// Slab thickness delta.
    width: f64,
    /// Mean particle speed v; the crossing time is delta / v.
    speed: f64,
    /// Target number density n.
    density: f64,
}

impl SlabSpec {
    pub fn new(
        targets: Vec<TargetEnsemble>,
        collisions: Vec<CollisionOperator>,
        width: f64,
        speed: f64,
        density: f64,
    ) -> Result<Self> {
        if targets.len() != collisions.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} target ensembles but {} collisions",
                targets.len(),
                collisions.len()
            )));
        }
        if width <= 0.0 || speed <= 0.0 {
            return Err(Error::InvalidConfig("slab width and speed must be positive".into()));
        }
        if let Some(first) = collisions.first() {
            let pd = first.particle_dim();
            for (e, c) in targets.iter().zip(collisions.iter()) {
                if c.particle_dim() != pd {
                    return Err(Error::DimensionMismatch(
                        "collisions disagree on the particle dimension".into(),
                    ));
                }
                if c.target_dim() != e.dim() {
                    return Err(Error::DimensionMismatch(
                        "collision target dimension does not match its ensemble".into(),
                    ));
                }
            }
        }
        Ok(Self { targets, collisions, width, speed, density })
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn targets(&self) -> &[TargetEnsemble] {
        &self.targets
    }

    pub fn collisions(&self) -> &[CollisionOperator] {
        &self.collisions
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn v_over_delta(&self) -> f64 {
        self.speed / self.width
    }

    pub fn particle_dim(&self) -> usize {
        self.collisions.first().map(|c| c.particle_dim()).unwrap_or(0)
    }

    /// Subsystem dimensions of particle (x) all targets, slab order.
    pub fn full_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.particle_dim()];
        dims.extend(self.targets.iter().map(|e| e.dim()));
        dims
    }

    /// All target ensembles share weights and all collisions share matrices.
    pub fn is_homogeneous(&self) -> bool {
        let Some(first_e) = self.targets.first() else { return true };
        let Some(first_c) = self.collisions.first() else { return true };
        let w0 = first_e.weights();
        self.targets.iter().all(|e| e.weights() == w0 && e.dim() == first_e.dim())
            && self
                .collisions
                .iter()
                .all(|c| crate::linalg::fro_norm(&(c.t() - first_c.t())) < 1e-14)
    }
}

/// A family of slabs sharing kernels and geometry, parameterized by the
/// coupling strength; used by the convergence sweeps.
#[derive(Debug, Clone)]
pub struct SlabFamily {
    pub kernels: Vec<Array2<Complex64>>,
    pub ensembles: Vec<TargetEnsemble>,
    pub particle_dim: usize,
    pub width: f64,
    pub speed: f64,
    pub density: f64,
}

impl SlabFamily {
    pub fn slab(&self, coupling: f64, mode: CollisionMode) -> Result<SlabSpec> {
        let collisions = self
            .kernels
            .iter()
            .zip(self.ensembles.iter())
            .map(|(k, e)| {
                crate::collision::build_collision(k, self.particle_dim, e.dim(), coupling, mode)
            })
            .collect::<Result<Vec<_>>>()?;
        SlabSpec::new(self.ensembles.clone(), collisions, self.width, self.speed, self.density)
    }
}

/// A mixed particle input given as pure states with probabilities.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    members: Vec<(StateVector, f64)>,
}

impl ParticleEnsemble {
    pub fn new(members: Vec<(StateVector, f64)>) -> Result<Self> {
        let total: f64 = members.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized((total - 1.0).abs()));
        }
        Ok(Self { members })
    }

    pub fn pure(state: StateVector) -> Result<Self> {
        Self::new(vec![(state, 1.0)])
    }

    pub fn members(&self) -> &[(StateVector, f64)] {
        &self.members
    }
}

/// How the out state is assembled from the per-target scattering operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplicationMode {
    /// (1 + i sum_j T_j) |in>; the slab-level impulse approximation.
    Truncated,
    /// Sequential application of each S_j; used by oracle comparisons.
    Sequential,
}

/// Apply an operator living on (particle, target j) to a full-space vector.
pub(crate) fn apply_particle_target_op(
    op: &Array2<Complex64>,
    dims: &[usize],
    target_index: usize,
    v: &Array1<Complex64>,
) -> Array1<Complex64> {
    let pd = dims[0];
    let td = dims[target_index];
    let full: usize = dims.iter().product();
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len() - 1).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let sp = strides[0];
    let st = strides[target_index];

    let mut out = Array1::zeros(full);
    // Enumerate the flat indices with particle and target-j digits both zero;
    // everything else is a spectator.
    for base in 0..full {
        let p = (base / sp) % pd;
        let t = (base / st) % td;
        if p != 0 || t != 0 {
            continue;
        }
        for pi in 0..pd {
            for ti in 0..td {
                let row = pi * td + ti;
                let mut acc = Complex64::new(0.0, 0.0);
                for pj in 0..pd {
                    for tj in 0..td {
                        let val = op[[row, pj * td + tj]];
                        if val != Complex64::new(0.0, 0.0) {
                            acc += val * v[base + pj * sp + tj * st];
                        }
                    }
                }
                out[base + pi * sp + ti * st] += acc;
            }
        }
    }
    out
}

/// Out state for the particle and a pure slab configuration.
pub fn out_state(
    phi: &StateVector,
    slab_pure: &[TargetState],
    slab: &SlabSpec,
    mode: ApplicationMode,
) -> Result<StateVector> {
    if slab_pure.len() != slab.n_targets() {
        return Err(Error::DimensionMismatch(
            "configuration must name one state per target".into(),
        ));
    }
    if phi.dim() != slab.particle_dim() {
        return Err(Error::DimensionMismatch("particle state has wrong dimension".into()));
    }
    let dims = slab.full_dims();
    let mut joint = phi.clone();
    for m in slab_pure {
        joint = joint.tensor(&m.vector);
    }
    let v0 = joint.amplitudes().clone();
    let amplitudes = match mode {
        ApplicationMode::Truncated => {
            let mut acc = v0.clone();
            for (j, c) in slab.collisions().iter().enumerate() {
                let tv = apply_particle_target_op(c.t(), &dims, j + 1, &v0);
                acc = acc + tv.mapv(|z| Complex64::new(0.0, 1.0) * z);
            }
            acc
        }
        ApplicationMode::Sequential => {
            let mut acc = v0;
            for (j, c) in slab.collisions().iter().enumerate() {
                acc = apply_particle_target_op(c.s(), &dims, j + 1, &acc);
            }
            acc
        }
    };
    StateVector::new(amplitudes, dims)
}

/// Split an out state into the piece that leaves the slab configuration
/// intact and the orthogonal footprint left behind:
/// out = phi' (x) |m> + footprint.
pub fn footprint_decompose(
    out: &StateVector,
    slab_pure: &[TargetState],
) -> Result<(StateVector, StateVector)> {
    let dims = out.dims().to_vec();
    if dims.len() != slab_pure.len() + 1 {
        return Err(Error::DimensionMismatch(
            "out state dims do not match the slab configuration".into(),
        ));
    }
    let pd = dims[0];
    let mut m_full = slab_pure[0].vector.clone();
    for s in &slab_pure[1..] {
        m_full = m_full.tensor(&s.vector);
    }
    let slab_dim: usize = dims[1..].iter().product();

    let mut phi = Array1::zeros(pd);
    for p in 0..pd {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..slab_dim {
            acc += m_full.amplitudes()[t].conj() * out.amplitudes()[p * slab_dim + t];
        }
        phi[p] = acc;
    }
    // footprint = out - phi' (x) |m>
    let mut fp = out.amplitudes().clone();
    for p in 0..pd {
        for t in 0..slab_dim {
            fp[p * slab_dim + t] -= phi[p] * m_full.amplitudes()[t];
        }
    }
    let phi_prime = StateVector::new(phi, vec![pd])?;
    let footprint = StateVector::new(fp, dims)?;
    Ok((phi_prime, footprint))
}

pub(crate) struct PerTargetOperators {
    pub ops: Vec<SlabOperators>,
    /// Ensemble-averaged D_M per target.
    pub dbar: Vec<Array2<Complex64>>,
}

pub(crate) fn per_target_operators(slab: &SlabSpec) -> Result<PerTargetOperators> {
    let mut ops = Vec::new();
    let mut dbar = Vec::new();
    for (c, e) in slab.collisions().iter().zip(slab.targets().iter()) {
        let basis = computational_basis(e.dim());
        let so = SlabOperators::build(c, e, &basis)?;
        dbar.push(so.averaged_d_m(e));
        ops.push(so);
    }
    Ok(PerTargetOperators { ops, dbar })
}

/// One crossing of the slab: the map on the particle's reduced density
/// matrix. Mixed particle inputs are handled by linearity.
pub fn one_step(rho_in: &DensityMatrix, slab: &SlabSpec) -> Result<DensityMatrix> {
    if slab.n_targets() == 0 {
        return Ok(rho_in.clone());
    }
    let pd = slab.particle_dim();
    if rho_in.dim() != pd {
        return Err(Error::DimensionMismatch(format!(
            "particle state dim {} does not match slab particle dim {pd}",
            rho_in.dim()
        )));
    }
    let pt = per_target_operators(slab)?;
    let rho = rho_in.elements();

    // Coherent bracket with the whole-slab averaged D: (1+iB) rho (1-iB^+).
    let mut b: Array2<Complex64> = Array2::zeros((pd, pd));
    for d in &pt.dbar {
        b += d;
    }
    let one_ib = identity(pd) + &b.mapv(|z| Complex64::new(0.0, 1.0) * z);
    let mut out = one_ib.dot(rho).dot(&dagger(&one_ib));

    for ((so, dbar), ensemble) in pt.ops.iter().zip(pt.dbar.iter()).zip(slab.targets().iter()) {
        // Per-target mixture correction: sum_m q D rho D^+ - Dbar rho Dbar^+.
        for m in ensemble.states() {
            let d = so.d_m_for(m.label).expect("built above");
            out += &d.dot(rho).dot(&dagger(d)).mapv(|z| m.weight * z);
        }
        out -= &dbar.dot(rho).dot(&dagger(dbar));

        // Footprint term: sum_m q sum_l A rho A^+.
        for ((_, m_label), a) in so.a_e() {
            let q = ensemble
                .states()
                .iter()
                .find(|s| s.label == *m_label)
                .map(|s| s.weight)
                .unwrap_or(0.0);
            if q == 0.0 {
                continue;
            }
            out += &a.dot(rho).dot(&dagger(a)).mapv(|z| q * z);
        }
    }
    Ok(DensityMatrix::new_unchecked(out, vec![pd]))
}

/// The slab's reduced density matrix after one crossing, with the roles of
/// particle and slab exchanged.
pub fn slab_update(
    rho_slab_in: &DensityMatrix,
    particle: &ParticleEnsemble,
    slab: &SlabSpec,
) -> Result<DensityMatrix> {
    if slab.n_targets() == 0 {
        return Ok(rho_slab_in.clone());
    }
    let dims = slab.full_dims();
    let pd = dims[0];
    let slab_dims: Vec<usize> = dims[1..].to_vec();
    let slab_dim: usize = slab_dims.iter().product();
    if rho_slab_in.dim() != slab_dim {
        return Err(Error::DimensionMismatch("slab state has wrong dimension".into()));
    }

    // <a| T_j |b> over the particle index, embedded on the slab space.
    let contract_particle = |c: &CollisionOperator,
                             j: usize,
                             a: &StateVector,
                             b: &StateVector|
     -> Array2<Complex64> {
        let td = c.target_dim();
        let mut block = Array2::zeros((td, td));
        for t in 0..td {
            for u in 0..td {
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..pd {
                    for q in 0..pd {
                        acc += a.amplitudes()[p].conj()
                            * c.t()[[p * td + t, q * td + u]]
                            * b.amplitudes()[q];
                    }
                }
                block[[t, u]] = acc;
            }
        }
        crate::linalg::LinearOperator::new(block, slab_dims.clone(), vec![j])
            .expect("consistent dims")
            .embed()
    };

    let basis = computational_basis(pd);
    let rho = rho_slab_in.elements();
    let mut out: Array2<Complex64> = Array2::zeros((slab_dim, slab_dim));
    for (phi, p_n) in particle.members() {
        if phi.dim() != pd {
            return Err(Error::DimensionMismatch("ensemble member has wrong dimension".into()));
        }
        if (phi.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized((phi.norm() - 1.0).abs()));
        }
        let mut d_tilde: Array2<Complex64> = Array2::zeros((slab_dim, slab_dim));
        for (j, c) in slab.collisions().iter().enumerate() {
            d_tilde += &contract_particle(c, j, phi, phi);
        }
        let bracket = identity(slab_dim) + &d_tilde.mapv(|z| Complex64::new(0.0, 1.0) * z);
        out += &bracket.dot(rho).dot(&dagger(&bracket)).mapv(|z| *p_n * z);

        for l in &basis {
            let mut a_tilde: Array2<Complex64> = Array2::zeros((slab_dim, slab_dim));
            for (j, c) in slab.collisions().iter().enumerate() {
                a_tilde += &contract_particle(c, j, l, phi);
            }
            let overlap = l.inner(phi);
            a_tilde -= &d_tilde.mapv(|z| overlap * z);
            out += &a_tilde.dot(rho).dot(&dagger(&a_tilde)).mapv(|z| *p_n * z);
        }
    }
    Ok(DensityMatrix::new_unchecked(out, slab_dims))
}

/// Probability that any target changes state during the crossing, and the
/// probability that none does. The two are computed through independent
/// routes (footprint quadratic forms vs D_M forms); their sum is one exactly
/// when the collisions are exactly unitary.
pub fn change_probabilities(rho_in: &DensityMatrix, slab: &SlabSpec) -> Result<(f64, f64)> {
    let pd = slab.particle_dim();
    if slab.n_targets() == 0 {
        return Ok((0.0, 1.0));
    }
    if rho_in.dim() != pd {
        return Err(Error::DimensionMismatch("particle state has wrong dimension".into()));
    }
    let rho = rho_in.elements();
    let pt = per_target_operators(slab)?;

    let mut p_change = 0.0;
    let mut d_route = 0.0;
    for (so, ensemble) in pt.ops.iter().zip(slab.targets().iter()) {
        for ((_, m_label), a) in so.a_e() {
            let q = ensemble
                .states()
                .iter()
                .find(|s| s.label == *m_label)
                .map(|s| s.weight)
                .unwrap_or(0.0);
            let quad = dagger(a).dot(a).dot(rho);
            p_change += q * crate::linalg::trace_of(&quad).re;
        }
        for m in ensemble.states() {
            let d = so.d_m_for(m.label).expect("built above");
            let dd = dagger(d);
            // i (D^+ - D) - D^+ D
            let combo = (dd.clone() - d).mapv(|z| Complex64::new(0.0, 1.0) * z) - dd.dot(d);
            d_route += m.weight * crate::linalg::trace_of(&combo.dot(rho)).re;
        }
    }
    let p_no_change = 1.0 - d_route;
    Ok((p_change, p_no_change))
}

/// The footprint toy: |1>|a> scatters into (|1>|a> - |2>|b>)/sqrt(2).
/// Rotation by pi/4 in the {|1 a>, |2 b>} plane, identity elsewhere.
pub fn footprint_toy_collision() -> CollisionOperator {
    let c = 1.0 / 2.0f64.sqrt();
    let one = Complex64::new(1.0, 0.0);
    let mut s = Array2::zeros((4, 4));
    s[[0, 0]] = Complex64::new(c, 0.0);
    s[[3, 0]] = Complex64::new(-c, 0.0);
    s[[0, 3]] = Complex64::new(c, 0.0);
    s[[3, 3]] = Complex64::new(c, 0.0);
    s[[1, 1]] = one;
    s[[2, 2]] = one;
    CollisionOperator::from_unitary(s, 2, 2).expect("rotation is unitary")
}

/// The mixture toy: flip the particle when the box is in |b>, leave the box
/// untouched either way.
pub fn mixture_toy_collision() -> CollisionOperator {
    let one = Complex64::new(1.0, 0.0);
    let mut s = Array2::zeros((4, 4));
    s[[0, 0]] = one; // |1 a> -> |1 a>
    s[[2, 2]] = one; // |2 a> -> |2 a>
    s[[3, 1]] = one; // |1 b> -> |2 b>
    s[[1, 3]] = one; // |2 b> -> |1 b>
    CollisionOperator::from_unitary(s, 2, 2).expect("permutation is unitary")
}
