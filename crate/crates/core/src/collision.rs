//! Per-target scattering operators on particle (x) target space, and the
//! particle-space operators derived from them.
//!
//! A collision is specified by a hermitian kernel K and a coupling strength
//! lambda. Exact-unitary mode takes S = exp(-i lambda K), which satisfies the
//! optical theorem to machine precision and makes the unitarity-relation
//! checks sharp. Born-truncated mode keeps T to second order in the coupling,
//! mirroring a weak-interaction treatment of the potential.
//!
//! This module is strictly single-target; whole-slab sums live in `slabstep`.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    dagger, exp_hermitian, fro_norm, hermiticity_defect, identity, max_abs, StateVector,
};

/// One member of a target's statistical ensemble.
#[derive(Debug, Clone)]
pub struct TargetState {
    pub label: usize,
    pub vector: StateVector,
    /// Probability q_m of finding the target in this state.
    pub weight: f64,
    /// Center of the target wave function, in the slab's length units.
    pub position: f64,
}

impl TargetState {
    pub fn new(label: usize, vector: StateVector, weight: f64, position: f64) -> Result<Self> {
        if (vector.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized((vector.norm() - 1.0).abs()));
        }
        if !(0.0..=1.0 + 1e-12).contains(&weight) {
            return Err(Error::InvalidConfig(format!("weight {weight} outside [0, 1]")));
        }
        Ok(Self { label, vector, weight, position })
    }
}

/// A target's full ensemble: states with weights summing to one.
#[derive(Debug, Clone)]
pub struct TargetEnsemble {
    states: Vec<TargetState>,
    dim: usize,
}

impl TargetEnsemble {
    pub fn new(states: Vec<TargetState>) -> Result<Self> {
        let dim = states
            .first()
            .map(|s| s.vector.dim())
            .ok_or_else(|| Error::InvalidConfig("ensemble must not be empty".into()))?;
        for s in &states {
            if s.vector.dim() != dim {
                return Err(Error::DimensionMismatch(
                    "ensemble states must share one target dimension".into(),
                ));
            }
        }
        let total: f64 = states.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized((total - 1.0).abs()));
        }
        Ok(Self { states, dim })
    }

    /// Computational-basis ensemble with the given weights.
    pub fn from_weights(weights: &[f64], position: f64) -> Result<Self> {
        let dim = weights.len();
        let states = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| TargetState::new(i, StateVector::basis(dim, i), w, position))
            .collect::<Result<Vec<_>>>()?;
        Self::new(states)
    }

    /// Pure ensemble: a single state with unit weight.
    pub fn pure(vector: StateVector, position: f64) -> Result<Self> {
        let states = vec![TargetState::new(0, vector, 1.0, position)?];
        Self::new(states)
    }

    pub fn states(&self) -> &[TargetState] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_pure(&self) -> bool {
        self.states.len() == 1
    }

    pub fn weights(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.weight).collect()
    }
}

/// How the scattering operator is constructed from the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionMode {
    /// S = exp(-i lambda K); unitary to machine precision.
    ExactUnitary,
    /// T = -lambda K + (i/2) lambda^2 K^2, so 1 + iT matches the exact S
    /// through second order in the coupling.
    BornTruncated,
}

/// A particle-target scattering pair (S, T) with S = 1 + iT.
#[derive(Debug, Clone)]
pub struct CollisionOperator {
    s: Array2<Complex64>,
    t: Array2<Complex64>,
    particle_dim: usize,
    target_dim: usize,
    mode: CollisionMode,
    coupling: f64,
}

/// Construct a collision from a hermitian kernel on particle (x) target.
pub fn build_collision(
    kernel: &Array2<Complex64>,
    particle_dim: usize,
    target_dim: usize,
    coupling: f64,
    mode: CollisionMode,
) -> Result<CollisionOperator> {
    let dim = particle_dim * target_dim;
    if kernel.nrows() != dim || kernel.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "kernel is {}x{}, expected {dim}x{dim}",
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    let scale = max_abs(kernel).max(1e-300);
    let defect = hermiticity_defect(kernel) / scale;
    if defect > 1e-12 {
        return Err(Error::NotHermitian { defect, tol: 1e-12 });
    }
    let i = Complex64::new(0.0, 1.0);
    let (s, t) = match mode {
        CollisionMode::ExactUnitary => {
            let s = exp_hermitian(kernel, Complex64::new(0.0, -coupling))?;
            // T = i (1 - S), so that S = 1 + iT exactly
            let t = (identity(dim) - &s).mapv(|z| i * z);
            (s, t)
        }
        CollisionMode::BornTruncated => {
            let k2 = kernel.dot(kernel);
            let t = kernel.mapv(|z| -coupling * z)
                + k2.mapv(|z| i / 2.0 * coupling * coupling * z);
            let s = identity(dim) + &t.mapv(|z| i * z);
            (s, t)
        }
    };
    Ok(CollisionOperator { s, t, particle_dim, target_dim, mode, coupling })
}

impl CollisionOperator {
    /// Wrap an explicitly given unitary S (used by the toy-model fixtures).
    pub fn from_unitary(
        s: Array2<Complex64>,
        particle_dim: usize,
        target_dim: usize,
    ) -> Result<Self> {
        let dim = particle_dim * target_dim;
        if s.nrows() != dim || s.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "S is {}x{}, expected {dim}x{dim}",
                s.nrows(),
                s.ncols()
            )));
        }
        let defect = fro_norm(&(dagger(&s).dot(&s) - identity(dim)));
        if defect > 1e-12 {
            return Err(Error::NotUnitary { defect, tol: 1e-12 });
        }
        let t = (identity(dim) - &s).mapv(|z| Complex64::new(0.0, 1.0) * z);
        Ok(Self {
            s,
            t,
            particle_dim,
            target_dim,
            mode: CollisionMode::ExactUnitary,
            coupling: f64::NAN,
        })
    }

    pub fn s(&self) -> &Array2<Complex64> {
        &self.s
    }

    pub fn t(&self) -> &Array2<Complex64> {
        &self.t
    }

    pub fn particle_dim(&self) -> usize {
        self.particle_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn mode(&self) -> CollisionMode {
        self.mode
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// ||S^dagger S - 1||_F.
    pub fn unitarity_defect(&self) -> f64 {
        let dim = self.particle_dim * self.target_dim;
        fro_norm(&(dagger(&self.s).dot(&self.s) - identity(dim)))
    }
}

/// Contract the target indices of T with <bra| ... |ket>, leaving a
/// particle-space operator.
fn contract_target(
    c: &CollisionOperator,
    bra: &StateVector,
    ket: &StateVector,
) -> Array2<Complex64> {
    let (pd, td) = (c.particle_dim, c.target_dim);
    let mut out = Array2::zeros((pd, pd));
    for p in 0..pd {
        for q in 0..pd {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..td {
                let ba = bra.amplitudes()[a].conj();
                if ba == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..td {
                    acc += ba * c.t[[p * td + a, q * td + b]] * ket.amplitudes()[b];
                }
            }
            out[[p, q]] = acc;
        }
    }
    out
}

/// D_M^(m) = <m| T |m>: the target-diagonal block of the scattering operator,
/// acting on the particle space only.
pub fn extract_d_m(c: &CollisionOperator, m: &TargetState) -> Result<Array2<Complex64>> {
    if m.vector.dim() != c.target_dim {
        return Err(Error::DimensionMismatch(format!(
            "target state dim {} does not match collision target dim {}",
            m.vector.dim(),
            c.target_dim
        )));
    }
    Ok(contract_target(c, &m.vector, &m.vector))
}

/// A_E^(l,m) = <l| T |m> - <m| T |m> <l|m>: the amplitude for the target to
/// change state, with the unchanged-target component projected out.
pub fn extract_a_e(
    c: &CollisionOperator,
    l: &TargetState,
    m: &TargetState,
) -> Result<Array2<Complex64>> {
    if l.label == m.label {
        return Err(Error::InvalidConfig(
            "A_E is defined for changed targets: l and m must differ".into(),
        ));
    }
    extract_a_e_vectors(c, &l.vector, &m.vector)
}

/// A_E from raw state vectors (no label bookkeeping); used when summing over
/// a complete basis.
pub fn extract_a_e_vectors(
    c: &CollisionOperator,
    l: &StateVector,
    m: &StateVector,
) -> Result<Array2<Complex64>> {
    if l.dim() != c.target_dim || m.dim() != c.target_dim {
        return Err(Error::DimensionMismatch(
            "basis state dim does not match collision target dim".into(),
        ));
    }
    let lm = contract_target(c, l, m);
    let mm = contract_target(c, m, m);
    let overlap = l.inner(m);
    Ok(lm - mm.mapv(|z| overlap * z))
}

/// Computational basis of the given dimension.
pub fn computational_basis(dim: usize) -> Vec<StateVector> {
    (0..dim).map(|i| StateVector::basis(dim, i)).collect()
}

fn check_basis_complete(basis: &[StateVector], dim: usize) -> Result<()> {
    let mut acc: Array2<Complex64> = Array2::zeros((dim, dim));
    for b in basis {
        if b.dim() != dim {
            return Err(Error::DimensionMismatch("basis state has wrong dimension".into()));
        }
        for i in 0..dim {
            for j in 0..dim {
                acc[[i, j]] += b.amplitudes()[i] * b.amplitudes()[j].conj();
            }
        }
    }
    let defect = fro_norm(&(acc - identity(dim)));
    if defect > 1e-10 {
        return Err(Error::IncompleteBasis(defect));
    }
    Ok(())
}

/// The particle-space operator families derived from one target's collision:
/// D_M per ensemble state, A_E per (basis state, ensemble state) pair, and
/// the mixture differences A_M^(n,m) = D_M^(m) - D_M^(n).
#[derive(Debug, Clone)]
pub struct SlabOperators {
    d_m: Vec<(usize, Array2<Complex64>)>,
    a_e: Vec<((usize, usize), Array2<Complex64>)>,
    a_m: Vec<((usize, usize), Array2<Complex64>)>,
}

impl SlabOperators {
    pub fn build(
        c: &CollisionOperator,
        ensemble: &TargetEnsemble,
        basis: &[StateVector],
    ) -> Result<Self> {
        check_basis_complete(basis, c.target_dim)?;
        let mut d_m = Vec::new();
        for m in ensemble.states() {
            d_m.push((m.label, extract_d_m(c, m)?));
        }
        let mut a_e = Vec::new();
        for m in ensemble.states() {
            for (li, l) in basis.iter().enumerate() {
                a_e.push(((li, m.label), extract_a_e_vectors(c, l, &m.vector)?));
            }
        }
        let mut a_m = Vec::new();
        for (i, (ln, dn)) in d_m.iter().enumerate() {
            for (lm, dm) in d_m.iter().skip(i + 1) {
                // A_M^(n,m) = D_M^(m) - D_M^(n); the reversed pair is its
                // negative and generates the same dissipator.
                a_m.push(((*ln, *lm), dm - dn));
            }
        }
        Ok(Self { d_m, a_e, a_m })
    }

    pub fn d_m(&self) -> &[(usize, Array2<Complex64>)] {
        &self.d_m
    }

    pub fn a_e(&self) -> &[((usize, usize), Array2<Complex64>)] {
        &self.a_e
    }

    pub fn a_m(&self) -> &[((usize, usize), Array2<Complex64>)] {
        &self.a_m
    }

    pub fn d_m_for(&self, label: usize) -> Option<&Array2<Complex64>> {
        self.d_m.iter().find(|(l, _)| *l == label).map(|(_, d)| d)
    }

    /// Ensemble-averaged D_M, sum_m q_m D_M^(m).
    pub fn averaged_d_m(&self, ensemble: &TargetEnsemble) -> Array2<Complex64> {
        let dim = self.d_m[0].1.nrows();
        let mut acc = Array2::zeros((dim, dim));
        for s in ensemble.states() {
            if let Some(d) = self.d_m_for(s.label) {
                acc += &d.mapv(|z| s.weight * z);
            }
        }
        acc
    }
}

/// Residual of the single-target unitarity relation,
/// || sum_l A_E^dagger A_E + i D_M - i D_M^dagger + D_M^dagger D_M ||_F.
///
/// Zero (to roundoff) for exact-unitary collisions; for Born-truncated ones
/// it vanishes with the coupling at the truncation order.
pub fn check_unitarity_relation(
    c: &CollisionOperator,
    m: &TargetState,
    basis: &[StateVector],
) -> Result<f64> {
    check_basis_complete(basis, c.target_dim)?;
    let d = extract_d_m(c, m)?;
    let dd = dagger(&d);
    let pd = c.particle_dim;
    let mut acc: Array2<Complex64> = Array2::zeros((pd, pd));
    for l in basis {
        let a = extract_a_e_vectors(c, l, &m.vector)?;
        acc += &dagger(&a).dot(&a);
    }
    let i = Complex64::new(0.0, 1.0);
    acc += &d.mapv(|z| i * z);
    acc -= &dd.mapv(|z| i * z);
    acc += &dd.dot(&d);
    Ok(fro_norm(&acc))
}

/// Least-squares slope of log(y) against log(x); used by the scaling tests.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(ly.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(rng: &mut impl Rng, d: usize) -> Array2<Complex64> {
        let m = Array2::from_shape_fn((d, d), |_| {
            c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        (&m + &dagger(&m)).mapv(|z| z / 2.0)
    }

    fn random_target_state(rng: &mut impl Rng, dim: usize, label: usize) -> TargetState {
        let amps: Vec<Complex64> =
            (0..dim).map(|_| c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let v = StateVector::from_slice(&amps, vec![dim]).unwrap().normalize().unwrap();
        TargetState::new(label, v, 1.0, 0.0).unwrap()
    }

    #[test]
    fn zero_coupling_gives_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = random_hermitian(&mut rng, 4);
        for mode in [CollisionMode::ExactUnitary, CollisionMode::BornTruncated] {
            let c = build_collision(&k, 2, 2, 0.0, mode).unwrap();
            assert!(fro_norm(&(c.s() - &identity(4))) < 1e-14);
            assert!(fro_norm(c.t()) < 1e-14);
        }
    }

    #[test]
    fn exact_mode_is_unitary_for_any_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &lam in &[0.1, 0.5, 1.0, 3.0] {
            let k = random_hermitian(&mut rng, 6);
            let c = build_collision(&k, 2, 3, lam, CollisionMode::ExactUnitary).unwrap();
            assert!(
                c.unitarity_defect() < 1e-12,
                "defect {} at lambda {lam}",
                c.unitarity_defect()
            );
        }
    }

    #[test]
    fn non_hermitian_kernel_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut k = random_hermitian(&mut rng, 4);
        k[[0, 1]] += c64(0.1, 0.0);
        assert!(matches!(
            build_collision(&k, 2, 2, 0.1, CollisionMode::ExactUnitary),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn born_matches_exact_through_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = random_hermitian(&mut rng, 4);
        let lams = [0.02, 0.04, 0.08];
        let mut errs = Vec::new();
        for &lam in &lams {
            let cb = build_collision(&k, 2, 2, lam, CollisionMode::BornTruncated).unwrap();
            let ce = build_collision(&k, 2, 2, lam, CollisionMode::ExactUnitary).unwrap();
            errs.push(fro_norm(&(cb.s() - ce.s())));
        }
        let slope = log_log_slope(&lams, &errs);
        assert!((slope - 3.0).abs() < 0.1, "S truncation error slope {slope}");
    }

    #[test]
    fn born_unitarity_defect_scaling() {
        // For the truncated exponential of an anti-hermitian generator the
        // odd-order defect terms cancel exactly: S^dagger S - 1 =
        // (lambda K)^4 / 4, so the measured exponent is 4; the defect is
        // in particular O(lambda^3) as an upper bound.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = random_hermitian(&mut rng, 4);
        let lams = [0.02, 0.04, 0.08];
        let defects: Vec<f64> = lams
            .iter()
            .map(|&lam| {
                build_collision(&k, 2, 2, lam, CollisionMode::BornTruncated)
                    .unwrap()
                    .unitarity_defect()
            })
            .collect();
        let slope = log_log_slope(&lams, &defects);
        assert!(slope >= 2.9, "defect must vanish at least cubically, slope {slope}");
        assert!((slope - 4.0).abs() < 0.1, "quartic cancellation, slope {slope}");
        // pointwise: defect equals ||(lambda K)^4||_F / 4
        let lam = 0.04f64;
        let k4 = k.dot(&k).dot(&k).dot(&k);
        let expect = lam.powi(4) * fro_norm(&k4) / 4.0;
        assert_abs_diff_eq!(defects[1], expect, epsilon = 1e-12);
    }

    #[test]
    fn d_m_vanishes_for_zero_t_and_orthogonal_sector() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let k = random_hermitian(&mut rng, 4);
        let c = build_collision(&k, 2, 2, 0.0, CollisionMode::ExactUnitary).unwrap();
        let m = random_target_state(&mut rng, 2, 0);
        assert!(fro_norm(&extract_d_m(&c, &m).unwrap()) < 1e-14);

        // T = A (x) |a><a| and m = |b> orthogonal to |a>: D_M = 0
        let a = Array2::from_shape_fn((2, 2), |_| c64(rng.gen(), rng.gen()));
        let proj_a = {
            let mut p = Array2::zeros((2, 2));
            p[[0, 0]] = c64(1.0, 0.0);
            p
        };
        let t = ndarray::linalg::kron(&a, &proj_a);
        let s = identity(4) + &t.mapv(|z| c64(0.0, 1.0) * z);
        let c = CollisionOperator {
            s,
            t,
            particle_dim: 2,
            target_dim: 2,
            mode: CollisionMode::BornTruncated,
            coupling: 1.0,
        };
        let m_b = TargetState::new(1, StateVector::basis(2, 1), 1.0, 0.0).unwrap();
        assert!(fro_norm(&extract_d_m(&c, &m_b).unwrap()) < 1e-14);
    }

    #[test]
    fn d_m_matches_contraction_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = random_hermitian(&mut rng, 6);
        let c = build_collision(&k, 2, 3, 0.3, CollisionMode::ExactUnitary).unwrap();
        let m = random_target_state(&mut rng, 3, 0);
        let d = extract_d_m(&c, &m).unwrap();
        // oracle: explicit double contraction over target indices
        for p in 0..2 {
            for q in 0..2 {
                let mut acc = c64(0.0, 0.0);
                for a in 0..3 {
                    for b in 0..3 {
                        acc += m.vector.amplitudes()[a].conj()
                            * c.t()[[p * 3 + a, q * 3 + b]]
                            * m.vector.amplitudes()[b];
                    }
                }
                assert_abs_diff_eq!((d[[p, q]] - acc).norm(), 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn a_e_direct_substitution_case() {
        // T = A (x) |l><m| with orthonormal l, m gives A_E^(l,m) = A.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Array2::from_shape_fn((2, 2), |_| c64(rng.gen(), rng.gen()));
        let mut flip = Array2::zeros((2, 2));
        flip[[1, 0]] = c64(1.0, 0.0); // |l=1><m=0|
        let t = ndarray::linalg::kron(&a, &flip);
        let s = identity(4) + &t.mapv(|z| c64(0.0, 1.0) * z);
        let c = CollisionOperator {
            s,
            t,
            particle_dim: 2,
            target_dim: 2,
            mode: CollisionMode::BornTruncated,
            coupling: 1.0,
        };
        let l = TargetState::new(1, StateVector::basis(2, 1), 0.5, 0.0).unwrap();
        let m = TargetState::new(0, StateVector::basis(2, 0), 0.5, 0.0).unwrap();
        let a_e = extract_a_e(&c, &l, &m).unwrap();
        assert!(fro_norm(&(a_e - a)) < 1e-14);
    }

    #[test]
    fn a_e_rejects_equal_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = random_hermitian(&mut rng, 4);
        let c = build_collision(&k, 2, 2, 0.1, CollisionMode::ExactUnitary).unwrap();
        let m = random_target_state(&mut rng, 2, 3);
        let l = random_target_state(&mut rng, 2, 3);
        assert!(extract_a_e(&c, &l, &m).is_err());
    }

    #[test]
    fn a_e_matches_contraction_oracle_for_non_orthogonal_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let k = random_hermitian(&mut rng, 6);
        let c = build_collision(&k, 2, 3, 0.4, CollisionMode::ExactUnitary).unwrap();
        let l = random_target_state(&mut rng, 3, 0);
        let m = random_target_state(&mut rng, 3, 1);
        let a_e = extract_a_e(&c, &l, &m).unwrap();
        let overlap = l.vector.inner(&m.vector);
        for p in 0..2 {
            for q in 0..2 {
                let mut lm = c64(0.0, 0.0);
                let mut mm = c64(0.0, 0.0);
                for a in 0..3 {
                    for b in 0..3 {
                        let tt = c.t()[[p * 3 + a, q * 3 + b]];
                        lm += l.vector.amplitudes()[a].conj() * tt * m.vector.amplitudes()[b];
                        mm += m.vector.amplitudes()[a].conj() * tt * m.vector.amplitudes()[b];
                    }
                }
                let expect = lm - mm * overlap;
                assert_abs_diff_eq!((a_e[[p, q]] - expect).norm(), 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn a_e_depends_only_on_its_target_block() {
        // Adding B (x) |m><m'| with m' orthogonal to m leaves A_E^(l,m)
        // unchanged for any l orthogonal to m.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = random_hermitian(&mut rng, 6);
        let base = build_collision(&k, 2, 3, 0.4, CollisionMode::ExactUnitary).unwrap();
        let b = Array2::from_shape_fn((2, 2), |_| c64(rng.gen(), rng.gen()));
        let mut shift = Array2::zeros((3, 3));
        shift[[0, 2]] = c64(1.0, 0.0); // |m=0><m'=2|
        let t2 = base.t() + &ndarray::linalg::kron(&b, &shift);
        let modified = CollisionOperator {
            s: identity(6) + &t2.mapv(|z| c64(0.0, 1.0) * z),
            t: t2,
            particle_dim: 2,
            target_dim: 3,
            mode: CollisionMode::BornTruncated,
            coupling: 0.4,
        };
        let l = TargetState::new(1, StateVector::basis(3, 1), 0.5, 0.0).unwrap();
        let m = TargetState::new(0, StateVector::basis(3, 0), 0.5, 0.0).unwrap();
        let a1 = extract_a_e(&base, &l, &m).unwrap();
        let a2 = extract_a_e(&modified, &l, &m).unwrap();
        assert!(fro_norm(&(a1 - a2)) < 1e-13);
    }

    #[test]
    fn unitarity_relation_zero_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = random_hermitian(&mut rng, 4);
        let c = build_collision(&k, 2, 2, 0.0, CollisionMode::ExactUnitary).unwrap();
        let m = random_target_state(&mut rng, 2, 0);
        let basis = computational_basis(2);
        assert!(check_unitarity_relation(&c, &m, &basis).unwrap() < 1e-14);
    }

    #[test]
    fn unitarity_relation_exact_mode_is_sharp() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for trial in 0..20 {
            let lam = 0.05 + 0.95 * rng.gen::<f64>();
            let k = random_hermitian(&mut rng, 6);
            let c = build_collision(&k, 2, 3, lam, CollisionMode::ExactUnitary).unwrap();
            let m = random_target_state(&mut rng, 3, 0);
            let basis = computational_basis(3);
            let r = check_unitarity_relation(&c, &m, &basis).unwrap();
            assert!(r <= 1e-10, "trial {trial}: residual {r} at lambda {lam}");
        }
    }

    #[test]
    fn unitarity_relation_born_scaling() {
        // The residual equals ||<m| S^dagger S - 1 |m>||, which inherits the
        // quartic cancellation of the truncated exponential.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let k = random_hermitian(&mut rng, 4);
        let m = random_target_state(&mut rng, 2, 0);
        let basis = computational_basis(2);
        let lams = [0.01, 0.02, 0.05, 0.1];
        let residuals: Vec<f64> = lams
            .iter()
            .map(|&lam| {
                let c = build_collision(&k, 2, 2, lam, CollisionMode::BornTruncated).unwrap();
                check_unitarity_relation(&c, &m, &basis).unwrap()
            })
            .collect();
        let slope = log_log_slope(&lams, &residuals);
        assert!(slope >= 2.9, "residual must vanish at least cubically, slope {slope}");
    }

    #[test]
    fn incomplete_basis_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let k = random_hermitian(&mut rng, 6);
        let c = build_collision(&k, 2, 3, 0.2, CollisionMode::ExactUnitary).unwrap();
        let m = random_target_state(&mut rng, 3, 0);
        let basis = vec![StateVector::basis(3, 0), StateVector::basis(3, 1)];
        assert!(matches!(
            check_unitarity_relation(&c, &m, &basis),
            Err(Error::IncompleteBasis(_))
        ));
    }

    #[test]
    fn ensemble_weights_must_sum_to_one() {
        assert!(TargetEnsemble::from_weights(&[0.5, 0.4], 0.0).is_err());
        let e = TargetEnsemble::from_weights(&[0.5, 0.5], 0.0).unwrap();
        assert_abs_diff_eq!(e.weights().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn slab_operators_satisfy_a_m_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let k = random_hermitian(&mut rng, 4);
        let c = build_collision(&k, 2, 2, 0.3, CollisionMode::ExactUnitary).unwrap();
        let ensemble = TargetEnsemble::from_weights(&[0.25, 0.75], 0.0).unwrap();
        let ops = SlabOperators::build(&c, &ensemble, &computational_basis(2)).unwrap();
        for ((n, m), a) in ops.a_m() {
            let dn = ops.d_m_for(*n).unwrap();
            let dm = ops.d_m_for(*m).unwrap();
            assert!(fro_norm(&(a - &(dm - dn))) < 1e-15);
        }
        // pure ensemble has no mixture operators
        let pure = TargetEnsemble::pure(StateVector::basis(2, 0), 0.0).unwrap();
        let ops_pure = SlabOperators::build(&c, &pure, &computational_basis(2)).unwrap();
        assert!(ops_pure.a_m().is_empty());
    }
}
