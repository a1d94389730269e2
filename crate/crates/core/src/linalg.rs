//! Complex linear-algebra substrate: state vectors, density matrices and
//! operators over an ordered list of subsystems, tensor products, partial
//! traces and hermiticity/positivity diagnostics.
//!
//! Subsystem ordering convention used throughout the crate: index 0 is the
//! particle, indices 1..N are the targets in slab order. Storage is dense;
//! all dimensions here are desk scale.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, EigValsh, Eigh, Inverse, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Validation tolerances. Defaults: 1e-12 for hermiticity (relative to the
/// largest element), -1e-9 for the smallest admissible eigenvalue.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub hermiticity: f64,
    pub positivity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { hermiticity: 1e-12, positivity: 1e-9 }
    }
}

/// Health report for a density matrix. Produced by [`DensityMatrix::validate`];
/// never mutates the input.
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    /// max_ij |rho_ij - conj(rho_ji)| / 2, relative to the largest element.
    pub hermiticity_defect: f64,
    /// Smallest eigenvalue of the hermitized matrix.
    pub min_eigenvalue: f64,
    /// |Tr rho - 1|.
    pub trace_deviation: f64,
}

impl Diagnostics {
    pub fn is_healthy(&self, tol: &Tolerances) -> bool {
        self.hermiticity_defect <= tol.hermiticity && self.min_eigenvalue >= -tol.positivity
    }
}

pub(crate) fn product_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Conjugate transpose.
pub fn dagger(m: &Array2<Complex64>) -> Array2<Complex64> {
    m.t().mapv(|z| z.conj())
}

/// max_ij |m_ij|.
pub fn max_abs(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn fro_norm(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// max_ij |m_ij - conj(m_ji)| / 2.
pub fn hermiticity_defect(m: &Array2<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm() / 2.0);
        }
    }
    worst
}

pub fn identity(dim: usize) -> Array2<Complex64> {
    Array2::eye(dim)
}

/// ||a b - b a||_F.
pub fn commutator_norm(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    fro_norm(&(a.dot(b) - b.dot(a)))
}

/// Eigenvalues of a (numerically) hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &Array2<Complex64>) -> Result<Array1<f64>> {
    let sym = (m + &dagger(m)).mapv(|z| z / 2.0);
    Ok(sym.eigvalsh(UPLO::Lower)?)
}

/// Hermitian eigendecomposition with eigenvectors as columns of the returned
/// matrix: `m = v diag(w) v^dagger`.
///
/// The backend computes the decomposition of the transposed (row-major)
/// matrix, so the raw output needs a conjugation; this wrapper hides that.
pub fn eigh_decomp(m: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let (w, v) = m.eigh(UPLO::Lower)?;
    Ok((w, v.mapv(|z| z.conj())))
}

/// exp(scale * K) for hermitian K, via eigendecomposition.
pub fn exp_hermitian(k: &Array2<Complex64>, scale: Complex64) -> Result<Array2<Complex64>> {
    let (w, v) = eigh_decomp(k)?;
    let vd = dagger(&v);
    let mut phases = Array2::zeros((w.len(), w.len()));
    for (i, wi) in w.iter().enumerate() {
        phases[[i, i]] = (scale * wi).exp();
    }
    Ok(v.dot(&phases).dot(&vd))
}

/// Principal matrix logarithm of a unitary matrix.
///
/// Eigenvalues within `branch_tol` of -1 abort with a branch-cut error rather
/// than silently picking a branch. Degenerate eigenvector clusters are
/// re-orthonormalized so the reconstruction stays accurate.
pub fn log_unitary(s: &Array2<Complex64>, branch_tol: f64) -> Result<Array2<Complex64>> {
    let (evals, vecs) = s.eig()?;
    for ev in evals.iter() {
        if (ev + Complex64::new(1.0, 0.0)).norm() < branch_tol {
            return Err(Error::BranchCut(branch_tol));
        }
    }
    let n = evals.len();
    let mut v = vecs;

    // Gram-Schmidt within clusters of nearly equal eigenvalues; eigenvectors
    // of distinct eigenvalues of a unitary are already orthogonal.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| evals[a].arg().partial_cmp(&evals[b].arg()).unwrap());
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && (evals[order[j]] - evals[order[i]]).norm() < 1e-8 {
            j += 1;
        }
        for a in i..j {
            for b in i..a {
                let (ca, cb) = (order[a], order[b]);
                let overlap: Complex64 =
                    (0..n).map(|r| v[[r, cb]].conj() * v[[r, ca]]).sum();
                for r in 0..n {
                    let vb = v[[r, cb]];
                    v[[r, ca]] -= overlap * vb;
                }
            }
            let ca = order[a];
            let norm: f64 = (0..n).map(|r| v[[r, ca]].norm_sqr()).sum::<f64>().sqrt();
            for r in 0..n {
                v[[r, ca]] /= Complex64::new(norm, 0.0);
            }
        }
        i = j;
    }

    let mut log_d = Array2::zeros((n, n));
    for (idx, ev) in evals.iter().enumerate() {
        log_d[[idx, idx]] = Complex64::new(ev.norm().ln(), ev.arg());
    }
    // V is close to unitary but zgeev does not guarantee it to working
    // precision; invert explicitly.
    let v_inv = v.inv()?;
    Ok(v.dot(&log_d).dot(&v_inv))
}

/// A pure state over an ordered list of subsystems.
#[derive(Debug, Clone)]
pub struct StateVector {
    amplitudes: Array1<Complex64>,
    dims: Vec<usize>,
    normalized: bool,
}

impl StateVector {
    pub fn new(amplitudes: Array1<Complex64>, dims: Vec<usize>) -> Result<Self> {
        if product_dim(&dims) != amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude length {} does not match subsystem dims {:?}",
                amplitudes.len(),
                dims
            )));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::DimensionMismatch("non-finite amplitudes".into()));
        }
        let normalized = (norm - 1.0).abs() < 1e-12;
        Ok(Self { amplitudes, dims, normalized })
    }

    /// Basis vector |index> of a single subsystem of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amp = Array1::zeros(dim);
        amp[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes: amp, dims: vec![dim], normalized: true }
    }

    pub fn from_slice(amplitudes: &[Complex64], dims: Vec<usize>) -> Result<Self> {
        Self::new(Array1::from(amplitudes.to_vec()), dims)
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amplitudes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::NotNormalized(1.0));
        }
        Self::new(self.amplitudes.mapv(|z| z / n), self.dims.clone())
    }

    /// <self|other>.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Kronecker product; dims concatenated, self first.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut amp = Array1::zeros(self.dim() * other.dim());
        for (i, a) in self.amplitudes.iter().enumerate() {
            for (j, b) in other.amplitudes.iter().enumerate() {
                amp[i * other.dim() + j] = a * b;
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { amplitudes: amp, dims, normalized: false }
            .with_recomputed_flag()
    }

    fn with_recomputed_flag(mut self) -> Self {
        self.normalized = (self.norm() - 1.0).abs() < 1e-12;
        self
    }

    /// Outer product |self><self| as a density matrix (unnormalized input
    /// allowed; the flag follows the squared norm).
    pub fn projector(&self) -> DensityMatrix {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityMatrix {
            elements: m,
            dims: self.dims.clone(),
            normalized: (self.norm() - 1.0).abs() < 1e-12,
        }
    }
}

/// A (possibly unnormalized) density matrix over an ordered list of
/// subsystems. Construction checks hermiticity; positivity is reported by
/// [`DensityMatrix::validate`].
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    elements: Array2<Complex64>,
    dims: Vec<usize>,
    normalized: bool,
}

impl DensityMatrix {
    pub fn new(elements: Array2<Complex64>, dims: Vec<usize>) -> Result<Self> {
        Self::with_tolerances(elements, dims, &Tolerances::default())
    }

    pub fn with_tolerances(
        elements: Array2<Complex64>,
        dims: Vec<usize>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if elements.nrows() != elements.ncols() {
            return Err(Error::DimensionMismatch("density matrix must be square".into()));
        }
        if product_dim(&dims) != elements.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "matrix dimension {} does not match subsystem dims {:?}",
                elements.nrows(),
                dims
            )));
        }
        let scale = max_abs(&elements).max(1e-300);
        let defect = hermiticity_defect(&elements) / scale;
        if defect > tol.hermiticity {
            return Err(Error::NotHermitian { defect, tol: tol.hermiticity });
        }
        let trace = trace_of(&elements);
        let normalized = (trace - Complex64::new(1.0, 0.0)).norm() < 1e-9;
        Ok(Self { elements, dims, normalized })
    }

    /// Skips the hermiticity check; for internal intermediates whose defect
    /// is tracked elsewhere (integrator output, coherent/mixed splits).
    pub(crate) fn new_unchecked(elements: Array2<Complex64>, dims: Vec<usize>) -> Self {
        let trace = trace_of(&elements);
        let normalized = (trace - Complex64::new(1.0, 0.0)).norm() < 1e-9;
        Self { elements, dims, normalized }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        state.projector()
    }

    /// I/d over the given subsystem dims.
    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d = product_dim(&dims);
        let m = Array2::eye(d).mapv(|z: Complex64| z / d as f64);
        Self { elements: m, dims, normalized: true }
    }

    pub fn elements(&self) -> &Array2<Complex64> {
        &self.elements
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> Complex64 {
        trace_of(&self.elements)
    }

    /// Tr rho^2 (real part; imaginary part is roundoff for hermitian input).
    pub fn purity(&self) -> f64 {
        self.elements.dot(&self.elements).diag().iter().map(|z| z.re).sum()
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let elements = ndarray::linalg::kron(&self.elements, &other.elements);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::new_unchecked(elements, dims)
    }

    /// Reduced density matrix over the `keep` subsystems (ascending order).
    /// Trace and hermiticity are preserved exactly.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.dims.len();
        if keep.is_empty() {
            return Err(Error::DimensionMismatch("keep set must be nonempty".into()));
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        for &k in &keep {
            if k >= n {
                return Err(Error::InvalidSubsystem { index: k, count: n });
            }
        }
        let traced: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
        let kd: Vec<usize> = keep.iter().map(|&i| self.dims[i]).collect();
        let td: Vec<usize> = traced.iter().map(|&i| self.dims[i]).collect();
        let keep_dim = product_dim(&kd);
        let trace_dim = product_dim(&td);

        // Strides of each subsystem in the flat (row-major) index.
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }

        let flat = |subidx: &[usize], subsys: &[usize]| -> usize {
            subidx.iter().zip(subsys.iter()).map(|(&v, &s)| v * strides[s]).sum()
        };
        let unflatten = |mut idx: usize, dims: &[usize]| -> Vec<usize> {
            let mut out = vec![0; dims.len()];
            for i in (0..dims.len()).rev() {
                out[i] = idx % dims[i];
                idx /= dims[i];
            }
            out
        };

        let mut out = Array2::zeros((keep_dim, keep_dim));
        for ki in 0..keep_dim {
            let ki_sub = unflatten(ki, &kd);
            let base_i = flat(&ki_sub, &keep);
            for kj in 0..keep_dim {
                let kj_sub = unflatten(kj, &kd);
                let base_j = flat(&kj_sub, &keep);
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..trace_dim {
                    let t_sub = unflatten(t, &td);
                    let off = flat(&t_sub, &traced);
                    acc += self.elements[[base_i + off, base_j + off]];
                }
                out[[ki, kj]] = acc;
            }
        }
        Ok(DensityMatrix::new_unchecked(out, kd))
    }

    /// Hermiticity, positivity and trace diagnostics.
    pub fn validate(&self, _tol: &Tolerances) -> Result<Diagnostics> {
        let scale = max_abs(&self.elements).max(1e-300);
        let hermiticity_defect = hermiticity_defect(&self.elements) / scale;
        let eigs = hermitian_eigenvalues(&self.elements)?;
        let min_eigenvalue = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let trace_deviation = (self.trace() - Complex64::new(1.0, 0.0)).norm();
        Ok(Diagnostics { hermiticity_defect, min_eigenvalue, trace_deviation })
    }
}

pub(crate) fn trace_of(m: &Array2<Complex64>) -> Complex64 {
    m.diag().iter().sum()
}

/// An operator acting on a subset of the subsystems of a larger space.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    elements: Array2<Complex64>,
    dims: Vec<usize>,
    acts_on: Vec<usize>,
}

impl LinearOperator {
    pub fn new(
        elements: Array2<Complex64>,
        dims: Vec<usize>,
        acts_on: Vec<usize>,
    ) -> Result<Self> {
        if elements.nrows() != elements.ncols() {
            return Err(Error::DimensionMismatch("operator must be square".into()));
        }
        let mut sorted = acts_on.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != acts_on.len() {
            return Err(Error::DimensionMismatch("acts_on must not repeat subsystems".into()));
        }
        for &a in &acts_on {
            if a >= dims.len() {
                return Err(Error::InvalidSubsystem { index: a, count: dims.len() });
            }
        }
        let sub: usize = acts_on.iter().map(|&i| dims[i]).product();
        if sub != elements.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "operator dimension {} does not match acted-on dims (product {})",
                elements.nrows(),
                sub
            )));
        }
        Ok(Self { elements, dims, acts_on })
    }

    /// Operator over the whole space (acts on every subsystem).
    pub fn on_full(elements: Array2<Complex64>, dims: Vec<usize>) -> Result<Self> {
        let acts_on = (0..dims.len()).collect();
        Self::new(elements, dims, acts_on)
    }

    pub fn elements(&self) -> &Array2<Complex64> {
        &self.elements
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn acts_on(&self) -> &[usize] {
        &self.acts_on
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = max_abs(&self.elements).max(1e-300);
        hermiticity_defect(&self.elements) / scale <= tol
    }

    /// Embed into the full tensor space: identity on every subsystem not in
    /// `acts_on`. Acted-on subsystems may be interleaved arbitrarily with the
    /// rest; the embedding handles the permutation.
    pub fn embed(&self) -> Array2<Complex64> {
        let full = product_dim(&self.dims);
        let n = self.dims.len();
        let rest: Vec<usize> = (0..n).filter(|i| !self.acts_on.contains(i)).collect();

        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        let sub_dims: Vec<usize> = self.acts_on.iter().map(|&i| self.dims[i]).collect();
        let rest_dims: Vec<usize> = rest.iter().map(|&i| self.dims[i]).collect();
        let sub_dim = product_dim(&sub_dims);
        let rest_dim = product_dim(&rest_dims);

        let unflatten = |mut idx: usize, dims: &[usize]| -> Vec<usize> {
            let mut out = vec![0; dims.len()];
            for i in (0..dims.len()).rev() {
                out[i] = idx % dims[i];
                idx /= dims[i];
            }
            out
        };

        let mut out = Array2::zeros((full, full));
        for a in 0..sub_dim {
            let ai = unflatten(a, &sub_dims);
            let abase: usize =
                ai.iter().zip(self.acts_on.iter()).map(|(&v, &s)| v * strides[s]).sum();
            for b in 0..sub_dim {
                let bi = unflatten(b, &sub_dims);
                let bbase: usize =
                    bi.iter().zip(self.acts_on.iter()).map(|(&v, &s)| v * strides[s]).sum();
                let val = self.elements[[a, b]];
                if val == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..rest_dim {
                    let ri = unflatten(r, &rest_dims);
                    let roff: usize =
                        ri.iter().zip(rest.iter()).map(|(&v, &s)| v * strides[s]).sum();
                    out[[abase + roff, bbase + roff]] += val;
                }
            }
        }
        out
    }

    /// Kronecker product; dims concatenated, self first, acts_on shifted.
    pub fn tensor(&self, other: &Self) -> Self {
        let elements = ndarray::linalg::kron(&self.elements, &other.elements);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut acts_on = self.acts_on.clone();
        acts_on.extend(other.acts_on.iter().map(|&a| a + self.dims.len()));
        Self { elements, dims, acts_on }
    }
}
