//! Python bindings: density matrices, collisions, slabs, Lindblad evolution,
//! the toy fixtures, the refraction index and the fringe pattern.
//!
//! Matrices cross the boundary as nested lists of Python complex numbers.

// the pymethods expansion trips this lint on its own conversions
#![allow(clippy::useless_conversion)]

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use collisim::collision::{build_collision, CollisionMode, TargetEnsemble};
use collisim::gas::{
    refraction_index, AmplitudeModel, GasConfig, MassLimit, MomentumGrid, PotentialModel,
    TargetSpecies,
};
use collisim::generator::{
    build_generator_from_slab, evolve, split_evolve, EvolveOptions, LindbladGenerator,
    SplitOptions,
};
use collisim::linalg::{StateVector, Tolerances};
use collisim::oracle::{exact_crossing, DEFAULT_DIMENSION_CAP};
use collisim::slabstep::{change_probabilities, one_step, SlabSpec};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_array2(rows: Vec<Vec<Complex64>>) -> PyResult<Array2<Complex64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(PyValueError::new_err("expected a rectangular, nonempty matrix"));
    }
    let m = rows[0].len();
    Ok(Array2::from_shape_fn((n, m), |(i, j)| rows[i][j]))
}

fn from_array2(m: &Array2<Complex64>) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[[i, j]]).collect()).collect()
}

fn parse_mode(mode: &str) -> PyResult<CollisionMode> {
    match mode {
        "exact" | "exact-unitary" => Ok(CollisionMode::ExactUnitary),
        "born" | "born-truncated" => Ok(CollisionMode::BornTruncated),
        other => Err(PyValueError::new_err(format!(
            "unknown mode '{other}' (use 'exact' or 'born')"
        ))),
    }
}

/// A density matrix over an ordered list of subsystem dimensions.
#[pyclass(name = "DensityMatrix")]
#[derive(Clone)]
struct PyDensityMatrix {
    inner: collisim::linalg::DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    #[new]
    #[pyo3(signature = (elements, dims=None))]
    fn new(elements: Vec<Vec<Complex64>>, dims: Option<Vec<usize>>) -> PyResult<Self> {
        let m = to_array2(elements)?;
        let dims = dims.unwrap_or_else(|| vec![m.nrows()]);
        Ok(Self { inner: collisim::linalg::DensityMatrix::new(m, dims).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (amplitudes, dims=None))]
    fn from_pure(amplitudes: Vec<Complex64>, dims: Option<Vec<usize>>) -> PyResult<Self> {
        let dims = dims.unwrap_or_else(|| vec![amplitudes.len()]);
        let state = StateVector::new(Array1::from(amplitudes), dims).map_err(err)?;
        Ok(Self { inner: collisim::linalg::DensityMatrix::from_pure(&state) })
    }

    #[staticmethod]
    fn maximally_mixed(dims: Vec<usize>) -> Self {
        Self { inner: collisim::linalg::DensityMatrix::maximally_mixed(dims) }
    }

    fn elements(&self) -> Vec<Vec<Complex64>> {
        from_array2(self.inner.elements())
    }

    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    fn trace(&self) -> Complex64 {
        self.inner.trace()
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    fn tensor(&self, other: &PyDensityMatrix) -> Self {
        Self { inner: self.inner.tensor(&other.inner) }
    }

    fn partial_trace(&self, keep: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: self.inner.partial_trace(&keep).map_err(err)? })
    }

    /// Hermiticity defect, smallest eigenvalue and trace deviation.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = self.inner.validate(&Tolerances::default()).map_err(err)?;
        let out = PyDict::new_bound(py);
        out.set_item("hermiticity_defect", d.hermiticity_defect)?;
        out.set_item("min_eigenvalue", d.min_eigenvalue)?;
        out.set_item("trace_deviation", d.trace_deviation)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(dim={}, dims={:?})", self.inner.dim(), self.inner.dims())
    }
}

/// A particle-target scattering pair (S, T) with S = 1 + iT.
#[pyclass(name = "Collision")]
#[derive(Clone)]
struct PyCollision {
    inner: collisim::collision::CollisionOperator,
}

#[pymethods]
impl PyCollision {
    /// Build from a hermitian kernel on particle (x) target space.
    #[staticmethod]
    #[pyo3(signature = (kernel, particle_dim, target_dim, coupling, mode="exact"))]
    fn build(
        kernel: Vec<Vec<Complex64>>,
        particle_dim: usize,
        target_dim: usize,
        coupling: f64,
        mode: &str,
    ) -> PyResult<Self> {
        let k = to_array2(kernel)?;
        let inner = build_collision(&k, particle_dim, target_dim, coupling, parse_mode(mode)?)
            .map_err(err)?;
        Ok(Self { inner })
    }

    fn unitarity_defect(&self) -> f64 {
        self.inner.unitarity_defect()
    }

    fn s(&self) -> Vec<Vec<Complex64>> {
        from_array2(self.inner.s())
    }

    fn t(&self) -> Vec<Vec<Complex64>> {
        from_array2(self.inner.t())
    }

    /// D_M = <m|T|m> on the particle space.
    fn d_m(&self, m: Vec<Complex64>) -> PyResult<Vec<Vec<Complex64>>> {
        let v = StateVector::new(Array1::from(m.clone()), vec![m.len()]).map_err(err)?;
        let state =
            collisim::collision::TargetState::new(0, v, 1.0, 0.0).map_err(err)?;
        Ok(from_array2(&collisim::collision::extract_d_m(&self.inner, &state).map_err(err)?))
    }

    /// A_E = <l|T|m> - <m|T|m><l|m> on the particle space.
    fn a_e(&self, l: Vec<Complex64>, m: Vec<Complex64>) -> PyResult<Vec<Vec<Complex64>>> {
        let lv = StateVector::new(Array1::from(l.clone()), vec![l.len()]).map_err(err)?;
        let mv = StateVector::new(Array1::from(m.clone()), vec![m.len()]).map_err(err)?;
        Ok(from_array2(
            &collisim::collision::extract_a_e_vectors(&self.inner, &lv, &mv).map_err(err)?,
        ))
    }
}

/// A thin slab of identical two-level (or d-level) targets.
#[pyclass(name = "Slab")]
struct PySlab {
    inner: SlabSpec,
}

#[pymethods]
impl PySlab {
    /// Homogeneous slab: one kernel, one weight list, n identical targets.
    #[staticmethod]
    #[pyo3(signature = (kernel, particle_dim, weights, n_targets, coupling, mode="exact",
                        width=1.0, speed=1.0, density=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn homogeneous(
        kernel: Vec<Vec<Complex64>>,
        particle_dim: usize,
        weights: Vec<f64>,
        n_targets: usize,
        coupling: f64,
        mode: &str,
        width: f64,
        speed: f64,
        density: f64,
    ) -> PyResult<Self> {
        let k = to_array2(kernel)?;
        let target_dim = weights.len();
        let mode = parse_mode(mode)?;
        let mut targets = Vec::new();
        let mut collisions = Vec::new();
        for _ in 0..n_targets {
            targets.push(TargetEnsemble::from_weights(&weights, 0.0).map_err(err)?);
            collisions
                .push(build_collision(&k, particle_dim, target_dim, coupling, mode).map_err(err)?);
        }
        Ok(Self {
            inner: SlabSpec::new(targets, collisions, width, speed, density).map_err(err)?,
        })
    }

    fn n_targets(&self) -> usize {
        self.inner.n_targets()
    }

    fn particle_dim(&self) -> usize {
        self.inner.particle_dim()
    }

    /// One crossing of the slab applied to the particle state.
    fn one_step(&self, rho: &PyDensityMatrix) -> PyResult<PyDensityMatrix> {
        Ok(PyDensityMatrix { inner: one_step(&rho.inner, &self.inner).map_err(err)? })
    }

    /// Brute-force tensor-product crossing (exact-unitary collisions only).
    fn exact_crossing(&self, rho: &PyDensityMatrix) -> PyResult<PyDensityMatrix> {
        Ok(PyDensityMatrix {
            inner: exact_crossing(&rho.inner, &self.inner, DEFAULT_DIMENSION_CAP).map_err(err)?,
        })
    }

    /// (p_change, p_no_change) via the two independent routes.
    fn change_probabilities(&self, rho: &PyDensityMatrix) -> PyResult<(f64, f64)> {
        change_probabilities(&rho.inner, &self.inner).map_err(err)
    }

    /// Continuous-time Lindblad generator assembled from this slab.
    fn generator(&self) -> PyResult<PyGenerator> {
        Ok(PyGenerator { inner: build_generator_from_slab(&self.inner).map_err(err)? })
    }
}

/// Effective Hamiltonian plus footprint/mixture jump families.
#[pyclass(name = "Generator")]
struct PyGenerator {
    inner: LindbladGenerator,
}

#[pymethods]
impl PyGenerator {
    fn h_eff(&self) -> Vec<Vec<Complex64>> {
        from_array2(self.inner.h_eff())
    }

    fn n_footprint_jumps(&self) -> usize {
        self.inner.jumps_footprint().len()
    }

    fn n_mixture_jumps(&self) -> usize {
        self.inner.jumps_mixture().len()
    }

    /// Fixed-step RK4 integration; returns times, traces, purities and the
    /// final state.
    #[pyo3(signature = (rho0, t_final, dt, save_every=1))]
    fn evolve<'py>(
        &self,
        py: Python<'py>,
        rho0: &PyDensityMatrix,
        t_final: f64,
        dt: f64,
        save_every: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let traj =
            evolve(&rho0.inner, &self.inner, t_final, dt, &EvolveOptions { save_every })
                .map_err(err)?;
        let out = PyDict::new_bound(py);
        out.set_item("times", traj.times().to_vec())?;
        out.set_item("traces", traj.traces().iter().map(|z| z.re).collect::<Vec<_>>())?;
        out.set_item("purities", traj.purities())?;
        out.set_item("min_eigenvalues", traj.min_eigenvalues().map_err(err)?)?;
        out.set_item("final_state", from_array2(traj.final_state()))?;
        out.set_item("warnings", traj.warnings().to_vec())?;
        Ok(out)
    }

    /// Coherent/mixed split evolution; the sum reproduces `evolve`.
    #[pyo3(signature = (rho0, t_final, dt, save_every=1))]
    fn split_evolve<'py>(
        &self,
        py: Python<'py>,
        rho0: &PyDensityMatrix,
        t_final: f64,
        dt: f64,
        save_every: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let split = split_evolve(
            &rho0.inner,
            &self.inner,
            t_final,
            dt,
            &SplitOptions { save_every, ..Default::default() },
        )
        .map_err(err)?;
        let out = PyDict::new_bound(py);
        out.set_item("times", split.coh.times().to_vec())?;
        out.set_item(
            "coherent_traces",
            split.coh.traces().iter().map(|z| z.re).collect::<Vec<_>>(),
        )?;
        out.set_item(
            "mixed_traces",
            split.mix.traces().iter().map(|z| z.re).collect::<Vec<_>>(),
        )?;
        out.set_item("coherent_final", from_array2(split.coh.final_state()))?;
        out.set_item("mixed_final", from_array2(split.mix.final_state()))?;
        Ok(out)
    }
}

/// The footprint toy: entangling collision on a pure box.
#[pyfunction]
fn toy_footprint(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    toy_dict(py, collisim::oracle::toy_footprint())
}

/// The mixture toy: box-conditioned flip on a maximally mixed box.
#[pyfunction]
fn toy_mixture(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    toy_dict(py, collisim::oracle::toy_mixture())
}

fn toy_dict(py: Python<'_>, toy: collisim::oracle::ToyOutcome) -> PyResult<Bound<'_, PyDict>> {
    let out = PyDict::new_bound(py);
    out.set_item("particle_reduced", from_array2(toy.particle_reduced.elements()))?;
    out.set_item("box_after", from_array2(toy.box_after.elements()))?;
    out.set_item("footprint_weight", toy.footprint_weight)?;
    Ok(out)
}

/// Heavy-target refraction index for a contact potential, resummed on a 1D
/// grid. Returns the complex ratio and the Fermi comparison.
#[pyfunction]
#[pyo3(signature = (mass_ratio, k, strength, density=0.01, v1=10.0, ls_eta=0.4,
                    grid_k_max=60.0, grid_half_points=6000))]
#[allow(clippy::too_many_arguments)]
fn heavy_target_refraction_index(
    py: Python<'_>,
    mass_ratio: f64,
    k: f64,
    strength: f64,
    density: f64,
    v1: f64,
    ls_eta: f64,
    grid_k_max: f64,
    grid_half_points: usize,
) -> PyResult<Bound<'_, PyDict>> {
    let grid = MomentumGrid::symmetric(grid_k_max, grid_half_points).map_err(err)?;
    let target_grid = MomentumGrid::symmetric(4.0, 40).map_err(err)?;
    let targets = vec![TargetSpecies::gaussian(&target_grid, 0.0, 1.0, 1.0)];
    let cfg = GasConfig {
        m1: 1.0,
        m2: 1.0 / mass_ratio,
        density,
        v1,
        grid,
        target_grid,
        potential: PotentialModel::Contact { strength },
        amplitude: AmplitudeModel::LippmannSchwinger { ls_eta },
        targets,
        eta: 2.0,
        gas_at_rest: true,
        fd_step: None,
    };
    let r = refraction_index(&cfg, k, MassLimit::HeavyTarget, 0).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("ratio", r.ratio)?;
    out.set_item("linearized", r.linearized)?;
    out.set_item("fermi_form", r.fermi_form)?;
    out.set_item("difference", r.difference.norm())?;
    out.set_item("perturbation_ratio", r.perturbation_ratio)?;
    Ok(out)
}

/// Double-slit pattern and visibility through a medium.
#[pyfunction]
#[pyo3(signature = (slit_separation, screen_distance, wavenumber, re_k_prime, im_k_prime,
                    points_per_period=64))]
fn young_pattern(
    py: Python<'_>,
    slit_separation: f64,
    screen_distance: f64,
    wavenumber: f64,
    re_k_prime: f64,
    im_k_prime: f64,
    points_per_period: usize,
) -> PyResult<Bound<'_, PyDict>> {
    let cfg = collisim::young::YoungConfig::new(
        slit_separation,
        screen_distance,
        wavenumber,
        Complex64::new(re_k_prime, im_k_prime),
    )
    .map_err(err)?
    .with_screen_grid(points_per_period);
    let intensity = collisim::young::pattern(&cfg).map_err(err)?;
    let report = collisim::young::visibility(&intensity, &cfg).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("x", cfg.screen_points.clone())?;
    out.set_item("intensity", intensity)?;
    out.set_item("fringe_period", cfg.fringe_period())?;
    out.set_item(
        "visibility_measured",
        if report.infinite { None } else { Some(report.measured) },
    )?;
    out.set_item(
        "visibility_formula",
        if report.formula.is_infinite() { None } else { Some(report.formula) },
    )?;
    Ok(out)
}

#[pymodule]
fn collisim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyCollision>()?;
    m.add_class::<PySlab>()?;
    m.add_class::<PyGenerator>()?;
    m.add_function(wrap_pyfunction!(toy_footprint, m)?)?;
    m.add_function(wrap_pyfunction!(toy_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(heavy_target_refraction_index, m)?)?;
    m.add_function(wrap_pyfunction!(young_pattern, m)?)?;
    Ok(())
}
