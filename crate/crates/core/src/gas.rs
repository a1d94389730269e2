//! Momentum-space specialization for a homogeneous gas: forward scattering
//! amplitudes on a grid, the diagonal Hamiltonian matrix elements in the
//! heavy-target and heavy-particle limits, the complex refraction index, and
//! the momentum-space decoherence kernels assembled as explicit jump
//! families.
//!
//! Geometry is one-dimensional along the propagation axis. Momentum deltas
//! are exact Kronecker deltas on the grid; energy deltas are Lorentzians of
//! width eta, and kernel outputs are only trusted together with an
//! eta-halving convergence pair.
//!
//! Sign conventions, pinned here once: the medium Hamiltonian is
//! `<k|H|k> = (2pi)^3 n T_E(k,k)` with first-Born `T_E = V~(0)`, so
//! attractive potentials (`V~(0) < 0`) raise Re(k'); scattering makes
//! `Im T_E <= 0`, so absorption gives `Im(k') >= 0`.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::generator::LindbladGenerator;
use crate::linalg::DensityMatrix;

/// Uniform symmetric 1D momentum grid.
#[derive(Debug, Clone)]
pub struct MomentumGrid {
    points: Vec<f64>,
    spacing: f64,
    k_max: f64,
}

impl MomentumGrid {
    /// Grid of 2 n_half + 1 points covering [-k_max, k_max], centered on 0.
    pub fn symmetric(k_max: f64, n_half: usize) -> Result<Self> {
        if k_max <= 0.0 || n_half == 0 {
            return Err(Error::InvalidConfig("grid needs k_max > 0 and n_half > 0".into()));
        }
        let spacing = k_max / n_half as f64;
        let points = (-(n_half as isize)..=n_half as isize)
            .map(|i| i as f64 * spacing)
            .collect();
        Ok(Self { points, spacing, k_max })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn index_of(&self, k: f64) -> Result<usize> {
        let idx = (k / self.spacing).round() as isize + (self.points.len() as isize - 1) / 2;
        if idx < 0 || idx as usize >= self.points.len() {
            return Err(Error::KOffGrid(k));
        }
        let idx = idx as usize;
        if (self.points[idx] - k).abs() > 1e-9 * self.spacing.max(1.0) {
            return Err(Error::KOffGrid(k));
        }
        Ok(idx)
    }
}

/// Fourier transform of the particle-target potential.
#[derive(Debug, Clone)]
pub enum PotentialModel {
    /// V~(q) = strength.
    Contact { strength: f64 },
    /// V~(q) = strength exp(-(q w)^2 / 2).
    Gaussian { strength: f64, width: f64 },
    /// V~(q) = strength / (1 + (q r)^2); the screened/finite-range form.
    Yukawa { strength: f64, range: f64 },
    /// Tabulated (q, Re, Im), linearly interpolated.
    Table { qs: Vec<f64>, values: Vec<Complex64> },
}

impl PotentialModel {
    pub fn v_tilde(&self, q: f64) -> Complex64 {
        match self {
            PotentialModel::Contact { strength } => Complex64::new(*strength, 0.0),
            PotentialModel::Gaussian { strength, width } => {
                Complex64::new(strength * (-0.5 * (q * width).powi(2)).exp(), 0.0)
            }
            PotentialModel::Yukawa { strength, range } => {
                Complex64::new(strength / (1.0 + (q * range).powi(2)), 0.0)
            }
            PotentialModel::Table { qs, values } => {
                if qs.is_empty() {
                    return Complex64::new(0.0, 0.0);
                }
                if q <= qs[0] {
                    return values[0];
                }
                if q >= qs[qs.len() - 1] {
                    return values[values.len() - 1];
                }
                let pos = qs.partition_point(|&x| x < q);
                let (q0, q1) = (qs[pos - 1], qs[pos]);
                let t = (q - q0) / (q1 - q0);
                values[pos - 1] * (1.0 - t) + values[pos] * t
            }
        }
    }

    /// Parse a `q,re,im` CSV table (header row required).
    pub fn from_csv<R: std::io::BufRead>(reader: R) -> Result<Self> {
        let mut qs = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if lineno == 0 {
                let header = trimmed.to_ascii_lowercase();
                if !header.starts_with('q') {
                    return Err(Error::InvalidConfig(
                        "potential CSV must start with a 'q,re,im' header".into(),
                    ));
                }
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::InvalidConfig(format!(
                    "potential CSV line {} has {} fields, expected 3",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| {
                    Error::InvalidConfig(format!("bad number '{s}' in potential CSV"))
                })
            };
            qs.push(parse(fields[0])?);
            values.push(Complex64::new(parse(fields[1])?, parse(fields[2])?));
        }
        if qs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("potential CSV q column must increase".into()));
        }
        Ok(PotentialModel::Table { qs, values })
    }
}

/// How on-shell T-matrix elements are computed from the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplitudeModel {
    /// T_E(k,k') = V~(k'-k); real for real potentials.
    FirstBorn,
    /// On-grid Lippmann-Schwinger resummation with outgoing boundary
    /// condition E + i ls_eta; carries the unitarity-required imaginary
    /// part. Contact potentials use the exact rank-1 resummation.
    LippmannSchwinger { ls_eta: f64 },
}

/// One species of target: its statistical weight and its momentum-space
/// wave function sampled on the target grid.
#[derive(Debug, Clone)]
pub struct TargetSpecies {
    pub weight: f64,
    pub momentum_amplitudes: Vec<Complex64>,
}

impl TargetSpecies {
    /// Normalized Gaussian wave packet centered at `k0` with momentum
    /// spread `sigma`.
    pub fn gaussian(grid: &MomentumGrid, k0: f64, sigma: f64, weight: f64) -> Self {
        let mut amps: Vec<Complex64> = grid
            .points()
            .iter()
            .map(|&k| Complex64::new((-0.25 * ((k - k0) / sigma).powi(2)).exp(), 0.0))
            .collect();
        let norm: f64 =
            amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.spacing();
        let scale = 1.0 / norm.sqrt();
        for a in &mut amps {
            *a *= scale;
        }
        Self { weight, momentum_amplitudes: amps }
    }

    /// All weight on the grid point closest to zero momentum.
    pub fn at_rest(grid: &MomentumGrid, weight: f64) -> Self {
        let idx = grid.index_of(0.0).expect("symmetric grid contains 0");
        let mut amps = vec![Complex64::new(0.0, 0.0); grid.len()];
        amps[idx] = Complex64::new((1.0 / grid.spacing()).sqrt(), 0.0);
        Self { weight, momentum_amplitudes: amps }
    }
}

/// Configuration of the homogeneous gas.
#[derive(Debug, Clone)]
pub struct GasConfig {
    pub m1: f64,
    pub m2: f64,
    /// Target number density n.
    pub density: f64,
    /// Particle mean speed along the propagation axis.
    pub v1: f64,
    /// Particle momentum grid.
    pub grid: MomentumGrid,
    /// Target momentum grid (for the wave functions A_m).
    pub target_grid: MomentumGrid,
    pub potential: PotentialModel,
    pub amplitude: AmplitudeModel,
    pub targets: Vec<TargetSpecies>,
    /// Lorentzian broadening width of the energy delta.
    pub eta: f64,
    /// Assert that the ensemble-averaged target momentum vanishes.
    pub gas_at_rest: bool,
    /// Step of the central finite differences in momentum; defaults to the
    /// grid spacing.
    pub fd_step: Option<f64>,
}

impl GasConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m1 <= 0.0 || self.m2 <= 0.0 {
            return Err(Error::InvalidConfig("masses must be positive".into()));
        }
        if self.eta <= 0.0 {
            return Err(Error::InvalidConfig("eta must be positive".into()));
        }
        let total: f64 = self.targets.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized((total - 1.0).abs()));
        }
        for t in &self.targets {
            if t.momentum_amplitudes.len() != self.target_grid.len() {
                return Err(Error::DimensionMismatch(
                    "target wave function does not match the target grid".into(),
                ));
            }
            let norm: f64 = t
                .momentum_amplitudes
                .iter()
                .map(|a| a.norm_sqr())
                .sum::<f64>()
                * self.target_grid.spacing();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::NotNormalized((norm - 1.0).abs()));
            }
        }
        if self.gas_at_rest {
            let mean: f64 = self
                .targets
                .iter()
                .map(|t| {
                    t.weight
                        * t.momentum_amplitudes
                            .iter()
                            .zip(self.target_grid.points().iter())
                            .map(|(a, &k)| a.norm_sqr() * k)
                            .sum::<f64>()
                        * self.target_grid.spacing()
                })
                .sum();
            if mean.abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "gas-at-rest set but <k_2> = {mean:.3e}"
                )));
            }
        }
        Ok(())
    }

    pub fn m_t(&self) -> f64 {
        self.m1 + self.m2
    }

    pub fn m_r(&self) -> f64 {
        self.m1 * self.m2 / self.m_t()
    }

    fn fd_step(&self) -> f64 {
        self.fd_step.unwrap_or_else(|| self.grid.spacing())
    }
}

/// On-shell forward T-matrix element and the quantities derived from it.
#[derive(Debug, Clone, Copy)]
pub struct ScatteringAmplitude {
    /// f(k,k) = -(2 pi)^2 mu T_E(k,k).
    pub f: Complex64,
    pub t_e: Complex64,
    /// Forward unitarity combination Im T_E + (mu/k)|T_E|^2; zero for a
    /// resummed amplitude, reported (not enforced) for first Born.
    pub optical_defect: f64,
}

/// The grid-sum propagator integral I(E) = sum_q (dq/2pi) / (E - E_q + i eta).
fn propagator_integral(grid: &MomentumGrid, e: f64, mu: f64, ls_eta: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &q in grid.points() {
        acc += Complex64::new(1.0, 0.0)
            / Complex64::new(e - q * q / (2.0 * mu), ls_eta);
    }
    acc * Complex64::new(grid.spacing() / std::f64::consts::TAU, 0.0)
}

/// On-shell T_E(k, k; mu) at momentum k (not necessarily a grid point; the
/// grid serves as the quadrature for the resummation).
pub fn t_e(cfg: &GasConfig, k: f64, mu: f64) -> Result<Complex64> {
    match cfg.amplitude {
        AmplitudeModel::FirstBorn => Ok(cfg.potential.v_tilde(0.0)),
        AmplitudeModel::LippmannSchwinger { ls_eta } => {
            let e = k * k / (2.0 * mu);
            match &cfg.potential {
                PotentialModel::Contact { strength } => {
                    // rank-1 potential: the Born series sums in closed form,
                    // T = g / (1 - g I(E))
                    let i_e = propagator_integral(&cfg.grid, e, mu, ls_eta);
                    Ok(Complex64::new(*strength, 0.0)
                        / (Complex64::new(1.0, 0.0) - strength * i_e))
                }
                potential => {
                    // dense solve of T = V + V G0 T for the column at k
                    let n = cfg.grid.len();
                    let mut a: Array2<Complex64> = Array2::eye(n);
                    let w = cfg.grid.spacing() / (2.0 * std::f64::consts::PI);
                    for i in 0..n {
                        let ki = cfg.grid.points()[i];
                        for j in 0..n {
                            let kj = cfg.grid.points()[j];
                            let g0 = Complex64::new(w, 0.0)
                                / Complex64::new(e - kj * kj / (2.0 * mu), ls_eta);
                            a[[i, j]] -= potential.v_tilde(kj - ki) * g0;
                        }
                    }
                    let rhs = ndarray::Array1::from_shape_fn(n, |i| {
                        potential.v_tilde(k - cfg.grid.points()[i])
                    });
                    use ndarray_linalg::Solve;
                    let t_col = a.solve(&rhs).map_err(|e| Error::Backend(e.to_string()))?;
                    // T(k,k) = V(k,k) + sum_q V(k,q) g(q) T(q,k)
                    let mut acc = cfg.potential.v_tilde(0.0);
                    for (j, t) in t_col.iter().enumerate() {
                        let kj = cfg.grid.points()[j];
                        let g0 = Complex64::new(w, 0.0)
                            / Complex64::new(e - kj * kj / (2.0 * mu), ls_eta);
                        acc += cfg.potential.v_tilde(kj - k) * g0 * t;
                    }
                    Ok(acc)
                }
            }
        }
    }
}

/// Central finite difference of the forward element in k.
pub fn t_e_derivative(cfg: &GasConfig, k: f64, mu: f64) -> Result<Complex64> {
    let h = cfg.fd_step();
    let plus = t_e(cfg, k + h, mu)?;
    let minus = t_e(cfg, k - h, mu)?;
    Ok((plus - minus) / (2.0 * h))
}

/// Closed-form derivative of the resummed contact amplitude on the grid:
/// dT/dk = T^2 I'(E) k / mu with I'(E) = -sum_q w / (E - E_q + i eta)^2.
/// Serves as an independent check of the finite-difference route.
pub fn t_e_derivative_analytic(cfg: &GasConfig, k: f64, mu: f64) -> Result<Complex64> {
    let ls_eta = match (&cfg.potential, cfg.amplitude) {
        (
            PotentialModel::Contact { .. },
            AmplitudeModel::LippmannSchwinger { ls_eta },
        ) => ls_eta,
        _ => {
            return Err(Error::InvalidConfig(
                "analytic derivative available for resummed contact potentials only".into(),
            ))
        }
    };
    let e = k * k / (2.0 * mu);
    let t = t_e(cfg, k, mu)?;
    let w = cfg.grid.spacing() / std::f64::consts::TAU;
    let mut iprime = Complex64::new(0.0, 0.0);
    for &q in cfg.grid.points() {
        let d = Complex64::new(e - q * q / (2.0 * mu), ls_eta);
        iprime -= Complex64::new(w, 0.0) / (d * d);
    }
    Ok(t * t * iprime * (k / mu))
}

pub fn scattering_amplitude(cfg: &GasConfig, k: f64, mu: f64) -> Result<ScatteringAmplitude> {
    let te = t_e(cfg, k, mu)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let f = -two_pi * two_pi * mu * te;
    let optical_defect = te.im + mu / k * te.norm_sqr();
    Ok(ScatteringAmplitude { f, t_e: te, optical_defect })
}

const TWO_PI_CUBED: f64 = 248.05021344239853; // (2 pi)^3

/// Diagonal Hamiltonian element in the heavy-target limit (m1/m2 small).
/// Order 0 uses the particle mass in the amplitude; order 1 keeps the
/// reduced mass and subtracts (m1/m2) k d/dk T_E.
pub fn hamiltonian_diag_heavy_target(cfg: &GasConfig, k: f64, order: u8) -> Result<Complex64> {
    cfg.grid.index_of(k)?;
    let prefactor = TWO_PI_CUBED * cfg.density;
    match order {
        0 => Ok(prefactor * t_e(cfg, k, cfg.m1)?),
        1 => {
            let ratio = cfg.m1 / cfg.m2;
            let te = t_e(cfg, k, cfg.m_r())?;
            let dte = t_e_derivative(cfg, k, cfg.m_r())?;
            Ok(prefactor * (te - ratio * k * dte))
        }
        _ => Err(Error::InvalidConfig(format!("order {order} not available (0 or 1)"))),
    }
}

/// Diagonal Hamiltonian element in the heavy-particle limit (m2/m1 small):
/// quadrature of the amplitude at K = m2 v1 - k2 over the target momentum
/// distribution.
pub fn hamiltonian_diag_heavy_particle(cfg: &GasConfig, k: f64, order: u8) -> Result<Complex64> {
    cfg.grid.index_of(k)?;
    cfg.validate()?;
    let prefactor = TWO_PI_CUBED * cfg.density;
    let mass = match order {
        0 => cfg.m2,
        1 => cfg.m_r(),
        _ => {
            return Err(Error::InvalidConfig(format!("order {order} not available (0 or 1)")))
        }
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for species in &cfg.targets {
        let mut species_acc = Complex64::new(0.0, 0.0);
        for (&k2, a) in
            cfg.target_grid.points().iter().zip(species.momentum_amplitudes.iter())
        {
            let p = a.norm_sqr() * cfg.target_grid.spacing();
            if p == 0.0 {
                continue;
            }
            let big_k = cfg.m2 * cfg.v1 - k2;
            let mut val = t_e(cfg, big_k, mass)?;
            if order == 1 {
                let dte = t_e_derivative(cfg, big_k, mass)?;
                val += cfg.m2 / cfg.m1 * (k * k2 / (k * k) * val + k2 * dte);
            }
            species_acc += p * val;
        }
        acc += species.weight * species_acc;
    }
    Ok(prefactor * acc)
}

/// Which mass-ratio expansion the index is computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassLimit {
    HeavyTarget,
    HeavyParticle,
}

/// The complex refraction index and its companion linearized forms.
#[derive(Debug, Clone, Copy)]
pub struct RefractionIndex {
    /// k'/k = sqrt(1 - <k|H|k> / (k^2/2m1)).
    pub ratio: Complex64,
    /// First-order expansion of the square root, 1 - m1 <H> / k^2.
    pub linearized: Complex64,
    /// The forward-amplitude form 1 + 2 pi n (m1/m_r) f / k^2 evaluated with
    /// the true reduced mass (the generalized Fermi expression).
    pub fermi_form: Complex64,
    /// linearized - fermi_form.
    pub difference: Complex64,
    /// |<H>| / (k^2/2m1); the weak-potential expansion parameter.
    pub perturbation_ratio: f64,
}

pub fn refraction_index(
    cfg: &GasConfig,
    k: f64,
    limit: MassLimit,
    order: u8,
) -> Result<RefractionIndex> {
    let h = match limit {
        MassLimit::HeavyTarget => hamiltonian_diag_heavy_target(cfg, k, order)?,
        MassLimit::HeavyParticle => hamiltonian_diag_heavy_particle(cfg, k, order)?,
    };
    let e = k * k / (2.0 * cfg.m1);
    let arg = Complex64::new(1.0, 0.0) - h / e;
    if arg.re < 0.0 {
        return Err(Error::BeyondWeakPotential(arg.re));
    }
    let ratio = arg.sqrt();
    let linearized = Complex64::new(1.0, 0.0) - h / (2.0 * e);

    let two_pi = 2.0 * std::f64::consts::PI;
    let m_r = cfg.m_r();
    let fermi_form = match limit {
        MassLimit::HeavyTarget => {
            let te = t_e(cfg, k, m_r)?;
            let mut f = -two_pi * two_pi * m_r * te;
            if order >= 1 {
                let dte = t_e_derivative(cfg, k, m_r)?;
                f -= cfg.m1 / cfg.m2 * k * (-two_pi * two_pi * m_r * dte);
            }
            Complex64::new(1.0, 0.0) + two_pi * cfg.density * (cfg.m1 / m_r) * f / (k * k)
        }
        MassLimit::HeavyParticle => {
            // C-function form; by construction it linearizes the same H
            let c_over =
                hamiltonian_diag_heavy_particle(cfg, k, order)? / (TWO_PI_CUBED * cfg.density);
            let f = -two_pi * two_pi * m_r * c_over;
            Complex64::new(1.0, 0.0) + two_pi * cfg.density * (cfg.m1 / m_r) * f / (k * k)
        }
    };
    Ok(RefractionIndex {
        ratio,
        linearized,
        fermi_form,
        difference: linearized - fermi_form,
        perturbation_ratio: h.norm() / e,
    })
}

/// Lorentzian-broadened energy delta, (1/pi) eta / (x^2 + eta^2).
pub fn broadened_delta(x: f64, eta: f64) -> f64 {
    eta / (std::f64::consts::PI * (x * x + eta * eta))
}

fn check_energy_resolution(cfg: &GasConfig, limit: MassLimit) -> Result<()> {
    // energy spacing of the grid whose energies enter the broadened delta,
    // evaluated at the characteristic momentum
    let spacing = match limit {
        MassLimit::HeavyTarget => {
            // particle energies at the central momentum m1 v1
            (cfg.m1 * cfg.v1).abs().max(cfg.grid.spacing()) * cfg.grid.spacing() / cfg.m1
        }
        MassLimit::HeavyParticle => {
            // target-side energies at momenta ~ m2 v1 +- k2_max
            let p = (cfg.m2 * cfg.v1).abs() + cfg.target_grid.k_max();
            p.max(cfg.target_grid.spacing()) * cfg.target_grid.spacing() / cfg.m2
        }
    };
    if cfg.eta < 2.0 * spacing {
        return Err(Error::GridTooCoarse { eta: cfg.eta, spacing });
    }
    Ok(())
}

/// One momentum transfer of a decoherence kernel: the jump operator has
/// matrix elements op[k + step, k] = amplitudes[k] and carries `rate` in the
/// dissipator convention rate (2 A rho A^+ - A^+A rho - rho A^+A).
#[derive(Debug, Clone)]
pub struct KernelTransfer {
    pub step: isize,
    pub amplitudes: Vec<Complex64>,
    pub rate: f64,
}

/// A momentum-space decoherence kernel as an explicit completely positive
/// jump family, stored per transfer.
#[derive(Debug, Clone)]
pub struct MomentumKernel {
    pub transfers: Vec<KernelTransfer>,
    pub dim: usize,
}

impl MomentumKernel {
    /// Materialize the dense jump operators.
    pub fn jumps(&self) -> Vec<crate::generator::Jump> {
        let n = self.dim as isize;
        self.transfers
            .iter()
            .map(|t| {
                let mut op: Array2<Complex64> = Array2::zeros((self.dim, self.dim));
                for (i, &a) in t.amplitudes.iter().enumerate() {
                    let j = i as isize + t.step;
                    if j >= 0 && j < n && a != Complex64::new(0.0, 0.0) {
                        op[[j as usize, i]] = a;
                    }
                }
                crate::generator::Jump { op, rate: t.rate }
            })
            .collect()
    }

    /// Apply the gain part sum 2 rate A rho A^+.
    pub fn apply_gain(&self, rho: &Array2<Complex64>) -> Array2<Complex64> {
        let n = self.dim as isize;
        let mut acc: Array2<Complex64> = Array2::zeros((self.dim, self.dim));
        for t in &self.transfers {
            for (i, &ai) in t.amplitudes.iter().enumerate() {
                let oi = i as isize + t.step;
                if oi < 0 || oi >= n || ai == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (j, &aj) in t.amplitudes.iter().enumerate() {
                    let oj = j as isize + t.step;
                    if oj < 0 || oj >= n || aj == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    acc[[oi as usize, oj as usize]] +=
                        2.0 * t.rate * ai * rho[[i, j]] * aj.conj();
                }
            }
        }
        acc
    }

    /// Diagonal of sum rate A^+A (half the total scattering-out rate).
    pub fn damping_diagonal(&self) -> Vec<f64> {
        let n = self.dim as isize;
        let mut out = vec![0.0; self.dim];
        for t in &self.transfers {
            for (i, &a) in t.amplitudes.iter().enumerate() {
                let j = i as isize + t.step;
                if j >= 0 && j < n {
                    out[i] += t.rate * a.norm_sqr();
                }
            }
        }
        out
    }

    /// d<E>/dt for a diagonal state with populations `rho_diag`: the jump
    /// family is the only energy-changing piece (the Hamiltonian is diagonal
    /// in momentum), so this equals the assembled generator's drift.
    pub fn energy_drift_diagonal(&self, rho_diag: &[f64], energies: &[f64]) -> f64 {
        let n = self.dim as isize;
        let mut drift = 0.0;
        for t in &self.transfers {
            for (i, &a) in t.amplitudes.iter().enumerate() {
                let j = i as isize + t.step;
                if j >= 0 && j < n {
                    drift += 2.0
                        * t.rate
                        * a.norm_sqr()
                        * rho_diag[i]
                        * (energies[j as usize] - energies[i]);
                }
            }
        }
        drift
    }
}

/// Heavy-target kernel: one jump operator per momentum transfer, with matrix
/// element V~(kappa) sqrt(dkappa delta_eta(E_{k+kappa} - E_k)) between the
/// grid momenta it connects. Independent of the target wave functions by
/// construction; energy transfer is bounded by eta, so the particle's mean
/// kinetic energy is conserved in the eta -> 0 limit.
pub fn decoherence_kernel_heavy_target(cfg: &GasConfig) -> Result<MomentumKernel> {
    check_energy_resolution(cfg, MassLimit::HeavyTarget)?;
    let n = cfg.grid.len();
    let points = cfg.grid.points();
    let dk = cfg.grid.spacing();
    let rate = 0.5 * TWO_PI_CUBED * cfg.density;
    let mut transfers = Vec::new();
    let n_i = n as isize;
    for step in -(n_i - 1)..n_i {
        let kappa = step as f64 * dk;
        let v = cfg.potential.v_tilde(kappa);
        if v.norm() == 0.0 {
            continue;
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
        let mut nonzero = false;
        for (i, &k) in points.iter().enumerate() {
            let j = i as isize + step;
            if j < 0 || j >= n_i {
                continue;
            }
            let k_out = points[j as usize];
            let de = (k_out * k_out - k * k) / (2.0 * cfg.m1);
            let weight = dk * broadened_delta(de, cfg.eta);
            if weight == 0.0 {
                continue;
            }
            amplitudes[i] = v * weight.sqrt();
            nonzero = true;
        }
        if nonzero {
            transfers.push(KernelTransfer { step, amplitudes, rate });
        }
    }
    Ok(MomentumKernel { transfers, dim: n })
}

/// Heavy-particle kernel: the particle momentum shifts by the target recoil,
/// weighted by the target momentum distribution and the target-side energy
/// delta at mass m2. Each jump is a uniform shift operator.
pub fn decoherence_kernel_heavy_particle(cfg: &GasConfig) -> Result<MomentumKernel> {
    check_energy_resolution(cfg, MassLimit::HeavyParticle)?;
    cfg.validate()?;
    let n = cfg.grid.len();
    let dk = cfg.grid.spacing();
    let n_i = n as isize;
    let mut transfers = Vec::new();
    for step in -(n_i - 1)..n_i {
        let kappa = step as f64 * dk;
        let v2 = cfg.potential.v_tilde(kappa).norm_sqr();
        if v2 == 0.0 {
            continue;
        }
        // recoil-weighted phase space at this transfer
        let mut weight = 0.0;
        for species in &cfg.targets {
            let mut acc = 0.0;
            for (&q2, a) in
                cfg.target_grid.points().iter().zip(species.momentum_amplitudes.iter())
            {
                let p = a.norm_sqr() * cfg.target_grid.spacing();
                if p == 0.0 {
                    continue;
                }
                let k2 = q2 - kappa;
                let e_out = (cfg.m2 * cfg.v1 - k2).powi(2) / (2.0 * cfg.m2);
                let e_in = (cfg.m2 * cfg.v1 - q2).powi(2) / (2.0 * cfg.m2);
                acc += p * broadened_delta(e_out - e_in, cfg.eta);
            }
            weight += species.weight * acc;
        }
        let w = TWO_PI_CUBED * cfg.density * v2 * weight * dk;
        if w == 0.0 {
            continue;
        }
        let amplitudes = vec![Complex64::new(1.0, 0.0); n];
        transfers.push(KernelTransfer { step, amplitudes, rate: 0.5 * w });
    }
    Ok(MomentumKernel { transfers, dim: n })
}

/// Assemble the full gas generator on the momentum grid: diagonal hermitian
/// Hamiltonian plus the kernel's jump family. Trace preservation is exact by
/// construction; the hermitian part uses the requested expansion order.
pub fn assemble_gas_generator(
    cfg: &GasConfig,
    limit: MassLimit,
    order: u8,
) -> Result<LindbladGenerator> {
    let n = cfg.grid.len();
    let mut h: Array2<Complex64> = Array2::zeros((n, n));
    for (i, &k) in cfg.grid.points().iter().enumerate() {
        let hk = match limit {
            MassLimit::HeavyTarget => hamiltonian_diag_heavy_target(cfg, k, order)?,
            MassLimit::HeavyParticle => hamiltonian_diag_heavy_particle(cfg, k, order)?,
        };
        h[[i, i]] = Complex64::new(hk.re, 0.0);
    }
    let kernel = match limit {
        MassLimit::HeavyTarget => decoherence_kernel_heavy_target(cfg)?,
        MassLimit::HeavyParticle => decoherence_kernel_heavy_particle(cfg)?,
    };
    let mut gen = LindbladGenerator::empty(n).with_hamiltonian(h)?;
    for j in kernel.jumps() {
        gen = gen.with_footprint_jump(j.op, j.rate)?;
    }
    Ok(gen)
}

/// d<E_kin>/dt for the given state under the assembled generator.
pub fn mean_energy_drift(
    gen: &LindbladGenerator,
    cfg: &GasConfig,
    rho: &DensityMatrix,
) -> Result<f64> {
    if rho.dim() != cfg.grid.len() {
        return Err(Error::DimensionMismatch("state does not match the grid".into()));
    }
    let rhs = gen.rhs(rho.elements());
    let mut drift = 0.0;
    for (i, &k) in cfg.grid.points().iter().enumerate() {
        drift += k * k / (2.0 * cfg.m1) * rhs[[i, i]].re;
    }
    Ok(drift)
}
