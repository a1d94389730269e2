//! Double-slit interference through a medium: coherent damped fringes from
//! the coherent part of the state, a flat background from the mixed part,
//! the visibility ratio, and the locality argument that keeps crossed terms
//! of well-separated packets out of the mixed evolution.
//!
//! The background is modeled as uniform over a central window of a
//! configurable number of fringe periods; total intensity is normalized to
//! one, so the oscillation/background split is fixed by the damping factor
//! alone.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::collision::{CollisionMode, TargetEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{fro_norm, StateVector};
use crate::slabstep::SlabSpec;

/// Geometry and medium input for the two-slit pattern.
#[derive(Debug, Clone)]
pub struct YoungConfig {
    /// Slit separation D.
    pub slit_separation: f64,
    /// Slit-to-screen distance L.
    pub screen_distance: f64,
    /// Vacuum wavenumber k.
    pub wavenumber: f64,
    /// In-medium wavenumber k' (complex; from the gas module).
    pub medium_k: Complex64,
    /// Screen sample positions.
    pub screen_points: Vec<f64>,
    /// Width of the uniform-background window, in fringe periods.
    pub window_periods: f64,
    /// Packet width for the crossed-term studies.
    pub packet_width: f64,
    /// Interaction range of a single target.
    pub target_range: f64,
}

impl YoungConfig {
    pub fn new(
        slit_separation: f64,
        screen_distance: f64,
        wavenumber: f64,
        medium_k: Complex64,
    ) -> Result<Self> {
        if slit_separation <= 0.0 || screen_distance <= 0.0 || wavenumber <= 0.0 {
            return Err(Error::InvalidConfig("geometry must be positive".into()));
        }
        if screen_distance < 20.0 * slit_separation {
            return Err(Error::InvalidConfig(format!(
                "far-field geometry requires L >> D, got L/D = {:.1}",
                screen_distance / slit_separation
            )));
        }
        Ok(Self {
            slit_separation,
            screen_distance,
            wavenumber,
            medium_k,
            screen_points: Vec::new(),
            window_periods: 10.0,
            packet_width: 1.0,
            target_range: 1.0,
        })
    }

    /// Fringe period on the screen, 2 pi L / (Re(k') D).
    pub fn fringe_period(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.screen_distance
            / (self.medium_k.re * self.slit_separation)
    }

    /// Damping exponent Im(k') L.
    pub fn damping_exponent(&self) -> f64 {
        self.medium_k.im * self.screen_distance
    }

    /// Populate a symmetric midpoint screen grid commensurate with the
    /// fringe period (keeps the discrete normalization exact).
    pub fn with_screen_grid(mut self, points_per_period: usize) -> Self {
        let period = self.fringe_period();
        let n_periods = self.window_periods.round() as usize;
        let total = points_per_period * n_periods;
        let width = period * n_periods as f64;
        let dx = width / total as f64;
        self.screen_points =
            (0..total).map(|j| -width / 2.0 + (j as f64 + 0.5) * dx).collect();
        self
    }

    pub fn window_width(&self) -> f64 {
        self.fringe_period() * self.window_periods
    }
}

/// Two-slit intensity over the screen points: uniform background plus
/// damped fringes, normalized so that the windowed integral is one.
pub fn pattern(cfg: &YoungConfig) -> Result<Vec<f64>> {
    if cfg.medium_k.im < 0.0 {
        return Err(Error::UnphysicalGain(cfg.medium_k.im));
    }
    if cfg.screen_points.len() < 8 {
        return Err(Error::InvalidConfig("screen grid too small".into()));
    }
    let damping = (-2.0 * cfg.damping_exponent()).exp();
    let w = cfg.window_width();
    let background = (1.0 - damping) / w;
    let phase_rate = cfg.medium_k.re * cfg.slit_separation / cfg.screen_distance;
    Ok(cfg
        .screen_points
        .iter()
        .map(|&x| background + damping * (1.0 + (phase_rate * x).cos()) / w)
        .collect())
}

/// Measured fringe visibility of a pattern.
#[derive(Debug, Clone, Copy)]
pub struct VisibilityReport {
    /// (I_max - I_min) / background near the central peak.
    pub measured: f64,
    /// The unitarity prediction 2 e^{-2 Im(k')L} / (1 - e^{-2 Im(k')L}).
    pub formula: f64,
    /// Background level estimated from the central minima.
    pub background: f64,
    /// Set when the background vanishes (vacuum propagation).
    pub infinite: bool,
    /// Conventional contrast (I_max - I_min) / (I_max + I_min); equals 1 in
    /// vacuum where the background ratio diverges.
    pub contrast: f64,
}

fn local_extrema(intensity: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for i in 1..intensity.len() - 1 {
        if intensity[i] > intensity[i - 1] && intensity[i] >= intensity[i + 1] {
            maxima.push(i);
        }
        if intensity[i] < intensity[i - 1] && intensity[i] <= intensity[i + 1] {
            minima.push(i);
        }
    }
    (maxima, minima)
}

/// Extract the visibility ratio near the central peak and compare it with
/// the damping formula.
pub fn visibility(intensity: &[f64], cfg: &YoungConfig) -> Result<VisibilityReport> {
    let (maxima, minima) = local_extrema(intensity);
    if maxima.len() + minima.len() < 3 {
        return Err(Error::NoExtrema);
    }
    let center = intensity.len() / 2;
    let central_max = *maxima
        .iter()
        .min_by_key(|&&i| i.abs_diff(center))
        .ok_or(Error::NoExtrema)?;
    let nearest_min = *minima
        .iter()
        .min_by_key(|&&i| i.abs_diff(central_max))
        .ok_or(Error::NoExtrema)?;
    let i_max = intensity[central_max];
    let i_min = intensity[nearest_min];
    let background = i_min;

    let x = cfg.damping_exponent();
    let damping = (-2.0 * x).exp();
    let formula = if damping >= 1.0 { f64::INFINITY } else { 2.0 * damping / (1.0 - damping) };

    // the sampled minimum of an undamped pattern is a grid artifact, not a
    // real background
    let infinite = x <= 0.0 || background <= 1e-12 * i_max;
    let measured = if infinite { f64::INFINITY } else { (i_max - i_min) / background };
    let contrast = (i_max - i_min) / (i_max + i_min);
    Ok(VisibilityReport { measured, formula, background, infinite, contrast })
}

/// Positions of the pattern's local maxima, for fringe-spacing checks.
pub fn fringe_maxima(intensity: &[f64], cfg: &YoungConfig) -> Vec<f64> {
    let (maxima, _) = local_extrema(intensity);
    maxima.iter().map(|&i| cfg.screen_points[i]).collect()
}

/// CSV export of the pattern: `x,intensity` rows.
pub fn pattern_to_csv<W: std::io::Write>(
    cfg: &YoungConfig,
    intensity: &[f64],
    mut w: W,
) -> Result<()> {
    writeln!(w, "x,intensity")?;
    for (x, i) in cfg.screen_points.iter().zip(intensity.iter()) {
        writeln!(w, "{x},{i}")?;
    }
    Ok(())
}

/// Truncated Gaussian wave packet on a position grid: exactly zero beyond
/// `support_radius` around the center, so operator-support arguments are
/// sharp rather than merely exponentially good.
pub fn gaussian_packet(
    grid: &[f64],
    center: f64,
    width: f64,
    support_radius: f64,
) -> Result<StateVector> {
    let amps: Vec<Complex64> = grid
        .iter()
        .map(|&x| {
            if (x - center).abs() > support_radius {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new((-0.25 * ((x - center) / width).powi(2)).exp(), 0.0)
            }
        })
        .collect();
    StateVector::from_slice(&amps, vec![grid.len()])?.normalize()
}

/// Truncated Gaussian interaction envelope of one target, diagonal in the
/// position basis.
fn envelope(grid: &[f64], center: f64, range: f64, support_radius: f64) -> Vec<f64> {
    grid.iter()
        .map(|&x| {
            if (x - center).abs() > support_radius {
                0.0
            } else {
                (-0.5 * ((x - center) / range).powi(2)).exp()
            }
        })
        .collect()
}

/// Build a slab of two-level targets localized on a 1D position grid. Each
/// target couples through its envelope g(x) times a target operator with
/// both state-changing and state-dependent parts, so footprint and mixture
/// jump families are both populated.
pub fn localized_slab(
    grid: &[f64],
    positions: &[f64],
    target_range: f64,
    coupling: f64,
    weights: &[f64],
    slab_geometry: (f64, f64, f64),
    mode: CollisionMode,
) -> Result<SlabSpec> {
    let g_dim = grid.len();
    let support_radius = 4.0 * target_range;
    let mut targets = Vec::new();
    let mut collisions = Vec::new();
    // sigma_x + sigma_z on the target, scaled to unit norm
    let s = 1.0 / 2.0f64.sqrt();
    for &x0 in positions {
        let env = envelope(grid, x0, target_range, support_radius);
        let mut kernel: Array2<Complex64> = Array2::zeros((2 * g_dim, 2 * g_dim));
        for (i, &g) in env.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            // particle index i, target indices {0,1}: g * (sx + sz)/sqrt(2)
            kernel[[2 * i, 2 * i]] = Complex64::new(g * s, 0.0);
            kernel[[2 * i + 1, 2 * i + 1]] = Complex64::new(-g * s, 0.0);
            kernel[[2 * i, 2 * i + 1]] = Complex64::new(g * s, 0.0);
            kernel[[2 * i + 1, 2 * i]] = Complex64::new(g * s, 0.0);
        }
        collisions.push(crate::collision::build_collision(&kernel, g_dim, 2, coupling, mode)?);
        targets.push(TargetEnsemble::from_weights(weights, x0)?);
    }
    let (width, speed, density) = slab_geometry;
    SlabSpec::new(targets, collisions, width, speed, density)
}

/// Norms of the jump-family source feeding the crossed block |phi><psi| of
/// the mixed part after an infinitesimal time.
#[derive(Debug, Clone, Copy)]
pub struct CrossedTermReport {
    pub mixture_norm: f64,
    pub footprint_norm: f64,
}

impl CrossedTermReport {
    pub fn total(&self) -> f64 {
        self.mixture_norm + self.footprint_norm
    }
}

/// Evaluate || sum 2 rate A |phi><psi| A^+ ||_F separately for the mixture
/// and footprint families of the slab's generator.
pub fn crossed_term_feedback(
    phi: &StateVector,
    psi: &StateVector,
    slab: &SlabSpec,
) -> Result<CrossedTermReport> {
    let pd = slab.particle_dim();
    if phi.dim() != pd || psi.dim() != pd {
        return Err(Error::DimensionMismatch("packets do not match the slab grid".into()));
    }
    if (phi.norm() - 1.0).abs() > 1e-12 || (psi.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(
            (phi.norm() - 1.0).abs().max((psi.norm() - 1.0).abs()),
        ));
    }
    let gen = crate::generator::build_generator_from_slab(slab)?;
    let cross = {
        let mut m = Array2::zeros((pd, pd));
        for i in 0..pd {
            for j in 0..pd {
                m[[i, j]] = phi.amplitudes()[i] * psi.amplitudes()[j].conj();
            }
        }
        m
    };
    let family_norm = |jumps: &[crate::generator::Jump]| -> f64 {
        let mut acc: Array2<Complex64> = Array2::zeros((pd, pd));
        for j in jumps {
            acc += &j
                .op
                .dot(&cross)
                .dot(&crate::linalg::dagger(&j.op))
                .mapv(|z| 2.0 * j.rate * z);
        }
        fro_norm(&acc)
    };
    Ok(CrossedTermReport {
        mixture_norm: family_norm(gen.jumps_mixture()),
        footprint_norm: family_norm(gen.jumps_footprint()),
    })
}

/// Uniform position grid helper for the packet studies.
pub fn position_grid(half_width: f64, n_points: usize) -> Vec<f64> {
    let dx = 2.0 * half_width / (n_points - 1) as f64;
    (0..n_points).map(|i| -half_width + i as f64 * dx).collect()
}

/// Superposition (|phi> + |psi>)/norm as a state vector.
pub fn superpose(phi: &StateVector, psi: &StateVector) -> Result<StateVector> {
    let amps: Array1<Complex64> = phi.amplitudes() + psi.amplitudes();
    StateVector::new(amps, phi.dims().to_vec())?.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_generator_from_slab, split_evolve, SplitOptions};
    use crate::linalg::DensityMatrix;
    use approx::assert_abs_diff_eq;

    fn medium(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn base_young(im_k: f64) -> YoungConfig {
        YoungConfig::new(1.0, 1000.0, 2.0, medium(2.0, im_k))
            .unwrap()
            .with_screen_grid(64)
    }

    #[test]
    fn vacuum_pattern_has_unit_visibility_and_norm() {
        let cfg = base_young(0.0);
        let i = pattern(&cfg).unwrap();
        let dx = cfg.screen_points[1] - cfg.screen_points[0];
        let total: f64 = i.iter().map(|v| v * dx).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let report = visibility(&i, &cfg).unwrap();
        assert!(report.infinite);
        assert!(report.formula.is_infinite());
        // the conventional contrast is 1 in vacuum (up to grid sampling)
        assert!((report.contrast - 1.0).abs() < 2e-3, "contrast {}", report.contrast);
    }

    #[test]
    fn pattern_rejects_gain() {
        let cfg = base_young(-1e-6);
        assert!(matches!(pattern(&cfg), Err(Error::UnphysicalGain(_))));
    }

    #[test]
    fn half_damping_gives_ratio_two() {
        // Im(k') L = ln(2)/2 makes the damping factor 1/2; ratio 2.
        let l = 1000.0;
        let x = 0.5 * 2.0f64.ln();
        let cfg = YoungConfig::new(1.0, l, 2.0, medium(2.0, x / l))
            .unwrap()
            .with_screen_grid(64);
        let i = pattern(&cfg).unwrap();
        let report = visibility(&i, &cfg).unwrap();
        assert!(
            (report.measured - 2.0).abs() / 2.0 < 0.1,
            "measured {} vs 2",
            report.measured
        );
        assert_abs_diff_eq!(report.formula, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn strong_damping_flattens_the_pattern() {
        let l = 1000.0;
        let cfg = YoungConfig::new(1.0, l, 2.0, medium(2.0, 10.0 / l))
            .unwrap()
            .with_screen_grid(64);
        let i = pattern(&cfg).unwrap();
        let spread = i.iter().cloned().fold(f64::MIN, f64::max)
            - i.iter().cloned().fold(f64::MAX, f64::min);
        let mean = i.iter().sum::<f64>() / i.len() as f64;
        assert!(spread / mean < 1e-7, "pattern should be flat");
    }

    #[test]
    fn visibility_sweep_tracks_formula() {
        let l = 1000.0;
        for &x in &[0.1, 0.5, 1.0, 2.0] {
            let cfg = YoungConfig::new(1.0, l, 2.0, medium(2.0, x / l))
                .unwrap()
                .with_screen_grid(64);
            let i = pattern(&cfg).unwrap();
            let report = visibility(&i, &cfg).unwrap();
            let rel = (report.measured - report.formula).abs() / report.formula;
            assert!(rel < 0.1, "x={x}: measured {} formula {}", report.measured, report.formula);
        }
    }

    #[test]
    fn fringe_spacing_matches_wavelength() {
        let cfg = base_young(0.5 / 1000.0);
        let i = pattern(&cfg).unwrap();
        let maxima = fringe_maxima(&i, &cfg);
        assert!(maxima.len() >= 3);
        let expected = cfg.fringe_period();
        let dx = cfg.screen_points[1] - cfg.screen_points[0];
        for pair in maxima.windows(2) {
            let spacing = pair[1] - pair[0];
            assert!(
                (spacing - expected).abs() <= dx + 1e-12,
                "spacing {spacing} vs period {expected}"
            );
        }
    }

    #[test]
    fn pattern_csv_round() {
        let cfg = base_young(0.0005);
        let i = pattern(&cfg).unwrap();
        let mut buf = Vec::new();
        pattern_to_csv(&cfg, &i, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,intensity\n"));
        assert_eq!(text.lines().count(), i.len() + 1);
    }

    fn packet_setup(separation: f64) -> (Vec<f64>, StateVector, StateVector, SlabSpec) {
        let width = 0.4;
        let range = 0.25;
        let grid = position_grid(12.0, 97);
        let phi = gaussian_packet(&grid, -separation / 2.0, width, 4.0 * width).unwrap();
        let psi = gaussian_packet(&grid, separation / 2.0, width, 4.0 * width).unwrap();
        // one target sitting under each packet
        let slab = localized_slab(
            &grid,
            &[-separation / 2.0, separation / 2.0],
            range,
            0.4,
            &[0.5, 0.5],
            (1.0, 1.0, 1.0),
            CollisionMode::ExactUnitary,
        )
        .unwrap();
        (grid, phi, psi, slab)
    }

    #[test]
    fn crossed_term_feedback_is_nonzero_for_coincident_packets() {
        let (_, phi, _, slab) = packet_setup(0.0);
        let report = crossed_term_feedback(&phi, &phi, &slab).unwrap();
        assert!(report.total() > 1e-6, "coincident packets must feed back");
        assert!(report.mixture_norm > 0.0);
        assert!(report.footprint_norm > 0.0);
    }

    #[test]
    fn crossed_term_feedback_decays_with_separation() {
        let (_, phi0, _, slab0) = packet_setup(0.0);
        let base = crossed_term_feedback(&phi0, &phi0, &slab0).unwrap().total();
        let mut last = f64::INFINITY;
        for &s in &[2.0, 4.0, 6.5] {
            let (_, phi, psi, slab) = packet_setup(s);
            let report = crossed_term_feedback(&phi, &psi, &slab).unwrap();
            assert!(
                report.total() <= last + 1e-18,
                "feedback must not grow with separation"
            );
            last = report.total();
        }
        // disjoint supports: exactly zero
        let (_, phi, psi, slab) = packet_setup(6.5);
        let report = crossed_term_feedback(&phi, &psi, &slab).unwrap();
        assert_eq!(report.total(), 0.0);
        assert!(base > 0.0);
    }

    #[test]
    fn crossed_block_vanishes_when_target_misses_a_packet() {
        // a single target under phi only: A |psi> = 0 exactly
        let width = 0.4;
        let grid = position_grid(12.0, 97);
        let phi = gaussian_packet(&grid, -4.0, width, 4.0 * width).unwrap();
        let psi = gaussian_packet(&grid, 4.0, width, 4.0 * width).unwrap();
        let slab = localized_slab(
            &grid,
            &[-4.0],
            0.25,
            0.4,
            &[0.5, 0.5],
            (1.0, 1.0, 1.0),
            CollisionMode::ExactUnitary,
        )
        .unwrap();
        let report = crossed_term_feedback(&phi, &psi, &slab).unwrap();
        assert_eq!(report.total(), 0.0);
    }

    #[test]
    fn incoherent_input_reproduces_the_mixed_trajectory() {
        // For separated packets the mixed part cannot tell a coherent
        // superposition from the matching incoherent mixture.
        let (_, phi, psi, slab) = packet_setup(6.0);
        let gen = build_generator_from_slab(&slab).unwrap();
        let coherent = superpose(&phi, &psi).unwrap();
        let rho_coherent = DensityMatrix::from_pure(&coherent);
        let mixed_elements = (DensityMatrix::from_pure(&phi).elements()
            + DensityMatrix::from_pure(&psi).elements())
        .mapv(|z| 0.5 * z);
        let rho_incoherent =
            DensityMatrix::new(mixed_elements, vec![phi.dim()]).unwrap();

        let opts = SplitOptions { save_every: 10, ..Default::default() };
        let a = split_evolve(&rho_coherent, &gen, 0.5, 0.01, &opts).unwrap();
        let b = split_evolve(&rho_incoherent, &gen, 0.5, 0.01, &opts).unwrap();
        for (sa, sb) in a.mix.states().iter().zip(b.mix.states().iter()) {
            assert!(
                fro_norm(&(sa - sb)) < 1e-8,
                "mixed trajectories diverged by {}",
                fro_norm(&(sa - sb))
            );
        }
    }
}
