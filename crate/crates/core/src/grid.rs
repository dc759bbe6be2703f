//! Log-radial x spherical x log-time lattice on the fundamental strip
//! `Q = R^3 x [1, lambda^2)`.
//!
//! Shells are uniform in `rho = ln|x|` with `ln(lambda)` an integer multiple
//! of the shell spacing, and time slices are uniform in `ln t` covering one
//! DSS period. The lattice is therefore invariant under the DSS map
//! `(x, t) -> (lambda x, lambda^2 t)`: it shifts shells by
//! `shells_per_period` and time slices by `n_time`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use crate::quadrature::GaussLegendre;
use crate::sh::Resampler;
use crate::vec3::Vec3;
use crate::{Error, Result};

/// Product rule on the unit sphere: Gauss-Legendre in `cos(theta)` times a
/// uniform rule in longitude.
#[derive(Debug, Clone)]
pub struct AngularRule {
    pub n_theta: usize,
    pub n_phi: usize,
    pub cos_theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Node directions, theta-major.
    pub dirs: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl AngularRule {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let gl = GaussLegendre::new(n_theta);
        let phi: Vec<f64> = (0..n_phi)
            .map(|m| 2.0 * PI * (m as f64 + 0.5) / n_phi as f64)
            .collect();
        let mut dirs = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (&mu, &w) in gl.nodes.iter().zip(&gl.weights) {
            let s = (1.0 - mu * mu).sqrt();
            for &p in &phi {
                dirs.push([s * p.cos(), s * p.sin(), mu]);
                weights.push(w * 2.0 * PI / n_phi as f64);
            }
        }
        Self {
            n_theta,
            n_phi,
            cos_theta: gl.nodes,
            phi,
            dirs,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Lattice on the fundamental strip.
#[derive(Debug, Clone)]
pub struct StripGrid {
    pub lambda: f64,
    /// Shells per factor `lambda` in radius.
    pub shells_per_period: usize,
    pub n_rho: usize,
    pub rho_min: f64,
    pub n_time: usize,
    pub angles: AngularRule,
    resampler: OnceLock<Arc<Resampler>>,
}

/// Angular refinement factor of the equiangular interpolation grid.
pub const ANGULAR_UPSAMPLE: usize = 6;

/// Parameters from which a [`StripGrid`] is built.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lambda: f64,
    pub shells_per_period: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_time: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            shells_per_period: 2,
            rho_min: -2.5,
            rho_max: 3.5,
            n_theta: 4,
            n_phi: 8,
            n_time: 3,
        }
    }
}

impl StripGrid {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        if !(spec.lambda > 1.0) || !spec.lambda.is_finite() {
            return Err(Error::Argument(format!("DSS factor must exceed 1, got {}", spec.lambda)));
        }
        if !(spec.rho_min < spec.rho_max) {
            return Err(Error::Argument("rho_min must be below rho_max".into()));
        }
        if spec.shells_per_period < 1 || spec.n_theta < 2 || spec.n_phi < 2 || spec.n_time < 2 {
            return Err(Error::Argument("grid counts must be at least 2".into()));
        }
        if spec.n_phi % 2 != 0 {
            return Err(Error::Argument("n_phi must be even (antipodal symmetry)".into()));
        }
        let d = spec.lambda.ln() / spec.shells_per_period as f64;
        let n_rho = ((spec.rho_max - spec.rho_min) / d).ceil() as usize + 1;
        Ok(Self {
            lambda: spec.lambda,
            shells_per_period: spec.shells_per_period,
            n_rho: n_rho.max(2),
            rho_min: spec.rho_min,
            n_time: spec.n_time,
            angles: AngularRule::new(spec.n_theta, spec.n_phi),
            resampler: OnceLock::new(),
        })
    }

    /// The spec this grid was built from (with `rho_max` snapped to the lattice).
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            lambda: self.lambda,
            shells_per_period: self.shells_per_period,
            rho_min: self.rho_min,
            rho_max: self.rho_max(),
            n_theta: self.angles.n_theta,
            n_phi: self.angles.n_phi,
            n_time: self.n_time,
        }
    }

    /// Shared spherical-harmonic resampler for this grid's angular rule.
    pub fn resampler(&self) -> Arc<Resampler> {
        self.resampler
            .get_or_init(|| Arc::new(Resampler::new(&self.angles, ANGULAR_UPSAMPLE)))
            .clone()
    }

    pub fn n_ang(&self) -> usize {
        self.angles.len()
    }

    pub fn delta_rho(&self) -> f64 {
        self.lambda.ln() / self.shells_per_period as f64
    }

    pub fn rho_max(&self) -> f64 {
        self.rho(self.n_rho as isize - 1)
    }

    /// `ln|x|` of shell `i` (any integer, not only stored shells).
    pub fn rho(&self, i: isize) -> f64 {
        self.rho_min + i as f64 * self.delta_rho()
    }

    pub fn radius(&self, i: isize) -> f64 {
        self.rho(i).exp()
    }

    /// Spacing of time slices in `ln t`.
    pub fn delta_log_t(&self) -> f64 {
        2.0 * self.lambda.ln() / self.n_time as f64
    }

    /// Time of slice `j` (any integer); slices `0..n_time` lie in `[1, lambda^2)`.
    pub fn time(&self, j: isize) -> f64 {
        (j as f64 * self.delta_log_t()).exp()
    }

    pub fn len(&self) -> usize {
        self.n_rho * self.n_ang() * self.n_time
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, shell: usize, angle: usize, time: usize) -> usize {
        (time * self.n_rho + shell) * self.n_ang() + angle
    }

    /// Inverse of [`StripGrid::index`].
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let n_ang = self.n_ang();
        let angle = idx % n_ang;
        let rest = idx / n_ang;
        (rest % self.n_rho, angle, rest / self.n_rho)
    }

    /// Physical point and time of a lattice node.
    pub fn node(&self, shell: usize, angle: usize, time: usize) -> (Vec3, f64) {
        let r = self.radius(shell as isize);
        let d = self.angles.dirs[angle];
        ([r * d[0], r * d[1], r * d[2]], self.time(time as isize))
    }

    /// The unique epoch `k` with `1 <= lambda^{2k} t < lambda^2`.
    pub fn epoch(&self, t: f64) -> i32 {
        epoch_of(self.lambda, t)
    }
}

/// The unique integer `k` with `1 <= lambda^{2k} t < lambda^2`.
pub fn epoch_of(lambda: f64, t: f64) -> i32 {
    let l2 = lambda * lambda;
    let mut k = -(t.ln() / l2.ln()).floor() as i32;
    // Guard the floor against rounding at epoch boundaries.
    loop {
        let s = l2.powi(k) * t;
        if s < 1.0 {
            k += 1;
        } else if s >= l2 {
            k -= 1;
        } else {
            return k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angular_weights_sum_to_four_pi() {
        for (nt, np) in [(2, 4), (4, 8), (7, 14), (12, 24)] {
            let a = AngularRule::new(nt, np);
            let s: f64 = a.weights.iter().sum();
            assert!((s - 4.0 * PI).abs() < 1e-12 * 4.0 * PI);
            assert!(a.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn angular_rule_is_antipodal() {
        let a = AngularRule::new(5, 10);
        for d in &a.dirs {
            let found = a
                .dirs
                .iter()
                .any(|e| (e[0] + d[0]).abs() + (e[1] + d[1]).abs() + (e[2] + d[2]).abs() < 1e-12);
            assert!(found);
        }
    }

    #[test]
    fn time_slices_are_half_open() {
        let g = StripGrid::new(&GridSpec::default()).unwrap();
        assert_eq!(g.time(0), 1.0);
        let last = g.time(g.n_time as isize - 1);
        assert!(last < g.lambda * g.lambda);
        assert!((g.time(g.n_time as isize) - g.lambda * g.lambda).abs() < 1e-12);
    }

    #[test]
    fn shell_lattice_is_dss_invariant() {
        let g = StripGrid::new(&GridSpec::default()).unwrap();
        let p = g.shells_per_period as isize;
        assert!((g.radius(3 + p) - g.lambda * g.radius(3)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = GridSpec::default();
        s.lambda = 1.0;
        assert!(StripGrid::new(&s).is_err());
        let mut s = GridSpec::default();
        s.n_time = 1;
        assert!(StripGrid::new(&s).is_err());
    }

    #[test]
    fn epoch_matches_integer_scan() {
        for &(lambda, t) in &[(2.0, 1.0), (2.0, 4.0), (1.2, 3.0), (1.5, 1e-6), (3.0, 1e5), (2.0, 3.999999)] {
            let k = epoch_of(lambda, t);
            let scan = (-200..200)
                .find(|&k| {
                    let s = (lambda * lambda as f64).powi(k) * t;
                    (1.0..lambda * lambda).contains(&s)
                })
                .unwrap();
            assert_eq!(k, scan, "lambda={lambda} t={t}");
        }
        assert_eq!(epoch_of(2.0, 4.0), -1);
        assert_eq!(epoch_of(1.2, 3.0), -3);
    }

    #[test]
    fn index_roundtrip() {
        let g = StripGrid::new(&GridSpec::default()).unwrap();
        for idx in [0, 1, 17, g.len() - 1] {
            let (i, a, j) = g.unindex(idx);
            assert_eq!(g.index(i, a, j), idx);
        }
    }
}
