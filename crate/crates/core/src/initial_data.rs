//! Divergence-free DSS initial data `u0 = curl psi` built from a vector
//! potential that is log-periodic in `|x|`: `psi(lambda x) = psi(x)`, hence
//! `u0(x) = lambda u0(lambda x)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::AngularRule;
use crate::vec3::{norm, Vec3};
use crate::{Error, Result};

/// Regularity class the datum is meant to represent away from the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HolderClass {
    /// `C^gamma` only: built with a truncated lacunary angular series.
    Gamma(f64),
    /// `C^{1,beta}`: smooth angular profiles.
    OneBeta(f64),
}

/// Direction field multiplying a potential term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    /// Fixed Cartesian axis `e_c`.
    Axis(usize),
    /// Azimuthal `e_theta |x'| / |x|` with `x'` the projection on the `x1 x2` plane.
    Azimuthal,
}

/// Truncated lacunary series `sum_{j=1}^{levels} 2^{-j s} sin(2^j x.d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lacunary {
    pub dir: Vec3,
    pub levels: u32,
    pub exponent: f64,
    pub amplitude: f64,
}

/// Angular profile `h(xh) = c + l.xh + xh.Q.xh + lacunary(xh)` on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AngularProfile {
    pub constant: f64,
    pub linear: Vec3,
    /// `[xx, yy, zz, xy, xz, yz]`; off-diagonal entries count once.
    pub quadratic: [f64; 6],
    pub lacunary: Option<Lacunary>,
}

/// One term `g(ln|x|) h(x/|x|) w(x/|x|)` of the potential with
/// `g(rho) = a cos(n w rho) + b sin(n w rho)`, `w = 2 pi / ln lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialTerm {
    pub direction: Direction,
    pub frequency: u32,
    pub cos_amp: f64,
    pub sin_amp: f64,
    pub angular: AngularProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Generic,
    AxisymNoSwirl,
}

/// Profile parameters for the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub terms: Vec<PotentialTerm>,
    pub holder: HolderClass,
}

impl ProfileSpec {
    pub fn zero(holder: HolderClass) -> Self {
        Self { terms: Vec::new(), holder }
    }

    /// Deterministic pseudo-random profile with `n_terms` terms and
    /// log-frequencies up to `max_frequency`.
    pub fn random(seed: u64, family: Family, holder: HolderClass, n_terms: usize, max_frequency: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = |rng: &mut ChaCha8Rng| rng.gen_range(-1.0..1.0);
        let mut terms = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let direction = match family {
                Family::Generic => Direction::Axis(rng.gen_range(0..3)),
                Family::AxisymNoSwirl => Direction::Azimuthal,
            };
            let mut angular = AngularProfile {
                constant: unit(&mut rng),
                ..Default::default()
            };
            match family {
                Family::Generic => {
                    angular.linear = [unit(&mut rng), unit(&mut rng), unit(&mut rng)];
                    for q in angular.quadratic.iter_mut() {
                        *q = 0.5 * unit(&mut rng);
                    }
                }
                Family::AxisymNoSwirl => {
                    angular.linear = [0.0, 0.0, unit(&mut rng)];
                    angular.quadratic[2] = 0.5 * unit(&mut rng);
                }
            }
            if let HolderClass::Gamma(g) = holder {
                let dir = match family {
                    Family::Generic => {
                        let d = [unit(&mut rng), unit(&mut rng), unit(&mut rng) + 1.5];
                        let n = norm(&d);
                        [d[0] / n, d[1] / n, d[2] / n]
                    }
                    Family::AxisymNoSwirl => [0.0, 0.0, 1.0],
                };
                angular.lacunary = Some(Lacunary {
                    dir,
                    levels: 4,
                    // the potential is one derivative smoother than u0
                    exponent: 1.0 + g,
                    amplitude: 1.0,
                });
            }
            terms.push(PotentialTerm {
                direction,
                frequency: rng.gen_range(0..=max_frequency),
                cos_amp: unit(&mut rng),
                sin_amp: unit(&mut rng),
                angular,
            });
        }
        Self { terms, holder }
    }
}

/// Scalar with its gradient (forward-mode derivative).
#[derive(Debug, Clone, Copy)]
struct Jet {
    v: f64,
    g: Vec3,
}

impl Jet {
    fn constant(v: f64) -> Self {
        Self { v, g: [0.0; 3] }
    }
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1], self.g[2] + o.g[2]],
        }
    }
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            g: [
                self.g[0] * o.v + self.v * o.g[0],
                self.g[1] * o.v + self.v * o.g[1],
                self.g[2] * o.v + self.v * o.g[2],
            ],
        }
    }
    fn scale(self, a: f64) -> Jet {
        Jet {
            v: a * self.v,
            g: [a * self.g[0], a * self.g[1], a * self.g[2]],
        }
    }
    /// `(sin, cos)` of `a * self`.
    fn sin_cos(self, a: f64) -> (Jet, Jet) {
        let (s, c) = (a * self.v).sin_cos();
        (
            Jet { v: s, g: [a * c * self.g[0], a * c * self.g[1], a * c * self.g[2]] },
            Jet { v: c, g: [-a * s * self.g[0], -a * s * self.g[1], -a * s * self.g[2]] },
        )
    }
}

/// Scalar type the potential is evaluated in: plain values or jets.
trait Num: Copy {
    fn c(v: f64) -> Self;
    fn add(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn scale(self, a: f64) -> Self;
    fn sin_cos(self, a: f64) -> (Self, Self);
}

impl Num for f64 {
    fn c(v: f64) -> Self {
        v
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn scale(self, a: f64) -> Self {
        a * self
    }
    fn sin_cos(self, a: f64) -> (Self, Self) {
        (a * self).sin_cos()
    }
}

impl Num for Jet {
    fn c(v: f64) -> Self {
        Jet::constant(v)
    }
    fn add(self, o: Self) -> Self {
        Jet::add(self, o)
    }
    fn mul(self, o: Self) -> Self {
        Jet::mul(self, o)
    }
    fn scale(self, a: f64) -> Self {
        Jet::scale(self, a)
    }
    fn sin_cos(self, a: f64) -> (Self, Self) {
        Jet::sin_cos(self, a)
    }
}

fn angular_value<T: Num>(h: &AngularProfile, xh: &[T; 3]) -> T {
    let mut acc = T::c(h.constant);
    for m in 0..3 {
        if h.linear[m] != 0.0 {
            acc = acc.add(xh[m].scale(h.linear[m]));
        }
    }
    const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
    for (q, (a, b)) in h.quadratic.iter().zip(PAIRS) {
        if *q != 0.0 {
            acc = acc.add(xh[a].mul(xh[b]).scale(*q));
        }
    }
    if let Some(l) = &h.lacunary {
        let proj = xh[0].scale(l.dir[0]).add(xh[1].scale(l.dir[1])).add(xh[2].scale(l.dir[2]));
        let mut freq = 1.0;
        for _ in 1..=l.levels {
            freq *= 2.0;
            let (s, _) = proj.sin_cos(freq);
            acc = acc.add(s.scale(l.amplitude * freq.powf(-l.exponent)));
        }
    }
    acc
}

/// A divergence-free lambda-DSS initial datum.
#[derive(Debug, Clone)]
pub struct DssInitialData {
    pub lambda: f64,
    pub spec: ProfileSpec,
    pub family: Family,
    /// Overall factor applied to the potential after normalisation.
    pub scale: f64,
    /// Recorded `sup_{1 <= |x| <= lambda} |x| |u0(x)|`.
    pub c_star: f64,
}

impl DssInitialData {
    pub fn holder_class(&self) -> HolderClass {
        self.spec.holder
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0 || self.spec.terms.is_empty()
    }

    /// Largest log-frequency `n` present in the potential.
    pub fn max_frequency(&self) -> u32 {
        self.spec.terms.iter().map(|t| t.frequency).max().unwrap_or(0)
    }

    /// Whether the angular profiles are polynomial (no lacunary part), in
    /// which case `|x| u0` has spherical-harmonic degree at most four.
    pub fn has_polynomial_profiles(&self) -> bool {
        self.spec.terms.iter().all(|t| t.angular.lacunary.is_none())
    }

    /// Log-frequency unit `2 pi / ln lambda`.
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.lambda.ln()
    }

    fn potential_generic<T: Num>(&self, rho: T, xh: &[T; 3]) -> [T; 3] {
        let w = self.omega();
        let mut out = [T::c(0.0); 3];
        for term in &self.spec.terms {
            let (s, c) = rho.sin_cos(w * term.frequency as f64);
            let g = c.scale(term.cos_amp).add(s.scale(term.sin_amp));
            let gh = g.mul(angular_value(&term.angular, xh)).scale(self.scale);
            match term.direction {
                Direction::Axis(k) => out[k] = out[k].add(gh),
                Direction::Azimuthal => {
                    out[0] = out[0].add(gh.mul(xh[1]).scale(-1.0));
                    out[1] = out[1].add(gh.mul(xh[0]));
                }
            }
        }
        out
    }

    /// The vector potential `psi(x)`; bounded, log-periodic, undefined at 0.
    pub fn potential(&self, x: &Vec3) -> Vec3 {
        let r = norm(x);
        if r == 0.0 || self.is_zero() {
            return [0.0; 3];
        }
        self.potential_generic(r.ln(), &[x[0] / r, x[1] / r, x[2] / r])
    }

    /// Potential and its Jacobian `d_k psi_i` as `(psi, [grad psi_0, grad psi_1, grad psi_2])`.
    pub fn potential_jacobian(&self, x: &Vec3) -> (Vec3, [Vec3; 3]) {
        let r = norm(x);
        if r == 0.0 || self.is_zero() {
            return ([0.0; 3], [[0.0; 3]; 3]);
        }
        let xh = [x[0] / r, x[1] / r, x[2] / r];
        let r2 = r * r;
        let rho = Jet { v: r.ln(), g: [x[0] / r2, x[1] / r2, x[2] / r2] };
        let mk = |m: usize| {
            let mut g = [0.0; 3];
            for (k, gk) in g.iter_mut().enumerate() {
                *gk = ((k == m) as u8 as f64 - xh[k] * xh[m]) / r;
            }
            Jet { v: xh[m], g }
        };
        let p = self.potential_generic(rho, &[mk(0), mk(1), mk(2)]);
        ([p[0].v, p[1].v, p[2].v], [p[0].g, p[1].g, p[2].g])
    }

    /// `u0 = curl psi`.
    pub fn velocity(&self, x: &Vec3) -> Vec3 {
        let (_, j) = self.potential_jacobian(x);
        [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
    }
}

fn validate(lambda: f64, c_star_target: f64, spec: &ProfileSpec) -> Result<()> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return Err(Error::Argument(format!("lambda must exceed 1, got {lambda}")));
    }
    if !(c_star_target > 0.0) || !c_star_target.is_finite() {
        return Err(Error::Argument(format!("C_* target must be positive, got {c_star_target}")));
    }
    let exp = match spec.holder {
        HolderClass::Gamma(g) => g,
        HolderClass::OneBeta(b) => b,
    };
    if !(exp > 0.0 && exp < 1.0) {
        return Err(Error::Argument(format!("Hoelder exponent must lie in (0,1), got {exp}")));
    }
    if let HolderClass::OneBeta(_) = spec.holder {
        if spec.terms.iter().any(|t| t.angular.lacunary.is_some()) {
            return Err(Error::Argument("C^{1,beta} data cannot carry a lacunary profile".into()));
        }
    }
    Ok(())
}

/// `sup |x||u0(x)|` over a fixed sampling of the fundamental annulus.
pub fn annulus_sup(u0: &DssInitialData) -> f64 {
    let rule = AngularRule::new(24, 48);
    let n_r = 25;
    let mut sup: f64 = 0.0;
    for i in 0..n_r {
        let r = u0.lambda.powf(i as f64 / (n_r - 1) as f64);
        for d in &rule.dirs {
            let x = [r * d[0], r * d[1], r * d[2]];
            sup = sup.max(r * norm(&u0.velocity(&x)));
        }
    }
    sup
}

fn build(spec: ProfileSpec, family: Family, lambda: f64, c_star_target: f64) -> Result<DssInitialData> {
    validate(lambda, c_star_target, &spec)?;
    let mut data = DssInitialData { lambda, spec, family, scale: 1.0, c_star: 0.0 };
    let raw = annulus_sup(&data);
    if raw == 0.0 {
        data.scale = 0.0;
        return Ok(data);
    }
    data.scale = c_star_target / raw;
    data.c_star = annulus_sup(&data);
    Ok(data)
}

/// General DSS datum from a potential with Cartesian direction fields.
pub fn make_initial_data(spec: ProfileSpec, lambda: f64, c_star_target: f64) -> Result<DssInitialData> {
    if spec.terms.iter().any(|t| t.direction == Direction::Azimuthal) {
        log::debug!("generic datum built with azimuthal potential terms");
    }
    build(spec, Family::Generic, lambda, c_star_target)
}

/// Axisymmetric datum without swirl: `psi = psi_theta(r, z) e_theta`.
pub fn make_axisym_noswirl(spec: ProfileSpec, lambda: f64, c_star_target: f64) -> Result<DssInitialData> {
    for t in &spec.terms {
        let h = &t.angular;
        let axial = t.direction == Direction::Azimuthal
            && h.linear[0] == 0.0
            && h.linear[1] == 0.0
            && h.quadratic[0] == 0.0
            && h.quadratic[1] == 0.0
            && h.quadratic[3..].iter().all(|q| *q == 0.0)
            && h.lacunary.map_or(true, |l| l.dir[0] == 0.0 && l.dir[1] == 0.0);
        if !axial {
            return Err(Error::Argument(
                "axisymmetric data needs azimuthal terms with profiles depending on x3/|x| only".into(),
            ));
        }
    }
    build(spec, Family::AxisymNoSwirl, lambda, c_star_target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_profile_gives_zero_data() {
        let d = make_initial_data(ProfileSpec::zero(HolderClass::OneBeta(0.5)), 2.0, 1.0).unwrap();
        assert_eq!(d.c_star, 0.0);
        assert_eq!(d.velocity(&[0.3, 0.1, 2.0]), [0.0; 3]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = ProfileSpec::random(1, Family::Generic, HolderClass::OneBeta(0.5), 2, 2);
        assert!(make_initial_data(s.clone(), 2.0, 0.0).is_err());
        assert!(make_initial_data(s.clone(), 1.0, 1.0).is_err());
        assert!(make_axisym_noswirl(s, 2.0, 1.0).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = ProfileSpec::random(7, Family::Generic, HolderClass::Gamma(0.4), 4, 2);
        let d = make_initial_data(s, 1.7, 1.0).unwrap();
        let x = [0.7, -0.4, 1.1];
        let (_, j) = d.potential_jacobian(&x);
        let h = 1e-6;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (pp, pm) = (d.potential(&xp), d.potential(&xm));
            for i in 0..3 {
                let fd = (pp[i] - pm[i]) / (2.0 * h);
                assert!((fd - j[i][k]).abs() < 1e-6 * (1.0 + fd.abs()), "{i}{k}: {fd} {}", j[i][k]);
            }
        }
    }

    #[test]
    fn rescaled_to_target() {
        let s = ProfileSpec::random(3, Family::Generic, HolderClass::OneBeta(0.5), 3, 2);
        let d = make_initial_data(s, 2.0, 0.25).unwrap();
        assert!((d.c_star - 0.25).abs() < 1e-12);
    }
}
