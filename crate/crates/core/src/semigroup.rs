//! The heat semigroup `U = e^{t Delta} u0` of DSS data.
//!
//! `|y| u0(y)` is a trigonometric polynomial in `ln|y|` (period `ln lambda`)
//! with angular coefficients that are expanded in real spherical harmonics.
//! For each harmonic the Gaussian convolution reduces, by the addition
//! theorem `e^{a x.y} = 4 pi sum_l i_l(a) sum_m Y_lm(x) Y_lm(y)`, to a radial
//! integral against a scaled modified spherical Bessel function, which is
//! integrated with Gauss-Legendre panels in `ln|y|`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::grid::{AngularRule, StripGrid};
use crate::initial_data::DssInitialData;
use crate::lattice::LatticeField;
use crate::quadrature::GaussLegendre;
use crate::sh::{mode_list, sh_values};
use crate::vec3::{norm, Vec3};
use crate::{Error, Result};

/// `e^{-z} i_l(z)` for `l = 0..=lmax`, written into `out`.
pub fn scaled_bessel_i(lmax: usize, z: f64, out: &mut [f64]) {
    debug_assert!(out.len() > lmax && z >= 0.0);
    if z < 0.5 {
        // power series i_l(z) = z^l/(2l+1)!! sum_k (z^2/2)^k / (k! (2l+3)...(2l+2k+1))
        let e = (-z).exp();
        let h = 0.5 * z * z;
        let mut lead = 1.0;
        for (l, o) in out.iter_mut().enumerate().take(lmax + 1) {
            if l > 0 {
                lead *= z / (2 * l + 1) as f64;
            }
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..30 {
                term *= h / (k as f64 * (2 * l + 2 * k + 1) as f64);
                sum += term;
                if term < 1e-17 * sum {
                    break;
                }
            }
            *o = e * lead * sum;
        }
        return;
    }
    // Miller's downward recurrence i_{l-1} = i_{l+1} + (2l+1)/z i_l, started
    // far enough above lmax for the minimal solution to dominate.
    let mut top = lmax;
    let mut decay = 1.0;
    while decay > 1e-20 {
        let lf = top as f64 + 1.5;
        decay *= z / (lf + (lf * lf + z * z).sqrt());
        decay *= z / (lf + (lf * lf + z * z).sqrt());
        top += 1;
    }
    top += 4;
    let mut next = 0.0; // i_{l+1}
    let mut cur = 1e-280; // i_l
    for l in (1..=top).rev() {
        let prev = next + (2 * l + 1) as f64 / z * cur;
        next = cur;
        cur = prev;
        if l - 1 <= lmax {
            out[l - 1] = cur;
        }
        if cur > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            for o in out.iter_mut().take(lmax + 1).skip(l - 1) {
                *o *= 1e-250;
            }
        }
    }
    let i0 = -(-2.0 * z).exp_m1() / (2.0 * z);
    let norm0 = i0 / out[0];
    for o in out.iter_mut().take(lmax + 1) {
        *o *= norm0;
    }
}

/// Precomputed harmonic expansion of a DSS datum.
#[derive(Debug, Clone)]
pub struct HeatSemigroup {
    data: Arc<DssInitialData>,
    lmax: usize,
    n_freq: usize,
    /// `coef[((comp * n_freq + n) * 2 + trig) * n_modes + mode]`, trig 0 = cos, 1 = sin.
    coef: Vec<f64>,
    /// Mode degree `l` for each mode.
    degree: Vec<usize>,
    gl: GaussLegendre,
}

const GAUSS_WIDTH: f64 = 14.0;
const SMALL_RADIUS: f64 = 1e-6;

impl HeatSemigroup {
    pub fn new(data: Arc<DssInitialData>) -> Self {
        let lmax = if data.has_polynomial_profiles() { 6 } else { 44 };
        let n_freq = data.max_frequency() as usize + 1;
        let modes = mode_list(lmax, lmax);
        let n_modes = modes.len();
        let mut coef = vec![0.0; 3 * n_freq * 2 * n_modes];
        if !data.is_zero() {
            let rule = AngularRule::new(lmax + 1, 2 * lmax + 2);
            let n_rho = 2 * n_freq;
            let period = data.lambda.ln();
            let w = data.omega();
            let per_node: Vec<Vec<f64>> = rule
                .dirs
                .par_iter()
                .zip(rule.weights.par_iter())
                .map(|(d, &wt)| {
                    // DFT in ln r of |x| u0 along the ray
                    let mut four = vec![0.0; 3 * n_freq * 2];
                    for q in 0..n_rho {
                        let rho = period * q as f64 / n_rho as f64;
                        let r = rho.exp();
                        let u = data.velocity(&[r * d[0], r * d[1], r * d[2]]);
                        for n in 0..n_freq {
                            let (s, c) = (w * n as f64 * rho).sin_cos();
                            let f = if n == 0 { 1.0 } else { 2.0 } / n_rho as f64;
                            for comp in 0..3 {
                                four[(comp * n_freq + n) * 2] += f * c * r * u[comp];
                                four[(comp * n_freq + n) * 2 + 1] += f * s * r * u[comp];
                            }
                        }
                    }
                    let y = sh_values(lmax, d);
                    let mut out = vec![0.0; 3 * n_freq * 2 * n_modes];
                    for (k, fk) in four.iter().enumerate() {
                        if *fk != 0.0 {
                            for (m, ym) in y.iter().enumerate() {
                                out[k * n_modes + m] = wt * fk * ym;
                            }
                        }
                    }
                    out
                })
                .collect();
            for node in &per_node {
                for (c, v) in coef.iter_mut().zip(node) {
                    *c += v;
                }
            }
        }
        Self {
            data,
            lmax,
            n_freq,
            coef,
            degree: modes.iter().map(|&(l, _)| l).collect(),
            gl: GaussLegendre::new(10),
        }
    }

    pub fn data(&self) -> &Arc<DssInitialData> {
        &self.data
    }

    fn n_modes(&self) -> usize {
        self.degree.len()
    }

    /// Radial integrals `I[(n * 2 + trig) * (lmax+1) + l]` of
    /// `int r^2 g_n(ln r) r^{-1} K_l(R, r, t) dr`.
    fn radial_table(&self, big_r: f64, t: f64) -> Vec<f64> {
        let lmax = self.lmax;
        let nl = lmax + 1;
        let mut table = vec![0.0; self.n_freq * 2 * nl];
        if self.data.is_zero() {
            return table;
        }
        let st = t.sqrt();
        let lo = (big_r - GAUSS_WIDTH * st).max(SMALL_RADIUS * st);
        let hi = big_r + GAUSS_WIDTH * st;
        let d_rho = (0.25f64).min(self.data.lambda.ln() / (4.0 * self.n_freq as f64));
        let amp = 4.0 * PI * (4.0 * PI * t).powf(-1.5);
        let w = self.data.omega();
        let mut bes = vec![0.0; nl];
        let mut a = lo;
        while a < hi {
            let b = (a * d_rho.exp()).min(a + 0.5 * st).min(hi);
            for (r, wr) in self.gl.on(a, b) {
                let z = big_r * r / (2.0 * t);
                scaled_bessel_i(lmax, z, &mut bes);
                let g = amp * (-(big_r - r).powi(2) / (4.0 * t)).exp() * r * wr;
                if g == 0.0 {
                    continue;
                }
                let rho = r.ln();
                for n in 0..self.n_freq {
                    let (s, c) = (w * n as f64 * rho).sin_cos();
                    let base = n * 2 * nl;
                    for l in 0..nl {
                        let k = g * bes[l];
                        table[base + l] += c * k;
                        table[base + nl + l] += s * k;
                    }
                }
            }
            a = b;
        }
        table
    }

    fn assemble(&self, table: &[f64], dir: Option<&Vec3>) -> Vec3 {
        let nl = self.lmax + 1;
        let n_modes = self.n_modes();
        let y = match dir {
            Some(d) => sh_values(self.lmax, d),
            None => {
                // at the origin only the l = 0 harmonic survives
                let mut y = vec![0.0; n_modes];
                y[0] = 1.0 / (4.0 * PI).sqrt();
                y
            }
        };
        let mut out = [0.0; 3];
        for (comp, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for n in 0..self.n_freq {
                for trig in 0..2 {
                    let c = &self.coef[((comp * self.n_freq + n) * 2 + trig) * n_modes..][..n_modes];
                    let tab = &table[(n * 2 + trig) * nl..][..nl];
                    for m in 0..n_modes {
                        if c[m] != 0.0 {
                            acc += c[m] * y[m] * tab[self.degree[m]];
                        }
                    }
                }
            }
            *o = acc;
        }
        out
    }

    /// `U(x, t)`.
    pub fn eval(&self, x: &Vec3, t: f64) -> Result<Vec3> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("heat semigroup needs t > 0, got {t}")));
        }
        if self.data.is_zero() {
            return Ok([0.0; 3]);
        }
        let r = norm(x);
        let table = self.radial_table(r, t);
        if r == 0.0 {
            Ok(self.assemble(&table, None))
        } else {
            Ok(self.assemble(&table, Some(&[x[0] / r, x[1] / r, x[2] / r])))
        }
    }

    /// `U` sampled at every node of the strip lattice; radial integrals are
    /// shared across the angular nodes of a shell.
    pub fn on_lattice(&self, grid: Arc<StripGrid>) -> LatticeField<3> {
        let mut field = LatticeField::<3>::zeros(grid.clone(), 1);
        if self.data.is_zero() {
            return field;
        }
        let pairs: Vec<(usize, usize)> =
            (0..grid.n_time).flat_map(|j| (0..grid.n_rho).map(move |i| (i, j))).collect();
        let values: Vec<Vec<Vec3>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let table = self.radial_table(grid.radius(i as isize), grid.time(j as isize));
                grid.angles.dirs.iter().map(|d| self.assemble(&table, Some(d))).collect()
            })
            .collect();
        for (&(i, j), vals) in pairs.iter().zip(values) {
            for (a, v) in vals.into_iter().enumerate() {
                field.samples[grid.index(i, a, j)] = v;
            }
        }
        field
    }
}

/// `e^{t Delta} u0` at one point.
pub fn heat_semigroup(u0: &Arc<DssInitialData>, x: &Vec3, t: f64) -> Result<Vec3> {
    HeatSemigroup::new(u0.clone()).eval(x, t)
}
