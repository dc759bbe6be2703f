//! The Stokes potential `(Phi f)_i(x,t) = int_0^t int d_k S_ij(x-y, t-s) f_kj(y,s) dy ds`
//! of a DSS force of degree two, evaluated at every node of the strip lattice.
//!
//! By the semigroup property of the Oseen tensor,
//! `Phi f(t) = W(t) + sum_{k>=1} lambda^k [e^{t(lambda^{2k}-1) Delta} W(., t)](lambda^k x)`,
//! where `W(x,t)` only integrates over the last window `s in [t/lambda^2, t]`.
//! Inside the window the force is exactly the lattice interpolant, a cubic
//! in `ln s` between consecutive time slices, so the time integral of the
//! kernel against each cubic basis function is tabulated once (in the
//! parabolic variable `|z|/sqrt t`). The remaining spatial integral is done in
//! target-centred spherical coordinates with the value at the target
//! subtracted (the kernel is odd), plus an origin-centred patch for the force
//! concentration near `y = 0` when the target is far from it. The memory sum
//! is a heat-kernel convolution of `W(., t)` evaluated through its
//! spherical-harmonic expansion and radial Bessel integrals.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::grid::{AngularRule, StripGrid};
use crate::kernels::profile;
use crate::lattice::{bracket_r, cubic_weights, raw_tail_exponent, Interpolator, LatticeField};
use crate::quadrature::GaussLegendre;
use crate::semigroup::scaled_bessel_i;
use crate::sh::{eval_modes, mode_list};
use crate::vec3::{dot, norm, orthonormal_frame, sym_mul_vec, Sym3, Vec3};
use crate::{Error, Result};

/// Discretisation parameters of the space-time quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Radius, in units of `sqrt t`, below which the target-centred sphere
    /// integrals use the reduced angular rule.
    pub near_radius_factor: f64,
    /// Minimum number of past windows summed in the memory term.
    pub k_min_offset: usize,
    /// Radial panels per unit of `ln |z|`.
    pub shell_resolution: usize,
    /// Gauss-Legendre nodes per radial panel.
    pub radial_order: usize,
    /// Colatitude nodes of the target-frame sphere rule (longitudes: twice as many).
    pub angle_resolution: usize,
    /// Gauss-Legendre nodes per log-time sub-panel of the kernel moments.
    pub time_resolution: usize,
    /// Requested relative accuracy.
    pub target_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            near_radius_factor: 0.1,
            k_min_offset: 4,
            shell_resolution: 2,
            radial_order: 6,
            angle_resolution: 8,
            time_resolution: 8,
            target_tol: 1e-3,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [self.shell_resolution, self.radial_order, self.angle_resolution, self.time_resolution];
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::Argument("quadrature resolutions must be at least 2".into()));
        }
        if !(self.target_tol > 0.0) {
            return Err(Error::Argument("target_tol must be positive".into()));
        }
        if self.k_min_offset < 1 {
            return Err(Error::Argument("k_min_offset must be at least 1".into()));
        }
        if !(self.near_radius_factor > 0.0) {
            return Err(Error::Argument("near_radius_factor must be positive".into()));
        }
        Ok(())
    }

    /// One refinement step: finer radial, angular and temporal resolution.
    pub fn refined(&self) -> Self {
        Self {
            near_radius_factor: 0.5 * self.near_radius_factor,
            k_min_offset: self.k_min_offset + 2,
            shell_resolution: 2 * self.shell_resolution,
            radial_order: self.radial_order + 2,
            angle_resolution: self.angle_resolution + self.angle_resolution / 2,
            time_resolution: self.time_resolution + 4,
            target_tol: self.target_tol,
        }
    }
}

/// A degree-two DSS force sampled on the lattice together with its
/// declared far-field decay exponent (`|f| <~ (|y| + sqrt s)^{-decay}`).
#[derive(Debug, Clone)]
pub struct Force {
    pub field: LatticeField<6>,
    pub decay_exponent: f64,
}

impl Force {
    pub fn new(field: LatticeField<6>, decay_exponent: f64) -> Self {
        assert_eq!(field.degree, 2, "forces have homogeneity degree 2");
        Self { field, decay_exponent }
    }

    pub fn is_zero(&self) -> bool {
        self.field.samples.iter().all(|v| v.iter().all(|c| *c == 0.0))
    }
}

/// Output of [`StokesOperator::apply`].
#[derive(Debug, Clone)]
pub struct PhiResult {
    pub field: LatticeField<3>,
    /// Contribution of the last window `[t/lambda^2, t]` alone.
    pub window: LatticeField<3>,
    /// Estimated relative quadrature error (refined recomputation at probes).
    pub error_estimate: f64,
    pub warnings: Vec<String>,
}

/// Time moments of the kernel profiles against the cubic time basis,
/// scaled to be O(1) at both ends of the `q = |z|/sqrt(t)` range.
#[derive(Debug, Clone)]
struct MomentTables {
    n_slots: usize,
    ln_q0: f64,
    d_ln_q: f64,
    n_q: usize,
    /// `[slot * n_q + iq]`, components `(da + c, dc, c)`.
    data: Vec<[f64; 3]>,
}

const TABLE_Q_MIN: f64 = 1e-3;
const TABLE_Q_MAX: f64 = 1e3;
const TABLE_PER_DECADE: usize = 60;

fn moment_scale(q: f64) -> [f64; 3] {
    let q2 = q * q;
    let g = q2 * q * (1.0 + q2);
    [g, g * q2, g]
}

impl MomentTables {
    fn new(lambda: f64, n_time: usize, gl_order: usize) -> Self {
        let n_slots = n_time + 3;
        let ln_q0 = TABLE_Q_MIN.ln();
        let decades = (TABLE_Q_MAX / TABLE_Q_MIN).log10();
        let n_q = (decades * TABLE_PER_DECADE as f64).round() as usize + 1;
        let d_ln_q = (TABLE_Q_MAX / TABLE_Q_MIN).ln() / (n_q - 1) as f64;
        let gl = GaussLegendre::new(gl_order);
        let dt = 2.0 * lambda.ln() / n_time as f64;
        let rows: Vec<Vec<[f64; 3]>> = (0..n_q)
            .into_par_iter()
            .map(|iq| {
                let q = (ln_q0 + iq as f64 * d_ln_q).exp();
                let mut acc = vec![[0.0; 3]; n_slots];
                let kernel = |tau: f64| -> [f64; 3] {
                    let p = profile(q / tau.sqrt());
                    let a = tau.powf(-2.5);
                    [a * (p.da + p.c), a / tau * p.dc, a * p.c]
                };
                for i in 0..n_time {
                    let ta = -(-(i as f64) * dt).exp_m1();
                    let tb = -(-((i + 1) as f64) * dt).exp_m1();
                    let v_hi = tb.ln();
                    let v_lo = if i == 0 { (1e-10 * q.min(1.0).powi(2) * tb).ln() } else { ta.ln() };
                    let n_sub = ((v_hi - v_lo) / 0.5).ceil().max(1.0) as usize;
                    let h = (v_hi - v_lo) / n_sub as f64;
                    for sub in 0..n_sub {
                        let a = v_lo + sub as f64 * h;
                        for (v, wv) in gl.on(a, a + h) {
                            let tau = v.exp();
                            let phi = ((-tau).ln_1p() / dt + (i + 1) as f64).clamp(0.0, 1.0);
                            let wb = cubic_weights(phi);
                            let k = kernel(tau);
                            for (b, w) in wb.iter().enumerate() {
                                let slot = n_time - 1 - i + b;
                                for c in 0..3 {
                                    acc[slot][c] += w * wv * tau * k[c];
                                }
                            }
                        }
                    }
                    if i == 0 {
                        // below the last node the kernel sits at its static limit
                        let tau = v_lo.exp();
                        let k = kernel(tau);
                        for c in 0..3 {
                            acc[n_time + 1][c] += tau * k[c];
                        }
                    }
                }
                let g = moment_scale(q);
                acc.iter().map(|v| [v[0] * g[0], v[1] * g[1], v[2] * g[2]]).collect()
            })
            .collect();
        let mut data = vec![[0.0; 3]; n_slots * n_q];
        for (iq, row) in rows.iter().enumerate() {
            for (slot, v) in row.iter().enumerate() {
                data[slot * n_q + iq] = *v;
            }
        }
        Self { n_slots, ln_q0, d_ln_q, n_q, data }
    }

    /// Unscaled moments at unit time for every slot.
    fn eval(&self, q: f64, out: &mut [[f64; 3]]) {
        let u = ((q.ln() - self.ln_q0) / self.d_ln_q).clamp(0.0, (self.n_q - 1) as f64);
        let i0 = (u.floor() as usize).clamp(1, self.n_q - 3);
        let w = cubic_weights(u - i0 as f64);
        let g = moment_scale(q.clamp(TABLE_Q_MIN, TABLE_Q_MAX));
        // outside the table the scaled moments are continued as constants
        let g_true = moment_scale(q);
        let fix = [g[0] / g_true[0], g[1] / g_true[1], g[2] / g_true[2]];
        for (slot, o) in out.iter_mut().enumerate().take(self.n_slots) {
            let row = &self.data[slot * self.n_q + i0 - 1..][..4];
            let mut v = [0.0; 3];
            for (wk, r) in w.iter().zip(row) {
                for c in 0..3 {
                    v[c] += wk * r[c];
                }
            }
            for c in 0..3 {
                *o.get_mut(c).unwrap() = v[c] / g[c] * fix[c];
            }
        }
    }
}

#[inline]
fn contract(n: &[f64; 3], z: &Vec3, f: &Sym3) -> Vec3 {
    let fz = sym_mul_vec(f, z);
    let zfz = dot(z, &fz);
    let s2 = n[1] * zfz + n[2] * (f[0] + f[1] + f[2]);
    [n[0] * fz[0] + s2 * z[0], n[0] * fz[1] + s2 * z[1], n[0] * fz[2] + s2 * z[2]]
}

/// `C^infinity` cutoff equal to 1 on `[0, a]` and 0 beyond `2a`.
fn origin_cutoff(r: f64, a: f64) -> f64 {
    let u = (r - a) / a;
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let e0 = (-1.0 / u).exp();
        let e1 = (-1.0 / (1.0 - u)).exp();
        e1 / (e0 + e1)
    }
}

/// Sphere rule in the target frame: nodes `(cos theta, phi)` with weights.
#[derive(Debug, Clone)]
struct FrameRule {
    nodes: Vec<(f64, f64, f64)>,
}

impl FrameRule {
    fn product(breaks: &[f64], per_panel: &[usize], n_phi: usize) -> Self {
        let mut nodes = Vec::new();
        for (k, n) in per_panel.iter().enumerate() {
            let gl = GaussLegendre::new(*n);
            for (mu, w) in gl.on(breaks[k], breaks[k + 1]) {
                for m in 0..n_phi {
                    let phi = 2.0 * PI * (m as f64 + 0.5) / n_phi as f64;
                    nodes.push((mu, phi, w * 2.0 * PI / n_phi as f64));
                }
            }
        }
        Self { nodes }
    }

    /// Rule on the sphere of radius `rho` around a target at distance `rx`
    /// from the origin, with colatitude panels aligned to where the cut-off
    /// `|y| in [a, 2a]` around the origin crosses the sphere.
    fn around_hole(n: usize, rho: f64, rx: f64, a: f64) -> Self {
        let mu_at = |c: f64| ((rx * rx + rho * rho - c * c) / (2.0 * rx * rho)).clamp(-1.0, 1.0);
        let half = (n / 2).max(2);
        // colatitude breakpoints, descending in mu; beyond the cut-off the
        // force varies on the scale of |y|, so the panels double in angle
        let mut mus = vec![(1.0, 0), (mu_at(a), half), (mu_at(1.5 * a), n), (mu_at(2.0 * a), n)];
        let mut theta = mu_at(2.0 * a).acos().max(1e-3);
        while 2.0 * theta < PI {
            theta *= 2.0;
            mus.push((theta.cos(), half));
        }
        mus.push((-1.0, n));
        mus.dedup_by(|b, a| (a.0 - b.0).abs() < 1e-14);
        let breaks: Vec<f64> = mus.iter().rev().map(|m| m.0).collect();
        let counts: Vec<usize> = mus.iter().rev().take(mus.len() - 1).map(|m| m.1).collect();
        Self::product(&breaks, &counts, 2 * n)
    }
}

/// Orthonormal pair completing the polar `axis`, with the first vector in
/// the plane spanned by `axis` and the z axis. Sphere rules built on it are
/// mirror-symmetric about the meridian plane of the target, so the
/// quadrature maps fields without swirl to fields without swirl.
fn meridian_frame(axis: &Vec3) -> (Vec3, Vec3) {
    let e = [-axis[2] * axis[0], -axis[2] * axis[1], 1.0 - axis[2] * axis[2]];
    let n = norm(&e);
    if n < 1e-12 {
        return orthonormal_frame(axis);
    }
    let e1 = [e[0] / n, e[1] / n, e[2] / n];
    let e2 = [
        axis[1] * e1[2] - axis[2] * e1[1],
        axis[2] * e1[0] - axis[0] * e1[2],
        axis[0] * e1[1] - axis[1] * e1[0],
    ];
    (e1, e2)
}

/// Breakpoints uniform in `ln r` with spacing `step`, merged with `extra`.
fn log_breaks(lo: f64, hi: f64, step: f64, extra: &[f64]) -> Vec<f64> {
    let mut out = vec![lo];
    let mut lr = lo.ln();
    while lr + step < hi.ln() {
        lr += step;
        out.push(lr.exp());
    }
    out.push(hi);
    out.extend(extra.iter().copied().filter(|e| *e > lo && *e < hi));
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    out
}

/// Reusable Stokes-potential evaluator for one lattice and quadrature spec.
#[derive(Debug, Clone)]
pub struct StokesOperator {
    grid: Arc<StripGrid>,
    spec: QuadratureSpec,
    tables: Arc<MomentTables>,
    uniform: FrameRule,
    coarse: FrameRule,
    origin_rule: AngularRule,
    gl_radial: GaussLegendre,
    gl_memory: GaussLegendre,
}

/// Targets closer to the origin than this many `sqrt t` are integrated
/// without the origin patch.
const ORIGIN_SPLIT: f64 = 2.0;
/// Far-field truncation radius in units of `|x| + sqrt t`.
const FAR_RADIUS: f64 = 40.0;
/// Gaussian support half-width in units of the standard scale.
const GAUSS_WIDTH: f64 = 14.0;

impl StokesOperator {
    pub fn new(grid: Arc<StripGrid>, spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.angle_resolution;
        Ok(Self {
            tables: Arc::new(MomentTables::new(grid.lambda, grid.n_time, spec.time_resolution)),
            uniform: FrameRule::product(&[-1.0, 1.0], &[n], 2 * n),
            coarse: FrameRule::product(&[-1.0, 1.0], &[4], 8),
            origin_rule: AngularRule::new(grid.angles.n_theta + 4, 2 * (grid.angles.n_theta + 4)),
            gl_radial: GaussLegendre::new(spec.radial_order),
            gl_memory: GaussLegendre::new(4),
            grid,
            spec,
        })
    }

    pub fn grid(&self) -> &Arc<StripGrid> {
        &self.grid
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// `Phi f` at every lattice node.
    pub fn apply(&self, force: &Force) -> Result<PhiResult> {
        if !Arc::ptr_eq(&force.field.grid, &self.grid) && force.field.grid.spec() != self.grid.spec() {
            return Err(Error::Argument("force lives on a different lattice".into()));
        }
        let g = self.grid.clone();
        if force.is_zero() {
            return Ok(PhiResult {
                field: LatticeField::zeros(g.clone(), 1),
                window: LatticeField::zeros(g, 1),
                error_estimate: 0.0,
                warnings: Vec::new(),
            });
        }
        self.check_decay(force)?;
        let interp = force.field.interpolator(force.decay_exponent);
        let clock = std::time::Instant::now();
        let window: Vec<Vec3> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let (i, a, j) = g.unindex(idx);
                let (x, _) = g.node(i, a, j);
                self.window_integral(&interp, &x, j)
            })
            .collect();
        let w_field = LatticeField { grid: g.clone(), degree: 1, samples: window };
        log::debug!("window stage {:?}", clock.elapsed());
        let memory = self.memory(&w_field);
        log::debug!("memory stage {:?}", clock.elapsed());
        let samples: Vec<Vec3> = w_field
            .samples
            .iter()
            .zip(&memory)
            .map(|(w, m)| [w[0] + m[0], w[1] + m[1], w[2] + m[2]])
            .collect();
        let field = LatticeField { grid: g, degree: 1, samples };
        let (error_estimate, mut warnings) = self.estimate_error(&interp, &w_field, &field);
        if error_estimate > self.spec.target_tol {
            warnings.push(format!(
                "quadrature error estimate {error_estimate:.3e} exceeds target {:.3e}",
                self.spec.target_tol
            ));
        }
        Ok(PhiResult { field, window: w_field, error_estimate, warnings })
    }

    fn check_decay(&self, force: &Force) -> Result<()> {
        for j in 0..self.grid.n_time {
            if let Some(q) = raw_tail_exponent(&force.field, j) {
                if q < force.decay_exponent - 0.3 {
                    return Err(Error::Precondition(format!(
                        "force decays like |y|^-{q:.3} on slice {j}, slower than the declared class {}",
                        force.decay_exponent
                    )));
                }
            }
        }
        Ok(())
    }

    /// Integral over the last window `[t/lambda^2, t]` at target `x`, time slice `j`.
    fn window_integral(&self, interp: &Interpolator<6>, x: &Vec3, j: usize) -> Vec3 {
        window_integral_with(self, &self.spec, interp, x, j)
    }

    fn estimate_error(
        &self,
        interp: &Interpolator<6>,
        w_field: &LatticeField<3>,
        total: &LatticeField<3>,
    ) -> (f64, Vec<String>) {
        let g = &self.grid;
        let fine = self.spec.refined();
        let scale = total.samples.iter().map(norm).fold(0.0, f64::max);
        if scale == 0.0 {
            return (0.0, Vec::new());
        }
        let shells = [0, g.n_rho / 3, (2 * g.n_rho) / 3, g.n_rho - 1];
        let probes: Vec<(usize, usize, usize)> = shells
            .iter()
            .enumerate()
            .map(|(k, &i)| (i, (k * 7 + 3) % g.n_ang(), k % g.n_time))
            .collect();
        let diffs: Vec<f64> = probes
            .par_iter()
            .map(|&(i, a, j)| {
                let (x, _) = g.node(i, a, j);
                let refined = window_integral_with(self, &fine, interp, &x, j);
                let coarse = w_field.samples[g.index(i, a, j)];
                norm(&[refined[0] - coarse[0], refined[1] - coarse[1], refined[2] - coarse[2]])
            })
            .collect();
        (diffs.iter().fold(0.0f64, |m, d| m.max(*d)) / scale, Vec::new())
    }

    /// Heat-semigroup memory of the past windows at every node.
    fn memory(&self, w: &LatticeField<3>) -> Vec<Vec3> {
        let g = &*self.grid;
        let lmax = g.angles.n_theta - 1;
        let mmax = (g.angles.n_phi / 2).saturating_sub(1);
        let modes = mode_list(lmax, mmax);
        let y: Vec<Vec<f64>> = g
            .angles
            .dirs
            .iter()
            .map(|d| eval_modes(&modes, lmax, d[2], d[1].atan2(d[0])))
            .collect();
        let nm = modes.len();
        // coefficients per (time, shell, mode, component)
        let mut coef = vec![[0.0; 3]; g.n_time * g.n_rho * nm];
        for j in 0..g.n_time {
            for i in 0..g.n_rho {
                for a in 0..g.n_ang() {
                    let v = w.get(i, a, j);
                    let wa = g.angles.weights[a];
                    for (m, ym) in y[a].iter().enumerate() {
                        let c = &mut coef[(j * g.n_rho + i) * nm + m];
                        for k in 0..3 {
                            c[k] += wa * ym * v[k];
                        }
                    }
                }
            }
        }
        let tails: Vec<f64> = (0..g.n_time)
            .map(|j| raw_tail_exponent(w, j).map_or(2.0, |q| q.clamp(2.0, 5.0)))
            .collect();
        let pairs: Vec<(usize, usize)> = (0..g.n_time).flat_map(|j| (0..g.n_rho).map(move |i| (i, j))).collect();
        let radial: Vec<Vec<[f64; 3]>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let slice = &coef[j * g.n_rho * nm..(j + 1) * g.n_rho * nm];
                self.memory_shell(g.radius(i as isize), g.time(j as isize), slice, &modes, tails[j])
            })
            .collect();
        let mut out = vec![[0.0; 3]; g.len()];
        for (&(i, j), rad) in pairs.iter().zip(&radial) {
            for a in 0..g.n_ang() {
                let mut acc = [0.0; 3];
                for (m, ym) in y[a].iter().enumerate() {
                    for k in 0..3 {
                        acc[k] += ym * rad[m][k];
                    }
                }
                out[g.index(i, a, j)] = acc;
            }
        }
        out
    }

    /// Mode-wise memory integrals for one shell radius `big_r` at time `t`.
    fn memory_shell(
        &self,
        big_r: f64,
        t: f64,
        coef: &[[f64; 3]],
        modes: &[(usize, i64)],
        tail: f64,
    ) -> Vec<[f64; 3]> {
        let g = &*self.grid;
        let nm = modes.len();
        let lmax = modes.iter().map(|m| m.0).max().unwrap_or(0);
        let n = g.n_rho as isize;
        // extended shell coefficients, consistent with the lattice interpolator
        let shell_coef = |ii: isize, m: usize| -> [f64; 3] {
            if ii >= n {
                let ratio = bracket_r(g.radius(n - 1)) / bracket_r(g.radius(ii));
                let f = ratio.powf(tail);
                let c = coef[(n as usize - 1) * nm + m];
                [f * c[0], f * c[1], f * c[2]]
            } else if ii < 0 {
                let q = g.radius(ii) / g.radius(0);
                let c = coef[m];
                // only the monopole survives at the origin
                if modes[m].0 == 0 {
                    c
                } else {
                    [q * c[0], q * c[1], q * c[2]]
                }
            } else {
                coef[ii as usize * nm + m]
            }
        };
        let mut total = vec![[0.0; 3]; nm];
        let mut bes = vec![0.0; lmax + 1];
        let lambda = g.lambda;
        let mut k = 1usize;
        let mut peak = 0.0f64;
        loop {
            let lk = lambda.powi(k as i32);
            let rk = lk * big_r;
            let tk = t * (lk * lk - 1.0);
            let st = tk.sqrt();
            let lo = (rk - GAUSS_WIDTH * st).max(0.0);
            let hi = rk + GAUSS_WIDTH * st;
            let amp = 4.0 * PI * (4.0 * PI * tk).powf(-1.5) * lk;
            let mut term = vec![[0.0; 3]; nm];
            // panels in the shell coordinate u, subdivided to resolve the Gaussian
            let u_of = |r: f64| ((r.ln() - g.rho_min) / g.delta_rho()).max(-8.0);
            let u_lo = if lo > 0.0 { u_of(lo) } else { -8.0 };
            let u_hi = u_of(hi);
            let mut ua = u_lo.floor();
            if lo == 0.0 {
                // [0, r(-8)]: constant extension, one panel
                let r_end = g.radius(-8);
                let vals: Vec<[f64; 3]> = (0..nm).map(|m| shell_coef(-8, m)).collect();
                self.accumulate_memory(0.0, r_end, rk, tk, amp, &mut bes, |_| vals.clone(), &mut term, modes);
            }
            while ua < u_hi {
                let ub = ua + 1.0;
                let a = ua.max(u_lo);
                let b = ub.min(u_hi);
                let ra = (g.rho_min + a * g.delta_rho()).exp().max(lo);
                let rb = (g.rho_min + b * g.delta_rho()).exp().min(hi);
                if rb > ra {
                    let i0 = ua as isize;
                    let stencil: Vec<Vec<[f64; 3]>> =
                        (0..4).map(|s| (0..nm).map(|m| shell_coef(i0 - 1 + s, m)).collect()).collect();
                    let value = |r: f64| -> Vec<[f64; 3]> {
                        let u = (r.ln() - g.rho_min) / g.delta_rho();
                        let wts = cubic_weights((u - ua).clamp(0.0, 1.0));
                        (0..nm)
                            .map(|m| {
                                let mut v = [0.0; 3];
                                for s in 0..4 {
                                    for c in 0..3 {
                                        v[c] += wts[s] * stencil[s][m][c];
                                    }
                                }
                                v
                            })
                            .collect()
                    };
                    let n_sub = ((rb - ra) / (0.5 * st)).ceil().max(1.0) as usize;
                    let h = (rb - ra) / n_sub as f64;
                    for sub in 0..n_sub {
                        let a = ra + sub as f64 * h;
                        self.accumulate_memory(a, a + h, rk, tk, amp, &mut bes, value, &mut term, modes);
                    }
                }
                ua = ub;
            }
            let size = term.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, c| m.max(c.abs()));
            for (tt, v) in total.iter_mut().zip(&term) {
                for c in 0..3 {
                    tt[c] += v[c];
                }
            }
            let running = total.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, c| m.max(c.abs()));
            peak = peak.max(running);
            if k >= self.spec.k_min_offset && size <= 1e-3 * self.spec.target_tol * peak.max(1e-300) {
                break;
            }
            if peak == 0.0 && k >= self.spec.k_min_offset {
                break;
            }
            if k >= 400 {
                log::warn!("memory series truncated at 400 windows");
                break;
            }
            k += 1;
        }
        total
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate_memory<F: Fn(f64) -> Vec<[f64; 3]>>(
        &self,
        a: f64,
        b: f64,
        rk: f64,
        tk: f64,
        amp: f64,
        bes: &mut [f64],
        value: F,
        term: &mut [[f64; 3]],
        modes: &[(usize, i64)],
    ) {
        let lmax = bes.len() - 1;
        for (r, wr) in self.gl_memory.on(a, b) {
            let gauss = (-(rk - r).powi(2) / (4.0 * tk)).exp();
            if gauss == 0.0 {
                continue;
            }
            scaled_bessel_i(lmax, rk * r / (2.0 * tk), bes);
            let v = value(r);
            let base = amp * gauss * r * r * wr;
            for (m, (l, _)) in modes.iter().enumerate() {
                let kk = base * bes[*l];
                for c in 0..3 {
                    term[m][c] += kk * v[m][c];
                }
            }
        }
    }
}

/// Window integral with an explicit spec (used for refined error probes).
fn window_integral_with(
    op: &StokesOperator,
    spec: &QuadratureSpec,
    interp: &Interpolator<6>,
    x: &Vec3,
    j: usize,
) -> Vec3 {
    let g = &*op.grid;
    let nt = g.n_time;
    let n_slots = nt + 3;
    let j_lo = j as isize - nt as isize - 1;
    let t = g.time(j as isize);
    let st = t.sqrt();
    let rx = norm(x);
    let (t15, t25) = (t.powf(-1.5), t.powf(-2.5));
    let refined = spec != &op.spec;
    let owned;
    let (tables, gl_r) = if refined {
        owned = (
            MomentTables::new(g.lambda, nt, spec.time_resolution),
            GaussLegendre::new(spec.radial_order),
        );
        (&owned.0, &owned.1)
    } else {
        (&*op.tables, &op.gl_radial)
    };
    let n_ang = spec.angle_resolution;
    let uniform = if refined { FrameRule::product(&[-1.0, 1.0], &[n_ang], 2 * n_ang) } else { op.uniform.clone() };

    let split = rx >= ORIGIN_SPLIT * st;
    let cut = 0.25 * rx;
    let mut fx = vec![[0.0; 6]; n_slots];
    interp.eval_slices(x, j_lo, &mut fx);
    let mut buf = vec![[0.0; 6]; n_slots];
    let mut mom = vec![[0.0; 3]; n_slots];
    let moments = |r: f64, mom: &mut [[f64; 3]]| {
        tables.eval(r / st, mom);
        for m in mom.iter_mut() {
            m[0] *= t15;
            m[1] *= t25;
            m[2] *= t15;
        }
    };

    // frame with the polar axis towards the origin
    let axis = if rx > 0.0 { [-x[0] / rx, -x[1] / rx, -x[2] / rx] } else { [0.0, 0.0, 1.0] };
    let (e1, e2) = meridian_frame(&axis);
    let mut acc = [0.0; 3];

    // target-centred part
    let rho_lo = 1e-4 * st;
    let rho_hi = FAR_RADIUS * (rx + st);
    let near = spec.near_radius_factor * st.min(rx.max(st / g.lambda));
    let step = 1.0 / spec.shell_resolution as f64;
    let hole: Vec<f64> = if split { (2..=6).map(|k| 0.25 * k as f64 * rx).collect() } else { Vec::new() };
    let breaks = log_breaks(rho_lo, rho_hi, step, &hole);
    for w in breaks.windows(2) {
        for (rho, wr) in gl_r.on(w[0], w[1]) {
            moments(rho, &mut mom);
            let local;
            let rule = if rho < near {
                &op.coarse
            } else if split && (rho - rx).abs() < 2.0 * cut {
                local = FrameRule::around_hole(n_ang, rho, rx, cut);
                &local
            } else {
                &uniform
            };
            for &(mu, phi, wa) in &rule.nodes {
                let s = (1.0 - mu * mu).max(0.0).sqrt();
                let (sp, cp) = phi.sin_cos();
                let d = [
                    mu * axis[0] + s * (cp * e1[0] + sp * e2[0]),
                    mu * axis[1] + s * (cp * e1[1] + sp * e2[1]),
                    mu * axis[2] + s * (cp * e1[2] + sp * e2[2]),
                ];
                let z = [rho * d[0], rho * d[1], rho * d[2]];
                let y = [x[0] - z[0], x[1] - z[1], x[2] - z[2]];
                interp.eval_slices(&y, j_lo, &mut buf);
                let keep = if split { 1.0 - origin_cutoff(norm(&y), cut) } else { 1.0 };
                let wt = wr * wa * rho * rho;
                for o in 0..n_slots {
                    let mut df = [0.0; 6];
                    for c in 0..6 {
                        df[c] = keep * buf[o][c] - fx[o][c];
                    }
                    let v = contract(&mom[o], &z, &df);
                    for c in 0..3 {
                        acc[c] += wt * v[c];
                    }
                }
            }
        }
    }

    // origin-centred patch carrying the cut-off part of the force
    if split {
        let r_hi = 2.0 * cut;
        let r_lo = 1e-3 * cut.min(g.radius(0));
        let rb = log_breaks(r_lo, r_hi, step, &[cut, 1.25 * cut, 1.5 * cut, 1.75 * cut]);
        // origin-centred directions with longitudes measured from the target's
        let rxy = x[0].hypot(x[1]);
        let (h1, h2) = if rxy > 1e-300 {
            ([x[0] / rxy, x[1] / rxy, 0.0], [-x[1] / rxy, x[0] / rxy, 0.0])
        } else {
            ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        };
        let dirs: Vec<Vec3> = op
            .origin_rule
            .dirs
            .iter()
            .map(|d| [d[0] * h1[0] + d[1] * h2[0], d[0] * h1[1] + d[1] * h2[1], d[2]])
            .collect();
        for w in rb.windows(2) {
            for (r, wr) in gl_r.on(w[0], w[1]) {
                let chi = origin_cutoff(r, cut);
                if chi == 0.0 {
                    continue;
                }
                for (d, wa) in dirs.iter().zip(&op.origin_rule.weights) {
                    let y = [r * d[0], r * d[1], r * d[2]];
                    let z = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
                    interp.eval_slices(&y, j_lo, &mut buf);
                    moments(norm(&z), &mut mom);
                    let wt = wr * wa * r * r * chi;
                    for o in 0..n_slots {
                        let v = contract(&mom[o], &z, &buf[o]);
                        for c in 0..3 {
                            acc[c] += wt * v[c];
                        }
                    }
                }
            }
        }
    }
    acc
}
