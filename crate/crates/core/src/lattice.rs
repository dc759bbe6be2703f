//! Fields sampled on the strip lattice and their DSS-aware interpolation.
//!
//! A field `F` of homogeneity degree `d` obeys
//! `F(x, t) = lambda^{k d} F(lambda^k x, lambda^{2k} t)` (`d = 1` for
//! velocities, `d = 2` for the quadratic force). Values outside the strip
//! are reduced to it by the unique epoch `k`; time stencils that leave the
//! strip wrap around by the same identity, which on the lattice is an exact
//! shell shift.

use std::sync::Arc;

use rayon::prelude::*;

use crate::grid::{epoch_of, StripGrid};
use crate::sh::Resampler;
use crate::vec3::{norm, Vec3};

/// `<z> = (|z|^2 + 2)^{1/2}`.
#[inline]
pub fn bracket(z: &[f64]) -> f64 {
    (z.iter().map(|v| v * v).sum::<f64>() + 2.0).sqrt()
}

#[inline]
pub(crate) fn bracket_r(r: f64) -> f64 {
    (r * r + 2.0).sqrt()
}

/// Samples of an `N`-component field at every lattice node.
#[derive(Debug, Clone)]
pub struct LatticeField<const N: usize> {
    pub grid: Arc<StripGrid>,
    pub degree: i32,
    pub samples: Vec<[f64; N]>,
}

impl<const N: usize> LatticeField<N> {
    pub fn zeros(grid: Arc<StripGrid>, degree: i32) -> Self {
        let n = grid.len();
        Self {
            grid,
            degree,
            samples: vec![[0.0; N]; n],
        }
    }

    /// Fills every node from `f(x, t)`; evaluated in parallel, stored in
    /// lattice order.
    pub fn from_fn<F>(grid: Arc<StripGrid>, degree: i32, f: F) -> Self
    where
        F: Fn(&Vec3, f64) -> [f64; N] + Sync,
    {
        let samples = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, a, j) = grid.unindex(idx);
                let (x, t) = grid.node(i, a, j);
                f(&x, t)
            })
            .collect();
        Self {
            grid,
            degree,
            samples,
        }
    }

    pub fn get(&self, shell: usize, angle: usize, time: usize) -> [f64; N] {
        self.samples[self.grid.index(shell, angle, time)]
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(x, y)| {
                let mut o = [0.0; N];
                for c in 0..N {
                    o[c] = a * x[c] + b * y[c];
                }
                o
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            degree: self.degree,
            samples,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|x| {
                let mut o = *x;
                o.iter_mut().for_each(|v| *v *= a);
                o
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            degree: self.degree,
            samples,
        }
    }

    /// Interpolator with a far-field power law no slower than
    /// `<x>^{-min_tail_exponent}`.
    pub fn interpolator(&self, min_tail_exponent: f64) -> Interpolator<N> {
        Interpolator::new(self, min_tail_exponent)
    }
}

/// Decay exponent of the shell maxima between the outermost shell of time
/// slice `j` and the shell one scaling period further in (the adjacent shell
/// when the lattice is shorter than a period), or `None` when either maximum
/// vanishes. Comparing shells a period apart makes the estimate exact for
/// far fields that are log-periodic up to a power, as DSS fields are.
pub fn raw_tail_exponent<const N: usize>(field: &LatticeField<N>, j: usize) -> Option<f64> {
    let grid = &field.grid;
    let shell_max = |i: usize| -> f64 {
        (0..grid.n_ang())
            .map(|a| {
                let v = field.samples[grid.index(i, a, j)];
                v.iter().map(|c| c * c).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    };
    let n = grid.n_rho;
    let back = if n > grid.shells_per_period { grid.shells_per_period } else { 1 };
    let (m_out, m_in) = (shell_max(n - 1), shell_max(n - 1 - back));
    if m_out > 0.0 && m_in > 0.0 {
        let b_out = bracket_r(grid.radius(n as isize - 1));
        let b_in = bracket_r(grid.radius((n - 1 - back) as isize));
        Some((m_in / m_out).ln() / (b_out / b_in).ln())
    } else {
        None
    }
}

/// Four-point Lagrange weights at offsets `-1, 0, 1, 2` for `f` in `[0, 1)`.
#[inline]
pub(crate) fn cubic_weights(f: f64) -> [f64; 4] {
    [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ]
}

/// Evaluates a [`LatticeField`] anywhere in `R^3 x (0, inf)`: cubic in
/// `ln|x|` and `ln t`, spherical-harmonic resampling plus bilinear lookup in
/// angle, power-law tail beyond the outermost shell and constant extension
/// inside the innermost one.
#[derive(Debug, Clone)]
pub struct Interpolator<const N: usize> {
    grid: Arc<StripGrid>,
    degree: i32,
    resampler: Arc<Resampler>,
    /// Fine angular slices, ordered `(time, shell)`.
    fine: Vec<[f64; N]>,
    /// Far-field exponent per time slice.
    tail_exponent: Vec<f64>,
    /// Angular mean of the innermost shell per time slice, taken as the
    /// value at the origin.
    origin: Vec<[f64; N]>,
    samples: Vec<[f64; N]>,
    /// Tail factors `(<r_last>/<r_i>)^q` for virtual shells
    /// `i = n_rho - 1 + k`, `k < TABLE_SHELLS`, per time slice.
    tail_factor: Vec<Vec<f64>>,
    /// Blend ratios `r_i / r_0` for virtual shells `i = -k`, `k < TABLE_SHELLS`.
    inner_ratio: Vec<f64>,
}

/// Virtual shells with precomputed extension factors on each side.
const TABLE_SHELLS: usize = 256;

impl<const N: usize> Interpolator<N> {
    pub fn new(field: &LatticeField<N>, min_tail_exponent: f64) -> Self {
        let grid = field.grid.clone();
        let resampler = grid.resampler();
        let n_ang = grid.n_ang();
        let fl = resampler.fine_len();
        let n_slices = grid.n_rho * grid.n_time;
        let mut fine = vec![[0.0; N]; n_slices * fl];
        fine.par_chunks_mut(fl).enumerate().for_each(|(slice, out)| {
            let nodes = &field.samples[slice * n_ang..(slice + 1) * n_ang];
            resampler.apply(nodes, out);
        });
        let tail_exponent: Vec<f64> = (0..grid.n_time)
            .map(|j| {
                raw_tail_exponent(field, j)
                    .map_or(min_tail_exponent, |q| q.clamp(min_tail_exponent, min_tail_exponent + 3.0))
            })
            .collect();
        let origin = (0..grid.n_time)
            .map(|j| {
                let mut acc = [0.0; N];
                for a in 0..n_ang {
                    let v = field.samples[grid.index(0, a, j)];
                    let w = grid.angles.weights[a] / (4.0 * std::f64::consts::PI);
                    for c in 0..N {
                        acc[c] += w * v[c];
                    }
                }
                acc
            })
            .collect();
        let last = grid.n_rho as isize - 1;
        let tail_factor = tail_exponent
            .iter()
            .map(|q| {
                (0..TABLE_SHELLS as isize)
                    .map(|k| (bracket_r(grid.radius(last)) / bracket_r(grid.radius(last + k))).powf(*q))
                    .collect()
            })
            .collect();
        let inner_ratio = (0..TABLE_SHELLS as isize).map(|k| grid.radius(-k) / grid.radius(0)).collect();
        Self {
            grid,
            degree: field.degree,
            resampler,
            fine,
            tail_exponent,
            origin,
            samples: field.samples.clone(),
            tail_factor,
            inner_ratio,
        }
    }

    pub fn grid(&self) -> &Arc<StripGrid> {
        &self.grid
    }

    pub fn tail_exponent(&self, time: usize) -> f64 {
        self.tail_exponent[time]
    }

    /// DSS extension: `lambda^{k d} F(lambda^k x, lambda^{2k} t)` with the
    /// strip value interpolated.
    pub fn eval(&self, x: &Vec3, t: f64) -> [f64; N] {
        let k = epoch_of(self.grid.lambda, t);
        let lk = self.grid.lambda.powi(k);
        let y = [x[0] * lk, x[1] * lk, x[2] * lk];
        let s = t * lk * lk;
        let mut v = self.eval_strip(&y, s);
        let f = lk.powi(self.degree);
        v.iter_mut().for_each(|c| *c *= f);
        v
    }

    /// Interpolated value for `1 <= t < lambda^2`.
    pub fn eval_strip(&self, y: &Vec3, s: f64) -> [f64; N] {
        let g = &*self.grid;
        let r = norm(y);
        let dir = if r > 0.0 { [y[0] / r, y[1] / r, y[2] / r] } else { [0.0, 0.0, 1.0] };
        let u = if r > 0.0 { ((r.ln() - g.rho_min) / g.delta_rho()).max(-8.0) } else { -8.0 };
        let w = s.ln() / g.delta_log_t();
        if let Some(v) = self.node_hit(u, w, &dir) {
            return v;
        }
        let i0 = u.floor();
        let j0 = w.floor();
        let wu = cubic_weights(u - i0);
        let ww = cubic_weights(w - j0);
        let st = self.resampler.stencil(&dir);
        let mut acc = [0.0; N];
        for (a, wa) in wu.iter().enumerate() {
            for (b, wb) in ww.iter().enumerate() {
                let v = self.slice_value(i0 as isize - 1 + a as isize, j0 as isize - 1 + b as isize, &st);
                let wt = wa * wb;
                for c in 0..N {
                    acc[c] += wt * v[c];
                }
            }
        }
        acc
    }

    /// Spatial interpolation at consecutive extended time-slice indices
    /// `j_lo, j_lo + 1, ...` (one per entry of `out`); slice `j` lives at
    /// `t = lambda^{2 j / n_time}` and indices outside `0..n_time` are
    /// reached through the DSS identity.
    pub fn eval_slices(&self, y: &Vec3, j_lo: isize, out: &mut [[f64; N]]) {
        let g = &*self.grid;
        let r = norm(y);
        let dir = if r > 0.0 { [y[0] / r, y[1] / r, y[2] / r] } else { [0.0, 0.0, 1.0] };
        let u = if r > 0.0 { ((r.ln() - g.rho_min) / g.delta_rho()).max(-8.0) } else { -8.0 };
        let i0 = u.floor();
        let wu = cubic_weights(u - i0);
        let st = self.resampler.stencil(&dir);
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = [0.0; N];
            for (a, wa) in wu.iter().enumerate() {
                let v = self.slice_value(i0 as isize - 1 + a as isize, j_lo + k as isize, &st);
                for c in 0..N {
                    acc[c] += wa * v[c];
                }
            }
            *o = acc;
        }
    }

    /// Angular mean at the origin for time slice `j` in `0..n_time`.
    pub fn origin_value(&self, j: usize) -> [f64; N] {
        self.origin[j]
    }

    fn node_hit(&self, u: f64, w: f64, dir: &Vec3) -> Option<[f64; N]> {
        let g = &*self.grid;
        let (ur, wr) = (u.round(), w.round());
        if (u - ur).abs() > 1e-9 || (w - wr).abs() > 1e-9 {
            return None;
        }
        if ur < 0.0 || ur >= g.n_rho as f64 || wr < 0.0 || wr >= g.n_time as f64 {
            return None;
        }
        let it = g.angles.cos_theta.iter().position(|&m| (m - dir[2]).abs() < 1e-12)?;
        let mut phi = dir[1].atan2(dir[0]);
        if phi < 0.0 {
            phi += 2.0 * std::f64::consts::PI;
        }
        let np = g.angles.n_phi;
        let c = ((phi / (2.0 * std::f64::consts::PI) * np as f64 - 0.5).round() as usize) % np;
        if (g.angles.phi[c] - phi).abs() > 1e-9 {
            return None;
        }
        Some(self.samples[g.index(ur as usize, it * np + c, wr as usize)])
    }

    fn slice_value(&self, i: isize, j: isize, st: &[(usize, f64); 4]) -> [f64; N] {
        let g = &*self.grid;
        let nt = g.n_time as isize;
        let m = j.div_euclid(nt);
        let jj = j.rem_euclid(nt) as usize;
        let ii = i - m * g.shells_per_period as isize;
        let mut fac = if m == 0 { 1.0 } else { g.lambda.powi(-(m as i32) * self.degree) };
        // Inside the innermost shell: linear in |x| towards the origin value.
        let mut blend = None;
        let shell = if ii >= g.n_rho as isize {
            let last = g.n_rho as isize - 1;
            let k = (ii - last) as usize;
            fac *= match self.tail_factor[jj].get(k) {
                Some(f) => *f,
                None => (bracket_r(g.radius(last)) / bracket_r(g.radius(ii))).powf(self.tail_exponent[jj]),
            };
            last as usize
        } else if ii < 0 {
            let q = match self.inner_ratio.get((-ii) as usize) {
                Some(q) => *q,
                None => g.radius(ii) / g.radius(0),
            };
            blend = Some((q, self.origin[jj]));
            0
        } else {
            ii as usize
        };
        let base = (jj * g.n_rho + shell) * self.resampler.fine_len();
        let mut out = [0.0; N];
        for &(p, wgt) in st {
            let v = &self.fine[base + p];
            for c in 0..N {
                out[c] += wgt * v[c];
            }
        }
        if let Some((q, o)) = blend {
            for c in 0..N {
                out[c] = o[c] + q * (out[c] - o[c]);
            }
        }
        out.iter_mut().for_each(|c| *c *= fac);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid() -> Arc<StripGrid> {
        Arc::new(
            StripGrid::new(&GridSpec {
                lambda: 2.0,
                shells_per_period: 4,
                rho_min: -3.0,
                rho_max: 3.0,
                n_theta: 6,
                n_phi: 12,
                n_time: 4,
            })
            .unwrap(),
        )
    }

    /// Exactly self-similar velocity-like field: `u(x,t) = x / (|x|^2 + t)`.
    fn ss(x: &Vec3, t: f64) -> [f64; 3] {
        let d = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + t;
        [x[0] / d, x[1] / d, x[2] / d]
    }

    #[test]
    fn reproduces_nodes_exactly() {
        let g = grid();
        let f = LatticeField::<3>::from_fn(g.clone(), 1, ss);
        let it = f.interpolator(1.5);
        for idx in (0..g.len()).step_by(37) {
            let (i, a, j) = g.unindex(idx);
            let (x, t) = g.node(i, a, j);
            assert_eq!(it.eval(&x, t), f.samples[idx]);
        }
    }

    #[test]
    fn interpolates_smooth_ss_field() {
        let g = grid();
        let f = LatticeField::<3>::from_fn(g.clone(), 1, ss);
        let it = f.interpolator(1.0);
        for &(x, t) in &[
            ([0.3, -0.2, 0.5], 1.3),
            ([2.0, 1.0, -1.5], 3.1),
            ([0.01, 0.02, 0.0], 1.01),
            ([5.0, -3.0, 2.0], 0.2),
            ([0.7, 0.7, 0.1], 40.0),
        ] {
            let got = it.eval(&x, t);
            let want = ss(&x, t);
            let scale = norm(&want).max(1e-3);
            for c in 0..3 {
                assert!((got[c] - want[c]).abs() < 5e-3 * scale, "{x:?} {t}: {got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn dss_identity_of_extension() {
        let g = grid();
        let f = LatticeField::<3>::from_fn(g.clone(), 1, |x, t| {
            let d = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + t;
            [x[1] / d, x[2] * x[0] / d.powf(1.5), 1.0 / d.sqrt()]
        });
        let it = f.interpolator(1.0);
        let lam = g.lambda;
        for &(x, t) in &[([0.3, -0.2, 0.5], 1.3), ([2.0, 1.0, -1.5], 0.31), ([0.1, 0.4, 0.2], 7.0)] {
            let a = it.eval(&x, t);
            for j in [-2i32, -1, 1, 3] {
                let lj = lam.powi(j);
                let b = it.eval(&[x[0] * lj, x[1] * lj, x[2] * lj], t * lj * lj);
                for c in 0..3 {
                    assert!((b[c] * lj - a[c]).abs() <= 1e-12 * a[c].abs().max(1e-12), "j={j}");
                }
            }
        }
    }

    #[test]
    fn bracket_values() {
        assert!((bracket(&[0.0, 0.0, 0.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert!((bracket(&[1.0, 1.0, 0.0]) - 2.0).abs() < 1e-15);
    }
}
