//! Real orthonormal spherical harmonics, used to resample lattice data from
//! the Gauss-Legendre sphere grid onto a fine equiangular grid.

use std::f64::consts::PI;

use crate::grid::AngularRule;

/// `(l, m)` index list: `m > 0` is the cosine harmonic, `m < 0` the sine one.
pub(crate) fn mode_list(lmax: usize, mmax: usize) -> Vec<(usize, i64)> {
    let mut out = Vec::new();
    for l in 0..=lmax {
        out.push((l, 0));
        for m in 1..=l.min(mmax) {
            out.push((l, m as i64));
            out.push((l, -(m as i64)));
        }
    }
    out
}

/// Normalised associated Legendre values `Pbar[l][m]` at `mu = cos(theta)`.
fn legendre_table(lmax: usize, mu: f64) -> Vec<Vec<f64>> {
    let s = (1.0 - mu * mu).max(0.0).sqrt();
    let mut p = vec![vec![0.0; lmax + 1]; lmax + 1];
    p[0][0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=lmax {
        p[m][m] = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..lmax {
        p[m + 1][m] = ((2 * m + 3) as f64).sqrt() * mu * p[m][m];
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (mu * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

/// Values of every mode of `modes` at direction `(mu, phi)`.
pub(crate) fn eval_modes(modes: &[(usize, i64)], lmax: usize, mu: f64, phi: f64) -> Vec<f64> {
    let p = legendre_table(lmax, mu);
    modes
        .iter()
        .map(|&(l, m)| {
            if m == 0 {
                p[l][0]
            } else if m > 0 {
                std::f64::consts::SQRT_2 * p[l][m as usize] * (m as f64 * phi).cos()
            } else {
                std::f64::consts::SQRT_2 * p[l][(-m) as usize] * ((-m) as f64 * phi).sin()
            }
        })
        .collect()
}

/// Every real harmonic of degree `<= lmax` (in [`mode_list`] order) at the
/// unit direction `dir`.
pub(crate) fn sh_values(lmax: usize, dir: &[f64; 3]) -> Vec<f64> {
    let mu = dir[2].clamp(-1.0, 1.0);
    let phi = dir[1].atan2(dir[0]);
    eval_modes(&mode_list(lmax, lmax), lmax, mu, phi)
}

/// Linear map from node values on an [`AngularRule`] to values on a fine
/// equiangular grid with `rows` colatitudes `k pi / (rows - 1)` (poles
/// included) and `cols` longitudes `2 pi c / cols`, through the band-limited
/// spherical-harmonic projection.
#[derive(Debug, Clone)]
pub struct Resampler {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `(rows * cols) x n_nodes`.
    matrix: Vec<f64>,
    n_nodes: usize,
}

impl Resampler {
    pub fn new(rule: &AngularRule, upsample: usize) -> Self {
        let lmax = rule.n_theta - 1;
        let mmax = (rule.n_phi / 2).saturating_sub(1);
        let modes = mode_list(lmax, mmax);
        let n_nodes = rule.len();
        // analysis[q][a] = w_a Y_q(node a)
        let mut analysis = vec![0.0; modes.len() * n_nodes];
        for (a, (d, w)) in rule.dirs.iter().zip(&rule.weights).enumerate() {
            let phi = d[1].atan2(d[0]);
            let y = eval_modes(&modes, lmax, d[2], phi);
            for (q, yq) in y.iter().enumerate() {
                analysis[q * n_nodes + a] = w * yq;
            }
        }
        let rows = upsample * rule.n_theta + 1;
        let cols = upsample * rule.n_phi;
        let mut matrix = vec![0.0; rows * cols * n_nodes];
        for k in 0..rows {
            let theta = PI * k as f64 / (rows - 1) as f64;
            for c in 0..cols {
                let phi = 2.0 * PI * c as f64 / cols as f64;
                let y = eval_modes(&modes, lmax, theta.cos(), phi);
                let row = &mut matrix[(k * cols + c) * n_nodes..(k * cols + c + 1) * n_nodes];
                for (q, yq) in y.iter().enumerate() {
                    let an = &analysis[q * n_nodes..(q + 1) * n_nodes];
                    for (r, a) in row.iter_mut().zip(an) {
                        *r += yq * a;
                    }
                }
            }
        }
        Self {
            rows,
            cols,
            matrix,
            n_nodes,
        }
    }

    pub fn fine_len(&self) -> usize {
        self.rows * self.cols
    }

    /// Resample `N`-component node values onto the fine grid.
    pub fn apply<const N: usize>(&self, nodes: &[[f64; N]], out: &mut [[f64; N]]) {
        debug_assert_eq!(nodes.len(), self.n_nodes);
        for (p, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[p * self.n_nodes..(p + 1) * self.n_nodes];
            let mut acc = [0.0; N];
            for (w, v) in row.iter().zip(nodes) {
                for c in 0..N {
                    acc[c] += w * v[c];
                }
            }
            *o = acc;
        }
    }

    /// Bilinear stencil `(fine index, weight)` for a unit direction.
    #[inline]
    pub fn stencil(&self, dir: &[f64; 3]) -> [(usize, f64); 4] {
        let theta = dir[2].clamp(-1.0, 1.0).acos();
        let mut phi = dir[1].atan2(dir[0]);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        let ft = theta / PI * (self.rows - 1) as f64;
        let k0 = (ft.floor() as usize).min(self.rows - 2);
        let wt = ft - k0 as f64;
        let fp = phi / (2.0 * PI) * self.cols as f64;
        let c0 = (fp.floor() as usize) % self.cols;
        let wp = fp - fp.floor();
        let c1 = (c0 + 1) % self.cols;
        [
            (k0 * self.cols + c0, (1.0 - wt) * (1.0 - wp)),
            (k0 * self.cols + c1, (1.0 - wt) * wp),
            ((k0 + 1) * self.cols + c0, wt * (1.0 - wp)),
            ((k0 + 1) * self.cols + c1, wt * wp),
        ]
    }
}
