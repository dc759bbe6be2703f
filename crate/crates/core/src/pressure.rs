//! Diagnostic pressure recovery `p = (-Delta)^{-1} d_i d_j (u_i u_j)` at a
//! fixed time.
//!
//! With `d_i d_j (1 / 4 pi |z|) = PV (3 z_i z_j - |z|^2 delta_ij) / (4 pi |z|^5)
//! - delta_ij delta(z) / 3`, the pressure is
//! `p(x) = -|u(x)|^2 / 3 + PV int K_ij(z) u_i u_j (x - z) dz`.
//! The principal value is taken on target-centred spheres, where the kernel
//! has zero mean, by subtracting `u_i u_j (x)`. The pressure is normalised
//! to vanish at infinity: the local term uses `|u(x)|^2 - <|u|^2>_R` with the
//! mean taken on the truncation sphere, which is negligible for decaying
//! velocities and makes constant velocities give zero pressure.

use crate::grid::AngularRule;
use crate::quadrature::GaussLegendre;
use crate::stokes::QuadratureSpec;
use crate::vec3::{norm, Vec3};
use crate::{Error, Result};

/// Outer truncation radius in units of `(|x|^2 + 2)^{1/2}`; the neglected
/// tail is `O(R^{-2})` for velocities decaying like `1/|x|`.
const OUTER_RADIUS: f64 = 1e4;
/// Inner cut-off in the same units; the subtracted integrand is `O(|z|^2)`.
const INNER_RADIUS: f64 = 1e-7;

/// `p(x)` for the velocity evaluator `u` at a fixed time.
pub fn pressure_recover<F>(u: F, x: &Vec3, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&Vec3) -> Vec3,
{
    spec.validate()?;
    let ux = u(x);
    if !ux.iter().all(|c| c.is_finite()) {
        return Err(Error::Domain(format!("velocity is not finite at the target {x:?}")));
    }
    let tx = tensor(&ux);
    let scale = (norm(x).powi(2) + 2.0).sqrt();
    let rule = AngularRule::new(2 * spec.angle_resolution, 4 * spec.angle_resolution);
    let gl = GaussLegendre::new(spec.radial_order);
    let (lo, hi) = ((INNER_RADIUS * scale).ln(), (OUTER_RADIUS * scale).ln());
    let n_panels = ((hi - lo) * spec.shell_resolution as f64 * 2.0).ceil() as usize;
    let h = (hi - lo) / n_panels as f64;
    let mut shifted = 0usize;
    let mut acc = 0.0;
    for k in 0..n_panels {
        let a = lo + k as f64 * h;
        for (lr, wl) in gl.on(a, a + h) {
            let r = lr.exp();
            let mut shell = 0.0;
            for (d, wa) in rule.dirs.iter().zip(&rule.weights) {
                let mut y = [x[0] - r * d[0], x[1] - r * d[1], x[2] - r * d[2]];
                let mut uy = u(&y);
                if !uy.iter().all(|c| c.is_finite()) {
                    // singular node of the evaluator: nudge it along the ray
                    y = [x[0] - 1.001 * r * d[0], x[1] - 1.001 * r * d[1], x[2] - 1.001 * r * d[2]];
                    uy = u(&y);
                    shifted += 1;
                    if !uy.iter().all(|c| c.is_finite()) {
                        return Err(Error::Domain(format!("velocity is not finite near {y:?}")));
                    }
                }
                let ty = tensor(&uy);
                // K(d) : (T(y) - T(x)) with K = (3 d d - I) / (4 pi r^3)
                let mut kt = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let kij = 3.0 * d[i] * d[j] - if i == j { 1.0 } else { 0.0 };
                        kt += kij * (ty[i][j] - tx[i][j]);
                    }
                }
                shell += wa * kt;
            }
            // r^2 dr / r^3 = d(ln r)
            acc += wl * shell / (4.0 * std::f64::consts::PI);
        }
    }
    let far = OUTER_RADIUS * scale;
    let mut at_infinity = 0.0;
    for (d, wa) in rule.dirs.iter().zip(&rule.weights) {
        let uy = u(&[x[0] + far * d[0], x[1] + far * d[1], x[2] + far * d[2]]);
        if uy.iter().all(|c| c.is_finite()) {
            at_infinity += wa * (uy[0] * uy[0] + uy[1] * uy[1] + uy[2] * uy[2]);
        }
    }
    at_infinity /= 4.0 * std::f64::consts::PI;
    if shifted > 0 {
        log::warn!("pressure quadrature: {shifted} nodes shifted off singular points of the velocity");
    }
    Ok(acc - (ux[0] * ux[0] + ux[1] * ux[1] + ux[2] * ux[2] - at_infinity) / 3.0)
}

fn tensor(u: &Vec3) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = u[i] * u[j];
        }
    }
    t
}
