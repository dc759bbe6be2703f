//! Test-only oracles, independent of the closed-form kernel code paths.
#![allow(dead_code)]

use dss_core::quadrature::GaussLegendre;
use std::f64::consts::PI;

/// Oseen tensor from its definition
/// `S_ij = Gamma delta_ij + (1/4pi) d_i d_j int Gamma(y,t) / |x - y| dy`,
/// with the derivatives moved onto the Gaussian and the remaining weakly
/// singular integral done in spherical coordinates centred at `x`, polar
/// axis pointing at the origin. No error functions are involved.
pub fn oseen_by_quadrature(x: [f64; 3], t: f64) -> [[f64; 3]; 3] {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let e: [f64; 3] = if r > 0.0 { [-x[0] / r, -x[1] / r, -x[2] / r] } else { [0.0, 0.0, 1.0] };
    let helper = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let mut e1 = cross(e, helper);
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
    let e2 = cross(e, e1);

    let sq = t.sqrt();
    let gl = GaussLegendre::new(24);
    // Radial breakpoints: the Gaussian lives in |rho - r| < 12 sqrt t.
    let rho_hi = r + 13.0 * sq;
    let mut rho_breaks = vec![0.0];
    let lo_g = (r - 13.0 * sq).max(0.0);
    if lo_g > 0.0 {
        rho_breaks.push(lo_g);
    }
    let n_panels = 26;
    for k in 1..=n_panels {
        rho_breaks.push(lo_g + (rho_hi - lo_g) * k as f64 / n_panels as f64);
    }
    // Polar breakpoints graded towards the axis where the Gaussian sits.
    let mut th_breaks = vec![0.0];
    let mut w = if r > 0.0 { (0.5 * sq / r).min(PI / 4.0) } else { PI / 4.0 };
    while w < PI {
        th_breaks.push(w);
        w *= 1.6;
    }
    th_breaks.push(PI);
    let n_phi = 8;

    let gnorm = (4.0 * PI * t).powf(-1.5);
    let mut acc = [[0.0; 3]; 3];
    for pr in rho_breaks.windows(2) {
        for (rho, wr) in gl.on(pr[0], pr[1]) {
            for pt in th_breaks.windows(2) {
                for (th, wt) in gl.on(pt[0], pt[1]) {
                    let (st, ct) = th.sin_cos();
                    for m in 0..n_phi {
                        let ph = 2.0 * PI * m as f64 / n_phi as f64;
                        let (sp, cp) = ph.sin_cos();
                        let mut y = [0.0; 3];
                        for d in 0..3 {
                            let om = ct * e[d] + st * (cp * e1[d] + sp * e2[d]);
                            y[d] = x[d] + rho * om;
                        }
                        let y2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
                        let g = gnorm * (-y2 / (4.0 * t)).exp();
                        let wgt = wr * wt * st * (2.0 * PI / n_phi as f64) * rho * g;
                        for i in 0..3 {
                            for j in 0..3 {
                                let d = if i == j { 1.0 / (2.0 * t) } else { 0.0 };
                                acc[i][j] += wgt * (y[i] * y[j] / (4.0 * t * t) - d);
                            }
                        }
                    }
                }
            }
        }
    }
    let g0 = gnorm * (-r * r / (4.0 * t)).exp();
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = acc[i][j] / (4.0 * PI) + if i == j { g0 } else { 0.0 };
        }
    }
    s
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn frob(m: &[[f64; 3]; 3]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            d = d.max((a[i][j] - b[i][j]).abs());
        }
    }
    d
}

/// Uniform random point with `|x|` log-uniform in `[r_lo, r_hi]`.
pub fn random_point<R: rand::Rng>(rng: &mut R, r_lo: f64, r_hi: f64) -> [f64; 3] {
    let r = r_lo * (r_hi / r_lo).powf(rng.gen::<f64>());
    let z: f64 = rng.gen_range(-1.0..1.0);
    let ph: f64 = rng.gen_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    [r * s * ph.cos(), r * s * ph.sin(), r * z]
}
