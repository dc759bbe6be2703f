//! Heat kernel, Oseen tensor and its spatial gradient in closed form.
//!
//! With `Psi(., t)` the Newtonian potential of the heat kernel,
//! `Psi(r, t) = erf(r / (2 sqrt t)) / (4 pi r)`, the Oseen tensor is
//! `S_ij = Gamma delta_ij + d_i d_j Psi = A(r) delta_ij + C(r) x_i x_j`.
//! Using `Delta Psi = -Gamma` the radial coefficients reduce to
//! `A = Gamma + P`, `C = -(Gamma + 3 P) / r^2` with `P = Psi'(r) / r`.
//! Near the origin the closed form cancels catastrophically, so the even
//! Taylor series of `Psi` is used below a scaled radius of 2.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::OnceLock;

use crate::vec3::{dot, norm, sym_mul_vec, Sym3, Vec3};
use crate::{Error, Result};

/// Scaled radius `|x| / sqrt(t)` below which the series form is used.
const SERIES_RADIUS: f64 = 2.0;
const SERIES_TERMS: usize = 40;

static SIGN_FAULT: AtomicBool = AtomicBool::new(false);

/// Negative-control hook: when enabled, the Newtonian part of the Oseen
/// tensor is evaluated with the wrong sign. Used only by audit self-tests.
pub fn set_sign_fault(enabled: bool) {
    SIGN_FAULT.store(enabled, Ordering::SeqCst);
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("kernel time must be positive, got {t}")));
    }
    Ok(())
}

/// Heat kernel `(4 pi t)^{-3/2} exp(-|x|^2 / 4t)`.
pub fn heat_kernel(x: &Vec3, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(heat_kernel_unchecked(dot(x, x), t))
}

#[inline]
pub(crate) fn heat_kernel_unchecked(r2: f64, t: f64) -> f64 {
    (4.0 * PI * t).powf(-1.5) * (-r2 / (4.0 * t)).exp()
}

/// An Oseen tensor evaluation together with its arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub tensor: [[f64; 3]; 3],
    pub x: Vec3,
    pub t: f64,
}

impl KernelValue {
    pub fn trace(&self) -> f64 {
        self.tensor[0][0] + self.tensor[1][1] + self.tensor[2][2]
    }

    pub fn frobenius(&self) -> f64 {
        self.tensor.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Spatial gradient of the Oseen tensor, `d[k][i][j] = d_k S_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OseenGrad {
    pub d: [[[f64; 3]; 3]; 3],
}

impl OseenGrad {
    pub fn frobenius(&self) -> f64 {
        self.d.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Radial coefficients of the Oseen tensor at unit time, as functions of the
/// scaled radius `r`:
/// `S = a I + c x x^T`, `d_k S_ij = da x_k delta_ij + dc x_i x_j x_k + c (delta_ik x_j + delta_jk x_i)`
/// where `da = A'(r) / r` and `dc = C'(r) / r`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Profile {
    pub a: f64,
    pub c: f64,
    pub da: f64,
    pub dc: f64,
}

struct Series {
    a: [f64; SERIES_TERMS],
    c: [f64; SERIES_TERMS],
    da: [f64; SERIES_TERMS],
    dc: [f64; SERIES_TERMS],
}

fn series() -> &'static Series {
    static SERIES: OnceLock<Series> = OnceLock::new();
    SERIES.get_or_init(|| {
        let n = SERIES_TERMS + 3;
        // Psi = sum psi_n r^{2n}, Gamma = sum gam_n r^{2n} at t = 1.
        let mut psi = vec![0.0; n];
        let mut gam = vec![0.0; n];
        let mut fact = 1.0;
        let mut pow4 = 1.0;
        for k in 0..n {
            if k > 0 {
                fact *= k as f64;
                pow4 *= 4.0;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            psi[k] = sign / (4.0 * PI.powf(1.5) * pow4 * fact * (2 * k + 1) as f64);
            gam[k] = sign * (4.0 * PI).powf(-1.5) / (pow4 * fact);
        }
        // A = sum a_n r^{2n}, a_n = gam_n + 2 (n + 1) psi_{n+1}
        // C = sum e_n r^{2n}, e_n = -(gam_{n+1} + 6 (n + 2) psi_{n+2})
        let mut s = Series {
            a: [0.0; SERIES_TERMS],
            c: [0.0; SERIES_TERMS],
            da: [0.0; SERIES_TERMS],
            dc: [0.0; SERIES_TERMS],
        };
        for k in 0..SERIES_TERMS {
            s.a[k] = gam[k] + 2.0 * (k + 1) as f64 * psi[k + 1];
            s.c[k] = -(gam[k + 1] + 6.0 * (k + 2) as f64 * psi[k + 2]);
        }
        // da = A'/r = sum_{n>=1} 2n a_n r^{2n-2}; same for dc.
        for k in 0..SERIES_TERMS - 1 {
            s.da[k] = 2.0 * (k + 1) as f64 * s.a[k + 1];
            s.dc[k] = 2.0 * (k + 1) as f64 * s.c[k + 1];
        }
        s
    })
}

fn horner(coeffs: &[f64], r2: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r2 + c)
}

/// Unit-time radial profile at scaled radius `r`.
pub(crate) fn profile(r: f64) -> Profile {
    let flip = if SIGN_FAULT.load(Ordering::Relaxed) { -1.0 } else { 1.0 };
    if r < SERIES_RADIUS {
        let s = series();
        let r2 = r * r;
        let p = Profile {
            a: horner(&s.a, r2),
            c: horner(&s.c, r2),
            da: horner(&s.da, r2),
            dc: horner(&s.dc, r2),
        };
        if flip < 0.0 {
            return faulted(r, p);
        }
        return p;
    }
    let e = (-0.25 * r * r).exp();
    let gam = (4.0 * PI).powf(-1.5) * e;
    let g = libm::erf(0.5 * r);
    let g1 = e / PI.sqrt();
    let r2 = r * r;
    let r3 = r2 * r;
    let r4 = r2 * r2;
    let p = (g1 / r2 - g / r3) / (4.0 * PI);
    let dp = (-0.5 * g1 / r - 3.0 * g1 / r3 + 3.0 * g / r4) / (4.0 * PI);
    let dgam = -0.5 * r * gam;
    let prof = Profile {
        a: gam + p,
        c: -(gam + 3.0 * p) / r2,
        da: -0.5 * gam + dp / r,
        dc: -(dgam + 3.0 * dp) / r3 + 2.0 * (gam + 3.0 * p) / r4,
    };
    if flip < 0.0 {
        return faulted(r, prof);
    }
    prof
}

// Replaces S = Gamma I + H by Gamma I - H, H the Newtonian Hessian part.
fn faulted(r: f64, p: Profile) -> Profile {
    let gam = (4.0 * PI).powf(-1.5) * (-0.25 * r * r).exp();
    Profile {
        a: 2.0 * gam - p.a,
        c: -p.c,
        da: -gam - p.da,
        dc: -p.dc,
    }
}

/// Oseen tensor `S_ij(x, t)`.
pub fn oseen_tensor(x: &Vec3, t: f64) -> Result<KernelValue> {
    check_time(t)?;
    let sq = t.sqrt();
    let xi = [x[0] / sq, x[1] / sq, x[2] / sq];
    let p = profile(norm(&xi));
    let amp = t.powf(-1.5);
    let mut tensor = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { p.a } else { 0.0 };
            tensor[i][j] = amp * (d + p.c * (xi[i] * xi[j]));
        }
    }
    Ok(KernelValue { tensor, x: *x, t })
}

/// Analytic spatial gradient `d_k S_ij(x, t)`.
pub fn oseen_grad(x: &Vec3, t: f64) -> Result<OseenGrad> {
    check_time(t)?;
    let sq = t.sqrt();
    let xi = [x[0] / sq, x[1] / sq, x[2] / sq];
    let p = profile(norm(&xi));
    let amp = t.powi(-2);
    let mut d = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut v = p.dc * xi[i] * xi[j] * xi[k];
                if i == j {
                    v += p.da * xi[k];
                }
                if i == k {
                    v += p.c * xi[j];
                }
                if j == k {
                    v += p.c * xi[i];
                }
                d[k][i][j] = amp * v;
            }
        }
    }
    Ok(OseenGrad { d })
}

/// `sum_{k,j} d_k S_ij(z, tau) f_kj` for symmetric `f`, without forming the
/// full gradient. `tau` must be positive.
#[inline]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn grad_contract(z: &Vec3, tau: f64, f: &Sym3) -> Vec3 {
    let sq = tau.sqrt();
    let xi = [z[0] / sq, z[1] / sq, z[2] / sq];
    let p = profile(norm(&xi));
    let fx = sym_mul_vec(f, &xi);
    let xfx = dot(&xi, &fx);
    let tr = f[0] + f[1] + f[2];
    let amp = 1.0 / (tau * tau);
    let s1 = amp * (p.da + p.c);
    let s2 = amp * (p.dc * xfx + p.c * tr);
    [s1 * fx[0] + s2 * xi[0], s1 * fx[1] + s2 * xi[1], s1 * fx[2] + s2 * xi[2]]
}

/// A point of a kernel-bound sweep.
#[derive(Debug, Clone, Copy)]
pub struct KernelSample {
    pub x: Vec3,
    pub t: f64,
}

/// Weighted supremum `sup |D^l S(x,t)| (|x| + sqrt t)^{3+l}` over the samples,
/// using the Frobenius norm of the tensor (`l = 0`) or of the gradient (`l = 1`).
pub fn kernel_bound_fit(order: u8, samples: &[KernelSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Argument("kernel bound fit needs at least one sample".into()));
    }
    let mut sup: f64 = 0.0;
    for s in samples {
        let scale = norm(&s.x) + s.t.sqrt();
        let value = match order {
            0 => oseen_tensor(&s.x, s.t)?.frobenius() * scale.powi(3),
            1 => oseen_grad(&s.x, s.t)?.frobenius() * scale.powi(4),
            _ => return Err(Error::Argument(format!("unsupported derivative order {order}"))),
        };
        sup = sup.max(value);
    }
    Ok(sup)
}

/// Log-spaced sweep over `|x|` in `[r_lo, r_hi]` and `t` in `[t_lo, t_hi]`
/// with `per_decade` points per decade in each variable. Directions cycle
/// through a fixed set so that every sample is off-axis.
pub fn log_sweep(r_lo: f64, r_hi: f64, t_lo: f64, t_hi: f64, per_decade: usize) -> Vec<KernelSample> {
    let dirs: [Vec3; 4] = [
        [1.0, 0.0, 0.0],
        [0.6, 0.8, 0.0],
        [0.48, 0.36, 0.8],
        [0.0, 0.0, 1.0],
    ];
    let n_r = ((r_hi / r_lo).log10() * per_decade as f64).ceil() as usize + 1;
    let n_t = ((t_hi / t_lo).log10() * per_decade as f64).ceil() as usize + 1;
    let mut out = Vec::with_capacity(n_r * n_t);
    for i in 0..n_r {
        let r = r_lo * (r_hi / r_lo).powf(i as f64 / (n_r - 1) as f64);
        for j in 0..n_t {
            let t = t_lo * (t_hi / t_lo).powf(j as f64 / (n_t - 1) as f64);
            let d = dirs[(i + j) % dirs.len()];
            out.push(KernelSample { x: [r * d[0], r * d[1], r * d[2]], t });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_kernel_at_origin() {
        let g = heat_kernel(&[0.0; 3], 1.0).unwrap();
        assert!((g - (4.0 * PI).powf(-1.5)).abs() < 1e-16);
        assert!((g - 0.022447).abs() < 2e-6);
    }

    #[test]
    fn non_positive_time_is_domain_error() {
        assert!(matches!(heat_kernel(&[0.0; 3], 0.0), Err(Error::Domain(_))));
        assert!(matches!(oseen_tensor(&[1.0, 0.0, 0.0], -1.0), Err(Error::Domain(_))));
        assert!(matches!(oseen_grad(&[1.0, 0.0, 0.0], f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn oseen_at_origin_is_two_thirds_gamma() {
        let s = oseen_tensor(&[0.0; 3], 1.0).unwrap();
        let want = 2.0 / 3.0 * (4.0 * PI).powf(-1.5);
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { want } else { 0.0 };
                assert!((s.tensor[i][j] - w).abs() < 1e-15);
            }
        }
        assert!((want - 0.014965).abs() < 1e-6);
    }

    // Reference values at scaled radius 2 from 40-digit arithmetic.
    const REF_R2: [f64; 4] = [
        0.004_004_952_102_598_411,
        0.001_125_436_556_113_306_8,
        -0.003_003_714_076_948_808,
        -0.000_374_508_036_876_104_7,
    ];

    #[test]
    fn series_and_closed_form_agree_at_switch() {
        let s = series();
        let ser = [horner(&s.a, 4.0), horner(&s.c, 4.0), horner(&s.da, 4.0), horner(&s.dc, 4.0)];
        let cl = profile(2.0);
        let cl = [cl.a, cl.c, cl.da, cl.dc];
        for k in 0..4 {
            assert!((ser[k] - REF_R2[k]).abs() < 1e-13 * REF_R2[k].abs(), "series {k}");
            assert!((cl[k] - REF_R2[k]).abs() < 1e-11 * REF_R2[k].abs(), "closed {k}");
        }
    }

    #[test]
    fn gradient_is_odd() {
        let x = [0.3, -0.7, 1.1];
        let g1 = oseen_grad(&x, 0.8).unwrap();
        let g2 = oseen_grad(&[-0.3, 0.7, -1.1], 0.8).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(g1.d[k][i][j], -g2.d[k][i][j]);
                }
            }
        }
    }

    #[test]
    fn contraction_matches_full_gradient() {
        let z = [0.4, 1.3, -0.2];
        let f: Sym3 = [1.0, -0.5, 0.25, 0.3, -0.7, 0.9];
        let g = oseen_grad(&z, 0.6).unwrap();
        let c = grad_contract(&z, 0.6, &f);
        for i in 0..3 {
            let mut want = 0.0;
            for k in 0..3 {
                for j in 0..3 {
                    want += g.d[k][i][j] * crate::vec3::sym_get(&f, k, j);
                }
            }
            assert!((c[i] - want).abs() < 1e-14 * want.abs().max(1.0));
        }
    }

    #[test]
    fn empty_sweep_is_argument_error() {
        assert!(matches!(kernel_bound_fit(0, &[]), Err(Error::Argument(_))));
    }
}
