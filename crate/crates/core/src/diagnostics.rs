//! Pointwise diagnostics on arbitrary field evaluators.

use crate::vec3::Vec3;

/// Result of a swirl scan: the maximum `|u . e_theta|` and the number of
/// points skipped because they lie on the symmetry axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwirlScan {
    pub max_swirl: f64,
    pub skipped_on_axis: usize,
}

/// `max |u(x) . e_theta(x)|` with `e_theta = (-x2, x1, 0)/r`.
pub fn swirl_component<F: Fn(&Vec3) -> Vec3>(u: F, points: &[Vec3]) -> SwirlScan {
    let mut scan = SwirlScan { max_swirl: 0.0, skipped_on_axis: 0 };
    for x in points {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            scan.skipped_on_axis += 1;
            continue;
        }
        let v = u(x);
        let s = (-x[1] * v[0] + x[0] * v[1]) / r;
        scan.max_swirl = scan.max_swirl.max(s.abs());
    }
    if scan.skipped_on_axis > 0 {
        log::warn!("swirl scan skipped {} points on the axis", scan.skipped_on_axis);
    }
    scan
}

/// `max |div u|` over `points` using second-order central differences with step `h`.
pub fn divergence_residual<F: Fn(&Vec3) -> Vec3>(u: F, points: &[Vec3], h: f64) -> f64 {
    let mut sup: f64 = 0.0;
    for x in points {
        let mut div = 0.0;
        for k in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            div += (u(&xp)[k] - u(&xm)[k]) / (2.0 * h);
        }
        sup = sup.max(div.abs());
    }
    sup
}
