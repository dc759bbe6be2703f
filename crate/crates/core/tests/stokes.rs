use std::sync::Arc;

use dss_core::grid::{GridSpec, StripGrid};
use dss_core::kernels::{heat_kernel, oseen_grad};
use dss_core::lattice::LatticeField;
use dss_core::stokes::{Force, QuadratureSpec, StokesOperator};
use dss_core::vec3::{norm, sym_get, Sym3, Vec3};
use dss_core::Error;

fn grid(shells_per_period: usize, rho_min: f64, rho_max: f64) -> Arc<StripGrid> {
    Arc::new(
        StripGrid::new(&GridSpec {
            lambda: 2.0,
            shells_per_period,
            rho_min,
            rho_max,
            n_theta: 4,
            n_phi: 8,
            n_time: 3,
        })
        .unwrap(),
    )
}

const M: Sym3 = [0.4, -0.3, 0.1, 0.25, -0.5, 0.35];

/// `s^{1/2} Gamma(y, s) M`: self-similar of degree two.
fn gaussian_force(y: &Vec3, s: f64) -> [f64; 6] {
    let g = s.sqrt() * heat_kernel(y, s).unwrap();
    M.map(|m| g * m)
}

/// Exact potential of [`gaussian_force`]: the Oseen kernel composes with the
/// heat kernel, so `Phi f = (2/3) t^{3/2} d_k S_ij(x, t) M_kj`.
fn gaussian_potential(x: &Vec3, t: f64) -> Vec3 {
    let d = oseen_grad(x, t).unwrap().d;
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        for k in 0..3 {
            for j in 0..3 {
                *o += d[k][i][j] * sym_get(&M, k, j);
            }
        }
    }
    out.map(|v| v * 2.0 / 3.0 * t.powf(1.5))
}

/// A slowly varying force with the quadratic decay of `u (x) u`.
fn algebraic_force(y: &Vec3, s: f64) -> [f64; 6] {
    let b = 1.0 / (norm(y).powi(2) + s);
    [0.36 * b, 0.1 * b, 0.64 * b, 0.3 * b * y[0] * b.sqrt(), 0.48 * b, 0.0]
}

fn diff(a: &Vec3, b: &Vec3) -> f64 {
    norm(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

#[test]
fn gaussian_force_matches_closed_form_and_is_solenoidal() {
    let g = grid(3, -2.0, 2.5);
    let op = StokesOperator::new(g.clone(), QuadratureSpec::default()).unwrap();
    let force = Force::new(LatticeField::from_fn(g.clone(), 2, gaussian_force), 4.0);
    let res = op.apply(&force).unwrap();
    assert!(res.error_estimate.is_finite());

    // weighted by the natural decay (|x| + sqrt t)^2 of the potential
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for idx in 0..g.len() {
        let (i, a, j) = g.unindex(idx);
        let (x, t) = g.node(i, a, j);
        let w = (norm(&x) + t.sqrt()).powi(2);
        worst = worst.max(diff(&res.field.samples[idx], &gaussian_potential(&x, t)) * w);
        scale = scale.max(norm(&gaussian_potential(&x, t)) * w);
    }
    assert!(worst < 1e-2 * scale, "weighted relative error {}", worst / scale);

    // the window part alone carries the fraction 1 - lambda^{-3} of the potential
    let frac = 1.0 - 2f64.powi(-3);
    for idx in (0..g.len()).step_by(37) {
        let (i, a, j) = g.unindex(idx);
        let (x, t) = g.node(i, a, j);
        let want = gaussian_potential(&x, t).map(|v| v * frac);
        let w = (norm(&x) + t.sqrt()).powi(2);
        assert!(diff(&res.window.samples[idx], &want) * w < 1.5e-2 * scale);
    }

    // divergence of the interpolated potential against its gradient scale
    let interp = res.field.interpolator(1.0);
    for &(x, t) in &[([0.4, -0.3, 0.5], 1.3), ([1.2, 0.7, -0.4], 2.2), ([-2.0, 1.5, 1.0], 1.0)] {
        let h = 0.02 * (norm(&x) + f64::sqrt(t));
        let mut div = 0.0;
        let mut grad = 0.0f64;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (p, m) = (interp.eval(&xp, t), interp.eval(&xm, t));
            div += (p[k] - m[k]) / (2.0 * h);
            grad = grad.max(diff(&p, &m) / (2.0 * h));
        }
        assert!(div.abs() < 5e-2 * grad, "div {div} vs gradient scale {grad} at {x:?}");
    }
}

#[test]
fn zero_force_gives_zero() {
    let g = grid(2, -1.0, 1.5);
    let op = StokesOperator::new(g.clone(), QuadratureSpec::default()).unwrap();
    let res = op.apply(&Force::new(LatticeField::zeros(g, 2), 2.0)).unwrap();
    assert!(res.field.samples.iter().all(|v| *v == [0.0; 3]));
}

#[test]
fn slow_decay_violates_precondition() {
    let g = grid(2, -1.0, 2.5);
    let op = StokesOperator::new(g.clone(), QuadratureSpec::default()).unwrap();
    // decays like |y|^{-1} but is declared to decay like |y|^{-2}
    let f = LatticeField::from_fn(g, 2, |y, s| {
        let b = 1.0 / (norm(y).powi(2) + s).sqrt();
        [b, b, b, 0.0, 0.0, 0.0]
    });
    match op.apply(&Force::new(f, 2.0)) {
        Err(Error::Precondition(_)) => {}
        other => panic!("expected a precondition error, got {other:?}"),
    }
}

#[test]
fn rejects_bad_specs_and_foreign_lattices() {
    let g = grid(2, -1.0, 1.5);
    let bad = QuadratureSpec { angle_resolution: 1, ..Default::default() };
    assert!(StokesOperator::new(g.clone(), bad).is_err());
    let op = StokesOperator::new(g, QuadratureSpec::default()).unwrap();
    let other = grid(3, -1.0, 1.5);
    let f = Force::new(LatticeField::from_fn(other, 2, algebraic_force), 2.0);
    assert!(matches!(op.apply(&f), Err(Error::Argument(_))));
}

#[test]
fn potential_is_linear_and_dss() {
    let g = grid(2, -1.5, 2.0);
    let op = StokesOperator::new(g.clone(), QuadratureSpec::default()).unwrap();
    let f1 = LatticeField::from_fn(g.clone(), 2, algebraic_force);
    let f2 = LatticeField::from_fn(g.clone(), 2, |y, s| {
        let v = gaussian_force(y, s);
        let b = 1.0 / (norm(y).powi(2) + s);
        [v[0] + b, v[1], v[2] - 0.5 * b, v[3], v[4], v[5]]
    });
    let (a, b) = (0.7, -1.3);
    let combo = f1.combine(a, &f2, b);
    let p1 = op.apply(&Force::new(f1, 2.0)).unwrap().field;
    let p2 = op.apply(&Force::new(f2, 2.0)).unwrap().field;
    let pc = op.apply(&Force::new(combo, 2.0)).unwrap().field;
    let lin = p1.combine(a, &p2, b);
    let scale = lin.samples.iter().map(norm).fold(0.0, f64::max);
    let worst = lin.samples.iter().zip(&pc.samples).map(|(p, q)| diff(p, q)).fold(0.0, f64::max);
    assert!(worst < 1e-3 * scale, "linearity defect {}", worst / scale);

    // extension of the strip output obeys the DSS identity
    let interp = pc.interpolator(1.0);
    for &(x, t) in &[([0.3, 0.2, -0.5], 0.7), ([1.5, -0.4, 0.9], 2.9), ([-0.2, 0.1, 0.05], 11.0)] {
        let u = interp.eval(&x, t);
        let v = interp.eval(&x.map(|c| 2.0 * c), 4.0 * t).map(|c| 2.0 * c);
        assert!(diff(&u, &v) <= 1e-12 * norm(&u).max(1e-300));
    }
}

#[test]
fn axisymmetric_forces_produce_no_swirl() {
    let g = grid(2, -1.0, 1.5);
    let op = StokesOperator::new(g.clone(), QuadratureSpec::default()).unwrap();
    // -w (x) w for an axisymmetric velocity without swirl
    let f = LatticeField::from_fn(g.clone(), 2, |y, s| {
        let b = 1.0 / (norm(y).powi(2) + s);
        let c = 1.0 + y[2] * b.sqrt();
        let w = [y[0] * b * c, y[1] * b * c, b.sqrt() * (1.0 - y[2] * y[2] * b)];
        let o = dss_core::vec3::outer_sym(&w);
        o.map(|c| -c)
    });
    let res = op.apply(&Force::new(f, 2.0)).unwrap();
    let mut swirl = 0.0f64;
    let mut size = 0.0f64;
    for idx in 0..g.len() {
        let (i, a, j) = g.unindex(idx);
        let (x, _) = g.node(i, a, j);
        let v = res.field.samples[idx];
        let rxy = x[0].hypot(x[1]);
        swirl = swirl.max(((-x[1] * v[0] + x[0] * v[1]) / rxy).abs());
        size = size.max(norm(&v));
    }
    assert!(size > 1e-3);
    assert!(swirl <= 1e-12 * size, "swirl {swirl} vs size {size}");
}
