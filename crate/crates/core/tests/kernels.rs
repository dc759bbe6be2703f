mod common;

use common::{frob, max_abs_diff, oseen_by_quadrature, random_point};
use dss_core::kernels::{heat_kernel, kernel_bound_fit, log_sweep, oseen_grad, oseen_tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn oseen_origin_matches_definition() {
    let q = oseen_by_quadrature([0.0; 3], 1.0);
    let s = oseen_tensor(&[0.0; 3], 1.0).unwrap();
    assert!(max_abs_diff(&q, &s.tensor) < 1e-10 * frob(&s.tensor));
    assert!((q[0][0] - 0.014965).abs() < 1e-6);
}

#[test]
fn oseen_matches_definition_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..25 {
        let x = random_point(&mut rng, 0.1, 10.0);
        let t = 0.1 * 100f64.powf(rng.gen::<f64>());
        let q = oseen_by_quadrature(x, t);
        let s = oseen_tensor(&x, t).unwrap();
        let rel = max_abs_diff(&q, &s.tensor) / frob(&s.tensor);
        assert!(rel < 1e-6, "x={x:?} t={t} rel={rel:e}");
    }
}

#[test]
fn heat_kernel_integrates_to_one() {
    let gl = dss_core::quadrature::GaussLegendre::new(60);
    for t in [0.5, 1.0, 2.0] {
        let m = gl.integrate(0.0, 20.0 * f64::sqrt(t), |r| {
            4.0 * std::f64::consts::PI * r * r * heat_kernel(&[r, 0.0, 0.0], t).unwrap()
        });
        assert!((m - 1.0).abs() < 1e-8, "t={t} mass={m}");
    }
}

#[test]
fn parabolic_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let x = random_point(&mut rng, 0.01, 30.0);
        let t = 0.01 * 1e4f64.powf(rng.gen::<f64>());
        let sq = t.sqrt();
        let xs = [x[0] / sq, x[1] / sq, x[2] / sq];
        let g = heat_kernel(&x, t).unwrap();
        let g1 = t.powf(-1.5) * heat_kernel(&xs, 1.0).unwrap();
        assert!((g - g1).abs() <= 1e-14 * g.abs() + 1e-300);
        let s = oseen_tensor(&x, t).unwrap();
        let s1 = oseen_tensor(&xs, 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = t.powf(-1.5) * s1.tensor[i][j];
                assert!((s.tensor[i][j] - want).abs() <= 1e-12 * s.frobenius());
            }
        }
    }
}

#[test]
fn symmetric_and_trace_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let x = random_point(&mut rng, 0.1, 10.0);
        let t = 0.1 * 100f64.powf(rng.gen::<f64>());
        let s = oseen_tensor(&x, t).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.tensor[i][j], s.tensor[j][i]);
            }
        }
        let g2 = 2.0 * heat_kernel(&x, t).unwrap();
        // Entries are O(|S|); the trace cancels them down to 2 Gamma.
        assert!((s.trace() - g2).abs() <= 1e-10 * g2.max(s.frobenius()));
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    for _ in 0..100 {
        let x = random_point(&mut rng, 0.05, 20.0);
        let t = 0.05 * 400f64.powf(rng.gen::<f64>());
        let g = oseen_grad(&x, t).unwrap();
        let scale = g.frobenius();
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let sp = oseen_tensor(&xp, t).unwrap();
            let sm = oseen_tensor(&xm, t).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let fd = (sp.tensor[i][j] - sm.tensor[i][j]) / (2.0 * h);
                    assert!((fd - g.d[k][i][j]).abs() <= 1e-6 * scale, "x={x:?} t={t}");
                }
            }
        }
    }
}

#[test]
fn bound_constants_finite_and_refinement_stable() {
    for order in [0u8, 1] {
        let c = kernel_bound_fit(order, &log_sweep(1e-2, 1e2, 1e-2, 1e2, 8)).unwrap();
        let c2 = kernel_bound_fit(order, &log_sweep(1e-2, 1e2, 1e-2, 1e2, 16)).unwrap();
        assert!(c.is_finite() && c > 0.0);
        assert!((c2 - c).abs() / c < 0.05, "order {order}: {c} vs {c2}");
    }
}
