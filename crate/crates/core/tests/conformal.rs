use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use umbilic::conformal::{
    classify_integrability, conformal_scalar, curvature_density_factor, integrability_probe,
    leading_order_of_r, Integrability,
};
use umbilic::polyjet::rat;
use umbilic::riemann::{scalar_curvature, MetricField, MetricJet};
use umbilic::surface::GraphSurface;

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a / r).collect()
}

/// Scalar curvature of `rho^{-2} (I + grad f grad f^T)` by finite differences.
fn conformal_scalar_fd(s: &GraphSurface, x: &[f64]) -> f64 {
    let field = s.field().clone();
    let n = s.n();
    let metric = (n, move |p: &[f64]| {
        let g = field.gradient(p);
        let f = field.value(p);
        let rho = p.iter().map(|v| v * v).sum::<f64>() + f * f;
        (DMatrix::identity(n, n) + &g * g.transpose()) / (rho * rho)
    });
    let m: &dyn MetricField = &metric;
    scalar_curvature(&MetricJet::sample(m, x, 1e-4)).unwrap()
}

#[test]
fn conformal_scalar_matches_metric_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for s in [GraphSurface::cubic_x1(4), GraphSurface::quartic_x1(5), GraphSurface::sphere(3, rat(3, 2))] {
        for _ in 0..4 {
            let theta = unit_vector(&mut rng, s.n());
            let x: Vec<f64> = theta.iter().map(|v| 0.3 * v).collect();
            let exact = conformal_scalar(&s, &x).unwrap();
            let fd = conformal_scalar_fd(&s, &x);
            assert!((exact - fd).abs() < 1e-4 * (1.0 + exact.abs()), "{}: {exact} vs {fd}", s.name);
        }
    }
}

#[test]
fn density_is_scalar_times_rho_power() {
    let s = GraphSurface::cubic_x1(5);
    let x = [0.1, -0.2, 0.05, 0.3, 0.0];
    let geo = s.point_geometry(&x).unwrap();
    let r = conformal_scalar(&s, &x).unwrap();
    let d = curvature_density_factor(&s, &x).unwrap();
    assert!((d - r * geo.rho.powi(-5)).abs() < 1e-9 * d.abs());
}

#[test]
fn leading_coefficient_matches_small_radius_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let s = GraphSurface::cubic_x1(5);
    let lead = leading_order_of_r(&s.jet(6, 0).unwrap(), 4).unwrap();
    assert_eq!(lead.k, 2);
    for _ in 0..5 {
        let theta = unit_vector(&mut rng, 5);
        let c = lead.c.eval_f64(&theta, &[]);
        let eps = 1e-3;
        let x: Vec<f64> = theta.iter().map(|v| eps * v).collect();
        // The series expands R_ghat / rho^2.
        let rho = s.point_geometry(&x).unwrap().rho;
        let numeric = conformal_scalar(&s, &x).unwrap() / (rho * rho * eps.powi(2));
        assert!((numeric - c).abs() < 1e-2 * (1.0 + c.abs()), "{numeric} vs {c}");
    }
}

#[test]
fn cubic_classification_switches_at_six() {
    for (n, expected) in [(5, Integrability::Integrable), (6, Integrability::NotIntegrable)] {
        let s = GraphSurface::cubic_x1(n);
        let lead = leading_order_of_r(&s.jet(6, 0).unwrap(), 4).unwrap();
        assert_eq!(lead.k, 2);
        assert_eq!(classify_integrability(n, &lead), expected);
        let probe = integrability_probe(&s, &[1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3], 8).unwrap();
        assert_eq!(probe.convergent, expected == Integrability::Integrable, "n = {n}: {probe:?}");
        // Shell integrals scale like eps^{k + 4 - n}.
        assert!((probe.exponent - (6.0 - n as f64)).abs() < 0.2, "{}", probe.exponent);
    }
}

#[test]
fn quartic_curvature_starts_at_fourth_order() {
    let s = GraphSurface::quartic_x1(7);
    let lead = leading_order_of_r(&s.jet(8, 0).unwrap(), 6).unwrap();
    assert!(!lead.is_zero);
    assert_eq!(lead.k, 4);
    assert_eq!(classify_integrability(7, &lead), Integrability::Integrable);
}

#[test]
fn sphere_is_inconclusive() {
    let s = GraphSurface::sphere(6, rat(1, 1));
    let lead = leading_order_of_r(&s.jet(8, 0).unwrap(), 6).unwrap();
    assert_eq!(classify_integrability(6, &lead), Integrability::Inconclusive);
}
