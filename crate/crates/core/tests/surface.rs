use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use umbilic::conformal::{conformal_scalar, leading_order_of_r};
use umbilic::polyjet::{rat, rat_int, MultiPoly};
use umbilic::surface::{
    umbilical_decompose, verify_rho_identities_symbolic, GraphSurface, SurfaceSpec,
};

fn mixed_cubic(n: usize) -> GraphSurface {
    let mut p = MultiPoly::radius_squared(n, 0).scale(&rat(3, 4));
    let terms = [
        (vec![1, 1, 1, 0], rat(1, 3)),
        (vec![0, 2, 0, 1], rat(-1, 2)),
        (vec![0, 0, 0, 4], rat(2, 5)),
    ];
    for (e, c) in terms {
        let mut e = e;
        e.resize(n, 0);
        p = p.add(&MultiPoly::from_terms(n, 0, [(e, c)]).unwrap());
    }
    GraphSurface::polynomial("mixed", p).unwrap()
}

fn fixtures() -> Vec<GraphSurface> {
    vec![
        GraphSurface::flat(4),
        GraphSurface::sphere(5, rat_int(1)),
        GraphSurface::quartic_x1(6),
        GraphSurface::cubic_x1(5),
        mixed_cubic(4),
    ]
}

fn ball_point(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 < radius * radius && r2 > 1e-4 {
            return x;
        }
    }
}

#[test]
fn rho_identities_hold_at_sample_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for s in fixtures() {
        for _ in 0..20 {
            let x = ball_point(&mut rng, s.n(), 0.6);
            let res = s.verify_rho_identities(&x).unwrap();
            assert!(res.iter().all(|v| v.abs() < 1e-7), "{} at {x:?}: {res:?}", s.name);
        }
    }
}

#[test]
fn rho_identities_are_exact_on_jets() {
    for s in fixtures() {
        let jet = s.jet(6, 0).unwrap();
        assert!(verify_rho_identities_symbolic(&jet).unwrap().all_zero(), "{}", s.name);
    }
}

#[test]
fn numeric_mode_matches_analytic_derivatives() {
    let s = GraphSurface::cubic_x1(4);
    let fd = s.numeric_mode(1e-5, 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let x = ball_point(&mut rng, 4, 0.5);
        let res = fd.verify_rho_identities(&x).unwrap();
        assert!(res.iter().all(|v| v.abs() < 1e-4), "{res:?}");
    }
}

#[test]
fn gauss_equation_matches_intrinsic_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in [mixed_cubic(4), GraphSurface::sphere(3, rat(2, 1))] {
        for _ in 0..5 {
            let x = ball_point(&mut rng, s.n(), 0.4);
            let gauss = s.point_geometry(&x).unwrap().r_g;
            let intrinsic = s.intrinsic_scalar_curvature(&x, 1e-3).unwrap();
            assert!((gauss - intrinsic).abs() < 1e-4 * (1.0 + gauss.abs()), "{gauss} vs {intrinsic}");
        }
    }
}

#[test]
fn sphere_scalar_curvature_is_constant() {
    let s = GraphSurface::sphere(4, rat(3, 2));
    for x in [[0.1, 0.2, 0.3, 0.4], [-0.7, 0.1, 0.0, 0.2]] {
        let r_g = s.point_geometry(&x).unwrap().r_g;
        assert!((r_g - 12.0 / 2.25).abs() < 1e-12);
    }
}

#[test]
fn sphere_is_conformally_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 3..=7 {
        let s = GraphSurface::sphere(n, rat_int(1));
        for _ in 0..20 {
            let x = ball_point(&mut rng, n, 0.8);
            assert!(conformal_scalar(&s, &x).unwrap().abs() < 1e-6);
        }
        let d = 8;
        let lead = leading_order_of_r(&s.jet(d, 0).unwrap(), d as i32 - 4).unwrap();
        assert!(lead.is_zero, "n = {n}");
    }
}

#[test]
fn umbilical_data_of_builtins() {
    let u = umbilical_decompose(&GraphSurface::cubic_x1(5).jet(4, 0).unwrap()).unwrap();
    assert_eq!(u.h_rational(), Some(rat_int(5)));
    assert_eq!(u.part(3), MultiPoly::var(5, 0, 0).pow(3));
    let u = umbilical_decompose(&GraphSurface::sphere(3, rat(1, 2)).jet(4, 0).unwrap()).unwrap();
    assert_eq!(u.h_rational(), Some(rat_int(6)));
    assert!(u.part(3).is_zero());
}

#[test]
fn non_umbilical_jet_is_rejected() {
    let p = MultiPoly::var(3, 0, 0).pow(2);
    let s = GraphSurface::polynomial("cyl", p).unwrap();
    assert!(umbilical_decompose(&s.jet(4, 0).unwrap()).is_err());
}

#[test]
fn surface_spec_round_trip() {
    let text = r#"{"n":4,"kind":"polynomial","poly":[
        {"exp":[2,0,0,0],"num":"1","den":"2"},{"exp":[0,2,0,0],"num":"1","den":"2"},
        {"exp":[0,0,2,0],"num":"1","den":"2"},{"exp":[0,0,0,2],"num":"1","den":"2"},
        {"exp":[1,1,1,0],"num":"-3","den":"7"}]}"#;
    let spec: SurfaceSpec = serde_json::from_str(text).unwrap();
    let s = spec.build().unwrap();
    assert_eq!(s.n(), 4);
    let again: SurfaceSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(again.build().unwrap().jet(3, 0).unwrap(), s.jet(3, 0).unwrap());
    let bad: SurfaceSpec = serde_json::from_str(r#"{"n":3,"kind":"sphere","radius":"-1"}"#).unwrap();
    assert!(bad.build().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rho_identities_random_points(seed in any::<u64>(), n in 3usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = mixed_cubic(n.max(4));
        let x = ball_point(&mut rng, s.n(), 0.5);
        let res = s.verify_rho_identities(&x).unwrap();
        prop_assert!(res.iter().all(|v| v.abs() < 1e-7));
    }

    #[test]
    fn sphere_rho_is_scaled_height(seed in any::<u64>(), n in 2usize..=6) {
        // On a sphere through the origin tangent to x_{n+1} = 0, rho = 2R f.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = GraphSurface::sphere(n, rat(5, 4));
        let x = ball_point(&mut rng, n, 1.0);
        let geo = s.point_geometry(&x).unwrap();
        prop_assert!((geo.rho - 2.5 * geo.value).abs() < 1e-12);
    }
}
