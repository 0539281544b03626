use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use umbilic::asymptotic::ChartKind;
use umbilic::mass::{
    adm_mass, extrapolate, extrapolate_mass, gauss_gegenbauer, mass_sweep, pairwise_sum,
    symbolic_mass_cancellation, symbolic_mass_cancellation_for, MassFormula, Schwarzschild,
    SphereRule, SurfaceEnd,
};
use umbilic::obstruction::{sphere_area, sphere_integral_homog};
use umbilic::polyjet::{rat_int, rat_to_f64, MultiPoly};
use umbilic::surface::GraphSurface;

fn random_homogeneous(rng: &mut ChaCha8Rng, n: usize, deg: u32) -> MultiPoly {
    let mut p = MultiPoly::zero(n, 0);
    for _ in 0..6 {
        let mut e = vec![0u32; n];
        for _ in 0..deg {
            e[rng.gen_range(0..n)] += 1;
        }
        p = p.add(&MultiPoly::from_terms(n, 0, [(e, rat_int(rng.gen_range(-5..=5)))]).unwrap());
    }
    p
}

#[test]
fn quadrature_is_exact_through_its_degree() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for n in 2..=6 {
        let rule = SphereRule::new(n, 8);
        assert!((rule.total_weight() - sphere_area(n)).abs() < 1e-12 * sphere_area(n));
        for deg in 0..=8 {
            let p = random_homogeneous(&mut rng, n, deg);
            let exact = rat_to_f64(&sphere_integral_homog(&p).unwrap());
            let approx = rule.mean(|x| p.eval_f64(x, &[]));
            assert!((approx - exact).abs() < 1e-10 * (1.0 + exact.abs()), "n={n} deg={deg}");
        }
    }
}

#[test]
fn gegenbauer_rule_integrates_weighted_moments() {
    // int_{-1}^{1} (1-t^2)^{1/2} t^2 dt = pi/8
    let (t, w) = gauss_gegenbauer(6, 0.5);
    let v: Vec<f64> = t.iter().zip(&w).map(|(t, w)| w * t * t).collect();
    assert!((pairwise_sum(&v) - std::f64::consts::PI / 8.0).abs() < 1e-14);
}

#[test]
fn sphere_end_has_small_flux() {
    let s = GraphSurface::sphere(3, rat_int(1));
    let end = SurfaceEnd::new(&s, ChartKind::InvertedY).unwrap();
    let rule = SphereRule::new(3, 32);
    for formula in [MassFormula::StandardAdm, MassFormula::LeeParker] {
        let m = adm_mass(&end, formula, 100.0, &rule).unwrap();
        assert!(m.value.abs() < 1e-4, "{formula:?}: {}", m.value);
    }
}

#[test]
fn quartic_flux_decreases_along_the_sweep() {
    let s = GraphSurface::quartic_x1(6);
    let end = SurfaceEnd::new(&s, ChartKind::CorrectedZ).unwrap();
    let rule = SphereRule::new(6, 12);
    let sweep = mass_sweep(&end, MassFormula::LeeParker, &[10.0, 30.0, 100.0], &rule).unwrap();
    let mags: Vec<f64> = sweep.iter().map(|e| e.value.abs()).collect();
    assert!(mags[0] > mags[1] && mags[1] > mags[2], "{mags:?}");
}

#[test]
fn schwarzschild_recovers_mass() {
    for n in 3..=5 {
        let metric = Schwarzschild { n, m: 0.5 };
        let rule = SphereRule::new(n, 16);
        for formula in [MassFormula::StandardAdm, MassFormula::LeeParker] {
            let v = adm_mass(&metric, formula, 1e3, &rule).unwrap().value;
            assert!((v - 0.5).abs() < 1e-3, "n={n} {formula:?}: {v}");
        }
    }
}

#[test]
fn schwarzschild_flux_matches_closed_form() {
    // With psi = 1 + m/(2r): the standard flux is m/psi, the conformal one m psi^3.
    let m = 1.0;
    let rule = SphereRule::new(3, 16);
    for r in [10.0, 100.0] {
        let psi = 1.0 + m / (2.0 * r);
        let std = adm_mass(&Schwarzschild { n: 3, m }, MassFormula::StandardAdm, r, &rule).unwrap().value;
        let lp = adm_mass(&Schwarzschild { n: 3, m }, MassFormula::LeeParker, r, &rule).unwrap().value;
        assert!((std - m / psi).abs() < 1e-6, "{std}");
        assert!((lp - m * psi.powi(3)).abs() < 1e-6, "{lp}");
    }
}

#[test]
fn extrapolation_recovers_synthetic_limit() {
    let radii = [10.0, 31.6, 100.0, 316.0, 1000.0];
    let values: Vec<f64> = radii.iter().map(|r: &f64| 0.25 + 3.0 * r.powf(-2.0)).collect();
    let e = extrapolate(&radii, &values).unwrap();
    assert!((e.m_inf - 0.25).abs() < 1e-8);
    assert!((e.decay_exponent.unwrap() - 2.0).abs() < 1e-3);
    assert!(e.fit_quality > 0.999);
    let flat = extrapolate(&radii, &[1.0; 5]).unwrap();
    assert_eq!(flat.decay_exponent, None);
    assert_eq!(flat.m_inf, 1.0);
}

#[test]
fn extrapolation_validates_sweeps() {
    let metric = Schwarzschild { n: 3, m: 0.5 };
    let rule = SphereRule::new(3, 8);
    let short = mass_sweep(&metric, MassFormula::StandardAdm, &[10.0, 20.0, 40.0, 80.0], &rule).unwrap();
    assert!(extrapolate_mass(&short).is_err());
    assert!(extrapolate_mass(&short[..3]).is_err());
    let sweep = mass_sweep(&metric, MassFormula::StandardAdm, &[10.0, 31.6, 100.0, 316.0, 1000.0], &rule).unwrap();
    let e = extrapolate_mass(&sweep).unwrap();
    assert!((e.m_inf - 0.5).abs() < 1e-3);
}

#[test]
fn fifth_and_sixth_order_terms_cancel() {
    for n in 6..=9 {
        let rep = symbolic_mass_cancellation(n, ChartKind::CorrectedZ, 6).unwrap();
        assert!(rep.s5_cancels && rep.s6_cancels, "n = {n}: {:?} {:?}", rep.s5, rep.s6);
        // Generic integrand is O(s^7), so the flux t^{n-1} O(s^7) only decays below n = 8.
        assert_eq!(rep.integrand_order, Some(7));
        assert_eq!(rep.mass_vanishes, n < 8);
    }
}

#[test]
fn quartic_integrand_starts_late() {
    let s = GraphSurface::quartic_x1(7);
    let rep = symbolic_mass_cancellation_for(&s.jet(10, 0).unwrap(), ChartKind::CorrectedZ).unwrap();
    assert!(rep.s5_cancels && rep.s6_cancels);
    assert!(rep.integrand_order.is_none_or(|k| k >= 7));
}

#[test]
fn sweeps_are_bit_identical() {
    let s = GraphSurface::quartic_x1(5);
    let end = SurfaceEnd::new(&s, ChartKind::CorrectedZ).unwrap();
    let rule = SphereRule::new(5, 10);
    let a = mass_sweep(&end, MassFormula::LeeParker, &[20.0, 200.0], &rule).unwrap();
    let b = mass_sweep(&end, MassFormula::LeeParker, &[20.0, 200.0], &rule).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.value.to_bits(), y.value.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn schwarzschild_flux_is_monotone_in_radius(m in 0.05f64..2.0, r in 5.0f64..200.0) {
        let rule = SphereRule::new(3, 8);
        let metric = Schwarzschild { n: 3, m };
        let lo = adm_mass(&metric, MassFormula::StandardAdm, r, &rule).unwrap().value;
        let hi = adm_mass(&metric, MassFormula::StandardAdm, 2.0 * r, &rule).unwrap().value;
        // m / psi increases towards m.
        prop_assert!(lo < hi && hi < m * (1.0 + 1e-9));
    }

    #[test]
    fn flux_is_linear_in_small_mass(m in 1e-4f64..1e-3) {
        let rule = SphereRule::new(4, 8);
        let v = adm_mass(&Schwarzschild { n: 4, m }, MassFormula::StandardAdm, 1e3, &rule).unwrap().value;
        prop_assert!((v / m - 1.0).abs() < 1e-4);
    }
}
