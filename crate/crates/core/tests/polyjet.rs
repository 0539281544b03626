use proptest::prelude::*;
use umbilic::polyjet::{radial_laplacian_term, rat, rat_int, Jet, MultiPoly, SphericalSeries};

const N: usize = 3;

fn poly_strategy(max_deg: u32, nparams: usize) -> impl Strategy<Value = MultiPoly> {
    let term = (
        prop::collection::vec(0u32..=max_deg, N + nparams),
        -6i64..=6,
        1i64..=4,
    );
    prop::collection::vec(term, 0..6).prop_map(move |terms| {
        let mut p = MultiPoly::zero(N, nparams);
        for (mut e, num, den) in terms {
            // Keep the spatial degree bounded.
            let total: u32 = e[..N].iter().sum();
            if total > max_deg {
                e[..N].iter_mut().for_each(|v| *v = 0);
            }
            p = p.add(&MultiPoly::from_terms(N, nparams, [(e, rat(num, den))]).unwrap());
        }
        p
    })
}

fn homogeneous_strategy(deg: u32) -> impl Strategy<Value = MultiPoly> {
    prop::collection::vec((0..N, 0..N, -5i64..=5), 1..5).prop_map(move |terms| {
        let mut p = MultiPoly::zero(N, 0);
        for (i, j, c) in terms {
            let mut e = vec![0u32; N];
            e[i] += deg.saturating_sub(1);
            if deg > 0 {
                e[j] += 1;
            }
            p = p.add(&MultiPoly::from_terms(N, 0, [(e, rat_int(c))]).unwrap());
        }
        p
    })
}

fn sample_point(seed: &[f64; 3]) -> Vec<f64> {
    seed.iter().map(|v| 0.2 + 0.6 * v).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(a in poly_strategy(3, 1), b in poly_strategy(3, 1), c in poly_strategy(3, 1)) {
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn exact_division_recovers_factor(a in poly_strategy(3, 0), b in poly_strategy(2, 0)) {
        prop_assume!(!b.is_zero());
        let q = a.mul(&b).divexact(&b).unwrap();
        prop_assert_eq!(q, Some(a));
    }

    #[test]
    fn jet_inverse_and_square_root(t in poly_strategy(4, 0)) {
        let order = 5;
        let tail = t.sub(&t.homogeneous_part(0));
        let u = Jet::new(MultiPoly::one(N, 0).add(&tail), order);
        let inv = u.invert_unit().unwrap();
        prop_assert_eq!(u.mul(&inv), Jet::one(N, 0, order));
        let root = u.power_unit(&rat(1, 2)).unwrap();
        prop_assert_eq!(root.mul(&root), u);
    }

    #[test]
    fn canonicalize_is_idempotent(a in poly_strategy(4, 0), m in -4i32..=4) {
        let s = SphericalSeries::canonicalize(N, 0, vec![(m, a)], 6);
        let again = SphericalSeries::canonicalize(N, 0, s.raw_terms(), 6);
        prop_assert_eq!(s.terms(), again.terms());
    }

    #[test]
    fn series_product_matches_pointwise(a in poly_strategy(3, 0), b in poly_strategy(3, 0), seed in prop::array::uniform3(0.0f64..1.0)) {
        let x = sample_point(&seed);
        let order = 8;
        let sa = SphericalSeries::canonicalize(N, 0, vec![(-2, a.clone())], order);
        let sb = SphericalSeries::canonicalize(N, 0, vec![(1, b.clone())], order);
        let prod = sa.mul(&sb);
        let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expect = a.eval_f64(&x, &[]) * b.eval_f64(&x, &[]) / r;
        prop_assert!((prod.eval_f64(&x, &[]) - expect).abs() < 1e-9 * (1.0 + expect.abs()));
    }

    #[test]
    fn radial_laplacian_matches_stencil(p in homogeneous_strategy(3), m in -3i32..=3, seed in prop::array::uniform3(0.0f64..1.0)) {
        prop_assume!(!p.is_zero());
        let x = sample_point(&seed);
        let f = |y: &[f64]| {
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            r.powi(m) * p.eval_f64(y, &[])
        };
        let h = 1e-3;
        let mut lap = 0.0;
        for i in 0..N {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            lap += (f(&a) - 2.0 * f(&x) + f(&b)) / (h * h);
        }
        let exact = radial_laplacian_term(m, &p).unwrap().eval_f64(&x, &[]);
        prop_assert!((lap - exact).abs() < 1e-4 * (1.0 + exact.abs()), "{} vs {}", lap, exact);
    }
}

#[test]
fn truncated_product_drops_high_orders() {
    let x = Jet::new(MultiPoly::var(2, 0, 0), 3);
    let p = x.mul(&x).mul(&x).mul(&x);
    assert!(p.is_zero());
}

#[test]
fn polynomial_json_round_trip() {
    let p = MultiPoly::radius_squared(3, 1)
        .mul(&MultiPoly::param(3, 1, 0))
        .scale(&rat(1, 6))
        .add(&MultiPoly::var(3, 1, 0).pow(3).scale(&rat(-2, 7)));
    let terms = p.to_json_terms();
    let text = serde_json::to_string(&terms).unwrap();
    let back: Vec<umbilic::polyjet::TermJson> = serde_json::from_str(&text).unwrap();
    assert_eq!(MultiPoly::from_json_terms(3, 1, &back).unwrap(), p);
    // The parameter slot sits right after the spatial exponents.
    assert!(terms.iter().all(|t| t.exp.len() == 4));
}
