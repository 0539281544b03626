//! Expansion of the curvature density `R` of the inverted metric around an
//! umbilical point, the third-order obstruction `C(theta)`, exact sphere
//! integrals and the dimension-six divisibility argument.
//!
//! Functions on the unit sphere are total-order-0 [`SphericalSeries`]; two
//! such functions are equal exactly when their canonical forms agree.

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::polyjet::{
    rat_int, Jet, MultiPoly, PolyError, Rational, SphericalSeries, TermJson,
};
use crate::surface::{umbilical_decompose, SurfaceError, SymbolicGraph, UmbilicalJet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObstructionError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("jet order {jet} too low for series order {series} (need at least {needed})")]
    InsufficientOrder { jet: u32, series: i32, needed: u32 },
    #[error("expected a homogeneous polynomial of degree {expected}, found degree {found:?}")]
    WrongDegree { expected: u32, found: Option<u32> },
    #[error("dimension {0} not supported here (expected {1})")]
    WrongDimension(usize, usize),
    #[error("sphere integral has parameter-dependent value {0}")]
    Symbolic(String),
}

/// Default truncation of the curvature series.
pub const DEFAULT_SERIES_ORDER: i32 = 3;
/// Default jet order.
pub const DEFAULT_JET_ORDER: u32 = 6;

/// The jet order needed to know the series exactly through order `w`:
/// `(f - x.grad f)/rho` loses two orders to the division by `rho`.
pub fn required_jet_order(w: i32) -> u32 {
    (w + 2).max(2) as u32
}

/// Intermediate expansions of the four summands.
#[derive(Debug, Clone)]
pub struct ScriptRParts {
    pub umbilical: UmbilicalJet,
    /// `(f - x . grad f)/rho`.
    pub eta_over_rho: SphericalSeries,
    /// `g^ab f_ab`.
    pub trace: SphericalSeries,
    /// `g^{am} g^{bn} f_ab f_mn`.
    pub hess_norm: SphericalSeries,
    pub series: SphericalSeries,
}

/// `R = 4n(n-1)E^2 + 4(n-1) G E + G^2 - K` with `E = (f - x.grad f)/rho`,
/// `G = g^ab f_ab`, `K = |f_ab|_g^2`, exact through total order `w`.
pub fn script_r_parts(f: &Jet, w: i32) -> Result<ScriptRParts, ObstructionError> {
    let needed = required_jet_order(w);
    if f.order() < needed {
        return Err(ObstructionError::InsufficientOrder {
            jet: f.order(),
            series: w,
            needed,
        });
    }
    let umbilical = umbilical_decompose(f)?;
    let n = f.nvars() as i64;
    let sg = SymbolicGraph::new(f)?;
    let eta = SphericalSeries::from_jet(&sg.eta_numerator());
    let rho = SphericalSeries::from_jet(&sg.rho());
    let eta_over_rho = eta.mul(&rho.invert_unit()?).truncate(w);
    let trace = SphericalSeries::from_jet(&sg.trace()).truncate(w);
    let hess_norm = SphericalSeries::from_jet(&sg.hess_norm()).truncate(w);
    let e2 = eta_over_rho.mul(&eta_over_rho);
    let ge = trace.mul(&eta_over_rho);
    let series = e2
        .scale(&rat_int(4 * n * (n - 1)))
        .add(&ge.scale(&rat_int(4 * (n - 1))))
        .add(&trace.mul(&trace))
        .sub(&hess_norm)
        .truncate(w);
    Ok(ScriptRParts {
        umbilical,
        eta_over_rho,
        trace,
        hess_norm,
        series,
    })
}

pub fn script_r_series(f: &Jet, w: i32) -> Result<SphericalSeries, ObstructionError> {
    Ok(script_r_parts(f, w)?.series)
}

fn check_homogeneous(a: &MultiPoly, k: Option<u32>) -> Result<u32, ObstructionError> {
    if a.is_zero() {
        return Ok(k.unwrap_or(0));
    }
    let d = a.degree();
    if !a.is_homogeneous() || k.is_some_and(|k| Some(k) != d) {
        return Err(ObstructionError::WrongDegree {
            expected: k.unwrap_or(d.unwrap_or(0)),
            found: d,
        });
    }
    Ok(d.unwrap())
}

/// The restriction `A(theta)` of a homogeneous polynomial as a sphere function.
pub fn restrict(a: &MultiPoly) -> SphericalSeries {
    let k = a.degree().unwrap_or(0) as i32;
    SphericalSeries::canonicalize(a.nvars(), a.nparams(), vec![(-k, a.clone())], 0)
}

/// `Delta_theta A = [Delta A]_{r=1} - k(n+k-2) A(theta)`.
pub fn theta_laplacian(a: &MultiPoly) -> Result<SphericalSeries, ObstructionError> {
    let k = check_homogeneous(a, None)? as i32;
    let n = a.nvars() as i32;
    Ok(SphericalSeries::canonicalize(
        a.nvars(),
        a.nparams(),
        vec![
            (2 - k, a.laplacian()),
            (-k, a.scale(&rat_int(-(k * (n + k - 2)) as i64))),
        ],
        0,
    ))
}

/// `|grad_theta A|^2 = [|grad A|^2]_{r=1} - k^2 A(theta)^2`.
pub fn theta_grad_sq(a: &MultiPoly) -> Result<SphericalSeries, ObstructionError> {
    let k = check_homogeneous(a, None)? as i32;
    let mut grad_sq = MultiPoly::zero(a.nvars(), a.nparams());
    for g in a.gradient() {
        grad_sq = grad_sq.add(&g.mul(&g));
    }
    Ok(SphericalSeries::canonicalize(
        a.nvars(),
        a.nparams(),
        vec![
            (2 - 2 * k, grad_sq),
            (-2 * k, a.mul(a).scale(&rat_int(-(k * k) as i64))),
        ],
        0,
    ))
}

/// Squared Euclidean Hessian norm `|grad^2 A|^2`.
pub fn euclidean_hess_sq(a: &MultiPoly) -> MultiPoly {
    let mut acc = MultiPoly::zero(a.nvars(), a.nparams());
    for row in a.hessian() {
        for h in row {
            acc = acc.add(&h.mul(&h));
        }
    }
    acc
}

/// `|grad^2_theta A3|^2`, defined through
/// `|grad^2 A3|^2 / r^2 = 9(n+3)A3^2 + 8|grad_theta A3|^2 + 6 A3 Delta_theta A3 + |grad^2_theta A3|^2`.
pub fn theta_hess_sq(a: &MultiPoly) -> Result<SphericalSeries, ObstructionError> {
    check_homogeneous(a, Some(3))?;
    let n = a.nvars() as i64;
    let (nv, np) = (a.nvars(), a.nparams());
    let euclid = SphericalSeries::canonicalize(nv, np, vec![(-2, euclidean_hess_sq(a))], 0);
    let a_th = restrict(a);
    let lap = theta_laplacian(a)?;
    let grad = theta_grad_sq(a)?;
    Ok(euclid
        .sub(&a_th.mul(&a_th).scale(&rat_int(9 * (n + 3))))
        .sub(&grad.scale(&rat_int(8)))
        .sub(&a_th.mul(&lap).scale(&rat_int(6))))
}

#[derive(Debug, Clone)]
pub struct ThetaOperators {
    pub lap_theta: SphericalSeries,
    pub grad_theta_sq: SphericalSeries,
    /// Only for cubics.
    pub hess_theta_sq: Option<SphericalSeries>,
}

pub fn theta_operators(a: &MultiPoly) -> Result<ThetaOperators, ObstructionError> {
    let k = check_homogeneous(a, None)?;
    Ok(ThetaOperators {
        lap_theta: theta_laplacian(a)?,
        grad_theta_sq: theta_grad_sq(a)?,
        hess_theta_sq: if k == 3 || a.is_zero() {
            Some(theta_hess_sq(a)?)
        } else {
            None
        },
    })
}

/// `C(theta) = (n-1)(n-6)A^2 - 2(n-4) A Delta_theta A - 8|grad_theta A|^2
///  + (Delta_theta A)^2 - |grad^2_theta A|^2` for a cubic `A`.
pub fn c_theta(a3: &MultiPoly) -> Result<SphericalSeries, ObstructionError> {
    check_homogeneous(a3, Some(3))?;
    let n = a3.nvars() as i64;
    let a = restrict(a3);
    let lap = theta_laplacian(a3)?;
    let grad = theta_grad_sq(a3)?;
    let hess = theta_hess_sq(a3)?;
    Ok(a.mul(&a)
        .scale(&rat_int((n - 1) * (n - 6)))
        .sub(&a.mul(&lap).scale(&rat_int(2 * (n - 4))))
        .sub(&grad.scale(&rat_int(8)))
        .add(&lap.mul(&lap))
        .sub(&hess))
}

/// Mean of `theta^alpha` over the unit sphere `S^{n-1}`:
/// `prod (alpha_i - 1)!! / (n (n+2) ... (n + |alpha| - 2))` for even `alpha`,
/// zero otherwise.
pub fn sphere_mean_monomial(exponents: &[u32]) -> Rational {
    let n = exponents.len() as i64;
    if exponents.iter().any(|e| e.is_odd()) {
        return Rational::zero();
    }
    let mut num = num_bigint::BigInt::one();
    for &e in exponents {
        let mut k = e as i64 - 1;
        while k > 1 {
            num *= k;
            k -= 2;
        }
    }
    let total: i64 = exponents.iter().map(|&e| e as i64).sum();
    let mut den = num_bigint::BigInt::one();
    let mut k = 0;
    while k < total {
        den *= n + k;
        k += 2;
    }
    Rational::new(num, den)
}

/// `|S^{n-1}|`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

/// Mean over the unit sphere of a polynomial (each term restricted to
/// `r = 1`), as a parameter-only polynomial.
fn mean_poly(p: &MultiPoly) -> MultiPoly {
    let n = p.nvars();
    let np = p.nparams();
    let mut acc = MultiPoly::zero(0, np);
    for (m, c) in p.terms() {
        let e: Vec<u32> = m.0[..n].iter().map(|&v| v as u32).collect();
        let w = sphere_mean_monomial(&e);
        if w.is_zero() {
            continue;
        }
        let mut pm = crate::polyjet::Monomial::one(np);
        pm.0.copy_from_slice(&m.0[n..]);
        acc = acc.add(&MultiPoly::monomial(0, np, pm, c * w));
    }
    acc
}

/// Integral of a homogeneous polynomial over `S^{n-1}`, as a rational
/// multiple of `|S^{n-1}|`.
pub fn sphere_integral_homog(p: &MultiPoly) -> Result<Rational, ObstructionError> {
    check_homogeneous(p, None)?;
    let m = mean_poly(p);
    if m.is_zero() {
        return Ok(Rational::zero());
    }
    m.as_rational()
        .ok_or_else(|| ObstructionError::Symbolic(m.to_string()))
}

/// Integral of a sphere function (every term evaluated at `r = 1`), as a
/// rational multiple of `|S^{n-1}|`.
pub fn sphere_integral(s: &SphericalSeries) -> Result<Rational, ObstructionError> {
    let mut acc = MultiPoly::zero(0, s.nparams());
    for t in s.terms() {
        acc = acc.add(&mean_poly(&t.poly));
    }
    if acc.is_zero() {
        return Ok(Rational::zero());
    }
    acc.as_rational()
        .ok_or_else(|| ObstructionError::Symbolic(acc.to_string()))
}

/// `(int C dsigma, (n-6) int [(n-1) A3^2 + 3 |grad_theta A3|^2] dsigma)`, both
/// as multiples of `|S^{n-1}|`.
pub fn integrated_identity(a3: &MultiPoly) -> Result<(Rational, Rational), ObstructionError> {
    let n = a3.nvars() as i64;
    let lhs = sphere_integral(&c_theta(a3)?)?;
    let a = restrict(a3);
    let inner = a
        .mul(&a)
        .scale(&rat_int(n - 1))
        .add(&theta_grad_sq(a3)?.scale(&rat_int(3)));
    let rhs = sphere_integral(&inner)? * rat_int(n - 6);
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dim6Record {
    /// `r^4[(Delta A3)^2 - |grad^2 A3|^2] - 40 r^2 A3 Delta A3 + 480 A3^2`.
    pub residual: MultiPoly,
    pub residual_zero: bool,
    /// `|x|^2` divides `A3^2`.
    pub square_divisible: bool,
    /// `|x|^2` divides `A3`.
    pub divisible: bool,
    /// `Delta_theta (A3(theta)^2) = 0`, i.e. `A3(theta)^2` is constant.
    pub harmonic_square_constant: bool,
}

pub fn dim6_check(a3: &MultiPoly) -> Result<Dim6Record, ObstructionError> {
    if a3.nvars() != 6 {
        return Err(ObstructionError::WrongDimension(a3.nvars(), 6));
    }
    check_homogeneous(a3, Some(3))?;
    let (nv, np) = (a3.nvars(), a3.nparams());
    let r2 = MultiPoly::radius_squared(nv, np);
    let lap = a3.laplacian();
    let residual = r2
        .pow(2)
        .mul(&lap.mul(&lap).sub(&euclidean_hess_sq(a3)))
        .sub(&r2.mul(a3).mul(&lap).scale(&rat_int(40)))
        .add(&a3.mul(a3).scale(&rat_int(480)));
    let square = a3.mul(a3);
    Ok(Dim6Record {
        residual_zero: residual.is_zero(),
        residual,
        square_divisible: square.divexact(&r2)?.is_some(),
        divisible: a3.divexact(&r2)?.is_some(),
        harmonic_square_constant: theta_laplacian(&square)?.is_zero(),
    })
}

#[derive(Debug, Clone)]
pub struct ObstructionReport {
    pub n: usize,
    pub h: MultiPoly,
    pub a3: MultiPoly,
    pub c0: SphericalSeries,
    pub c1: SphericalSeries,
    pub c2: SphericalSeries,
    pub c_theta: SphericalSeries,
    pub c2_matches_c: bool,
    pub integral_lhs: Rational,
    pub integral_rhs: Rational,
    pub dim6: Option<Dim6Record>,
}

impl ObstructionReport {
    /// The theorem-backed identities: vanishing of the first two orders, the
    /// second-order coefficient equal to `C`, and the integral identity.
    pub fn identities_hold(&self) -> bool {
        self.c0.is_zero() && self.c1.is_zero() && self.c2_matches_c && self.integral_lhs == self.integral_rhs
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "H": self.h.to_string(),
            "A3": poly_json(&self.a3),
            "c0": series_json(&self.c0),
            "c1": series_json(&self.c1),
            "c2": series_json(&self.c2),
            "c0_zero": self.c0.is_zero(),
            "c1_zero": self.c1.is_zero(),
            "c_theta": series_json(&self.c_theta),
            "c_theta_zero": self.c_theta.is_zero(),
            "c2_matches_C": self.c2_matches_c,
            "integral_lhs": self.integral_lhs.to_string(),
            "integral_rhs": self.integral_rhs.to_string(),
            "integral_match": self.integral_lhs == self.integral_rhs,
            "dim6": self.dim6.as_ref().map(|d| serde_json::json!({
                "residual": poly_json(&d.residual),
                "residual_zero": d.residual_zero,
                "square_divisible": d.square_divisible,
                "divisible": d.divisible,
                "harmonic_square_constant": d.harmonic_square_constant,
            })),
        })
    }
}

#[derive(Serialize)]
struct SeriesTermJson {
    radial: i32,
    total_order: i32,
    poly: Vec<TermJson>,
    text: String,
}

pub fn poly_json(p: &MultiPoly) -> serde_json::Value {
    serde_json::json!({ "terms": p.to_json_terms(), "text": p.to_string() })
}

/// Exact JSON form of a series: one entry per canonical term.
pub fn series_json(s: &SphericalSeries) -> serde_json::Value {
    let terms: Vec<SeriesTermJson> = s
        .terms()
        .iter()
        .map(|t| SeriesTermJson {
            radial: t.radial,
            total_order: t.total_order(),
            poly: t.poly.to_json_terms(),
            text: t.poly.to_string(),
        })
        .collect();
    serde_json::json!({ "order": s.order(), "terms": terms })
}

/// The three lowest coefficients of `R` compared with `C(theta)` and the
/// integral identity; the dimension-six record when `n = 6`.
pub fn expansion_coefficients(f: &Jet) -> Result<ObstructionReport, ObstructionError> {
    let parts = script_r_parts(f, 2)?;
    let s = &parts.series;
    let a3 = parts.umbilical.part(3);
    let c = c_theta(&a3)?;
    let c2 = s.sphere_coefficient(2);
    let (lhs, rhs) = integrated_identity(&a3)?;
    let n = f.nvars();
    Ok(ObstructionReport {
        n,
        h: parts.umbilical.h.clone(),
        c0: s.sphere_coefficient(0),
        c1: s.sphere_coefficient(1),
        c2_matches_c: c2.terms() == c.terms(),
        c2,
        c_theta: c,
        integral_lhs: lhs,
        integral_rhs: rhs,
        dim6: if n == 6 { Some(dim6_check(&a3)?) } else { None },
        a3,
    })
}
