//! Graph hypersurfaces `x -> (x, f(x))` in `R^{n+1}`: induced metric, second
//! fundamental form, curvatures, `rho = |x|^2 + f^2` and the normal component
//! `eta` of the position vector, both numerically and as exact jets.
//!
//! Normal convention: `N = (-grad f, 1) / sqrt(1 + |grad f|^2)`, so a sphere
//! tangent to the hyperplane from above has `H = n/R > 0`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::polyjet::{rat, rat_int, rat_to_f64, Jet, MultiPoly, PolyError, Rational, TermJson};
use crate::riemann::{scalar_curvature, MetricField, MetricJet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurfaceError {
    #[error("not umbilical: {0}")]
    NotUmbilical(String),
    #[error("origin is not a critical zero of f: {0}")]
    NotCritical(String),
    #[error("singular induced metric at {0:?}")]
    SingularMetric(Vec<f64>),
    #[error("point {0:?} outside the surface domain")]
    OutsideDomain(Vec<f64>),
    #[error("curve is not arc-length parametrized: |c'|^2 = {0}")]
    DegenerateCurve(f64),
    #[error("symbolic jet unavailable for surface '{0}'")]
    NoJet(String),
    #[error("invalid surface description: {0}")]
    Invalid(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// A height function with first and second derivatives.
pub trait HeightField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
    /// Whether `x` lies in the domain of the graph.
    fn contains(&self, _x: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct FlatHeight {
    pub n: usize,
}

impl HeightField for FlatHeight {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.n)
    }
    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.n, self.n)
    }
}

/// Lower cap `R - sqrt(R^2 - |x|^2)` of the sphere of radius `R` centred at
/// `(0, R)`.
#[derive(Debug, Clone)]
pub struct SphereHeight {
    pub n: usize,
    pub radius: f64,
}

impl SphereHeight {
    fn w(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (self.radius * self.radius - r2).sqrt()
    }
}

impl HeightField for SphereHeight {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> f64 {
        // Cancellation-free form of R - sqrt(R^2 - |x|^2).
        let r2: f64 = x.iter().map(|v| v * v).sum();
        r2 / (self.radius + self.w(x))
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let w = self.w(x);
        DVector::from_iterator(self.n, x.iter().map(|v| v / w))
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let w = self.w(x);
        let w3 = w * w * w;
        DMatrix::from_fn(self.n, self.n, |i, j| {
            let d = if i == j { 1.0 / w } else { 0.0 };
            d + x[i] * x[j] / w3
        })
    }
    fn contains(&self, x: &[f64]) -> bool {
        x.iter().map(|v| v * v).sum::<f64>() < self.radius * self.radius
    }
}

/// Polynomial height with analytic derivatives.
#[derive(Debug, Clone)]
pub struct PolynomialHeight {
    poly: MultiPoly,
    grad: Vec<MultiPoly>,
    hess: Vec<Vec<MultiPoly>>,
}

impl PolynomialHeight {
    pub fn new(poly: MultiPoly) -> Result<Self, SurfaceError> {
        if poly.nparams() != 0 {
            return Err(SurfaceError::Invalid(
                "numeric evaluation needs a parameter-free polynomial".into(),
            ));
        }
        Ok(PolynomialHeight {
            grad: poly.gradient(),
            hess: poly.hessian(),
            poly,
        })
    }

    pub fn poly(&self) -> &MultiPoly {
        &self.poly
    }
}

impl HeightField for PolynomialHeight {
    fn dim(&self) -> usize {
        self.poly.nvars()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.poly.eval_f64(x, &[])
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.grad.iter().map(|p| p.eval_f64(x, &[])))
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.hess[i][j].eval_f64(x, &[]))
    }
}

/// Black-box height evaluated through finite differences: central
/// differences, Richardson-extrapolated once.
pub struct FiniteDifferenceHeight {
    n: usize,
    f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    domain: Box<dyn Fn(&[f64]) -> bool + Send + Sync>,
    grad_step: f64,
    hess_step: f64,
}

impl fmt::Debug for FiniteDifferenceHeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDifferenceHeight")
            .field("n", &self.n)
            .field("grad_step", &self.grad_step)
            .field("hess_step", &self.hess_step)
            .finish()
    }
}

/// Default relative step for first derivatives.
pub const FD_GRAD_STEP: f64 = 1e-5;
/// Default relative step for second derivatives; larger than the gradient
/// step because the second difference divides roundoff by `h^2`.
pub const FD_HESS_STEP: f64 = 1e-3;

impl FiniteDifferenceHeight {
    pub fn new<F>(n: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        FiniteDifferenceHeight {
            n,
            f: Box::new(f),
            domain: Box::new(|_| true),
            grad_step: FD_GRAD_STEP,
            hess_step: FD_HESS_STEP,
        }
    }

    /// Wraps the value of another field, discarding its derivatives.
    pub fn from_field(field: Arc<dyn HeightField>) -> Self {
        let n = field.dim();
        let dom = field.clone();
        let mut fd = Self::new(n, move |x| field.value(x));
        fd.domain = Box::new(move |x| dom.contains(x));
        fd
    }

    pub fn with_steps(mut self, grad_step: f64, hess_step: f64) -> Self {
        self.grad_step = grad_step;
        self.hess_step = hess_step;
        self
    }

    fn scale(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0)
    }
}

fn perturb(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Central-difference gradient with one Richardson step.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DVector<f64> {
    let central = |i: usize, h: f64| (f(&perturb(x, &[(i, h)])) - f(&perturb(x, &[(i, -h)]))) / (2.0 * h);
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| (4.0 * central(i, h / 2.0) - central(i, h)) / 3.0),
    )
}

/// Central-difference Hessian with one Richardson step.
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let second = |i: usize, j: usize, h: f64| {
        if i == j {
            (f(&perturb(x, &[(i, h)])) - 2.0 * f0 + f(&perturb(x, &[(i, -h)]))) / (h * h)
        } else {
            (f(&perturb(x, &[(i, h), (j, h)])) - f(&perturb(x, &[(i, h), (j, -h)]))
                - f(&perturb(x, &[(i, -h), (j, h)]))
                + f(&perturb(x, &[(i, -h), (j, -h)])))
                / (4.0 * h * h)
        }
    };
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = (4.0 * second(i, j, h / 2.0) - second(i, j, h)) / 3.0;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

impl HeightField for FiniteDifferenceHeight {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        fd_gradient(&|p| (self.f)(p), x, self.grad_step * Self::scale(x))
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        fd_hessian(&|p| (self.f)(p), x, self.hess_step * Self::scale(x))
    }
    fn contains(&self, x: &[f64]) -> bool {
        (self.domain)(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceKind {
    Flat,
    Sphere { radius: Rational },
    Polynomial(MultiPoly),
    BlackBox,
}

#[derive(Debug, Clone)]
pub struct GraphSurface {
    pub name: String,
    n: usize,
    kind: SurfaceKind,
    field: Arc<dyn HeightField>,
    numeric: bool,
}

/// Builtin fixture names.
pub const BUILTINS: [&str; 4] = ["flat", "sphere", "quartic_x1", "cubic_x1"];

impl GraphSurface {
    pub fn flat(n: usize) -> Self {
        GraphSurface {
            name: "flat".into(),
            n,
            kind: SurfaceKind::Flat,
            field: Arc::new(FlatHeight { n }),
            numeric: false,
        }
    }

    pub fn sphere(n: usize, radius: Rational) -> Self {
        GraphSurface {
            name: "sphere".into(),
            n,
            field: Arc::new(SphereHeight {
                n,
                radius: rat_to_f64(&radius),
            }),
            kind: SurfaceKind::Sphere { radius },
            numeric: false,
        }
    }

    pub fn polynomial(name: &str, poly: MultiPoly) -> Result<Self, SurfaceError> {
        let n = poly.nvars();
        Ok(GraphSurface {
            name: name.into(),
            n,
            field: Arc::new(PolynomialHeight::new(poly.clone())?),
            kind: SurfaceKind::Polynomial(poly),
            numeric: false,
        })
    }

    pub fn black_box(name: &str, field: Arc<dyn HeightField>) -> Self {
        GraphSurface {
            name: name.into(),
            n: field.dim(),
            kind: SurfaceKind::BlackBox,
            field,
            numeric: true,
        }
    }

    /// `|x|^2/2 + x1^4`: umbilical with `H = n` and `A3 = 0`.
    pub fn quartic_x1(n: usize) -> Self {
        let r2 = MultiPoly::radius_squared(n, 0).scale(&rat(1, 2));
        let p = r2.add(&MultiPoly::var(n, 0, 0).pow(4));
        Self::polynomial("quartic_x1", p).expect("parameter-free")
    }

    /// `|x|^2/2 + x1^3`: umbilical with `H = n` and `A3 = x1^3`.
    pub fn cubic_x1(n: usize) -> Self {
        let r2 = MultiPoly::radius_squared(n, 0).scale(&rat(1, 2));
        let p = r2.add(&MultiPoly::var(n, 0, 0).pow(3));
        Self::polynomial("cubic_x1", p).expect("parameter-free")
    }

    pub fn builtin(name: &str, n: usize) -> Result<Self, SurfaceError> {
        match name {
            "flat" => Ok(Self::flat(n)),
            "sphere" => Ok(Self::sphere(n, Rational::one())),
            "quartic_x1" => Ok(Self::quartic_x1(n)),
            "cubic_x1" => Ok(Self::cubic_x1(n)),
            other => Err(SurfaceError::Invalid(format!(
                "unknown builtin '{other}' (expected one of {})",
                BUILTINS.join(", ")
            ))),
        }
    }

    /// The same surface evaluated through finite differences of `f` only.
    pub fn numeric_mode(&self, grad_step: f64, hess_step: f64) -> Self {
        let fd = FiniteDifferenceHeight::from_field(self.field.clone()).with_steps(grad_step, hess_step);
        GraphSurface {
            name: self.name.clone(),
            n: self.n,
            kind: self.kind.clone(),
            field: Arc::new(fd),
            numeric: true,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &SurfaceKind {
        &self.kind
    }

    pub fn field(&self) -> &Arc<dyn HeightField> {
        &self.field
    }

    pub fn is_numeric(&self) -> bool {
        self.numeric
    }

    /// Whether the height function is known in closed form (polynomial,
    /// sphere or flat), so that the exact jet is available.
    pub fn has_jet(&self) -> bool {
        !matches!(self.kind, SurfaceKind::BlackBox)
    }

    /// Taylor jet of `f` at the origin through degree `order`, with `nparams`
    /// (unused) parameter slots.
    pub fn jet(&self, order: u32, nparams: usize) -> Result<Jet, SurfaceError> {
        let n = self.n;
        match &self.kind {
            SurfaceKind::Flat => Ok(Jet::zero(n, nparams, order)),
            SurfaceKind::Sphere { radius } => Ok(sphere_jet(n, nparams, radius, order)),
            SurfaceKind::Polynomial(p) => Ok(Jet::new(p.with_params(nparams), order)),
            SurfaceKind::BlackBox => Err(SurfaceError::NoJet(self.name.clone())),
        }
    }

    pub fn point_geometry(&self, x: &[f64]) -> Result<PointGeometry, SurfaceError> {
        if !self.field.contains(x) {
            return Err(SurfaceError::OutsideDomain(x.to_vec()));
        }
        PointGeometry::from_derivatives(
            x,
            self.field.value(x),
            self.field.gradient(x),
            self.field.hessian(x),
        )
    }

    /// Residuals of `|grad_g rho|^2 = 4 rho - 4 eta^2`,
    /// `rho_{;ab} = 2 g_ab + 2 eta h_ab` (max norm) and
    /// `Delta_g rho = 2n + 2 eta H`, via Christoffel symbols of `g`.
    pub fn verify_rho_identities(&self, x: &[f64]) -> Result<[f64; 3], SurfaceError> {
        let geo = self.point_geometry(x)?;
        let n = self.n;
        let hess = self.field.hessian(x);
        let grad = &geo.grad_f;
        let f = geo.value;
        let drho = DVector::from_fn(n, |a, _| 2.0 * x[a] + 2.0 * f * grad[a]);
        let ddrho = DMatrix::from_fn(n, n, |a, b| {
            let d = if a == b { 2.0 } else { 0.0 };
            d + 2.0 * grad[a] * grad[b] + 2.0 * f * hess[(a, b)]
        });
        // d_c g_ab = f_ac f_b + f_a f_bc
        let dg: Vec<DMatrix<f64>> = (0..n)
            .map(|c| DMatrix::from_fn(n, n, |a, b| hess[(a, c)] * grad[b] + grad[a] * hess[(b, c)]))
            .collect();
        let gamma = crate::riemann::christoffel(&geo.g_inv, &dg);
        let mut cov = ddrho.clone();
        for (c, gc) in gamma.iter().enumerate() {
            cov -= gc * drho[c];
        }
        let grad_sq = (drho.transpose() * &geo.g_inv * &drho)[(0, 0)];
        let r1 = grad_sq - (4.0 * geo.rho - 4.0 * geo.eta * geo.eta);
        let target = &geo.g * 2.0 + &geo.ii * (2.0 * geo.eta);
        let r2 = (&cov - target).abs().max();
        let lap = (&geo.g_inv.component_mul(&cov)).sum();
        let r3 = lap - (2.0 * n as f64 + 2.0 * geo.eta * geo.h);
        Ok([r1, r2, r3])
    }

    /// Intrinsic scalar curvature of `g` from finite differences of the
    /// metric (cross-check for the Gauss equation).
    pub fn intrinsic_scalar_curvature(&self, x: &[f64], step: f64) -> Option<f64> {
        let field = self.field.clone();
        let n = self.n;
        let metric = (n, move |p: &[f64]| {
            let g = field.gradient(p);
            DMatrix::identity(n, n) + &g * g.transpose()
        });
        let m: &dyn MetricField = &metric;
        scalar_curvature(&MetricJet::sample(m, x, step))
    }
}

/// Taylor jet of `R - sqrt(R^2 - |x|^2) = -R sum_{k>=1} binom(1/2, k)(-|x|^2/R^2)^k`.
pub fn sphere_jet(n: usize, nparams: usize, radius: &Rational, order: u32) -> Jet {
    let r2 = MultiPoly::radius_squared(n, nparams);
    let mut poly = MultiPoly::zero(n, nparams);
    let mut binom = Rational::one();
    let half = rat(1, 2);
    let inv_r2 = Rational::one() / (radius * radius);
    let mut k = 1u32;
    while 2 * k <= order {
        binom = binom * (&half - rat_int(k as i64 - 1)) / rat_int(k as i64);
        let sign = if k % 2 == 0 { Rational::one() } else { -Rational::one() };
        let c = -(radius * &binom * sign * num_traits::pow(inv_r2.clone(), k as usize));
        poly = poly.add(&r2.pow(k).scale(&c));
        k += 1;
    }
    Jet::new(poly, order)
}

/// Pointwise extrinsic and intrinsic data of a graph.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub value: f64,
    pub grad_f: DVector<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `h_ab = f_ab / sqrt(1 + |grad f|^2)`.
    pub ii: DMatrix<f64>,
    /// Mean curvature `tr_g II`.
    pub h: f64,
    /// `H^2 - |II|_g^2`.
    pub r_g: f64,
    pub rho: f64,
    pub eta: f64,
}

impl PointGeometry {
    pub fn from_derivatives(
        x: &[f64],
        value: f64,
        grad: DVector<f64>,
        hess: DMatrix<f64>,
    ) -> Result<Self, SurfaceError> {
        let n = x.len();
        let grad_sq = grad.norm_squared();
        let w = (1.0 + grad_sq).sqrt();
        let g = DMatrix::identity(n, n) + &grad * grad.transpose();
        if !g.iter().all(|v| v.is_finite()) {
            return Err(SurfaceError::SingularMetric(x.to_vec()));
        }
        // Sherman-Morrison inverse of I + v v^T.
        let g_inv = DMatrix::identity(n, n) - &grad * grad.transpose() / (1.0 + grad_sq);
        let ii = &hess / w;
        let shape = &g_inv * &ii;
        let h = shape.trace();
        let ii_sq = (&shape * &shape).trace();
        let x_dot_grad: f64 = x.iter().zip(grad.iter()).map(|(a, b)| a * b).sum();
        let rho = x.iter().map(|v| v * v).sum::<f64>() + value * value;
        let eta = (value - x_dot_grad) / w;
        Ok(PointGeometry {
            value,
            grad_f: grad,
            g,
            g_inv,
            ii,
            h,
            r_g: h * h - ii_sq,
            rho,
            eta,
        })
    }
}

/// Homogeneous decomposition of an umbilical jet `f = (H/2n)|x|^2 + A3 + ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct UmbilicalJet {
    pub n: usize,
    /// Mean curvature at the origin, a polynomial in the parameters only.
    pub h: MultiPoly,
    /// `parts[k]` is the degree-`k` part `A_k` (`parts[0..3]` are zero).
    pub parts: Vec<MultiPoly>,
    pub order: u32,
}

impl UmbilicalJet {
    pub fn part(&self, k: usize) -> MultiPoly {
        self.parts
            .get(k)
            .cloned()
            .unwrap_or_else(|| MultiPoly::zero(self.n, self.h.nparams()))
    }

    /// `H` as a rational when it does not involve parameters.
    pub fn h_rational(&self) -> Option<Rational> {
        if self.h.is_zero() {
            Some(Rational::zero())
        } else {
            self.h.as_rational()
        }
    }
}

/// Reads off `H` and `A_3..A_D`; fails unless `f(0) = 0`, `grad f(0) = 0` and
/// the quadratic part is a multiple of `|x|^2`.
pub fn umbilical_decompose(f: &Jet) -> Result<UmbilicalJet, SurfaceError> {
    let n = f.nvars();
    let np = f.nparams();
    let p = f.poly();
    for d in 0..2u32 {
        let part = p.homogeneous_part(d);
        if !part.is_zero() {
            return Err(SurfaceError::NotCritical(format!("degree-{d} part {part}")));
        }
    }
    let quad = p.homogeneous_part(2);
    // The x1^2 coefficient fixes the candidate multiple of |x|^2.
    let mut c = MultiPoly::zero(0, np);
    for (m, v) in quad.terms() {
        if m.0[0] == 2 {
            let mut pm = crate::polyjet::Monomial::one(np);
            pm.0.copy_from_slice(&m.0[n..]);
            c = c.add(&MultiPoly::monomial(0, np, pm, v.clone()));
        }
    }
    let radial = MultiPoly::radius_squared(n, np).mul(&MultiPoly::lift_constant(n, &c));
    if radial != quad {
        return Err(SurfaceError::NotUmbilical(format!(
            "quadratic part {quad} is not a multiple of |x|^2"
        )));
    }
    let h = c.scale(&rat_int(2 * n as i64));
    let parts = (0..=f.order()).map(|k| if k < 3 { MultiPoly::zero(n, np) } else { p.homogeneous_part(k) }).collect();
    Ok(UmbilicalJet {
        n,
        h,
        parts,
        order: f.order(),
    })
}

/// Derivatives of the graph quantities as jets, shared by the symbolic
/// identity checks and the curvature expansions.
pub struct SymbolicGraph {
    pub f: Jet,
    pub grad: Vec<Jet>,
    pub hess: Vec<Vec<Jet>>,
    /// `1 / (1 + |grad f|^2)`.
    pub inv_u: Jet,
}

impl SymbolicGraph {
    pub fn new(f: &Jet) -> Result<Self, SurfaceError> {
        let n = f.nvars();
        let grad: Vec<Jet> = (0..n).map(|i| f.derivative(i)).collect::<Result<_, _>>()?;
        let hess: Vec<Vec<Jet>> = grad
            .iter()
            .map(|gi| (0..n).map(|j| gi.derivative(j)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        let mut u = Jet::one(n, f.nparams(), f.order() - 1);
        for gi in &grad {
            u = u.add(&gi.mul(gi));
        }
        Ok(SymbolicGraph {
            f: f.clone(),
            grad,
            hess,
            inv_u: u.invert_unit()?,
        })
    }

    pub fn n(&self) -> usize {
        self.grad.len()
    }

    /// `f_ab f_b` for each `a`.
    pub fn hess_grad(&self) -> Vec<Jet> {
        let n = self.n();
        (0..n)
            .map(|a| {
                let mut acc = self.hess[a][0].mul(&self.grad[0]);
                for b in 1..n {
                    acc = acc.add(&self.hess[a][b].mul(&self.grad[b]));
                }
                acc
            })
            .collect()
    }

    /// `g^ab f_ab = Delta f - f_ab f_a f_b / (1 + |grad f|^2)`.
    pub fn trace(&self) -> Jet {
        let n = self.n();
        let hg = self.hess_grad();
        let mut lap = self.hess[0][0].clone();
        for a in 1..n {
            lap = lap.add(&self.hess[a][a]);
        }
        let mut quad = hg[0].mul(&self.grad[0]);
        for a in 1..n {
            quad = quad.add(&hg[a].mul(&self.grad[a]));
        }
        lap.sub(&quad.mul(&self.inv_u))
    }

    /// `g^{am} g^{bn} f_ab f_mn = tr(F^2) - 2|F grad f|^2/u + (grad f^T F grad f)^2/u^2`.
    pub fn hess_norm(&self) -> Jet {
        let n = self.n();
        let hg = self.hess_grad();
        let mut tr = Jet::zero(n, self.f.nparams(), self.hess[0][0].order());
        for a in 0..n {
            for b in 0..n {
                tr = tr.add(&self.hess[a][b].mul(&self.hess[a][b]));
            }
        }
        let mut v2 = hg[0].mul(&hg[0]);
        let mut s = hg[0].mul(&self.grad[0]);
        for a in 1..n {
            v2 = v2.add(&hg[a].mul(&hg[a]));
            s = s.add(&hg[a].mul(&self.grad[a]));
        }
        let su = s.mul(&self.inv_u);
        tr.sub(&v2.mul(&self.inv_u).scale(&rat_int(2))).add(&su.mul(&su))
    }

    /// `f - x . grad f`.
    pub fn eta_numerator(&self) -> Jet {
        Jet::new(self.f.poly().sub(&self.f.poly().euler()), self.f.order())
    }

    /// `|x|^2 + f^2`.
    pub fn rho(&self) -> Jet {
        let n = self.n();
        let r2 = Jet::new(MultiPoly::radius_squared(n, self.f.nparams()), self.f.order());
        r2.add(&self.f.mul(&self.f))
    }
}

/// Residual jets of the three `rho` identities, exact up to truncation.
pub struct SymbolicRhoResiduals {
    pub grad_norm: Jet,
    pub hessian: Vec<Vec<Jet>>,
    pub laplacian: Jet,
}

impl SymbolicRhoResiduals {
    pub fn all_zero(&self) -> bool {
        self.grad_norm.is_zero()
            && self.laplacian.is_zero()
            && self.hessian.iter().flatten().all(Jet::is_zero)
    }
}

/// Symbolic form of the `rho` identities with `eta = e/sqrt(u)`,
/// `h_ab = f_ab/sqrt(u)`, `H = G/sqrt(u)`; all square roots pair up.
pub fn verify_rho_identities_symbolic(f: &Jet) -> Result<SymbolicRhoResiduals, SurfaceError> {
    let sg = SymbolicGraph::new(f)?;
    let n = sg.n();
    let np = f.nparams();
    let order = f.order();
    let x: Vec<Jet> = (0..n).map(|i| Jet::new(MultiPoly::var(n, np, i), order)).collect();
    let two = rat_int(2);
    let drho: Vec<Jet> = (0..n).map(|a| x[a].add(&f.mul(&sg.grad[a])).scale(&two)).collect();
    let delta = |a: usize, b: usize| {
        if a == b {
            Jet::one(n, np, order)
        } else {
            Jet::zero(n, np, order)
        }
    };
    let ddrho: Vec<Vec<Jet>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    delta(a, b)
                        .add(&sg.grad[a].mul(&sg.grad[b]))
                        .add(&f.mul(&sg.hess[a][b]))
                        .scale(&two)
                })
                .collect()
        })
        .collect();
    let g_inv: Vec<Vec<Jet>> = (0..n)
        .map(|a| (0..n).map(|b| delta(a, b).sub(&sg.grad[a].mul(&sg.grad[b]).mul(&sg.inv_u))).collect())
        .collect();
    // Lowered Christoffel symbols of g = I + grad f grad f^T reduce to
    // Gamma_{m ab} = f_m f_ab; raising gives Gamma^c_ab = g^{cm} f_m f_ab.
    let raised_grad: Vec<Jet> = (0..n)
        .map(|c| {
            let mut acc = Jet::zero(n, np, order);
            for m in 0..n {
                acc = acc.add(&g_inv[c][m].mul(&sg.grad[m]));
            }
            acc
        })
        .collect();
    let mut cov = ddrho.clone();
    for a in 0..n {
        for b in 0..n {
            let mut corr = Jet::zero(n, np, order);
            for c in 0..n {
                corr = corr.add(&raised_grad[c].mul(&drho[c]));
            }
            cov[a][b] = cov[a][b].sub(&corr.mul(&sg.hess[a][b]));
        }
    }
    let e = sg.eta_numerator();
    let rho = sg.rho();
    let mut grad_sq = Jet::zero(n, np, order);
    let mut lap = Jet::zero(n, np, order);
    for a in 0..n {
        for b in 0..n {
            grad_sq = grad_sq.add(&g_inv[a][b].mul(&drho[a]).mul(&drho[b]));
            lap = lap.add(&g_inv[a][b].mul(&cov[a][b]));
        }
    }
    let four = rat_int(4);
    let grad_norm = grad_sq.sub(&rho.scale(&four)).add(&e.mul(&e).mul(&sg.inv_u).scale(&four));
    let g = |a: usize, b: usize| delta(a, b).add(&sg.grad[a].mul(&sg.grad[b]));
    let hessian = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    cov[a][b]
                        .sub(&g(a, b).scale(&two))
                        .sub(&e.mul(&sg.hess[a][b]).mul(&sg.inv_u).scale(&two))
                })
                .collect()
        })
        .collect();
    let laplacian = lap
        .sub(&Jet::constant(n, np, rat_int(2 * n as i64), order))
        .sub(&e.mul(&sg.trace()).mul(&sg.inv_u).scale(&two));
    Ok(SymbolicRhoResiduals {
        grad_norm,
        hessian,
        laplacian,
    })
}

/// Arc-length plane curve `t -> (x(t), y(t))` with two derivatives.
pub trait PlaneCurve: Sync {
    /// `[x, y, x', y', x'', y'']` at `t`.
    fn eval(&self, t: f64) -> [f64; 6];
}

/// The line `(t, height)`.
pub struct Line {
    pub height: f64,
}

impl PlaneCurve for Line {
    fn eval(&self, t: f64) -> [f64; 6] {
        [t, self.height, 1.0, 0.0, 0.0, 0.0]
    }
}

/// Circle of radius `a` through the origin, centred at `(0, a)`.
pub struct CircleThroughOrigin {
    pub radius: f64,
}

impl PlaneCurve for CircleThroughOrigin {
    fn eval(&self, t: f64) -> [f64; 6] {
        let a = self.radius;
        let (s, c) = (t / a).sin_cos();
        [a * s, a - a * c, c, s, -s / a, c / a]
    }
}

/// Circle of radius `a` centred at `center`.
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl PlaneCurve for Circle {
    fn eval(&self, t: f64) -> [f64; 6] {
        let a = self.radius;
        let (s, c) = (t / a).sin_cos();
        [
            self.center[0] + a * c,
            self.center[1] + a * s,
            -s,
            c,
            -c / a,
            -s / a,
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CylinderCurvatures {
    pub lambda: f64,
    pub mu: f64,
    /// Principal curvatures of the inverted cylinder, sorted, oriented to
    /// best match the closed forms.
    pub numeric: Vec<f64>,
    /// Largest deviation between `numeric` and `{lambda^(n-1), mu}`.
    pub mismatch: f64,
}

/// Principal curvatures of `F(t, z) = (x, y, z)/(x^2 + y^2 + |z|^2)` against
/// `lambda = -2(x y' - x' y)` and `mu = lambda - k (x^2 + y^2 + |z|^2)` with
/// `k = x' y'' - y' x''`.
pub fn cylinder_inversion_curvatures(
    c: &dyn PlaneCurve,
    t: f64,
    z: &[f64],
) -> Result<CylinderCurvatures, SurfaceError> {
    let [x, y, dx, dy, ddx, ddy] = c.eval(t);
    let speed = dx * dx + dy * dy;
    if (speed - 1.0).abs() > 1e-8 {
        return Err(SurfaceError::DegenerateCurve(speed));
    }
    let s = x * x + y * y + z.iter().map(|v| v * v).sum::<f64>();
    if s == 0.0 {
        return Err(SurfaceError::OutsideDomain(vec![x, y]));
    }
    let lambda = -2.0 * (x * dy - dx * y);
    let k = dx * ddy - dy * ddx;
    let mu = lambda - k * s;

    let n = z.len() + 1;
    let embed = |p: &[f64]| -> DVector<f64> {
        let [cx, cy, ..] = c.eval(p[0]);
        let zz = &p[1..];
        let s = cx * cx + cy * cy + zz.iter().map(|v| v * v).sum::<f64>();
        let mut v = DVector::zeros(n + 1);
        v[0] = cx / s;
        v[1] = cy / s;
        for (i, zi) in zz.iter().enumerate() {
            v[2 + i] = zi / s;
        }
        v
    };
    let mut p0 = vec![t];
    p0.extend_from_slice(z);
    let scale = s.sqrt();
    let h1 = 1e-4 * scale;
    let h2 = 1e-3 * scale;
    let first = |i: usize, h: f64| (embed(&perturb(&p0, &[(i, h)])) - embed(&perturb(&p0, &[(i, -h)]))) / (2.0 * h);
    let tangents: Vec<DVector<f64>> = (0..n)
        .map(|i| (first(i, h1 / 2.0) * 4.0 - first(i, h1)) / 3.0)
        .collect();
    let f0 = embed(&p0);
    let second = |i: usize, j: usize, h: f64| {
        if i == j {
            (embed(&perturb(&p0, &[(i, h)])) - &f0 * 2.0 + embed(&perturb(&p0, &[(i, -h)]))) / (h * h)
        } else {
            (embed(&perturb(&p0, &[(i, h), (j, h)])) - embed(&perturb(&p0, &[(i, h), (j, -h)]))
                - embed(&perturb(&p0, &[(i, -h), (j, h)]))
                + embed(&perturb(&p0, &[(i, -h), (j, -h)])))
                / (4.0 * h * h)
        }
    };
    let tmat = DMatrix::from_columns(&tangents);
    // Unit normal: orthogonal complement of the tangent space.
    let full = tmat.clone().insert_column(n, 0.0);
    let svd = nalgebra::SVD::new(full, true, false);
    let u = svd.u.ok_or_else(|| SurfaceError::SingularMetric(p0.clone()))?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let normal = u.column(min_idx).into_owned();
    let first_form = tmat.transpose() * &tmat;
    let second_form = DMatrix::from_fn(n, n, |i, j| {
        let v = (second(i, j, h2 / 2.0) * 4.0 - second(i, j, h2)) / 3.0;
        v.dot(&normal)
    });
    let chol = first_form
        .cholesky()
        .ok_or_else(|| SurfaceError::SingularMetric(p0.clone()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| SurfaceError::SingularMetric(p0.clone()))?;
    let sym = &l_inv * second_form * l_inv.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();

    let mut expected = vec![lambda; n - 1];
    expected.push(mu);
    expected.sort_by(f64::total_cmp);
    let mismatch_for = |vals: &[f64]| -> f64 {
        let mut v = vals.to_vec();
        v.sort_by(f64::total_cmp);
        v.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let flipped: Vec<f64> = eig.iter().map(|v| -v).collect();
    if mismatch_for(&flipped) < mismatch_for(&eig) {
        eig = flipped;
    }
    eig.sort_by(f64::total_cmp);
    Ok(CylinderCurvatures {
        lambda,
        mu,
        mismatch: mismatch_for(&eig),
        numeric: eig,
    })
}

/// Surface description file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub n: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<Vec<TermJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    /// Builtin name when `kind` is `"builtin"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

pub fn parse_rational(s: &str) -> Result<Rational, SurfaceError> {
    let s = s.trim();
    let bad = || SurfaceError::Invalid(format!("bad rational {s:?}"));
    if let Some((a, b)) = s.split_once('/') {
        let num: num_bigint::BigInt = a.trim().parse().map_err(|_| bad())?;
        let den: num_bigint::BigInt = b.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        Ok(Rational::new(num, den))
    } else if let Ok(v) = s.parse::<num_bigint::BigInt>() {
        Ok(Rational::from_integer(v))
    } else {
        let v: f64 = s.parse().map_err(|_| bad())?;
        Rational::from_float(v).ok_or_else(bad)
    }
}

impl SurfaceSpec {
    pub fn build(&self) -> Result<GraphSurface, SurfaceError> {
        if self.n == 0 {
            return Err(SurfaceError::Invalid("n must be positive".into()));
        }
        let surface = match self.kind.as_str() {
            "polynomial" => {
                let terms = self
                    .poly
                    .as_ref()
                    .ok_or_else(|| SurfaceError::Invalid("polynomial surface needs \"poly\"".into()))?;
                let p = MultiPoly::from_json_terms(self.n, 0, terms)?;
                GraphSurface::polynomial("polynomial", p)?
            }
            "sphere" => {
                let r = match &self.radius {
                    Some(s) => parse_rational(s)?,
                    None => Rational::one(),
                };
                if r <= Rational::zero() {
                    return Err(SurfaceError::Invalid("radius must be positive".into()));
                }
                GraphSurface::sphere(self.n, r)
            }
            "builtin" => {
                let name = self
                    .name
                    .as_deref()
                    .ok_or_else(|| SurfaceError::Invalid("builtin surface needs \"name\"".into()))?;
                GraphSurface::builtin(name, self.n)?
            }
            "flat" => GraphSurface::flat(self.n),
            other => return Err(SurfaceError::Invalid(format!("unknown kind '{other}'"))),
        };
        Ok(match self.fd_step {
            Some(h) if h > 0.0 => surface.numeric_mode(h, FD_HESS_STEP.max(h)),
            Some(h) => return Err(SurfaceError::Invalid(format!("fd_step must be positive, got {h}"))),
            None => surface,
        })
    }
}
