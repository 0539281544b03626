//! Charts near infinity for the inverted surface, the components of `g_hat`
//! in each chart, the symbolic large-`t` expansion of `g_hat - delta` and
//! numeric decay-order estimates.
//!
//! With `y = x/|x|^2`, `r = |y|`, `theta = y/r` and, in the corrected chart,
//! `z = y sqrt(1 - kappa/r^2)`, `kappa = H^2/(2n^2)`, `t = |z|`, the metric is
//!
//! `g_hat = (1+w)^{-2} (K^T K + (K u)(K u)^T)`
//!
//! where `w = r^2 f(x)^2`, `u = (I - 2 theta theta^T) grad f(x)` and `K` is
//! the Jacobian `dy/dz` (`K = I` in the `y` chart). Subtracting `delta` in
//! this form avoids cancellation at large radius.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mass::extrapolate::linear_fit;
use crate::polyjet::{rat, rat_int, Jet, Monomial, MultiPoly, PolyError, Rational};
use crate::surface::{umbilical_decompose, GraphSurface, SurfaceError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AsymptoticError {
    #[error("point {0:?} lies outside the chart domain")]
    OutsideChart(Vec<f64>),
    #[error("the z chart needs A3 = 0 (vanishing covariant derivative of II at the inversion point); found A3 = {0}")]
    A3NonZero(String),
    #[error("{0}")]
    InvalidRadii(String),
    #[error("chart '{0}' has no asymptotic end")]
    NotAsymptotic(&'static str),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    GraphX,
    InvertedY,
    CorrectedZ,
}

impl ChartKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChartKind::GraphX => "graph_x",
            ChartKind::InvertedY => "inverted_y",
            ChartKind::CorrectedZ => "corrected_z",
        }
    }

    /// Decay order the chart is expected to certify.
    pub fn expected_order(self) -> f64 {
        match self {
            ChartKind::GraphX => 0.0,
            ChartKind::InvertedY => 2.0,
            ChartKind::CorrectedZ => 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Chart {
    pub kind: ChartKind,
    pub n: usize,
    /// Mean curvature at the inversion point.
    pub h: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn scaled(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|a| a * c).collect()
}

impl Chart {
    pub fn new(kind: ChartKind, n: usize, h: f64) -> Self {
        Chart { kind, n, h }
    }

    /// Chart for `s`, reading `H` off the jet; the `z` chart additionally
    /// checks `A3 = 0`. Surfaces without a jet use the numeric Hessian trace.
    pub fn for_surface(s: &GraphSurface, kind: ChartKind) -> Result<Self, AsymptoticError> {
        let n = s.n();
        let h = if s.has_jet() {
            let u = umbilical_decompose(&s.jet(3, 0)?)?;
            if kind == ChartKind::CorrectedZ && !u.part(3).is_zero() {
                return Err(AsymptoticError::A3NonZero(u.part(3).to_string()));
            }
            let h = u
                .h_rational()
                .ok_or_else(|| SurfaceError::Invalid("parametric mean curvature".into()))?;
            crate::polyjet::rat_to_f64(&h)
        } else {
            s.field().hessian(&vec![0.0; n]).trace()
        };
        Ok(Chart { kind, n, h })
    }

    /// `H^2/(2n^2)` in the corrected chart, zero otherwise.
    pub fn kappa(&self) -> f64 {
        match self.kind {
            ChartKind::CorrectedZ => self.h * self.h / (2.0 * (self.n * self.n) as f64),
            _ => 0.0,
        }
    }

    /// `|y|` below which the corrected chart is undefined.
    pub fn singular_radius(&self) -> f64 {
        self.kappa().sqrt()
    }

    fn check_dim(&self, p: &[f64]) -> Result<(), AsymptoticError> {
        if p.len() != self.n {
            return Err(AsymptoticError::OutsideChart(p.to_vec()));
        }
        Ok(())
    }

    /// `y` from a chart point.
    pub fn to_y(&self, p: &[f64]) -> Result<Vec<f64>, AsymptoticError> {
        self.check_dim(p)?;
        match self.kind {
            ChartKind::GraphX => {
                let r2: f64 = p.iter().map(|a| a * a).sum();
                if r2 == 0.0 {
                    return Err(AsymptoticError::OutsideChart(p.to_vec()));
                }
                Ok(scaled(p, 1.0 / r2))
            }
            ChartKind::InvertedY => Ok(p.to_vec()),
            ChartKind::CorrectedZ => {
                let t = norm(p);
                if t <= self.singular_radius() || t == 0.0 {
                    return Err(AsymptoticError::OutsideChart(p.to_vec()));
                }
                Ok(scaled(p, (1.0 + self.kappa() / (t * t)).sqrt()))
            }
        }
    }

    /// Chart point from `y`.
    pub fn from_y(&self, y: &[f64]) -> Result<Vec<f64>, AsymptoticError> {
        self.check_dim(y)?;
        let r2: f64 = y.iter().map(|a| a * a).sum();
        match self.kind {
            ChartKind::GraphX => {
                if r2 == 0.0 {
                    return Err(AsymptoticError::OutsideChart(y.to_vec()));
                }
                Ok(scaled(y, 1.0 / r2))
            }
            ChartKind::InvertedY => Ok(y.to_vec()),
            ChartKind::CorrectedZ => {
                let k = self.kappa();
                // |z|^2 = r^2 - kappa must exceed kappa for the inverse map.
                if r2 <= 2.0 * k || r2 == 0.0 {
                    return Err(AsymptoticError::OutsideChart(y.to_vec()));
                }
                Ok(scaled(y, (1.0 - k / r2).sqrt()))
            }
        }
    }

    /// Graph coordinate `x` of a chart point.
    pub fn to_graph(&self, p: &[f64]) -> Result<Vec<f64>, AsymptoticError> {
        if self.kind == ChartKind::GraphX {
            self.check_dim(p)?;
            return Ok(p.to_vec());
        }
        let y = self.to_y(p)?;
        let r2: f64 = y.iter().map(|a| a * a).sum();
        if r2 == 0.0 {
            return Err(AsymptoticError::OutsideChart(p.to_vec()));
        }
        Ok(scaled(&y, 1.0 / r2))
    }

    /// Chart point of a graph coordinate `x`.
    pub fn from_graph(&self, x: &[f64]) -> Result<Vec<f64>, AsymptoticError> {
        if self.kind == ChartKind::GraphX {
            self.check_dim(x)?;
            return Ok(x.to_vec());
        }
        let r2: f64 = x.iter().map(|a| a * a).sum();
        if r2 == 0.0 {
            return Err(AsymptoticError::OutsideChart(x.to_vec()));
        }
        self.from_y(&scaled(x, 1.0 / r2))
    }

    /// `dx/dp` at a chart point.
    pub fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>, AsymptoticError> {
        let n = self.n;
        if self.kind == ChartKind::GraphX {
            self.check_dim(p)?;
            return Ok(DMatrix::identity(n, n));
        }
        let y = self.to_y(p)?;
        let r = norm(&y);
        let theta = DVector::from_iterator(n, y.iter().map(|a| a / r));
        let tt = &theta * theta.transpose();
        let reflect = (DMatrix::identity(n, n) - &tt * 2.0) / (r * r);
        Ok(match self.kind {
            ChartKind::CorrectedZ => {
                let t = norm(p);
                reflect * ((DMatrix::identity(n, n) - &tt) * (r / t) + tt * (t / r))
            }
            _ => reflect,
        })
    }
}

/// Height data at the graph point over a chart point.
struct Pulled {
    theta: DVector<f64>,
    r: f64,
    f: f64,
    grad: DVector<f64>,
}

fn pull(s: &GraphSurface, chart: &Chart, p: &[f64]) -> Result<Pulled, AsymptoticError> {
    let y = chart.to_y(p)?;
    let r = norm(&y);
    let theta = DVector::from_iterator(chart.n, y.iter().map(|a| a / r));
    let x: Vec<f64> = theta.iter().map(|a| a / r).collect();
    let field = s.field();
    if !field.contains(&x) {
        return Err(SurfaceError::OutsideDomain(x).into());
    }
    Ok(Pulled {
        f: field.value(&x),
        grad: field.gradient(&x),
        theta,
        r,
    })
}

/// `g_hat - delta` at chart point `p`, computed without cancellation.
pub fn ghat_deviation(s: &GraphSurface, chart: &Chart, p: &[f64]) -> Result<DMatrix<f64>, AsymptoticError> {
    let n = chart.n;
    if s.n() != n {
        return Err(AsymptoticError::OutsideChart(p.to_vec()));
    }
    if chart.kind == ChartKind::GraphX {
        return Ok(ghat_components(s, chart, p)? - DMatrix::identity(n, n));
    }
    let Pulled { theta, r, f, grad } = pull(s, chart, p)?;
    let w = r * r * f * f;
    let b = 1.0 / ((1.0 + w) * (1.0 + w));
    let a = -w * (2.0 + w) * b;
    let u = &grad - &theta * (2.0 * theta.dot(&grad));
    let tt = &theta * theta.transpose();
    let mut h = DMatrix::identity(n, n) * a;
    match chart.kind {
        ChartKind::CorrectedZ => {
            let t = norm(p);
            let k = chart.kappa();
            let ktk = (DMatrix::identity(n, n) - &tt) * (k / (t * t)) - &tt * (k / (r * r));
            let ut = theta.dot(&u);
            let ku = (&u - &theta * ut) * (r / t) + &theta * (ut * t / r);
            h += ktk * b + &ku * ku.transpose() * b;
        }
        _ => h += &u * u.transpose() * b,
    }
    Ok(h)
}

/// Components of `g_hat = rho^{-2} g` in the chart at `p`.
pub fn ghat_components(s: &GraphSurface, chart: &Chart, p: &[f64]) -> Result<DMatrix<f64>, AsymptoticError> {
    let n = chart.n;
    if chart.kind == ChartKind::GraphX {
        chart.check_dim(p)?;
        let field = s.field();
        if !field.contains(p) {
            return Err(SurfaceError::OutsideDomain(p.to_vec()).into());
        }
        let f = field.value(p);
        let rho = p.iter().map(|a| a * a).sum::<f64>() + f * f;
        if rho == 0.0 {
            return Err(AsymptoticError::OutsideChart(p.to_vec()));
        }
        let g = field.gradient(p);
        return Ok((DMatrix::identity(n, n) + &g * g.transpose()) / (rho * rho));
    }
    Ok(ghat_deviation(s, chart, p)? + DMatrix::identity(n, n))
}

/// Plain pull-back `J^T rho^{-2} (I + grad f grad f^T) J`.
pub fn ghat_pullback(s: &GraphSurface, chart: &Chart, p: &[f64]) -> Result<DMatrix<f64>, AsymptoticError> {
    let x = chart.to_graph(p)?;
    let graph = Chart::new(ChartKind::GraphX, chart.n, chart.h);
    let j = chart.jacobian(p)?;
    Ok(j.transpose() * ghat_components(s, &graph, &x)? * j)
}

/// Coefficients of the expansion of `g_hat` in `s = 1/t` along a ray:
///
/// `g_hat = D delta + T theta theta^T + sum_k C_k (theta V_k^T + V_k theta^T)
///          + sum_{k,l} E_kl V_k V_l^T`
///
/// with `V_k = grad A_k(theta) - k A_k(theta) theta` tangential. Coefficients
/// are jets in `s` over the parameters `[H, a_k.., q_kl..]`, where
/// `a_k = A_k(theta)` and `q_kl = V_k . V_l` (`k <= l`).
#[derive(Debug, Clone)]
pub struct AsymptoticSeries {
    pub n: usize,
    pub chart: ChartKind,
    /// Truncation order in `s`.
    pub order: u32,
    /// Degrees `k` of the `A_k` carried.
    pub degrees: Vec<usize>,
    pub param_names: Vec<String>,
    pub delta: Jet,
    pub radial: Jet,
    pub mixed: Vec<Jet>,
    /// `tangential[i][j]` multiplies `V_{k_i} V_{k_j}^T`.
    pub tangential: Vec<Vec<Jet>>,
    /// `H` and `A_k` of a concrete surface, if bound.
    pub h_value: Option<Rational>,
    pub parts: Vec<MultiPoly>,
}

fn pair_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Upper-triangular enumeration after H and the a_k.
    1 + m + i * m - i * (i + 1) / 2 + j
}

impl AsymptoticSeries {
    /// Generic expansion with symbolic `H`, `A_k` for `k` in `kmin..=kmax`,
    /// through `s^order`. `kmin = 4` in the `z` chart (which needs `A3 = 0`).
    pub fn symbolic(n: usize, chart: ChartKind, kmax: usize, order: u32) -> Result<Self, AsymptoticError> {
        if chart == ChartKind::GraphX {
            return Err(AsymptoticError::NotAsymptotic("graph_x"));
        }
        let kmin = if chart == ChartKind::CorrectedZ { 4 } else { 3 };
        let degrees: Vec<usize> = (kmin..=kmax.max(kmin)).collect();
        let m = degrees.len();
        let np = 1 + m + m * (m + 1) / 2;
        let mut names = vec!["H".to_string()];
        names.extend(degrees.iter().map(|k| format!("a{k}")));
        for i in 0..m {
            for j in i..m {
                names.push(format!("q{}{}", degrees[i], degrees[j]));
            }
        }
        let big = order + 1;
        let s = MultiPoly::var(1, np, 0);
        let sj = |p: u32| Jet::new(s.pow(p), big);
        let hp = MultiPoly::param(1, np, 0);
        let kappa = match chart {
            ChartKind::CorrectedZ => hp.pow(2).scale(&rat(1, 2 * (n * n) as i64)),
            _ => MultiPoly::zero(1, np),
        };
        let q = Jet::new(MultiPoly::one(1, np).add(&kappa.mul(&s.pow(2))), big);
        let qpow = |num: i64, den: i64| q.power_unit(&rat(num, den));
        // F = f / s^2.
        let mut big_f = qpow(-1, 1)?.mul_poly(&hp.scale(&rat(1, 2 * n as i64)));
        for (i, &k) in degrees.iter().enumerate() {
            let a = MultiPoly::param(1, np, 1 + i);
            big_f = big_f.add(&sj(k as u32 - 2).mul(&qpow(-(k as i64), 2)?).mul_poly(&a));
        }
        let df = big_f.derivative(0)?;
        let big_f = big_f.truncate(order);
        // 2F + s F'
        let radial_rate = big_f.scale(&rat_int(2)).add(&sj(1).truncate(order).mul(&df));
        let u = qpow(-1, 1)?.truncate(order).add(&sj(2).truncate(order).mul(&big_f).mul(&big_f));
        let u2 = u.power_unit(&rat_int(-2))?;
        let q1 = qpow(-1, 1)?.truncate(order);
        let delta = u2.mul(&q1);
        let radial = u2.mul(
            &qpow(-3, 1)?
                .truncate(order)
                .sub(&q1)
                .add(&sj(2).truncate(order).mul(&radial_rate).mul(&radial_rate)),
        );
        let mixed = degrees
            .iter()
            .map(|&k| {
                Ok(u2
                    .mul(&radial_rate)
                    .mul(&sj(k as u32).truncate(order))
                    .mul(&qpow(-(k as i64), 2)?.truncate(order))
                    .neg())
            })
            .collect::<Result<Vec<_>, AsymptoticError>>()?;
        let tangential = degrees
            .iter()
            .map(|&k| {
                degrees
                    .iter()
                    .map(|&l| {
                        let kl = (k + l) as i64;
                        Ok(u2
                            .mul(&sj(kl as u32 - 2).truncate(order))
                            .mul(&qpow(-kl, 2)?.truncate(order)))
                    })
                    .collect::<Result<Vec<_>, AsymptoticError>>()
            })
            .collect::<Result<Vec<_>, AsymptoticError>>()?;
        Ok(AsymptoticSeries {
            n,
            chart,
            order,
            degrees,
            param_names: names,
            delta,
            radial,
            mixed,
            tangential,
            h_value: None,
            parts: Vec::new(),
        })
    }

    pub fn nparams(&self) -> usize {
        self.param_names.len()
    }

    /// Parameter index of `a_k`.
    pub fn a_index(&self, k: usize) -> Option<usize> {
        self.degrees.iter().position(|&d| d == k).map(|i| 1 + i)
    }

    /// Parameter index of `q_kl`.
    pub fn q_index(&self, k: usize, l: usize) -> Option<usize> {
        let i = self.degrees.iter().position(|&d| d == k)?;
        let j = self.degrees.iter().position(|&d| d == l)?;
        Some(pair_index(self.degrees.len(), i, j))
    }

    /// Coefficient of `s^j` of a coefficient jet, as a polynomial in the
    /// parameters.
    pub fn coefficient(jet: &Jet, j: u32) -> MultiPoly {
        let np = jet.nparams();
        let mut out = MultiPoly::zero(0, np);
        for (mono, c) in jet.poly().terms() {
            if mono.0[0] as u32 == j {
                let mut pm = Monomial::one(np);
                pm.0.copy_from_slice(&mono.0[1..]);
                out = out.add(&MultiPoly::monomial(0, np, pm, c.clone()));
            }
        }
        out
    }

    /// `-(n-1) D - sum E_kl q_kl` and `(n-1) T - sum E_kl q_kl`, i.e.
    /// `g_tt - tr g_hat` and `n g_tt - tr g_hat`.
    pub fn radial_combinations(&self) -> (Jet, Jet) {
        let np = self.nparams();
        let n1 = rat_int(self.n as i64 - 1);
        let mut trace_e = Jet::zero(1, np, self.delta.order());
        let m = self.degrees.len();
        for i in 0..m {
            for j in 0..m {
                let q = MultiPoly::param(1, np, pair_index(m, i, j));
                trace_e = trace_e.add(&self.tangential[i][j].mul_poly(&q));
            }
        }
        let x = self.delta.scale(&n1).neg().sub(&trace_e);
        let y = self.radial.scale(&n1).sub(&trace_e);
        (x, y)
    }

    /// Binds the expansion to a concrete umbilical jet; the `z` chart needs
    /// `A3 = 0`.
    pub fn bind(mut self, f: &Jet) -> Result<Self, AsymptoticError> {
        let u = umbilical_decompose(f)?;
        if self.chart == ChartKind::CorrectedZ && !u.part(3).is_zero() {
            return Err(AsymptoticError::A3NonZero(u.part(3).to_string()));
        }
        self.h_value = Some(
            u.h_rational()
                .ok_or_else(|| SurfaceError::Invalid("parametric mean curvature".into()))?,
        );
        self.parts = self.degrees.iter().map(|&k| u.part(k)).collect();
        Ok(self)
    }

    /// Numeric `g_hat - delta` from the truncated expansion at a chart point.
    pub fn eval_deviation(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        let h = crate::polyjet::rat_to_f64(self.h_value.as_ref()?);
        let n = self.n;
        let t = norm(p);
        let theta = DVector::from_iterator(n, p.iter().map(|a| a / t));
        let th: Vec<f64> = theta.iter().copied().collect();
        let m = self.degrees.len();
        let mut params = vec![0.0; self.nparams()];
        params[0] = h;
        let mut vs = Vec::with_capacity(m);
        for (i, &k) in self.degrees.iter().enumerate() {
            let a = self.parts[i].eval_f64(&th, &[]);
            params[1 + i] = a;
            let grad = DVector::from_iterator(n, self.parts[i].gradient().iter().map(|g| g.eval_f64(&th, &[])));
            vs.push(grad - &theta * (k as f64 * a));
        }
        for i in 0..m {
            for j in i..m {
                params[pair_index(m, i, j)] = vs[i].dot(&vs[j]);
            }
        }
        let ev = |jet: &Jet| jet.poly().eval_f64(&[1.0 / t], &params);
        let tt = &theta * theta.transpose();
        let mut out = DMatrix::identity(n, n) * (ev(&self.delta) - 1.0) + tt * ev(&self.radial);
        for i in 0..m {
            let c = ev(&self.mixed[i]);
            out += (&theta * vs[i].transpose() + &vs[i] * theta.transpose()) * c;
            for j in 0..m {
                out += &vs[i] * vs[j].transpose() * ev(&self.tangential[i][j]);
            }
        }
        Some(out)
    }

    /// Lowest power of `s` at which `g_hat - delta` has a nonzero coefficient.
    pub fn leading_order(&self) -> Option<u32> {
        let np = self.nparams();
        let one = Jet::one(1, np, self.delta.order());
        let jets = std::iter::once(self.delta.sub(&one))
            .chain(std::iter::once(self.radial.clone()))
            .chain(self.mixed.iter().cloned())
            .chain(self.tangential.iter().flatten().cloned());
        jets.filter_map(|j| j.poly().min_degree()).min()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coeffs = |jet: &Jet| -> Vec<serde_json::Value> {
            (0..=self.order)
                .map(|j| serde_json::Value::String(Self::coefficient(jet, j).to_string()))
                .collect()
        };
        let mut mixed = serde_json::Map::new();
        for (i, k) in self.degrees.iter().enumerate() {
            mixed.insert(format!("C{k}"), coeffs(&self.mixed[i]).into());
        }
        let mut tang = serde_json::Map::new();
        for (i, k) in self.degrees.iter().enumerate() {
            for (j, l) in self.degrees.iter().enumerate() {
                tang.insert(format!("E{k}{l}"), coeffs(&self.tangential[i][j]).into());
            }
        }
        let one = Jet::one(1, self.nparams(), self.delta.order());
        serde_json::json!({
            "n": self.n,
            "chart": self.chart.as_str(),
            "order": self.order,
            "params": self.param_names,
            "variable": "s = 1/t",
            "delta_minus_one": coeffs(&self.delta.sub(&one)),
            "radial": coeffs(&self.radial),
            "mixed": mixed,
            "tangential": tang,
            "leading_order": self.leading_order(),
        })
    }
}

/// Expansion of `g_hat - delta` for the umbilical jet `f`, through `s^order`.
pub fn ghat_asymptotic_series(f: &Jet, chart: ChartKind, order: u32) -> Result<AsymptoticSeries, AsymptoticError> {
    let kmax = (f.order() as usize).min(order as usize + 2).max(4);
    AsymptoticSeries::symbolic(f.nvars(), chart, kmax, order)?.bind(f)
}

/// Fixed angular grid: the `2n` signed axes and `extra` seeded random
/// directions.
pub fn direction_grid(n: usize, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::with_capacity(2 * n + extra);
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = sign;
            dirs.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while dirs.len() < 2 * n + extra {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = norm(&v);
        if r > 1e-3 && r <= 1.0 {
            dirs.push(scaled(&v, 1.0 / r));
        }
    }
    dirs
}

pub const DECAY_EXTRA_DIRECTIONS: usize = 32;
/// Magnitudes below this are treated as exactly zero.
pub const DECAY_FLOOR: f64 = 1e-14;
/// Slack allowed on the derivative slopes.
pub const DECAY_SLOPE_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub chart: ChartKind,
    pub radii: Vec<f64>,
    pub max_h: Vec<f64>,
    pub max_dh: Vec<f64>,
    pub max_ddh: Vec<f64>,
    /// Slopes of `log max|h_ij|` per component `(i, j)`, `i <= j`, for the
    /// components above the noise floor.
    pub component_slopes: Vec<(usize, usize, f64)>,
    pub slope_h: f64,
    pub slope_dh: f64,
    pub slope_ddh: f64,
    /// Estimated order; infinite for an exactly flat metric.
    pub tau: f64,
    /// `R^2` of the regression defining `tau`.
    pub r_squared: f64,
    pub derivatives_consistent: bool,
}

impl DecayFit {
    pub fn tau_json(&self) -> serde_json::Value {
        if self.tau.is_finite() {
            serde_json::json!(self.tau)
        } else {
            serde_json::json!("inf")
        }
    }
}

struct RadiusSample {
    comp: Vec<f64>,
    dh: f64,
    ddh: f64,
}

fn sample_radius(
    s: &GraphSurface,
    chart: &Chart,
    dirs: &[Vec<f64>],
    radius: f64,
) -> Result<RadiusSample, AsymptoticError> {
    let n = chart.n;
    let d1 = 1e-4 * radius;
    let d2 = 1e-3 * radius;
    let per_dir: Vec<Result<(DMatrix<f64>, f64, f64), AsymptoticError>> = dirs
        .par_iter()
        .map(|d| {
            let p = scaled(d, radius);
            let h0 = ghat_deviation(s, chart, &p)?;
            let at = |shift: &[(usize, f64)]| {
                let mut q = p.clone();
                for &(k, v) in shift {
                    q[k] += v;
                }
                ghat_deviation(s, chart, &q)
            };
            let mut dh = 0.0f64;
            let mut ddh = 0.0f64;
            for k in 0..n {
                let plus = at(&[(k, d1)])?;
                let minus = at(&[(k, -d1)])?;
                dh = dh.max(((plus - minus) / (2.0 * d1)).abs().max());
                let plus = at(&[(k, d2)])?;
                let minus = at(&[(k, -d2)])?;
                ddh = ddh.max(((plus + minus - &h0 * 2.0) / (d2 * d2)).abs().max());
                for l in 0..k {
                    let pp = at(&[(k, d2), (l, d2)])?;
                    let pm = at(&[(k, d2), (l, -d2)])?;
                    let mp = at(&[(k, -d2), (l, d2)])?;
                    let mm = at(&[(k, -d2), (l, -d2)])?;
                    ddh = ddh.max(((pp - pm - mp + mm) / (4.0 * d2 * d2)).abs().max());
                }
            }
            Ok((h0, dh, ddh))
        })
        .collect();
    let mut comp = vec![0.0f64; n * (n + 1) / 2];
    let (mut dh, mut ddh) = (0.0f64, 0.0f64);
    for r in per_dir {
        let (h, a, b) = r?;
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                comp[idx] = comp[idx].max(h[(i, j)].abs());
                idx += 1;
            }
        }
        dh = dh.max(a);
        ddh = ddh.max(b);
    }
    Ok(RadiusSample { comp, dh, ddh })
}

fn log_slope(radii: &[f64], vals: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = vals.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let fit = linear_fit(&xs, &ys);
    (fit.slope, fit.r_squared)
}

/// Fits the power decay of `g_hat - delta` and its first two derivatives
/// over a fixed angular grid at each radius.
pub fn decay_order_estimate(
    s: &GraphSurface,
    chart: &Chart,
    radii: &[f64],
    seed: u64,
) -> Result<DecayFit, AsymptoticError> {
    if chart.kind == ChartKind::GraphX {
        return Err(AsymptoticError::NotAsymptotic("graph_x"));
    }
    if radii.len() < 4 || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(AsymptoticError::InvalidRadii(
            "decay fits need at least 4 increasing positive radii".into(),
        ));
    }
    if radii[radii.len() - 1] / radii[0] < 99.999 {
        return Err(AsymptoticError::InvalidRadii("radii must span at least two decades".into()));
    }
    if radii[0] <= chart.singular_radius() {
        return Err(AsymptoticError::InvalidRadii(format!(
            "radius {} is inside the singular radius {} of the chart",
            radii[0],
            chart.singular_radius()
        )));
    }
    let n = chart.n;
    let dirs = direction_grid(n, DECAY_EXTRA_DIRECTIONS, seed);
    let samples = radii
        .iter()
        .map(|&r| sample_radius(s, chart, &dirs, r))
        .collect::<Result<Vec<_>, _>>()?;
    let max_h: Vec<f64> = samples.iter().map(|x| x.comp.iter().fold(0.0f64, |a, &b| a.max(b))).collect();
    let max_dh: Vec<f64> = samples.iter().map(|x| x.dh).collect();
    let max_ddh: Vec<f64> = samples.iter().map(|x| x.ddh).collect();
    if max_h.iter().all(|&v| v < DECAY_FLOOR) {
        return Ok(DecayFit {
            chart: chart.kind,
            radii: radii.to_vec(),
            max_h,
            max_dh,
            max_ddh,
            component_slopes: Vec::new(),
            slope_h: f64::NEG_INFINITY,
            slope_dh: f64::NEG_INFINITY,
            slope_ddh: f64::NEG_INFINITY,
            tau: f64::INFINITY,
            r_squared: 1.0,
            derivatives_consistent: true,
        });
    }
    let mut component_slopes = Vec::new();
    let mut tau = f64::INFINITY;
    let mut r_squared = 1.0;
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            let vals: Vec<f64> = samples.iter().map(|x| x.comp[idx]).collect();
            idx += 1;
            let live = vals
                .iter()
                .zip(&max_h)
                .all(|(&v, &m)| v >= DECAY_FLOOR && v >= 1e-8 * m);
            if !live {
                continue;
            }
            let (slope, r2) = log_slope(radii, &vals);
            component_slopes.push((i, j, slope));
            if -slope < tau {
                tau = -slope;
                r_squared = r2;
            }
        }
    }
    let (slope_h, _) = log_slope(radii, &max_h);
    if !tau.is_finite() {
        tau = -slope_h;
    }
    let (slope_dh, _) = log_slope(radii, &max_dh);
    let (slope_ddh, _) = log_slope(radii, &max_ddh);
    let derivatives_consistent =
        slope_dh <= -(tau + 1.0) + DECAY_SLOPE_TOLERANCE && slope_ddh <= -(tau + 2.0) + DECAY_SLOPE_TOLERANCE;
    Ok(DecayFit {
        chart: chart.kind,
        radii: radii.to_vec(),
        max_h,
        max_dh,
        max_ddh,
        component_slopes,
        slope_h,
        slope_dh,
        slope_ddh,
        tau,
        r_squared,
        derivatives_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn coeff(jet: &Jet, j: u32) -> MultiPoly {
        AsymptoticSeries::coefficient(jet, j)
    }

    #[test]
    fn round_trip_z() {
        let c = Chart::new(ChartKind::CorrectedZ, 3, 3.0);
        let z = [4.0, -2.0, 1.5];
        let back = c.from_y(&c.to_y(&z).unwrap()).unwrap();
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_y_chart_is_exactly_euclidean() {
        let s = GraphSurface::flat(3);
        let c = Chart::for_surface(&s, ChartKind::InvertedY).unwrap();
        let h = ghat_deviation(&s, &c, &[3.0, -1.0, 2.0]).unwrap();
        assert_eq!(h.abs().max(), 0.0);
    }

    #[test]
    fn deviation_matches_pullback() {
        let s = GraphSurface::quartic_x1(4);
        for kind in [ChartKind::InvertedY, ChartKind::CorrectedZ] {
            let c = Chart::for_surface(&s, kind).unwrap();
            let p = [1.3, -0.4, 0.8, 2.1];
            let a = ghat_components(&s, &c, &p).unwrap();
            let b = ghat_pullback(&s, &c, &p).unwrap();
            assert!((a - b).abs().max() < 1e-12);
        }
    }

    #[test]
    fn z_chart_rejects_cubic() {
        let s = GraphSurface::cubic_x1(6);
        assert!(matches!(
            Chart::for_surface(&s, ChartKind::CorrectedZ),
            Err(AsymptoticError::A3NonZero(_))
        ));
    }

    #[test]
    fn z_series_starts_at_fourth_order() {
        let n = 5;
        let ser = AsymptoticSeries::symbolic(n, ChartKind::CorrectedZ, 6, 6).unwrap();
        assert_eq!(ser.leading_order(), Some(4));
        let y = AsymptoticSeries::symbolic(n, ChartKind::InvertedY, 5, 4).unwrap();
        assert_eq!(y.leading_order(), Some(2));
        let np = ser.nparams();
        let h = MultiPoly::param(0, np, 0);
        let a4 = MultiPoly::param(0, np, ser.a_index(4).unwrap());
        let a5 = MultiPoly::param(0, np, ser.a_index(5).unwrap());
        let n4 = rat_int((n * n * n * n) as i64);
        let hn = h.scale(&rat(1, n as i64));
        let h4 = h.pow(4).scale(&(Rational::one() / n4));
        // D = 1 + (3H^4/16n^4 - 2H a4/n) s^4 - (2H a5/n) s^5 + O(s^6)
        assert!(coeff(&ser.delta, 2).is_zero());
        let d4 = h4.scale(&rat(3, 16)).sub(&hn.mul(&a4).scale(&rat_int(2)));
        assert_eq!(coeff(&ser.delta, 4), d4);
        assert_eq!(coeff(&ser.delta, 5), hn.mul(&a5).scale(&rat_int(-2)));
        // T = (-3H^4/4n^4 + 8H a4/n) s^4 + (10 H a5/n) s^5 + O(s^6)
        let t4 = h4.scale(&rat(-3, 4)).add(&hn.mul(&a4).scale(&rat_int(8)));
        assert_eq!(coeff(&ser.radial, 4), t4);
        assert_eq!(coeff(&ser.radial, 5), hn.mul(&a5).scale(&rat_int(10)));
        assert_eq!(coeff(&ser.radial, 6).is_zero(), false);
    }
}
