//! ADM mass of the asymptotically flat end and radius sweeps.
//!
//! Both flux formulas are normalised by `1/(2(n-1)|S^{n-1}|)`, which makes
//! the Schwarzschild slice `(1 + m/(2r^{n-2}))^{4/(n-2)} delta` have mass `m`.

pub mod extrapolate;
pub mod quadrature;

use nalgebra::DMatrix;
use num_traits::Zero;
use serde::Serialize;

use crate::asymptotic::{ghat_deviation, AsymptoticError, AsymptoticSeries, Chart, ChartKind};
use crate::obstruction::sphere_area;
use crate::polyjet::{Jet, Monomial, MultiPoly, Rational};
use crate::surface::GraphSurface;

pub use extrapolate::{extrapolate, linear_fit, Extrapolation, LinearFit};
pub use quadrature::{gauss_gegenbauer, pairwise_sum, SphereRule};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MassError {
    #[error(transparent)]
    Asymptotic(#[from] AsymptoticError),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("non-finite flux at radius {0}")]
    NonFinite(f64),
}

/// A metric `delta + h` near infinity, given in chart coordinates.
pub trait AsymptoticMetric: Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn deviation(&self, p: &[f64]) -> Result<DMatrix<f64>, AsymptoticError>;
}

/// The end of `(M \ {Q}, g_hat)` in a chart.
#[derive(Debug, Clone)]
pub struct SurfaceEnd<'a> {
    pub surface: &'a GraphSurface,
    pub chart: Chart,
}

impl<'a> SurfaceEnd<'a> {
    pub fn new(surface: &'a GraphSurface, kind: ChartKind) -> Result<Self, AsymptoticError> {
        if kind == ChartKind::GraphX {
            return Err(AsymptoticError::NotAsymptotic("graph_x"));
        }
        Ok(SurfaceEnd {
            surface,
            chart: Chart::for_surface(surface, kind)?,
        })
    }
}

impl AsymptoticMetric for SurfaceEnd<'_> {
    fn dim(&self) -> usize {
        self.chart.n
    }

    fn label(&self) -> String {
        self.chart.kind.as_str().to_string()
    }

    fn deviation(&self, p: &[f64]) -> Result<DMatrix<f64>, AsymptoticError> {
        ghat_deviation(self.surface, &self.chart, p)
    }
}

/// Calibration fixture `(1 + m/(2|y|^{n-2}))^{4/(n-2)} delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schwarzschild {
    pub n: usize,
    pub m: f64,
}

impl AsymptoticMetric for Schwarzschild {
    fn dim(&self) -> usize {
        self.n
    }

    fn label(&self) -> String {
        "schwarzschild".into()
    }

    fn deviation(&self, p: &[f64]) -> Result<DMatrix<f64>, AsymptoticError> {
        let r = p.iter().map(|a| a * a).sum::<f64>().sqrt();
        if p.len() != self.n || r == 0.0 {
            return Err(AsymptoticError::OutsideChart(p.to_vec()));
        }
        let e = 4.0 / (self.n as f64 - 2.0);
        let c = (e * (self.m / (2.0 * r.powi(self.n as i32 - 2))).ln_1p()).exp_m1();
        Ok(DMatrix::identity(self.n, self.n) * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MassFormula {
    StandardAdm,
    LeeParker,
}

impl MassFormula {
    pub fn as_str(self) -> &'static str {
        match self {
            MassFormula::StandardAdm => "standard_adm",
            MassFormula::LeeParker => "lee_parker",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassEstimate {
    pub radius: f64,
    pub value: f64,
    pub formula: MassFormula,
    pub chart: String,
    pub quad_degree: usize,
    pub quad_nodes: usize,
}

/// Relative step of the central differences in the flux integrands.
pub const FLUX_STEP: f64 = 1e-4;

/// Default geometric schedule `10^{1}, 10^{1.5}, ..., 10^{3}`.
pub fn default_radii() -> Vec<f64> {
    (0..5).map(|i| 10f64.powf(1.0 + 0.5 * i as f64)).collect()
}

/// Default quadrature degree; product rules grow like `(d/2)^{n-2} d`, so
/// the degree shrinks with the dimension.
pub fn default_quad_degree(n: usize) -> usize {
    match n {
        0..=3 => 32,
        4 => 24,
        5 => 16,
        6 => 12,
        _ => 10,
    }
}

fn normalization(n: usize) -> f64 {
    1.0 / (2.0 * (n as f64 - 1.0) * sphere_area(n))
}

fn check(metric: &dyn AsymptoticMetric, r: f64, rule: &SphereRule) -> Result<(), MassError> {
    if rule.n != metric.dim() {
        return Err(MassError::InvalidSweep(format!(
            "quadrature on S^{} for a metric of dimension {}",
            rule.n - 1,
            metric.dim()
        )));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(MassError::InvalidSweep(format!("radius {r}")));
    }
    Ok(())
}

fn finish(
    metric: &dyn AsymptoticMetric,
    r: f64,
    rule: &SphereRule,
    formula: MassFormula,
    flux: Vec<Result<f64, AsymptoticError>>,
) -> Result<MassEstimate, MassError> {
    let n = metric.dim();
    let mut vals = Vec::with_capacity(flux.len());
    for (v, w) in flux.into_iter().zip(&rule.weights) {
        vals.push(v? * w);
    }
    let value = pairwise_sum(&vals) * r.powi(n as i32 - 1) * normalization(n);
    if !value.is_finite() {
        return Err(MassError::NonFinite(r));
    }
    Ok(MassEstimate {
        radius: r,
        value,
        formula,
        chart: metric.label(),
        quad_degree: rule.degree,
        quad_nodes: rule.len(),
    })
}

fn eval_nodes<F>(rule: &SphereRule, f: F) -> Vec<Result<f64, AsymptoticError>>
where
    F: Fn(&[f64]) -> Result<f64, AsymptoticError> + Sync,
{
    use rayon::prelude::*;
    rule.nodes.par_iter().map(|x| f(x)).collect()
}

/// `g^{jk}(d_k g_ij - d_i g_jk) nu^i` integrated over `|p| = r`.
pub fn adm_mass_standard(metric: &dyn AsymptoticMetric, r: f64, rule: &SphereRule) -> Result<MassEstimate, MassError> {
    check(metric, r, rule)?;
    let n = metric.dim();
    let step = FLUX_STEP * r;
    let flux = eval_nodes(rule, |theta| {
        let p: Vec<f64> = theta.iter().map(|a| a * r).collect();
        let h = metric.deviation(&p)?;
        let g = DMatrix::identity(n, n) + &h;
        let g_inv = g.try_inverse().ok_or_else(|| AsymptoticError::OutsideChart(p.clone()))?;
        let mut dg = Vec::with_capacity(n);
        for k in 0..n {
            let mut a = p.clone();
            let mut b = p.clone();
            a[k] += step;
            b[k] -= step;
            dg.push((metric.deviation(&a)? - metric.deviation(&b)?) / (2.0 * step));
        }
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    acc += g_inv[(j, k)] * (dg[k][(i, j)] - dg[i][(j, k)]) * theta[i];
                }
            }
        }
        Ok(acc)
    });
    finish(metric, r, rule, MassFormula::StandardAdm, flux)
}

/// `d_t(g_tt - tr g) + t^{-1}(n g_tt - tr g)` integrated over `|p| = t`, with
/// `g_tt = theta^T g theta`.
pub fn adm_mass_lee_parker(
    metric: &dyn AsymptoticMetric,
    t: f64,
    rule: &SphereRule,
) -> Result<MassEstimate, MassError> {
    check(metric, t, rule)?;
    let n = metric.dim();
    let step = FLUX_STEP * t;
    let flux = eval_nodes(rule, |theta| {
        // g_tt - tr g and n g_tt - tr g in terms of h = g - delta.
        let parts = |radius: f64| -> Result<(f64, f64), AsymptoticError> {
            let p: Vec<f64> = theta.iter().map(|a| a * radius).collect();
            let h = metric.deviation(&p)?;
            let mut htt = 0.0;
            for i in 0..n {
                for j in 0..n {
                    htt += h[(i, j)] * theta[i] * theta[j];
                }
            }
            let tr = h.trace();
            Ok((htt - tr, n as f64 * htt - tr))
        };
        let (xp, _) = parts(t + step)?;
        let (xm, _) = parts(t - step)?;
        let (_, y) = parts(t)?;
        Ok((xp - xm) / (2.0 * step) + y / t)
    });
    finish(metric, t, rule, MassFormula::LeeParker, flux)
}

pub fn adm_mass(
    metric: &dyn AsymptoticMetric,
    formula: MassFormula,
    r: f64,
    rule: &SphereRule,
) -> Result<MassEstimate, MassError> {
    match formula {
        MassFormula::StandardAdm => adm_mass_standard(metric, r, rule),
        MassFormula::LeeParker => adm_mass_lee_parker(metric, r, rule),
    }
}

pub fn mass_sweep(
    metric: &dyn AsymptoticMetric,
    formula: MassFormula,
    radii: &[f64],
    rule: &SphereRule,
) -> Result<Vec<MassEstimate>, MassError> {
    radii.iter().map(|&r| adm_mass(metric, formula, r, rule)).collect()
}

/// Fits `value(r) = m_inf + a r^{-p}` to a sweep of one formula in one chart.
pub fn extrapolate_mass(estimates: &[MassEstimate]) -> Result<Extrapolation, MassError> {
    if estimates.len() < 4 {
        return Err(MassError::InvalidSweep("extrapolation needs at least 4 radii".into()));
    }
    let first = &estimates[0];
    if estimates
        .iter()
        .any(|e| e.formula != first.formula || e.chart != first.chart)
    {
        return Err(MassError::InvalidSweep("mixed formulas or charts".into()));
    }
    let radii: Vec<f64> = estimates.iter().map(|e| e.radius).collect();
    let (lo, hi) = radii
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    if (hi / lo).log10() < 1.5 - 1e-9 {
        return Err(MassError::InvalidSweep("radii must span at least 1.5 decades".into()));
    }
    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    extrapolate(&radii, &values).ok_or_else(|| MassError::InvalidSweep("degenerate sweep".into()))
}

/// Order-by-order check that the radial mass integrand vanishes to high
/// order in `s = 1/t`.
#[derive(Debug, Clone, Serialize)]
pub struct CancellationReport {
    pub n: usize,
    pub chart: ChartKind,
    pub params: Vec<String>,
    /// Truncation order of the integrand in `s`.
    pub order: u32,
    /// `[coefficient from d_t X, coefficient from X'/t, sum]` at `s^5`,
    /// where `X = g_tt - tr g` and `Y = n g_tt - tr g`.
    pub s5: [String; 3],
    pub s6: [String; 3],
    pub s5_cancels: bool,
    pub s6_cancels: bool,
    /// Lowest nonvanishing power of `s` in the integrand, if any below the
    /// truncation order.
    pub integrand_order: Option<u32>,
    /// `t^{n-1} O(t^{-k})` tends to zero.
    pub mass_vanishes: bool,
}

fn fix_params(p: &MultiPoly, fixed: &[(usize, Rational)]) -> MultiPoly {
    let nv = p.nvars();
    let np = p.nparams();
    let mut out = MultiPoly::zero(nv, np);
    for (m, c) in p.terms() {
        let mut c = c.clone();
        let mut mono = m.clone();
        for (idx, v) in fixed {
            let e = mono.0[nv + idx];
            if e > 0 {
                c *= num_traits::pow::pow(v.clone(), e as usize);
                mono.0[nv + idx] = 0;
            }
        }
        if !c.is_zero() {
            out = out.add(&MultiPoly::monomial(nv, np, Monomial(mono.0), c));
        }
    }
    out
}

fn cancellation_from_series(ser: &AsymptoticSeries, fixed: &[(usize, Rational)]) -> Result<CancellationReport, MassError> {
    let (x, y) = ser.radial_combinations();
    let np = ser.nparams();
    let order = ser.order;
    let s = Jet::new(MultiPoly::var(1, np, 0), order);
    let dx = x.derivative(0).map_err(AsymptoticError::from)?;
    // d_t = -s^2 d_s
    let first = Jet::new(dx.poly().mul(&s.poly().pow(2)).neg(), order);
    let second = Jet::new(y.poly().mul(s.poly()), order);
    let fix = |j: &Jet| Jet::new(fix_params(j.poly(), fixed), order);
    let (first, second) = (fix(&first), fix(&second));
    let integrand = first.add(&second);
    let coeff = |j: &Jet, k: u32| AsymptoticSeries::coefficient(j, k);
    let triple = |k: u32| {
        [
            coeff(&first, k).to_string(),
            coeff(&second, k).to_string(),
            coeff(&integrand, k).to_string(),
        ]
    };
    let integrand_order = integrand.poly().min_degree();
    let n = ser.n;
    Ok(CancellationReport {
        n,
        chart: ser.chart,
        params: ser.param_names.clone(),
        order,
        s5: triple(5),
        s6: triple(6),
        s5_cancels: coeff(&integrand, 5).is_zero(),
        s6_cancels: coeff(&integrand, 6).is_zero(),
        integrand_order,
        mass_vanishes: integrand_order.unwrap_or(order + 1) as usize > n - 1,
    })
}

/// Default truncation of the symbolic integrand.
pub const CANCELLATION_ORDER: u32 = 8;

/// Generic symbolic check with `H`, `A_k` (`k <= kmax`) free.
pub fn symbolic_mass_cancellation(n: usize, chart: ChartKind, kmax: usize) -> Result<CancellationReport, MassError> {
    let ser = AsymptoticSeries::symbolic(n, chart, kmax, CANCELLATION_ORDER)?;
    cancellation_from_series(&ser, &[])
}

/// The same check for a concrete umbilical jet: `H` is fixed and the
/// parameters of vanishing parts `A_k` are set to zero.
pub fn symbolic_mass_cancellation_for(f: &Jet, chart: ChartKind) -> Result<CancellationReport, MassError> {
    let ser = crate::asymptotic::ghat_asymptotic_series(f, chart, CANCELLATION_ORDER)?;
    let mut fixed = vec![(0, ser.h_value.clone().unwrap_or_else(Rational::zero))];
    for (i, &k) in ser.degrees.iter().enumerate() {
        if ser.parts[i].is_zero() {
            fixed.push((ser.a_index(k).expect("carried degree"), Rational::zero()));
            for &l in &ser.degrees {
                fixed.push((ser.q_index(k, l).expect("carried degree"), Rational::zero()));
            }
        }
    }
    cancellation_from_series(&ser, &fixed)
}
