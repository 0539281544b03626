//! The conformal metric `g_hat = rho^{-2} g`: its scalar curvature, the
//! curvature density against `dV_g`, the leading order of the curvature near
//! the inversion point and the integrability classifier.

use serde::Serialize;

use crate::mass::quadrature::{pairwise_sum, SphereRule};
use crate::obstruction::{script_r_series, ObstructionError};
use crate::polyjet::{Jet, SphericalSeries};
use crate::surface::{GraphSurface, PointGeometry, SurfaceError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConformalError {
    #[error("conformal factor degenerates at the inversion point")]
    AtInversionPoint,
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Obstruction(#[from] ObstructionError),
}

fn bracket(geo: &PointGeometry, n: usize) -> f64 {
    let n = n as f64;
    // rho^2 (R_g + 4(n-1) H eta/rho + 4n(n-1) eta^2/rho^2)
    geo.rho * geo.rho * geo.r_g + 4.0 * (n - 1.0) * geo.h * geo.eta * geo.rho + 4.0 * n * (n - 1.0) * geo.eta * geo.eta
}

/// Scalar curvature of `rho^{-2} g` at the surface point over `x`.
pub fn conformal_scalar(s: &GraphSurface, x: &[f64]) -> Result<f64, ConformalError> {
    let geo = s.point_geometry(x)?;
    if geo.rho == 0.0 {
        return Err(ConformalError::AtInversionPoint);
    }
    Ok(bracket(&geo, s.n()))
}

/// Density of `R_ghat dV_ghat` against `dV_g`:
/// `rho^{2-n}(R_g + 4(n-1) H eta/rho + 4n(n-1) eta^2/rho^2)`.
pub fn curvature_density_factor(s: &GraphSurface, x: &[f64]) -> Result<f64, ConformalError> {
    let geo = s.point_geometry(x)?;
    if geo.rho == 0.0 {
        return Err(ConformalError::AtInversionPoint);
    }
    Ok(bracket(&geo, s.n()) * geo.rho.powi(-(s.n() as i32)))
}

/// Lowest nonvanishing order `c(theta) |x|^k` of the curvature series.
#[derive(Debug, Clone)]
pub struct LeadingOrder {
    pub k: i32,
    /// `c(theta)` as a sphere function.
    pub c: SphericalSeries,
    /// The series vanishes through its truncation order.
    pub is_zero: bool,
    /// Truncation order of the series that was inspected.
    pub order: i32,
}

pub fn leading_order_of_r(f: &Jet, w: i32) -> Result<LeadingOrder, ConformalError> {
    let s = script_r_series(f, w)?;
    Ok(match s.lowest_order() {
        Some(k) => LeadingOrder {
            k,
            c: s.sphere_coefficient(k),
            is_zero: false,
            order: w,
        },
        None => LeadingOrder {
            k: w + 1,
            c: SphericalSeries::zero(f.nvars(), f.nparams(), 0),
            is_zero: true,
            order: w,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrability {
    Integrable,
    NotIntegrable,
    Inconclusive,
}

impl Integrability {
    pub fn as_str(self) -> &'static str {
        match self {
            Integrability::Integrable => "integrable",
            Integrability::NotIntegrable => "not_integrable",
            Integrability::Inconclusive => "inconclusive",
        }
    }
}

/// `R_ghat in L^1(dV_ghat)` near the inversion point iff `k > n - 4`.
pub fn classify_integrability(n: usize, lead: &LeadingOrder) -> Integrability {
    if lead.is_zero {
        return Integrability::Inconclusive;
    }
    if lead.k > n as i32 - 4 {
        Integrability::Integrable
    } else {
        Integrability::NotIntegrable
    }
}

/// Numeric check of integrability near the origin.
#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityProbe {
    /// Shell boundaries, decreasing.
    pub radii: Vec<f64>,
    /// `int |R_ghat| dV_ghat` over each shell `radii[i+1] < |x| < radii[i]`.
    pub shells: Vec<f64>,
    /// Fitted `p` in `shell ~ eps^p`; the integral converges iff `p > 0`.
    pub exponent: f64,
    pub convergent: bool,
}

/// Exponent margin separating convergent from divergent shell sums.
pub const PROBE_THRESHOLD: f64 = 0.1;

/// Integrates `|R_ghat| dV_ghat` over nested shells `eps_{i+1} < |x| < eps_i`
/// and fits the log-log slope of the shell integrals.
pub fn integrability_probe(
    s: &GraphSurface,
    radii: &[f64],
    angular_degree: usize,
) -> Result<IntegrabilityProbe, ConformalError> {
    let n = s.n();
    let rule = SphereRule::new(n, angular_degree);
    let (gl_t, gl_w) = crate::mass::quadrature::gauss_gegenbauer(8, 0.0);
    let mut shells = Vec::with_capacity(radii.len().saturating_sub(1));
    for pair in radii.windows(2) {
        let (outer, inner) = (pair[0].ln(), pair[1].ln());
        let half = 0.5 * (outer - inner);
        let mid = 0.5 * (outer + inner);
        let mut radial = Vec::with_capacity(gl_t.len());
        for (t, w) in gl_t.iter().zip(&gl_w) {
            let r = (mid + half * t).exp();
            let mut err = None;
            let ang = rule.integrate(|theta| {
                let x: Vec<f64> = theta.iter().map(|v| v * r).collect();
                match s.point_geometry(&x) {
                    Ok(geo) => {
                        let vol = (1.0 + geo.grad_f.norm_squared()).sqrt();
                        bracket(&geo, n).abs() * geo.rho.powi(-(n as i32)) * vol
                    }
                    Err(_) => f64::NAN,
                }
            });
            if !ang.is_finite() {
                err = Some(ConformalError::Surface(SurfaceError::OutsideDomain(vec![r])));
            }
            if let Some(e) = err {
                return Err(e);
            }
            // dx = r^{n-1} dr dsigma, dr = r ds.
            radial.push(w * half * ang * r.powi(n as i32));
        }
        shells.push(pairwise_sum(&radial));
    }
    let xs: Vec<f64> = radii[1..].iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = shells.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let exponent = crate::mass::extrapolate::linear_fit(&xs, &ys).slope;
    Ok(IntegrabilityProbe {
        radii: radii.to_vec(),
        shells,
        exponent,
        convergent: exponent > PROBE_THRESHOLD,
    })
}
