//! Python bindings: surfaces, the exact expansions at the inversion point,
//! charts near infinity and ADM mass sweeps.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use umbilic::asymptotic::{
    decay_order_estimate, ghat_components as ghat_components_rs, Chart, ChartKind,
};
use umbilic::conformal::{classify_integrability, conformal_scalar as conformal_scalar_rs, leading_order_of_r};
use umbilic::mass::{
    adm_mass, default_quad_degree, extrapolate, symbolic_mass_cancellation as cancellation_rs, AsymptoticMetric,
    MassFormula, Schwarzschild, SphereRule, SurfaceEnd,
};
use umbilic::obstruction::{c_theta, expansion_coefficients, integrated_identity, series_json};
use umbilic::surface::{umbilical_decompose, GraphSurface, SurfaceSpec};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any().unbind(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any().unbind(),
            _ => py.None(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn chart_kind(name: &str) -> PyResult<ChartKind> {
    match name {
        "y" | "inverted_y" => Ok(ChartKind::InvertedY),
        "z" | "corrected_z" => Ok(ChartKind::CorrectedZ),
        "x" | "graph_x" => Ok(ChartKind::GraphX),
        other => Err(err(format!("unknown chart '{other}'"))),
    }
}

fn formula(name: &str) -> PyResult<MassFormula> {
    match name {
        "standard_adm" | "standard" => Ok(MassFormula::StandardAdm),
        "lee_parker" => Ok(MassFormula::LeeParker),
        other => Err(err(format!("unknown formula '{other}'"))),
    }
}

/// A graph hypersurface `x_{n+1} = f(x)` through the origin.
#[pyclass(name = "Surface", frozen)]
struct PySurface {
    inner: GraphSurface,
}

#[pymethods]
impl PySurface {
    /// One of `flat`, `sphere`, `quartic_x1`, `cubic_x1`.
    #[staticmethod]
    fn builtin(name: &str, n: usize) -> PyResult<Self> {
        Ok(PySurface {
            inner: GraphSurface::builtin(name, n).map_err(err)?,
        })
    }

    /// Surface description in the JSON file format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: SurfaceSpec = serde_json::from_str(text).map_err(err)?;
        Ok(PySurface {
            inner: spec.build().map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    /// `(H, A3)` at the origin as strings.
    fn umbilical_data(&self) -> PyResult<(String, String)> {
        let u = umbilical_decompose(&self.inner.jet(3, 0).map_err(err)?).map_err(err)?;
        Ok((u.h.to_string(), u.part(3).to_string()))
    }

    /// Residuals of the three identities for `rho` at `x`.
    fn rho_residuals(&self, x: Vec<f64>) -> PyResult<[f64; 3]> {
        self.inner.verify_rho_identities(&x).map_err(err)
    }

    /// Scalar curvature of `rho^{-2} g` at the surface point over `x`.
    fn conformal_scalar(&self, x: Vec<f64>) -> PyResult<f64> {
        conformal_scalar_rs(&self.inner, &x).map_err(err)
    }

    /// Low-order curvature coefficients, `C(theta)` and the integral identity.
    #[pyo3(signature = (order = None))]
    fn expansion(&self, py: Python<'_>, order: Option<u32>) -> PyResult<Py<PyAny>> {
        let jet = self.inner.jet(order.unwrap_or(6), 0).map_err(err)?;
        to_py(py, &expansion_coefficients(&jet).map_err(err)?.to_json())
    }

    fn c_theta(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let u = umbilical_decompose(&self.inner.jet(3, 0).map_err(err)?).map_err(err)?;
        to_py(py, &series_json(&c_theta(&u.part(3)).map_err(err)?))
    }

    /// `(int C, (n-6) int [(n-1) A3^2 + 3|grad A3|^2])` in units of `|S^{n-1}|`.
    fn integral_identity(&self) -> PyResult<(String, String)> {
        let u = umbilical_decompose(&self.inner.jet(3, 0).map_err(err)?).map_err(err)?;
        let (l, r) = integrated_identity(&u.part(3)).map_err(err)?;
        Ok((l.to_string(), r.to_string()))
    }

    /// Leading order `k` of the curvature near the inversion point and the
    /// integrability verdict.
    #[pyo3(signature = (order = None))]
    fn integrability(&self, order: Option<u32>) -> PyResult<(Option<i32>, String)> {
        let d = order.unwrap_or(6);
        let lead = leading_order_of_r(&self.inner.jet(d, 0).map_err(err)?, d as i32 - 2).map_err(err)?;
        let k = if lead.is_zero { None } else { Some(lead.k) };
        Ok((k, classify_integrability(self.inner.n(), &lead).as_str().to_string()))
    }

    /// `g_hat` components at a chart point.
    fn ghat_components(&self, chart: &str, p: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let c = Chart::for_surface(&self.inner, chart_kind(chart)?).map_err(err)?;
        let g = ghat_components_rs(&self.inner, &c, &p).map_err(err)?;
        Ok(g.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    /// Decay fit of `g_hat - delta` over the given radii.
    #[pyo3(signature = (chart, radii, seed = None))]
    fn decay(&self, py: Python<'_>, chart: &str, radii: Vec<f64>, seed: Option<u64>) -> PyResult<Py<PyAny>> {
        let c = Chart::for_surface(&self.inner, chart_kind(chart)?).map_err(err)?;
        let fit = decay_order_estimate(&self.inner, &c, &radii, seed.unwrap_or(0)).map_err(err)?;
        let mut v = serde_json::to_value(&fit).map_err(err)?;
        v["tau"] = fit.tau_json();
        to_py(py, &v)
    }

    /// Mass flux at radius `r`.
    #[pyo3(signature = (chart, formula_name, r, degree = None))]
    fn adm_mass(&self, chart: &str, formula_name: &str, r: f64, degree: Option<usize>) -> PyResult<f64> {
        let end = SurfaceEnd::new(&self.inner, chart_kind(chart)?).map_err(err)?;
        mass_at(&end, formula_name, r, degree)
    }

    fn __repr__(&self) -> String {
        format!("Surface(name={:?}, n={})", self.inner.name, self.inner.n())
    }
}

fn mass_at(metric: &dyn AsymptoticMetric, formula_name: &str, r: f64, degree: Option<usize>) -> PyResult<f64> {
    let n = metric.dim();
    let rule = SphereRule::new(n, degree.unwrap_or_else(|| default_quad_degree(n)));
    Ok(adm_mass(metric, formula(formula_name)?, r, &rule).map_err(err)?.value)
}

/// Mass flux of the Schwarzschild slice at radius `r`.
#[pyfunction]
#[pyo3(signature = (m, r, formula_name = "standard_adm", n = 3, degree = None))]
fn schwarzschild_mass(m: f64, r: f64, formula_name: &str, n: usize, degree: Option<usize>) -> PyResult<f64> {
    if n < 3 {
        return Err(err("n must be at least 3"));
    }
    mass_at(&Schwarzschild { n, m }, formula_name, r, degree)
}

/// Fits `value = m_inf + a r^{-p}`.
#[pyfunction]
fn extrapolate_mass(py: Python<'_>, radii: Vec<f64>, values: Vec<f64>) -> PyResult<Py<PyAny>> {
    let e = extrapolate(&radii, &values).ok_or_else(|| err("need matching radii and values, at least two"))?;
    to_py(py, &serde_json::to_value(e).map_err(err)?)
}

/// Exact cancellation report for the radial mass integrand.
#[pyfunction]
#[pyo3(signature = (n, chart = "z", kmax = 6))]
fn symbolic_mass_cancellation(py: Python<'_>, n: usize, chart: &str, kmax: usize) -> PyResult<Py<PyAny>> {
    let rep = cancellation_rs(n, chart_kind(chart)?, kmax).map_err(err)?;
    to_py(py, &serde_json::to_value(rep).map_err(err)?)
}

/// Runs the command-line front end with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    umbilic::cli::run(std::iter::once("umbilic".to_string()).chain(args))
}

#[pymodule]
fn umbilic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySurface>()?;
    m.add_function(wrap_pyfunction!(schwarzschild_mass, m)?)?;
    m.add_function(wrap_pyfunction!(extrapolate_mass, m)?)?;
    m.add_function(wrap_pyfunction!(symbolic_mass_cancellation, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
