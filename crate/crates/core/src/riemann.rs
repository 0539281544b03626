//! Finite-difference Christoffel symbols and scalar curvature of a metric
//! given as a black-box field of matrices.

use nalgebra::DMatrix;

/// A Riemannian metric in some coordinate chart.
pub trait MetricField: Sync {
    fn dim(&self) -> usize;
    fn metric(&self, p: &[f64]) -> DMatrix<f64>;
}

impl<F> MetricField for (usize, F)
where
    F: Fn(&[f64]) -> DMatrix<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.0
    }

    fn metric(&self, p: &[f64]) -> DMatrix<f64> {
        (self.1)(p)
    }
}

fn shifted(p: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut q = p.to_vec();
    for &(i, d) in moves {
        q[i] += d;
    }
    q
}

/// Central first derivatives `d_k g` with step `h`.
pub fn metric_gradient(m: &dyn MetricField, p: &[f64], h: f64) -> Vec<DMatrix<f64>> {
    (0..m.dim())
        .map(|k| {
            let plus = m.metric(&shifted(p, &[(k, h)]));
            let minus = m.metric(&shifted(p, &[(k, -h)]));
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Metric, first and second derivatives at a point.
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub ddg: Vec<Vec<DMatrix<f64>>>,
}

impl MetricJet {
    pub fn sample(m: &dyn MetricField, p: &[f64], h: f64) -> Self {
        let n = m.dim();
        let g = m.metric(p);
        let dg = metric_gradient(m, p, h);
        let mut ddg = vec![vec![DMatrix::zeros(n, n); n]; n];
        for k in 0..n {
            let plus = m.metric(&shifted(p, &[(k, h)]));
            let minus = m.metric(&shifted(p, &[(k, -h)]));
            ddg[k][k] = (plus + minus - &g * 2.0) / (h * h);
            for l in (k + 1)..n {
                let pp = m.metric(&shifted(p, &[(k, h), (l, h)]));
                let pm = m.metric(&shifted(p, &[(k, h), (l, -h)]));
                let mp = m.metric(&shifted(p, &[(k, -h), (l, h)]));
                let mm = m.metric(&shifted(p, &[(k, -h), (l, -h)]));
                let d = (pp - pm - mp + mm) / (4.0 * h * h);
                ddg[k][l] = d.clone();
                ddg[l][k] = d;
            }
        }
        MetricJet { g, dg, ddg }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

/// `Gamma[k][i][j] = Gamma^k_{ij}` from the metric and its first derivatives.
pub fn christoffel(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = g_inv.nrows();
    let lowered = lowered_christoffel(dg);
    (0..n)
        .map(|k| {
            let mut gk = DMatrix::zeros(n, n);
            for m in 0..n {
                gk += &lowered[m] * g_inv[(k, m)];
            }
            gk
        })
        .collect()
}

/// `Gamma_{m i j} = (d_i g_mj + d_j g_mi - d_m g_ij) / 2`.
fn lowered_christoffel(dg: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = dg.len();
    (0..n)
        .map(|m| DMatrix::from_fn(n, n, |i, j| 0.5 * (dg[i][(m, j)] + dg[j][(m, i)] - dg[m][(i, j)])))
        .collect()
}

/// Scalar curvature `g^{ij} R_ij` with
/// `R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik`.
pub fn scalar_curvature(jet: &MetricJet) -> Option<f64> {
    let n = jet.dim();
    let g_inv = jet.g.clone().try_inverse()?;
    let gamma = christoffel(&g_inv, &jet.dg);
    // d_l Gamma^k_ij = d_l(g^km) Gamma_mij + g^km d_l Gamma_mij
    let lowered = lowered_christoffel(&jet.dg);
    let d_gamma: Vec<Vec<DMatrix<f64>>> = (0..n)
        .map(|l| {
            let d_inv = -(&g_inv * &jet.dg[l] * &g_inv);
            let d_lowered: Vec<DMatrix<f64>> = (0..n)
                .map(|m| {
                    DMatrix::from_fn(n, n, |i, j| {
                        0.5 * (jet.ddg[l][i][(m, j)] + jet.ddg[l][j][(m, i)]
                            - jet.ddg[l][m][(i, j)])
                    })
                })
                .collect();
            (0..n)
                .map(|k| {
                    let mut out = DMatrix::zeros(n, n);
                    for m in 0..n {
                        out += &lowered[m] * d_inv[(k, m)] + &d_lowered[m] * g_inv[(k, m)];
                    }
                    out
                })
                .collect()
        })
        .collect();
    let mut scalar = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut ricci = 0.0;
            for k in 0..n {
                ricci += d_gamma[k][k][(i, j)] - d_gamma[j][k][(i, k)];
                for l in 0..n {
                    ricci += gamma[k][(k, l)] * gamma[l][(i, j)] - gamma[k][(j, l)] * gamma[l][(i, k)];
                }
            }
            scalar += g_inv[(i, j)] * ricci;
        }
    }
    Some(scalar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_metric_has_zero_curvature() {
        let m = (3usize, |_: &[f64]| DMatrix::<f64>::identity(3, 3));
        let jet = MetricJet::sample(&m, &[0.3, 0.1, -0.2], 1e-3);
        assert!(scalar_curvature(&jet).unwrap().abs() < 1e-12);
    }

    #[test]
    fn round_sphere_in_stereographic_coordinates() {
        // 4/(1+|p|^2)^2 delta is the unit 2-sphere: R = 2.
        let m = (2usize, |p: &[f64]| {
            let s = 1.0 + p[0] * p[0] + p[1] * p[1];
            DMatrix::<f64>::identity(2, 2) * (4.0 / (s * s))
        });
        let jet = MetricJet::sample(&m, &[0.4, -0.7], 1e-4);
        assert!((scalar_curvature(&jet).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn hyperbolic_half_space() {
        // p_n^{-2} delta on the upper half space of dimension 3: R = -6.
        let m = (3usize, |p: &[f64]| DMatrix::<f64>::identity(3, 3) / (p[2] * p[2]));
        let jet = MetricJet::sample(&m, &[0.2, 0.1, 1.3], 1e-4);
        assert!((scalar_curvature(&jet).unwrap() + 6.0).abs() < 1e-5);
    }
}
