//! Product quadrature on `S^{n-1}`.
//!
//! `theta = (cos phi, sin phi * omega)` with `omega` on `S^{n-2}` and
//! `dsigma_{n-1} = sin^{n-2} phi dphi dsigma_{n-2}`. In `t = cos phi` the
//! polar measure is `(1 - t^2)^{(n-3)/2} dt`, integrated by Gauss-Gegenbauer
//! nodes (Golub-Welsch); the last circle uses the trapezoid rule. The rule is
//! exact for polynomials of degree `<= degree` in `theta`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::obstruction::sphere_area;

#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    /// Ambient dimension `n` (the sphere is `S^{n-1}`).
    pub n: usize,
    pub degree: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Gauss rule for the weight `(1 - t^2)^a` on `[-1, 1]` with `m` nodes.
pub fn gauss_gegenbauer(m: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    // Three-term recurrence of the symmetric Jacobi family: zero diagonal,
    // off-diagonal^2 = k(k+2a)/((2k+2a+1)(2k+2a-1)).
    let mut jac = DMatrix::zeros(m, m);
    for k in 1..m {
        let kf = k as f64;
        let b = (kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a + 1.0) * (2.0 * kf + 2.0 * a - 1.0))).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let mu0 = gegenbauer_mass(a);
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Enforce the exact symmetry of the rule.
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let t = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-t, w);
        pairs[j] = (t, w);
    }
    if m % 2 == 1 {
        pairs[m / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// `int_{-1}^{1} (1 - t^2)^a dt` for `a` a nonnegative half-integer.
fn gegenbauer_mass(a: f64) -> f64 {
    if a < 0.25 {
        return if a.abs() < 1e-12 { 2.0 } else { std::f64::consts::PI };
    }
    if (a - 0.5).abs() < 1e-12 {
        return std::f64::consts::FRAC_PI_2;
    }
    gegenbauer_mass(a - 1.0) * 2.0 * a / (2.0 * a + 1.0)
}

impl SphereRule {
    /// Rule on `S^{n-1}` exact through polynomial degree `degree`.
    pub fn new(n: usize, degree: usize) -> Self {
        assert!(n >= 2, "sphere rules need n >= 2");
        let m_circle = degree + 1;
        let mut nodes: Vec<Vec<f64>> = (0..m_circle)
            .map(|j| {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / m_circle as f64;
                vec![phi.cos(), phi.sin()]
            })
            .collect();
        let mut weights = vec![2.0 * std::f64::consts::PI / m_circle as f64; m_circle];
        for dim in 3..=n {
            // Lift S^{dim-2} to S^{dim-1}.
            let m = degree / 2 + 1;
            let (ts, ws) = gauss_gegenbauer(m, (dim as f64 - 3.0) / 2.0);
            let mut next_nodes = Vec::with_capacity(nodes.len() * m);
            let mut next_weights = Vec::with_capacity(nodes.len() * m);
            for (t, w) in ts.iter().zip(&ws) {
                let s = (1.0 - t * t).max(0.0).sqrt();
                for (omega, wo) in nodes.iter().zip(&weights) {
                    let mut v = Vec::with_capacity(dim);
                    v.push(*t);
                    v.extend(omega.iter().map(|o| s * o));
                    next_nodes.push(v);
                    next_weights.push(w * wo);
                }
            }
            nodes = next_nodes;
            weights = next_weights;
        }
        SphereRule {
            n,
            degree,
            nodes,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// `int_{S^{n-1}} f dsigma`; evaluations run in parallel, the reduction
    /// is a fixed pairwise tree.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let vals: Vec<f64> = self
            .nodes
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(x, w)| w * f(x))
            .collect();
        pairwise_sum(&vals)
    }

    /// Mean value over the sphere.
    pub fn mean<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.integrate(f) / sphere_area(self.n)
    }
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2..=8 => v.iter().sum(),
        len => {
            let (a, b) = v.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
