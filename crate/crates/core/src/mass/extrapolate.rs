//! Fits `m(r) = m_inf + a r^{-p}` to a sweep of mass estimates.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for an exact fit.
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - slope * x - intercept;
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub m_inf: f64,
    /// Decay exponent `p`; `None` when the data carry no decaying part.
    pub decay_exponent: Option<f64>,
    pub amplitude: f64,
    /// `R^2` of the fit in the values.
    pub fit_quality: f64,
}

/// Given `p`, `(m_inf, a)` solve a linear least-squares problem; the best `p`
/// minimises the residual. Returns `None` for fewer than two points.
pub fn extrapolate(radii: &[f64], values: &[f64]) -> Option<Extrapolation> {
    if radii.len() < 2 || radii.len() != values.len() {
        return None;
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let spread: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if spread <= (1e-14 * scale.max(f64::MIN_POSITIVE)).powi(2) * k {
        return Some(Extrapolation {
            m_inf: mean,
            decay_exponent: None,
            amplitude: 0.0,
            fit_quality: 1.0,
        });
    }
    let fit_at = |p: f64| {
        let xs: Vec<f64> = radii.iter().map(|r| r.powf(-p)).collect();
        let f = linear_fit(&xs, values);
        let sse: f64 = xs
            .iter()
            .zip(values)
            .map(|(x, y)| {
                let e = y - f.slope * x - f.intercept;
                e * e
            })
            .sum();
        (sse, f)
    };
    // Coarse scan in log p, then golden-section refinement.
    let grid: Vec<f64> = (0..=160).map(|i| 10f64.powf(-2.0 + 3.0 * i as f64 / 160.0)).collect();
    let mut best = 0;
    let mut best_sse = f64::INFINITY;
    for (i, &p) in grid.iter().enumerate() {
        let (sse, _) = fit_at(p);
        if sse < best_sse {
            best_sse = sse;
            best = i;
        }
    }
    let mut lo = grid[best.saturating_sub(1)].ln();
    let mut hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    for _ in 0..200 {
        if fit_at(c.exp()).0 < fit_at(d.exp()).0 {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - g * (hi - lo);
        d = lo + g * (hi - lo);
        if hi - lo < 1e-13 {
            break;
        }
    }
    let p = (0.5 * (lo + hi)).exp();
    let (sse, f) = fit_at(p);
    Some(Extrapolation {
        m_inf: f.intercept,
        decay_exponent: Some(p),
        amplitude: f.slope,
        fit_quality: 1.0 - sse / spread,
    })
}
