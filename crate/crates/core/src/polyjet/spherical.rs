//! Formal sums `sum r^m P(x)` with `P` homogeneous, graded by total order
//! `m + deg P`. A term of total order `k` is the function `r^k P(theta)` on
//! rays, so these series model expansions in `r = |x|` whose coefficients are
//! functions on the unit sphere.
//!
//! Canonical form: every `P` is stripped of all `|x|^2` factors (the radial
//! power absorbs them) and like terms are merged. Because `|x|^2` is
//! irreducible for `n >= 2`, two series represent the same function exactly
//! when their canonical term lists agree.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::poly::{rat_int, MultiPoly, Rational};
use super::PolyError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SphericalTerm {
    /// Power of `r = |x|`; any integer.
    pub radial: i32,
    /// Homogeneous polynomial, not divisible by `|x|^2` in canonical form.
    pub poly: MultiPoly,
}

impl SphericalTerm {
    pub fn degree(&self) -> i32 {
        self.poly.degree().unwrap_or(0) as i32
    }

    pub fn total_order(&self) -> i32 {
        self.radial + self.degree()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SphericalSeries {
    nvars: usize,
    nparams: usize,
    /// Truncation: the series is exact through this total order.
    order: i32,
    /// Sorted by (total order, degree parity); at most one term per key.
    terms: Vec<SphericalTerm>,
}

fn strip_radius(mut radial: i32, mut p: MultiPoly, r2: &MultiPoly) -> (i32, MultiPoly) {
    while p.degree().is_some_and(|d| d >= 2) {
        match p.divexact(r2).expect("|x|^2 is nonzero") {
            Some(q) => {
                p = q;
                radial += 2;
            }
            None => break,
        }
    }
    (radial, p)
}

impl SphericalSeries {
    pub fn zero(nvars: usize, nparams: usize, order: i32) -> Self {
        SphericalSeries {
            nvars,
            nparams,
            order,
            terms: Vec::new(),
        }
    }

    pub fn one(nvars: usize, nparams: usize, order: i32) -> Self {
        Self::monomial(0, MultiPoly::one(nvars, nparams), order)
    }

    /// The single term `r^radial * p` (canonicalized).
    pub fn monomial(radial: i32, p: MultiPoly, order: i32) -> Self {
        let (nv, np) = (p.nvars(), p.nparams());
        Self::canonicalize(nv, np, vec![(radial, p)], order)
    }

    /// Normal form of a raw list of `(m, P)` terms; `P` need not be
    /// homogeneous (it is split by degree first).
    pub fn canonicalize(
        nvars: usize,
        nparams: usize,
        raw: Vec<(i32, MultiPoly)>,
        order: i32,
    ) -> Self {
        let r2 = MultiPoly::radius_squared(nvars, nparams);
        let mut pieces = Vec::new();
        for (m, p) in raw {
            assert!(
                p.nvars() == nvars && p.nparams() == nparams,
                "spherical term ring mismatch"
            );
            if p.is_zero() {
                continue;
            }
            let (lo, hi) = (p.min_degree().unwrap(), p.degree().unwrap());
            if lo == hi {
                pieces.push(strip_radius(m, p, &r2));
            } else {
                for d in lo..=hi {
                    let part = p.homogeneous_part(d);
                    if !part.is_zero() {
                        pieces.push(strip_radius(m, part, &r2));
                    }
                }
            }
        }
        Self::merge(nvars, nparams, pieces, order, &r2)
    }

    /// Merges already-stripped pieces; only merged buckets are re-stripped.
    fn merge(
        nvars: usize,
        nparams: usize,
        pieces: Vec<(i32, MultiPoly)>,
        order: i32,
        r2: &MultiPoly,
    ) -> Self {
        let mut buckets: BTreeMap<(i32, i32), Vec<(i32, MultiPoly)>> = BTreeMap::new();
        for (m, p) in pieces {
            if p.is_zero() {
                continue;
            }
            let d = p.degree().unwrap() as i32;
            if m + d > order {
                continue;
            }
            buckets.entry((m + d, d.rem_euclid(2))).or_default().push((m, p));
        }
        let mut terms = Vec::with_capacity(buckets.len());
        for (_, group) in buckets {
            if group.len() == 1 {
                let (m, p) = group.into_iter().next().unwrap();
                terms.push(SphericalTerm { radial: m, poly: p });
                continue;
            }
            let m_min = group.iter().map(|(m, _)| *m).min().unwrap();
            let mut sum = MultiPoly::zero(nvars, nparams);
            for (m, p) in group {
                let lift = ((m - m_min) / 2) as u32;
                sum = if lift == 0 {
                    sum.add(&p)
                } else {
                    sum.add(&p.mul(&r2.pow(lift)))
                };
            }
            if sum.is_zero() {
                continue;
            }
            let (m, p) = strip_radius(m_min, sum, r2);
            terms.push(SphericalTerm { radial: m, poly: p });
        }
        SphericalSeries {
            nvars,
            nparams,
            order,
            terms,
        }
    }

    /// A polynomial read as a series, exact through `order`.
    pub fn from_poly(p: &MultiPoly, order: i32) -> Self {
        let p = if order < 0 {
            MultiPoly::zero(p.nvars(), p.nparams())
        } else {
            p.truncate(order as u32)
        };
        Self::canonicalize(p.nvars(), p.nparams(), vec![(0, p.clone())], order)
    }

    pub fn from_jet(j: &super::Jet) -> Self {
        Self::from_poly(j.poly(), j.order() as i32)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn nparams(&self) -> usize {
        self.nparams
    }

    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn terms(&self) -> &[SphericalTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Lowest total order carrying a nonzero term.
    pub fn lowest_order(&self) -> Option<i32> {
        self.terms.first().map(|t| t.total_order())
    }

    fn low_or_beyond(&self) -> i32 {
        self.lowest_order().unwrap_or(self.order + 1)
    }

    pub fn truncate(&self, order: i32) -> Self {
        let order = order.min(self.order);
        SphericalSeries {
            nvars: self.nvars,
            nparams: self.nparams,
            order,
            terms: self
                .terms
                .iter()
                .filter(|t| t.total_order() <= order)
                .cloned()
                .collect(),
        }
    }

    /// The terms of total order exactly `k`.
    pub fn order_part(&self, k: i32) -> Self {
        SphericalSeries {
            nvars: self.nvars,
            nparams: self.nparams,
            order: k,
            terms: self
                .terms
                .iter()
                .filter(|t| t.total_order() == k)
                .cloned()
                .collect(),
        }
    }

    /// Coefficient of `r^k` as a function on the unit sphere, i.e. a
    /// total-order-0 series.
    pub fn sphere_coefficient(&self, k: i32) -> Self {
        SphericalSeries {
            nvars: self.nvars,
            nparams: self.nparams,
            order: 0,
            terms: self
                .terms
                .iter()
                .filter(|t| t.total_order() == k)
                .map(|t| SphericalTerm {
                    radial: t.radial - k,
                    poly: t.poly.clone(),
                })
                .collect(),
        }
    }

    /// Shifts every term by `r^k` (no canonicalization needed).
    pub fn shift(&self, k: i32) -> Self {
        SphericalSeries {
            nvars: self.nvars,
            nparams: self.nparams,
            order: self.order + k,
            terms: self
                .terms
                .iter()
                .map(|t| SphericalTerm {
                    radial: t.radial + k,
                    poly: t.poly.clone(),
                })
                .collect(),
        }
    }

    fn check(&self, other: &Self) -> Result<(), PolyError> {
        if self.nvars != other.nvars || self.nparams != other.nparams {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars + self.nparams,
                found: other.nvars + other.nparams,
            });
        }
        Ok(())
    }

    pub fn arith(&self, other: &Self, op: SeriesOp) -> Result<Self, PolyError> {
        self.check(other)?;
        let r2 = MultiPoly::radius_squared(self.nvars, self.nparams);
        match op {
            SeriesOp::Add | SeriesOp::Sub => {
                let order = self.order.min(other.order);
                let mut pieces: Vec<(i32, MultiPoly)> = self
                    .terms
                    .iter()
                    .map(|t| (t.radial, t.poly.clone()))
                    .collect();
                for t in &other.terms {
                    let p = if op == SeriesOp::Sub {
                        t.poly.neg()
                    } else {
                        t.poly.clone()
                    };
                    pieces.push((t.radial, p));
                }
                Ok(Self::merge(self.nvars, self.nparams, pieces, order, &r2))
            }
            SeriesOp::Mul => {
                let order = (self.order + other.low_or_beyond())
                    .min(other.order + self.low_or_beyond());
                let mut pieces = Vec::new();
                for a in &self.terms {
                    let ta = a.total_order();
                    for b in &other.terms {
                        if ta + b.total_order() > order {
                            continue;
                        }
                        // |x|^2 is prime, so products of stripped factors stay stripped.
                        pieces.push((a.radial + b.radial, a.poly.mul(&b.poly)));
                    }
                }
                Ok(Self::merge(self.nvars, self.nparams, pieces, order, &r2))
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.arith(other, SeriesOp::Add).expect("series ring mismatch")
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.arith(other, SeriesOp::Sub).expect("series ring mismatch")
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.arith(other, SeriesOp::Mul).expect("series ring mismatch")
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars, self.nparams, self.order);
        }
        SphericalSeries {
            nvars: self.nvars,
            nparams: self.nparams,
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|t| SphericalTerm {
                    radial: t.radial,
                    poly: t.poly.scale(c),
                })
                .collect(),
        }
    }

    /// Multiplies every coefficient by a parameter-only polynomial.
    pub fn scale_poly(&self, c: &MultiPoly) -> Self {
        let lifted = MultiPoly::lift_constant(self.nvars, c);
        let pieces = self
            .terms
            .iter()
            .map(|t| (t.radial, t.poly.mul(&lifted)))
            .collect();
        let r2 = MultiPoly::radius_squared(self.nvars, self.nparams);
        Self::merge(self.nvars, self.nparams, pieces, self.order, &r2)
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    /// Inverse of a series whose lowest-order part is `c r^m` with a nonzero
    /// rational constant `c`. Exact through total order `order - 2m`.
    pub fn invert_unit(&self) -> Result<Self, PolyError> {
        let lead = match self.terms.first() {
            Some(t) => t,
            None => return Err(PolyError::NotInvertible("zero series".into())),
        };
        let low = lead.total_order();
        if self.terms.iter().filter(|t| t.total_order() == low).count() != 1
            || lead.degree() != 0
        {
            return Err(PolyError::NotInvertible(format!(
                "leading part at order {low} is not a constant multiple of r^{low}"
            )));
        }
        let c = lead
            .poly
            .as_rational()
            .filter(|c| !c.is_zero())
            .ok_or_else(|| {
                PolyError::NotInvertible(format!("leading coefficient {} is not a rational", lead.poly))
            })?;
        let m = lead.radial;
        let inv_c = Rational::one() / c;
        // self = c r^m (1 + eps) with eps of relative order >= 1.
        let rel_order = self.order - m;
        let result_order = self.order - 2 * m;
        let eps = SphericalSeries {
            nvars: self.nvars,
            nparams: self.nparams,
            order: rel_order,
            terms: self.terms[1..]
                .iter()
                .map(|t| SphericalTerm {
                    radial: t.radial - m,
                    poly: t.poly.scale(&inv_c),
                })
                .collect(),
        };
        let neg_eps = eps.neg();
        let mut acc = Self::one(self.nvars, self.nparams, rel_order);
        let mut power = acc.clone();
        for _ in 0..rel_order.max(0) {
            power = power.mul(&neg_eps).truncate(rel_order);
            if power.is_zero() {
                break;
            }
            acc = acc.add(&power);
        }
        Ok(acc.shift(-m).scale(&inv_c).truncate(result_order))
    }

    /// Numeric value at `x`, with `r = |x|` substituted.
    pub fn eval_f64(&self, x: &[f64], params: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.terms
            .iter()
            .map(|t| r.powi(t.radial) * t.poly.eval_f64(x, params))
            .sum()
    }

    /// Raw `(m, P)` pairs.
    pub fn raw_terms(&self) -> Vec<(i32, MultiPoly)> {
        self.terms
            .iter()
            .map(|t| (t.radial, t.poly.clone()))
            .collect()
    }
}

/// Euclidean Laplacian of `r^m P` for homogeneous `P` of degree `d`:
/// `m (m + 2d + n - 2) r^(m-2) P + r^m Delta P`.
pub fn radial_laplacian_term(m: i32, p: &MultiPoly) -> Result<SphericalSeries, PolyError> {
    if !p.is_homogeneous() {
        return Err(PolyError::NotHomogeneous);
    }
    let n = p.nvars() as i32;
    let d = p.degree().unwrap_or(0) as i32;
    let radial = p.scale(&rat_int((m * (m + 2 * d + n - 2)) as i64));
    let order = m + d - 2;
    Ok(SphericalSeries::canonicalize(
        p.nvars(),
        p.nparams(),
        vec![(m - 2, radial), (m, p.laplacian())],
        order,
    ))
}
