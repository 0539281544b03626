//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! A polynomial lives in `Q[x_1..x_n; p_1..p_k]`: `n` spatial variables that
//! carry degree, followed by `k` parameters (for example the mean curvature
//! `H`) that are treated as degree zero for homogeneity and truncation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::PolyError;

/// Exact coefficient field.
pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    // Ratio<BigInt>::to_f64 handles huge numerators/denominators gracefully.
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exponent vector: spatial exponents first, then parameter exponents.
///
/// Ordered by total degree over all variables, then lexicographically, so the
/// last key of a `BTreeMap<Monomial, _>` is the graded-lex leading term.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub SmallVec<[u8; 12]>);

impl Monomial {
    pub fn one(len: usize) -> Self {
        Monomial(SmallVec::from_elem(0, len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn total(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn spatial_degree(&self, nvars: usize) -> u32 {
        self.0[..nvars].iter().map(|&e| e as u32).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a.checked_add(*b).expect("monomial exponent overflow"))
                .collect(),
        )
    }

    /// `self / other` when every exponent of `other` is dominated.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = SmallVec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            out.push(a.checked_sub(*b)?);
        }
        Some(Monomial(out))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total()
            .cmp(&other.total())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MultiPoly {
    nvars: usize,
    nparams: usize,
    terms: BTreeMap<Monomial, Rational>,
}

impl MultiPoly {
    pub fn zero(nvars: usize, nparams: usize) -> Self {
        MultiPoly {
            nvars,
            nparams,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, nparams: usize, c: Rational) -> Self {
        let mut p = Self::zero(nvars, nparams);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(nvars + nparams), c);
        }
        p
    }

    pub fn one(nvars: usize, nparams: usize) -> Self {
        Self::constant(nvars, nparams, Rational::one())
    }

    /// The spatial coordinate `x_{i+1}`.
    pub fn var(nvars: usize, nparams: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index out of range");
        let mut m = Monomial::one(nvars + nparams);
        m.0[i] = 1;
        Self::monomial(nvars, nparams, m, Rational::one())
    }

    /// The parameter `p_{j+1}` (degree zero).
    pub fn param(nvars: usize, nparams: usize, j: usize) -> Self {
        assert!(j < nparams, "parameter index out of range");
        let mut m = Monomial::one(nvars + nparams);
        m.0[nvars + j] = 1;
        Self::monomial(nvars, nparams, m, Rational::one())
    }

    pub fn monomial(nvars: usize, nparams: usize, m: Monomial, c: Rational) -> Self {
        assert_eq!(m.len(), nvars + nparams, "exponent vector length");
        let mut p = Self::zero(nvars, nparams);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    /// `|x|^2 = x_1^2 + ... + x_n^2`.
    pub fn radius_squared(nvars: usize, nparams: usize) -> Self {
        let mut p = Self::zero(nvars, nparams);
        for i in 0..nvars {
            let mut m = Monomial::one(nvars + nparams);
            m.0[i] = 2;
            p.terms.insert(m, Rational::one());
        }
        p
    }

    pub fn from_terms<I>(nvars: usize, nparams: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        let mut p = Self::zero(nvars, nparams);
        for (exp, c) in terms {
            if exp.len() != nvars + nparams {
                return Err(PolyError::DimensionMismatch {
                    expected: nvars + nparams,
                    found: exp.len(),
                });
            }
            let mut m = SmallVec::with_capacity(exp.len());
            for e in exp {
                m.push(u8::try_from(e).map_err(|_| PolyError::ExponentTooLarge(e))?);
            }
            p.add_term(Monomial(m), c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn nparams(&self) -> usize {
        self.nparams
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub(crate) fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_same_ring(&self, other: &Self) {
        assert!(
            self.nvars == other.nvars && self.nparams == other.nparams,
            "polynomial ring mismatch: ({}, {}) vs ({}, {})",
            self.nvars,
            self.nparams,
            other.nvars,
            other.nparams
        );
    }

    pub fn same_ring(&self, other: &Self) -> bool {
        self.nvars == other.nvars && self.nparams == other.nparams
    }

    /// Largest spatial degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms
            .keys()
            .map(|m| m.spatial_degree(self.nvars))
            .max()
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms
            .keys()
            .map(|m| m.spatial_degree(self.nvars))
            .min()
    }

    /// Homogeneous in the spatial variables (the zero polynomial counts).
    pub fn is_homogeneous(&self) -> bool {
        match (self.min_degree(), self.degree()) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.degree().is_none_or(|d| d == 0)
    }

    /// Constant in every variable, including parameters.
    pub fn as_rational(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.0.iter().all(|&e| e == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn homogeneous_part(&self, k: u32) -> Self {
        let mut p = Self::zero(self.nvars, self.nparams);
        for (m, c) in &self.terms {
            if m.spatial_degree(self.nvars) == k {
                p.terms.insert(m.clone(), c.clone());
            }
        }
        p
    }

    /// Drops every term of spatial degree above `max_degree`.
    pub fn truncate(&self, max_degree: u32) -> Self {
        let mut p = Self::zero(self.nvars, self.nparams);
        for (m, c) in &self.terms {
            if m.spatial_degree(self.nvars) <= max_degree {
                p.terms.insert(m.clone(), c.clone());
            }
        }
        p
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars, self.nparams);
        }
        let mut p = self.clone();
        for v in p.terms.values_mut() {
            *v *= c;
        }
        p
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same_ring(other);
        let mut p = self.clone();
        for (m, c) in &other.terms {
            p.add_term(m.clone(), c.clone());
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_same_ring(other);
        let mut p = self.clone();
        for (m, c) in &other.terms {
            p.add_term(m.clone(), -c.clone());
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_truncated(other, u32::MAX)
    }

    /// Product keeping only terms of spatial degree `<= max_degree`.
    pub fn mul_truncated(&self, other: &Self, max_degree: u32) -> Self {
        self.check_same_ring(other);
        let mut p = Self::zero(self.nvars, self.nparams);
        let rhs: Vec<(u32, &Monomial, &Rational)> = other
            .terms
            .iter()
            .map(|(m, c)| (m.spatial_degree(self.nvars), m, c))
            .collect();
        for (ma, ca) in &self.terms {
            let da = ma.spatial_degree(self.nvars);
            if da > max_degree {
                continue;
            }
            for &(db, mb, cb) in &rhs {
                if da + db > max_degree {
                    continue;
                }
                p.add_term(ma.mul(mb), ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.nvars, self.nparams);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Partial derivative with respect to variable `i` (spatial or parameter
    /// index into the full exponent vector).
    pub fn derivative(&self, i: usize) -> Self {
        let mut p = Self::zero(self.nvars, self.nparams);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.0[i] = e - 1;
            p.add_term(dm, c * rat_int(e as i64));
        }
        p
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.nvars).map(|i| self.derivative(i)).collect()
    }

    pub fn hessian(&self) -> Vec<Vec<Self>> {
        let g = self.gradient();
        g.iter()
            .map(|gi| (0..self.nvars).map(|j| gi.derivative(j)).collect())
            .collect()
    }

    /// Euclidean Laplacian in the spatial variables.
    pub fn laplacian(&self) -> Self {
        let mut p = Self::zero(self.nvars, self.nparams);
        for i in 0..self.nvars {
            p = p.add(&self.derivative(i).derivative(i));
        }
        p
    }

    /// `x . grad(P)`; equals `k P` on the degree-`k` part (Euler).
    pub fn euler(&self) -> Self {
        let mut p = Self::zero(self.nvars, self.nparams);
        for (m, c) in &self.terms {
            let d = m.spatial_degree(self.nvars);
            p.add_term(m.clone(), c * rat_int(d as i64));
        }
        p
    }

    /// Exact quotient `self / divisor`, or `None` when the division leaves a
    /// remainder. Leading-term division in graded-lex order.
    pub fn divexact(&self, divisor: &Self) -> Result<Option<Self>, PolyError> {
        self.check_same_ring(divisor);
        let (lead_m, lead_c) = match divisor.terms.iter().next_back() {
            Some((m, c)) => (m.clone(), c.clone()),
            None => return Err(PolyError::DivisionByZero),
        };
        let mut rem = self.clone();
        let mut quotient = Self::zero(self.nvars, self.nparams);
        while let Some((m, c)) = rem.terms.iter().next_back() {
            let qm = match m.div(&lead_m) {
                Some(qm) => qm,
                None => return Ok(None),
            };
            let qc = c / &lead_c;
            for (dm, dc) in &divisor.terms {
                rem.add_term(qm.mul(dm), -(&qc * dc));
            }
            quotient.add_term(qm, qc);
        }
        Ok(Some(quotient))
    }

    /// Evaluate at `x` (spatial) and `params`.
    pub fn eval_f64(&self, x: &[f64], params: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nvars);
        assert_eq!(params.len(), self.nparams);
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = rat_to_f64(c);
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    let v = if i < self.nvars { x[i] } else { params[i - self.nvars] };
                    t *= v.powi(e as i32);
                }
            }
            acc += t;
        }
        acc
    }

    pub fn eval_exact(&self, x: &[Rational], params: &[Rational]) -> Rational {
        assert_eq!(x.len(), self.nvars);
        assert_eq!(params.len(), self.nparams);
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    let v = if i < self.nvars { &x[i] } else { &params[i - self.nvars] };
                    t *= num_traits::pow(v.clone(), e as usize);
                }
            }
            acc += t;
        }
        acc
    }

    /// Replaces every parameter by a rational value.
    pub fn substitute_params(&self, params: &[Rational]) -> Self {
        assert_eq!(params.len(), self.nparams);
        let mut p = Self::zero(self.nvars, 0);
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (j, v) in params.iter().enumerate() {
                let e = m.0[self.nvars + j];
                if e > 0 {
                    t *= num_traits::pow(v.clone(), e as usize);
                }
            }
            p.add_term(Monomial(m.0[..self.nvars].iter().copied().collect()), t);
        }
        p
    }

    /// Re-embeds into a ring with `nparams` parameters; existing parameters
    /// keep their indices, new ones are appended.
    pub fn with_params(&self, nparams: usize) -> Self {
        assert!(nparams >= self.nparams, "cannot drop parameters");
        let mut p = Self::zero(self.nvars, nparams);
        for (m, c) in &self.terms {
            let mut e: SmallVec<[u8; 12]> = m.0.clone();
            e.extend(std::iter::repeat_n(0u8, nparams - self.nparams));
            p.terms.insert(Monomial(e), c.clone());
        }
        p
    }

    /// Treats the spatial-degree-zero part as a polynomial in the parameters
    /// alone (ring with zero spatial variables).
    pub fn constant_part(&self) -> Self {
        let mut p = Self::zero(0, self.nparams);
        for (m, c) in &self.terms {
            if m.spatial_degree(self.nvars) == 0 {
                p.terms
                    .insert(Monomial(m.0[self.nvars..].iter().copied().collect()), c.clone());
            }
        }
        p
    }

    /// Embeds a parameter-only polynomial (zero spatial variables) as a
    /// spatial constant of this ring shape.
    pub fn lift_constant(nvars: usize, c: &MultiPoly) -> Self {
        assert_eq!(c.nvars, 0, "expected a parameter-only polynomial");
        let mut p = Self::zero(nvars, c.nparams);
        for (m, v) in &c.terms {
            let mut e: SmallVec<[u8; 12]> = SmallVec::from_elem(0, nvars);
            e.extend(m.0.iter().copied());
            p.terms.insert(Monomial(e), v.clone());
        }
        p
    }

    /// Largest absolute coefficient, as f64; a cheap size measure.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms
            .values()
            .map(|c| rat_to_f64(&c.abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_json_terms(&self) -> Vec<TermJson> {
        self.terms
            .iter()
            .map(|(m, c)| TermJson {
                exp: m.0.iter().map(|&e| e as u32).collect(),
                num: c.numer().to_string(),
                den: c.denom().to_string(),
            })
            .collect()
    }

    pub fn from_json_terms(
        nvars: usize,
        nparams: usize,
        terms: &[TermJson],
    ) -> Result<Self, PolyError> {
        let mut parsed = Vec::with_capacity(terms.len());
        for t in terms {
            let num: BigInt = t
                .num
                .trim()
                .parse()
                .map_err(|_| PolyError::Parse(format!("bad numerator {:?}", t.num)))?;
            let den: BigInt = t
                .den
                .trim()
                .parse()
                .map_err(|_| PolyError::Parse(format!("bad denominator {:?}", t.den)))?;
            if den.is_zero() {
                return Err(PolyError::Parse("zero denominator".into()));
            }
            // Short exponent vectors (spatial only) get zero parameter powers.
            let mut exp = t.exp.clone();
            if exp.len() == nvars && nparams > 0 {
                exp.extend(std::iter::repeat_n(0, nparams));
            }
            parsed.push((exp, Rational::new(num, den)));
        }
        Self::from_terms(nvars, nparams, parsed)
    }
}

/// One entry of the polynomial JSON format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub num: String,
    pub den: String,
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let a = c.abs();
            let is_unit = m.0.iter().all(|&e| e == 0);
            if !a.is_one() || is_unit {
                write!(f, "{a}")?;
                if !is_unit {
                    write!(f, "*")?;
                }
            }
            let mut factors = Vec::new();
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let name = if i < self.nvars {
                    format!("x{}", i + 1)
                } else if self.nparams == 1 {
                    "H".to_string()
                } else {
                    format!("p{}", i - self.nvars + 1)
                };
                factors.push(if e == 1 { name } else { format!("{name}^{e}") });
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: usize, i: usize) -> MultiPoly {
        MultiPoly::var(n, 0, i)
    }

    #[test]
    fn self_division_is_one() {
        let p = x(2, 0).pow(2).add(&x(2, 1).pow(2));
        assert_eq!(p.divexact(&p).unwrap(), Some(MultiPoly::one(2, 0)));
    }

    #[test]
    fn constructed_product_divides() {
        let r2 = MultiPoly::radius_squared(6, 0);
        let p = r2.mul(&x(6, 0));
        assert_eq!(p.divexact(&r2).unwrap(), Some(x(6, 0)));
    }

    #[test]
    fn cube_not_divisible_by_radius() {
        // Oracle: long division in lex order x1 > x2 > ... by hand. The first
        // step gives x1^3 - x1 * r^2 = -x1 (x2^2 + ... + x6^2), whose leading
        // term x1 x2^2 is not a multiple of x1^2: nonzero remainder.
        let r2 = MultiPoly::radius_squared(6, 0);
        let p = x(6, 0).pow(3);
        assert_eq!(p.divexact(&r2).unwrap(), None);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let p = x(3, 0);
        assert!(matches!(
            p.divexact(&MultiPoly::zero(3, 0)),
            Err(PolyError::DivisionByZero)
        ));
    }

    #[test]
    fn parameters_do_not_count_in_degree() {
        let h = MultiPoly::param(3, 1, 0);
        let p = h.mul(&MultiPoly::radius_squared(3, 1));
        assert_eq!(p.degree(), Some(2));
        assert!(p.is_homogeneous());
        assert_eq!(p.divexact(&MultiPoly::radius_squared(3, 1)).unwrap(), Some(h));
    }

    #[test]
    fn json_round_trip_keeps_parameter_index() {
        let h = MultiPoly::param(2, 1, 0);
        let p = h.mul(&x(2, 0).with_params(1)).scale(&rat(-3, 7));
        let js = p.to_json_terms();
        assert_eq!(js[0].exp, vec![1, 0, 1]);
        let back = MultiPoly::from_json_terms(2, 1, &js).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn laplacian_of_radius_squared() {
        let r2 = MultiPoly::radius_squared(5, 0);
        assert_eq!(r2.laplacian(), MultiPoly::constant(5, 0, rat_int(10)));
    }
}
