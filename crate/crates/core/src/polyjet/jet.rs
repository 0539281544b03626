//! Truncated multivariate Taylor jets.

use num_traits::{One, Zero};

use super::poly::{rat_int, MultiPoly, Rational};
use super::PolyError;

/// A polynomial known exactly through spatial degree `order`; everything above
/// is unknown and discarded by every operation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Jet {
    poly: MultiPoly,
    order: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
}

impl Jet {
    pub fn new(poly: MultiPoly, order: u32) -> Self {
        Jet {
            poly: poly.truncate(order),
            order,
        }
    }

    pub fn constant(nvars: usize, nparams: usize, c: Rational, order: u32) -> Self {
        Jet::new(MultiPoly::constant(nvars, nparams, c), order)
    }

    pub fn one(nvars: usize, nparams: usize, order: u32) -> Self {
        Jet::new(MultiPoly::one(nvars, nparams), order)
    }

    pub fn zero(nvars: usize, nparams: usize, order: u32) -> Self {
        Jet::new(MultiPoly::zero(nvars, nparams), order)
    }

    pub fn poly(&self) -> &MultiPoly {
        &self.poly
    }

    pub fn into_poly(self) -> MultiPoly {
        self.poly
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn nvars(&self) -> usize {
        self.poly.nvars()
    }

    pub fn nparams(&self) -> usize {
        self.poly.nparams()
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    fn check(&self, other: &Jet) -> Result<(), PolyError> {
        if !self.poly.same_ring(&other.poly) {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars() + self.nparams(),
                found: other.nvars() + other.nparams(),
            });
        }
        Ok(())
    }

    /// Ring operation modulo terms of degree above the smaller of the two
    /// truncation orders.
    pub fn arith(&self, other: &Jet, op: JetOp) -> Result<Jet, PolyError> {
        self.check(other)?;
        let order = self.order.min(other.order);
        let poly = match op {
            JetOp::Add => self.poly.add(&other.poly).truncate(order),
            JetOp::Sub => self.poly.sub(&other.poly).truncate(order),
            JetOp::Mul => self.poly.mul_truncated(&other.poly, order),
        };
        Ok(Jet { poly, order })
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.arith(other, JetOp::Add).expect("jet ring mismatch")
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.arith(other, JetOp::Sub).expect("jet ring mismatch")
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        self.arith(other, JetOp::Mul).expect("jet ring mismatch")
    }

    pub fn scale(&self, c: &Rational) -> Jet {
        Jet {
            poly: self.poly.scale(c),
            order: self.order,
        }
    }

    pub fn neg(&self) -> Jet {
        self.scale(&-Rational::one())
    }

    /// Multiplies by an exact polynomial (e.g. a parameter or a monomial).
    pub fn mul_poly(&self, p: &MultiPoly) -> Jet {
        Jet {
            poly: self.poly.mul_truncated(p, self.order),
            order: self.order,
        }
    }

    /// Multiplies by `x^shift` in a one-variable jet, raising the order.
    pub fn shift_up(&self, shift: u32) -> Jet {
        assert_eq!(self.nvars(), 1, "shift is defined for univariate jets");
        let mut m = super::poly::Monomial::one(1 + self.nparams());
        m.0[0] = shift as u8;
        let mono = MultiPoly::monomial(1, self.nparams(), m, Rational::one());
        Jet {
            poly: self.poly.mul(&mono),
            order: self.order + shift,
        }
    }

    pub fn truncate(&self, order: u32) -> Jet {
        let order = order.min(self.order);
        Jet {
            poly: self.poly.truncate(order),
            order,
        }
    }

    /// Partial derivative in spatial variable `i`; loses one order.
    pub fn derivative(&self, i: usize) -> Result<Jet, PolyError> {
        if self.order == 0 {
            return Err(PolyError::OrderExhausted);
        }
        Ok(Jet {
            poly: self.poly.derivative(i).truncate(self.order - 1),
            order: self.order - 1,
        })
    }

    pub fn constant_term(&self) -> MultiPoly {
        self.poly.homogeneous_part(0)
    }

    fn unit_tail(&self) -> Result<Jet, PolyError> {
        let c = self.constant_term();
        if c != MultiPoly::one(self.nvars(), self.nparams()) {
            return Err(PolyError::NotUnit(c.to_string()));
        }
        Ok(Jet {
            poly: self.poly.sub(&c),
            order: self.order,
        })
    }

    /// `1/u` for a jet with constant term 1, via the geometric series in `u - 1`.
    pub fn invert_unit(&self) -> Result<Jet, PolyError> {
        let tail = self.unit_tail()?.neg();
        let mut acc = Jet::one(self.nvars(), self.nparams(), self.order);
        let mut power = acc.clone();
        // tail has no constant term, so tail^k vanishes beyond k = order.
        for _ in 0..self.order {
            power = power.mul(&tail);
            if power.is_zero() {
                break;
            }
            acc = acc.add(&power);
        }
        Ok(acc)
    }

    /// `u^e` for a jet with constant term 1 and rational exponent, via the
    /// binomial series.
    pub fn power_unit(&self, exponent: &Rational) -> Result<Jet, PolyError> {
        let tail = self.unit_tail()?;
        let mut acc = Jet::one(self.nvars(), self.nparams(), self.order);
        let mut power = acc.clone();
        let mut binom = Rational::one();
        for k in 0..self.order {
            // binom(e, k+1) = binom(e, k) * (e - k) / (k + 1)
            binom = binom * (exponent - rat_int(k as i64)) / rat_int(k as i64 + 1);
            power = power.mul(&tail);
            if power.is_zero() {
                break;
            }
            if !binom.is_zero() {
                acc = acc.add(&power.scale(&binom));
            }
        }
        Ok(acc)
    }
}
