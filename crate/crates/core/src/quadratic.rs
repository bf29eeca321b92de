//! Exact arithmetic in a real quadratic field `Q(√d)`.
//!
//! Continued fractions with an eventually periodic tail are quadratic
//! irrationals, so every best-approximation distance of such a number lives
//! in one fixed field and identities between them can be checked with zero
//! tolerance.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rug::{Float, Integer, Rational};

/// `rational + surd·√radicand` with rational coefficients.
///
/// Two values can only be combined when they share the radicand or when one
/// of them has a zero surd part; mixing fields is a programming error and
/// panics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticIrrational {
    rational: Rational,
    surd: Rational,
    radicand: Integer,
}

impl QuadraticIrrational {
    pub fn new(rational: Rational, surd: Rational, radicand: Integer) -> Self {
        assert!(radicand > 0, "radicand must be positive");
        if surd != 0 {
            assert!(!radicand.is_perfect_square(), "radicand {radicand} is a perfect square");
        }
        QuadraticIrrational { rational, surd, radicand }
    }

    pub fn from_rational(r: Rational, radicand: &Integer) -> Self {
        QuadraticIrrational { rational: r, surd: Rational::new(), radicand: radicand.clone() }
    }

    pub fn from_int(n: i64, radicand: &Integer) -> Self {
        Self::from_rational(Rational::from(n), radicand)
    }

    pub fn rational_part(&self) -> &Rational {
        &self.rational
    }

    pub fn surd_part(&self) -> &Rational {
        &self.surd
    }

    pub fn radicand(&self) -> &Integer {
        &self.radicand
    }

    pub fn is_zero(&self) -> bool {
        self.rational == 0 && self.surd == 0
    }

    /// Exact sign: -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        let sa = self.rational.cmp0() as i32;
        let sb = self.surd.cmp0() as i32;
        if sb == 0 {
            return sa;
        }
        if sa == 0 || sa == sb {
            return sb;
        }
        let a2 = Rational::from(self.rational.square_ref());
        let b2d = Rational::from(self.surd.square_ref()) * &self.radicand;
        match a2.cmp(&b2d) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    }

    /// Conjugate `a - b√d`.
    pub fn conjugate(&self) -> Self {
        QuadraticIrrational {
            rational: self.rational.clone(),
            surd: Rational::from(-&self.surd),
            radicand: self.radicand.clone(),
        }
    }

    /// Field norm `a² - b²d`.
    pub fn norm(&self) -> Rational {
        Rational::from(self.rational.square_ref()) - Rational::from(self.surd.square_ref()) * &self.radicand
    }

    pub fn recip(&self) -> Self {
        let n = self.norm();
        assert!(n != 0, "reciprocal of zero");
        let c = self.conjugate();
        QuadraticIrrational {
            rational: c.rational / &n,
            surd: c.surd / &n,
            radicand: c.radicand,
        }
    }

    pub fn div(&self, other: &Self) -> Self {
        self * &other.recip()
    }

    pub fn mul_int(&self, k: &Integer) -> Self {
        QuadraticIrrational {
            rational: Rational::from(&self.rational * k),
            surd: Rational::from(&self.surd * k),
            radicand: self.radicand.clone(),
        }
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Rounded to within a few ulps at `prec` bits.
    pub fn to_float(&self, prec: u32) -> Float {
        let work = prec + 32;
        let a = Float::with_val(work, &self.rational);
        let b_root = Float::with_val(work, &self.surd) * Float::with_val(work, &self.radicand).sqrt();
        let opposite = self.rational.cmp0() as i32 * self.surd.cmp0() as i32 == -1;
        if opposite {
            // a + b√d = norm / (a - b√d); the denominator has no cancellation.
            let denom = a - b_root;
            Float::with_val(prec, Float::with_val(work, &self.norm()) / denom)
        } else {
            Float::with_val(prec, a + b_root)
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.to_float(64).to_f64()
    }

    fn check_field(&self, other: &Self) -> Integer {
        if self.surd == 0 {
            return other.radicand.clone();
        }
        if other.surd == 0 {
            return self.radicand.clone();
        }
        assert_eq!(self.radicand, other.radicand, "mixing quadratic fields");
        self.radicand.clone()
    }
}

impl Add for &QuadraticIrrational {
    type Output = QuadraticIrrational;
    fn add(self, rhs: Self) -> QuadraticIrrational {
        let d = self.check_field(rhs);
        QuadraticIrrational {
            rational: Rational::from(&self.rational + &rhs.rational),
            surd: Rational::from(&self.surd + &rhs.surd),
            radicand: d,
        }
    }
}

impl Sub for &QuadraticIrrational {
    type Output = QuadraticIrrational;
    fn sub(self, rhs: Self) -> QuadraticIrrational {
        let d = self.check_field(rhs);
        QuadraticIrrational {
            rational: Rational::from(&self.rational - &rhs.rational),
            surd: Rational::from(&self.surd - &rhs.surd),
            radicand: d,
        }
    }
}

impl Mul for &QuadraticIrrational {
    type Output = QuadraticIrrational;
    fn mul(self, rhs: Self) -> QuadraticIrrational {
        let d = self.check_field(rhs);
        let ac = Rational::from(&self.rational * &rhs.rational);
        let bd = Rational::from(&self.surd * &rhs.surd) * &d;
        let ad = Rational::from(&self.rational * &rhs.surd);
        let bc = Rational::from(&self.surd * &rhs.rational);
        QuadraticIrrational { rational: ac + bd, surd: ad + bc, radicand: d }
    }
}

impl Neg for &QuadraticIrrational {
    type Output = QuadraticIrrational;
    fn neg(self) -> QuadraticIrrational {
        QuadraticIrrational {
            rational: Rational::from(-&self.rational),
            surd: Rational::from(-&self.surd),
            radicand: self.radicand.clone(),
        }
    }
}

impl PartialOrd for QuadraticIrrational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some((self - other).signum().cmp(&0))
    }
}

impl fmt::Display for QuadraticIrrational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.surd == 0 {
            write!(f, "{}", self.rational)
        } else {
            write!(f, "{} + ({})*sqrt({})", self.rational, self.surd, self.radicand)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> QuadraticIrrational {
        // (√5 - 1) / 2
        QuadraticIrrational::new(Rational::from((-1, 2)), Rational::from((1, 2)), Integer::from(5))
    }

    #[test]
    fn golden_satisfies_its_minimal_polynomial() {
        let a = golden();
        let d = a.radicand().clone();
        let lhs = &(&a * &a) + &a;
        assert_eq!(lhs, QuadraticIrrational::from_int(1, &d));
    }

    #[test]
    fn sign_is_exact_near_cancellation() {
        // Convergents of √2 alternate: 1393/985 below, 577/408 and 99/70 above.
        let d = Integer::from(2);
        let x = QuadraticIrrational::new(Rational::from((-1393, 985)), Rational::from(1), d.clone());
        assert_eq!(x.signum(), 1);
        let y = QuadraticIrrational::new(Rational::from((-577, 408)), Rational::from(1), d);
        assert_eq!(y.signum(), -1);
        let z = QuadraticIrrational::new(Rational::from((-99, 70)), Rational::from(1), Integer::from(2));
        assert_eq!(z.signum(), -1);
    }

    #[test]
    fn reciprocal_round_trips() {
        let a = golden();
        let one = &a * &a.recip();
        assert_eq!(one, QuadraticIrrational::from_int(1, a.radicand()));
        // 1/α = α + 1 for the golden mean
        let expected = &a + &QuadraticIrrational::from_int(1, a.radicand());
        assert_eq!(a.recip(), expected);
    }

    #[test]
    fn float_value_is_accurate_under_cancellation() {
        // α^30 computed exactly then rounded; compare against repeated float multiplication.
        let a = golden();
        let mut p = QuadraticIrrational::from_int(1, a.radicand());
        for _ in 0..30 {
            p = &p * &a;
        }
        let exact = p.to_float(200);
        let af = a.to_float(400);
        let mut fp = Float::with_val(400, 1);
        for _ in 0..30 {
            fp *= &af;
        }
        let rel = Float::with_val(400, &exact - &fp).abs() / &fp;
        assert!(rel < Float::with_val(64, 1e-55), "relative error {rel}");
    }
}
