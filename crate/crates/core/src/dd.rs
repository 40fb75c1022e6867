//! Double-double arithmetic (~31 significant digits).
//!
//! A value is stored as an unevaluated sum `hi + lo` with |lo| <= ulp(hi)/2.
//! The certificate evaluates every constant twice, once in f64 and once in
//! this type, and treats any relative disagreement above 1e-12 as a defect.

/// Unevaluated sum of two doubles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Knuth two-sum: s + e == a + b exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Fast two-sum, requires |a| >= |b|.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Exact product via fused multiply-add.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    /// Reciprocal by Newton refinement of hi-word division.
    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }
}

impl std::ops::Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2b) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2b + t2);
        Dd { hi, lo }
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    fn mul(self, rhs: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs.hi);
        let p2 = p2 + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }
}

impl std::ops::Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Dd::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Dd::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<std::cmp::Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(std::cmp::Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

/// Scalar abstraction so the certificate formulas can be evaluated in both
/// working and extended precision from the same call sites.
pub trait Scalar:
    Copy
    + PartialOrd
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn zero() -> Self;
    fn one() -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> f64 {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn zero() -> f64 {
        0.0
    }
    fn one() -> f64 {
        1.0
    }
}

impl Scalar for Dd {
    fn from_f64(x: f64) -> Dd {
        Dd::from_f64(x)
    }
    fn to_f64(self) -> f64 {
        Dd::to_f64(self)
    }
    fn zero() -> Dd {
        Dd::ZERO
    }
    fn one() -> Dd {
        Dd::ONE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_keeps_low_bits() {
        let a = Dd::from_f64(1.0);
        let b = Dd::from_f64(1e-30);
        let s = a + b;
        assert_eq!(s.hi, 1.0);
        assert_eq!(s.lo, 1e-30);
        let back = s - a;
        assert_eq!(back.to_f64(), 1e-30);
    }

    #[test]
    fn mul_is_exact_for_representable_products() {
        let a = Dd::from_f64(3.0);
        let b = Dd::from_f64(7.0);
        assert_eq!((a * b).hi, 21.0);
        assert_eq!((a * b).lo, 0.0);
    }

    #[test]
    fn div_recovers_thirds_beyond_f64() {
        let third = Dd::ONE / Dd::from_f64(3.0);
        let one = third * Dd::from_f64(3.0);
        assert!((one - Dd::ONE).abs().to_f64() < 1e-31);
    }

    #[test]
    fn one_minus_small_tracks_cancellation() {
        // 1 - (1 - 1e-17) cancels completely in f64 but not in dd.
        let x = Dd::ONE - Dd::from_f64(1e-17);
        let diff = Dd::ONE - x;
        assert!((diff.to_f64() - 1e-17).abs() < 1e-33);
    }
}
