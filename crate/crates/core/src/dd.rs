//! Double-double helpers. `twofloat` 0.8 divides two `TwoFloat`s to only ~1e-17 relative, so
//! quotients are refined here with two correction steps built from its exact products.

use twofloat::TwoFloat;

pub(crate) fn div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    if !q1.is_finite() || q1 == 0.0 {
        return TwoFloat::from(q1);
    }
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

/// x^n by squaring; `TwoFloat::powi` returns NaN for 0^0.
pub(crate) fn pow(x: TwoFloat, mut n: usize) -> TwoFloat {
    let mut base = x;
    let mut acc = TwoFloat::from(1.0);
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotient_is_double_double_accurate() {
        let a = TwoFloat::from(1.0) - TwoFloat::from(-0.99);
        let r = div(a, a) - 1.0;
        assert!(r.hi().abs() < 1e-31);
        let third = div(TwoFloat::from(1.0), TwoFloat::from(3.0));
        assert!((third * 3.0 - 1.0).hi().abs() < 1e-31);
    }

    #[test]
    fn zero_power_is_one() {
        assert_eq!(pow(TwoFloat::from(0.0), 0), TwoFloat::from(1.0));
        assert_eq!(pow(TwoFloat::from(2.0), 10), TwoFloat::from(1024.0));
    }
}
