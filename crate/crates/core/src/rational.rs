//! Exact scalar types and rational enclosures.
//!
//! Combinatorial and measure identities are evaluated in `BigRational`;
//! function values live in the Gaussian rationals. Moduli of Gaussian
//! rationals are generally irrational, so distances built on them are
//! reported as rational enclosures ([`Bounds`]) that collapse to a single
//! exact value whenever the modulus happens to be rational.

use num::bigint::BigInt;
use num::{BigRational, Complex, One, Signed, ToPrimitive, Zero};
use std::fmt;

use crate::error::{Error, Result};

pub type Rational = BigRational;
/// Complex rational value (real and imaginary parts in ℚ).
pub type Value = Complex<BigRational>;

/// Fractional bits used when a square root has to be enclosed.
const SQRT_BITS: u32 = 96;

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn real(r: Rational) -> Value {
    Complex::new(r, Rational::zero())
}

pub fn value(n: i64, d: i64) -> Value {
    real(rat(n, d))
}

pub fn pow2(exp: i64) -> Rational {
    let two = BigInt::from(2);
    if exp >= 0 {
        BigRational::from_integer(num::pow(two, exp as usize))
    } else {
        BigRational::new(BigInt::one(), num::pow(two, (-exp) as usize))
    }
}

/// Parses `"3"`, `"-2/7"` or a finite decimal such as `"0.125"` exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    let bad = || Error::Malformed(format!("not a rational number: {text:?}"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        let negative = whole.trim_start().starts_with('-');
        let w: BigInt = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let f: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num::pow(BigInt::from(10), frac.len());
        let mag = BigRational::new(w.abs() * &scale + f, scale);
        return Ok(if negative { -mag } else { mag });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// Exact conversion of a finite binary64 number.
pub fn from_f64(x: f64) -> Rational {
    BigRational::from_float(x).unwrap_or_else(Rational::zero)
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn value_to_f64(v: &Value) -> Complex<f64> {
    Complex::new(to_f64(&v.re), to_f64(&v.im))
}

/// `num/den` rendering used by every CSV writer.
pub fn num_den(r: &Rational) -> (String, String) {
    (r.numer().to_string(), r.denom().to_string())
}

/// A closed interval `[lower, upper]` of nonnegative rationals that encloses
/// a real quantity. `lower == upper` means the quantity is known exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub lower: Rational,
    pub upper: Rational,
}

impl Bounds {
    pub fn exact(r: Rational) -> Self {
        Bounds {
            lower: r.clone(),
            upper: r,
        }
    }

    pub fn zero() -> Self {
        Bounds::exact(Rational::zero())
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn value(&self) -> Option<&Rational> {
        self.is_exact().then_some(&self.lower)
    }

    pub fn scale(&self, w: &Rational) -> Bounds {
        Bounds {
            lower: &self.lower * w,
            upper: &self.upper * w,
        }
    }

    pub fn midpoint_f64(&self) -> f64 {
        to_f64(&((&self.lower + &self.upper) / int(2)))
    }

    /// `x/(1+x)` is increasing on `[0, ∞)`, so it maps enclosures to enclosures.
    pub fn saturate(&self) -> Bounds {
        let sat = |x: &Rational| x / (Rational::one() + x);
        Bounds {
            lower: sat(&self.lower),
            upper: sat(&self.upper),
        }
    }
}

impl std::ops::Add for Bounds {
    type Output = Bounds;
    fn add(self, rhs: Bounds) -> Bounds {
        Bounds {
            lower: self.lower + rhs.lower,
            upper: self.upper + rhs.upper,
        }
    }
}

impl<'a> std::ops::AddAssign<&'a Bounds> for Bounds {
    fn add_assign(&mut self, rhs: &'a Bounds) {
        self.lower += &rhs.lower;
        self.upper += &rhs.upper;
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact() {
            write!(f, "{}", self.lower)
        } else {
            write!(f, "[{}, {}]", self.lower, self.upper)
        }
    }
}

fn is_perfect_square(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let s = n.sqrt();
    (&s * &s == *n).then_some(s)
}

/// Encloses `sqrt(x)` for a nonnegative rational `x`.
pub fn sqrt_bounds(x: &Rational) -> Bounds {
    assert!(!x.is_negative(), "sqrt of a negative rational");
    let (p, q) = (x.numer(), x.denom());
    let pq = p * q;
    if let Some(s) = is_perfect_square(&pq) {
        return Bounds::exact(BigRational::new(s, q.clone()));
    }
    let shift = BigInt::one() << SQRT_BITS;
    let s = (&pq * &shift * &shift).sqrt();
    let den = q * &shift;
    Bounds {
        lower: BigRational::new(s.clone(), den.clone()),
        upper: BigRational::new(s + BigInt::one(), den),
    }
}

/// Encloses `|z|` for a Gaussian rational `z`.
pub fn modulus(z: &Value) -> Bounds {
    if z.im.is_zero() {
        return Bounds::exact(z.re.abs());
    }
    if z.re.is_zero() {
        return Bounds::exact(z.im.abs());
    }
    sqrt_bounds(&(&z.re * &z.re + &z.im * &z.im))
}

/// Integer part of `log2(s)` for `s >= 1`.
pub fn floor_log2(s: u64) -> u32 {
    assert!(s >= 1);
    63 - s.leading_zeros()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("1/3").unwrap(), rat(1, 3));
        assert_eq!(parse_rational(" -2/4 ").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational("0.125").unwrap(), rat(1, 8));
        assert_eq!(parse_rational("-1.5").unwrap(), rat(-3, 2));
        assert_eq!(parse_rational("-0.5").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.").is_err());
    }

    #[test]
    fn sqrt_is_exact_on_squares() {
        assert_eq!(sqrt_bounds(&rat(9, 4)), Bounds::exact(rat(3, 2)));
        let b = modulus(&Complex::new(int(3), int(4)));
        assert_eq!(b, Bounds::exact(int(5)));
    }

    #[test]
    fn sqrt_encloses_irrationals() {
        let b = sqrt_bounds(&int(2));
        assert!(&b.lower * &b.lower < int(2));
        assert!(&b.upper * &b.upper > int(2));
        assert!(&b.upper - &b.lower < pow2(-90));
    }

    #[test]
    fn saturate_stays_below_one() {
        let b = Bounds::exact(int(1)).saturate();
        assert_eq!(b, Bounds::exact(rat(1, 2)));
        let big = Bounds::exact(int(1_000_000)).saturate();
        assert!(big.upper < int(1));
    }

    #[test]
    fn floor_log2_matches_definition() {
        assert_eq!(floor_log2(1), 0);
        assert_eq!(floor_log2(3), 1);
        assert_eq!(floor_log2(4), 2);
        assert_eq!(floor_log2(1023), 9);
    }
}
