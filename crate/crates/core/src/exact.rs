//! Exact rational helpers: parsing, display, serde, and dyadic log2 brackets
//! used to skip most exact comparisons.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// 2^e for any integer e.
pub fn pow2(e: i64) -> BigRational {
    let p = BigInt::one() << e.unsigned_abs() as usize;
    if e >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new_raw(BigInt::one(), p)
    }
}

/// Parses `7`, `-3/8`, `0.375`, or `1.5e-3` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let bad = || Error::InvalidInput(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{ip}{fp}0").parse().map_err(|_| bad())?;
    let scale = exp - fp.len() as i64 - 1;
    let ten = BigInt::from(10);
    let mut v = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        v = -v;
    }
    Ok(v)
}

/// Nearest f64, saturating to 0 or +/-inf outside the f64 range.
pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Scientific-notation decimal that stays meaningful far outside the f64 range.
pub fn decimal_string(x: &BigRational) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let direct = to_f64(x);
    if direct.is_finite() && direct != 0.0 && direct.abs() > 1e-300 && direct.abs() < 1e300 {
        return format!("{direct:.15e}");
    }
    let bits = x.numer().bits() as i64 - x.denom().bits() as i64;
    let e10 = (bits as f64 * std::f64::consts::LOG10_2).floor() as i64;
    let ten = BigInt::from(10);
    let p = num_traits::pow(ten, e10.unsigned_abs() as usize);
    let scaled = if e10 >= 0 {
        x / BigRational::from_integer(p)
    } else {
        x * BigRational::from_integer(p)
    };
    let mut m = to_f64(&scaled);
    let mut e = e10;
    while m.abs() >= 10.0 {
        m /= 10.0;
        e += 1;
    }
    while m.abs() < 1.0 {
        m *= 10.0;
        e -= 1;
    }
    format!("{m:.15}e{e}")
}

/// Wire form of an exact rational: numerator and denominator strings plus a
/// decimal approximation for display.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalRepr {
    pub num: String,
    pub den: String,
    pub decimal: String,
}

impl From<&BigRational> for RationalRepr {
    fn from(x: &BigRational) -> Self {
        RationalRepr {
            num: x.numer().to_string(),
            den: x.denom().to_string(),
            decimal: decimal_string(x),
        }
    }
}

impl RationalRepr {
    pub fn to_rational(&self) -> Result<BigRational> {
        let n: BigInt = self
            .num
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad numerator {:?}", self.num)))?;
        let d: BigInt = self
            .den
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad denominator {:?}", self.den)))?;
        if d.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        Ok(BigRational::new(n, d))
    }
}

pub mod serde_rat {
    use super::*;

    pub fn serialize<S: Serializer>(x: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        RationalRepr::from(x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let r = RationalRepr::deserialize(d)?;
        r.to_rational().map_err(serde::de::Error::custom)
    }
}

pub mod serde_rat_vec {
    use super::*;

    pub fn serialize<S: Serializer>(x: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<RationalRepr> = x.iter().map(RationalRepr::from).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<BigRational>, D::Error> {
        let v = Vec::<RationalRepr>::deserialize(d)?;
        v.iter()
            .map(|r| r.to_rational().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Denominator of the fixed-point log2 brackets.
pub const LOG_DEN: i64 = 4096;

/// Certified bracket `lo/LOG_DEN <= log2(x) <= hi/LOG_DEN` for a positive rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Log2Bracket {
    pub lo: i64,
    pub hi: i64,
}

fn floor_div(a: i128, b: i128) -> i128 {
    Integer::div_floor(&a, &b)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -Integer::div_floor(&(-a), &b)
}

impl Log2Bracket {
    /// Coarse bracket from bit lengths alone; cheap for any size.
    pub fn coarse(x: &BigRational) -> Self {
        assert!(x.is_positive(), "log2 bracket of a non-positive value");
        let bn = x.numer().bits() as i64;
        let bd = x.denom().bits() as i64;
        Log2Bracket {
            lo: (bn - 1 - bd) * LOG_DEN,
            hi: (bn - bd + 1) * LOG_DEN,
        }
    }

    /// Bracket of width a few units of 1/LOG_DEN, verified by comparing
    /// x^LOG_DEN against powers of two. Meant for small-height rationals.
    pub fn fine(x: &BigRational) -> Self {
        assert!(x.is_positive(), "log2 bracket of a non-positive value");
        let est = to_f64(x).log2();
        let (mut lo, mut hi) = if est.is_finite() {
            let v = est * LOG_DEN as f64;
            (v.floor() as i64 - 1, v.ceil() as i64 + 1)
        } else {
            let c = Self::coarse(x);
            (c.lo, c.hi)
        };
        let n = x.numer().clone();
        let d = x.denom().clone();
        let np = num_traits::pow(n, LOG_DEN as usize);
        let dp = num_traits::pow(d, LOG_DEN as usize);
        // 2^lo <= np/dp  and  np/dp <= 2^hi
        let below = |e: i64| -> bool {
            if e >= 0 {
                (&dp << e as usize) <= np
            } else {
                dp <= (&np << (-e) as usize)
            }
        };
        let above = |e: i64| -> bool {
            if e >= 0 {
                np <= (&dp << e as usize)
            } else {
                (&np << (-e) as usize) <= dp
            }
        };
        let mut step = 2;
        while !below(lo) {
            lo -= step;
            step *= 2;
        }
        step = 2;
        while !above(hi) {
            hi += step;
            step *= 2;
        }
        Log2Bracket { lo, hi }
    }

    /// Integer e with x^p <= 2^e (p may be negative).
    pub fn pow_upper(&self, p: i64) -> i64 {
        let p = p as i128;
        let num = if p >= 0 { p * self.hi as i128 } else { p * self.lo as i128 };
        ceil_div(num, LOG_DEN as i128) as i64
    }

    /// Integer e with x^p >= 2^e (p may be negative).
    pub fn pow_lower(&self, p: i64) -> i64 {
        let p = p as i128;
        let num = if p >= 0 { p * self.lo as i128 } else { p * self.hi as i128 };
        floor_div(num, LOG_DEN as i128) as i64
    }
}

/// floor(log2 n) and ceil(log2 n) for a positive integer.
pub fn int_log2_bounds(n: &BigInt) -> (i64, i64) {
    debug_assert!(n.sign() == Sign::Plus);
    let b = n.bits() as i64;
    let exact_pow = n.trailing_zeros().map(|t| t as i64 == b - 1).unwrap_or(false);
    if exact_pow {
        (b - 1, b - 1)
    } else {
        (b - 1, b)
    }
}

/// Smallest e with |x| < 2^e, or None for zero.
pub fn strict_upper_exp(x: &BigRational) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    Some(x.numer().bits() as i64 - x.denom().bits() as i64 + 1)
}

/// A dyadic rational 2^{-m}.
pub fn dyadic(m: u32) -> BigRational {
    pow2(-(m as i64))
}

/// Exact rational value of a finite f64.
pub fn from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidInput(format!("non-finite value {x}")))
}

pub fn max_rat<'a>(a: &'a BigRational, b: &'a BigRational) -> &'a BigRational {
    if a >= b {
        a
    } else {
        b
    }
}

pub fn min_rat<'a>(a: &'a BigRational, b: &'a BigRational) -> &'a BigRational {
    if a <= b {
        a
    } else {
        b
    }
}

pub fn is_positive(x: &BigRational) -> bool {
    x.is_positive()
}

pub fn abs(x: &BigRational) -> BigRational {
    x.abs()
}

fn ln_int(n: &BigInt) -> f64 {
    let b = n.bits();
    if b <= 1000 {
        return n.to_f64().map(f64::ln).unwrap_or(f64::NAN);
    }
    let s = b - 64;
    let top: BigInt = n >> s;
    top.to_f64().unwrap().ln() + s as f64 * std::f64::consts::LN_2
}

/// Natural log of |x|, usable far outside the f64 range; −∞ for zero.
pub fn ln_abs(x: &BigRational) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_int(&x.numer().abs()) - ln_int(x.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_abs_extremes() {
        assert!((ln_abs(&rat(-3, 8)) - (0.375f64).ln()).abs() < 1e-15);
        let tiny = pow2(-5000);
        assert!((ln_abs(&tiny) + 5000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(ln_abs(&int(0)), f64::NEG_INFINITY);
    }

    #[test]
    fn parses_forms() {
        assert_eq!(parse_rational("3/8").unwrap(), rat(3, 8));
        assert_eq!(parse_rational("-6/16").unwrap(), rat(-3, 8));
        assert_eq!(parse_rational("0.375").unwrap(), rat(3, 8));
        assert_eq!(parse_rational("12").unwrap(), int(12));
        assert_eq!(parse_rational("1.5e-3").unwrap(), rat(3, 2000));
        assert_eq!(parse_rational("2E2").unwrap(), int(200));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn repr_round_trip() {
        let x = rat(-209, 648);
        let r = RationalRepr::from(&x);
        assert_eq!(r.num, "-209");
        assert_eq!(r.den, "648");
        assert_eq!(r.to_rational().unwrap(), x);
    }

    #[test]
    fn decimal_of_tiny_value() {
        let x = pow2(-5000);
        let s = decimal_string(&x);
        assert!(s.ends_with("e-1506"), "{s}");
        assert!(s.starts_with("7.0"), "{s}");
    }

    #[test]
    fn fine_bracket_contains_log() {
        for (n, d) in [(6, 5), (3, 2), (2, 1), (4, 3), (1, 3), (7, 8), (1, 1)] {
            let x = rat(n, d);
            let b = Log2Bracket::fine(&x);
            let v = (n as f64 / d as f64).log2() * LOG_DEN as f64;
            assert!(b.lo as f64 <= v + 1e-9 && v - 1e-9 <= b.hi as f64, "{n}/{d}: {b:?} vs {v}");
            assert!(b.hi - b.lo <= 4);
        }
    }

    #[test]
    fn pow_bounds_are_sound() {
        let x = rat(6, 5);
        let b = Log2Bracket::fine(&x);
        for p in [-300i64, -17, -1, 0, 1, 5, 100, 1000] {
            let v = p as f64 * 1.2f64.log2();
            assert!(b.pow_lower(p) as f64 <= v && v <= b.pow_upper(p) as f64, "p={p}");
        }
    }

    #[test]
    fn int_log2() {
        assert_eq!(int_log2_bounds(&BigInt::from(8)), (3, 3));
        assert_eq!(int_log2_bounds(&BigInt::from(9)), (3, 4));
        assert_eq!(int_log2_bounds(&BigInt::from(1)), (0, 0));
    }
}
