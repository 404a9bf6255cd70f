//! Exact rational arithmetic helpers.
//!
//! Every value, price and probability in the crate is a [`Rational`]. The
//! textual form is always `"p/q"` with `q > 0` in lowest terms; parsing also
//! accepts a bare integer.

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::error::Error;

pub type Rational = Ratio<i128>;

pub fn int(n: i128) -> Rational {
    Rational::from_integer(n)
}

/// Panics if `d == 0`.
pub fn rat(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<Rational, Error> {
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i128 = p.trim().parse().map_err(|_| bad())?;
            let q: i128 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => s.parse::<i128>().map(int).map_err(|_| bad()),
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn is_nonneg(r: &Rational) -> bool {
    !r.is_negative()
}

/// Least common multiple of the denominators, `1` for an empty input.
pub fn denominator_lcm<'a>(values: impl IntoIterator<Item = &'a Rational>) -> i128 {
    values
        .into_iter()
        .fold(1i128, |acc, v| num_integer::lcm(acc, *v.denom()))
}

pub fn max_of<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Rational {
    values
        .into_iter()
        .fold(Rational::zero(), |acc, v| if *v > acc { *v } else { acc })
}

/// Serde wrapper writing a rational as a `"p/q"` string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Q(pub Rational);

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl From<Rational> for Q {
    fn from(r: Rational) -> Self {
        Q(r)
    }
}

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map(Q).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for s in ["5/1", "0/1", "-3/4", "7/9"] {
            assert_eq!(format_rational(&parse_rational(s).unwrap()), s);
        }
        assert_eq!(parse_rational("6/4").unwrap(), rat(3, 2));
        assert_eq!(parse_rational("12").unwrap(), int(12));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn lcm_of_denominators() {
        let v = [rat(1, 2), rat(1, 3), int(4)];
        assert_eq!(denominator_lcm(&v), 6);
    }
}
