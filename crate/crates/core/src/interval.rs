//! Closed intervals over the extended integers.
//!
//! An [`Interval`] `[a, b]` stands for the difference constraint
//! `a <= w - v <= b` (or, for a domain, `a <= v <= b`). Lower bounds may be
//! `-inf` and upper bounds may be `+inf`; the empty interval has a single
//! canonical representation, so structural equality is semantic equality.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An interval endpoint.
///
/// The derived order is the extended-integer order:
/// `NegInf < Finite(_) < PosInf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bound {
    NegInf,
    Finite(i64),
    PosInf,
}

impl Bound {
    pub fn is_finite(self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            Bound::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Sum of two bounds on the same side. Infinities absorb finite values;
    /// mixing `-inf` with `+inf` never happens because lower bounds are only
    /// ever added to lower bounds.
    fn add(self, other: Bound) -> Result<Bound> {
        match (self, other) {
            (Bound::Finite(a), Bound::Finite(b)) => {
                a.checked_add(b).map(Bound::Finite).ok_or(Error::Overflow)
            }
            (Bound::NegInf, Bound::PosInf) | (Bound::PosInf, Bound::NegInf) => {
                unreachable!("lower and upper bounds are never added together")
            }
            (Bound::NegInf, _) | (_, Bound::NegInf) => Ok(Bound::NegInf),
            (Bound::PosInf, _) | (_, Bound::PosInf) => Ok(Bound::PosInf),
        }
    }

    fn neg(self) -> Bound {
        match self {
            Bound::NegInf => Bound::PosInf,
            Bound::PosInf => Bound::NegInf,
            Bound::Finite(v) => Bound::Finite(-v),
        }
    }

    pub fn magnitude(self) -> Option<i64> {
        self.finite().map(|v| v.saturating_abs())
    }
}

impl From<i64> for Bound {
    fn from(v: i64) -> Self {
        Bound::Finite(v)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::NegInf => f.write_str("-inf"),
            Bound::PosInf => f.write_str("+inf"),
            Bound::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Bound {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "-inf" => Ok(Bound::NegInf),
            "+inf" | "inf" => Ok(Bound::PosInf),
            _ => s
                .parse::<i64>()
                .map(Bound::Finite)
                .map_err(|_| format!("invalid bound `{s}`")),
        }
    }
}

/// A closed interval, or the empty interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval(Option<(Bound, Bound)>);

impl Interval {
    pub const EMPTY: Interval = Interval(None);
    pub const UNBOUNDED: Interval = Interval(Some((Bound::NegInf, Bound::PosInf)));

    /// Builds `[lo, hi]`, normalizing to [`Interval::EMPTY`] when `lo > hi`.
    /// A lower bound of `+inf` or an upper bound of `-inf` admits no value
    /// and also yields the empty interval.
    pub fn new(lo: Bound, hi: Bound) -> Interval {
        if lo == Bound::PosInf || hi == Bound::NegInf || lo > hi {
            Interval::EMPTY
        } else {
            Interval(Some((lo, hi)))
        }
    }

    pub fn finite(lo: i64, hi: i64) -> Interval {
        Interval::new(Bound::Finite(lo), Bound::Finite(hi))
    }

    pub fn point(t: i64) -> Interval {
        Interval::finite(t, t)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn bounds(&self) -> Option<(Bound, Bound)> {
        self.0
    }

    pub fn lo(&self) -> Option<Bound> {
        self.0.map(|(lo, _)| lo)
    }

    pub fn hi(&self) -> Option<Bound> {
        self.0.map(|(_, hi)| hi)
    }

    /// Both endpoints as integers, when the interval is finite and non-empty.
    pub fn finite_bounds(&self) -> Option<(i64, i64)> {
        match self.0 {
            Some((Bound::Finite(lo), Bound::Finite(hi))) => Some((lo, hi)),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.finite_bounds().is_some()
    }

    pub fn contains(&self, t: i64) -> bool {
        match self.0 {
            Some((lo, hi)) => lo <= Bound::Finite(t) && Bound::Finite(t) <= hi,
            None => false,
        }
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        match (self.0, other.0) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some((a, b)), Some((c, d))) => c <= a && b <= d,
        }
    }

    /// `[max(a, a'), min(b, b')]`; the empty interval absorbs.
    pub fn intersect(&self, other: &Interval) -> Interval {
        match (self.0, other.0) {
            (Some((a, b)), Some((c, d))) => Interval::new(a.max(c), b.min(d)),
            _ => Interval::EMPTY,
        }
    }

    /// `[a + a', b + b']`; the empty interval absorbs.
    pub fn compose(&self, other: &Interval) -> Result<Interval> {
        match (self.0, other.0) {
            (Some((a, b)), Some((c, d))) => Ok(Interval::new(a.add(c)?, b.add(d)?)),
            _ => Ok(Interval::EMPTY),
        }
    }

    /// `[a, b] -> [-b, -a]`.
    pub fn inverse(&self) -> Interval {
        match self.0 {
            Some((a, b)) => Interval::new(b.neg(), a.neg()),
            None => Interval::EMPTY,
        }
    }

    /// Largest finite endpoint magnitude, ignoring infinities.
    pub fn magnitude(&self) -> i64 {
        match self.0 {
            Some((a, b)) => a.magnitude().unwrap_or(0).max(b.magnitude().unwrap_or(0)),
            None => 0,
        }
    }

    /// Renders in the whitespace-separated file syntax: `a b` or `empty`.
    pub fn to_text(&self) -> String {
        match self.0 {
            Some((a, b)) => format!("{a} {b}"),
            None => "empty".to_string(),
        }
    }

    /// Parses the file syntax from already-split tokens: either `["empty"]`
    /// or `[a, b]`.
    pub fn from_tokens(tokens: &[&str]) -> std::result::Result<Interval, String> {
        match tokens {
            ["empty"] => Ok(Interval::EMPTY),
            [a, b] => {
                let lo: Bound = a.parse()?;
                let hi: Bound = b.parse()?;
                if lo == Bound::PosInf {
                    return Err("lower bound cannot be +inf".into());
                }
                if hi == Bound::NegInf {
                    return Err("upper bound cannot be -inf".into());
                }
                Ok(Interval::new(lo, hi))
            }
            _ => Err(format!("expected `a b` or `empty`, got `{}`", tokens.join(" "))),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some((a, b)) => write!(f, "[{a},{b}]"),
            None => f.write_str("empty"),
        }
    }
}

impl FromStr for Interval {
    type Err = String;

    /// Accepts both `[a,b]` and `a b`, and `empty`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        let inner = s
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .unwrap_or(s);
        let tokens: Vec<&str> = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        Interval::from_tokens(&tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: i64, b: i64) -> Interval {
        Interval::finite(a, b)
    }

    #[test]
    fn intersect_examples() {
        assert_eq!(iv(1, 4).intersect(&iv(2, 6)), iv(2, 4));
        assert_eq!(iv(0, 1).intersect(&iv(2, 3)), Interval::EMPTY);
        let left = Interval::new(Bound::NegInf, 5.into());
        let right = Interval::new(3.into(), Bound::PosInf);
        assert_eq!(left.intersect(&right), iv(3, 5));
        assert_eq!(Interval::EMPTY.intersect(&iv(0, 9)), Interval::EMPTY);
    }

    #[test]
    fn compose_examples() {
        assert_eq!(iv(1, 2).compose(&iv(3, 5)).unwrap(), iv(4, 7));
        assert_eq!(iv(1, 2).compose(&Interval::EMPTY).unwrap(), Interval::EMPTY);
        assert_eq!(Interval::EMPTY.compose(&iv(1, 2)).unwrap(), Interval::EMPTY);
        let prec = Interval::new(0.into(), Bound::PosInf);
        assert_eq!(
            prec.compose(&iv(-3, 0)).unwrap(),
            Interval::new((-3).into(), Bound::PosInf)
        );
    }

    #[test]
    fn compose_overflow_is_reported() {
        let big = iv(0, i64::MAX);
        assert_eq!(big.compose(&iv(0, 1)), Err(Error::Overflow));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(iv(2, 3).inverse(), iv(-3, -2));
        assert_eq!(iv(-5, -5).inverse(), iv(5, 5));
        assert_eq!(Interval::EMPTY.inverse(), Interval::EMPTY);
        assert_eq!(Interval::UNBOUNDED.inverse(), Interval::UNBOUNDED);
    }

    #[test]
    fn empty_is_canonical() {
        assert_eq!(iv(3, 1), Interval::EMPTY);
        assert_eq!(Interval::new(Bound::PosInf, Bound::PosInf), Interval::EMPTY);
        assert_eq!(Interval::new(Bound::NegInf, Bound::NegInf), Interval::EMPTY);
    }

    #[test]
    fn text_syntax() {
        assert_eq!("0 +inf".parse::<Interval>().unwrap(), Interval::new(0.into(), Bound::PosInf));
        assert_eq!("[-inf,4]".parse::<Interval>().unwrap(), Interval::new(Bound::NegInf, 4.into()));
        assert_eq!("empty".parse::<Interval>().unwrap(), Interval::EMPTY);
        assert!("+inf 3".parse::<Interval>().is_err());
        assert!("1 2 3".parse::<Interval>().is_err());
        assert_eq!(iv(-2, 7).to_string(), "[-2,7]");
        assert_eq!(iv(-2, 7).to_text(), "-2 7");
    }

    #[test]
    fn subset() {
        assert!(iv(2, 3).is_subset_of(&iv(0, 5)));
        assert!(!iv(2, 6).is_subset_of(&iv(0, 5)));
        assert!(Interval::EMPTY.is_subset_of(&Interval::EMPTY));
        assert!(!iv(0, 0).is_subset_of(&Interval::EMPTY));
    }
}
