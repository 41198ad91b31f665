//! Parsers for list-like flag values.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer};

/// Upper limit on the number of points in a range.
pub const MAX_RANGE_POINTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ParseError(pub String);

fn number(text: &str, what: &str) -> Result<f64, ParseError> {
    let v: f64 = text.trim().parse().map_err(|_| ParseError(format!("{what}: `{text}` is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ParseError(format!("{what}: `{text}` is not finite")))
    }
}

/// `a:b:n`, meaning `n` evenly spaced points from `a` to `b` inclusive.
pub fn parse_range(text: &str) -> Result<Vec<f64>, ParseError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(ParseError(format!("range `{text}` must have the form start:stop:count")));
    };
    let (a, b) = (number(a, "range start")?, number(b, "range stop")?);
    let n: usize = n.trim().parse().map_err(|_| ParseError(format!("range count `{n}` is not a positive integer")))?;
    if n == 0 || n > MAX_RANGE_POINTS {
        return Err(ParseError(format!("range count must lie in 1..={MAX_RANGE_POINTS}, got {n}")));
    }
    if n == 1 {
        if a != b {
            return Err(ParseError("a single-point range needs start == stop".into()));
        }
        return Ok(vec![a]);
    }
    let step = (b - a) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { b } else { a + step * i as f64 }).collect())
}

/// An angle in radians, written as a number or as `[c*]pi[/d]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

impl FromStr for Angle {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, ParseError> {
        let t = text.trim().to_ascii_lowercase();
        if !t.contains("pi") {
            return number(&t, "angle").map(Angle);
        }
        let (num, den) = match t.split_once('/') {
            Some((n, d)) => (n.trim(), Some(number(d, "angle denominator")?)),
            None => (t.as_str(), None),
        };
        let coeff = match num.strip_suffix("pi").map(str::trim) {
            Some("") => 1.0,
            Some(c) => number(c.strip_suffix('*').unwrap_or(c), "angle coefficient")?,
            None => return Err(ParseError(format!("angle `{text}` must look like 3*pi/8"))),
        };
        let value = coeff * PI / den.unwrap_or(1.0);
        if value.is_finite() {
            Ok(Angle(value))
        } else {
            Err(ParseError(format!("angle `{text}` is not finite")))
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Angle(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A value that may be left for the program to choose (`auto`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AutoOr<T> {
    Auto,
    Value(T),
}

impl<T: FromStr> FromStr for AutoOr<T> {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, ParseError> {
        if text.trim().eq_ignore_ascii_case("auto") {
            return Ok(AutoOr::Auto);
        }
        text.trim().parse().map(AutoOr::Value).map_err(|_| ParseError(format!("expected `auto` or a value, got `{text}`")))
    }
}

impl<T: fmt::Display> fmt::Display for AutoOr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Auto => f.write_str("auto"),
            AutoOr::Value(v) => v.fmt(f),
        }
    }
}

impl<'de, T: Deserialize<'de> + FromStr> Deserialize<'de> for AutoOr<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Value(T),
            Text(String),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Value(v) => Ok(AutoOr::Value(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
