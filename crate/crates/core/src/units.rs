//! Physical quantities with explicit unit strings.
//!
//! Configuration values are written as `"<number> <unit>"`, for example
//! `"10 nm"`, `"1.2 MV/cm"` or `"15 uC/cm^2"`. Parsing converts to SI and
//! checks the dimension against what the field expects, so `t_fe = "10 V"`
//! is rejected rather than silently read as a thickness.

use std::fmt;
use std::marker::PhantomData;
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// Longest unit string accepted; keeps pathological inputs cheap.
pub const MAX_QUANTITY_LEN: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("empty quantity")]
    Empty,
    #[error("quantity string longer than {MAX_QUANTITY_LEN} bytes")]
    TooLong,
    #[error("no leading number in {0:?}")]
    MissingNumber(String),
    #[error("non-finite value in {0:?}")]
    NonFinite(String),
    #[error("unknown unit {0:?}")]
    UnknownUnit(String),
    #[error("malformed unit expression {0:?}")]
    Malformed(String),
    #[error("dimension mismatch: {input:?} is not a {expected}")]
    Dimension { input: String, expected: &'static str },
}

/// Exponents over the base set (metre, second, volt, ampere).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Dimension {
    pub metre: i8,
    pub second: i8,
    pub volt: i8,
    pub ampere: i8,
}

impl Dimension {
    pub const NONE: Dimension = Dimension::new(0, 0, 0, 0);

    pub const fn new(metre: i8, second: i8, volt: i8, ampere: i8) -> Self {
        Dimension {
            metre,
            second,
            volt,
            ampere,
        }
    }

    fn checked_pow(self, p: i8) -> Option<Self> {
        Some(Dimension {
            metre: self.metre.checked_mul(p)?,
            second: self.second.checked_mul(p)?,
            volt: self.volt.checked_mul(p)?,
            ampere: self.ampere.checked_mul(p)?,
        })
    }

    fn checked_mul(self, o: Self) -> Option<Self> {
        Some(Dimension {
            metre: self.metre.checked_add(o.metre)?,
            second: self.second.checked_add(o.second)?,
            volt: self.volt.checked_add(o.volt)?,
            ampere: self.ampere.checked_add(o.ampere)?,
        })
    }
}

const BASE_UNITS: &[(&str, f64, Dimension)] = &[
    ("m", 1.0, Dimension::new(1, 0, 0, 0)),
    ("s", 1.0, Dimension::new(0, 1, 0, 0)),
    ("V", 1.0, Dimension::new(0, 0, 1, 0)),
    ("A", 1.0, Dimension::new(0, 0, 0, 1)),
    ("C", 1.0, Dimension::new(0, 1, 0, 1)),
    ("F", 1.0, Dimension::new(0, 1, -1, 1)),
    ("S", 1.0, Dimension::new(0, 0, -1, 1)),
    ("Hz", 1.0, Dimension::new(0, -1, 0, 0)),
    ("ohm", 1.0, Dimension::new(0, 0, 1, -1)),
    ("Ω", 1.0, Dimension::new(0, 0, 1, -1)),
    ("dec", 1.0, Dimension::NONE),
    ("decade", 1.0, Dimension::NONE),
];

const PREFIXES: &[(&str, f64)] = &[
    ("f", 1e-15),
    ("p", 1e-12),
    ("n", 1e-9),
    ("u", 1e-6),
    ("µ", 1e-6),
    ("μ", 1e-6),
    ("m", 1e-3),
    ("c", 1e-2),
    ("k", 1e3),
    ("M", 1e6),
    ("G", 1e9),
];

fn lookup_base(sym: &str) -> Option<(f64, Dimension)> {
    BASE_UNITS
        .iter()
        .find(|(s, _, _)| *s == sym)
        .map(|&(_, f, d)| (f, d))
}

/// Resolves `prefix? base` with an exact base match taking priority.
fn lookup_symbol(sym: &str) -> Option<(f64, Dimension)> {
    if let Some(hit) = lookup_base(sym) {
        return Some(hit);
    }
    for &(p, scale) in PREFIXES {
        if let Some(rest) = sym.strip_prefix(p) {
            if let Some((f, d)) = lookup_base(rest) {
                // "dec" is a count, prefixes on it are meaningless
                if d == Dimension::NONE {
                    return None;
                }
                return Some((scale * f, d));
            }
        }
    }
    None
}

fn split_exponent(factor: &str) -> Option<(&str, i8)> {
    if let Some(base) = factor.strip_suffix('²') {
        return Some((base, 2));
    }
    if let Some(base) = factor.strip_suffix('³') {
        return Some((base, 3));
    }
    if let Some(idx) = factor.find('^') {
        let (base, exp) = factor.split_at(idx);
        let exp: i8 = exp[1..].parse().ok()?;
        return Some((base, exp));
    }
    let digits = factor
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_ascii_digit())
        .last()
        .map(|(i, _)| i);
    match digits {
        Some(i) if i > 0 => Some((&factor[..i], factor[i..].parse().ok()?)),
        _ => Some((factor, 1)),
    }
}

fn parse_factor(factor: &str) -> Result<(f64, Dimension), UnitError> {
    let (sym, exp) =
        split_exponent(factor).ok_or_else(|| UnitError::Malformed(factor.to_string()))?;
    if sym.is_empty() {
        return Err(UnitError::Malformed(factor.to_string()));
    }
    let (scale, dim) = lookup_symbol(sym).ok_or_else(|| UnitError::UnknownUnit(sym.to_string()))?;
    let dim = dim
        .checked_pow(exp)
        .ok_or_else(|| UnitError::Malformed(factor.to_string()))?;
    Ok((scale.powi(exp as i32), dim))
}

/// Parses a unit expression such as `MV/cm`, `uC/cm^2` or `A/V^2`.
pub fn parse_unit(expr: &str) -> Result<(f64, Dimension), UnitError> {
    let expr = expr.trim();
    if expr.is_empty() {
        return Ok((1.0, Dimension::NONE));
    }
    let mut parts = expr.splitn(2, '/');
    let num = parts.next().unwrap_or("").trim();
    let den = parts.next().map(str::trim);
    if den.is_some_and(|d| d.contains('/')) {
        return Err(UnitError::Malformed(expr.to_string()));
    }

    let mut scale = 1.0;
    let mut dim = Dimension::NONE;
    let mut apply = |group: &str, sign: i8| -> Result<(), UnitError> {
        for factor in group
            .split(['*', '·', ' '])
            .filter(|f| !f.is_empty())
        {
            let (s, d) = parse_factor(factor)?;
            let d = d
                .checked_pow(sign)
                .ok_or_else(|| UnitError::Malformed(expr.to_string()))?;
            scale *= if sign > 0 { s } else { 1.0 / s };
            dim = dim
                .checked_mul(d)
                .ok_or_else(|| UnitError::Malformed(expr.to_string()))?;
        }
        Ok(())
    };
    if num != "1" {
        apply(num, 1)?;
    }
    match den {
        Some("") => return Err(UnitError::Malformed(expr.to_string())),
        Some(d) => apply(d, -1)?,
        None => {}
    }
    Ok((scale, dim))
}

/// Length of the longest prefix of `s` following float syntax.
fn number_prefix_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let mut digits = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
        digits += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
    }
    if digits == 0 {
        return 0;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let start = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > start {
            i = j;
        }
    }
    i
}

/// Parses `"<number> <unit>"` into an SI value and its dimension.
pub fn parse_quantity(input: &str) -> Result<(f64, Dimension), UnitError> {
    if input.len() > MAX_QUANTITY_LEN {
        return Err(UnitError::TooLong);
    }
    let s = input.trim();
    if s.is_empty() {
        return Err(UnitError::Empty);
    }
    let n = number_prefix_len(s);
    if n == 0 {
        return Err(UnitError::MissingNumber(input.to_string()));
    }
    let value: f64 = s[..n]
        .parse()
        .map_err(|_| UnitError::MissingNumber(input.to_string()))?;
    let (scale, dim) = parse_unit(&s[n..])?;
    let si = value * scale;
    if !si.is_finite() {
        return Err(UnitError::NonFinite(input.to_string()));
    }
    Ok((si, dim))
}

/// A kind of physical quantity: fixes the dimension and the canonical unit
/// used when writing values back out.
pub trait Kind: Copy + Default + fmt::Debug + 'static {
    const NAME: &'static str;
    const DIM: Dimension;
    /// Canonical SI unit (scale 1) for serialization.
    const UNIT: &'static str;
}

macro_rules! kinds {
    ($($kind:ident, $alias:ident, $name:literal, $dim:expr, $unit:literal;)*) => {
        $(
            #[derive(Debug, Clone, Copy, Default, PartialEq)]
            pub struct $kind;
            impl Kind for $kind {
                const NAME: &'static str = $name;
                const DIM: Dimension = $dim;
                const UNIT: &'static str = $unit;
            }
            pub type $alias = Quantity<$kind>;
        )*
    };
}

kinds! {
    LengthKind, Length, "length", Dimension::new(1, 0, 0, 0), "m";
    TimeKind, Time, "time", Dimension::new(0, 1, 0, 0), "s";
    VoltageKind, Voltage, "voltage", Dimension::new(0, 0, 1, 0), "V";
    CurrentKind, Current, "current", Dimension::new(0, 0, 0, 1), "A";
    FieldKind, ElectricField, "electric field", Dimension::new(-1, 0, 1, 0), "V/m";
    ChargeDensityKind, ChargeDensity, "charge per area", Dimension::new(-2, 1, 0, 1), "C/m^2";
    CapacitanceDensityKind, CapacitanceDensity, "capacitance per area", Dimension::new(-2, 1, -1, 1), "F/m^2";
    TransconductanceKind, Transconductance, "transconductance factor", Dimension::new(0, 0, -2, 1), "A/V^2";
    FrequencyKind, Frequency, "frequency", Dimension::new(0, -1, 0, 0), "Hz";
}

/// SI value tagged with its kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Quantity<K: Kind> {
    value: f64,
    _kind: PhantomData<K>,
}

impl<K: Kind> Quantity<K> {
    pub const fn si(value: f64) -> Self {
        Quantity {
            value,
            _kind: PhantomData,
        }
    }

    pub fn value(self) -> f64 {
        self.value
    }
}

impl<K: Kind> FromStr for Quantity<K> {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (value, dim) = parse_quantity(s)?;
        if dim != K::DIM {
            return Err(UnitError::Dimension {
                input: s.to_string(),
                expected: K::NAME,
            });
        }
        Ok(Quantity::si(value))
    }
}

impl<K: Kind> fmt::Display for Quantity<K> {
    // `{:e}` prints the shortest digits that round-trip.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} {}", self.value, K::UNIT)
    }
}

impl<K: Kind> Serialize for Quantity<K> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de, K: Kind> Deserialize<'de> for Quantity<K> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct QVisitor<K>(PhantomData<K>);

        impl<K: Kind> Visitor<'_> for QVisitor<K> {
            type Value = Quantity<K>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a {} with unit, e.g. \"1 {}\"", K::NAME, K::UNIT)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_str(QVisitor(PhantomData))
    }
}
