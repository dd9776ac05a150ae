//! Physical quantities written with units, e.g. `"25Gbps"`, `"10GB/s"`, `"11TFLOPs"`.
//!
//! Prefixes are decimal SI (`K` = 1e3 ... `T` = 1e12). A lowercase `b` is a
//! bit and an uppercase `B` a byte; bit quantities are divided by 8 so every
//! data quantity comes back in bytes (or bytes/second).

use std::fmt;

use thiserror::Error;

/// What a quantity string is expected to describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantityKind {
    /// Data rate, returned in bytes/second. Must be strictly positive.
    Bandwidth,
    /// Compute rate, returned in FLOPs/second. Must be strictly positive.
    FlopsRate,
    /// Data volume, returned in bytes. May be zero.
    Bytes,
    /// Operation count, returned in FLOPs. May be zero.
    FlopCount,
}

impl QuantityKind {
    fn requires_positive(self) -> bool {
        matches!(self, QuantityKind::Bandwidth | QuantityKind::FlopsRate)
    }

    fn canonical_unit(self) -> &'static str {
        match self {
            QuantityKind::Bandwidth => "B/s",
            QuantityKind::FlopsRate => "FLOPs/s",
            QuantityKind::Bytes => "B",
            QuantityKind::FlopCount => "FLOP",
        }
    }
}

impl fmt::Display for QuantityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuantityKind::Bandwidth => "bandwidth",
            QuantityKind::FlopsRate => "FLOPs rate",
            QuantityKind::Bytes => "byte size",
            QuantityKind::FlopCount => "FLOP count",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantityError {
    #[error("malformed quantity '{0}'")]
    Malformed(String),
    #[error("unknown unit '{unit}' for a {kind}")]
    UnknownUnit { unit: String, kind: QuantityKind },
    #[error("{kind} must be positive, got {value}")]
    NonPositive { value: f64, kind: QuantityKind },
    #[error("{kind} must not be negative, got {value}")]
    Negative { value: f64, kind: QuantityKind },
}

/// Parse `text` as a quantity of the given kind, returning canonical units.
pub fn parse_quantity(text: &str, kind: QuantityKind) -> Result<f64, QuantityError> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let number = scan_number(&compact).ok_or_else(|| QuantityError::Malformed(text.to_string()))?;
    let unit = &compact[number.len..];
    let scale = unit_scale(unit, kind).ok_or_else(|| QuantityError::UnknownUnit {
        unit: unit.to_string(),
        kind,
    })?;

    // Fold the SI prefix into the decimal exponent so "1.56T" parses to the
    // same double as the literal 1.56e12.
    let exponent = number.exponent + scale.exp10;
    let mut canonical: f64 = format!("{}e{}", number.mantissa, exponent)
        .parse()
        .map_err(|_| QuantityError::Malformed(text.to_string()))?;
    if scale.bits {
        canonical /= 8.0;
    }
    if !canonical.is_finite() {
        return Err(QuantityError::Malformed(text.to_string()));
    }
    if kind.requires_positive() && canonical <= 0.0 {
        return Err(QuantityError::NonPositive { value: canonical, kind });
    }
    if canonical < 0.0 {
        return Err(QuantityError::Negative { value: canonical, kind });
    }
    Ok(canonical)
}

/// Render a canonical value so that [`parse_quantity`] gives back the same bits.
pub fn format_quantity(value: f64, kind: QuantityKind) -> String {
    format!("{value:e}{}", kind.canonical_unit())
}

struct ScannedNumber<'a> {
    mantissa: &'a str,
    exponent: i64,
    len: usize,
}

/// Scans a leading `[+-]digits[.digits][e[+-]digits]`.
fn scan_number(s: &str) -> Option<ScannedNumber<'_>> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digit_count = i - digits_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digit_count += i - frac_start;
    }
    if digit_count == 0 {
        return None;
    }
    let mantissa = &s[..i];
    let mut exponent = 0;
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let exp_digits = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_digits {
            exponent = s[i + 1..j].parse().ok()?;
            i = j;
        }
    }
    Some(ScannedNumber {
        mantissa,
        exponent,
        len: i,
    })
}

#[derive(Debug, Clone, Copy)]
struct Scale {
    exp10: i64,
    bits: bool,
}

const UNIT: Scale = Scale {
    exp10: 0,
    bits: false,
};

fn prefix_exp10(c: char) -> Option<i64> {
    match c {
        'k' | 'K' => Some(3),
        'M' => Some(6),
        'G' => Some(9),
        'T' => Some(12),
        _ => None,
    }
}

/// Splits an optional SI prefix off `unit`.
fn strip_prefix(unit: &str) -> (i64, &str) {
    let mut chars = unit.chars();
    match chars.next().and_then(prefix_exp10) {
        // "B", "b" and "FLOP..." must not lose their first letter to a prefix
        Some(exp) if !chars.as_str().is_empty() => (exp, chars.as_str()),
        _ => (0, unit),
    }
}

fn strip_rate_suffix(unit: &str) -> Option<&str> {
    ["/second", "/sec", "/s", "ps"]
        .iter()
        .find_map(|suffix| unit.strip_suffix(suffix))
}

fn data_unit_scale(unit: &str) -> Option<Scale> {
    let (exp10, base) = strip_prefix(unit);
    let bits = match base {
        "B" | "byte" | "bytes" => false,
        "b" | "bit" | "bits" => true,
        _ => return None,
    };
    Some(Scale { exp10, bits })
}

/// `T`, `TFLOP`, `TFLOPs`, `TFLOPS`, `Tflops` and friends.
fn flop_unit_scale(unit: &str) -> Option<Scale> {
    if unit.is_empty() {
        return Some(UNIT);
    }
    let mut chars = unit.chars();
    if let Some(exp10) = chars.next().and_then(prefix_exp10) {
        if chars.as_str().is_empty() {
            return Some(Scale { exp10, bits: false });
        }
    }
    let (exp10, base) = strip_prefix(unit);
    match base {
        "FLOPs" | "FLOPS" | "flops" | "FLOP" | "flop" => Some(Scale { exp10, bits: false }),
        _ => None,
    }
}

fn unit_scale(unit: &str, kind: QuantityKind) -> Option<Scale> {
    if unit.is_empty() {
        return Some(UNIT);
    }
    match kind {
        // "25Gb" and "10GB" are accepted as rates, the way hardware tables write them
        QuantityKind::Bandwidth => data_unit_scale(strip_rate_suffix(unit).unwrap_or(unit)),
        QuantityKind::Bytes => data_unit_scale(unit),
        // "FLOPS" already names a rate, so try the bare unit before stripping "/s"
        QuantityKind::FlopsRate => std::iter::once(unit)
            .chain(strip_rate_suffix(unit))
            .find_map(flop_unit_scale),
        QuantityKind::FlopCount => flop_unit_scale(unit),
    }
}
