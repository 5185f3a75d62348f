//! Quantity parsing with unit suffixes.
//!
//! Frequencies are cyclic and normalised to MHz, times to µs. A bare number
//! is taken in the normalised unit.

use std::f64::consts::PI;

use crate::error::UsageError;

fn split_suffix(s: &str) -> (&str, &str) {
    let s = s.trim();
    let cut = s
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_alphabetic() || *c == 'µ')
        .last()
        .map_or(s.len(), |(i, _)| i);
    (s[..cut].trim_end(), &s[cut..])
}

fn number(s: &str, what: &str) -> Result<f64, UsageError> {
    let v: f64 = s
        .parse()
        .map_err(|_| UsageError(format!("cannot parse {what} '{s}'")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(UsageError(format!("{what} must be finite, got '{s}'")))
    }
}

/// `2.16`, `2.16MHz`, `2160kHz`, `0.00216GHz` → MHz.
pub fn frequency_mhz(s: &str) -> Result<f64, UsageError> {
    let (num, unit) = split_suffix(s);
    let scale = match unit {
        "" | "MHz" | "mhz" => 1.0,
        "kHz" | "khz" => 1e-3,
        "GHz" | "ghz" => 1e3,
        "Hz" | "hz" => 1e-6,
        other => return Err(UsageError(format!("unknown frequency unit '{other}' in '{s}'"))),
    };
    Ok(number(num, "frequency")? * scale)
}

/// `0.5`, `0.5us`, `0.5µs`, `500ns`, `0.0005ms` → µs.
pub fn time_us(s: &str) -> Result<f64, UsageError> {
    let (num, unit) = split_suffix(s);
    let scale = match unit {
        "" | "us" | "µs" => 1.0,
        "ns" => 1e-3,
        "ms" => 1e3,
        "s" => 1e6,
        other => return Err(UsageError(format!("unknown time unit '{other}' in '{s}'"))),
    };
    Ok(number(num, "time")? * scale)
}

/// Rate in µs⁻¹; `/us` and `/ns` suffixes are accepted.
pub fn rate_per_us(s: &str) -> Result<f64, UsageError> {
    let t = s.trim();
    let (num, scale) = if let Some(n) = t.strip_suffix("/us").or_else(|| t.strip_suffix("/µs")) {
        (n, 1.0)
    } else if let Some(n) = t.strip_suffix("/ns") {
        (n, 1e3)
    } else {
        (t, 1.0)
    };
    Ok(number(num.trim(), "rate")? * scale)
}

/// Radians; a trailing `pi` multiplies by π, and `a/b pi` forms such as
/// `17/25pi` are accepted.
pub fn angle_rad(s: &str) -> Result<f64, UsageError> {
    let t = s.trim();
    let (body, scale) = match t.strip_suffix("pi").or_else(|| t.strip_suffix("π")) {
        Some(b) => (b.trim(), PI),
        None => (t, 1.0),
    };
    let body = body.trim_end_matches('*').trim();
    let value = match body.split_once('/') {
        Some((a, b)) => number(a.trim(), "angle")? / number(b.trim(), "angle")?,
        None if body.is_empty() && scale == PI => 1.0,
        None => number(body, "angle")?,
    };
    Ok(value * scale)
}

pub fn plain(s: &str, what: &str) -> Result<f64, UsageError> {
    number(s.trim(), what)
}

pub fn list<T>(s: &str, item: impl Fn(&str) -> Result<T, UsageError>) -> Result<Vec<T>, UsageError> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(item).collect()
}
