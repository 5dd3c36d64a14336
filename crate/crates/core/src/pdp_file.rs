//! Power delay profile definitions on disk.
//!
//! Two layouts are accepted:
//!
//! ```text
//! # plain text: one amplitude per line (or whitespace/comma separated)
//! 0.8
//! 0.6
//! ```
//!
//! ```toml
//! gains = [0.8, 0.6]           # or powers = [...]
//! ```
//!
//! ```toml
//! type = "exponential"
//! tau_o = 2.0
//! max_taps = 64
//! ```
//!
//! Amplitudes and powers are normalised to unit total power.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{make_exponential_pdp, PowerDelayProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PdpSpec {
    Gains { gains: Vec<f64> },
    Powers { powers: Vec<f64> },
    Exponential { tau_o: f64, max_taps: usize },
}

impl PdpSpec {
    pub fn build(&self) -> Result<PowerDelayProfile> {
        match self {
            PdpSpec::Gains { gains } => PowerDelayProfile::normalized(gains.clone()),
            PdpSpec::Powers { powers } => PowerDelayProfile::from_powers(powers),
            PdpSpec::Exponential { tau_o, max_taps } => make_exponential_pdp(*tau_o, *max_taps),
        }
    }
}

fn parse_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which `key = ...` is defined, if any.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn field_error(text: &str, key: &str, message: impl Into<String>) -> Error {
    let location = match key_line(text, key) {
        Some(l) => format!("line {l}, field '{key}'"),
        None => format!("field '{key}'"),
    };
    parse_error(location, message)
}

/// Parses a profile definition in either layout.
pub fn parse_pdp_spec(text: &str) -> Result<PdpSpec> {
    let looks_structured = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .any(|l| l.contains('='));
    if looks_structured {
        parse_structured(text)
    } else {
        parse_plain(text)
    }
}

fn parse_plain(text: &str) -> Result<PdpSpec> {
    let mut gains = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for (j, tok) in body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .enumerate()
        {
            let v: f64 = tok.parse().map_err(|_| {
                parse_error(
                    format!("line {}, value {}", i + 1, j + 1),
                    format!("'{tok}' is not a number"),
                )
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(parse_error(
                    format!("line {}, value {}", i + 1, j + 1),
                    format!("gain {v} must be finite and nonnegative"),
                ));
            }
            gains.push(v);
        }
    }
    if gains.is_empty() {
        return Err(parse_error("line 1", "no gains found"));
    }
    Ok(PdpSpec::Gains { gains })
}

fn number_list(text: &str, key: &str, v: &toml::Value) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| field_error(text, key, "expected an array of numbers"))?;
    if arr.is_empty() {
        return Err(field_error(text, key, "array is empty"));
    }
    arr.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = x
                .as_float()
                .or_else(|| x.as_integer().map(|n| n as f64))
                .ok_or_else(|| field_error(text, key, format!("element {i} is not a number")))?;
            if !f.is_finite() || f < 0.0 {
                return Err(field_error(text, key, format!("element {i} ({f}) must be finite and nonnegative")));
            }
            Ok(f)
        })
        .collect()
}

fn parse_structured(text: &str) -> Result<PdpSpec> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let location = e
            .span()
            .map(|s| format!("line {}", line_of(text, s.start)))
            .unwrap_or_else(|| "input".into());
        parse_error(location, e.message().trim().to_string())
    })?;
    let kind = match table.get("type") {
        None => None,
        Some(v) => Some(
            v.as_str()
                .ok_or_else(|| field_error(text, "type", "expected a string"))?
                .to_string(),
        ),
    };
    let allowed: &[&str] = match kind.as_deref() {
        Some("exponential") => &["type", "tau_o", "max_taps"],
        Some("gains") | None if table.contains_key("gains") => &["type", "gains"],
        Some("powers") | None if table.contains_key("powers") => &["type", "powers"],
        Some(other) if !matches!(other, "gains" | "powers") => {
            return Err(field_error(
                text,
                "type",
                format!("unknown profile type '{other}' (exponential | gains | powers)"),
            ))
        }
        _ => return Err(parse_error("input", "expected 'gains', 'powers' or type = \"exponential\"")),
    };
    if let Some(k) = table.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(field_error(text, k, "unknown field"));
    }
    if kind.as_deref() == Some("exponential") {
        let tau_o = table
            .get("tau_o")
            .and_then(|v| v.as_float().or_else(|| v.as_integer().map(|n| n as f64)))
            .ok_or_else(|| field_error(text, "tau_o", "missing or not a number"))?;
        if !(tau_o > 0.0 && tau_o.is_finite()) {
            return Err(field_error(text, "tau_o", format!("must be positive, got {tau_o}")));
        }
        let max_taps = table
            .get("max_taps")
            .and_then(|v| v.as_integer())
            .ok_or_else(|| field_error(text, "max_taps", "missing or not an integer"))?;
        if max_taps < 1 {
            return Err(field_error(text, "max_taps", format!("must be >= 1, got {max_taps}")));
        }
        return Ok(PdpSpec::Exponential {
            tau_o,
            max_taps: max_taps as usize,
        });
    }
    if let Some(v) = table.get("gains") {
        return Ok(PdpSpec::Gains {
            gains: number_list(text, "gains", v)?,
        });
    }
    let v = &table["powers"];
    Ok(PdpSpec::Powers {
        powers: number_list(text, "powers", v)?,
    })
}

pub fn parse_pdp(text: &str) -> Result<PowerDelayProfile> {
    let spec = parse_pdp_spec(text)?;
    spec.build().map_err(|e| match e {
        Error::InvalidParameter(m) => parse_error("profile", m),
        other => other,
    })
}

pub fn load_pdp(path: &Path) -> Result<PowerDelayProfile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| parse_error(path.display().to_string(), e.to_string()))?;
    parse_pdp(&text).map_err(|e| match e {
        Error::Parse { location, message } => {
            parse_error(format!("{}: {location}", path.display()), message)
        }
        other => other,
    })
}
