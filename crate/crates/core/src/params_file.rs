//! Flat `key = value` parameter files.
//!
//! ```text
//! # comments start with '#'
//! schema = 1
//! kappa = 140.84
//! beta = 0.017
//! P_over_P0 = 6.02
//! ```
//!
//! Physical keys use the [`PhysicalParams::KEYS`] names; unspecified keys
//! keep the nanolaser defaults. The pump enters as `P_over_P0`.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::PhysicalParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{}unknown key '{key}'{}", at_line(*line), suggestion.as_ref().map(|s| format!(", did you mean '{s}'?")).unwrap_or_default())]
    UnknownKey {
        key: String,
        line: Option<usize>,
        suggestion: Option<String>,
    },
    #[error("{}invalid value '{value}' for '{key}': {message}", at_line(*line))]
    InvalidValue {
        key: String,
        value: String,
        line: Option<usize>,
        message: String,
    },
    #[error("line {line}: duplicate key '{key}'")]
    Duplicate { key: String, line: usize },
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

/// One `key = value` entry with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_pairs(text: &str) -> Result<Vec<Pair>, ConfigError> {
    let mut out: Vec<Pair> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                message: format!("expected 'key = value', got '{body}'"),
            });
        };
        let key = k.trim();
        let value = v.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax {
                line,
                message: format!("malformed key '{key}'"),
            });
        }
        if out.iter().any(|p| p.key == key) {
            return Err(ConfigError::Duplicate {
                key: key.to_string(),
                line,
            });
        }
        out.push(Pair {
            key: key.to_string(),
            value: value.to_string(),
            line,
        });
    }
    Ok(out)
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Closest candidate by edit distance (case-insensitive), if reasonably close.
pub fn nearest_key<'a, I>(key: &str, candidates: I) -> Option<String>
where
    I: IntoIterator<Item = &'a str>,
{
    let lower = key.to_ascii_lowercase();
    candidates
        .into_iter()
        .map(|c| (edit_distance(&lower, &c.to_ascii_lowercase()), c))
        .min_by_key(|(d, _)| *d)
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .map(|(_, c)| c.to_string())
}

pub fn parse_f64(pair: &Pair) -> Result<f64, ConfigError> {
    pair.value
        .parse::<f64>()
        .map_err(|e| ConfigError::InvalidValue {
            key: pair.key.clone(),
            value: pair.value.clone(),
            line: Some(pair.line),
            message: e.to_string(),
        })
}

/// Parameters plus the optional pump ratio read from a parameter file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFile {
    pub params: PhysicalParams,
    pub pump_ratio: Option<f64>,
}

impl ParamFile {
    pub const PUMP_KEY: &'static str = "P_over_P0";

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut params = PhysicalParams::default();
        let mut pump_ratio = None;
        for pair in parse_pairs(text)? {
            match pair.key.as_str() {
                "schema" => check_schema(&pair)?,
                Self::PUMP_KEY => pump_ratio = Some(parse_f64(&pair)?),
                key if params.get(key).is_some() => {
                    params.set(key, parse_f64(&pair)?);
                }
                key => {
                    let known = PhysicalParams::KEYS
                        .iter()
                        .copied()
                        .chain([Self::PUMP_KEY, "schema"]);
                    return Err(ConfigError::UnknownKey {
                        key: key.to_string(),
                        line: Some(pair.line),
                        suggestion: nearest_key(key, known),
                    });
                }
            }
        }
        params
            .validate()
            .map_err(|e| ConfigError::InvalidValue {
                key: "params".into(),
                value: String::new(),
                line: None,
                message: e.to_string(),
            })?;
        Ok(Self { params, pump_ratio })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("schema = {SCHEMA_VERSION}\n{}", params_text(&self.params));
        if let Some(r) = self.pump_ratio {
            out.push_str(&format!("{} = {r}\n", Self::PUMP_KEY));
        }
        out
    }
}

pub fn check_schema(pair: &Pair) -> Result<(), ConfigError> {
    if pair.value.parse::<u32>() == Ok(SCHEMA_VERSION) {
        Ok(())
    } else {
        Err(ConfigError::InvalidValue {
            key: pair.key.clone(),
            value: pair.value.clone(),
            line: Some(pair.line),
            message: format!("supported schema is {SCHEMA_VERSION}"),
        })
    }
}

/// Canonical `key = value` lines for every physical parameter.
pub fn params_text(p: &PhysicalParams) -> String {
    PhysicalParams::KEYS
        .iter()
        .map(|k| format!("{k} = {}\n", p.get(k).unwrap_or(f64::NAN)))
        .collect()
}

/// First 16 hex digits of the SHA-256 of the canonical parameter text.
pub fn params_hash(p: &PhysicalParams) -> String {
    let digest = Sha256::digest(params_text(p).as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
