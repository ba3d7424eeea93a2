//! Flat `key = value` config files and the value parsers shared with flags.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use photonic_core::{QubitAmplitudes, C64};

/// Largest accepted deviation of `|h|^2 + |v|^2` from 1 before inputs are
/// renormalized; covers amplitudes typed to four digits.
pub const NORM_SLACK: f64 = 1e-3;

pub const KEYS: &[&str] = &[
    "control", "target", "input", "a", "b", "c", "d", "sigma", "beta", "gamma", "delta", "hwp", "resource", "alpha",
    "mean-n", "kappa-t", "error-model", "shots", "seed", "trace", "format", "experiment", "from", "to", "points",
    "trials", "range",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('_', "-").to_ascii_lowercase()
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new("config", format!("line {}: expected key = value", i + 1)))?;
            let key = normalize_key(k);
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::new("config", format!("line {}: unknown key {key:?}", i + 1)));
            }
            let v = v.trim().trim_matches('"').to_string();
            values.insert(key, v);
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Flag value if given, else the file's value for `key`, parsed.
pub fn pick<T>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Option<T>, ConfigError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key).map(|s| parse(s).map_err(|m| ConfigError::new(key, m))).transpose(),
    }
}

/// Like [`pick`] for flags kept as raw text: whichever source wins is parsed.
pub fn pick_parsed<T>(
    flag: Option<&str>,
    file: &FileConfig,
    key: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Option<T>, ConfigError> {
    flag.or_else(|| file.get(key)).map(|s| parse(s).map_err(|m| ConfigError::new(key, m))).transpose()
}

pub fn parse_from_str<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| format!("invalid value {s:?}: {e}"))
}

pub fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got {s:?}")),
    }
}

/// Real or complex number: `0.6`, `-1e-3`, `0.3+0.4j`, `2j`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let t = s.trim();
    if t.is_empty() {
        return Err("empty number".into());
    }
    C64::from_str(t).map_err(|_| format!("invalid number {s:?}"))
}

/// Rescales to unit norm when within [`NORM_SLACK`]; rejects otherwise.
pub fn checked_qubit(h: C64, v: C64) -> Result<QubitAmplitudes, String> {
    let n = h.norm_sqr() + v.norm_sqr();
    if (n - 1.0).abs() > NORM_SLACK {
        return Err(format!("amplitudes not normalized (|h|^2 + |v|^2 = {n})"));
    }
    QubitAmplitudes::new(h, v).map_err(|e| e.to_string())
}

/// `H`, `V`, `+`, `-`, or a comma pair of real/complex amplitudes.
pub fn parse_amplitudes(s: &str) -> Result<QubitAmplitudes, String> {
    match s.trim() {
        "H" | "h" => return Ok(QubitAmplitudes::h()),
        "V" | "v" => return Ok(QubitAmplitudes::v()),
        "+" => return Ok(QubitAmplitudes::plus()),
        "-" | "\u{2212}" => return Ok(QubitAmplitudes::minus()),
        _ => {}
    }
    let (h, v) = s
        .split_once(',')
        .ok_or_else(|| format!("expected H, V, +, - or a pair like 0.6,0.8; got {s:?}"))?;
    checked_qubit(parse_complex(h)?, parse_complex(v)?)
}

/// Two basis or diagonal labels, control first: `HV`, `+-`.
pub fn parse_input_pair(s: &str) -> Result<(QubitAmplitudes, QubitAmplitudes), String> {
    let chars: Vec<char> = s.trim().chars().collect();
    if chars.len() != 2 {
        return Err(format!("expected two labels like HV, got {s:?}"));
    }
    Ok((parse_amplitudes(&chars[0].to_string())?, parse_amplitudes(&chars[1].to_string())?))
}

/// `start:end:points`.
pub fn parse_range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:end:points, got {s:?}"));
    }
    Ok((parse_from_str(parts[0])?, parse_from_str(parts[1])?, parse_from_str(parts[2])?))
}
