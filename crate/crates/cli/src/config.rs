//! Flat `key = value` experiment configuration with command-line overrides.

use crate::error::CliError;
use holomera::mera::{HologronGauge, MAX_DEPTH};
use holomera::noise::NoiseKind;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MIN_DEPTH: usize = 3;

/// Keys accepted in config files and `--set` overrides, with their defaults.
pub const KEYS: &[(&str, &str)] = &[
    ("depth", "8"),
    ("gauge", "symmetric"),
    ("seed", "0"),
    ("base", "0"),
    ("rho_min", ""),
    ("rho_max", ""),
    ("mode", "radial"),
    ("ds", "1"),
    ("s", "0"),
    ("dmax", ""),
    ("k", "3"),
    ("variant", "average"),
    ("coefficients", "false"),
    ("placement", "0,0"),
    ("model", "1p"),
    ("input", ""),
    ("ell", ""),
    ("fit_lo", "4"),
    ("fit_hi", ""),
    ("fit_dmin", ""),
    ("fit_dmax", "1e9"),
    ("noise", "control"),
    ("epsilon", "0.005,0.006,0.007"),
    ("samples", "100"),
    ("fidelity_samples", "10000"),
    ("mass", "1"),
    ("newton_g", "0.01"),
    ("circumference", "6.283185307179586"),
    ("velocity", "1"),
    ("ads_ell", "1.4426950408889634"),
    ("ads_rho_max", "8"),
    ("ads_points", "81"),
    ("rho_ref", "0"),
    ("arclength", "0.5"),
    ("n", "8"),
    ("tolerance", "1e-9"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum GaugeSpec {
    Symmetric,
    Random(u64),
    Angles([f64; 3], f64),
}

impl GaugeSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let text = text.trim();
        if text == "symmetric" {
            return Ok(Self::Symmetric);
        }
        if let Some(seed) = text.strip_prefix("random:") {
            return Ok(Self::Random(parse_value("gauge", seed)?));
        }
        if let Some(angles) = text.strip_prefix("angles:") {
            let v: Vec<f64> = parse_list("gauge", angles)?;
            if v.len() != 4 {
                return Err(CliError::Config(format!("gauge angles need four values, got {}", v.len())));
            }
            return Ok(Self::Angles([v[0], v[1], v[2]], v[3]));
        }
        Err(CliError::Config(format!(
            "gauge must be symmetric, random:<seed> or angles:<t1>,<t2>,<t3>,<phi>, got {text:?}"
        )))
    }

    pub fn gauge(&self) -> HologronGauge {
        match self {
            Self::Symmetric => HologronGauge::symmetric(),
            Self::Random(seed) => HologronGauge::random(*seed),
            Self::Angles(theta, phi) => HologronGauge::new(*theta, *phi),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, text: &str) -> Result<T, CliError> {
    text.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse {key} = {text:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, text: &str) -> Result<Vec<T>, CliError> {
    text.split(',').map(|t| parse_value(key, t)).collect()
}

/// Resolved configuration: every known key has a value, possibly empty for derived defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn defaults() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn load(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.parse_text(&text)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, text: &str) -> Result<(), CliError> {
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {text:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown config key {key:?}"))),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        parse_value(key, self.raw(key))
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        if self.raw(key).is_empty() {
            Ok(default)
        } else {
            self.get(key)
        }
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        parse_list(key, self.raw(key))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" | "" => Ok(false),
            other => Err(CliError::Config(format!("{key} must be a boolean, got {other:?}"))),
        }
    }

    pub fn optional_path(&self, key: &str) -> Option<PathBuf> {
        let raw = self.raw(key);
        (!raw.is_empty()).then(|| PathBuf::from(raw))
    }

    /// Network depth, with depths above the supported maximum reported as capacity errors.
    pub fn depth(&self) -> Result<usize, CliError> {
        let d: usize = self.get("depth")?;
        if d > MAX_DEPTH {
            return Err(CliError::Capacity(format!("depth {d} exceeds the maximum {MAX_DEPTH}")));
        }
        if d < MIN_DEPTH {
            return Err(CliError::Config(format!("depth must be at least {MIN_DEPTH}, got {d}")));
        }
        Ok(d)
    }

    pub fn gauge(&self) -> Result<GaugeSpec, CliError> {
        GaugeSpec::parse(self.raw("gauge"))
    }

    pub fn noise_kind(&self) -> Result<NoiseKind, CliError> {
        match self.raw("noise") {
            "control" => Ok(NoiseKind::ControlError { centered: false }),
            "control-centered" => Ok(NoiseKind::ControlError { centered: true }),
            "dephasing" => Ok(NoiseKind::Dephasing),
            other => Err(CliError::Config(format!(
                "noise must be control, control-centered or dephasing, got {other:?}"
            ))),
        }
    }

    /// Checks every key that every command may read.
    pub fn validate(&self) -> Result<(), CliError> {
        self.depth()?;
        self.gauge()?;
        self.noise_kind()?;
        self.get::<u64>("seed")?;
        self.flag("coefficients")?;
        for key in ["rho_min", "rho_max", "dmax", "base", "ds", "s", "k", "samples", "fidelity_samples", "n"] {
            self.get_or::<usize>(key, 0)?;
        }
        for key in ["ell", "fit_lo", "fit_hi", "fit_dmin", "fit_dmax", "tolerance"] {
            self.get_or::<f64>(key, 0.0)?;
        }
        self.list::<f64>("epsilon")?;
        self.list::<usize>("placement")?;
        Ok(())
    }

    /// Canonical `key=value` lines of the resolved configuration.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of the command and canonical configuration.
    pub fn hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(self.canonical().as_bytes());
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut c = Config::defaults();
        c.parse_text("# sweep\ndepth = 6  # small\n\nseed=4\n").unwrap();
        c.apply_override("samples=20").unwrap();
        assert_eq!(c.depth().unwrap(), 6);
        assert_eq!(c.get::<u64>("seed").unwrap(), 4);
        assert_eq!(c.get::<usize>("samples").unwrap(), 20);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        let mut c = Config::defaults();
        assert!(matches!(c.set("bogus", "1"), Err(CliError::Config(_))));
        assert!(matches!(c.parse_text("depth 6"), Err(CliError::Config(_))));
    }

    #[test]
    fn depth_limits() {
        let mut c = Config::defaults();
        c.set("depth", "13").unwrap();
        assert!(matches!(c.depth(), Err(CliError::Capacity(_))));
        c.set("depth", "2").unwrap();
        assert!(matches!(c.depth(), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_depends_on_values_and_command() {
        let a = Config::defaults();
        let mut b = Config::defaults();
        assert_eq!(a.hash("x"), b.hash("x"));
        assert_ne!(a.hash("x"), a.hash("y"));
        b.set("seed", "1").unwrap();
        assert_ne!(a.hash("x"), b.hash("x"));
        assert_eq!(a.hash("x").len(), 16);
    }

    #[test]
    fn gauge_specs() {
        assert_eq!(GaugeSpec::parse("symmetric").unwrap(), GaugeSpec::Symmetric);
        assert_eq!(GaugeSpec::parse("random:7").unwrap(), GaugeSpec::Random(7));
        assert_eq!(
            GaugeSpec::parse("angles:0.1,0.2,0.3,0.4").unwrap(),
            GaugeSpec::Angles([0.1, 0.2, 0.3], 0.4)
        );
        assert!(GaugeSpec::parse("angles:1,2").is_err());
        assert!(GaugeSpec::parse("other").is_err());
    }
}
