//! TOML run configurations. Every configuration carries a mandatory `seed`.

use std::path::{Path, PathBuf};

use grassproj_core::consts::RECT_DILATION;
use grassproj_core::highlow::FalconerParams;
use grassproj_core::incidence::{KaufmanParams, LineFamily};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// A parsed configuration with the hash of its canonical form.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub config: T,
    pub hash: String,
    pub seed: u64,
}

/// SHA-256 of the value's JSON form with object keys sorted, so the hash does
/// not depend on key order in the source file.
pub fn canonical_hash(value: &toml::Value) -> String {
    // serde_json's default map is ordered by key.
    let json = serde_json::to_value(value).expect("TOML values are representable as JSON");
    hex(&Sha256::digest(json.to_string().as_bytes()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<Loaded<T>, CliError> {
    let value: toml::Value =
        toml::from_str(text).map_err(|e| CliError::usage(format!("invalid TOML: {e}")))?;
    let seed = match value.get("seed") {
        Some(toml::Value::Integer(s)) if *s >= 0 => *s as u64,
        Some(_) => return Err(CliError::usage("seed must be a nonnegative integer")),
        None => return Err(CliError::usage("missing mandatory key `seed`")),
    };
    let hash = canonical_hash(&value);
    let config = value
        .try_into()
        .map_err(|e: toml::de::Error| CliError::usage(format!("invalid config: {e}")))?;
    Ok(Loaded { config, hash, seed })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    parse(&text)
}

/// Directory for a run's artifacts: the command-line override, else the
/// config's `output_path`, else `out/<name>`.
pub fn output_dir(cli: Option<&Path>, configured: Option<&str>, name: &str) -> PathBuf {
    match (cli, configured) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => Path::new("out").join(name),
    }
}

/// Configuration of `grassproj highlow`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighLowConfig {
    pub name: String,
    #[serde(default = "three")]
    pub n: usize,
    #[serde(default = "two")]
    pub k: usize,
    #[serde(default = "half")]
    pub mu: f64,
    pub lines: LineFamily,
    /// `delta = 2^-delta_exponent`.
    pub delta_exponent: u32,
    /// Grid points per axis.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Cutoff factor; defaults to `(log2 1/delta)^2`. The scaling check also runs at `K/2`.
    #[serde(default)]
    pub k_factor: Option<f64>,
    /// Frostman exponent of the slab families.
    pub s: f64,
    #[serde(default = "one")]
    pub v_candidate_factor: f64,
    #[serde(default = "default_dilation")]
    pub dilation: f64,
    /// Also write the assembled field as a raw dump.
    #[serde(default)]
    pub dump_field: bool,
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<String>,
}

fn three() -> usize {
    3
}
fn two() -> usize {
    2
}
fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn default_grid() -> usize {
    grassproj_core::consts::DEFAULT_GRID
}
fn default_dilation() -> f64 {
    RECT_DILATION
}

impl HighLowConfig {
    pub fn delta(&self) -> f64 {
        2f64.powi(-(self.delta_exponent as i32))
    }

    pub fn k_factor(&self) -> f64 {
        self.k_factor
            .unwrap_or((self.delta_exponent as f64).powi(2))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n != 3 || self.k != 2 {
            return Err(CliError::usage(
                "highlow runs on n = 3, k = 2 only (the chart grid is R^4)",
            ));
        }
        if !(3..=5).contains(&self.delta_exponent) {
            return Err(CliError::usage(
                "highlow needs delta >= 2^-5 (delta_exponent in 3..=5)",
            ));
        }
        if !self.grid.is_power_of_two() || self.grid < 4 {
            return Err(CliError::usage("grid must be a power of two >= 4"));
        }
        if !(self.k_factor() >= 2.0) {
            return Err(CliError::usage("k_factor must be at least 2"));
        }
        if !(self.s > 0.0) || !(self.dilation >= 1.0) || !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(CliError::usage("need s > 0, dilation >= 1 and 0 < mu < 1"));
        }
        Ok(())
    }
}

/// Configuration of `grassproj incidence`: either the incidence-count slope
/// or the squared-multiplicity integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceConfig {
    pub name: String,
    #[serde(default)]
    pub output_path: Option<String>,
    #[serde(flatten)]
    pub mode: IncidenceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum IncidenceMode {
    Kaufman(KaufmanParams),
    Falconer(FalconerParams),
}

impl IncidenceConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let (n, k, s, ladder) = match &self.mode {
            IncidenceMode::Kaufman(p) => (p.n, p.k, p.s, p.scales),
            IncidenceMode::Falconer(p) => (p.n, p.k, p.s, p.scales),
        };
        if !(2 <= k && k < n) {
            return Err(CliError::usage("need 2 <= k < n"));
        }
        if !(s > 0.0 && s < 2.0 * (k as f64 - 1.0)) {
            return Err(CliError::usage(format!(
                "s = {s} must satisfy 0 < s < 2(k-1)"
            )));
        }
        if ladder.len() < 3 || ladder.is_empty() || !(ladder.base > 1.0) {
            return Err(CliError::usage(
                "scales need base > 1 and at least 3 entries",
            ));
        }
        Ok(())
    }
}
