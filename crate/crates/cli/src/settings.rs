//! Flat key/value run configuration.
//!
//! Precedence, lowest first: built-in defaults, figure preset, config file,
//! `--set key=value`, dedicated flags.

use std::path::Path;

use freqsel_core::channel::OfdmConfig;
use freqsel_core::experiments::ExperimentParams;
use freqsel_core::scheduler::OutagePolicy;
use freqsel_core::selectivity::default_k_c;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Integer grid written either as a list or as a range string
/// (`"a..b"`, `"a..=b"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntGrid {
    List(Vec<usize>),
    Range(String),
}

impl IntGrid {
    pub fn values(&self, key: &str) -> Result<Vec<usize>, CliError> {
        match self {
            IntGrid::List(v) => Ok(v.clone()),
            IntGrid::Range(s) => parse_int_grid(s).map_err(|m| CliError::Config(format!("{key}: {m}"))),
        }
    }
}

pub fn parse_int_grid(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("'{t}' is not a nonnegative integer"));
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b) = (num(a)?, num(b)?);
        if b < a {
            return Err(format!("empty range '{s}'"));
        }
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if b <= a {
            return Err(format!("empty range '{s}'"));
        }
        return Ok((a..b).collect());
    }
    s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect()
}

pub fn parse_float_grid(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub n_sc: usize,
    pub block_size: usize,
    pub snr_db: f64,
    pub max_taps: usize,
    pub n_tx: usize,
    pub k_users: usize,
    pub n_fb: usize,
    pub t_c: f64,
    pub n_slots: usize,
    pub warmup_slots: usize,
    pub mc_trials: usize,
    pub seed: u64,
    pub kappa: f64,
    /// 0 selects `2π / n_sc`.
    pub k_c: f64,
    pub eff_paths_grid: Vec<f64>,
    pub delay_grid: IntGrid,
    pub block_size_grid: IntGrid,
    pub channel_eff_paths: f64,
    pub simulate: bool,
    pub outage_policy: String,
    /// Cyclic delay used by `simulate`.
    pub delay: usize,
}

impl Default for Settings {
    fn default() -> Self {
        let p = ExperimentParams::default();
        Self {
            n_sc: p.ofdm.n_sc,
            block_size: p.ofdm.block_size,
            snr_db: 20.0,
            max_taps: p.max_taps,
            n_tx: p.n_tx,
            k_users: p.k_users,
            n_fb: p.n_fb,
            t_c: p.t_c,
            n_slots: p.n_slots,
            warmup_slots: p.warmup_slots,
            mc_trials: p.mc_trials,
            seed: p.seed,
            kappa: p.kappa,
            k_c: 0.0,
            eff_paths_grid: p.eff_paths_grid,
            delay_grid: IntGrid::Range("0..=64".into()),
            block_size_grid: IntGrid::List(p.block_size_grid),
            channel_eff_paths: p.channel_eff_paths,
            simulate: true,
            outage_policy: "skip".into(),
            delay: 0,
        }
    }
}

/// `(key, type, description)` in the order shown by `--help`.
const KEYS: &[(&str, &str, &str)] = &[
    ("n_sc", "int", "subcarriers (power of two)"),
    ("block_size", "int", "subcarriers per resource block"),
    ("snr_db", "float", "SNR scale P/noise in dB"),
    ("max_taps", "int", "tap limit of exponential profiles"),
    ("n_tx", "int", "transmit antennas for CDD"),
    ("k_users", "int", "users per cell"),
    ("n_fb", "int", "best blocks fed back per user"),
    ("t_c", "float", "PF averaging window in slots"),
    ("n_slots", "int", "measured slots per campaign"),
    ("warmup_slots", "int", "unmeasured slots before each campaign"),
    ("mc_trials", "int", "draws for the single-user max C_b estimate"),
    ("seed", "int", "64-bit seed for all randomness"),
    ("kappa", "float", "Chebyshev delay coverage in (0,1)"),
    ("k_c", "float", "coherence bandwidth constant, 0 = 2*pi/n_sc"),
    ("eff_paths_grid", "float list", "effective-path targets swept"),
    ("delay_grid", "int list | \"a..=b\"", "cyclic delays swept"),
    ("block_size_grid", "int list | \"a..=b\"", "block sizes swept"),
    ("channel_eff_paths", "float", "channel of single-channel sweeps and simulate"),
    ("simulate", "bool", "run scheduler campaigns in sweeps"),
    ("outage_policy", "string", "skip | round_robin"),
    ("delay", "int", "cyclic delay used by simulate"),
];

fn show(v: &toml::Value) -> String {
    match v {
        toml::Value::Array(a) => {
            let items: Vec<String> = a.iter().map(show).collect();
            format!("[{}]", items.join(", "))
        }
        other => other.to_string(),
    }
}

/// Defaults table for `--help`.
pub fn defaults_table() -> String {
    let table = toml::Table::try_from(Settings::default()).expect("settings serialise");
    let mut out = String::from("Configuration keys (config file, or --set key=value):\n\n");
    out.push_str(&format!("  {:<18} {:<20} {:<28} {}\n", "key", "type", "default", "meaning"));
    for (k, ty, doc) in KEYS {
        let v = table.get(*k).map(show).unwrap_or_default();
        out.push_str(&format!("  {k:<18} {ty:<20} {v:<28} {doc}\n"));
    }
    out
}

/// Loads the config file, reporting errors with their line.
pub fn read_config_file(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let located = |e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| format!("line {}: ", text[..s.start.min(text.len())].matches('\n').count() + 1))
            .unwrap_or_default();
        CliError::Config(format!("{}: {line}{}", path.display(), e.message().trim()))
    };
    let table: toml::Table = text.parse().map_err(located)?;
    // Checks key names and value types against the file text.
    toml::from_str::<Settings>(&text).map_err(located)?;
    Ok(table)
}

/// Applies one `key=value` override; the value uses config-file syntax,
/// with bare words accepted as strings.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got '{assignment}'")))?;
    let key = key.trim();
    let raw = value.trim();
    let parsed: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    table.insert(key.to_string(), parsed);
    Ok(())
}

pub fn settings_from(table: toml::Table) -> Result<Settings, CliError> {
    Settings::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config(e.message().trim().to_string()))
}

impl Settings {
    pub fn ofdm(&self) -> Result<OfdmConfig, CliError> {
        OfdmConfig::new(self.n_sc, self.block_size, 10f64.powf(self.snr_db / 10.0)).map_err(CliError::config)
    }

    pub fn outage(&self) -> Result<OutagePolicy, CliError> {
        self.outage_policy.parse().map_err(CliError::config)
    }

    pub fn k_c(&self) -> f64 {
        if self.k_c == 0.0 {
            default_k_c(self.n_sc)
        } else {
            self.k_c
        }
    }

    pub fn experiment_params(&self) -> Result<ExperimentParams, CliError> {
        let p = ExperimentParams {
            ofdm: self.ofdm()?,
            max_taps: self.max_taps,
            n_tx: self.n_tx,
            k_users: self.k_users,
            n_fb: self.n_fb,
            t_c: self.t_c,
            n_slots: self.n_slots,
            warmup_slots: self.warmup_slots,
            mc_trials: self.mc_trials,
            seed: self.seed,
            kappa: self.kappa,
            k_c: self.k_c(),
            eff_paths_grid: self.eff_paths_grid.clone(),
            delay_grid: self.delay_grid.values("delay_grid")?,
            block_size_grid: self.block_size_grid.values("block_size_grid")?,
            channel_eff_paths: self.channel_eff_paths,
            simulate: self.simulate,
        };
        p.validate().map_err(CliError::config)?;
        Ok(p)
    }
}
