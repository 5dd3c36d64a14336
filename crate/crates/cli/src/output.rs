//! CSV tables with a provenance header, JSON sidecars, and progress lines.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use freqsel_core::experiments::Table;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Abbreviated digest of the canonical JSON of `config`, hashed like a git
/// blob (`"blob <len>\0" + bytes`) but with SHA-256.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serialises");
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(&bytes);
    hex::encode(h.finalize())[..12].to_string()
}

fn fmt_value(v: f64) -> String {
    // Shortest representation that round-trips.
    format!("{v}")
}

pub fn render_csv(table: &Table, title: &str, seed: u64, hash: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!("# experiment: {title}\n# seed: {seed}\n# config_hash: {hash}\n"));
    let header: Vec<String> = table.columns.iter().map(|c| format!("{}[{}]", c.name, c.unit)).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().copied().map(fmt_value).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    // Write then rename so a failed run never leaves a truncated file.
    let tmp = dir.join(format!(".{name}.partial"));
    std::fs::write(&tmp, contents)
        .and_then(|_| std::fs::rename(&tmp, &path))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s
}

/// Point counter printing `done/total` with an ETA to stderr at most once
/// per second.
pub struct ProgressBar {
    label: String,
    total: usize,
    done: AtomicUsize,
    start: Instant,
    last: Mutex<Instant>,
    enabled: bool,
}

impl ProgressBar {
    pub fn new(label: &str, total: usize, enabled: bool) -> Self {
        let now = Instant::now();
        Self {
            label: label.to_string(),
            total,
            done: AtomicUsize::new(0),
            start: now,
            last: Mutex::new(now),
            enabled,
        }
    }

    pub fn tick(&self) {
        let done = self.done.fetch_add(1, Ordering::Relaxed) + 1;
        if !self.enabled {
            return;
        }
        let mut last = self.last.lock().expect("progress lock");
        if last.elapsed() < Duration::from_secs(1) || done >= self.total {
            return;
        }
        *last = Instant::now();
        let elapsed = self.start.elapsed().as_secs_f64();
        let eta = elapsed / done as f64 * (self.total.saturating_sub(done)) as f64;
        let mut err = std::io::stderr().lock();
        let _ = write!(
            err,
            "\r{}: {done}/{} points, elapsed {elapsed:.0}s, ETA {eta:.0}s   ",
            self.label, self.total
        );
        let _ = err.flush();
    }

    pub fn finish(&self) {
        if self.enabled {
            eprintln!(
                "\r{}: {}/{} points in {:.1}s              ",
                self.label,
                self.done.load(Ordering::Relaxed),
                self.total,
                self.start.elapsed().as_secs_f64()
            );
        }
    }
}
