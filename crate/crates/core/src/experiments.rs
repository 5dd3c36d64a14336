//! Sweep runners for the experiment families exposed by the CLI.
//!
//! Every runner returns an [`ExperimentOutput`]: a numeric table in sweep
//! order plus named scalar markers. Sweep points run on the rayon pool;
//! `collect` keeps the output order independent of completion order.

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdd::{closed_form_delay_for_pdp, search_delay, Objective};
use crate::channel::{cdd_compose_pdp, exponential_pdp_for_eff_paths, CddConfig, OfdmConfig, PowerDelayProfile};
use crate::error::{invalid, Error, Result};
use crate::scheduler::{empirical_max_cb, run_campaign, CampaignConfig, ChannelSpec, OutagePolicy};
use crate::selectivity::{correlation_summary, default_k_c, rms_delay, CorrelationSummary, DEFAULT_KAPPA};
use crate::stats::Estimate;
use crate::throughput::{max_cb_gaussian, max_cb_os_bound, CbMoments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    CorrSweep,
    MaxCbVsSelectivity,
    SumRateVsDelay,
    GainVsBlocksize,
    OptimalDelayVsTau,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::CorrSweep,
        ExperimentId::MaxCbVsSelectivity,
        ExperimentId::SumRateVsDelay,
        ExperimentId::GainVsBlocksize,
        ExperimentId::OptimalDelayVsTau,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::CorrSweep => "corr_sweep",
            ExperimentId::MaxCbVsSelectivity => "max_cb_vs_selectivity",
            ExperimentId::SumRateVsDelay => "sum_rate_vs_delay",
            ExperimentId::GainVsBlocksize => "gain_vs_blocksize",
            ExperimentId::OptimalDelayVsTau => "optimal_delay_vs_tau",
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown experiment '{s}'")))
    }
}

/// Parameters shared by all sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub ofdm: OfdmConfig,
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
    pub k_c: f64,
    /// Effective-path targets of the exponential channels.
    pub eff_paths_grid: Vec<f64>,
    /// Cyclic delays swept where the family has a delay axis.
    pub delay_grid: Vec<usize>,
    pub block_size_grid: Vec<usize>,
    /// Channel used by the single-channel families.
    pub channel_eff_paths: f64,
    /// Run scheduler campaigns where the family has optional simulation.
    pub simulate: bool,
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(invalid(m));
        if self.max_taps == 0 || self.max_taps > self.ofdm.n_sc {
            return fail(format!("max_taps must lie in [1, {}]", self.ofdm.n_sc));
        }
        if self.n_tx == 0 || self.k_users == 0 || self.n_fb == 0 {
            return fail("n_tx, k_users and n_fb must be positive".into());
        }
        if !(self.t_c >= 1.0) {
            return fail(format!("t_c must be >= 1, got {}", self.t_c));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return fail(format!("kappa must lie in (0, 1), got {}", self.kappa));
        }
        if !(self.k_c > 0.0) {
            return fail(format!("k_c must be positive, got {}", self.k_c));
        }
        if self.eff_paths_grid.is_empty() || self.delay_grid.is_empty() || self.block_size_grid.is_empty() {
            return fail("sweep grids must be nonempty".into());
        }
        if let Some(e) = self
            .eff_paths_grid
            .iter()
            .chain(std::iter::once(&self.channel_eff_paths))
            .find(|&&e| !(e >= 1.0 && e <= self.max_taps as f64))
        {
            return fail(format!("effective path target {e} outside [1, {}]", self.max_taps));
        }
        if let Some(d) = self.delay_grid.iter().find(|&&d| d * (self.n_tx.max(2) - 1) >= self.ofdm.n_sc) {
            return fail(format!("cyclic delay {d} too large for n_sc {}", self.ofdm.n_sc));
        }
        for &s in &self.block_size_grid {
            self.ofdm.with_block_size(s)?;
        }
        Ok(())
    }

    fn campaign(&self, seed: u64, policy: OutagePolicy) -> CampaignConfig {
        CampaignConfig {
            k_users: self.k_users,
            n_fb: self.n_fb,
            t_c: self.t_c,
            n_slots: self.n_slots,
            warmup_slots: self.warmup_slots,
            seed,
            outage_policy: policy,
        }
    }
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            ofdm: OfdmConfig::new(1024, 32, 100.0).expect("valid defaults"),
            max_taps: 64,
            n_tx: 2,
            k_users: 32,
            n_fb: 1,
            t_c: 100.0,
            n_slots: 2000,
            warmup_slots: 100,
            mc_trials: 20_000,
            seed: 1,
            kappa: DEFAULT_KAPPA,
            k_c: default_k_c(1024),
            eff_paths_grid: vec![1.0, 1.25, 1.6246, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 64.0],
            delay_grid: (0..=64).collect(),
            block_size_grid: vec![4, 8, 16, 32, 64, 128],
            channel_eff_paths: 1.6246,
            simulate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

fn col(name: impl Into<String>, unit: &str) -> Column {
    Column {
        name: name.into(),
        unit: unit.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub experiment: ExperimentId,
    pub table: Table,
    pub markers: BTreeMap<String, f64>,
}

/// Called once per finished sweep point.
pub type Progress<'a> = &'a (dyn Fn() + Sync);

/// Seed for sweep point `i`; distinct points get decorrelated streams.
pub fn point_seed(seed: u64, i: usize) -> u64 {
    // SplitMix64 finalizer.
    let mut z = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Analytic {
    summary: CorrelationSummary,
    os: f64,
    gaussian: f64,
}

fn analytic(pdp: &PowerDelayProfile, n_tx: usize, delay: usize, cfg: &OfdmConfig) -> Result<Analytic> {
    let composed = cdd_compose_pdp(&vec![pdp.clone(); n_tx], &CddConfig::linear(n_tx, delay)?, cfg)?;
    let summary = correlation_summary(&composed, cfg)?;
    let m = CbMoments::new(cfg.snr_scale, summary.s_sc_intra, summary.s_sc_intra_2)?;
    Ok(Analytic {
        os: max_cb_os_bound(&m, summary.phi)?,
        gaussian: max_cb_gaussian(&m, summary.s_sc_intra, summary.phi)?,
        summary,
    })
}

fn sum_rate(p: &ExperimentParams, pdp: &PowerDelayProfile, delay: usize, seed: u64, policy: OutagePolicy) -> Result<Estimate> {
    let spec = ChannelSpec::linear(pdp, p.n_tx, delay)?;
    Ok(run_campaign(&spec, &p.ofdm, &p.campaign(seed, policy))?.sum_rate)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn run(id: ExperimentId, p: &ExperimentParams, progress: Progress) -> Result<ExperimentOutput> {
    p.validate()?;
    match id {
        ExperimentId::CorrSweep => corr_sweep(p, progress),
        ExperimentId::MaxCbVsSelectivity => max_cb_vs_selectivity(p, progress),
        ExperimentId::SumRateVsDelay => sum_rate_vs_delay(p, progress),
        ExperimentId::GainVsBlocksize => gain_vs_blocksize(p, progress),
        ExperimentId::OptimalDelayVsTau => optimal_delay_vs_tau(p, progress),
    }
}

/// Number of sweep points `run` reports progress for.
pub fn point_count(id: ExperimentId, p: &ExperimentParams) -> usize {
    match id {
        ExperimentId::CorrSweep => p.eff_paths_grid.len() * p.delay_grid.len(),
        ExperimentId::MaxCbVsSelectivity => p.eff_paths_grid.len(),
        ExperimentId::SumRateVsDelay => p.delay_grid.len(),
        ExperimentId::GainVsBlocksize => p.block_size_grid.len(),
        ExperimentId::OptimalDelayVsTau => p.eff_paths_grid.len(),
    }
}

/// Correlation analytics of CDD channels over (selectivity, delay).
/// Delay 0 is the single-antenna channel.
pub fn corr_sweep(p: &ExperimentParams, progress: Progress) -> Result<ExperimentOutput> {
    let points: Vec<(f64, usize)> = p
        .eff_paths_grid
        .iter()
        .flat_map(|&e| p.delay_grid.iter().map(move |&d| (e, d)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(target, delay)| {
            let pdp = exponential_pdp_for_eff_paths(target, p.max_taps)?;
            let composed = cdd_compose_pdp(&vec![pdp.clone(); p.n_tx], &CddConfig::linear(p.n_tx, delay)?, &p.ofdm)?;
            let s = correlation_summary(&composed, &p.ofdm)?;
            progress();
            Ok(vec![
                target,
                delay as f64,
                rms_delay(&pdp).tau_rms,
                rms_delay(&composed).tau_rms,
                s.eff_paths,
                s.eff_blocks,
                s.s_sc_intra,
                s.phi,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput {
        experiment: ExperimentId::CorrSweep,
        table: Table {
            columns: vec![
                col("target_eff_paths", "paths"),
                col("delay", "samples"),
                col("tau_rms", "samples"),
                col("tau_rms_cdd", "samples"),
                col("eff_paths", "paths"),
                col("eff_blocks", "blocks"),
                col("s_sc_intra", "1"),
                col("phi", "1"),
            ],
            rows,
        },
        markers: BTreeMap::new(),
    })
}

/// Analytic approximations against simulation over channel selectivity.
pub fn max_cb_vs_selectivity(p: &ExperimentParams, progress: Progress) -> Result<ExperimentOutput> {
    let rows = p
        .eff_paths_grid
        .par_iter()
        .enumerate()
        .map(|(i, &target)| {
            let pdp = exponential_pdp_for_eff_paths(target, p.max_taps)?;
            let a = analytic(&pdp, 1, 0, &p.ofdm)?;
            let seed = point_seed(p.seed, i);
            let mut row = vec![
                target,
                a.summary.eff_paths,
                a.summary.eff_blocks,
                a.summary.s_sc_intra,
                a.os,
                a.gaussian,
            ];
            if p.simulate {
                let spec = ChannelSpec::siso(pdp.clone());
                let mc = empirical_max_cb(&spec, &p.ofdm, p.mc_trials, seed)?;
                let skip = run_campaign(&spec, &p.ofdm, &p.campaign(seed, OutagePolicy::Skip))?;
                let rr = run_campaign(&spec, &p.ofdm, &p.campaign(seed, OutagePolicy::RoundRobin))?;
                row.extend([
                    mc.mean,
                    mc.stderr,
                    skip.sum_rate.mean,
                    skip.sum_rate.stderr,
                    rr.sum_rate.mean,
                    rr.sum_rate.stderr,
                    skip.outage_rate,
                ]);
            }
            progress();
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![
        col("target_eff_paths", "paths"),
        col("eff_paths", "paths"),
        col("eff_blocks", "blocks"),
        col("s_sc_intra", "1"),
        col("max_cb_os", "bit/s/Hz"),
        col("max_cb_gaussian", "bit/s/Hz"),
    ];
    let mut markers = BTreeMap::new();
    let gauss: Vec<f64> = rows.iter().map(|r| r[5]).collect();
    markers.insert("argmax_eff_paths_gaussian".into(), rows[argmax(&gauss)][1]);
    if p.simulate {
        columns.extend([
            col("mc_max_cb", "bit/s/Hz"),
            col("mc_max_cb_stderr", "bit/s/Hz"),
            col("sum_rate_skip", "bit/s/Hz"),
            col("sum_rate_skip_stderr", "bit/s/Hz"),
            col("sum_rate_round_robin", "bit/s/Hz"),
            col("sum_rate_round_robin_stderr", "bit/s/Hz"),
            col("outage_rate", "1"),
        ]);
        let sim: Vec<f64> = rows.iter().map(|r| r[8]).collect();
        markers.insert("argmax_eff_paths_sum_rate".into(), rows[argmax(&sim)][1]);
    }
    Ok(ExperimentOutput {
        experiment: ExperimentId::MaxCbVsSelectivity,
        table: Table { columns, rows },
        markers,
    })
}

/// Per-user delay choices of the three methods on one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayChoices {
    pub os: usize,
    pub gaussian: usize,
    pub closed_form: usize,
}

pub fn delay_choices(p: &ExperimentParams, pdp: &PowerDelayProfile, cfg: &OfdmConfig) -> Result<DelayChoices> {
    Ok(DelayChoices {
        os: search_delay(pdp, cfg, p.n_tx, Objective::Os)?.d_star,
        gaussian: search_delay(pdp, cfg, p.n_tx, Objective::Gaussian)?.d_star,
        closed_form: closed_form_delay_for_pdp(pdp, cfg.block_size, p.k_c, p.kappa, p.n_tx)?.d_star,
    })
}

/// Simulated and analytic sum rate over the cyclic delay on one channel.
/// Every delay uses the same seed (common random numbers).
pub fn sum_rate_vs_delay(p: &ExperimentParams, progress: Progress) -> Result<ExperimentOutput> {
    let pdp = exponential_pdp_for_eff_paths(p.channel_eff_paths, p.max_taps)?;
    let rows = p
        .delay_grid
        .par_iter()
        .map(|&d| {
            let a = analytic(&pdp, p.n_tx, d, &p.ofdm)?;
            let mut row = vec![d as f64, a.summary.eff_paths, a.summary.eff_blocks, a.os, a.gaussian];
            if p.simulate {
                let r = sum_rate(p, &pdp, d, p.seed, OutagePolicy::Skip)?;
                row.extend([r.mean, r.stderr]);
            }
            progress();
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let choices = delay_choices(p, &pdp, &p.ofdm)?;
    let mut markers = BTreeMap::from([
        ("channel_eff_paths".to_string(), pdp.effective_paths()),
        ("d_star_os".to_string(), choices.os as f64),
        ("d_star_gaussian".to_string(), choices.gaussian as f64),
        ("d_star_closed_form".to_string(), choices.closed_form as f64),
    ]);
    let mut columns = vec![
        col("delay", "samples"),
        col("eff_paths", "paths"),
        col("eff_blocks", "blocks"),
        col("max_cb_os", "bit/s/Hz"),
        col("max_cb_gaussian", "bit/s/Hz"),
    ];
    if p.simulate {
        columns.extend([col("sum_rate", "bit/s/Hz"), col("sum_rate_stderr", "bit/s/Hz")]);
        let sim: Vec<f64> = rows.iter().map(|r| r[5]).collect();
        let best = argmax(&sim);
        markers.insert("d_star_sum_rate".into(), rows[best][0]);
        markers.insert("max_sum_rate".into(), sim[best]);
    }
    Ok(ExperimentOutput {
        experiment: ExperimentId::SumRateVsDelay,
        table: Table { columns, rows },
        markers,
    })
}

/// Analytic CDD gains over the block size, at the fixed delays of the delay
/// grid and at each method's delay.
pub fn gain_vs_blocksize(p: &ExperimentParams, progress: Progress) -> Result<ExperimentOutput> {
    let pdp = exponential_pdp_for_eff_paths(p.channel_eff_paths, p.max_taps)?;
    let rows = p
        .block_size_grid
        .par_iter()
        .map(|&s| {
            let cfg = p.ofdm.with_block_size(s)?;
            let base = analytic(&pdp, 1, 0, &cfg)?;
            let mut row = vec![s as f64, cfg.n_rb as f64, base.summary.eff_blocks, base.gaussian];
            for &d in &p.delay_grid {
                row.push(analytic(&pdp, p.n_tx, d, &cfg)?.gaussian / base.gaussian);
            }
            let c = delay_choices(p, &pdp, &cfg)?;
            for d in [c.os, c.gaussian, c.closed_form] {
                row.push(d as f64);
            }
            let best = analytic(&pdp, p.n_tx, c.gaussian, &cfg)?;
            row.extend([best.summary.eff_paths, best.gaussian / base.gaussian]);
            progress();
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![
        col("block_size", "subcarriers"),
        col("n_rb", "blocks"),
        col("eff_blocks_siso", "blocks"),
        col("max_cb_gaussian_siso", "bit/s/Hz"),
    ];
    columns.extend(p.delay_grid.iter().map(|d| col(format!("gain_d{d}"), "ratio")));
    columns.extend([
        col("d_star_os", "samples"),
        col("d_star_gaussian", "samples"),
        col("d_star_closed_form", "samples"),
        col("optimal_eff_paths", "paths"),
        col("gain_d_star_gaussian", "ratio"),
    ]);
    Ok(ExperimentOutput {
        experiment: ExperimentId::GainVsBlocksize,
        table: Table { columns, rows },
        markers: BTreeMap::from([("channel_eff_paths".to_string(), pdp.effective_paths())]),
    })
}

/// Delay chosen by each method across channel selectivity, with simulated
/// SISO and CDD sum rates when simulation is enabled. The sum-rate-optimal
/// delay is searched over the delay grid.
pub fn optimal_delay_vs_tau(p: &ExperimentParams, progress: Progress) -> Result<ExperimentOutput> {
    let rows = p
        .eff_paths_grid
        .par_iter()
        .enumerate()
        .map(|(i, &target)| {
            let pdp = exponential_pdp_for_eff_paths(target, p.max_taps)?;
            let stats = rms_delay(&pdp);
            let c = delay_choices(p, &pdp, &p.ofdm)?;
            let cf = closed_form_delay_for_pdp(&pdp, p.ofdm.block_size, p.k_c, p.kappa, p.n_tx)?;
            let mut row = vec![
                target,
                pdp.effective_paths(),
                stats.tau_rms,
                c.os as f64,
                c.gaussian as f64,
                c.closed_form as f64,
                cf.d_bc.unwrap_or(0) as f64,
                cf.d_max.unwrap_or(0) as f64,
            ];
            if p.simulate {
                let seed = point_seed(p.seed, i);
                let rate = |d: usize| sum_rate(p, &pdp, d, seed, OutagePolicy::Skip).map(|e| e.mean);
                let siso = run_campaign(&ChannelSpec::siso(pdp.clone()), &p.ofdm, &p.campaign(seed, OutagePolicy::Skip))?
                    .sum_rate
                    .mean;
                let sweep = p.delay_grid.iter().map(|&d| rate(d)).collect::<Result<Vec<_>>>()?;
                let best = argmax(&sweep);
                row.extend([
                    siso,
                    rate(c.os)?,
                    rate(c.gaussian)?,
                    rate(c.closed_form)?,
                    p.delay_grid[best] as f64,
                    sweep[best],
                ]);
            }
            progress();
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![
        col("target_eff_paths", "paths"),
        col("eff_paths", "paths"),
        col("tau_rms", "samples"),
        col("d_star_os", "samples"),
        col("d_star_gaussian", "samples"),
        col("d_star_closed_form", "samples"),
        col("d_bc", "samples"),
        col("d_max", "samples"),
    ];
    if p.simulate {
        columns.extend([
            col("sum_rate_siso", "bit/s/Hz"),
            col("sum_rate_d_star_os", "bit/s/Hz"),
            col("sum_rate_d_star_gaussian", "bit/s/Hz"),
            col("sum_rate_d_star_closed_form", "bit/s/Hz"),
            col("d_star_sum_rate", "samples"),
            col("sum_rate_d_star_sum_rate", "bit/s/Hz"),
        ]);
    }
    Ok(ExperimentOutput {
        experiment: ExperimentId::OptimalDelayVsTau,
        table: Table { columns, rows },
        markers: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentParams {
        ExperimentParams {
            ofdm: OfdmConfig::new(256, 16, 100.0).unwrap(),
            max_taps: 32,
            k_users: 4,
            n_slots: 50,
            warmup_slots: 10,
            mc_trials: 500,
            eff_paths_grid: vec![1.0, 2.0, 8.0],
            delay_grid: vec![0, 1, 2, 4],
            block_size_grid: vec![8, 16, 32],
            ..ExperimentParams::default()
        }
    }

    #[test]
    fn ids_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("fig6".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn every_family_runs_and_is_deterministic() {
        let p = small();
        for id in ExperimentId::ALL {
            let a = run(id, &p, &|| {}).unwrap();
            assert_eq!(a.table.rows.len(), point_count(id, &p), "{id}");
            assert!(a.table.rows.iter().all(|r| r.len() == a.table.columns.len()), "{id}");
            assert_eq!(a, run(id, &p, &|| {}).unwrap(), "{id}");
        }
    }

    #[test]
    fn flat_channel_correlation_rows() {
        let p = ExperimentParams {
            eff_paths_grid: vec![1.0],
            delay_grid: vec![0],
            ..small()
        };
        let out = corr_sweep(&p, &|| {}).unwrap();
        assert_eq!(out.table.column("eff_paths").unwrap(), vec![1.0]);
        assert!((out.table.column("eff_blocks").unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_catches_bad_grids() {
        let mut p = small();
        p.eff_paths_grid.clear();
        assert!(p.validate().is_err());
        let mut p = small();
        p.block_size_grid = vec![3];
        assert!(p.validate().is_err());
        let mut p = small();
        p.eff_paths_grid = vec![100.0];
        assert!(p.validate().is_err());
    }
}
