//! `freqsel`: analysis reports, delay optimisation, scheduler campaigns and
//! figure sweeps as CSV + JSON files.

mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freqsel_core::cdd::{closed_form_delay_for_pdp, search_delay, DelayDecision, Objective};
use freqsel_core::channel::{
    cdd_compose_pdp, exponential_pdp_for_eff_paths, make_exponential_pdp, CddConfig, OfdmConfig, PowerDelayProfile,
};
use freqsel_core::experiments::{self, Column, ExperimentId, Table};
use freqsel_core::pdp_file::load_pdp;
use freqsel_core::scheduler::{run_campaign_with_progress, CampaignConfig, ChannelSpec};
use freqsel_core::selectivity::{correlation_summary, rms_delay};
use freqsel_core::throughput::{max_cb_gaussian, max_cb_os_bound, CbMoments};
use serde::Serialize;

use output::{config_hash, render_csv, to_json, write_file, ProgressBar};
use settings::{apply_override, parse_float_grid, parse_int_grid, read_config_file, settings_from, Settings};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input; exit code 2.
    Config(String),
    /// Failure while running; exit code 3.
    Runtime(String),
}

impl CliError {
    pub fn config(e: freqsel_core::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn runtime(e: freqsel_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "freqsel",
    version,
    about = "Frequency selectivity, cyclic delay selection and PF scheduling experiments for block-based OFDMA",
    after_help = settings::defaults_table()
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value config file (TOML syntax).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for all randomness (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV and JSON output.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out_dir: PathBuf,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Effective-path targets, e.g. "1,2,4,8".
    #[arg(long, global = true, value_name = "LIST")]
    eff_paths_grid: Option<String>,
    /// Cyclic delays, e.g. "0..=32" or "0,2,4".
    #[arg(long, global = true, value_name = "GRID")]
    delay_grid: Option<String>,
    /// Block sizes, e.g. "8,16,32".
    #[arg(long, global = true, value_name = "GRID")]
    block_size_grid: Option<String>,
    /// No progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
}

/// Channel selection; defaults to the config's `channel_eff_paths`.
#[derive(Args, Debug)]
struct ChannelArgs {
    /// Power delay profile file (gain list or exponential definition).
    #[arg(long, value_name = "FILE", conflicts_with_all = ["eff_paths", "tau_o"])]
    pdp: Option<PathBuf>,
    /// Exponential profile with this effective number of paths.
    #[arg(long, conflicts_with = "tau_o")]
    eff_paths: Option<f64>,
    /// Exponential profile with this decay constant (samples).
    #[arg(long)]
    tau_o: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Correlation, throughput moments and delay choices for one channel (no simulation).
    Analyze {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Analyse the CDD channel with this linear cyclic delay.
        #[arg(long)]
        delay: Option<usize>,
        /// Include correlation profiles and objective curves.
        #[arg(long)]
        full: bool,
    },
    /// Per-user cyclic delay by the two search methods and the closed form.
    OptimizeDelay {
        #[command(flatten)]
        channel: ChannelArgs,
    },
    /// One PF scheduling campaign for the configured channel and delay.
    #[command(after_help = settings::defaults_table())]
    Simulate {
        #[command(flatten)]
        channel: ChannelArgs,
    },
    /// Regenerate the data behind a figure: fig4..fig11 or an experiment id.
    #[command(after_help = figure_help())]
    Reproduce {
        #[arg(value_name = "FIGURE-ID")]
        figure: String,
    },
}

const FIGURES: &[(&str, ExperimentId, &str)] = &[
    ("fig4", ExperimentId::CorrSweep, "effective paths/blocks and intra-block sum vs selectivity"),
    ("fig5", ExperimentId::CorrSweep, "the same quantities vs cyclic delay"),
    ("fig6", ExperimentId::MaxCbVsSelectivity, "approximations, simulated max C_b and sum rates vs selectivity"),
    ("fig7", ExperimentId::SumRateVsDelay, "sum rate vs cyclic delay with per-method delay markers"),
    ("fig8", ExperimentId::OptimalDelayVsTau, "SISO vs CDD sum rate at each method's delay"),
    ("fig9", ExperimentId::GainVsBlocksize, "CDD gain vs block size at fixed delays"),
    ("fig10", ExperimentId::GainVsBlocksize, "optimal delay and selectivity vs block size"),
    ("fig11", ExperimentId::OptimalDelayVsTau, "optimal delay vs delay spread by method (analytic)"),
];

fn figure_help() -> String {
    let mut s = String::from("Figure ids:\n");
    for (f, id, doc) in FIGURES {
        s.push_str(&format!("  {f:<6} {:<22} {doc}\n", id.as_str()));
    }
    s.push_str("\nExperiment ids run without a figure preset: ");
    let ids: Vec<&str> = ExperimentId::ALL.iter().map(|e| e.as_str()).collect();
    s.push_str(&ids.join(" | "));
    s.push_str("\n\n");
    s.push_str(&settings::defaults_table());
    s
}

/// Config entries a figure sets before the config file is applied.
fn figure_preset(figure: &str) -> toml::Table {
    let mut t = toml::Table::new();
    let ints = |v: &[i64]| toml::Value::Array(v.iter().map(|&x| toml::Value::Integer(x)).collect());
    match figure {
        "fig4" => {
            t.insert("delay_grid".into(), ints(&[0]));
        }
        "fig5" => {
            t.insert("eff_paths_grid".into(), toml::Value::Array(vec![toml::Value::Float(1.6246)]));
        }
        "fig8" => {
            t.insert("delay_grid".into(), toml::Value::String("0..=32".into()));
        }
        "fig9" | "fig10" => {
            t.insert("delay_grid".into(), ints(&[1, 2, 4, 8, 16]));
        }
        "fig11" => {
            t.insert("simulate".into(), toml::Value::Boolean(false));
        }
        _ => {}
    }
    t
}

fn resolve_settings(common: &Common, preset: toml::Table) -> Result<Settings, CliError> {
    let mut table = preset;
    if let Some(path) = &common.config {
        table.extend(read_config_file(path)?);
    }
    for s in &common.set {
        apply_override(&mut table, s)?;
    }
    let mut settings = settings_from(table)?;
    if let Some(seed) = common.seed {
        settings.seed = seed;
    }
    fn grid_err(flag: &'static str) -> impl Fn(String) -> CliError {
        move |m| CliError::Config(format!("--{flag}: {m}"))
    }
    if let Some(g) = &common.eff_paths_grid {
        settings.eff_paths_grid = parse_float_grid(g).map_err(grid_err("eff-paths-grid"))?;
    }
    if let Some(g) = &common.delay_grid {
        settings.delay_grid = settings::IntGrid::List(parse_int_grid(g).map_err(grid_err("delay-grid"))?);
    }
    if let Some(g) = &common.block_size_grid {
        settings.block_size_grid = settings::IntGrid::List(parse_int_grid(g).map_err(grid_err("block-size-grid"))?);
    }
    Ok(settings)
}

fn resolve_channel(args: &ChannelArgs, s: &Settings) -> Result<(PowerDelayProfile, String), CliError> {
    let r = if let Some(path) = &args.pdp {
        (load_pdp(path).map_err(CliError::config)?, format!("file {}", path.display()))
    } else if let Some(t) = args.tau_o {
        (make_exponential_pdp(t, s.max_taps).map_err(CliError::config)?, format!("exponential tau_o={t}"))
    } else {
        let e = args.eff_paths.unwrap_or(s.channel_eff_paths);
        (
            exponential_pdp_for_eff_paths(e, s.max_taps).map_err(CliError::config)?,
            format!("exponential eff_paths={e}"),
        )
    };
    if r.0.len() > s.n_sc {
        return Err(CliError::Config(format!("profile has {} taps, more than n_sc", r.0.len())));
    }
    Ok(r)
}

#[derive(Serialize)]
struct ChannelReport {
    source: String,
    taps: usize,
    gains: Vec<f64>,
    eff_paths: f64,
    mean_delay: f64,
    tau_rms: f64,
}

#[derive(Serialize)]
struct CorrelationReport {
    block_size: usize,
    eff_paths: f64,
    eff_blocks: f64,
    s_sc_intra: f64,
    s_sc_intra_2: f64,
    phi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_sc: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_rb: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct MaxCbReport {
    order_statistics: f64,
    gaussian: f64,
}

#[derive(Serialize)]
struct DelayReport {
    os_search: DelayDecision,
    gaussian_search: DelayDecision,
    rms_closed_form: DelayDecision,
}

#[derive(Serialize)]
struct AnalysisReport {
    ofdm: OfdmConfig,
    channel: ChannelReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    cdd: Option<CddConfig>,
    correlation: CorrelationReport,
    moments: CbMoments,
    max_cb: MaxCbReport,
    delay: DelayReport,
}

fn delay_report(pdp: &PowerDelayProfile, s: &Settings, cfg: &OfdmConfig, curves: bool) -> Result<DelayReport, CliError> {
    let strip = |mut d: DelayDecision| {
        if !curves {
            d.objective_curve = None;
        }
        d
    };
    Ok(DelayReport {
        os_search: strip(search_delay(pdp, cfg, s.n_tx, Objective::Os).map_err(CliError::config)?),
        gaussian_search: strip(search_delay(pdp, cfg, s.n_tx, Objective::Gaussian).map_err(CliError::config)?),
        rms_closed_form: closed_form_delay_for_pdp(pdp, cfg.block_size, s.k_c(), s.kappa, s.n_tx)
            .map_err(CliError::config)?,
    })
}

fn analyze(common: &Common, channel: &ChannelArgs, delay: Option<usize>, full: bool) -> Result<(), CliError> {
    let s = resolve_settings(common, toml::Table::new())?;
    let cfg = s.ofdm()?;
    let (pdp, source) = resolve_channel(channel, &s)?;
    let (analysed, cdd) = match delay {
        Some(d) => {
            let cdd = CddConfig::linear(s.n_tx, d).map_err(CliError::config)?;
            let composed = cdd_compose_pdp(&vec![pdp.clone(); s.n_tx], &cdd, &cfg).map_err(CliError::config)?;
            (composed, Some(cdd))
        }
        None => (pdp.clone(), None),
    };
    let sum = correlation_summary(&analysed, &cfg).map_err(CliError::config)?;
    let moments = CbMoments::new(cfg.snr_scale, sum.s_sc_intra, sum.s_sc_intra_2).map_err(CliError::runtime)?;
    let max_cb = MaxCbReport {
        order_statistics: max_cb_os_bound(&moments, sum.phi).map_err(CliError::runtime)?,
        gaussian: max_cb_gaussian(&moments, sum.s_sc_intra, sum.phi).map_err(CliError::runtime)?,
    };
    let stats = rms_delay(&pdp);
    let report = AnalysisReport {
        ofdm: cfg,
        channel: ChannelReport {
            source,
            taps: pdp.len(),
            gains: pdp.gains().to_vec(),
            eff_paths: pdp.effective_paths(),
            mean_delay: stats.mu,
            tau_rms: stats.tau_rms,
        },
        cdd,
        correlation: CorrelationReport {
            block_size: sum.block_size,
            eff_paths: sum.eff_paths,
            eff_blocks: sum.eff_blocks,
            s_sc_intra: sum.s_sc_intra,
            s_sc_intra_2: sum.s_sc_intra_2,
            phi: sum.phi,
            rho_sc: full.then(|| sum.rho_sc.clone()),
            rho_rb: full.then(|| sum.rho_rb.clone()),
        },
        moments,
        max_cb,
        delay: delay_report(&analysed, &s, &cfg, full)?,
    };
    print!("{}", to_json(&report));
    Ok(())
}

fn optimize_delay(common: &Common, channel: &ChannelArgs) -> Result<(), CliError> {
    let s = resolve_settings(common, toml::Table::new())?;
    let cfg = s.ofdm()?;
    let (pdp, _) = resolve_channel(channel, &s)?;
    print!("{}", to_json(&delay_report(&pdp, &s, &cfg, true)?));
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a, C: Serialize> {
    experiment: &'a str,
    seed: u64,
    config_hash: &'a str,
    csv: String,
    columns: &'a [Column],
    markers: &'a std::collections::BTreeMap<String, f64>,
    config: &'a C,
}

fn write_outputs<C: Serialize>(
    common: &Common,
    name: &str,
    title: &str,
    seed: u64,
    config: &C,
    table: &Table,
    markers: &std::collections::BTreeMap<String, f64>,
    extra: Option<serde_json::Value>,
) -> Result<(), CliError> {
    let hash = config_hash(&(title, config));
    let csv_name = format!("{name}.csv");
    let csv = write_file(&common.out_dir, &csv_name, &render_csv(table, title, seed, &hash))?;
    let mut sidecar = serde_json::to_value(Sidecar {
        experiment: title,
        seed,
        config_hash: &hash,
        csv: csv_name,
        columns: &table.columns,
        markers,
        config,
    })
    .expect("sidecar serialises");
    if let (Some(serde_json::Value::Object(extra)), serde_json::Value::Object(obj)) = (extra, &mut sidecar) {
        obj.extend(extra);
    }
    let json = write_file(&common.out_dir, &format!("{name}.json"), &to_json(&sidecar))?;
    if !common.quiet {
        eprintln!("wrote {} and {}", csv.display(), json.display());
    }
    Ok(())
}

fn simulate(common: &Common, channel: &ChannelArgs) -> Result<(), CliError> {
    let s = resolve_settings(common, toml::Table::new())?;
    let cfg = s.ofdm()?;
    let (pdp, source) = resolve_channel(channel, &s)?;
    let spec = ChannelSpec::linear(&pdp, s.n_tx, s.delay).map_err(CliError::config)?;
    let camp = CampaignConfig {
        k_users: s.k_users,
        n_fb: s.n_fb,
        t_c: s.t_c,
        n_slots: s.n_slots,
        warmup_slots: s.warmup_slots,
        seed: s.seed,
        outage_policy: s.outage()?,
    };
    if camp.k_users == 0 || camp.n_fb == 0 || camp.n_slots == 0 || !(camp.t_c >= 1.0) {
        return Err(CliError::Config("k_users, n_fb, n_slots must be positive and t_c >= 1".into()));
    }
    let bar = ProgressBar::new("simulate", camp.warmup_slots + camp.n_slots, !common.quiet);
    let stats = run_campaign_with_progress(&spec, &cfg, &camp, &|_, _| bar.tick()).map_err(CliError::runtime)?;
    bar.finish();
    let col = |n: &str, u: &str| Column { name: n.into(), unit: u.into() };
    let table = Table {
        columns: vec![
            col("eff_paths", "paths"),
            col("delay", "samples"),
            col("k_users", "users"),
            col("sum_rate", "bit/s/Hz"),
            col("sum_rate_stderr", "bit/s/Hz"),
            col("max_cb", "bit/s/Hz"),
            col("max_cb_stderr", "bit/s/Hz"),
            col("mean_cb", "bit/s/Hz"),
            col("mean_cb_stderr", "bit/s/Hz"),
            col("outage_rate", "1"),
        ],
        rows: vec![vec![
            pdp.effective_paths(),
            s.delay as f64,
            s.k_users as f64,
            stats.sum_rate.mean,
            stats.sum_rate.stderr,
            stats.max_cb.mean,
            stats.max_cb.stderr,
            stats.mean_cb.mean,
            stats.mean_cb.stderr,
            stats.outage_rate,
        ]],
    };
    let extra = serde_json::json!({ "channel": source, "campaign": stats });
    write_outputs(
        common,
        "simulate",
        "simulate",
        s.seed,
        &(&s, pdp.gains()),
        &table,
        &Default::default(),
        Some(extra),
    )
}

fn reproduce(common: &Common, figure: &str) -> Result<(), CliError> {
    let (id, preset) = match FIGURES.iter().find(|(f, _, _)| *f == figure) {
        Some((f, id, _)) => (*id, figure_preset(f)),
        None => (
            figure
                .parse::<ExperimentId>()
                .map_err(|_| CliError::Config(format!("unknown figure id '{figure}' (see reproduce --help)")))?,
            toml::Table::new(),
        ),
    };
    let s = resolve_settings(common, preset)?;
    let params = s.experiment_params()?;
    let bar = ProgressBar::new(figure, experiments::point_count(id, &params), !common.quiet);
    let out = experiments::run(id, &params, &|| bar.tick()).map_err(CliError::runtime)?;
    bar.finish();
    write_outputs(
        common,
        figure,
        id.as_str(),
        params.seed,
        &params,
        &out.table,
        &out.markers,
        Some(serde_json::json!({ "figure": figure })),
    )
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze { channel, delay, full } => analyze(&cli.common, channel, *delay, *full),
        Command::OptimizeDelay { channel } => optimize_delay(&cli.common, channel),
        Command::Simulate { channel } => simulate(&cli.common, channel),
        Command::Reproduce { figure } => reproduce(&cli.common, figure),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("freqsel: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
