use std::path::Path;
use std::process::{Command, Output};

fn freqsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqsel")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &[&str] = &["-q", "--set", "n_sc=256", "--set", "block_size=16"];

#[test]
fn help_lists_defaults() {
    let out = freqsel(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for key in ["n_sc", "delay_grid", "outage_policy", "seed"] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(freqsel(&["--no-such-flag", "analyze"]).status.code(), Some(2));
    assert_eq!(freqsel(&["analyze", "--set", "n_sc=100"]).status.code(), Some(2));
    assert_eq!(freqsel(&["analyze", "--set", "nonsense=1"]).status.code(), Some(2));
    assert_eq!(freqsel(&["reproduce", "fig99"]).status.code(), Some(2));
    assert_eq!(freqsel(&["analyze", "--config", "/nonexistent/freqsel.toml"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let mut args = vec!["reproduce", "fig4", "--eff-paths-grid", "1", "--out-dir", blocker.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    assert_eq!(freqsel(&args).status.code(), Some(3));
}

#[test]
fn profile_errors_name_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let txt = dir.path().join("bad.txt");
    std::fs::write(&txt, "# gains\n1.0\n0.5 x\n").unwrap();
    let out = freqsel(&["analyze", "--pdp", txt.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3, value 2"), "{}", stderr(&out));

    let toml = dir.path().join("bad.toml");
    std::fs::write(&toml, "type = \"exponential\"\ntau_o = -1.0\nmax_taps = 8\n").unwrap();
    let out = freqsel(&["analyze", "--pdp", toml.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("field 'tau_o'"), "{}", stderr(&out));
}

#[test]
fn config_file_errors_name_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n_sc = 256\n\nkappa = \"high\"\n").unwrap();
    let out = freqsel(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn analyze_two_equal_taps() {
    let dir = tempfile::tempdir().unwrap();
    let pdp = dir.path().join("two.txt");
    std::fs::write(&pdp, "1, 1\n").unwrap();
    let r = stdout_json(&freqsel(&["analyze", "--pdp", pdp.to_str().unwrap()]));
    assert!((r["correlation"]["eff_paths"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(r["correlation"].get("rho_sc").is_none());
}

#[test]
fn flat_channel_delay_choice() {
    let r = stdout_json(&freqsel(&["analyze", "--eff-paths", "1"]));
    assert_eq!(r["delay"]["os_search"]["d_star"], 1);
    assert_eq!(r["delay"]["gaussian_search"]["d_star"], 1);
    assert_eq!(r["delay"]["rms_closed_form"]["d_max"], 1);
}

#[test]
fn analyze_consumes_no_randomness() {
    let a = freqsel(&["analyze", "--tau-o", "2", "--seed", "1"]);
    let b = freqsel(&["analyze", "--tau-o", "2", "--seed", "999"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn analyze_with_delay_matches_composed_profile() {
    let dir = tempfile::tempdir().unwrap();
    let single = stdout_json(&freqsel(&["analyze", "--eff-paths", "1", "--delay", "5"]));
    // Two unit antennas with a 5-sample delay compose to two equal taps 5 apart.
    let pdp = dir.path().join("composed.txt");
    std::fs::write(&pdp, "1 0 0 0 0 1\n").unwrap();
    let composed = stdout_json(&freqsel(&["analyze", "--pdp", pdp.to_str().unwrap()]));
    for k in ["eff_paths", "eff_blocks", "s_sc_intra", "phi"] {
        let (x, y) = (single["correlation"][k].as_f64().unwrap(), composed["correlation"][k].as_f64().unwrap());
        assert!((x - y).abs() < 1e-12, "{k}: {x} vs {y}");
    }
}

#[test]
fn optimize_delay_reports_all_methods_with_curves() {
    let r = stdout_json(&freqsel(&["optimize-delay", "--eff-paths", "1.6246", "--set", "n_sc=256"]));
    for m in ["os_search", "gaussian_search"] {
        let curve = r[m]["objective_curve"].as_array().unwrap();
        assert!(!curve.is_empty());
        assert_eq!(curve[0]["delay"], 0);
    }
    assert!(r["rms_closed_form"]["d_star"].as_u64().is_some());
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn reproduce_is_byte_identical_and_documented() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path| {
        let mut args = vec![
            "reproduce", "fig6", "--eff-paths-grid", "1,4", "--set", "n_slots=40", "--set", "k_users=4",
            "--set", "mc_trials=500", "--seed", "7", "--out-dir", dir.to_str().unwrap(),
        ];
        args.extend_from_slice(SMALL);
        assert!(freqsel(&args).status.success());
    };
    run(a.path());
    run(b.path());
    let csv = read(a.path(), "fig6.csv");
    assert_eq!(csv, read(b.path(), "fig6.csv"));
    assert_eq!(read(a.path(), "fig6.json"), read(b.path(), "fig6.json"));

    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# experiment: max_cb_vs_selectivity"));
    assert_eq!(lines.next(), Some("# seed: 7"));
    let hash = lines.next().unwrap().strip_prefix("# config_hash: ").unwrap();
    assert_eq!(hash.len(), 12);
    let header = lines.next().unwrap();
    assert!(header.starts_with("target_eff_paths[paths],"), "{header}");
    assert!(header.contains("max_cb_gaussian[bit/s/Hz]"), "{header}");
    assert_eq!(lines.count(), 2);

    let side: serde_json::Value = serde_json::from_str(&read(a.path(), "fig6.json")).unwrap();
    assert_eq!(side["config_hash"], hash);
    assert_eq!(side["seed"], 7);
    assert_eq!(side["figure"], "fig6");
    assert_eq!(side["csv"], "fig6.csv");
}

#[test]
fn simulation_depends_only_on_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let mut args = vec![
            "simulate", "--set", "n_slots=30", "--set", "k_users=3", "--seed", seed, "--out-dir", out.to_str().unwrap(),
        ];
        args.extend_from_slice(SMALL);
        assert!(freqsel(&args).status.success());
        read(&out, "simulate.csv")
    };
    let (a, b) = (run("1", "a"), run("2", "b"));
    assert_ne!(a, b);
    assert_eq!(a, run("1", "c"));
}

#[test]
fn analytic_figure_runs_without_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["reproduce", "fig11", "--eff-paths-grid", "1,2,8", "--out-dir", dir.path().to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let out = freqsel(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = read(dir.path(), "fig11.csv");
    assert_eq!(csv.lines().count(), 4 + 3);
    assert!(!csv.contains("sum_rate"));
}
