use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use tseba_cli::report::read_csv;
use tseba_cli::{execute, parse_config, parse_scan_csv, Report};

fn tseba(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tseba"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("TSEBA_WORKERS", w),
        None => cmd.env_remove("TSEBA_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn out_path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

const SIMULATE: &str = r#"
family = "gaussian"
means = [0.05, 0.0, -0.02]
sigmas = [1.0, 2.0, 0.5]
T = 3000
r = 0.2
reps = 3000
seed = 11
"#;

const SCAN: &str = r#"
family = "gaussian"
sigmas = [1, 1]
T = 1000
reps = 2000
seed = 5
sampling = "aggregated"
[scan]
c_min = 0.5
c_max = 4
points = 5
"#;

#[test]
fn bounds_prints_two_over_root_e() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "b.toml", "family = \"gaussian\"\nsigmas = [1, 1]\nT = 10000\n");
    let out = tseba(&["bounds", &cfg], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "k,budget,r,regime,minimax_constant,worst_gap,side_condition_ok\n2,10000,0.2,two-arm,1.21306132,0.02,true\n"
    );
}

#[test]
fn repeat_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "s.toml", SIMULATE);
    let (a, b) = (out_path(&dir, "a.csv"), out_path(&dir, "b.csv"));
    assert!(tseba(&["simulate", &cfg, "--output", &a], None).status.success());
    assert!(tseba(&["simulate", &cfg, "--output", &b], None).status.success());
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(ta.last(), Some(&b'\n'));
    assert!(std::str::from_utf8(&ta).is_ok());
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "s.toml", SIMULATE);
    let outputs: Vec<Vec<u8>> = ["1", "2", "4"]
        .iter()
        .map(|w| {
            let out = tseba(&["simulate", &cfg], Some(w));
            assert!(out.status.success());
            out.stdout
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn overrides_take_effect() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "s.toml", SIMULATE);
    let base = tseba(&["simulate", &cfg], None).stdout;
    let reseeded = tseba(&["simulate", &cfg, "--seed", "12"], None).stdout;
    assert_ne!(base, reseeded);
    let fewer = String::from_utf8(tseba(&["simulate", &cfg, "--reps", "10"], None).stdout).unwrap();
    let row = &read_csv(&fewer).unwrap()[1];
    assert_eq!(row[0], "ts-eba");
    assert_eq!(row[2], "10");
    let json = String::from_utf8(tseba(&["simulate", &cfg, "--format", "jsonl"], None).stdout).unwrap();
    assert!(json.starts_with("{\"policy\":\"ts-eba\","));
}

#[test]
fn csv_and_jsonl_share_names_and_digits() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "scan.toml", SCAN);
    let csv = String::from_utf8(tseba(&["scan", &cfg], None).stdout).unwrap();
    let jsonl = String::from_utf8(tseba(&["scan", &cfg, "--format", "jsonl"], None).stdout).unwrap();
    let records = read_csv(&csv).unwrap();
    let lines: Vec<serde_json::Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), records.len() - 1);
    let header = &records[0];
    for (rec, obj) in records[1..records.len() - 1].iter().zip(&lines) {
        let obj = obj.as_object().unwrap();
        let keys: Vec<&String> = obj.keys().collect();
        let mut sorted = header.clone();
        sorted.sort();
        assert_eq!(keys, sorted.iter().collect::<Vec<_>>());
        for (name, field) in header.iter().zip(rec) {
            assert_eq!(obj[name].to_string(), *field, "{name}");
        }
    }
    let footer = lines.last().unwrap().as_object().unwrap();
    let csv_footer = records.last().unwrap();
    assert_eq!(footer["sup"].to_string(), csv_footer[0]);
    assert_eq!(footer["bound_constant"].to_string(), csv_footer[1]);
    assert_eq!(footer["within_bound"].to_string(), csv_footer[2]);
}

#[test]
fn scan_csv_round_trips() {
    let cfg = parse_config(&format!("command = \"scan\"\n{SCAN}")).unwrap();
    let Report::Scan(scan) = execute(&cfg).unwrap() else { panic!() };
    let text = Report::Scan(scan.clone()).table().to_csv();
    let parsed = parse_scan_csv(&text).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 5e-9 * a.abs().max(b.abs()) || a == b;
    assert_eq!(parsed.rows.len(), scan.grid.len());
    for (row, (gap, s)) in parsed.rows.iter().zip(&scan.grid) {
        let expect = [*gap, s.scaled_regret, s.scaled_regret_se(), s.misid_rate, s.early_stop_rate];
        for (a, b) in row.iter().zip(expect) {
            assert!(close(*a, b), "{a} vs {b}");
        }
    }
    assert!(close(parsed.sup, scan.sup_scaled_regret));
    assert!(close(parsed.bound_constant, scan.bound_constant));
    assert_eq!(parsed.within_bound, scan.within_bound);
    // the footer is consistent with the rows
    let max = parsed.rows.iter().map(|r| r[1]).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(max, parsed.sup);
}

#[test]
fn simulate_csv_round_trips() {
    let cfg = parse_config(&format!("command = \"simulate\"\n{SIMULATE}")).unwrap();
    let report = execute(&cfg).unwrap();
    let Report::Simulate { stats, .. } = &report else { panic!() };
    let records = read_csv(&report.table().to_csv()).unwrap();
    let (header, row) = (&records[0], &records[1]);
    let get = |name: &str| -> f64 { row[header.iter().position(|h| h == name).unwrap()].parse().unwrap() };
    let close = |a: f64, b: f64| (a - b).abs() <= 5e-9 * b.abs();
    assert!(close(get("mean_regret"), stats.mean_regret));
    assert!(close(get("misid_rate"), stats.misid_rate));
    assert!(close(get("scaled_regret"), stats.scaled_regret));
    assert!(close(get("coverage_rate"), stats.coverage_rate.unwrap()));
    for a in 0..3 {
        assert!(close(get(&format!("mean_count_{a}")), stats.mean_counts[a]));
        assert!(close(get(&format!("choice_freq_{a}")), stats.choice_freq[a]));
    }
    assert_eq!(get("reps") as u64, stats.reps);
}

#[test]
fn kl_check_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "kl.toml", "family = \"bernoulli\"\nmeans = [0.5]\narms = 1\n");
    // K = 1 is rejected like any other instance
    let out = tseba(&["kl-check", &cfg], None);
    assert_eq!(out.status.code(), Some(2));

    let cfg = write(&dir, "kl.toml", "family = \"bernoulli\"\nmeans = [0.5, 0.3]\n");
    let out = tseba(&["kl-check", &cfg], None);
    assert!(out.status.success());
    let records = read_csv(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(records[0], ["arm", "mean", "eps", "kl", "ratio", "limit", "rel_err", "within_tol"]);
    assert_eq!(records.len(), 1 + 6);
    assert!(records[1..].iter().all(|r| r[7] == "true"));
    assert_eq!(records[1][5], "2");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let unknown = write(&dir, "u.toml", &format!("{SIMULATE}extra = 1\n"));
    let out = tseba(&["simulate", &unknown], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 9"), "{err}");
    assert!(err.contains("extra"), "{err}");

    let bad = write(&dir, "r.toml", &SIMULATE.replace("r = 0.2", "r = 0.1234"));
    let out = tseba(&["simulate", &bad], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rT/K must be an integer"));

    let bern = write(&dir, "b.toml", "family = \"bernoulli\"\nmeans = [0.99, 0.5]\nT = 1000\nreps = 5\n");
    let out = tseba(&["simulate", &bern], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`means`"));

    let cfg = write(&dir, "s.toml", SIMULATE);
    assert_eq!(tseba(&["simulate", &cfg], Some("zero")).status.code(), Some(2));
    assert_eq!(tseba(&["simulate", "/nonexistent/x.toml"], None).status.code(), Some(2));
    assert_eq!(tseba(&["scan", &cfg], None).status.code(), Some(2));
    assert_eq!(tseba(&["simulate", &cfg, "--reps", "0"], None).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "s.toml", &SIMULATE.replace("reps = 3000", "reps = 10"));
    let unwritable = Path::new("/nonexistent-dir/out.csv").to_str().unwrap();
    let out = tseba(&["simulate", &cfg, "--output", unwritable], None);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert_eq!(seen, 5);
}
