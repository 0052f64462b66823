use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use szilard_cli::{parse_scenario, run_command, CliError, Format, Overrides, RunRecord};
use tempfile::TempDir;

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run_file(path: &Path, format: Format, out: &Path, plot: bool) -> (Vec<RunRecord>, i32) {
    let batch = parse_scenario(path, &Overrides::default()).unwrap();
    run_command(&batch.points, format, Some(out), plot).unwrap()
}

fn szilard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_szilard")).args(args).output().unwrap()
}

const EXAMPLE_I: &str = "scenario = \"example_I\"\n[params]\nq = 0.3\nN = 20\n";
const EXAMPLE_II_SWEEP: &str = "scenario = \"example_II\"\n[sweep]\nparameter = \"N\"\nvalues = [5, 50, 500]\n";

#[test]
fn one_library_file_gives_one_config() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "a.toml", "scenario = \"example_I\"\n[params]\nq = 0.5\nN = 20\n");
    let batch = parse_scenario(&p, &Overrides::default()).unwrap();
    assert_eq!(batch.points.len(), 1);
}

#[test]
fn sweep_over_n_gives_three_configs() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "a.toml", EXAMPLE_II_SWEEP);
    let batch = parse_scenario(&p, &Overrides::default()).unwrap();
    let values: Vec<f64> = batch.points.iter().map(|p| p.value.unwrap()).collect();
    assert_eq!(values, vec![5.0, 50.0, 500.0]);
}

#[test]
fn out_of_range_q_is_named() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "a.toml", "scenario = \"example_I\"\n[params]\nq = 1.5\n");
    match parse_scenario(&p, &Overrides::default()).unwrap_err() {
        CliError::Validation { field, line, .. } => {
            assert_eq!(field, "q");
            assert_eq!(line, Some(3));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn example_i_csv_rows() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "a.toml", EXAMPLE_I);
    let out = dir.path().join("out.csv");
    let (_, code) = run_file(&p, Format::Csv, &out, false);
    assert_eq!(code, 0);
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    let expected = [("+", 0.3, 1.0, 0.0), ("-", 0.7, 0.0, 0.0)];
    for (row, (label, p, w, ds)) in rows.iter().zip(expected) {
        let f = |i: usize| row[i].parse::<f64>().unwrap();
        assert_eq!(&row[0], label);
        assert!((f(1) - p).abs() < 1e-12, "{row:?}");
        assert!((f(2) - w).abs() < 1e-9, "{row:?}");
        assert!((f(3) - ds).abs() < 1e-9, "{row:?}");
    }
}

#[test]
fn example_ii_plot_sweep_climbs_towards_half() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "a.toml", EXAMPLE_II_SWEEP);
    let out = dir.path().join("plot.csv");
    run_file(&p, Format::Csv, &out, true);
    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["sweep_value", "outcome", "work", "entropy_change"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    for label in ["+", "-"] {
        let works: Vec<f64> = rows.iter().filter(|r| &r[1] == label).map(|r| r[2].parse().unwrap()).collect();
        assert_eq!(works.len(), 3);
        assert!(works.windows(2).all(|w| w[0] < w[1]), "{label}: {works:?}");
        assert!(works.iter().all(|&w| w < 0.5));
    }
}

#[test]
fn null_engine_ledger_is_zero() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "a.toml", "scenario = \"null_engine\"\n");
    let out = dir.path().join("out.json");
    let (records, code) = run_file(&p, Format::Json, &out, false);
    assert_eq!(code, 0);
    let l = &records[0].cycle.as_ref().unwrap().ledger;
    for x in [l.w_coarse, l.w_avg, l.heat, l.w_erasure, l.w_net_coarse, l.w_net_avg] {
        assert!(x.abs() <= 1e-12, "{x}");
    }
}

fn numbers(v: &Value, path: String, out: &mut Vec<(String, f64)>) {
    match v {
        Value::Number(n) => out.push((path, n.as_f64().unwrap())),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| numbers(x, format!("{path}[{i}]"), out)),
        Value::Object(m) => m.iter().for_each(|(k, x)| numbers(x, format!("{path}.{k}"), out)),
        _ => {}
    }
}

#[test]
fn json_round_trip_is_bit_identical() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "a.toml", "scenario = \"random\"\n[params]\nfamily = \"cooling\"\nseed = 3\n");
    let out = dir.path().join("out.json");
    let (records, _) = run_file(&p, Format::Json, &out, false);
    let back: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let direct = serde_json::to_value(&records).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    numbers(&direct, String::new(), &mut a);
    numbers(&back, String::new(), &mut b);
    assert!(a.len() > 50);
    assert_eq!(a.len(), b.len());
    for ((pa, xa), (pb, xb)) in a.iter().zip(&b) {
        assert_eq!(pa, pb);
        assert_eq!(xa.to_bits(), xb.to_bits(), "{pa}: {xa} vs {xb}");
    }
}

#[test]
fn binary_run_succeeds_and_prints_table() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "a.toml", EXAMPLE_I);
    let out = dir.path().join("o.json");
    let o = szilard(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("example_I"));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[test]
fn binary_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "a.toml", "scenario = \"example_I\"\n[params]\nq = 1.5\n");
    let o = szilard(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("q"));

    let o = szilard(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let good = write(&dir, "b.toml", EXAMPLE_I);
    let unwritable = dir.path().join("no-such-dir").join("o.csv");
    let o = szilard(&["run", good.to_str().unwrap(), "--out", unwritable.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn binary_scan_is_clean() {
    let o = szilard(&["scan", "--count", "30", "--seed", "5", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let body = String::from_utf8_lossy(&o.stdout);
    assert_eq!(body.lines().count(), 31);
    assert!(String::from_utf8_lossy(&o.stderr).contains("all-three=0"));
}

#[test]
fn seed_environment_override_matches_flag() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "a.toml", "scenario = \"random\"\n[params]\nfamily = \"purifying\"\n");
    let by_flag = szilard(&["run", p.to_str().unwrap(), "--seed", "9"]);
    let by_env = Command::new(env!("CARGO_BIN_EXE_szilard"))
        .args(["run", p.to_str().unwrap()])
        .env("SZILARD_SEED", "9")
        .output()
        .unwrap();
    let default = szilard(&["run", p.to_str().unwrap()]);
    assert_eq!(by_flag.stdout, by_env.stdout);
    assert_ne!(by_flag.stdout, default.stdout);
}

/// Example I mapping with a non-degenerate demon Hamiltonian: the premeasurement
/// cannot conserve energy.
const NON_CONFORMING: &str = r#"
name = "leaky"
non_conforming = true

[explicit]
h_s = [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.5, 0.0]]]
rho_s = [[[0.3, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.7, 0.0]]]
basis = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
posts = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
records = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
demon_hamiltonian = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]]
demon_initial = [[1.0, 0.0], [0.0, 0.0]]
weight_hamiltonian = [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
weight_state = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
feedback = [
  [[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
   [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
   [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0]],
   [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]],
  [[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
   [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
   [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0]],
   [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]],
]
"#;

#[test]
fn non_conforming_scenario_runs_with_failed_certification() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "nc.toml", NON_CONFORMING);
    let out = dir.path().join("nc.json");
    let o = szilard(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let rec = &v[0];
    assert_eq!(rec["conforming"], Value::Bool(false));
    assert!(rec["certification"]["measurement"]["unitary_commutator"].as_f64().unwrap() > 1e-3);
    assert!(rec["cycle"].is_object());

    // Without the flag the same file is rejected up front.
    let strict = write(&dir, "strict.toml", &NON_CONFORMING.replace("non_conforming = true", ""));
    let o = szilard(&["run", strict.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
