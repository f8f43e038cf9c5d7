use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn pacstate(args: &[&str]) -> Output {
    pacstate_with(args, &[])
}

fn pacstate_with(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pacstate"));
    cmd.args(args).current_dir(root()).env("RUST_LOG", "error");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows of a CSV with a units line and a header line.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn validate(schema: &str, instance: &Value) {
    let schema: Value = serde_json::from_str(&fs::read_to_string(root().join("schemas").join(schema)).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}", schema = schema["title"]);
}

#[test]
fn pnum_pac_mean() {
    let (h, rows) = csv(&stdout(&pacstate(&["pnum", "--state", "pac", "--nalpha", "3", "--eta", "0.5"])));
    assert!((rows[0][col(&h, "mean")] - 2.375).abs() < 1e-10);
    assert_eq!(rows.len(), 13);
}

#[test]
fn pnum_fock_lossless() {
    let (h, rows) = csv(&stdout(&pacstate(&["pnum", "--state", "fock", "--m", "4", "--eta", "1"])));
    let n = col(&h, "n");
    let p = col(&h, "probability");
    let p4 = rows.iter().find(|r| r[n] == 4.0).unwrap()[p];
    assert_eq!(p4, 1.0);
}

#[test]
fn pnum_coherent_through_nanowire() {
    let (h, rows) = csv(&stdout(&pacstate(&[
        "pnum", "--state", "coherent", "--nalpha", "4", "--preset", "nanowire", "--L", "0.83",
    ])));
    let mean = rows[0][col(&h, "mean")];
    let var = rows[0][col(&h, "variance")];
    assert!((mean - 2.0).abs() < 0.01, "{mean}");
    assert!((var - mean).abs() < 1e-12);
}

#[test]
fn pnum_default_loss_levels() {
    let (h, rows) = csv(&stdout(&pacstate(&["pnum"])));
    let mut etas: Vec<f64> = rows.iter().map(|r| r[col(&h, "eta")]).collect();
    etas.dedup();
    assert_eq!(etas, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
}

#[test]
fn unknown_preset_is_usage_error() {
    let out = pacstate(&["pnum", "--preset", "teflon", "--L", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("teflon"));
}

#[test]
fn invalid_quantity_and_axes_are_usage_errors() {
    assert_eq!(pacstate(&["sweep", "--quantity", "entropy"]).status.code(), Some(2));
    assert_eq!(pacstate(&["sweep", "--quantity", "fidelity", "--axis", "phi=0:1:0.1"]).status.code(), Some(2));
    assert_eq!(pacstate(&["sweep", "--quantity", "fidelity", "--axis", "tau=1:0:0.1"]).status.code(), Some(2));
    assert_eq!(
        pacstate(&["sweep", "--quantity", "fidelity", "--axis", "tau=0,1", "--axis", "omega1=1", "--axis", "n_alpha=1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn ratio_map_rises_to_three_quarters() {
    let (h, rows) = csv(&stdout(&pacstate(&["sweep", "--config", "scenarios/fig3a.toml"])));
    let at = |tau: f64, w: f64| {
        rows.iter()
            .find(|r| (r[0] - tau).abs() < 1e-9 && (r[1] - w).abs() < 1e-9)
            .unwrap()[col(&h, "ratio")]
    };
    assert!(at(0.0, 1.0) < at(5.0, 1.0));
    assert!((at(5.0, 1.0) - 0.75).abs() < 0.005);
    assert!(rows.iter().all(|r| r[col(&h, "ratio")] < 1.0));
}

#[test]
fn squeezing_map_at_perfect_overlap() {
    let (h, rows) = csv(&stdout(&pacstate(&["sweep", "--config", "scenarios/fig10a.toml"])));
    let r = rows.iter().find(|r| r[0] == 0.0 && (r[1] - 1.0).abs() < 1e-9).unwrap();
    assert!((r[col(&h, "depth")] + 0.157).abs() < 0.003);
}

#[test]
fn optimal_coherent_amplitude() {
    let (h, rows) = csv(&stdout(&pacstate(&["sweep", "--config", "scenarios/fig11.toml"])));
    let d = col(&h, "depth");
    let best = rows.iter().min_by(|a, b| a[d].total_cmp(&b[d])).unwrap();
    assert!((best[0] - 3.0).abs() < 0.01, "{}", best[0]);
}

#[test]
fn ad_hoc_sweep_matches_flags() {
    let (h, rows) = csv(&stdout(&pacstate(&[
        "sweep", "--quantity", "g2zero", "--axis", "tau=0,5", "--set", "omega1=5", "--set", "references=true",
    ])));
    assert_eq!(h, vec!["tau", "g2_zero", "g2_zero_coherent"]);
    assert!((rows[1][1] - 0.9375).abs() < 0.001);
    assert_eq!(rows[1][2], 1.0);
    let out = stdout(&pacstate(&["sweep", "--quantity", "pn", "--set", "state=fock", "--set", "m=2", "--set", "n_max=2"]));
    assert_eq!(csv(&out).1.len(), 3);
}

#[test]
fn every_scenario_is_byte_stable_and_valid() {
    let mut names: Vec<PathBuf> = fs::read_dir(root().join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    names.sort();
    assert!(names.len() >= 20);
    for path in names {
        let p = path.to_str().unwrap();
        let one = pacstate_with(&["sweep", "--config", p], &[("PACSTATE_THREADS", "1")]);
        let many = pacstate_with(&["sweep", "--config", p], &[("PACSTATE_THREADS", "4")]);
        assert_eq!(stdout(&one), stdout(&many), "{p}");
        let json = stdout(&pacstate(&["sweep", "--config", p, "--format", "json"]));
        let v: Value = serde_json::from_str(&json).unwrap();
        validate("sweep.schema.json", &v);
        let (_, rows) = csv(&stdout(&one));
        assert_eq!(v["rows"].as_array().unwrap().len(), rows.len(), "{p}");
    }
}

#[test]
fn sweep_writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/fig6b.csv");
    let status = pacstate(&["sweep", "--config", "scenarios/fig6b.toml", "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let text = fs::read_to_string(out).unwrap();
    let (h, rows) = csv(&text);
    assert!(rows.iter().all(|r| r[col(&h, "g2_zero")] < 1.0));
}

#[test]
fn g2grid_json_and_csv() {
    let v: Value = serde_json::from_str(&stdout(&pacstate(&[
        "g2grid", "--tau", "3", "--resolution", "21", "--eta", "0.5", "--format", "json",
    ])))
    .unwrap();
    validate("g2grid.schema.json", &v);
    assert_eq!(v["values"].as_array().unwrap().len(), 441);
    let text = stdout(&pacstate(&["g2grid", "--resolution", "5", "--t-min", "-2", "--t-max", "2"]));
    assert_eq!(text.lines().count(), 2 + 25);
}

#[test]
fn g2grid_loss_only_delays() {
    let grid = |extra: &[&str]| -> Value {
        let mut args = vec!["g2grid", "--tau", "3", "--omega1", "3", "--resolution", "11", "--format", "json"];
        args.extend_from_slice(extra);
        serde_json::from_str(&stdout(&pacstate(&args))).unwrap()
    };
    let lossless = grid(&[]);
    // stripe has v_g = 1, so 10.4 um delays the pulse by 10.4/Omega.
    let lossy = grid(&["--preset", "stripe", "--L", "10.4", "--t-min", "5.4", "--t-max", "18.4"]);
    assert!((lossy["retarded_shift"].as_f64().unwrap() - 10.4).abs() < 1e-12);
    let (va, vb) = (lossless["values"].as_array().unwrap(), lossy["values"].as_array().unwrap());
    assert_eq!(va.len(), vb.len());
    for (x, y) in va.iter().zip(vb) {
        let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
        assert!((x - y).abs() <= 1e-9 * x.abs(), "{x} vs {y}");
    }
}

#[test]
fn quad_and_fidelity_points() {
    let q: Value = serde_json::from_str(&stdout(&pacstate(&["quad", "--format", "json"]))).unwrap();
    validate("quadrature.schema.json", &q);
    assert!((q["squeezing_depth"].as_f64().unwrap() + 0.1567).abs() < 1e-3);
    let half: Value = serde_json::from_str(&stdout(&pacstate(&["quad", "--eta", "0.5", "--format", "json"]))).unwrap();
    assert!((half["squeezing_depth"].as_f64().unwrap() * 2.0 - q["squeezing_depth"].as_f64().unwrap()).abs() < 1e-12);
    let out_of_phase: Value =
        serde_json::from_str(&stdout(&pacstate(&["quad", "--phase", "theta+pi/2", "--format", "json"]))).unwrap();
    assert!(out_of_phase["squeezing_depth"].as_f64().unwrap() > 0.0);

    let f: Value = serde_json::from_str(&stdout(&pacstate(&["fidelity", "--tau", "1", "--format", "json"]))).unwrap();
    validate("fidelity.schema.json", &f);
    assert!((f["value"].as_f64().unwrap() - 0.70).abs() < 0.005);
    assert_eq!(f["n_alpha"].as_f64().unwrap(), 3.0);
    let (_, rows) = csv(&stdout(&pacstate(&["fidelity", "--tau", "5", "--omega1", "5"])));
    assert!(rows[0][0] < 1e-10);
    assert_eq!(pacstate(&["fidelity", "--nalpha", "0"]).status.code(), Some(2));
}

#[test]
fn oracle_default_grid_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = pacstate(&["oracle", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    validate("oracle_report.schema.json", &v);
    assert_eq!(v["failed"], 0);
    let mut labels: Vec<&str> = v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["label"].as_str().unwrap().split('[').next().unwrap())
        .collect();
    labels.sort();
    labels.dedup();
    assert!(labels.len() >= 12, "{labels:?}");
}

#[test]
fn oracle_over_tight_tolerance_fails() {
    let out = pacstate(&["oracle", "--tolerance", "1e-15", "--tau", "0", "--omega1", "1,2", "--nalpha", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["failed"].as_u64().unwrap() > 0);
    let loose = pacstate(&["oracle", "--tolerance", "1e-3", "--tau", "0,2", "--omega1", "1", "--nalpha", "1"]);
    assert_eq!(loose.status.code(), Some(0));
}

#[test]
fn presets_table_and_overrides() {
    let text = stdout(&pacstate(&["presets"]));
    let nanowire = text.lines().find(|l| l.starts_with("nanowire")).unwrap();
    let cells: Vec<&str> = nanowire.split(',').collect();
    assert!((cells[5].parse::<f64>().unwrap() - 0.83).abs() < 0.01);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("presets.toml");
    fs::write(&file, "[[channel]]\nlabel = \"slab\"\nk_i = 0.5\n").unwrap();
    let text = stdout(&pacstate(&["--presets", file.to_str().unwrap(), "presets", "--toml"]));
    assert!(text.contains("slab") && text.contains("nanowire"));
    let (h, rows) = csv(&stdout(&pacstate(&[
        "--presets", file.to_str().unwrap(), "pnum", "--state", "fock", "--m", "1", "--preset", "slab", "--L", "2",
    ])));
    assert!((rows[0][col(&h, "mean")] - (-1.0f64).exp()).abs() < 1e-12);
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = pacstate_with(&["presets"], &[("PACSTATE_THREADS", "many")]);
    assert_eq!(out.status.code(), Some(2));
}
