use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hypokernel_cli::RunConfig;

const KOLMOGOROV_MODEL: &str = r#""model": {"q": [[1.0, 0.0], [0.0, 0.0]], "b": [[0.0, 0.0], [1.0, 0.0]]}"#;

struct Scratch(PathBuf);

impl Scratch {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("hypokernel-cli-{}-{name}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Self(dir)
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let path = self.0.join(name);
        std::fs::write(&path, text).unwrap();
        path
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn hypokernel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypokernel")).args(args).output().expect("binary runs")
}

fn run_with(config: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["-c", config.to_str().unwrap()]);
    hypokernel(&all)
}

#[test]
fn check_reports_hypoellipticity() {
    let dir = Scratch::new("check");
    let ok = run_with(&dir.file("k.json", &format!("{{{KOLMOGOROV_MODEL}}}")), &["check"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("\"is_hypoelliptic\": true"));

    let zero = run_with(
        &dir.file("z.json", r#"{"model": {"q": [[0.0, 0.0], [0.0, 0.0]], "b": [[0.0, 0.0], [1.0, 0.0]]}}"#),
        &["check"],
    );
    assert_eq!(zero.status.code(), Some(2));

    let bad = run_with(&dir.file("bad.json", "{\"model\": [}"), &["check"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(!bad.stderr.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(hypokernel(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hypokernel(&["check"]).status.code(), Some(1));
    assert_eq!(hypokernel(&["check", "-c", "/nonexistent/config.json"]).status.code(), Some(1));
    assert_eq!(hypokernel(&["--help"]).status.code(), Some(0));
}

#[test]
fn kernel_eval_writes_one_row_per_point() {
    let dir = Scratch::new("kernel");
    let config = dir.file(
        "run.json",
        &format!(
            r#"{{{KOLMOGOROV_MODEL}, "points": [
                {{"x": [0.0, 0.0], "y": [0.1, 0.2], "t": 1.0}},
                {{"x": [0.3, -0.1], "y": [0.0, 0.0], "t": 0.5}},
                {{"x": [1.0, 1.0], "y": [0.5, 0.5], "t": 2.0}}]}}"#
        ),
    );
    let out_path = dir.0.join("out.csv");
    let out = run_with(&config, &["eval", "--what", "kernel", "-o", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x0,x1,y0,y1,t,p");
    assert_eq!(lines.len(), 4);
    // 17 significant digits: one leading digit and 16 after the point
    let p = lines[1].rsplit(',').next().unwrap();
    assert_eq!(p.split('e').next().unwrap().trim_start_matches('-').len(), 18);
    // the K-form kernel at X = 0, Y = (0.1, 0.2), t = 1 for the Kolmogorov model
    let value: f64 = p.parse().unwrap();
    let (dv, dw) = (0.1f64, 0.2f64);
    let q = 4.0 * dv * dv - 12.0 * dv * dw + 12.0 * dw * dw;
    let expected = 3f64.sqrt() / (2.0 * std::f64::consts::PI) * (-q / 4.0).exp();
    assert!((value - expected).abs() < 1e-13 * expected, "{value} vs {expected}");
}

#[test]
fn semigroup_eval_matches_exact_column() {
    let dir = Scratch::new("semigroup");
    let config = dir.file(
        "run.json",
        &format!(
            r#"{{{KOLMOGOROV_MODEL}, "points": [{{"x": [0.2, 0.1], "t": 0.5}}, {{"x": [-0.4, 0.3], "t": 2.0}}]}}"#
        ),
    );
    let out = run_with(&config, &["eval", "--what", "semigroup"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    for line in csv.lines().skip(1) {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (pt, exact) = (cells[3], cells[4]);
        assert!((pt - exact).abs() < 1e-10 * exact.abs());
    }
}

#[test]
fn dtn_eval_has_documented_columns() {
    let dir = Scratch::new("dtn");
    let config = dir.file(
        "run.json",
        &format!(r#"{{{KOLMOGOROV_MODEL}, "fractional": {{"s": 0.5}}, "points": [{{"x": [0.3, -0.2]}}]}}"#),
    );
    let out = run_with(&config, &["eval", "--what", "dtn"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "z,dtn_value,frac_value,abs_err");
    assert_eq!(lines.len(), 6);
    let errs: Vec<f64> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn bad_order_is_a_usage_error() {
    let dir = Scratch::new("order");
    let config = dir.file(
        "run.json",
        &format!(r#"{{{KOLMOGOROV_MODEL}, "fractional": {{"s": 1.5}}, "points": [{{"x": [0.0, 0.0]}}]}}"#),
    );
    let out = run_with(&config, &["eval", "--what", "frac"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain error"));
}

#[test]
fn failing_point_is_identified() {
    let dir = Scratch::new("point");
    let config = dir.file(
        "run.json",
        &format!(r#"{{{KOLMOGOROV_MODEL}, "fractional": {{"s": 0.5}}, "points": [{{"x": [0.0, 0.0], "z": 0.1}}, {{"x": [0.0, 0.0]}}]}}"#),
    );
    let out = run_with(&config, &["eval", "--what", "extend"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("point 1"));
}

#[test]
fn extension_suite_is_gated() {
    let dir = Scratch::new("gate");
    let config = dir.file("run.json", r#"{"model": {"q": [[1.0, 0.0], [0.0, 0.0]], "b": [[0.0, 0.0], [0.0, 0.0]]}}"#);
    let out = run_with(&config, &["verify", "--suite", "extension"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn heat_kernel_suite_passes() {
    let dir = Scratch::new("heat");
    let config = dir.file("run.json", r#"{"model": {"q": [[1.0]], "b": [[0.0]]}}"#);
    let out = run_with(&config, &["verify", "--suite", "kernels"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = Scratch::new("threads");
    let config = dir.file(
        "run.json",
        &format!(
            r#"{{{KOLMOGOROV_MODEL}, "fractional": {{"s": 0.25}}, "points": [
                {{"x": [0.0, 0.0], "t": 0.0}}, {{"x": [0.5, 0.1], "t": 0.0}}, {{"x": [-0.3, 0.2], "t": 0.0}}]}}"#
        ),
    );
    let args = ["eval", "--what", "frac", "-c", config.to_str().unwrap()];
    let serial =
        Command::new(env!("CARGO_BIN_EXE_hypokernel")).args(args).env("HYPOKERNEL_THREADS", "1").output().unwrap();
    let parallel =
        Command::new(env!("CARGO_BIN_EXE_hypokernel")).args(args).env("HYPOKERNEL_THREADS", "4").output().unwrap();
    assert_eq!(serial.status.code(), Some(0));
    assert_eq!(serial.stdout, parallel.stdout);
    let bad =
        Command::new(env!("CARGO_BIN_EXE_hypokernel")).args(args).env("HYPOKERNEL_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn shipped_configs_round_trip() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let config = RunConfig::parse(&text).unwrap();
        assert_eq!(RunConfig::parse(&config.to_json()).unwrap(), config);
        seen += 1;
    }
    assert!(seen >= 3);
}
