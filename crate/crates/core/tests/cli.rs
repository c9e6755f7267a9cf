use std::process::{Command, Output};

use hausdorff_lab::cli::{ResultTable, RunConfig};

fn hlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let body: String = csv.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).expect("column present");
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn dim_is_deterministic_and_echoes_config() {
    let args = ["dim", "--kind", "linear", "--n", "2..64", "--geometric", "--seed", "7"];
    let a = hlab(&args);
    let b = hlab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(!text.contains('\r'));
    assert_eq!(column(&text, "n"), ["2", "4", "8", "16", "32", "64"]);
    let echoed = ResultTable::config_from_csv(&text).unwrap();
    let mut expected = RunConfig::default();
    expected
        .apply(&[
            ("kind".into(), "linear".into()),
            ("n".into(), "2,4,8,16,32,64".into()),
            ("seed".into(), "7".into()),
        ])
        .unwrap();
    assert_eq!(echoed, expected);
}

#[test]
fn dim_single_degenerate_row() {
    let o = hlab(&["dim", "--kind", "linear", "--n", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(column(&text, "h_n"), ["0"]);
    assert_eq!(column(&text, "flag"), ["degenerate"]);
}

#[test]
fn gauss_dim_extrapolates_near_six_over_pi_squared() {
    let o = hlab(&["dim", "--kind", "gauss", "--n", "2..256", "--geometric"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(column(&text, "flag")[0], "outside_fit");
    let last: f64 = column(&text, "extrapolation").last().unwrap().parse().unwrap();
    let target = 6.0 / std::f64::consts::PI.powi(2);
    assert!((last - target).abs() / target < 0.02, "{last}");
}

#[test]
fn measure_linear_two_and_trend() {
    let o = hlab(&["measure", "--kind", "linear", "--n", "2"]);
    assert!(o.status.success());
    let h: f64 = column(&stdout(&o), "H_upper")[0].parse().unwrap();
    assert!(h < 0.79, "{h}");

    let o = hlab(&["measure", "--kind", "linear", "--n", "64..4096", "--geometric", "--explain"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let v: Vec<f64> = column(&text, "normalized").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(v.len(), 7);
    assert!(v.windows(2).all(|w| w[1] >= w[0] - 0.02), "{v:?}");
    assert_eq!(column(&text, "best_a").len(), 7);
}

#[test]
fn measure_with_no_families_reports_fallback() {
    let o = hlab(&["measure", "--kind", "gauss", "--n", "4", "--families", "", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["witness_lo"], serde_json::json!(0.2));
    assert_eq!(rows[0]["witness_hi"], serde_json::json!(1.0));
    assert_eq!(v["columns"][0], "n");
}

#[test]
fn operator_rows() {
    let o = hlab(&["operator", "--t", "1", "--n", "8,16,32,64,128,inf"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let dev: Vec<f64> = column(&text, "abs_dev").iter().map(|s| s.parse().unwrap()).collect();
    for w in dev[..5].windows(2) {
        let r = w[1] / w[0];
        assert!((r - 0.5).abs() < 0.1, "{r}");
    }
    assert!(dev[5] < 1e-10);
    assert!(column(&text, "within").iter().all(|s| s == "true"));
}

#[test]
fn sweep_has_row_per_eps() {
    let o = hlab(&["sweep", "--kind", "gauss", "--n", "8,16", "--eps", "0.3,0.5"]);
    assert!(o.status.success());
    assert_eq!(column(&stdout(&o), "eps"), ["0.3", "0.5", "0.3", "0.5"]);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = std::env::temp_dir().join(format!("hlab-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    let out = dir.join("out.csv");
    std::fs::write(&cfg, "# sample\nkind = gauss\nn = 2,3\n").unwrap();
    let o = hlab(&["dim", "--config", cfg.to_str().unwrap(), "--kind", "linear", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("# kind=linear\n"));
    assert_eq!(column(&text, "n"), ["2", "3"]);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes() {
    assert_eq!(hlab(&["dim", "--kind", "cubic"]).status.code(), Some(2));
    assert_eq!(hlab(&["dim", "--bogus"]).status.code(), Some(2));
    assert_eq!(hlab(&["operator", "--t", "0.6", "--n", "inf"]).status.code(), Some(2));
    assert_eq!(hlab(&["dim", "--kind", "linear", "--n", "inf"]).status.code(), Some(2));
}

#[test]
fn verify_passes_and_detects_stale_dimension() {
    let o = hlab(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let total: u64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# total.assertions="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(total > 0);

    let o = hlab(&["verify", "--tol-scale", "0.1"]);
    let text = stdout(&o);
    let suites = column(&text, "check");
    let status = column(&text, "status");
    let i = suites.iter().position(|s| s == "telescoping_identity").unwrap();
    assert_eq!(status[i], "pass");

    let o = hlab(&["verify", "--inject-h-offset", "1e-3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stale dimension"));
}
