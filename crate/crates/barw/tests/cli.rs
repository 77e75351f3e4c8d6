//! End-to-end tests of the `barw` binary: exit codes, output formats, the
//! determinism contract and the spectrum cache.

use std::path::Path;
use std::process::Command;

fn barw() -> Command {
    Command::new(env!("CARGO_BIN_EXE_barw"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = barw().args(args).output().expect("spawn barw");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn spectrum_emits_exact_rationals() {
    let (code, stdout, _) = run(&["spectrum", "--n", "5", "--points"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["N"], 8);
    assert_eq!(v["nu_hat_4"]["num"], "-7");
    assert_eq!(v["nu_hat_4"]["den"], "25");
    assert_eq!(v["g"], 1);
    assert_eq!(v["points"].as_array().unwrap().len(), 8);
}

#[test]
fn spectrum_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let args = [
        "spectrum",
        "--n",
        "65",
        "--cache-dir",
        cache.to_str().unwrap(),
    ];
    let (code1, out1, _) = run(&args);
    assert_eq!(code1, 0);
    assert!(cache.join("spectra.jsonl").exists());
    let (code2, out2, _) = run(&args);
    assert_eq!(code2, 0);
    assert_eq!(out1, out2, "cache hits must not change output");
}

#[test]
fn corr_oracle_agrees() {
    let (code, stdout, _) = run(&[
        "corr", "--n", "5", "--ell", "2", "--mode", "axis1", "--oracle",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["count"], "16");
    assert_eq!(v["oracle_count"], "16");
    assert_eq!(v["trivial_prediction"], "8");
}

#[test]
fn corr_near_and_projected_modes() {
    let (code, stdout, _) = run(&[
        "corr",
        "--n",
        "5",
        "--ell",
        "2",
        "--mode",
        "axis1",
        "--k",
        "4",
        "--strict-lower",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["count"], "48");
    let (code, stdout, _) = run(&[
        "corr",
        "--n",
        "5",
        "--ell",
        "2",
        "--mode",
        "direction",
        "--dir",
        "1,0",
        "--k",
        "1",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["count"], "32");
}

#[test]
fn validation_errors_exit_2() {
    let (code, _, stderr) = run(&["spectrum", "--n", "3"]);
    assert_eq!(code, 2, "stderr: {stderr}");
    let (code, _, _) = run(&["nodal", "--n", "5", "--trials", "1", "--seed", "1"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["kacrice", "--n", "5", "--box", "2,0,1"]);
    assert_eq!(code, 2);
}

#[test]
fn budget_exceeded_exits_3() {
    let (code, _, stderr) = run(&[
        "corr", "--n", "32045", "--ell", "12", "--mode", "axis1", "--budget", "1000000",
    ]);
    assert_eq!(code, 3, "stderr: {stderr}");
}

#[test]
fn compare_emits_one_data_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    let status = barw()
        .args([
            "compare",
            "--n",
            "5",
            "--trials",
            "16",
            "--seed",
            "9",
            "--kr-resolution",
            "96",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let data_rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("n,") && !l.is_empty())
        .collect();
    assert_eq!(data_rows.len(), 1, "payload:\n{text}");
    let fields: Vec<&str> = data_rows[0].split(',').collect();
    assert_eq!(fields.len(), 12);
    assert_eq!(fields[0], "5");
    assert_eq!(fields[1], "8");
    // sidecar holds the volatile metadata
    assert!(Path::new(&format!("{}.meta", out.display())).exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for (out, _) in [(&out1, 0), (&out2, 1)] {
        let status = barw()
            .args([
                "nodal",
                "--n",
                "5",
                "--trials",
                "8",
                "--seed",
                "31415",
                "--resolution",
                "36",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(
        a, b,
        "identical config and seed must give byte-identical payloads"
    );
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n=5\nell=2\nmode=axis1\n").unwrap();
    let (code, stdout, _) = run(&["corr", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["count"], "16");
    // flag overrides the config's ell
    let (code, stdout, _) = run(&["corr", "--config", cfg.to_str().unwrap(), "--ell", "4"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["count"], "576");
}

#[test]
fn kacrice_report_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kr.csv");
    let status = barw()
        .args([
            "kacrice",
            "--n",
            "65",
            "--resolution",
            "200",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# barw"));
    for row in [
        "kacrice_integral,",
        "kr_error_estimate,",
        "predict_two_term,",
        "singular_fraction,",
        "gamma_consistency_max_dev,",
        "item1_avg_s,",
        "item5_avg_tr_gamma2_per_n2N,",
        "cos4_avg,",
    ] {
        assert!(text.contains(row), "missing row {row} in:\n{text}");
    }
    // header + one value per row, 4 columns
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "name,value,paper_prediction,residual");
    for line in &data[1..] {
        assert_eq!(line.split(',').count(), 4, "bad row {line}");
    }
}

#[test]
fn construct_and_density_and_sectors() {
    let (code, stdout, _) = run(&["construct", "--a", "-0.28", "--tol", "0.05", "--m", "1"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["enumeration_verified"].as_bool().unwrap());
    let achieved = v["achieved"]["float"].as_f64().unwrap();
    assert!((achieved + 0.28).abs() <= 0.05);

    let (code, stdout, _) = run(&["density", "--x", "1000"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("x,count,c_estimate"));
    let data = stdout.lines().last().unwrap();
    assert!(data.starts_with("1000,"));

    let (code, stdout, _) = run(&[
        "sectors", "--theta1", "0", "--theta2", "0.3927", "--x", "10000",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("kubilius_main_term"));
}

#[test]
fn png_and_raw_outputs_exist() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("overlay.png");
    let raw = dir.path().join("field.raw");
    let out = dir.path().join("nodal.csv");
    let status = barw()
        .args([
            "nodal",
            "--n",
            "5",
            "--trials",
            "4",
            "--seed",
            "2",
            "--resolution",
            "36",
            "--png",
            png.to_str().unwrap(),
            "--raw",
            raw.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(png.exists());
    let grid = barw::gridio::read_raw_grid(&raw).unwrap();
    assert_eq!(grid.n, 5);
    assert_eq!((grid.nx, grid.ny), (37, 37));
}
