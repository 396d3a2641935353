//! End-to-end runs of the `mpicsel` binary.

use std::path::Path;
use std::process::{Command, Output};

use mpicsel::prewhiten::gen_ar1_errors;
use mpicsel::simulation::{gen_design, replication_rng};
use nalgebra::DMatrix;

fn mpicsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpicsel"))
        .args(args)
        .env_remove("MPICSEL_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

const TOY: &str = "y,a,b\n1.2,0.1,3\n2.3,0.5,1\n2.9,0.9,4\n4.1,1.4,1\n5.2,1.8,5\n5.8,2.2,9\n7.1,2.7,2\n8.0,3.1,6\n";

fn write_matrix_csv(path: &Path, names: &[String], cols: &[&DMatrix<f64>]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(names).unwrap();
    for i in 0..cols[0].nrows() {
        let row: Vec<String> = cols.iter().flat_map(|m| m.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>()).collect();
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
}

/// `t, y0..y{p-1}, x0..x{k-1}` with AR(1) errors and columns 0 and 1 active.
fn ar1_csv(path: &Path, n: usize, p: usize, rho: f64, seed: u64) {
    let mut rng = replication_rng(seed, 0);
    let x = gen_design(n, 5, &mut rng);
    let theta = DMatrix::from_fn(2, p, |i, j| 2.0 - i as f64 + 0.1 * j as f64);
    let y = x.columns(0, 2) * theta + gen_ar1_errors(n, p, rho, &mut rng);
    let t = DMatrix::from_fn(n, 1, |i, _| i as f64);
    let mut names = vec!["t".to_string()];
    names.extend((0..p).map(|j| format!("y{j}")));
    names.extend((0..5).map(|j| format!("x{j}")));
    write_matrix_csv(path, &names, &[&t, &y, &x]);
}

#[test]
fn select_toy_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    std::fs::write(&data, TOY).unwrap();
    let out = dir.path().join("scores.csv");
    let o = mpicsel(&[
        "select", "--data", data.to_str().unwrap(), "--response-cols", "y",
        "--predictor-cols", "1,a", "--family", "nested", "--criteria", "aic",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows.iter().filter(|r| r[6] == "1").count(), 1);
    let v0: f64 = rows[0][5].parse().unwrap();
    let v1: f64 = rows[1][5].parse().unwrap();
    assert!(v0 <= v1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("AIC:"));
}

#[test]
fn non_numeric_cell_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, TOY.replace("2.9,0.9", "2.9,zero")).unwrap();
    let o = mpicsel(&["select", "--data", data.to_str().unwrap(), "--response-cols", "y", "--predictor-cols", "1,a"]);
    assert_eq!(o.status.code(), Some(3));
    let msg = stderr(&o);
    assert!(msg.contains("row 3") && msg.contains("'a'"), "{msg}");
}

#[test]
fn missing_cell_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("gap.csv");
    std::fs::write(&data, TOY.replace("4.1,1.4,1", "4.1,,1")).unwrap();
    let o = mpicsel(&["select", "--data", data.to_str().unwrap(), "--response-cols", "y", "--predictor-cols", "1,a"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing"));
}

#[test]
fn aicc_guard_everywhere_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("wide.csv");
    let mut rng = replication_rng(4, 0);
    let y = DMatrix::from_fn(8, 6, |_, _| rand::Rng::random::<f64>(&mut rng));
    let x = DMatrix::from_fn(8, 1, |i, _| i as f64);
    let names: Vec<String> = (0..6).map(|j| format!("y{j}")).chain(["a".to_string()]).collect();
    write_matrix_csv(&data, &names, &[&y, &x]);
    let o = mpicsel(&[
        "select", "--data", data.to_str().unwrap(), "--response-cols", "y0,y1,y2,y3,y4,y5",
        "--predictor-cols", "1,a", "--criteria", "aicc",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    std::fs::write(&data, TOY).unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        format!(r#"{{"data": "{}", "response_cols": "y", "predictor_cols": ["1", "a", "b"], "criteria": "bic"}}"#, data.display()),
    )
    .unwrap();
    let out = dir.path().join("s.csv");
    let o = mpicsel(&["select", "--config", cfg.to_str().unwrap(), "--criteria", "aic", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(read_csv(&out).iter().all(|r| r[0] == "AIC"));

    std::fs::write(&cfg, r#"{"reps": 3}"#).unwrap();
    let o = mpicsel(&["select", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("reps"));
}

#[test]
fn invalid_flag_values_name_the_key() {
    for (args, key) in [
        (vec!["simulate", "--grid", "100", "--out", "x"], "'grid'"),
        (vec!["simulate", "--grid", "100:2", "--mode", "fast", "--out", "x"], "'mode'"),
        (vec!["simulate", "--grid", "100:2", "--reps", "-1", "--out", "x"], "'reps'"),
        (vec!["simulate", "--grid", "100:2", "--criteria", "aic,foo", "--out", "x"], "'criteria'"),
        (vec!["simulate", "--grid", "100:2", "--epsilon", "0", "--out", "x"], "'epsilon'"),
    ] {
        let o = mpicsel(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains(key), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn simulate_is_deterministic_and_writes_plot() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = mpicsel(&["simulate", "--mode", "prob", "--grid", "100:2", "--reps", "10", "--seed", "42", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let csv_a = std::fs::read(a.join("prob.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("prob.csv")).unwrap());
    assert!(std::fs::read_to_string(a.join("prob.svg")).unwrap().starts_with("<svg"));
    let rows = read_csv(&a.join("prob.csv"));
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[0] == "100" && r[1] == "2" && r[6] == "42"));
}

#[test]
fn simulate_efficiency_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpicsel(&["simulate", "--mode", "eff", "--grid", "50:10", "--reps", "200", "--seed", "7", "--criteria", "aic,mpic-approx", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("eff.csv"));
    let eff = |label: &str| -> f64 { rows.iter().find(|r| r[2] == label).unwrap()[5].parse().unwrap() };
    assert!(eff("MPIC_Approx") <= eff("AIC"));
}

#[test]
fn simulate_epsilon_sweep_large_n() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpicsel(&["simulate", "--mode", "epsilon-sweep", "--grid", "500:2", "--reps", "200", "--seed", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("epsilon_sweep.csv"));
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let prob: f64 = r[4].parse().unwrap();
        assert!(prob >= 0.9, "{} {prob}", r[2]);
    }
}

#[test]
fn simulate_robust_writes_one_file_per_law() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpicsel(&["simulate", "--mode", "robust", "--grid", "60:3;120:3", "--reps", "4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for law in ["laplace", "t", "chisq", "contaminated"] {
        assert_eq!(read_csv(&dir.path().join(format!("robust_{law}.csv"))).len(), 10);
        assert!(dir.path().join(format!("robust_{law}.svg")).exists());
    }
}

#[test]
fn whiten_select_recovers_ar1_structure() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ar.csv");
    ar1_csv(&data, 300, 3, 0.5, 21);
    let out = dir.path().join("w.csv");
    let o = mpicsel(&[
        "whiten-select", "--data", data.to_str().unwrap(), "--response-cols", "y0,y1,y2",
        "--predictor-cols", "x0,x1,x2,x3,x4", "--time-col", "t", "--split-index", "240",
        "--family", "forced:0", "--criteria", "aic,bic,mpic-approx", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 3);
    let mpic = rows.iter().find(|r| r[0] == "MPIC_Approx").unwrap();
    let rho: f64 = mpic[1].parse().unwrap();
    assert!((0.3..=0.7).contains(&rho), "{rho}");
    assert_eq!(&mpic[2..4], ["1", "1"]);
    let pe: f64 = mpic[7].parse().unwrap();
    assert!(pe.is_finite() && pe > 0.0);
}

#[test]
fn whiten_select_split_at_n_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ar.csv");
    ar1_csv(&data, 60, 2, 0.5, 1);
    let o = mpicsel(&[
        "whiten-select", "--data", data.to_str().unwrap(), "--response-cols", "y0,y1",
        "--predictor-cols", "x0,x1,x2", "--split-index", "60",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("split-index"));
}

#[test]
fn white_noise_whitening_matches_plain_select() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ar.csv");
    ar1_csv(&data, 200, 2, 0.0, 3);
    let w_out = dir.path().join("w.csv");
    let s_out = dir.path().join("s.csv");
    let common = ["--data", data.to_str().unwrap(), "--response-cols", "y0,y1", "--predictor-cols", "x0,x1,x2,x3,x4", "--family", "forced:0", "--criteria", "bic,mpic-approx"];
    let o = mpicsel(&[&["whiten-select", "--out", w_out.to_str().unwrap()], &common[..]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = mpicsel(&[&["select", "--out", s_out.to_str().unwrap()], &common[..]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    // The estimated ρ is small but not exactly zero, so the comparison is of
    // the selected models.
    let names = ["x0", "x1", "x2", "x3", "x4"];
    let w_rows = read_csv(&w_out);
    for r in read_csv(&s_out).iter().filter(|r| r[6] == "1") {
        let w = w_rows.iter().find(|w| w[0] == r[0]).unwrap();
        let chosen: Vec<&str> = names.iter().zip(&w[2..7]).filter(|(_, f)| *f == "1").map(|(n, _)| *n).collect();
        assert_eq!(chosen.join("+"), r[1], "{}", r[0]);
    }
}

#[test]
fn diagnose_synthetic_and_duplicated() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("syn");
    let o = mpicsel(&["diagnose", "--synthetic", "200:4", "--grid", "100:10;200:20;400:40", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let design = read_csv(&out.join("design.csv"));
    assert_eq!(design.len(), 10);
    assert!(design.iter().all(|r| r[3] == "0"));
    // Two comparisons, four conditions, three grid points.
    assert_eq!(read_csv(&out.join("conditions.csv")).len(), 2 * 4 * 3);
    let nc = read_csv(&out.join("noncentrality.csv"));
    assert!(nc.iter().filter(|r| r[1].parse::<usize>().unwrap() >= 5).all(|r| r[2] == "0"));

    let data = dir.path().join("dup.csv");
    std::fs::write(&data, "y,a,b,c\n1,1,2,1\n2,2,1,2\n3,3,5,3\n4,4,2,4\n5,5,7,5\n7,6,1,6\n").unwrap();
    let out = dir.path().join("dup");
    let o = mpicsel(&["diagnose", "--data", data.to_str().unwrap(), "--response-cols", "y", "--predictor-cols", "1,a,b,c", "--family", "forced:0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let flagged: Vec<_> = read_csv(&out.join("design.csv")).into_iter().filter(|r| r[3] == "1").collect();
    assert!(!flagged.is_empty());
    assert!(flagged.iter().all(|r| r[0].contains("+a") && r[0].contains("+c")));
    assert!(!out.join("noncentrality.csv").exists());
}
