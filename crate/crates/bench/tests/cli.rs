use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sivs_core::diagnostics::{rates, GHIA_U_CSV, GHIA_V_CSV};
use sivs_core::problems::regularized_lid;

fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sivs-bench-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn bench(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sivs-bench"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--single-thread")
        .output()
        .expect("failed to launch sivs-bench")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&read(dir, "report.json")).unwrap()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn mms_rates_round_trip() {
    let dir = out_dir("mms");
    let o = bench(&["mms", "--n", "4,8,16"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&dir, "rates.csv");
    assert_eq!(text.lines().next().unwrap(), "n,h,l2_u,rate_l2_u,h1_u,rate_h1_u,div_u,rate_div_u,l2_p,rate_l2_p,iterations,converged");
    let rows = rows(&text);
    assert_eq!(rows.len(), 3);
    let h: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    for c in 0..4 {
        let errs: Vec<f64> = rows.iter().map(|r| r[2 + 2 * c].parse().unwrap()).collect();
        let recomputed = rates(&h, &errs).unwrap();
        for (r, expect) in rows.iter().zip(&recomputed) {
            let written = &r[3 + 2 * c];
            match expect {
                None => assert_eq!(written, "-"),
                Some(v) => assert_eq!(written.parse::<f64>().unwrap().to_bits(), v.to_bits()),
            }
        }
    }
    // Velocity H1 rate of P2 elements.
    let h1: f64 = rows[2][5].parse().unwrap();
    assert!((h1 - 2.0).abs() < 0.2, "{h1}");
    let rep = report(&dir);
    assert_eq!(rep["members"].as_array().unwrap().len(), 3);
    assert_eq!(rep["all_converged"], Value::Bool(true));
}

#[test]
fn single_mesh_has_no_rates() {
    let dir = out_dir("mms-single");
    let o = bench(&["mms", "--n", "4"], &dir);
    assert_eq!(o.status.code(), Some(0));
    let rows = rows(&read(&dir, "rates.csv"));
    assert_eq!(rows.len(), 1);
    for c in 0..4 {
        assert_eq!(rows[0][3 + 2 * c], "-");
    }
}

#[test]
fn cavity_outputs() {
    let dir = out_dir("cavity");
    let o = bench(&["cavity", "--n", "10", "--re-list", "100,200"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let field = read(&dir, "field_sample.csv");
    assert_eq!(field.lines().next().unwrap(), "x,y,u1,u2,speed,p");
    let field = rows(&field);
    assert_eq!(field.len(), 101 * 101);
    let lid = &field[100 * 101..];
    for (i, r) in lid.iter().enumerate() {
        let x: f64 = r[0].parse().unwrap();
        let y: f64 = r[1].parse().unwrap();
        let u1: f64 = r[2].parse().unwrap();
        let u2: f64 = r[3].parse().unwrap();
        assert_eq!(y, 1.0);
        assert!(u2.abs() < 1e-12);
        // Quadratic interpolant of the lid on the boundary edge of width 0.1.
        let e = (i / 10).min(9) as f64 / 10.0;
        let (x0, xm, x1) = (e, e + 0.05, e + 0.1);
        let (f0, fm, f1) = (regularized_lid(x0), regularized_lid(xm), regularized_lid(x1));
        let q = f0 * (x - xm) * (x - x1) / ((x0 - xm) * (x0 - x1))
            + fm * (x - x0) * (x - x1) / ((xm - x0) * (xm - x1))
            + f1 * (x - x0) * (x - xm) / ((x1 - x0) * (x1 - xm));
        assert!((u1 - q).abs() < 1e-12, "x={x} u1={u1} q={q}");
        if i % 5 == 0 {
            assert!((u1 - regularized_lid(x)).abs() < 1e-12);
        }
    }

    let cu = read(&dir, "centerline_u.csv");
    assert_eq!(cu.lines().next().unwrap(), "y,re100,re200");
    assert_eq!(cu.lines().count(), 18);
    let cv = read(&dir, "centerline_v.csv");
    assert_eq!(cv.lines().next().unwrap(), "x,re100,re200");
    assert_eq!(read(&dir, "ghia_u.csv"), GHIA_U_CSV);
    assert_eq!(read(&dir, "ghia_v.csv"), GHIA_V_CSV);

    let it = read(&dir, "iterations.csv");
    assert!(it.lines().skip(1).any(|l| l.starts_with("re100,sivs,")));
    assert!(it.lines().skip(1).any(|l| l.starts_with("re200,sivs,")));
    assert_eq!(report(&dir)["members"].as_array().unwrap().len(), 2);
}

#[test]
fn configuration_errors_exit_one() {
    let cases: [&[&str]; 5] = [
        &["cavity", "--n", "0"],
        &["cavity", "--n", "6", "--re-list", "400,100"],
        &["cavity", "--n", "6", "--method", "newton"],
        &["mms", "--n", "4", "--tol", "-1"],
        &["cavity", "--config", "/nonexistent/run.json"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let o = bench(args, &out_dir(&format!("bad{i}")));
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn nonconvergence_exits_two() {
    let dir = out_dir("noconv");
    let o = bench(&["cavity", "--n", "6", "--re", "400", "--max-iter", "2"], &dir);
    assert_eq!(o.status.code(), Some(2));
    let rep = report(&dir);
    assert_eq!(rep["all_converged"], Value::Bool(false));
    assert_eq!(rep["members"][0]["iterations"], 2);
}

#[test]
fn single_thread_runs_are_reproducible() {
    let (a, b) = (out_dir("det-a"), out_dir("det-b"));
    for d in [&a, &b] {
        assert_eq!(bench(&["cavity", "--n", "8"], d).status.code(), Some(0));
    }
    for name in ["centerline_u.csv", "centerline_v.csv", "field_sample.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    let strip = |t: String| -> Vec<String> {
        t.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    assert_eq!(strip(read(&a, "iterations.csv")), strip(read(&b, "iterations.csv")));
}

#[test]
fn config_file_with_flag_override() {
    let dir = out_dir("config");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, r#"{"n": [6], "tol": 1e-8, "gamma": 2.0}"#).unwrap();
    let o = bench(&["cavity", "--config", cfg.to_str().unwrap(), "--tol", "1e-7"], &dir);
    assert_eq!(o.status.code(), Some(0));
    let c = &report(&dir)["config"];
    assert_eq!(c["n"][0], 6);
    assert_eq!(c["stop_tol"].as_f64(), Some(1e-7));
    assert_eq!(c["gamma"][0].as_f64(), Some(2.0));

    std::fs::write(&cfg, r#"{"colour": 1}"#).unwrap();
    let o = bench(&["cavity", "--config", cfg.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_methods_agree() {
    let dir = out_dir("compare");
    let o = bench(&["compare", "--n", "8", "--re", "100", "--tol", "1e-10", "--keep-iterates"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(&dir);
    let d = rep["distances"].as_array().unwrap();
    assert_eq!(d.len(), 3);
    for p in d {
        assert!(p["velocity"].as_f64().unwrap() <= 1e-8, "{p}");
        assert!(p["centerline"].as_f64().unwrap() <= 1e-6, "{p}");
    }
    assert_eq!(read(&dir, "centerline_u.csv").lines().next().unwrap(), "y,sivs,ipy,picard");
    for m in ["sivs", "ipy", "picard"] {
        assert!(read(&dir, &format!("contraction_{m}.csv")).starts_with("k,a,b,c,m"));
    }
}

#[test]
fn gamma_sweep_labels() {
    let dir = out_dir("gamma");
    let o = bench(&["gamma-sweep", "--n", "6", "--gamma-list", "0.001,1000"], &dir);
    assert_eq!(o.status.code(), Some(0));
    let rep = report(&dir);
    let labels: Vec<&str> = rep["members"].as_array().unwrap().iter().map(|m| m["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["gamma0.001", "gamma1000"]);
}
