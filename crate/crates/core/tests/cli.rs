use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn zurn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zurn"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("ZURN_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("exp.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn read(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

fn rows(text: &str) -> Vec<Vec<&str>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect()
}

#[test]
fn fig1_preset_writes_all_balls() {
    let tmp = TempDir::new().unwrap();
    let out = zurn(&["simulate", "--preset", "fig1"], tmp.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let labels = read(tmp.path(), "labels_final.csv");
    assert!(labels.starts_with("realization,index,x1\n"));
    assert_eq!(labels.lines().count(), 5001);
    assert!(!labels.contains('\r'));
    let r = rows(&labels);
    assert_eq!(r[0], ["0", "1", "-1"]);
    assert_eq!(r[1], ["0", "2", "1"]);
    assert_eq!(r[4999][1], "5000");

    let summary = read(tmp.path(), "summary.csv");
    assert!(summary
        .starts_with("realization,coord,a_final,sign_concentration,zero_a_fallback,overflow\n"));
    assert_eq!(rows(&summary).len(), 1);
    let trace = read(tmp.path(), "a_trace.csv");
    assert_eq!(rows(&trace)[0][1], "5000");
    assert!(read(tmp.path(), "manifest.toml").contains("command = \"simulate\""));
}

#[test]
fn zero_additions_keep_initial_configuration() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "initial_labels = [[3, -1], [0, 2], [5, 5]]\nadditions = 0\n",
    );
    let out = zurn(&["simulate", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let labels = read(tmp.path(), "labels_final.csv");
    assert_eq!(
        labels,
        "realization,index,x1,x2\n0,1,3,-1\n0,2,0,2\n0,3,5,5\n"
    );
    assert_eq!(rows(&read(tmp.path(), "a_trace.csv")).len(), 0);
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = [
        "simulate",
        "--preset",
        "fig2b",
        "--realizations",
        "24",
        "--additions",
        "300",
        "--seed",
        "77",
    ];
    let with_threads = |dir: &Path, t: &str| {
        let mut v = args.to_vec();
        v.extend(["--threads", t]);
        assert_eq!(zurn(&v, dir).status.code(), Some(0));
    };
    with_threads(a.path(), "1");
    with_threads(b.path(), "4");
    for f in ["labels_final.csv", "a_trace.csv", "summary.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seed_from_environment_and_flag() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let tmp = TempDir::new().unwrap();
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_zurn"));
        cmd.args(["simulate", "--additions", "50", "--out"])
            .arg(tmp.path());
        cmd.env_remove("ZURN_SEED");
        if let Some(s) = env {
            cmd.env("ZURN_SEED", s);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        read(tmp.path(), "labels_final.csv")
    };
    assert_eq!(run(Some("5"), None), run(None, Some("5")));
    assert_eq!(run(Some("6"), Some("5")), run(None, Some("5")));
    assert_ne!(run(None, Some("5")), run(None, Some("6")));
}

#[test]
fn config_and_io_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(&tmp, "initial_labels = [[1], [1, 2]]\n");
    assert_eq!(
        zurn(&["simulate", "--config", &bad], tmp.path())
            .status
            .code(),
        Some(2)
    );
    let unknown = write_config(&tmp, "colour = 1\n");
    assert_eq!(
        zurn(&["simulate", "--config", &unknown], tmp.path())
            .status
            .code(),
        Some(2)
    );
    let missing = tmp.path().join("nope.toml");
    let out = zurn(
        &["simulate", "--config", missing.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));

    // output directory path blocked by a regular file
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = zurn(&["simulate", "--additions", "5"], &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overflow_exits_3_unless_bigint() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "initial_labels = [[3000000000]]\nadditions = 5\n");
    let out = zurn(&["simulate", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let summary = read(tmp.path(), "summary.csv");
    assert_eq!(rows(&summary)[0], ["0", "1", "", "", "", "1"]);

    let cfg = write_config(
        &tmp,
        "initial_labels = [[3000000000]]\nadditions = 5\nbigint = true\n",
    );
    let out = zurn(&["simulate", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let labels = read(tmp.path(), "labels_final.csv");
    assert_eq!(rows(&labels).len(), 6);
    assert!(rows(&labels)
        .iter()
        .all(|r| r[2].parse::<u128>().unwrap() % 3_000_000_000 == 0));

    let out = zurn(
        &[
            "moments-check",
            "--config",
            &write_config(&tmp, "initial_labels = [[3000000000]]\nadditions = 5\n"),
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn a_distribution_without_additions_is_exact() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "initial_labels = [[1], [1]]\nadditions = 0\nrealizations = 2\n",
    );
    let out = zurn(&["a-distribution", "--config", &cfg], tmp.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let a = read(tmp.path(), "a_final.csv");
    assert!(a.starts_with("realization,coord,a\n"));
    for r in rows(&a) {
        assert_eq!(r[2].parse::<f64>().unwrap(), 1.0 / 3.0);
    }
    let summary = read(tmp.path(), "a_summary.csv");
    assert!(summary.starts_with("coord,realizations,mean,stderr,oracle,z,pass\n"));
    let r = &rows(&summary)[0];
    assert_eq!(r[1], "2");
    assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
    assert_eq!(r[6], "1");

    let one = write_config(&tmp, "realizations = 1\n");
    assert_eq!(
        zurn(&["a-distribution", "--config", &one], tmp.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn moments_check_first_step_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "initial_labels = [[1], [1]]\nadditions = 1\nrealizations = 50\n",
    );
    let out = zurn(&["moments-check", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let m = read(tmp.path(), "moments.csv");
    assert!(m.starts_with("n,mc_r,mc_q,exact_r,exact_q,stderr_r,stderr_q,z_r,z_q\n"));
    let r = &rows(&m)[0];
    assert_eq!(r[0], "3");
    let vals: Vec<f64> = r[1..].iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(vals, [16.0, 6.0, 16.0, 6.0, 0.0, 0.0, 0.0, 0.0]);

    let d2 = write_config(&tmp, "initial_labels = [[1, 0], [0, 1]]\n");
    assert_eq!(
        zurn(&["moments-check", "--config", &d2], tmp.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn limit_check_report_schema() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "initial_labels = [[1, 0], [0, 1]]\nadditions = 1998\nrealizations = 3\n",
    );
    let out = zurn(&["limit-check", "--config", &cfg], tmp.path());
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let report = read(tmp.path(), "limit_report.csv");
    assert!(report.starts_with("test,realization,coord,statistic,threshold,pass\n"));
    let r = rows(&report);
    assert!(r.iter().all(|row| row.len() == 6));
    assert_eq!(
        r.iter()
            .filter(|row| row[0] == "coordinate_coupling")
            .count(),
        3
    );
    assert_eq!(r.iter().filter(|row| row[0] == "pooled_gamma").count(), 2);

    let short = write_config(&tmp, "additions = 100\n");
    assert_eq!(
        zurn(&["limit-check", "--config", &short], tmp.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn fixed_point_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "pool_size = 2000\nstationarity_pool_size = 2000\nstationarity_trials = 4\nstationarity_reference_size = 500\nexp_iterations = 3\n\
         exp_floor_replicates = 2\ncontraction_iterations = 3\nk3_iterations = 3\n",
    );
    let out = zurn(&["fixed-point", "--config", &cfg], tmp.path());
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let fp = read(tmp.path(), "fixedpoint.csv");
    assert!(fp.starts_with("experiment,iteration,distance,ratio\n"));
    let r = rows(&fp);
    assert_eq!(r.iter().filter(|row| row[0] == "exp_ks").count(), 4);
    let coupled: Vec<_> = r
        .iter()
        .filter(|row| row[0] == "contraction_coupled")
        .collect();
    assert_eq!(coupled.len(), 4);
    assert_eq!(coupled[0][3], "");
    assert!(coupled[1][3].parse::<f64>().unwrap() > 0.0);
    let summary = read(tmp.path(), "fixedpoint_summary.csv");
    assert!(summary.starts_with("check,statistic,low,high,pass\n"));
    assert_eq!(rows(&summary).len(), 4);
}
