use std::fs;
use std::process::{Command, Output};

fn cpboost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpboost"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn selftest_passes() {
    let o = cpboost(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn tabu_and_brute_force_agree_on_small_instance() {
    let value = |solver: &str| {
        let o = cpboost(&[
            "solve-pbo",
            "--m",
            "30",
            "--n",
            "2",
            "--bit-depth",
            "5",
            "--solver",
            solver,
        ]);
        assert!(o.status.success());
        stdout(&o)
            .lines()
            .find_map(|l| l.strip_prefix("value "))
            .expect("value line")
            .parse::<f64>()
            .unwrap()
    };
    assert_eq!(value("tabu"), value("brute"));
}

#[test]
fn run_then_frontier_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("suite.toml");
    fs::write(
        &config,
        "dataset = \"tiny\"\nmax_iters = 5\nt_prime = 3\nnu_grid = [2.0]\nlambda_grid = [4.0]\nsubset_solver = \"brute_force\"\n\n[boost.tabu]\nrestarts = 2\niters_per_restart = 200\n",
    )
    .unwrap();
    let out = dir.path().join("report");
    let o = cpboost(&[
        "run",
        "--synthetic",
        "60,2,2,0",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "records.csv",
        "frontiers.csv",
        "gains.csv",
        "suboptimality.csv",
        "scatter_tiny.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    for variant in ["A_L1CG", "B_UCG", "C_CPCG", "D_HOT", "E_SUBSET"] {
        assert!(records.contains(variant), "no {variant} record");
    }

    let again = dir.path().join("again");
    let o = cpboost(&[
        "frontier",
        "--records",
        out.join("records.csv").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(out.join("frontiers.csv")).unwrap(),
        fs::read_to_string(again.join("frontiers.csv")).unwrap()
    );
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "lamda_grid = [1.0]\n").unwrap();
    let o = cpboost(&[
        "run",
        "--synthetic",
        "20,1,2,0",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}
