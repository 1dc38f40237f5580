//! Runs the `qfb` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qubit_feedback::cli::{RunManifest, MANIFEST_SCHEMA};
use qubit_feedback::sde::{read_record_csv, read_trajectory_csv, RECORD_SCHEMA};
use tempfile::TempDir;

fn qfb(args: &[&str], config: Option<(&Path, &str)>) -> Output {
    if let Some((path, body)) = config {
        fs::write(path, body).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_qfb"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn run_ok(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> RunManifest {
    let cfg = dir.join(format!("{cmd}.json"));
    let out = dir.join(format!("{cmd}_out"));
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = qfb(&args, Some((&cfg, config)));
    assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(m.schema, MANIFEST_SCHEMA);
    assert_eq!(m.command, cmd);
    for a in &m.artifacts {
        assert!(out.join(a).exists(), "{cmd}: missing artifact {a}");
    }
    m
}

const SIM: &str = r#"{"solver": {"scheme": "rk_milstein", "dt": 1e-3, "n_checkpoints": 20, "n_sub": 10}, "n_traj": 2}"#;

#[test]
fn every_command_writes_a_manifest() {
    let d = TempDir::new().unwrap();
    let dir = d.path();
    let m = run_ok(dir, "simulate", SIM, &["--seed", "3"]);
    assert_eq!(m.seed, 3);
    assert!(m.artifacts.contains(&"trajectory_0001.csv".to_string()));

    let tiny_train = r#"{"preset": "state_piecewise", "epochs": 2, "batch_size": 4, "checkpoint_every": 1,
        "architecture": {"kind": "state", "sizes": [4, 8, 1]},
        "solver": {"scheme": "rk_milstein", "dt": 2e-3, "n_checkpoints": 10, "n_sub": 5}}"#;
    let m = run_ok(dir, "train", tiny_train, &["--workers", "2"]);
    assert_eq!(m.workers, 2);
    assert!(m.artifacts.contains(&"model.json".to_string()));
    let model = dir.join("train_out/model.json");
    let model = model.to_str().unwrap();

    let eval = r#"{"solver": {"scheme": "rk_milstein", "dt": 2e-3, "n_checkpoints": 10, "n_sub": 5}, "n_traj": 8}"#;
    let m = run_ok(dir, "evaluate", eval, &["--model", model]);
    assert!(m.model.is_some());
    let gc = r#"{"solver": {"scheme": "rk_milstein", "dt": 1e-3, "n_checkpoints": 5, "n_sub": 5}, "n_coords": 4}"#;
    run_ok(dir, "gradcheck", gc, &[]);
    let sweep = r#"{"n_traj": 4, "solver": {"scheme": "rk_milstein", "dt": 1e-3, "n_checkpoints": 5, "n_sub": 5}}"#;
    run_ok(dir, "sweep-kappa", sweep, &[]);
    run_ok(dir, "project", r#"{"n_r": 3, "n_phi": 4}"#, &["--model", model]);

    let filt = format!(
        r#"{{"trajectory": "{}", "record": "{}", "n_sub": 10, "dt": 1e-3}}"#,
        dir.join("simulate_out/trajectory_0000.csv").display(),
        dir.join("simulate_out/record_0000.csv").display()
    );
    run_ok(dir, "filter", &filt, &[]);
}

#[test]
fn fixed_seed_reproduces_files() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, SIM).unwrap();
    let run = |name: &str| {
        let out = d.path().join(name);
        let o = qfb(
            &[
                "simulate",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "11",
                "--out",
                out.to_str().unwrap(),
            ],
            None,
        );
        assert!(o.status.success());
        (
            fs::read(out.join("trajectory_0001.csv")).unwrap(),
            fs::read(out.join("record_0001.csv")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn zero_checkpoints_give_header_only_record() {
    let d = TempDir::new().unwrap();
    let body = r#"{"solver": {"scheme": "euler_heun", "dt": 1e-3, "n_checkpoints": 0, "n_sub": 10}}"#;
    run_ok(d.path(), "simulate", body, &[]);
    let rec = fs::read_to_string(d.path().join("simulate_out/record_0000.csv")).unwrap();
    assert_eq!(rec.lines().collect::<Vec<_>>(), vec![RECORD_SCHEMA, "step,t,dJ"]);
    let tr = read_trajectory_csv(fs::File::open(d.path().join("simulate_out/trajectory_0000.csv")).unwrap()).unwrap();
    assert_eq!(tr.len(), 1);
}

#[test]
fn filter_recovers_the_simulated_state() {
    let d = TempDir::new().unwrap();
    let sim = r#"{"solver": {"scheme": "rk_milstein", "dt": 1e-4, "n_checkpoints": 15, "n_sub": 100},
        "initial": {"angles": {"theta": 2.0, "phi": 0.5}}}"#;
    run_ok(d.path(), "simulate", sim, &["--seed", "4"]);
    let traj = d.path().join("simulate_out/trajectory_0000.csv");
    let rec = d.path().join("simulate_out/record_0000.csv");
    let filt = format!(
        r#"{{"trajectory": "{}", "record": "{}", "n_sub": 100, "dt": 1e-4,
            "initial": {{"angles": {{"theta": 2.0, "phi": 0.5}}}}}}"#,
        traj.display(),
        rec.display()
    );
    run_ok(d.path(), "filter", &filt, &[]);
    let rows = read_trajectory_csv(fs::File::open(&traj).unwrap()).unwrap();
    assert_eq!(read_record_csv(fs::File::open(&rec).unwrap()).unwrap().len(), 1500);
    let text = fs::read_to_string(d.path().join("filter_out/bloch.csv")).unwrap();
    let last: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    let s = rows.last().unwrap().1;
    let (e, g) = s.amplitudes();
    let x = 2.0 * (e.conj() * g).re;
    let z = e.norm_sqr() - g.norm_sqr();
    assert_eq!(last[0], 1500.0);
    assert!(
        (last[2] - x).abs() < 1e-3 && (last[4] - z).abs() < 1e-3,
        "{last:?} vs x {x} z {z}"
    );
    assert!((last[5] - 1.0).abs() < 1e-9);
}

#[test]
fn exit_codes_follow_error_kind() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("o");
    let out = out.to_str().unwrap();

    let bad = d.path().join("bad.json");
    let o = qfb(
        &["simulate", "--config", bad.to_str().unwrap(), "--out", out],
        Some((&bad, r#"{"n_trajectories": 3}"#)),
    );
    assert_eq!(o.status.code(), Some(2));
    let o = qfb(&["evaluate", "--out", out, "--workers", "0"], None);
    assert_eq!(o.status.code(), Some(2));

    let missing = d.path().join("missing.json");
    let o = qfb(&["simulate", "--config", missing.to_str().unwrap(), "--out", out], None);
    assert_eq!(o.status.code(), Some(4));

    // with a nonzero drive, a current of 1e300 overflows the filter propagator
    let traj = d.path().join("t.csv");
    let rec = d.path().join("r.csv");
    fs::write(
        &traj,
        "# qubit-feedback trajectory v1\nt,re_e,im_e,re_g,im_g,fidelity,omega\n0,1,0,0,0,1,0\n0.001,1,0,0,0,1,1\n",
    )
    .unwrap();
    fs::write(&rec, format!("{RECORD_SCHEMA}\nstep,t,dJ\n0,0,1e300\n")).unwrap();
    let cfg = d.path().join("f.json");
    let body = format!(
        r#"{{"trajectory": "{}", "record": "{}", "n_sub": 1, "dt": 1e-3}}"#,
        traj.display(),
        rec.display()
    );
    let o = qfb(
        &["filter", "--config", cfg.to_str().unwrap(), "--out", out],
        Some((&cfg, &body)),
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
