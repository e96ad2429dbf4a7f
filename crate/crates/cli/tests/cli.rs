use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gauduchon(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gauduchon"))
        .args(args)
        .current_dir(dir)
        .env("GAUDUCHON_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const MANUFACTURED: &str = r#"n = 2
N = 8
[psi]
kind = "manufactured"
u_star = [{ amp = 0.05, freq = [1, 0, -1, 0] }, { amp = -0.05, freq = [1, 0, 1, 0] }]
[flow]
sample_every = 20
tol_osc = 1e-7
"#;

#[test]
fn flat_stationary_run_converges_immediately() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "flat.toml", "n = 2\nN = 8\n");
    let o = gauduchon(&["run", "flat.toml", "--json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["status"], "converged");
    assert_eq!(m["steps"], 0);
    assert_eq!(m["b_tilde"], 0.0);
    // defaults are expanded in the embedded config
    assert_eq!(m["config"]["flow"]["cfl"], 0.2);
    assert_eq!(m["config"]["stencil_order"], 4);
    let trace = fs::read_to_string(dir.path().join("flat-run/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    assert!(dir.path().join("flat-run/solution.bin").exists());
}

#[test]
fn manufactured_run_recovers_target() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.toml", MANUFACTURED);
    let o = gauduchon(&["run", "m.toml", "--json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(m["b_tilde"].as_f64().unwrap().abs() < 1e-6, "{m}");
    assert!(m["u_star_error"].as_f64().unwrap() < 1e-5, "{m}");
}

#[test]
fn forced_timeout_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.toml", &format!("{MANUFACTURED}t_max = 0.001\n"));
    let o = gauduchon(&["run", "m.toml", "--quiet"], dir.path());
    assert_eq!(code(&o), 2);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("m-run/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "time_limit");
}

#[test]
fn positivity_abort_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "p.toml",
        "n = 2\nN = 8\n[u0]\nkind = \"trig\"\nterms = [{ amp = 5.0, freq = [1, 0, 0, 0] }]\n",
    );
    let o = gauduchon(&["run", "p.toml"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "u.toml", "n = 2\n[flow]\ncfl = 0.2\nbogus = 1\n");
    let o = gauduchon(&["run", "u.toml"], dir.path());
    assert_eq!(code(&o), 65);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    write(
        dir.path(),
        "e.toml",
        "n = 2\nN = 8\n[background]\nkind = \"gauduchon_potential\"\neps = 50.0\nv = [{ amp = 1.0, freq = [1, 0, 0, 0] }]\n",
    );
    let o = gauduchon(&["run", "e.toml"], dir.path());
    assert_eq!(code(&o), 65);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("background.eps") && err.contains("x = ["), "{err}");

    assert_eq!(code(&gauduchon(&["run"], dir.path())), 64);
    assert_eq!(code(&gauduchon(&["run", "missing.toml"], dir.path())), 74);
}

#[test]
fn check_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "d.toml", "n = 2\n");
    let o = gauduchon(&["check", "d.toml", "--json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    for prefix in [
        "star_star",
        "z_oracle",
        "tilde_oracle",
        "lambda_f_sum",
        "linearization",
        "commutation_rate",
    ] {
        assert!(names.iter().any(|n| n.starts_with(prefix)), "{prefix} missing");
    }
}

#[test]
fn check_small_three_dimensional_grid_passes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "n = 3\nN = 8\n");
    let o = gauduchon(&["check", "c.toml", "--quiet"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn corrupted_star_fails_check() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "n = 2\nN = 8\n");
    let o = gauduchon(&["check", "c.toml", "--quiet", "--corrupt-star-sign"], dir.path());
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("star_star"), "{err}");
}

#[test]
fn interrupt_and_resume_match_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.toml", MANUFACTURED);
    assert_eq!(
        code(&gauduchon(&["run", "m.toml", "--quiet", "--out", "full"], dir.path())),
        0
    );
    let o = gauduchon(
        &["run", "m.toml", "--quiet", "--out", "part", "--stop-after-steps", "33"],
        dir.path(),
    );
    assert_eq!(code(&o), 130);
    // a second interruption on the way
    let o = gauduchon(&["resume", "part", "--quiet", "--stop-after-steps", "70"], dir.path());
    assert_eq!(code(&o), 130);
    let o = gauduchon(
        &["resume", "part/checkpoint.json", "--quiet", "--config", "m.toml"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace.csv", "solution.bin", "checkpoint_u.bin"] {
        assert_eq!(
            fs::read(dir.path().join("full").join(f)).unwrap(),
            fs::read(dir.path().join("part").join(f)).unwrap(),
            "{f}"
        );
    }
    let manifest = |d: &str| -> serde_json::Value {
        serde_json::from_slice(&fs::read(dir.path().join(d).join("manifest.json")).unwrap()).unwrap()
    };
    let (a, b) = (manifest("full"), manifest("part"));
    for key in ["t", "steps", "b_tilde", "theta", "decay", "u_star_error", "monitor"] {
        assert_eq!(a[key], b[key], "{key}");
    }
    // resuming a finished run returns at once
    let o = gauduchon(&["resume", "full", "--json"], dir.path());
    assert_eq!(code(&o), 0);
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["steps"], a["steps"]);
}

#[test]
fn stale_options_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.toml", MANUFACTURED);
    assert_eq!(
        code(&gauduchon(
            &["run", "m.toml", "--quiet", "--stop-after-steps", "5"],
            dir.path()
        )),
        130
    );
    write(
        dir.path(),
        "other.toml",
        &MANUFACTURED.replace("tol_osc = 1e-7", "tol_osc = 1e-8"),
    );
    let o = gauduchon(&["resume", "m-run", "--config", "other.toml"], dir.path());
    assert_eq!(code(&o), 65);
    assert!(String::from_utf8_lossy(&o.stderr).contains("options hash"));

    let cp = dir.path().join("m-run/checkpoint.json");
    let text = fs::read_to_string(&cp).unwrap();
    fs::write(&cp, text.replace("\"cfl\": 0.2", "\"cfl\": 0.1")).unwrap();
    let o = gauduchon(&["resume", "m-run"], dir.path());
    assert_eq!(code(&o), 65);
}

#[test]
fn manufactured_source_is_reusable_across_resolutions() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.toml", MANUFACTURED);
    let o = gauduchon(&["manufacture", "m.toml", "--out", "psi.bin", "--quiet"], dir.path());
    assert_eq!(code(&o), 0);
    write(
        dir.path(),
        "f.toml",
        "n = 2\nN = 12\n[psi]\nkind = \"file\"\npath = \"psi.bin\"\n[flow]\nsample_every = 20\ntol_osc = 1e-7\n",
    );
    let o = gauduchon(&["run", "f.toml", "--json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // the source is known only on the coarse grid, so b is small rather than round-off
    assert!(m["b_tilde"].as_f64().unwrap().abs() < 1e-2, "{m}");

    // changing the file makes its checkpoints stale
    assert_eq!(
        code(&gauduchon(
            &["run", "f.toml", "--quiet", "--out", "s", "--stop-after-steps", "3"],
            dir.path()
        )),
        130
    );
    let mut bytes = fs::read(dir.path().join("psi.bin")).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(dir.path().join("psi.bin"), bytes).unwrap();
    assert_eq!(code(&gauduchon(&["resume", "s"], dir.path())), 65);
}
