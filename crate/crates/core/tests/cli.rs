use std::path::Path;
use std::process::{Command, Output};

const BEAM: &str = r#"
scenario = "beam_free_space"
seed = 4
[particles]
count = 200
[field]
modes = 24
[time]
dt = 5e-4
steps = 10
b_z = 300.0
[output]
snapshot_every = 5
snapshot_grid = 32
"#;

fn fspif(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fspif"));
    c.args(args).env_remove("FSPIF_OUT_DIR");
    if let Some(d) = out_env {
        c.env("FSPIF_OUT_DIR", d);
    }
    c.output().unwrap()
}

fn error_line(o: &Output) -> serde_json::Value {
    assert!(!o.status.success());
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_outputs_to_env_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "beam.toml", BEAM);
    let out = tmp.path().join("env_out");
    let o = fspif(&["run", &cfg], Some(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("diagnostics.csv").exists());
    assert!(out.join("config.toml").exists());
    assert!(out.join("snapshots/step_000005.bin").exists());
}

#[test]
fn flags_override_the_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "beam.toml", BEAM);
    let read = |d: &str| std::fs::read_to_string(tmp.path().join(d).join("diagnostics.csv")).unwrap();
    let run = |d: &str, extra: &[&str]| {
        let out = tmp.path().join(d);
        let mut args = vec!["run", cfg.as_str(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = fspif(&args, None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("a", &["--threads", "1"]);
    run("b", &["--threads", "2"]);
    run("c", &["--seed", "5"]);
    run("d", &["--method", "pic"]);
    run("e", &["--precompute", "on"]);
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_ne!(read("a"), read("d"));
    assert!(std::fs::read_to_string(tmp.path().join("e/config.toml")).unwrap().contains("precomputed"));
}

#[test]
fn failures_emit_one_json_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let bad = write(tmp.path(), "bad.toml", &BEAM.replace("dt = 5e-4", "dt = -1.0"));
    let e = error_line(&fspif(&["run", &bad], Some(&out)));
    assert_eq!(e["error"], "invalid_config");
    assert!(e["message"].as_str().unwrap().contains("time.dt"));

    let e = error_line(&fspif(&["run", "/nonexistent/config.toml"], Some(&out)));
    assert_eq!(e["error"], "io");

    let e = error_line(&fspif(&["run"], Some(&out)));
    assert_eq!(e["error"], "usage");

    let escaping = BEAM.replace("count = 200", "count = 200\nthermal_velocity = 400.0");
    let cfg = write(tmp.path(), "hot.toml", &escaping);
    let e = error_line(&fspif(&["run", &cfg], Some(&out)));
    assert_eq!(e["error"], "particle_escaped");
}

#[test]
fn laplace_study_reports_every_node_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "laplace.toml",
        "scenario = \"laplace_manufactured\"\nseed = 0\n[boundary]\nradius = 1.0\n[study]\nboundary_nodes = [16, 32]\neval_grid = 64\n",
    );
    let out = tmp.path().join("s");
    let o = fspif(&["study", "laplace", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 2, "{stdout}");
    let csv = std::fs::read_to_string(out.join("laplace_convergence.csv")).unwrap();
    assert!(csv.starts_with("nodes,max_error"));
}
