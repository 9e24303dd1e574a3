use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mapcalc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapcalc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MAPCALC_OUT")
        .output()
        .expect("binary runs")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn variation_check_p4_q2_passes_at_one_percent() {
    let dir = tempfile::tempdir().unwrap();
    let out = mapcalc(&["variation-check", "--p", "4", "--q", "2", "--seed", "7", "--h", "1/64", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("o/variation-check.json"));
    assert_eq!(r["schema"], "mapcalc-report/1");
    assert_eq!(r["passed"], true);
    assert_eq!(r["h"].as_f64(), Some(1.0 / 64.0));
    let check = &r["checks"][0];
    assert!(check["value"].as_f64().unwrap() <= 0.01);
    assert_eq!(check["seed"], 7);
    let csv = fs::read_to_string(dir.path().join("o/variation-check.csv")).unwrap();
    assert!(csv.starts_with("functional,h,oracle,formula,rel_err,error_bar\n"));
}

#[test]
fn reports_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mapcalc(&["trace-check", "--out", "o"], dir.path()).status.success());
    fs::rename(dir.path().join("o/trace-check.json"), dir.path().join("first.json")).unwrap();
    assert!(mapcalc(&["trace-check", "--out", "o"], dir.path()).status.success());
    assert_eq!(fs::read(dir.path().join("first.json")).unwrap(), fs::read(dir.path().join("o/trace-check.json")).unwrap());
}

#[test]
fn soliton_and_curvature_commands_pass() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["curvature", "--preset", "euclidean"],
        vec!["curvature", "--preset", "cigar"],
        vec!["curvature", "--preset", "sphere"],
        vec!["verify-soliton", "--preset", "cigar"],
        vec!["hamilton", "--preset", "cigar"],
        vec!["shi-probe"],
    ] {
        let out = mapcalc(&[&args[..], &["--out", "o"]].concat(), dir.path());
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn printed_stress_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[params]\nfunctional = \"pq\"\nstress_form = \"printed\"\n").unwrap();
    let out = mapcalc(&["stress-check", "--config", "c.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&dir.path().join("o/stress-check.json"))["passed"], false);
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[params]\nbogus = 1\n").unwrap();
    assert_eq!(mapcalc(&["variation-check", "--config", "bad.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(mapcalc(&["variation-check", "--h", "abc"], dir.path()).status.code(), Some(2));
    assert_eq!(mapcalc(&["verify-soliton", "--preset", "sphere"], dir.path()).status.code(), Some(2));
    assert_eq!(mapcalc(&["variation-check", "--p", "1.5"], dir.path()).status.code(), Some(2));
}

#[test]
fn out_flag_beats_environment_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[output]\ndir = \"from-config\"\n").unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mapcalc"));
        cmd.args(["curvature", "--config", "c.toml"]).args(extra).current_dir(dir.path()).env_remove("MAPCALC_OUT");
        if let Some(e) = env {
            cmd.env("MAPCALC_OUT", e);
        }
        assert!(cmd.output().unwrap().status.success());
    };
    run(&[], None);
    run(&[], Some("from-env"));
    run(&["--out", "from-flag"], Some("from-env"));
    for d in ["from-config", "from-env", "from-flag"] {
        assert!(dir.path().join(d).join("curvature.json").exists(), "{d}");
    }
}

#[test]
fn run_uses_the_file_command() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "command = \"hamilton\"\n[geometry]\npreset = \"cigar\"\n").unwrap();
    assert!(mapcalc(&["run", "--config", "c.toml", "--out", "o"], dir.path()).status.success());
    assert_eq!(report(&dir.path().join("o/hamilton.json"))["config"]["command"], "hamilton");
}

#[test]
fn sweep_writes_one_directory_per_run_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[sweep]\ncommand = \"trace-check\"\nseeds = [1, 2]\np = [2, 3]\nthreads = 2\n").unwrap();
    let out = mapcalc(&["sweep", "--config", "c.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = report(&dir.path().join("o/sweep/summary.json"));
    assert_eq!(summary["data"]["runs"].as_array().unwrap().len(), 4);
    for stem in ["trace-check-seed1-p2-q3", "trace-check-seed2-p3-q3"] {
        assert!(dir.path().join("o/sweep").join(stem).join("trace-check.json").exists(), "{stem}");
    }
}

#[test]
fn flow_resumes_from_its_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("short.toml"), "[flow]\nmax_iter = 40\n").unwrap();
    fs::write(dir.path().join("long.toml"), "[flow]\nmax_iter = 80\n").unwrap();
    let args = |cfg: &'static str, out: &'static str| vec!["flow", "--config", cfg, "--out", out, "--checkpoint-every", "10"];
    assert!(mapcalc(&args("long.toml", "full"), dir.path()).status.success());
    assert!(mapcalc(&args("short.toml", "part"), dir.path()).status.success());
    let mut resumed = args("long.toml", "rest");
    resumed.extend(["--resume", "part/flow-checkpoint.json"]);
    assert!(mapcalc(&resumed, dir.path()).status.success());
    assert_eq!(fs::read(dir.path().join("full/flow.csv")).unwrap(), fs::read(dir.path().join("rest/flow.csv")).unwrap());
    let s = report(&dir.path().join("rest/flow.json"));
    assert_eq!(s["data"]["summary"]["iterations"], 80);
}
