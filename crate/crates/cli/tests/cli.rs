use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

fn automodel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_automodel"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_spec(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("desk.toml");
    let text = format!(
        r#"output_dir = "out"
parallelism = 1

[gamma_mesh]
lo = 0.5
hi = 1.5
step = 0.5

[t_mesh]
lo = 30.0
hi = 10000.0
points_per_decade = 20

[s_mesh]
lo = 0.01
hi = 1000.0
points_per_decade = 20
{extra}"#
    );
    fs::write(&path, text).unwrap();
    path
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "timing.txt" {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn every_verb_has_help() {
    for verb in [
        "solve",
        "gtable",
        "reconstruct",
        "boundary",
        "sweep",
        "export-fig2",
        "export-fig345",
    ] {
        let out = automodel(&[verb, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{verb}");
        assert!(stdout(&out).contains("Usage: automodel"), "{verb}");
    }
    assert_eq!(automodel(&["--help"]).status.code(), Some(0));
}

#[test]
fn exit_codes() {
    assert_eq!(automodel(&["solve", "--gamma", "1", "--t", "1", "--x", "1", "--bogus"]).status.code(), Some(1));
    assert_eq!(automodel(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(automodel(&["solve", "--gamma", "2.5", "--t", "1", "--x", "1"]).status.code(), Some(2));
    assert_eq!(automodel(&["solve", "--gamma", "1", "--t=-1", "--x", "1"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none");
    let out = automodel(&["export-fig2", "--dir", missing.to_str().unwrap(), "--dest", "x"]);
    assert_eq!(out.status.code(), Some(3));
    let spec = dir.path().join("bad.toml");
    fs::write(&spec, "output_dir = 3\n").unwrap();
    assert_eq!(automodel(&["sweep", "--spec", spec.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn solve_matches_two_scattering_orders() {
    let out = automodel(&["solve", "--gamma", "1", "--t", "0.1", "--x", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gamma,t,x,f_reg,delta_weight"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // e^-0.1 [0.1 W(2) + 0.1^2/2 (W*W)(2)] with W(2) = 1/18 and (W*W)(2) = 0.0692.
    let two_terms = (-0.1f64).exp() * (0.1 / 18.0 + 0.005 * 0.0692);
    assert!((row[3] / two_terms - 1.0).abs() < 2e-3, "{}", row[3]);
    assert!((row[4] - (-0.1f64).exp()).abs() < 1e-15);
}

#[test]
fn gtable_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    let out = automodel(&["gtable", "--gamma", "1", "--t-max", "100", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# gtable gamma=1"));
    assert!(text.lines().count() > 100);
}

#[test]
fn sweep_smoke_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "");
    let out = automodel(&["sweep", "--spec", spec.to_str().unwrap(), "--parallelism", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("done=3 failed=0 pending=0"));
    let run_dir = dir.path().join("out");
    let figs = dir.path().join("figs");
    let (run_s, figs_s) = (run_dir.to_str().unwrap(), figs.to_str().unwrap());
    assert_eq!(automodel(&["export-fig2", "--dir", run_s, "--dest", figs_s]).status.code(), Some(0));
    assert_eq!(fs::read_to_string(figs.join("fig2.csv")).unwrap().lines().count(), 4);
    let out = automodel(&["export-fig345", "--dir", run_s, "--dest", figs_s, "--gamma", "0.5,1.0,1.5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 9);
    let out = automodel(&["export-fig345", "--dir", run_s, "--dest", figs_s, "--gamma", "0.7"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0.7"));

    // A second invocation finds everything done.
    let again = automodel(&["sweep", "--spec", spec.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&again.stderr).contains("3 done, 0 pending"));
}

#[test]
fn failed_task_sets_numeric_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "\n[overrides.\"1.50\".quad_cfg]\nrel_tol = 1e-8\nabs_tol = 1e-250\nmax_cells = 8\nmax_panel_depth = 100\n",
    );
    let out = automodel(&["sweep", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).starts_with("done=2 failed=1 pending=0"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma=1.50 FAILED"));
}

#[test]
fn killed_sweep_resumes_to_identical_outputs() {
    let reference = tempfile::tempdir().unwrap();
    let spec = write_spec(reference.path(), "");
    assert_eq!(automodel(&["sweep", "--spec", spec.to_str().unwrap()]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "");
    let mut child = Command::new(env!("CARGO_BIN_EXE_automodel"))
        .args(["sweep", "--spec", spec.to_str().unwrap(), "--parallelism", "1"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let out = dir.path().join("out");
    let start = Instant::now();
    let first_done = || {
        ["gamma_0.50", "gamma_1.00", "gamma_1.50"]
            .iter()
            .any(|d| out.join(d).join("status").is_file())
    };
    while !first_done() && start.elapsed() < Duration::from_secs(120) {
        if child.try_wait().unwrap().is_some() {
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let _ = child.kill();
    child.wait().unwrap();

    let resumed = automodel(&["sweep", "--spec", spec.to_str().unwrap()]);
    assert_eq!(resumed.status.code(), Some(0));
    let log = String::from_utf8_lossy(&resumed.stderr);
    assert!(!log.contains("3 done, 0 pending"), "the kill came too late: {log}");
    assert_eq!(snapshot(&reference.path().join("out")), snapshot(&out));
}
