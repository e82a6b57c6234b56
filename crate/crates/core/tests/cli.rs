use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_abs-lab"))
}

fn files_in(dir: &Path) -> Vec<String> {
    match std::fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn run_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("wet.toml");
    std::fs::write(&cfg, "name = \"wet\"\ninitial_speed_mps = 10.0\nn_particles = 200\nroad = [{ t = 0.0, surface = \"wet\" }]\n")
        .unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let trace = std::fs::read_to_string(out.join("wet_trace.csv")).unwrap();
    assert!(trace.starts_with("t,U_true,omega_f_true,omega_r_true,U_meas"));
    assert!(trace.lines().count() > 100);
    let metrics = std::fs::read_to_string(out.join("wet_metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
}

#[test]
fn missing_config_exits_one_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("absent.toml"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(files_in(&out).is_empty());
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "initial_speed_mps = 20.0\nroad = []\n").unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(files_in(&out).is_empty());
}

#[test]
fn unknown_flag_exits_one() {
    let status = bin().args(["run", "--bogus"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn compare_tabulates_all_controllers() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = Vec::new();
    let out = dir.path().to_str().unwrap().to_owned();
    let code = abs_lab::cli::run_cli(
        ["abs-lab", "compare", "--speed", "10", "--surface", "wet", "--particles", "200", "--out", &out],
        &mut text,
    );
    assert_eq!(code, 0);
    let text = String::from_utf8(text).unwrap();
    for name in ["dcee", "csp", "bisection"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{text}");
    }
    assert!(dir.path().join("compare_metrics.csv").exists());
}

#[test]
fn sweep_runs_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = Vec::new();
    let out = dir.path().to_str().unwrap().to_owned();
    let code = abs_lab::cli::run_cli(
        [
            "abs-lab", "sweep", "--speeds-mph", "10,20", "--surfaces", "wet", "--controllers", "csp", "--seeds", "2",
            "--out", &out,
        ],
        &mut text,
    );
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&text));
    let metrics = std::fs::read_to_string(dir.path().join("sweep_metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 4);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for name in files_in(&dir) {
        abs_lab::scenario::ScenarioConfig::load(&dir.join(&name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        n += 1;
    }
    assert!(n >= 2);
}
