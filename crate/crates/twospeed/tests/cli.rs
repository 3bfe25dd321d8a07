//! End-to-end checks of the batch front end: file outputs, exit codes and
//! byte-level reproducibility.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twospeed"))
}

fn write_cfg(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

const BASE: &str = "\
speeds.lambda = 1.0
speeds.mu = 2.0
domain.X = 1.0
domain.T = 1.0
grid.h = 0.0625
";

#[test]
fn forward_trivial_background_emits_zero_trace() {
    let dir = std::env::temp_dir().join("twospeed_cli_forward");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_cfg(&dir, BASE);
    let status = bin()
        .args(["forward", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(text.starts_with("# twospeed"));
    assert!(text.contains("t,R11,R12,R21,R22"));
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        for field in line.split(',').skip(1) {
            let v: f64 = field.parse().unwrap();
            assert!(v.abs() < 1e-12, "nonzero trace entry {v}");
        }
    }
}

#[test]
fn identical_configs_give_byte_identical_outputs() {
    let dir = std::env::temp_dir().join("twospeed_cli_repro");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_cfg(
        &dir,
        &format!("{BASE}coeff.a12.poly = 0.4\ncoeff.b11.poly = 0.5 0.2\n"),
    );
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.join(format!("out{run}"));
        let status = bin()
            .args(["forward", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "outputs differ between runs");
}

#[test]
fn malformed_config_exits_one_with_line_number() {
    let dir = std::env::temp_dir().join("twospeed_cli_badcfg");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_cfg(&dir, "speeds.lambda = 1.0\nbogus line without equals\n");
    let output = bin()
        .args(["forward", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("line 2"), "stderr: {err}");
}

#[test]
fn invert_with_zero_epsilon_reconstructs_zero() {
    let dir = std::env::temp_dir().join("twospeed_cli_invert0");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_cfg(
        &dir,
        &format!("{BASE}pert.b11.poly = 1.0\nexperiment.epsilon = 0.0\n"),
    );
    let status = bin()
        .args(["invert", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.join("reconstruction.csv")).unwrap();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        for field in line.split(',').skip(1).filter(|f| !f.is_empty()) {
            let v: f64 = field.parse().unwrap();
            assert!(v.abs() < 1e-12, "nonzero reconstruction {v}");
        }
    }
}

#[test]
fn invert_requires_a_perturbation() {
    let dir = std::env::temp_dir().join("twospeed_cli_nopert");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_cfg(&dir, BASE);
    let output = bin()
        .args(["invert", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn stability_and_slowwave_and_convergence_emit_files() {
    let dir = std::env::temp_dir().join("twospeed_cli_misc");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();

    let cfg = write_cfg(
        &dir,
        &format!(
            "{BASE}coeff.a12.poly = 0.4\ncoeff.a21.poly = 0.25\nexperiment.tau = 1.0\n\
             pert.b11.poly = 1.0\nexperiment.epsilons = 0.05\n"
        ),
    );
    for (cmd, file) in [
        ("slowwave", "filter.csv"),
        ("stability", "stability.csv"),
        ("convergence", "convergence.csv"),
    ] {
        let status = bin()
            .args([cmd, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&dir)
            .args(["--refine", "2"])
            .status()
            .unwrap();
        assert!(status.success(), "{cmd} failed");
        assert!(dir.join(file).exists(), "{file} missing");
    }
    let filter = std::fs::read_to_string(dir.join("filter.csv")).unwrap();
    assert!(filter.contains("sigma,l,res_lone,res_ltwo"));
    let stab = std::fs::read_to_string(dir.join("stability.csv")).unwrap();
    assert!(stab.contains("x,lhs,rhs,ratio"));
}

#[test]
fn unknown_command_is_an_input_error() {
    let output = bin().arg("frobnicate").output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn single_threaded_run_matches_parallel_run() {
    let dir = std::env::temp_dir().join("twospeed_cli_threads");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_cfg(
        &dir,
        &format!("{BASE}coeff.a12.poly = 0.4\ncoeff.b21.poly = 0.3\n"),
    );
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.join(format!("t{threads}"));
        let status = bin()
            .env("TWOSPEED_THREADS", threads)
            .args(["forward", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "thread cap changed the output");
}
