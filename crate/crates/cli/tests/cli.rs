use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn pucci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pucci"))
        .args(args)
        .output()
        .expect("spawn pucci")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pucci-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL: &str = "[problem]
domain = ball(0, 0, 1)
operator = laplacian
law = power(0)
f = 1
g = 0
exact = (norm(x)^2 - 1)/4
[grid]
h = 1/8
[solve]
epsilons = 1e-1, 1e-2, 1e-3
[verify]
error_max = 1e-2
";

#[test]
fn list_suites_shows_the_bundled_configs() {
    let out = pucci(&["list-suites"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["laplacian_ball", "pucci_ball", "sharp_p2", "singular_p_half", "abp_sweep", "barrier_sweep"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
    assert!(text.lines().count() >= 6);
}

#[test]
fn empty_suite_directory_says_so() {
    let dir = scratch("empty");
    let out = pucci(&["list-suites", "--suites", dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "no suites found");
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let out = pucci(&["list-suites", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("Usage"));
}

#[test]
fn passing_run_writes_artifacts_and_exits_0() {
    let dir = scratch("ok");
    let cfg = dir.join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let out_dir = dir.join("out");
    let out = pucci(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let solution = fs::read_to_string(out_dir.join("solution.csv")).unwrap();
    assert!(solution.starts_with("x,y,u\n"));
    assert!(solution.lines().count() > 50);
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(report.starts_with("experiment,level,h,metric,value\n"));
    assert!(report.contains("solve,0,0.125,error_linf,"));
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("PASS solve/error_max_level0"));
}

#[test]
fn failed_verification_exits_1() {
    let dir = scratch("fail");
    let cfg = dir.join("strict.cfg");
    fs::write(&cfg, SMALL.replace("error_max = 1e-2", "error_max = 1e-12")).unwrap();
    let out = pucci(&["run", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL solve/error_max_level0"));
}

#[test]
fn parse_errors_exit_2_with_location() {
    let dir = scratch("parse");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, SMALL.replace("g = 0", "g = 1 + sin(x1")).unwrap();
    let out = pucci(&["run", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 6, column"), "{err}");
}

#[test]
fn too_coarse_grid_exits_2() {
    let dir = scratch("coarse");
    let cfg = dir.join("coarse.cfg");
    fs::write(&cfg, SMALL.replace("h = 1/8", "h = 0.3")).unwrap();
    let out = pucci(&["run", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 9"));
}

#[test]
fn non_convergence_exits_3() {
    let dir = scratch("stall");
    let cfg = dir.join("stall.cfg");
    fs::write(&cfg, SMALL.replace("[verify]", "max_iterations = 3\n[verify]")).unwrap();
    let out = pucci(&["run", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_target_exits_2() {
    let out = pucci(&["run", "no_such_suite"]);
    assert_eq!(out.status.code(), Some(2));
}
