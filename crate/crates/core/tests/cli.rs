use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blowup")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("blowup-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn ko_exit_codes() {
    let holds = run(&["ko", "--p", "3"]);
    assert_eq!(holds.status.code(), Some(0));
    assert!(stdout(&holds).contains("verdict=Holds"));

    let fails = run(&["ko", "--family", "expression", "--expr", "u", "--a", "1", "--tail", "power", "--tail-exponent", "2", "--tail-amplitude", "0.5"]);
    assert_eq!(fails.status.code(), Some(2));

    let undecided = run(&["ko", "--family", "expression", "--expr", "u^3", "--a", "1"]);
    assert_eq!(undecided.status.code(), Some(3));
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["nonsense"]).status.code(), Some(64));
    assert_eq!(run(&["ko", "--p", "x"]).status.code(), Some(64));
    assert_eq!(run(&["ko", "--config", "/nonexistent/blowup.cfg"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn expand_power_coefficients() {
    let dir = scratch_dir("expand");
    let out = dir.join("e.csv");
    let o = run(&["expand", "--p", "2", "--N", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# blowup "));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('p'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows[0][2], 0.0);
    assert!((rows[0][4] - 6.0).abs() < 1e-12);
    assert_eq!(rows[1][2], 1.0);
    assert!((rows[1][4] - 2.4).abs() < 1e-12);
}

#[test]
fn picard_one_dimension() {
    let o = run(&["picard", "--p", "3", "--N", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("converged_at_iteration=1\n"));
}

#[test]
fn universal_verdicts() {
    let o = run(&["universal", "--p", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict=Universal"));
    let o = run(&["universal", "--p", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("verdict=NonUniversal"));
}

#[test]
fn config_file_flags_override_and_header_round_trips() {
    let dir = scratch_dir("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "[nonlinearity]\nfamily = power\np = 2\n[problem]\nN = 2\n").unwrap();
    let out = dir.join("out.csv");
    let o = run(&["expand", "--config", cfg.to_str().unwrap(), "--N", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let header: String = text
        .lines()
        .skip(1)
        .filter_map(|l| l.strip_prefix("# "))
        .map(|l| format!("{l}\n"))
        .collect();
    let parsed = blowup::config::RunConfig::parse(&header).unwrap();
    assert_eq!(parsed.dim, 3);
    assert_eq!(parsed.family, blowup::config::FamilySpec::Power { p: 2.0 });
}

#[test]
fn output_is_deterministic_across_jobs() {
    let dir = scratch_dir("jobs");
    let a = dir.join("a.cfg");
    let b = dir.join("b.cfg");
    std::fs::write(&a, "p = 3\nN = 3\n").unwrap();
    std::fs::write(&b, "p = 3\nN = 3\n").unwrap();
    let outdir = dir.join("out");
    let o = run(&[
        "picard",
        "--config",
        a.to_str().unwrap(),
        "--config",
        b.to_str().unwrap(),
        "--jobs",
        "2",
        "--out",
        outdir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.find("[job 0]").unwrap() < s.find("[job 1]").unwrap());
    let ta = std::fs::read(outdir.join("a.csv")).unwrap();
    let tb = std::fs::read(outdir.join("b.csv")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn solve_and_compare_run() {
    let o = run(&["solve", "--p", "3", "--N", "3", "--distances", "1e-2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("center_value="));
    let o = run(&["compare", "--p", "3", "--N", "3", "--distances", "1e-2,1e-3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ratio_k1="));
}
