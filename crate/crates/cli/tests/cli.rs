use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use herdsim::scenario::{parse_curve_csv, COLUMNS};

const BASE: &str = concat!(
    "[signal]\nfamily = \"bounded_mixture\"\nlambda = 0.5\n",
    "[payoff]\nform = \"linear\"\nbase = 0.1\nmatch_bonus = 1\nbeta = 0.25\n",
    "[observation]\nscheme = \"complete\"\n",
    "[strategy]\nkind = \"cutoff\"\nepsilon = 0.05\n",
    "[simulation]\nhorizon = 40\nreplications = 300\nseed = 7\nsize = 5\n",
);

fn herdsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herdsim"))
        .args(args)
        .env_remove("HERDSIM_THREADS")
        .output()
        .expect("spawn herdsim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn out_dir(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn preset_run_writes_curve_and_meta() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(tmp.path(), "o");
    let o = herdsim(&[
        "run",
        "--preset",
        "thm1_bounded",
        "--replications-override",
        "200",
        "--horizon-override",
        "30",
        "--out-dir",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("p_correct="));
    let csv = fs::read_to_string(Path::new(&out).join("curve.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), COLUMNS.join(","));
    assert_eq!(csv.lines().count(), 31);
    let meta = fs::read_to_string(Path::new(&out).join("meta.txt")).unwrap();
    assert!(meta.contains("preset = thm1_bounded"));
    assert!(meta.contains("seed = 1"));
}

#[test]
fn every_emitted_csv_parses_against_the_schema() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["ex_unbounded_complete", "thm2_singleton_endog", "prop5_private_signals", "prop6_separation"] {
        let out = out_dir(tmp.path(), name);
        let o = herdsim(&[
            "run",
            "--preset",
            name,
            "--replications-override",
            "100",
            "--horizon-override",
            "20",
            "--out-dir",
            &out,
        ]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        let csv = fs::read_to_string(Path::new(&out).join("curve.csv")).unwrap();
        let rows = parse_curve_csv(&csv).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(rows.len(), 20);
        assert!(rows.iter().all(|r| r.reps == 100));
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "base.toml", BASE);
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out = out_dir(tmp.path(), &format!("t{threads}"));
        let o = herdsim(&["run", &cfg, "--threads", threads, "--out-dir", &out]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        files.push(fs::read(Path::new(&out).join("curve.csv")).unwrap());
    }
    let out = out_dir(tmp.path(), "env");
    let o = Command::new(env!("CARGO_BIN_EXE_herdsim"))
        .args(["run", &cfg, "--out-dir", &out])
        .env("HERDSIM_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    files.push(fs::read(Path::new(&out).join("curve.csv")).unwrap());
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn bad_thread_env_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "base.toml", BASE);
    let o = Command::new(env!("CARGO_BIN_EXE_herdsim"))
        .args(["run", &cfg, "--out-dir", &out_dir(tmp.path(), "o")])
        .env("HERDSIM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("HERDSIM_THREADS"));
}

#[test]
fn seed_override_changes_the_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "base.toml", BASE);
    let mut files = Vec::new();
    for seed in ["7", "8"] {
        let out = out_dir(tmp.path(), seed);
        let o = herdsim(&["run", &cfg, "--seed", seed, "--out-dir", &out]);
        assert_eq!(o.status.code(), Some(0));
        files.push(fs::read(Path::new(&out).join("curve.csv")).unwrap());
    }
    assert_ne!(files[0], files[1]);
}

#[test]
fn zero_coordination_weight_names_the_assumption() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "beta0.toml", &BASE.replace("beta = 0.25", "beta = 0"));
    let o = herdsim(&["run", &cfg, "--out-dir", &out_dir(tmp.path(), "o")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("assumption 3"), "{}", stderr(&o));
}

#[test]
fn missing_section_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text: String = BASE.split_inclusive('\n').skip(2).collect();
    let cfg = write(tmp.path(), "nosignal.toml", &text);
    let o = herdsim(&["run", &cfg, "--out-dir", &out_dir(tmp.path(), "o")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("signal"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_reported_with_its_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "typo.toml", &BASE.replace("epsilon = 0.05", "epsilom = 0.05"));
    let o = herdsim(&["run", &cfg, "--out-dir", &out_dir(tmp.path(), "o")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("epsilom"), "{}", stderr(&o));
}

#[test]
fn unknown_preset_and_usage_errors_exit_one() {
    assert_eq!(herdsim(&["run", "--preset", "nope"]).status.code(), Some(1));
    assert_eq!(herdsim(&["run"]).status.code(), Some(1));
    assert_eq!(herdsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(herdsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn list_presets_prints_every_preset() {
    let o = herdsim(&["list-presets"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let names = [
        "ex_unbounded_complete",
        "ex_bounded_singleton",
        "thm1_bounded",
        "thm2_singleton_endog",
        "thm3_endog_unbounded",
        "thm4_endog_bounded",
        "prop4_truthseek_endog",
        "prop5_private_signals",
        "prop6_separation",
    ];
    for name in names {
        assert_eq!(text.lines().filter(|l| l.starts_with(name)).count(), 1, "{name}");
    }
}

#[test]
fn default_verify_passes() {
    let o = herdsim(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    assert!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count() >= 5);
}

#[test]
fn risk_dominance_suite_passes_to_six() {
    let o = herdsim(&["verify", "--suite", "risk-dominance", "--max-q", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
    assert!(stdout(&o).starts_with("PASS risk-dominance"));
}

#[test]
fn verify_flags_a_payoff_without_match_premium() {
    let tmp = tempfile::tempdir().unwrap();
    let mut table = String::new();
    for m in 1..=6 {
        let m = m as f64;
        for (th, a, v) in [(0, 0, 1.0 + m), (0, 1, 0.5 + m), (1, 0, 0.2 + m), (1, 1, 2.0 + m)] {
            table.push_str(&format!("{th} {a} {m} {v}\n"));
        }
    }
    write(tmp.path(), "u.txt", &table);
    let payoff = "[payoff]\nform = \"tabulated\"\ntable = \"u.txt\"\n";
    let text = BASE.replace("[payoff]\nform = \"linear\"\nbase = 0.1\nmatch_bonus = 1\nbeta = 0.25\n", payoff);
    let cfg = write(tmp.path(), "asym.toml", &text);
    let o = herdsim(&["verify", "--config", &cfg, "--suite", "unanimity"]);
    let out = stdout(&o);
    assert_ne!(o.status.code(), Some(0), "{out}");
    assert!(out.contains("outside the scope"), "{out}");
    assert!(out.contains("assumption 2"), "{out}");
}
