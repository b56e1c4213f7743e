use std::fs;
use std::process::Command;

use hycirc::cli::{parse_config, ExperimentKind};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hycirc"))
}

fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("hycirc-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

#[test]
fn config_round_trip() {
    let cfg = parse_config("kind = \"ssep\"\nseed = 4\n[ssep]\nl = 32\ngammas = [0.1]\nt_max = 16\nsamples = 100\n").unwrap();
    assert_eq!(cfg.kind, ExperimentKind::Ssep);
    assert_eq!(cfg.stochastic().l, 32);
    let again = parse_config(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn config_reports_all_violations() {
    let err = parse_config("kind = \"ssep\"\n[ssep]\nl = 1\ngammas = [1.5]\nsamples = 0\n").unwrap_err();
    let hycirc::Error::Config(v) = err else { panic!("expected a config error") };
    assert!(v.len() >= 3, "{v:?}");
}

#[test]
fn subcommand_writes_outputs() {
    let out = scratch("demo");
    let st = bin().args(["dilated-demo", "--seed", "5", "--out"]).arg(&out).status().unwrap();
    assert!(st.success());
    for f in ["demo.csv", "demo.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 5);
    fs::remove_dir_all(out).unwrap();
}

#[test]
fn workers_env_and_flag() {
    let cfg = scratch("cfg").with_extension("toml");
    fs::write(&cfg, "kind = \"east\"\nseed = 1\n[east]\nl = 16\ngammas = [0.05]\nt_max = 8\nsamples = 50\n").unwrap();
    let out = scratch("env");
    let o = bin().args(["east", "--config"]).arg(&cfg).arg("--out").arg(&out).env("HYCIRC_WORKERS", "2").output().unwrap();
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["workers"], 2);
    let o = bin().args(["east", "--workers", "3", "--config"]).arg(&cfg).arg("--out").arg(&out).env("HYCIRC_WORKERS", "2").output().unwrap();
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["workers"], 3);
    fs::remove_dir_all(out).unwrap();
    fs::remove_file(cfg).unwrap();
}

#[test]
fn bad_input_exits_nonzero() {
    let cfg = scratch("bad").with_extension("toml");
    fs::write(&cfg, "kind = \"sff\"\n").unwrap();
    let o = bin().args(["east", "--config"]).arg(&cfg).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not match"));
    assert!(!bin().args(["reproduce", "nope"]).output().unwrap().status.success());
    fs::remove_file(cfg).unwrap();
}
