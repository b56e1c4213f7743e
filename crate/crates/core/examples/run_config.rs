//! Config-driven run: parse a TOML experiment, execute it and list the outputs.

use hycirc::cli::{parse_config, run, RunOptions};

const CONFIG: &str = r#"
kind = "east"
seed = 9

[east]
l = 128
gammas = [0.03, 0.05]
t_max = 256
samples = 1000
"#;

fn main() -> hycirc::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let out = std::env::temp_dir().join("hycirc-run-config");
    let summary = run(&cfg, &RunOptions { out: Some(out), workers: None })?;
    println!("{} workers wrote into {}:", summary.workers, summary.out.display());
    for f in &summary.files {
        println!("  {f}");
    }
    Ok(())
}
