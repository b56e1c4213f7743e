use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, SffParams, StochasticParams};
use super::experiments::{
    adaptive_demo, collapse_experiment, curve_file_name, sff_experiment, stochastic_curves, tmat_check,
    u1_decay_report, write_curve_csv,
};
use crate::error::{Error, Result};
use crate::parallel::WORKERS_ENV;
use crate::stochastic::{Boundary, Model, Schedule};

pub const PRESETS: [&str; 3] = ["u1-decay", "east-collapse", "sff-generic"];

/// Acceptance-scale configurations for the named preset.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let seed = 2024;
    Ok(match name {
        "u1-decay" => {
            let mut c = ExperimentConfig::new(ExperimentKind::Ssep, seed);
            c.ssep = Some(StochasticParams {
                l: 256,
                gammas: vec![0.05, 0.1, 0.2],
                t_max: 80,
                samples: 10_000,
                boundary: Boundary::Periodic,
                schedule: Schedule::Layer,
                seed_site: 0,
            });
            c
        }
        "east-collapse" => {
            let mut c = ExperimentConfig::new(ExperimentKind::Collapse, seed);
            c.collapse = Some(Default::default());
            c
        }
        "sff-generic" => {
            let mut c = ExperimentConfig::new(ExperimentKind::Sff, seed);
            c.sff = Some(SffParams::default());
            c
        }
        other => return Err(Error::InvalidParameter(format!("unknown preset {other} (expected one of {})", PRESETS.join(", ")))),
    })
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub out: PathBuf,
    /// Data files, relative to `out`; the manifest is listed last.
    pub files: Vec<String>,
    pub workers: usize,
}

/// Flag, then the environment override, then the config, then 1.
pub fn effective_workers(flag: Option<usize>, cfg: &ExperimentConfig) -> usize {
    if let Some(n) = flag {
        return n.max(1);
    }
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        return n.max(1);
    }
    cfg.workers.unwrap_or(1).max(1)
}

struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), created_dir, files: vec![] })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(fs::File) -> Result<()>) -> Result<()> {
        let p = self.path(name);
        f(fs::File::create(p)?)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        fs::write(p, s)?;
        Ok(())
    }

    fn cleanup(&self) {
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(f));
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    kind: &'a str,
    seed: u64,
    workers: usize,
    code_version: &'a str,
    wall_time_s: f64,
    files: &'a [String],
    config: String,
}

#[derive(Serialize)]
struct SffSummary {
    variant: String,
    thouless_time: Option<u32>,
    realizations: usize,
    seed: u64,
}

#[derive(Serialize)]
struct EastSummary {
    gamma: f64,
    l: usize,
    t_max: u32,
    active_fraction_final: f64,
    absorbed_all_by: Option<u32>,
}

/// Run one experiment, writing data files and a manifest into the output directory.
/// On failure everything written so far is removed.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    let workers = effective_workers(opts.workers, cfg);
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.kind.name()));
    let mut out = Outputs::new(&dir)?;
    let start = Instant::now();
    match emit(cfg, workers, &mut out) {
        Ok(()) => {}
        Err(e) => {
            out.cleanup();
            return Err(e);
        }
    }
    let files = out.files.clone();
    let manifest = Manifest {
        kind: cfg.kind.name(),
        seed: cfg.seed,
        workers,
        code_version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
        files: &files,
        config: cfg.to_toml()?,
    };
    if let Err(e) = out.json("manifest.json", &manifest) {
        out.cleanup();
        return Err(e);
    }
    Ok(RunSummary { out: dir, files: out.files.clone(), workers })
}

fn emit(cfg: &ExperimentConfig, workers: usize, out: &mut Outputs) -> Result<()> {
    let seed = cfg.seed;
    match cfg.kind {
        ExperimentKind::Sff => {
            let p = cfg.sff();
            let curves = sff_experiment(&p, seed, workers)?;
            let dim = p.q.pow(p.n as u32);
            let mut summary = Vec::new();
            for c in &curves {
                out.csv(&format!("sff_{}.csv", c.variant.name()), |f| c.write_csv(f))?;
                summary.push(SffSummary {
                    variant: c.variant.name().to_string(),
                    thouless_time: c.thouless_time(dim),
                    realizations: c.realizations,
                    seed: c.seed,
                });
            }
            out.json("sff_report.json", &summary)?;
        }
        ExperimentKind::TmatCheck => {
            let r = tmat_check(&cfg.tmat_check(), seed, workers)?;
            out.csv("tmat_check.csv", |f| {
                let mut w = csv::Writer::from_writer(f);
                w.write_record(["m", "n", "pred_re", "pred_im", "mean_re", "mean_im", "se_re", "se_im", "score"])?;
                for row in &r.rows {
                    let vals = [row.predicted.0, row.predicted.1, row.mean.0, row.mean.1, row.stderr.0, row.stderr.1, row.score];
                    let mut rec = vec![row.m.to_string(), row.n.to_string()];
                    rec.extend(vals.iter().map(|x| format!("{x:.12e}")));
                    w.write_record(rec)?;
                }
                w.flush()?;
                Ok(())
            })?;
            #[derive(Serialize)]
            struct S {
                realizations: usize,
                sigmas: f64,
                worst: f64,
                pass: bool,
            }
            out.json("tmat_check.json", &S { realizations: r.realizations, sigmas: r.sigmas, worst: r.worst, pass: r.pass })?;
        }
        ExperimentKind::Ssep | ExperimentKind::East => {
            let model = if cfg.kind == ExperimentKind::Ssep { Model::U1 } else { Model::East };
            let curves = stochastic_curves(model, &cfg.stochastic(), seed, workers)?;
            for c in &curves {
                out.csv(&curve_file_name(c), |f| write_curve_csv(c, f))?;
            }
            if model == Model::U1 {
                out.json("decay.json", &u1_decay_report(&curves)?)?;
            } else {
                let s: Vec<EastSummary> = curves
                    .iter()
                    .map(|c| EastSummary {
                        gamma: c.params.gamma,
                        l: c.params.l,
                        t_max: c.params.t_max,
                        active_fraction_final: c.active_fraction(c.params.t_max).unwrap_or(0.0),
                        absorbed_all_by: c.times.iter().zip(&c.active).find(|(_, &a)| a == 0).map(|(t, _)| *t),
                    })
                    .collect();
                out.json("east_report.json", &s)?;
            }
        }
        ExperimentKind::Collapse => {
            let r = collapse_experiment(&cfg.collapse(), seed, workers)?;
            for c in &r.curves {
                out.csv(&curve_file_name(c), |f| write_curve_csv(c, f))?;
            }
            out.csv("rescaled.csv", |f| r.rescaled.write_csv(f))?;
            out.json("collapse.json", &r.report)?;
        }
        ExperimentKind::DilatedDemo => {
            let r = adaptive_demo(cfg.dilated_demo().states, seed)?;
            out.csv("demo.csv", |f| {
                let mut w = csv::Writer::from_writer(f);
                w.write_record(["state", "z_before", "z_feedback", "z_no_feedback"])?;
                for (i, row) in r.rows.iter().enumerate() {
                    w.write_record([i.to_string(), format!("{:.15e}", row.z_before), format!("{:.15e}", row.z_feedback), format!("{:.15e}", row.z_no_feedback)])?;
                }
                w.flush()?;
                Ok(())
            })?;
            #[derive(Serialize)]
            struct S {
                feedback_error: f64,
                blind_error: f64,
            }
            out.json("demo.json", &S { feedback_error: r.feedback_error, blind_error: r.blind_error })?;
        }
    }
    Ok(())
}
