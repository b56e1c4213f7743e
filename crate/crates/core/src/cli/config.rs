//! TOML experiment documents.
//!
//! ```toml
//! kind = "east"        # sff | tmat-check | ssep | east | collapse | dilated-demo
//! seed = 42
//! workers = 2          # optional
//! out = "out/east"     # optional
//!
//! [east]
//! l = 256
//! gammas = [0.038]
//! t_max = 512
//! samples = 10000
//! ```
//!
//! Every block and field is optional except `kind`; missing values take the
//! defaults of the corresponding `*Params` type.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaling::CollapseParams;
use crate::sff::{GateFamily, SffVariant};
use crate::stochastic::{Boundary, Model, ProtocolParams, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sff,
    TmatCheck,
    Ssep,
    East,
    Collapse,
    DilatedDemo,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Sff,
        ExperimentKind::TmatCheck,
        ExperimentKind::Ssep,
        ExperimentKind::East,
        ExperimentKind::Collapse,
        ExperimentKind::DilatedDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sff => "sff",
            ExperimentKind::TmatCheck => "tmat-check",
            ExperimentKind::Ssep => "ssep",
            ExperimentKind::East => "east",
            ExperimentKind::Collapse => "collapse",
            ExperimentKind::DilatedDemo => "dilated-demo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SffParams {
    pub n: usize,
    pub q: usize,
    pub family: GateFamily,
    pub measure: bool,
    pub variants: Vec<SffVariant>,
    pub t_max: u32,
    pub realizations: usize,
}

impl Default for SffParams {
    fn default() -> Self {
        SffParams {
            n: 3,
            q: 2,
            family: GateFamily::Generic,
            measure: true,
            variants: vec![SffVariant::Transition, SffVariant::Unitary, SffVariant::Postselected],
            t_max: 10,
            realizations: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TmatParams {
    pub n: usize,
    pub steps: usize,
    pub gamma: f64,
    pub realizations: usize,
    pub family: GateFamily,
    /// Allowed deviation in standard errors.
    pub sigmas: f64,
}

impl Default for TmatParams {
    fn default() -> Self {
        TmatParams { n: 4, steps: 2, gamma: 0.5, realizations: 10_000, family: GateFamily::U1, sigmas: 5.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StochasticParams {
    pub l: usize,
    pub gammas: Vec<f64>,
    pub t_max: u32,
    pub samples: usize,
    pub boundary: Boundary,
    pub schedule: Schedule,
    pub seed_site: usize,
}

impl Default for StochasticParams {
    fn default() -> Self {
        StochasticParams {
            l: 256,
            gammas: vec![0.038],
            t_max: 512,
            samples: 10_000,
            boundary: Boundary::Periodic,
            schedule: Schedule::Layer,
            seed_site: 0,
        }
    }
}

impl StochasticParams {
    pub fn protocol(&self, model: Model, gamma: f64, seed: u64) -> ProtocolParams {
        ProtocolParams {
            model,
            l: self.l,
            gamma,
            t_max: self.t_max,
            boundary: self.boundary,
            schedule: self.schedule,
            seed,
            samples: self.samples,
            seed_site: self.seed_site,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollapseConfig {
    pub model: Model,
    pub sizes: Vec<usize>,
    pub gammas: Vec<f64>,
    pub ratio: f64,
    pub samples: usize,
    pub schedule: Schedule,
    pub exponents: CollapseParams,
    pub gamma_c_grid: [f64; 3],
    pub perturbation: f64,
    /// Critical decay fit: (gamma, L, t_lo, t_hi).
    pub decay_fit: Option<(f64, usize, u32, u32)>,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        CollapseConfig {
            model: Model::East,
            sizes: vec![256, 512, 1024],
            gammas: crate::scaling::linear_grid(0.030, 0.046, 0.002),
            ratio: 2.0,
            samples: 10_000,
            schedule: Schedule::Layer,
            exponents: CollapseParams::default(),
            gamma_c_grid: [0.020, 0.060, 0.0005],
            perturbation: 0.3,
            decay_fit: Some((0.038, 1024, 32, 512)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoParams {
    pub states: usize,
}

impl Default for DemoParams {
    fn default() -> Self {
        DemoParams { states: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sff: Option<SffParams>,
    #[serde(default, rename = "tmat-check", skip_serializing_if = "Option::is_none")]
    pub tmat_check: Option<TmatParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssep: Option<StochasticParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub east: Option<StochasticParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse: Option<CollapseConfig>,
    #[serde(default, rename = "dilated-demo", skip_serializing_if = "Option::is_none")]
    pub dilated_demo: Option<DemoParams>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            seed,
            workers: None,
            out: None,
            sff: None,
            tmat_check: None,
            ssep: None,
            east: None,
            collapse: None,
            dilated_demo: None,
        }
    }

    pub fn sff(&self) -> SffParams {
        self.sff.clone().unwrap_or_default()
    }

    pub fn tmat_check(&self) -> TmatParams {
        self.tmat_check.clone().unwrap_or_default()
    }

    pub fn stochastic(&self) -> StochasticParams {
        match self.kind {
            ExperimentKind::Ssep => self.ssep.clone(),
            _ => self.east.clone(),
        }
        .unwrap_or_default()
    }

    pub fn collapse(&self) -> CollapseConfig {
        self.collapse.clone().unwrap_or_default()
    }

    pub fn dilated_demo(&self) -> DemoParams {
        self.dilated_demo.clone().unwrap_or_default()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Every semantic violation, each naming the offending field.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.workers == Some(0) {
            v.push("workers: must be at least 1".to_string());
        }
        let gamma_ok = |g: f64| (0.0..=1.0).contains(&g);
        match self.kind {
            ExperimentKind::Sff => {
                let p = self.sff();
                if p.q < 2 {
                    v.push(format!("sff.q: {} (need q >= 2)", p.q));
                }
                if p.n < 1 || p.n > 6 {
                    v.push(format!("sff.n: {} (desk scale allows 1..=6)", p.n));
                }
                if p.realizations == 0 {
                    v.push("sff.realizations: must be positive".into());
                }
                if p.variants.is_empty() {
                    v.push("sff.variants: empty".into());
                }
                if p.q != 2 && matches!(p.family, GateFamily::Ising | GateFamily::East) {
                    v.push("sff.family: ising and east gates need q = 2".into());
                }
            }
            ExperimentKind::TmatCheck => {
                let p = self.tmat_check();
                if !gamma_ok(p.gamma) {
                    v.push(format!("tmat-check.gamma: {} outside [0, 1]", p.gamma));
                }
                if p.n < 2 || p.n > 6 {
                    v.push(format!("tmat-check.n: {} (allowed 2..=6)", p.n));
                }
                if p.realizations < 2 {
                    v.push("tmat-check.realizations: need at least 2".into());
                }
                if matches!(p.family, GateFamily::East) {
                    v.push("tmat-check.family: east is not supported here".into());
                }
            }
            ExperimentKind::Ssep | ExperimentKind::East => {
                let block = if self.kind == ExperimentKind::Ssep { "ssep" } else { "east" };
                let p = self.stochastic();
                if p.gammas.is_empty() {
                    v.push(format!("{block}.gammas: empty"));
                }
                for g in &p.gammas {
                    if !gamma_ok(*g) {
                        v.push(format!("{block}.gammas: {g} outside [0, 1]"));
                    }
                }
                let pp = p.protocol(Model::East, 0.5, 0);
                for msg in pp.violations() {
                    if !msg.starts_with("gamma") {
                        v.push(format!("{block}.{msg}"));
                    }
                }
            }
            ExperimentKind::Collapse => {
                let p = self.collapse();
                for g in &p.gammas {
                    if !gamma_ok(*g) {
                        v.push(format!("collapse.gammas: {g} outside [0, 1]"));
                    }
                }
                for &l in &p.sizes {
                    if l < 2 || l % 2 == 1 {
                        v.push(format!("collapse.sizes: {l} (periodic brickwork needs even L >= 2)"));
                    }
                }
                if p.sizes.is_empty() || p.gammas.is_empty() {
                    v.push("collapse: sizes and gammas must be non-empty".into());
                }
                if p.ratio <= 0.0 {
                    v.push("collapse.ratio: must be positive".into());
                }
                if p.samples == 0 {
                    v.push("collapse.samples: must be positive".into());
                }
                let [lo, hi, step] = p.gamma_c_grid;
                if !(lo <= hi && step > 0.0) {
                    v.push("collapse.gamma_c_grid: need lo <= hi and step > 0".into());
                }
                if p.exponents.validate().is_err() {
                    v.push("collapse.exponents: must be positive".into());
                }
            }
            ExperimentKind::DilatedDemo => {
                if self.dilated_demo().states == 0 {
                    v.push("dilated-demo.states: must be positive".into());
                }
            }
        }
        v
    }
}

/// Parse and validate a TOML document, reporting every violation found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
    let mut violations = Vec::new();
    match table.get("kind") {
        None => violations.push("kind: missing".to_string()),
        Some(toml::Value::String(s)) if ExperimentKind::parse(s).is_some() => {}
        Some(other) => {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            violations.push(format!("kind: unknown experiment kind {other} (expected one of {})", names.join(", ")));
        }
    }
    if !violations.is_empty() {
        // keep checking the rest of the document against a placeholder kind
        table.insert("kind".into(), toml::Value::String("dilated-demo".into()));
    }
    let cfg: ExperimentConfig = match table.try_into() {
        Ok(c) => c,
        Err(e) => {
            violations.push(e.message().to_string());
            return Err(Error::Config(violations));
        }
    };
    if violations.is_empty() {
        violations.extend(cfg.violations());
    }
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(violations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violations(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_east() {
        let c = parse_config("kind = \"east\"\n[east]\nl = 256\ngammas = [0.038]\nsamples = 10000\n").unwrap();
        assert_eq!(c.stochastic().l, 256);
        assert_eq!(c.stochastic().samples, 10_000);
    }

    #[test]
    fn gamma_out_of_range_names_field() {
        let v = violations("kind = \"east\"\n[east]\ngammas = [1.5]\n");
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("east.gammas") && v[0].contains("1.5"));
    }

    #[test]
    fn unknown_kind() {
        let v = violations("kind = \"entanglement\"\n");
        assert!(v[0].contains("unknown experiment kind"));
    }

    #[test]
    fn collects_all_violations() {
        let v = violations("kind = \"east\"\nworkers = 0\n[east]\nl = 7\ngammas = [-0.1, 2.0]\n");
        assert_eq!(v.len(), 4, "{v:?}");
        assert!(v.iter().any(|s| s.contains("east.l")));
    }

    #[test]
    fn unknown_fields_rejected() {
        let v = violations("kind = \"sff\"\n[sff]\nnn = 3\n");
        assert!(v[0].contains("nn"));
        assert!(!violations("kind = \"sff\"\ncolour = 1\n").is_empty());
    }

    #[test]
    fn round_trip() {
        for kind in ExperimentKind::ALL {
            let mut c = ExperimentConfig::new(kind, 7);
            c.workers = Some(3);
            c.sff = Some(SffParams::default());
            c.collapse = Some(CollapseConfig::default());
            c.east = Some(StochasticParams::default());
            c.tmat_check = Some(TmatParams::default());
            let text = c.to_toml().unwrap();
            assert_eq!(parse_config(&text).unwrap(), c);
        }
    }
}
