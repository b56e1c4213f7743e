//! Stochastic Heisenberg-picture sampling of adaptive circuits.
//!
//! A Z-string operator is a bit string. Haar-averaged gates act on it as a
//! classical Markov chain and measure-plus-feedback turns Z_j into I. The
//! defect density follows from the probability that a single seeded Z has not
//! been absorbed into the identity.

mod kernel;
mod state;

pub use kernel::{
    diffusive_kernel, diffusive_kernel_exact, displacement_histogram, ssep_enumerate,
};
pub use state::{
    adaptive_measure_sweep, east_bond_update, ssep_bond_update, Boundary, TrajectoryState,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "u1")]
    U1,
    #[serde(rename = "east")]
    East,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::U1 => "u1",
            Model::East => "east",
        }
    }
}

/// Where the measurement sweeps go relative to the two brickwork layers.
///
/// `Layer`: each time step is one brickwork layer (even and odd alternate)
/// followed by a sweep. `Step`: each time step is the even layer, the odd
/// layer, then a single sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    #[default]
    Layer,
    Step,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub model: Model,
    pub l: usize,
    pub gamma: f64,
    pub t_max: u32,
    pub boundary: Boundary,
    #[serde(default)]
    pub schedule: Schedule,
    pub seed: u64,
    pub samples: usize,
    #[serde(default)]
    pub seed_site: usize,
}

impl ProtocolParams {
    pub fn new(model: Model, l: usize, gamma: f64, t_max: u32, samples: usize, seed: u64) -> Self {
        ProtocolParams {
            model,
            l,
            gamma,
            t_max,
            boundary: Boundary::Periodic,
            schedule: Schedule::default(),
            seed,
            samples,
            seed_site: 0,
        }
    }

    /// All violated invariants, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) || self.gamma.is_nan() {
            v.push(format!("gamma = {} is outside [0, 1]", self.gamma));
        }
        if self.l < 2 {
            v.push(format!("l = {} must be at least 2", self.l));
        }
        if self.boundary == Boundary::Periodic && self.l % 2 == 1 {
            v.push(format!("l = {} is odd, periodic brickwork needs even l", self.l));
        }
        if self.samples == 0 {
            v.push("samples must be at least 1".into());
        }
        if self.seed_site >= self.l.max(1) {
            v.push(format!("seed_site = {} is outside the lattice", self.seed_site));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

fn layer(state: &mut TrajectoryState, model: Model, parity: usize) {
    match model {
        Model::U1 => state.ssep_layer(parity),
        Model::East => state.east_layer(parity),
    }
}

/// Advance one time step under the given schedule.
pub fn advance(state: &mut TrajectoryState, p: &ProtocolParams) {
    match p.schedule {
        Schedule::Step => {
            layer(state, p.model, 0);
            layer(state, p.model, 1);
            state.measure_sweep(p.gamma);
        }
        Schedule::Layer => {
            layer(state, p.model, (state.step % 2) as usize);
            state.measure_sweep(p.gamma);
        }
    }
    state.step += 1;
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryOutcome {
    /// First step after which the string is all zero.
    pub absorbed_at: Option<u32>,
    pub history: Option<Vec<Vec<bool>>>,
}

/// Run one trajectory from a single Z at `j0`, stream `index` of `params.seed`.
pub fn run_trajectory(
    params: &ProtocolParams,
    j0: usize,
    index: u64,
    record: bool,
) -> TrajectoryOutcome {
    let mut s = TrajectoryState::with_seed_site(params.l, params.boundary, stream(params.seed, index), j0);
    let mut history = record.then(|| vec![s.bits()]);
    for t in 1..=params.t_max {
        advance(&mut s, params);
        if let Some(h) = history.as_mut() {
            h.push(s.bits());
        }
        if s.is_absorbed() {
            return TrajectoryOutcome { absorbed_at: Some(t), history };
        }
    }
    TrajectoryOutcome { absorbed_at: None, history }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub params: ProtocolParams,
    pub times: Vec<u32>,
    pub n_d: Vec<f64>,
    pub stderr: Vec<f64>,
    pub active: Vec<usize>,
}

impl DensityCurve {
    pub fn at(&self, t: u32) -> Option<(f64, f64)> {
        self.times
            .iter()
            .position(|&x| x == t)
            .map(|i| (self.n_d[i], self.stderr[i]))
    }

    pub fn active_fraction(&self, t: u32) -> Option<f64> {
        self.at(t).map(|(n, _)| 2.0 * n)
    }

    /// Curve from raw absorption times.
    pub fn from_absorption(params: &ProtocolParams, absorbed: &[Option<u32>]) -> Self {
        let tm = params.t_max as usize;
        let mut dead = vec![0usize; tm + 1];
        for a in absorbed.iter().flatten() {
            dead[*a as usize] += 1;
        }
        let n = absorbed.len();
        let mut alive = n;
        let (mut times, mut nd, mut se, mut act) = (vec![], vec![], vec![], vec![]);
        for (t, d) in dead.iter().enumerate() {
            alive -= d;
            let p = alive as f64 / n as f64;
            times.push(t as u32);
            nd.push(0.5 * p);
            se.push(0.5 * (p * (1.0 - p) / n as f64).sqrt());
            act.push(alive);
        }
        DensityCurve { params: params.clone(), times, n_d: nd, stderr: se, active: act }
    }
}

/// Absorption times of all `params.samples` trajectories, in index order.
pub fn absorption_times(params: &ProtocolParams, workers: usize) -> Result<Vec<Option<u32>>> {
    params.validate()?;
    Ok(map_indexed(params.samples, workers, |i| {
        run_trajectory(params, params.seed_site, i as u64, false).absorbed_at
    }))
}

/// n_d(t) = (active-trajectory fraction) / 2 with binomial standard errors.
pub fn defect_density(params: &ProtocolParams, workers: usize) -> Result<DensityCurve> {
    let a = absorption_times(params, workers)?;
    Ok(DensityCurve::from_absorption(params, &a))
}
