//! Engine drivers behind each experiment kind. Everything here is
//! deterministic in the seed and independent of the worker count.

use nalgebra::DVector;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::{CollapseConfig, SffParams, StochasticParams, TmatParams};
use crate::dilated::{
    dilated_expval, haar_unitary, measurement_local, pauli_matrix, AdaptiveGateSpec, DilatedState, LocalOp,
    MeasurementSpec, Register, SpacetimeLattice, adaptive_local,
};
use crate::error::Result;
use crate::parallel::map_indexed;
use crate::rng::{derive, stream};
use crate::scaling::{
    critical_decay_check, estimate_gamma_c, fit_decay_rate, linear_grid, rescale, rescale_with, CollapseMode,
    CollapseParams, CollapseResult, DecayFit, GammaCEstimate, DEFAULT_DRIFT_LIMIT,
};
use crate::sff::{
    brickwork_layers, sff_isometric_in, sff_postselected, sff_reset, sff_state_dependent, sff_transition,
    HybridFloquetSpec, SffCircuit, SffCurve, SffVariant,
};
use crate::stochastic::{defect_density, DensityCurve, Model};
use crate::tmat::{compose, tgate_evo_blocks, tgate_meas_x, Direction, TransitionGate};
use crate::weyl::{decompose, DenseOperator, Matrix, OperatorVector, C64};

// ---------------------------------------------------------------- sff

pub fn sff_experiment(p: &SffParams, seed: u64, workers: usize) -> Result<Vec<SffCurve>> {
    let hybrid = HybridFloquetSpec::brickwork(p.n, p.q, p.family, p.measure)?;
    p.variants
        .iter()
        .map(|&v| {
            let s = derive(seed, v.name());
            let mut c = match v {
                SffVariant::Transition => sff_transition(&SffCircuit::brickwork(p.n, p.q, p.family)?, p.t_max)?,
                SffVariant::Unitary => {
                    let mut c = sff_postselected(&hybrid.without_measurements(), p.t_max, p.realizations, s, workers)?;
                    c.variant = SffVariant::Unitary;
                    c
                }
                SffVariant::Postselected => sff_postselected(&hybrid, p.t_max, p.realizations, s, workers)?,
                SffVariant::Reset => sff_reset(&hybrid, p.t_max, p.realizations, s, workers)?,
                SffVariant::StateDependent => {
                    let d = hybrid.lattice.physical_dim();
                    let rho = Matrix::identity(d, d) / C64::new(d as f64, 0.0);
                    sff_state_dependent(&rho, &hybrid, p.t_max, p.realizations, s, workers)?
                }
                SffVariant::IsometricIn => sff_isometric_in(&hybrid, p.t_max, p.realizations, s, workers)?,
            };
            c.seed = if v == SffVariant::Transition { 0 } else { s };
            Ok(c)
        })
        .collect()
}

// ---------------------------------------------------------------- tmat-check

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub m: usize,
    pub n: usize,
    pub predicted: (f64, f64),
    pub mean: (f64, f64),
    pub stderr: (f64, f64),
    /// Deviation in units of the tolerance (<= 1 passes).
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmatCheckReport {
    pub rows: Vec<CoefficientRow>,
    pub realizations: usize,
    pub sigmas: f64,
    pub worst: f64,
    pub pass: bool,
}

/// Fixed product state with generic Bloch vectors.
pub fn demo_product_state(n: usize) -> DVector<C64> {
    let mut psi = DVector::from_element(1, C64::new(1.0, 0.0));
    for j in 0..n {
        let th = 0.3 + 0.5 * j as f64;
        let ph = 0.2 + 0.7 * j as f64;
        let q = DVector::from_vec(vec![C64::new((th / 2.0).cos(), 0.0), C64::from_polar((th / 2.0).sin(), ph)]);
        psi = psi.kronecker(&q);
    }
    psi
}

fn tmat_circuit(p: &TmatParams) -> Result<crate::tmat::TransitionCircuit> {
    let mut layers: Vec<Vec<TransitionGate>> = Vec::new();
    let evo = brickwork_layers(p.n, 2, p.family)?;
    for _ in 0..p.steps {
        for l in &evo {
            if let crate::dilated::Layer::Gates(gs) = l {
                layers.push(gs.iter().map(tgate_evo_blocks).collect::<Result<_>>()?);
            }
        }
        layers.push((0..p.n).map(|j| tgate_meas_x(2, vec![j], &[0, 1]).map(|g| g.mixture(p.gamma))).collect::<Result<_>>()?);
    }
    compose(2, p.n, layers, Direction::Schrodinger)
}

/// Outcome-averaged physical state of one random realization via the dilation.
fn tmat_realization(p: &TmatParams, psi0: &DVector<C64>, seed: u64, index: u64) -> Result<Matrix> {
    let mut rng = stream(seed, index);
    let evo = brickwork_layers(p.n, 2, p.family)?;
    let mut ops: Vec<LocalOp> = Vec::new();
    let mut measured: Vec<usize> = Vec::new();
    let mut pending: Vec<(usize, usize)> = Vec::new();
    for _ in 0..p.steps {
        for l in &evo {
            if let crate::dilated::Layer::Gates(gs) = l {
                for g in gs {
                    ops.push(g.sample(&mut rng).local()?);
                }
            }
        }
        for j in 0..p.n {
            if rng.random::<f64>() < p.gamma {
                pending.push((ops.len(), measured.len()));
                measured.push(j);
                ops.push(LocalOp { factors: vec![], op: Matrix::zeros(0, 0) });
            }
        }
    }
    let regs = measured.iter().enumerate().map(|(i, &j)| Register { site: j, tau: i + 1, levels: 2 }).collect();
    let lattice = SpacetimeLattice::new(p.n, 2, regs)?;
    for (slot, r) in pending {
        let spec = MeasurementSpec::x_basis(2, vec![measured[r]], &[0, 1], r)?;
        ops[slot] = measurement_local(&spec, &lattice)?;
    }
    let mut state = DilatedState::pure_product(&lattice, psi0)?;
    state.apply_all(&ops, &lattice);
    Ok(state.physical(&lattice))
}

fn dense_coeffs(v: &OperatorVector) -> Vec<C64> {
    let d = v.q.pow(v.sites as u32);
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    for (k, c) in &v.terms {
        let (m, n) = k.codes();
        out[m * d + n] = *c;
    }
    out
}

const CHUNK: usize = 64;

pub fn tmat_check(p: &TmatParams, seed: u64, workers: usize) -> Result<TmatCheckReport> {
    let psi0 = demo_product_state(p.n);
    let rho0 = &psi0 * psi0.adjoint();
    let v0 = decompose(&DenseOperator::new(2, p.n, rho0)?);
    let predicted = dense_coeffs(&tmat_circuit(p)?.evolve(&v0)?);
    let k = predicted.len();
    let chunks = p.realizations.div_ceil(CHUNK);
    let partial = map_indexed(chunks, workers, |c| -> Result<(Vec<[f64; 4]>, usize)> {
        let mut acc = vec![[0.0; 4]; k];
        let lo = c * CHUNK;
        let hi = ((c + 1) * CHUNK).min(p.realizations);
        for i in lo..hi {
            let rho = tmat_realization(p, &psi0, seed, i as u64)?;
            let coeffs = dense_coeffs(&decompose(&DenseOperator::new(2, p.n, rho)?).with_prune(0.0));
            for (a, z) in acc.iter_mut().zip(&coeffs) {
                a[0] += z.re;
                a[1] += z.re * z.re;
                a[2] += z.im;
                a[3] += z.im * z.im;
            }
        }
        Ok((acc, hi - lo))
    });
    let mut tot = vec![[0.0; 4]; k];
    for part in partial {
        let (acc, _) = part?;
        for (t, a) in tot.iter_mut().zip(&acc) {
            for i in 0..4 {
                t[i] += a[i];
            }
        }
    }
    let n = p.realizations as f64;
    let d = 1usize << p.n;
    let se = |s: f64, s2: f64| ((s2 / n - (s / n).powi(2)).max(0.0) / (n - 1.0)).sqrt();
    let rows: Vec<CoefficientRow> = (0..k)
        .map(|i| {
            let t = tot[i];
            let mean = (t[0] / n, t[2] / n);
            let err = (se(t[0], t[1]), se(t[2], t[3]));
            let tol = |e: f64| (p.sigmas * e).max(1e-10);
            let score = ((mean.0 - predicted[i].re).abs() / tol(err.0)).max((mean.1 - predicted[i].im).abs() / tol(err.1));
            CoefficientRow { m: i / d, n: i % d, predicted: (predicted[i].re, predicted[i].im), mean, stderr: err, score }
        })
        .collect();
    let worst = rows.iter().map(|r| r.score).fold(0.0, f64::max);
    Ok(TmatCheckReport { rows, realizations: p.realizations, sigmas: p.sigmas, worst, pass: worst <= 1.0 })
}

// ---------------------------------------------------------------- dilated demo

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoRow {
    pub z_before: f64,
    pub z_feedback: f64,
    pub z_no_feedback: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub rows: Vec<DemoRow>,
    /// max |<Z> - 1| with feedback.
    pub feedback_error: f64,
    /// max |<Z> - <Z>_before| without feedback.
    pub blind_error: f64,
}

/// Measure Z into a register, then apply X conditioned on outcome 1.
pub fn adaptive_demo(states: usize, seed: u64) -> Result<DemoReport> {
    let lattice = SpacetimeLattice::new(1, 2, vec![Register { site: 0, tau: 1, levels: 2 }])?;
    let z = pauli_matrix('Z')?;
    let meas = measurement_local(&MeasurementSpec::pauli(vec![0], "Z", 0)?, &lattice)?;
    let fb = adaptive_local(
        &AdaptiveGateSpec { controls: vec![0], table: vec![Matrix::identity(2, 2), pauli_matrix('X')?], target: vec![0] },
        &lattice,
    )?;
    let mut rows = Vec::new();
    for i in 0..states {
        let mut rng = stream(seed, i as u64);
        let u = haar_unitary(2, &mut rng);
        let psi = u.column(0).into_owned();
        let before = (psi.adjoint() * &z * &psi)[(0, 0)].re;
        let mut a = DilatedState::pure_product(&lattice, &psi)?;
        a.apply_all(&[meas.clone(), fb.clone()], &lattice);
        let mut b = DilatedState::pure_product(&lattice, &psi)?;
        b.apply(&meas, &lattice);
        rows.push(DemoRow {
            z_before: before,
            z_feedback: dilated_expval(&a, &lattice, &z, &[0]).re,
            z_no_feedback: dilated_expval(&b, &lattice, &z, &[0]).re,
        });
    }
    let feedback_error = rows.iter().map(|r| (r.z_feedback - 1.0).abs()).fold(0.0, f64::max);
    let blind_error = rows.iter().map(|r| (r.z_no_feedback - r.z_before).abs()).fold(0.0, f64::max);
    Ok(DemoReport { rows, feedback_error, blind_error })
}

// ---------------------------------------------------------------- stochastic

pub fn curve_seed(seed: u64, model: Model, l: usize, gamma: f64) -> u64 {
    derive(seed, &format!("{}-{}-{:.6}", model.name(), l, gamma))
}

pub fn stochastic_curves(model: Model, p: &StochasticParams, seed: u64, workers: usize) -> Result<Vec<DensityCurve>> {
    p.gammas
        .iter()
        .map(|&g| defect_density(&p.protocol(model, g, curve_seed(seed, model, p.l, g)), workers))
        .collect()
}

pub fn curve_file_name(c: &DensityCurve) -> String {
    format!("{}_L{}_g{:.4}.csv", c.params.model.name(), c.params.l, c.params.gamma)
}

pub fn write_curve_csv<W: std::io::Write>(c: &DensityCurve, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "n_d", "stderr", "active"])?;
    for i in 0..c.times.len() {
        wr.write_record([c.times[i].to_string(), format!("{:.12e}", c.n_d[i]), format!("{:.12e}", c.stderr[i]), c.active[i].to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRate {
    pub gamma: f64,
    pub rate: f64,
    pub rate_se: f64,
    pub window: (u32, u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub rates: Vec<DecayRate>,
    /// Collapse of n_d against gamma t over [0, 4], if several gammas were run.
    pub collapse_quality: Option<f64>,
}

pub const U1_X_MAX: f64 = 4.0;

/// Exponential-rate fits and the gamma t collapse of U(1) curves.
pub fn u1_decay_report(curves: &[DensityCurve]) -> Result<DecayReport> {
    let mut rates = Vec::new();
    for c in curves {
        let g = c.params.gamma;
        if g <= 0.0 {
            continue;
        }
        let hi = ((U1_X_MAX / g).round() as u32).min(c.params.t_max);
        let (rate, rate_se) = fit_decay_rate(c, (0, hi))?;
        rates.push(DecayRate { gamma: g, rate, rate_se, window: (0, hi) });
    }
    let collapse_quality = (curves.len() > 1).then(|| u1_collapse(curves).quality());
    Ok(DecayReport { rates, collapse_quality })
}

pub fn u1_collapse(curves: &[DensityCurve]) -> CollapseResult {
    rescale_with(curves, CollapseParams::default(), |c, t, n, e| {
        let x = c.params.gamma * t as f64;
        (x <= U1_X_MAX).then_some((x, n, e))
    })
}

// ---------------------------------------------------------------- collapse

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedCollapse {
    pub delta: f64,
    pub nu_par: f64,
    pub gamma_c: f64,
    pub quality: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub estimate: GammaCEstimate,
    pub exponents: CollapseParams,
    pub perturbed: Vec<PerturbedCollapse>,
    pub decay_fit: Option<DecayFit>,
}

pub struct CollapseRun {
    pub curves: Vec<DensityCurve>,
    pub rescaled: CollapseResult,
    pub report: CollapseReport,
}

pub fn collapse_experiment(cfg: &CollapseConfig, seed: u64, workers: usize) -> Result<CollapseRun> {
    let mut curves = Vec::new();
    for &l in &cfg.sizes {
        let p = StochasticParams {
            l,
            gammas: cfg.gammas.clone(),
            t_max: (cfg.ratio * l as f64).round() as u32,
            samples: cfg.samples,
            schedule: cfg.schedule,
            ..Default::default()
        };
        curves.extend(stochastic_curves(cfg.model, &p, seed, workers)?);
    }
    let mode = CollapseMode::FixedTimeRatio { ratio: cfg.ratio };
    let [lo, hi, step] = cfg.gamma_c_grid;
    let grid = linear_grid(lo, hi, step);
    let estimate = estimate_gamma_c(&curves, cfg.exponents, &grid, mode, workers)?;
    let best = CollapseParams { gamma_c: estimate.gamma_c, ..cfg.exponents };
    let rescaled = rescale(&curves, best, mode)?;
    let e = cfg.exponents;
    let f = cfg.perturbation;
    let mut perturbed = Vec::new();
    for (dd, dn) in [(1.0 + f, 1.0), (1.0 - f, 1.0), (1.0, 1.0 + f), (1.0, 1.0 - f)] {
        let p = CollapseParams { delta: e.delta * dd, nu_par: e.nu_par * dn, ..e };
        let est = estimate_gamma_c(&curves, p, &grid, mode, workers)?;
        perturbed.push(PerturbedCollapse {
            delta: p.delta,
            nu_par: p.nu_par,
            gamma_c: est.gamma_c,
            quality: est.quality,
            ratio: est.quality / estimate.quality,
        });
    }
    let decay_fit = match cfg.decay_fit {
        None => None,
        Some((g, l, t_lo, t_hi)) => {
            let existing = curves.iter().find(|c| c.params.l == l && (c.params.gamma - g).abs() < 1e-12 && c.params.t_max >= t_hi);
            let curve = match existing {
                Some(c) => c.clone(),
                None => {
                    let p = StochasticParams { l, gammas: vec![g], t_max: t_hi, samples: cfg.samples, schedule: cfg.schedule, ..Default::default() };
                    stochastic_curves(cfg.model, &p, seed, workers)?.remove(0)
                }
            };
            Some(critical_decay_check(&curve, (t_lo, t_hi), e.delta, DEFAULT_DRIFT_LIMIT)?)
        }
    };
    Ok(CollapseRun { curves, rescaled, report: CollapseReport { estimate, exponents: e, perturbed, decay_fit } })
}
