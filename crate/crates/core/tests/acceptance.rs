//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng as _;

use hycirc::cli::experiments::{adaptive_demo, collapse_experiment, CollapseRun, stochastic_curves, tmat_check, u1_decay_report};
use hycirc::cli::{run, CollapseConfig, ExperimentConfig, ExperimentKind, RunOptions, SffParams, StochasticParams, TmatParams};
use hycirc::dilated::BlockGateSpec;
use hycirc::parallel::resolve_workers;
use hycirc::rng::stream;
use hycirc::scaling::max_deviation_sigmas;
use hycirc::sff::{
    random_diagonal, sff_postselected, sff_transition_exact, sff_unitary_ensemble, GateFamily, HybridFloquetSpec, SffCircuit,
};
use hycirc::stochastic::{diffusive_kernel, diffusive_kernel_exact, displacement_histogram, ssep_enumerate, Boundary, Model, Schedule};
use hycirc::tmat::{
    compose, haar_average_dense, monte_carlo_haar_average, onefold_haar_channel, tgate_evo_blocks, tgate_evo_generic,
    tgate_meas_x, tgate_meas_z, Direction, TransitionGate,
};
use hycirc::weyl::{Matrix, OperatorVector, WeylIndex, C64};

const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Check = fn(usize) -> Result<Outcome, String>;

fn main() -> ExitCode {
    let workers = resolve_workers(None);
    let checks: [(&str, f64, Check); 10] = [
        ("1 onefold Haar channel", 10.0, c1_haar_channel),
        ("2 transition matrix vs dilated simulation", 300.0, c2_tmat_oracle),
        ("3 measurement blindness", 10.0, c3_blindness),
        ("4 desk-scale SFF", 600.0, c4_sff),
        ("5 U(1) adaptive decay", 120.0, c5_u1_decay),
        ("6 East absorbing-state transition", 1800.0, c6_east),
        ("7 critical decay", 1800.0, c7_critical_decay),
        ("8 diffusive kernel", 60.0, c8_kernel),
        ("9 adaptive exact order", 10.0, c9_adaptive),
        ("10 determinism across worker counts", 600.0, c10_determinism),
    ];
    let mut failed = 0;
    for (name, budget, f) in checks.iter() {
        let start = Instant::now();
        let r = f(workers);
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match r {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let slow = if secs > *budget { " [over runtime budget]" } else { "" };
        println!("{} criterion {name}: {detail} ({secs:.1} s of {budget:.0} s){slow}", if pass { "PASS" } else { "FAIL" });
    }
    println!("{failed} of {} criteria failed", checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn random_matrix(d: usize, rng: &mut hycirc::rng::Rng) -> Matrix {
    Matrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn c1_haar_channel(_: usize) -> Result<Outcome, String> {
    let mut rng = stream(SEED, 1);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let d = if k < 10 { 2 } else { 4 };
        let o = random_matrix(d, &mut rng);
        let exact = Matrix::identity(d, d) * (o.trace() / C64::new(d as f64, 0.0));
        let (mean, var) = monte_carlo_haar_average(&o, 10_000, &mut rng);
        let sigma = (var.sum() / 10_000.0).sqrt();
        worst = worst.max((mean - exact).norm() / sigma);
    }
    let mut id_exact = true;
    for (q, sites) in [(2, 1), (2, 2), (3, 2)] {
        let id = OperatorVector::identity(q, sites);
        let cluster: Vec<usize> = (0..sites).collect();
        id_exact &= onefold_haar_channel(&id, &cluster).map_err(|e| e.to_string())?.max_diff(&id) == 0.0;
        let d = q.pow(sites as u32);
        id_exact &= haar_average_dense(&Matrix::identity(d, d)) == Matrix::identity(d, d);
    }
    Ok(outcome(worst <= 3.0 && id_exact, format!("worst Frobenius deviation {worst:.2} sigma over 20 operators, Phi[I] = I exact: {id_exact}")))
}

fn c2_tmat_oracle(workers: usize) -> Result<Outcome, String> {
    let p = TmatParams::default();
    let r = tmat_check(&p, SEED, workers).map_err(|e| e.to_string())?;
    Ok(outcome(r.pass, format!("{} coefficients, {} realizations, worst {:.2} SE (limit {})", r.rows.len(), r.realizations, r.worst * r.sigmas, r.sigmas)))
}

fn gate_diff(a: &TransitionGate, b: &TransitionGate) -> f64 {
    let (a, b) = (a.dense(), b.dense());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn c3_blindness(_: usize) -> Result<Outcome, String> {
    let e = |r: hycirc::Result<TransitionGate>| r.map_err(|e| e.to_string());
    let mut worst: f64 = 0.0;
    for q in [2, 3] {
        let evo = tgate_evo_generic(q, vec![0, 1]);
        let labels_all: Vec<usize> = (0..q * q).collect();
        let labels_sum: Vec<usize> = (0..q * q).map(|c| (c / q + c % q) % q).collect();
        let meas = [
            e(tgate_meas_z(q, vec![0, 1], &labels_all))?,
            e(tgate_meas_z(q, vec![0, 1], &labels_sum))?,
            e(tgate_meas_x(q, vec![0, 1], &labels_all))?,
            e(tgate_meas_x(q, vec![0, 1], &labels_sum))?,
            e(tgate_meas_z(q, vec![1], &(0..q).collect::<Vec<_>>()))?,
            e(tgate_meas_x(q, vec![0], &(0..q).collect::<Vec<_>>()))?,
        ];
        for m in &meas {
            let m = if m.cluster.len() == 1 {
                // pad single-site measurements to the gate cluster
                let other = if m.cluster[0] == 0 { 1 } else { 0 };
                let id = e(hycirc::tmat::channel_gate(q, vec![other], m.kind, |x| x.clone()))?;
                let c = compose(q, 2, vec![vec![m.clone(), id]], Direction::Schrodinger).map_err(|e| e.to_string())?;
                e(TransitionGate::from_dense(q, vec![0, 1], m.kind, &c.dense().map_err(|e| e.to_string())?))?
            } else {
                m.clone()
            };
            worst = worst.max(gate_diff(&e(evo.then_after(&m))?, &evo));
            worst = worst.max(gate_diff(&e(m.then_after(&evo))?, &evo));
        }
    }
    let generic = worst;

    let mut worst_u1: f64 = 0.0;
    for q in [2, 3] {
        let blk = e(tgate_evo_blocks(&BlockGateSpec::u1(q, vec![0, 1])))?;
        let charge: Vec<usize> = (0..q * q).map(|c| c / q + c % q).collect();
        let mz = e(tgate_meas_z(q, vec![0, 1], &charge))?;
        worst_u1 = worst_u1.max(gate_diff(&e(blk.then_after(&mz))?, &blk));
        worst_u1 = worst_u1.max(gate_diff(&e(mz.then_after(&blk))?, &blk));
    }

    let ising = e(tgate_evo_blocks(&BlockGateSpec::ising(vec![0, 1])))?;
    let mx1 = e(tgate_meas_x(2, vec![0], &[0, 1]))?;
    let mut worst_ising: f64 = 0.0;
    let mut rng = stream(SEED, 3);
    let identity = WeylIndex::identity(2, 2);
    let zz = WeylIndex::new(2, &[0, 0], &[1, 1]).map_err(|e| e.to_string())?;
    for order in [vec![vec![ising.clone()], vec![mx1.clone()]], vec![vec![mx1.clone()], vec![ising.clone()]]] {
        let c = compose(2, 2, order, Direction::Schrodinger).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let c33 = C64::new(rng.random_range(-0.25..0.25), 0.0);
            let rho = OperatorVector::from_terms(2, 2, [(identity.clone(), C64::new(0.25, 0.0)), (zz.clone(), c33)]);
            let out = c.evolve(&rho).map_err(|e| e.to_string())?;
            worst_ising = worst_ising.max(out.max_diff(&OperatorVector::basis(identity.clone(), C64::new(0.25, 0.0))));
        }
    }
    let pass = generic < 1e-12 && worst_u1 < 1e-12 && worst_ising < 1e-12;
    Ok(outcome(pass, format!("generic {generic:.1e}, U(1) with Z {worst_u1:.1e}, Ising with X1 {worst_ising:.1e}")))
}

fn c4_sff(workers: usize) -> Result<Outcome, String> {
    let s = |e: hycirc::Error| e.to_string();
    // (a)
    let circuit = SffCircuit::brickwork(3, 2, GateFamily::Generic).map_err(s)?;
    let exact = sff_transition_exact(&circuit, 32).map_err(s)?;
    let ramp = (1..=32u32).all(|t| exact[t as usize] == BigRational::from_integer((t as i64).into()));

    // (b)
    let spec = HybridFloquetSpec::brickwork(3, 2, GateFamily::Generic, true).map_err(s)?;
    let post = sff_postselected(&spec, 10, 500, hycirc::rng::derive(SEED, "post"), workers).map_err(s)?;
    let free = sff_postselected(&spec.without_measurements(), 10, 500, hycirc::rng::derive(SEED, "free"), workers).map_err(s)?;
    let mut worst_b: f64 = 0.0;
    for t in 0..=10usize {
        let se = (post.errors[t].powi(2) + free.errors[t].powi(2)).sqrt();
        let d = (post.values[t] - free.values[t]).abs();
        worst_b = worst_b.max(if se > 0.0 { d / se } else if d < 1e-9 { 0.0 } else { f64::INFINITY });
    }

    // (c)
    let dim = 8;
    let diag = sff_unitary_ensemble(move |rng| random_diagonal(dim, rng), 32, 2000, hycirc::rng::derive(SEED, "diag"), workers).map_err(s)?;
    let worst_c = (1..=32usize).map(|t| (diag.values[t] - dim as f64).abs() / diag.errors[t]).fold(0.0, f64::max);

    let pass = ramp && worst_b <= 3.0 && worst_c <= 3.0;
    Ok(outcome(
        pass,
        format!("(a) K = t exactly for t <= 32: {ramp}; (b) postselected vs gamma = 0 worst {worst_b:.2} SE; (c) diagonal phases worst {worst_c:.2} SE from D"),
    ))
}

fn u1_params(l: usize) -> StochasticParams {
    StochasticParams {
        l,
        gammas: vec![0.05, 0.1, 0.2],
        t_max: 80,
        samples: 10_000,
        boundary: Boundary::Periodic,
        schedule: Schedule::Layer,
        seed_site: 0,
    }
}

fn c5_u1_decay(workers: usize) -> Result<Outcome, String> {
    let s = |e: hycirc::Error| e.to_string();
    let curves = stochastic_curves(Model::U1, &u1_params(256), SEED, workers).map_err(s)?;
    let report = u1_decay_report(&curves).map_err(s)?;
    let rel: Vec<f64> = report.rates.iter().map(|r| (r.rate - r.gamma).abs() / r.gamma).collect();
    let worst_rate = rel.iter().cloned().fold(0.0, f64::max);
    let quality = report.collapse_quality.unwrap_or(f64::INFINITY);
    let small = stochastic_curves(Model::U1, &u1_params(64), SEED, workers).map_err(s)?;
    let large = stochastic_curves(Model::U1, &u1_params(128), SEED, workers).map_err(s)?;
    // sizes are compared at each curve's e-folding time gamma t = 1
    let mut worst_size: f64 = 0.0;
    for (a, b) in small.iter().zip(&large) {
        let t = (1.0 / a.params.gamma).round() as u32;
        let ((na, ea), (nb, eb)) = (a.at(t).ok_or("missing time")?, b.at(t).ok_or("missing time")?);
        worst_size = worst_size.max((na - nb).abs() / (ea * ea + eb * eb).sqrt());
    }
    let pointwise = small.iter().zip(&large).map(|(a, b)| max_deviation_sigmas(a, b)).fold(0.0, f64::max);
    let rates: Vec<String> = report.rates.iter().map(|r| format!("{:.4}", r.rate)).collect();
    let pass = worst_rate <= 0.10 && quality < 0.02 && worst_size <= 3.0;
    Ok(outcome(
        pass,
        format!(
            "rates [{}] (worst {:.1}% off), collapse quality {quality:.4}, L=64 vs 128 at gamma t = 1 worst {worst_size:.2} SE (max over all t {pointwise:.2} SE)",
            rates.join(", "),
            100.0 * worst_rate
        ),
    ))
}

fn east_run(workers: usize) -> Result<&'static CollapseRun, String> {
    static RUN: OnceLock<Result<CollapseRun, String>> = OnceLock::new();
    RUN.get_or_init(|| collapse_experiment(&CollapseConfig::default(), SEED, workers).map_err(|e| e.to_string()))
        .as_ref()
        .map_err(|e| e.clone())
}

fn c6_east(workers: usize) -> Result<Outcome, String> {
    let s = |e: hycirc::Error| e.to_string();
    let r = east_run(workers)?;
    let gc = r.report.estimate.gamma_c;
    let in_bracket = (0.030..=0.046).contains(&gc);
    let ratios: Vec<String> = r.report.perturbed.iter().map(|p| format!("{:.2}", p.ratio)).collect();
    let min_ratio = r.report.perturbed.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);

    let mut absorbed = true;
    for l in [256, 512, 1024] {
        let p = StochasticParams { l, gammas: vec![0.08], t_max: 8 * l as u32, ..u1_params(l) };
        let c = stochastic_curves(Model::East, &p, SEED, workers).map_err(s)?.remove(0);
        absorbed &= c.active.last() == Some(&0);
    }
    let sub = StochasticParams { l: 256, gammas: vec![0.02], t_max: 512, ..u1_params(256) };
    let c = stochastic_curves(Model::East, &sub, SEED, workers).map_err(s)?.remove(0);
    let active = c.active_fraction(512).unwrap_or(0.0);

    let pass = in_bracket && min_ratio >= 1.5 && absorbed && active >= 0.05;
    Ok(outcome(
        pass,
        format!(
            "gamma_c {gc:.4} (quality {:.2e}), perturbed-exponent ratios [{}], gamma=0.08 absorbed by 8L at L=256,512,1024: {absorbed}, gamma=0.02 L=256 active at 2L {active:.3}",
            r.report.estimate.quality,
            ratios.join(", ")
        ),
    ))
}

fn c7_critical_decay(workers: usize) -> Result<Outcome, String> {
    let r = east_run(workers)?;
    let f = r.report.decay_fit.as_ref().ok_or("no decay fit configured")?;
    let pass = f.within(0.05) && f.accepted();
    Ok(outcome(
        pass,
        format!("slope {:.3} +- {:.3} over t in {:?} (target -0.159 +- 0.05), slope drift {:.3}", f.fit.slope, f.fit.slope_se(), f.window, f.slope_drift),
    ))
}

fn c8_kernel(workers: usize) -> Result<Outcome, String> {
    let mut exact_ok = true;
    for t in 1..=3u32 {
        let e = ssep_enumerate(t);
        let mut total = BigRational::zero();
        for r in -(2 * t as i64 + 2)..=(2 * t as i64 + 2) {
            let f = diffusive_kernel_exact(r, t);
            let g = e.get(&r).cloned().unwrap_or_else(BigRational::zero);
            exact_ok &= f == g;
            total += f;
        }
        exact_ok &= total == BigRational::one();
    }
    let n = 200_000usize;
    let h: BTreeMap<i64, usize> = displacement_histogram(8, n, SEED, workers);
    let mut worst: f64 = 0.0;
    for r in -20..=20i64 {
        let f = diffusive_kernel(r, 8);
        let c = *h.get(&r).unwrap_or(&0) as f64 / n as f64;
        let se = (f * (1.0 - f) / n as f64).sqrt();
        let z = if se > 0.0 { (c - f).abs() / se } else if c == 0.0 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    let norm = (1..=12u32)
        .map(|t| ((-(2 * t as i64 + 2)..=(2 * t as i64 + 2)).map(|r| diffusive_kernel(r, t)).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let pass = exact_ok && worst <= 3.0 && norm < 1e-12;
    Ok(outcome(pass, format!("exact at t=1..3: {exact_ok}; Monte Carlo t=8 worst {worst:.2} sigma; normalization error {norm:.1e}")))
}

fn c9_adaptive(_: usize) -> Result<Outcome, String> {
    let r = adaptive_demo(100, SEED).map_err(|e| e.to_string())?;
    let pass = r.feedback_error < 1e-12 && r.blind_error < 1e-12;
    Ok(outcome(pass, format!("feedback |<Z>-1| {:.1e}, no feedback |<Z>-<Z>_0| {:.1e}", r.feedback_error, r.blind_error)))
}

fn data_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = e.map_err(|e| e.to_string())?.path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        if name != "manifest.json" {
            out.insert(name, fs::read(&p).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

fn determinism_configs() -> Vec<ExperimentConfig> {
    let mut v = Vec::new();
    let mut c = ExperimentConfig::new(ExperimentKind::Sff, SEED);
    c.sff = Some(SffParams { realizations: 40, ..Default::default() });
    v.push(c);
    let mut c = ExperimentConfig::new(ExperimentKind::TmatCheck, SEED);
    c.tmat_check = Some(TmatParams { realizations: 300, ..Default::default() });
    v.push(c);
    let mut c = ExperimentConfig::new(ExperimentKind::Ssep, SEED);
    c.ssep = Some(u1_params(256));
    v.push(c);
    let mut c = ExperimentConfig::new(ExperimentKind::East, SEED);
    c.east = Some(StochasticParams { l: 128, gammas: vec![0.03, 0.04], t_max: 256, samples: 2000, ..u1_params(128) });
    v.push(c);
    let mut c = ExperimentConfig::new(ExperimentKind::Collapse, SEED);
    c.collapse = Some(CollapseConfig {
        sizes: vec![32, 64],
        gammas: vec![0.03, 0.035, 0.04, 0.045],
        samples: 1000,
        decay_fit: Some((0.038, 64, 4, 64)),
        ..Default::default()
    });
    v.push(c);
    v.push(ExperimentConfig::new(ExperimentKind::DilatedDemo, SEED));
    v
}

fn c10_determinism(_: usize) -> Result<Outcome, String> {
    let base: PathBuf = std::env::temp_dir().join(format!("hycirc-acceptance-{}", std::process::id()));
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for cfg in determinism_configs() {
        let mut files = Vec::new();
        for w in [1usize, 3] {
            let dir = base.join(format!("{}-w{w}", cfg.kind.name()));
            run(&cfg, &RunOptions { out: Some(dir.clone()), workers: Some(w) }).map_err(|e| format!("{}: {e}", cfg.kind.name()))?;
            files.push(data_files(&dir)?);
        }
        compared += files[0].len();
        if files[0] != files[1] {
            mismatches.push(cfg.kind.name());
        }
    }
    let _ = fs::remove_dir_all(&base);
    let pass = mismatches.is_empty() && compared > 0;
    Ok(outcome(pass, format!("{compared} data files compared between 1 and 3 workers, mismatched kinds: {mismatches:?}")))
}
