//! Haar- and outcome-averaged transition matrices for one brickwork step of a
//! U(1) circuit with X measurements, checked against a sampled dense average.

use hycirc::dilated::BlockGateSpec;
use hycirc::rng::stream;
use hycirc::tmat::{compose, expectation, monte_carlo_evo_gate, tgate_evo_blocks, tgate_meas_x, Direction};
use hycirc::weyl::{config_projector, OperatorVector, WeylIndex, C64};

fn main() -> hycirc::Result<()> {
    let q = 2;
    let n = 4;
    let gamma = 0.5;
    let evo = |a: usize| tgate_evo_blocks(&BlockGateSpec::u1(q, vec![a, a + 1]));
    let meas = |j: usize| tgate_meas_x(q, vec![j], &[0, 1]).map(|g| g.mixture(gamma));
    let layers = vec![
        vec![evo(0)?, evo(2)?],
        vec![evo(1)?],
        (0..n).map(meas).collect::<hycirc::Result<Vec<_>>>()?,
    ];
    let circuit = compose(q, n, layers, Direction::Schrodinger)?;

    let rho = config_projector(q, &[1, 0, 0, 0]);
    let (out, stats) = circuit.evolve_with_stats(&rho)?;
    println!("rho has {} Weyl terms after one step, {} dropped terms", out.len(), stats.cc_zeroed);
    for j in 0..n {
        let mut z = vec![0; n];
        z[j] = 1;
        let o = OperatorVector::basis(WeylIndex::new(q, &[0; 4], &z)?, C64::new(1.0, 0.0));
        println!("  <Z_{j}> = {:+.4}", expectation(&o, &out).re);
    }

    let spec = BlockGateSpec::u1(q, vec![0, 1]);
    let exact = tgate_evo_blocks(&spec)?.dense();
    let (mean, se) = monte_carlo_evo_gate(&spec, 2000, &mut stream(1, 0))?;
    let worst = exact
        .iter()
        .zip(mean.iter().zip(se.iter()))
        .filter(|(_, (_, s))| s.re > 1e-12)
        .map(|(e, (m, s))| (e - m).norm() / s.re)
        .fold(0.0, f64::max);
    println!("U(1) gate vs 2000 Haar samples: worst deviation {worst:.2} SE");
    Ok(())
}
