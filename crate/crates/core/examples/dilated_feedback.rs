//! Measure Z into an outcome register, then flip the qubit conditioned on the
//! register. With feedback every state is steered to |0>; without it the
//! outcome-averaged measurement leaves <Z> unchanged.

use hycirc::cli::experiments::adaptive_demo;
use hycirc::dilated::{
    build_measurement_unitary, measurement_local, pauli_matrix, project_trajectory, DilatedState, MeasurementSpec, Register,
    SpacetimeLattice,
};
use hycirc::weyl::C64;
use nalgebra::DVector;

fn main() -> hycirc::Result<()> {
    let report = adaptive_demo(100, 7)?;
    println!("feedback: max |<Z> - 1| = {:.2e}", report.feedback_error);
    println!("blind:    max |<Z> - <Z>_0| = {:.2e}", report.blind_error);

    let lattice = SpacetimeLattice::new(1, 2, vec![Register { site: 0, tau: 1, levels: 2 }])?;
    let spec = MeasurementSpec::pauli(vec![0], "X", 0)?;
    let u = build_measurement_unitary(&spec, &lattice)?;
    println!("X measurement unitary is {}x{}", u.nrows(), u.ncols());

    let psi = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let mut st = DilatedState::pure_product(&lattice, &psi)?;
    st.apply(&measurement_local(&spec, &lattice)?, &lattice);
    for k in 0..2 {
        let (p, rho) = project_trajectory(&st, &lattice, &[(0, k)])?;
        let x = (rho * pauli_matrix('X')?).trace().re;
        println!("outcome {k}: p = {p:.3}, <X> = {x:+.3}");
    }
    Ok(())
}
