//! Spectral form factors of a three-qubit brickwork Floquet circuit: the exact
//! transition-matrix ramp, the unitary ensemble, and the postselected hybrid
//! SFF with a Z measurement of every site into its own register.

use hycirc::sff::{
    k_cue, sff_postselected, sff_reset, sff_transition_exact, GateFamily, HybridFloquetSpec, SffCircuit,
};

fn main() -> hycirc::Result<()> {
    let (n, q, t_max, reals): (usize, usize, u32, usize) = (3, 2, 12, 200);
    let dim = q.pow(n as u32);
    let exact = sff_transition_exact(&SffCircuit::brickwork(n, q, GateFamily::Generic)?, t_max)?;

    let hybrid = HybridFloquetSpec::brickwork(n, q, GateFamily::Generic, true)?;
    let post = sff_postselected(&hybrid, t_max, reals, 11, 1)?;
    let free = sff_postselected(&hybrid.without_measurements(), t_max, reals, 12, 1)?;
    let reset = sff_reset(&hybrid, t_max, reals, 13, 1)?;

    println!("{:>3} {:>8} {:>8} {:>16} {:>16} {:>16}", "t", "K_T", "K_CUE", "unitary", "postselected", "reset");
    for t in 0..=t_max as usize {
        println!(
            "{t:>3} {:>8} {:>8.1} {:>9.2} ± {:<5.2} {:>9.2} ± {:<5.2} {:>9.2} ± {:<5.2}",
            exact[t].to_string(),
            k_cue(t as u32, dim),
            free.values[t],
            free.errors[t],
            post.values[t],
            post.errors[t],
            reset.values[t],
            reset.errors[t]
        );
    }
    println!("Thouless time (unitary ensemble): {:?}", free.thouless_time(dim));
    Ok(())
}
