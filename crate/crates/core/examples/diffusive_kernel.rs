//! Single-Z diffusion kernel: closed form, exact enumeration and sampling.

use hycirc::stochastic::{diffusive_kernel, diffusive_kernel_exact, displacement_histogram, ssep_enumerate};

fn main() {
    let exact = ssep_enumerate(3);
    for (r, p) in &exact {
        println!("t=3 r={r:+}: enumerated {p}, closed form {}", diffusive_kernel_exact(*r, 3));
    }
    let n = 50_000;
    let h = displacement_histogram(8, n, 1, 1);
    for r in -8..=8 {
        let f = diffusive_kernel(r, 8);
        let c = *h.get(&r).unwrap_or(&0) as f64 / n as f64;
        println!("t=8 r={r:+3}: f = {f:.5}, sampled {c:.5}");
    }
}
