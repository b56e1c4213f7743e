//! Weyl strings, their algebra, and the round trip between dense operators and
//! Weyl coefficients.

use hycirc::weyl::{decompose, naive_to_weyl, reconstruct, weyl_product, weyl_string, DenseOperator, OperatorVector, WeylIndex, C64};

fn main() -> hycirc::Result<()> {
    let q = 3;
    let a = WeylIndex::new(q, &[1, 0], &[0, 2])?;
    let b = WeylIndex::new(q, &[2, 1], &[1, 1])?;
    let (phase, c) = weyl_product(&a, &b)?;
    println!("a b = ({phase:.3}) {c:?}");

    let (adj_phase, adj) = a.adjoint();
    let lhs = weyl_string(&a)?.mat.adjoint();
    let rhs = weyl_string(&adj)?.mat * adj_phase;
    println!("adjoint identity error {:.1e}", (lhs - rhs).norm());

    // q^{N/2} |a><b| from its Weyl expansion
    let terms = naive_to_weyl(q, &[2, 0], &[1, 1]);
    let v = OperatorVector::from_terms(q, 2, terms);
    let dense = reconstruct(&v);
    let peak = dense.mat.iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("naive element has {} Weyl terms, largest matrix entry {peak:.4}", v.len());

    let rho = DenseOperator::new(q, 2, dense.mat.map(|z| z * C64::new(0.5, 0.0)))?;
    let back = reconstruct(&decompose(&rho));
    println!("decompose/reconstruct error {:.1e}", (back.mat - rho.mat).norm());
    Ok(())
}
