use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;
use crate::weyl::{Matrix, C64};

/// Haar-random n x n unitary: QR of a complex Ginibre matrix, with the phases
/// of diag(R) moved into Q so the distribution is exactly Haar.
pub fn haar_unitary(n: usize, rng: &mut Rng) -> Matrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let g = Matrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Diagonal unitary with i.i.d. uniform phases.
pub fn random_phases(n: usize, rng: &mut Rng) -> Matrix {
    let d: Vec<C64> = (0..n)
        .map(|_| C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
        .collect();
    Matrix::from_diagonal(&nalgebra::DVector::from_vec(d))
}

pub fn unitarity_error(u: &Matrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - Matrix::identity(n, n)).iter().map(|x| x.norm()).fold(0.0, f64::max)
}
