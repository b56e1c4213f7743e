//! Single-Z diffusion kernel of the Haar-averaged U(1) brickwork.
//!
//! One time step is the even-bond layer followed by the odd-bond layer, and
//! the Z starts on an even site. r is the displacement after t steps.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::One;

use super::state::{Boundary, TrajectoryState};
use crate::parallel::map_indexed;
use crate::rng::stream;

fn lower_index(r: i64, t: u32) -> i64 {
    let a = if r <= 0 { r.abs() + 1 } else { r };
    (2 * t as i64 - a).div_euclid(2)
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// f(r, t) = 4^{-t} C(2t-1, floor(t - |r|/2)), |r| -> |r|+1 for r <= 0.
/// Evaluated in log space. Zero when the lower index is negative.
pub fn diffusive_kernel(r: i64, t: u32) -> f64 {
    assert!(t >= 1, "kernel defined for t >= 1");
    let k = lower_index(r, t);
    if k < 0 {
        return 0.0;
    }
    let n = 2 * t as u64 - 1;
    (ln_binomial(n, k as u64) - t as f64 * 4f64.ln()).exp()
}

/// Same as [`diffusive_kernel`] in exact rational arithmetic.
pub fn diffusive_kernel_exact(r: i64, t: u32) -> BigRational {
    assert!(t >= 1, "kernel defined for t >= 1");
    let k = lower_index(r, t);
    if k < 0 {
        return BigRational::from_integer(BigInt::from(0));
    }
    let n = BigInt::from(2 * t as u64 - 1);
    let c = binomial(n, BigInt::from(k));
    BigRational::new(c, BigInt::from(4).pow(t))
}

/// Exact displacement distribution by enumerating every coin sequence.
/// Each layer uses one coin, shared by all bonds of that layer: only the bond
/// holding the Z can change, so the other coins marginalize out.
pub fn ssep_enumerate(t: u32) -> BTreeMap<i64, BigRational> {
    let len = 4 * t as usize + 8;
    let j0 = 2 * t as usize + 4;
    let layers = 2 * t;
    let w = BigRational::new(BigInt::one(), BigInt::from(2).pow(layers));
    let mut out: BTreeMap<i64, BigRational> = BTreeMap::new();
    for code in 0u64..(1 << layers) {
        let mut s = TrajectoryState::with_seed_site(len, Boundary::Periodic, stream(0, 0), j0);
        for l in 0..layers {
            let coin = code >> l & 1 == 1;
            let parity = (l % 2) as usize;
            for j in (parity..len).step_by(2) {
                s.ssep_bond_apply(j, coin);
            }
        }
        let pos = (0..len).find(|&j| s.get(j)).expect("bit conserved");
        *out.entry(pos as i64 - j0 as i64).or_insert_with(|| BigRational::from_integer(0.into())) += &w;
    }
    out
}

/// Monte Carlo displacement counts of a single Z after t brickwork steps.
pub fn displacement_histogram(t: u32, samples: usize, seed: u64, workers: usize) -> BTreeMap<i64, usize> {
    let len = 4 * t as usize + 8;
    let j0 = 2 * t as usize + 4;
    let r = map_indexed(samples, workers, |i| {
        let mut s = TrajectoryState::with_seed_site(len, Boundary::Periodic, stream(seed, i as u64), j0);
        for _ in 0..t {
            s.ssep_layer(0);
            s.ssep_layer(1);
        }
        let pos = (0..len).find(|&j| s.get(j)).expect("bit conserved");
        pos as i64 - j0 as i64
    });
    let mut h = BTreeMap::new();
    for x in r {
        *h.entry(x).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_values() {
        assert_eq!(diffusive_kernel_exact(1, 1), BigRational::new(1.into(), 4.into()));
        assert!((diffusive_kernel(1, 1) - 0.25).abs() < 1e-15);
        let s: f64 = (-2..=3).map(|r| diffusive_kernel(r, 1)).sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(diffusive_kernel(3, 1), 0.0);
        assert_eq!(diffusive_kernel(-2, 1), 0.0);
    }

    #[test]
    fn enumeration_matches_at_small_t() {
        for t in 1..=4 {
            let e = ssep_enumerate(t);
            for r in -(2 * t as i64 + 2)..=(2 * t as i64 + 2) {
                let want = diffusive_kernel_exact(r, t);
                let got = e.get(&r).cloned().unwrap_or_else(|| BigRational::from_integer(0.into()));
                assert_eq!(got, want, "r = {r}, t = {t}");
            }
        }
    }

    #[test]
    fn normalized() {
        for t in 1..=12u32 {
            let s: f64 = (-(2 * t as i64 + 2)..=(2 * t as i64 + 2)).map(|r| diffusive_kernel(r, t)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_space_matches_exact() {
        use num_traits::ToPrimitive;
        for t in [1u32, 5, 12, 40] {
            for r in -10..=10 {
                let a = diffusive_kernel(r, t);
                let b = diffusive_kernel_exact(r, t).to_f64().unwrap();
                assert!((a - b).abs() <= 1e-13 * b.max(1e-300), "{r} {t} {a} {b}");
            }
        }
    }
}
