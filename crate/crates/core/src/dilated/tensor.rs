//! Index bookkeeping for operators acting on a subset of tensor factors.
//! Factor 0 is the most significant digit of the global index.

use nalgebra::DVector;

use crate::weyl::{Matrix, C64};

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

pub fn total(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Global offsets of every local configuration of `targets` (first target most significant).
fn local_offsets(dims: &[usize], targets: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut offs = vec![0usize];
    for &t in targets {
        let mut next = Vec::with_capacity(offs.len() * dims[t]);
        for &o in &offs {
            for d in 0..dims[t] {
                next.push(o + d * st[t]);
            }
        }
        offs = next;
    }
    offs
}

/// Global indices whose digits on `targets` are all zero.
fn bases(dims: &[usize], targets: &[usize]) -> Vec<usize> {
    let rest: Vec<usize> = (0..dims.len()).filter(|i| !targets.contains(i)).collect();
    local_offsets(dims, &rest)
}

/// Full-space matrix acting as `op` on `targets`, identity elsewhere.
pub fn embed(op: &Matrix, dims: &[usize], targets: &[usize]) -> Matrix {
    let d = total(dims);
    let offs = local_offsets(dims, targets);
    assert_eq!(op.nrows(), offs.len(), "operator does not match target dims");
    let mut m = Matrix::zeros(d, d);
    for b in bases(dims, targets) {
        for (c, &oc) in offs.iter().enumerate() {
            for (r, &or) in offs.iter().enumerate() {
                let v = op[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    m[(b + or, b + oc)] = v;
                }
            }
        }
    }
    m
}

/// psi <- (op on targets) psi.
pub fn apply(op: &Matrix, psi: &mut DVector<C64>, dims: &[usize], targets: &[usize]) {
    let offs = local_offsets(dims, targets);
    let k = offs.len();
    assert_eq!(op.nrows(), k, "operator does not match target dims");
    let mut buf = vec![C64::new(0.0, 0.0); k];
    for b in bases(dims, targets) {
        for (i, &o) in offs.iter().enumerate() {
            buf[i] = psi[b + o];
        }
        for (r, &o) in offs.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (c, x) in buf.iter().enumerate() {
                acc += op[(r, c)] * x;
            }
            psi[b + o] = acc;
        }
    }
}

/// Permutation matrix sending factor i of the input to position perm[i] of the output.
pub fn permutation(dims: &[usize], perm: &[usize]) -> Matrix {
    let n = dims.len();
    let mut out_dims = vec![0; n];
    for i in 0..n {
        out_dims[perm[i]] = dims[i];
    }
    let sin = strides(dims);
    let sout = strides(&out_dims);
    let d = total(dims);
    let mut m = Matrix::zeros(d, d);
    for x in 0..d {
        let mut y = 0;
        for i in 0..n {
            let digit = (x / sin[i]) % dims[i];
            y += digit * sout[perm[i]];
        }
        m[(y, x)] = C64::new(1.0, 0.0);
    }
    m
}

/// Reduced density matrix of a pure state on the factors `keep`.
pub fn reduce_pure(psi: &DVector<C64>, dims: &[usize], keep: &[usize]) -> Matrix {
    let offs = local_offsets(dims, keep);
    let k = offs.len();
    let mut rho = Matrix::zeros(k, k);
    for b in bases(dims, keep) {
        for (c, &oc) in offs.iter().enumerate() {
            let y = psi[b + oc].conj();
            if y == C64::new(0.0, 0.0) {
                continue;
            }
            for (r, &or) in offs.iter().enumerate() {
                rho[(r, c)] += psi[b + or] * y;
            }
        }
    }
    rho
}

/// Partial trace of a density matrix, keeping `keep` in the given order.
pub fn reduce_mixed(rho: &Matrix, dims: &[usize], keep: &[usize]) -> Matrix {
    let offs = local_offsets(dims, keep);
    let k = offs.len();
    let mut out = Matrix::zeros(k, k);
    for b in bases(dims, keep) {
        for (c, &oc) in offs.iter().enumerate() {
            for (r, &or) in offs.iter().enumerate() {
                out[(r, c)] += rho[(b + or, b + oc)];
            }
        }
    }
    out
}

/// Digits of a global index.
pub fn split(x: usize, dims: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    dims.iter().zip(&st).map(|(&d, &s)| (x / s) % d).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weyl::weyl_matrix;

    #[test]
    fn embed_matches_kron() {
        let x = weyl_matrix(2, 1, 0).unwrap().mat;
        let z = weyl_matrix(2, 0, 1).unwrap().mat;
        let i2 = Matrix::identity(2, 2);
        let e = embed(&x, &[2, 2, 2], &[1]);
        assert_eq!(e, i2.kronecker(&x).kronecker(&i2));
        let xz = x.kronecker(&z);
        let e = embed(&xz, &[2, 2, 2], &[2, 0]);
        let want = z.kronecker(&i2).kronecker(&x);
        assert_eq!(e, want);
    }

    #[test]
    fn apply_matches_embed() {
        let dims = [2, 3, 2];
        let op = Matrix::from_fn(6, 6, |r, c| C64::new((r * 7 + c) as f64, (r as f64) - (c as f64)));
        let psi = DVector::from_fn(12, |i, _| C64::new(i as f64, 1.0));
        let mut a = psi.clone();
        apply(&op, &mut a, &dims, &[2, 1]);
        let b = embed(&op, &dims, &[2, 1]) * psi;
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn swap_permutation() {
        let p = permutation(&[2, 3], &[1, 0]);
        let x = 1 * 3 + 2;
        let col = p.column(x);
        let y = col.iter().position(|v| v.re == 1.0).unwrap();
        assert_eq!(y, 2 * 2 + 1);
    }

    #[test]
    fn reductions_agree() {
        let psi = DVector::from_fn(8, |i, _| C64::new((i + 1) as f64, 0.5 * i as f64)).normalize();
        let rho = &psi * psi.adjoint();
        let a = reduce_pure(&psi, &[2, 2, 2], &[0, 2]);
        let b = reduce_mixed(&rho, &[2, 2, 2], &[0, 2]);
        assert!((a - b).norm() < 1e-12);
    }
}
