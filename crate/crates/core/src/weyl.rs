//! Weyl shift/weight operators and the operator-space basis they span.
//!
//! Conventions: S|k> = |k+1>, W|k> = w^k |k>, w = exp(2 pi i / q), so that
//! W S = w S W. The many-body basis element for indices (m, n) is
//! prod_j S_j^{m_j} W_j^{n_j}. Site 0 is the most significant digit of a
//! computational basis label. Operator inner product is tr(A^dag B) / D.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;

pub const DEFAULT_PRUNE: f64 = 1e-14;

pub fn omega(q: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI / q as f64)
}

/// w^k for k taken mod q. Exact for the quarter turns.
pub fn omega_pow(q: usize, k: i64) -> C64 {
    let k = k.rem_euclid(q as i64) as usize;
    if k == 0 {
        return C64::new(1.0, 0.0);
    }
    if 4 * k == q {
        return C64::new(0.0, 1.0);
    }
    if 2 * k == q {
        return C64::new(-1.0, 0.0);
    }
    if 4 * k == 3 * q {
        return C64::new(0.0, -1.0);
    }
    C64::from_polar(1.0, 2.0 * PI * k as f64 / q as f64)
}

fn check_q(q: usize) -> Result<()> {
    if q < 2 {
        Err(Error::InvalidDimension(q))
    } else {
        Ok(())
    }
}

/// Base-q digits of `x`, most significant first.
pub fn digits(mut x: usize, q: usize, len: usize) -> Vec<usize> {
    let mut d = vec![0; len];
    for i in (0..len).rev() {
        d[i] = x % q;
        x /= q;
    }
    d
}

pub fn undigits(d: &[usize], q: usize) -> usize {
    d.iter().fold(0, |acc, &x| acc * q + x)
}

/// Label of one many-body Weyl operator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeylIndex {
    pub q: usize,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
}

impl WeylIndex {
    pub fn new(q: usize, m: &[i64], n: &[i64]) -> Result<Self> {
        check_q(q)?;
        if m.len() != n.len() {
            return Err(Error::Incompatible("m and n lengths differ".into()));
        }
        let r = |v: &[i64]| v.iter().map(|&x| x.rem_euclid(q as i64) as usize).collect();
        Ok(WeylIndex { q, m: r(m), n: r(n) })
    }

    pub fn identity(q: usize, sites: usize) -> Self {
        WeylIndex { q, m: vec![0; sites], n: vec![0; sites] }
    }

    pub fn sites(&self) -> usize {
        self.m.len()
    }

    pub fn is_identity(&self) -> bool {
        self.m.iter().chain(&self.n).all(|&x| x == 0)
    }

    pub fn has_shift(&self) -> bool {
        self.m.iter().any(|&x| x != 0)
    }

    /// (m, n) as a pair of base-q integers.
    pub fn codes(&self) -> (usize, usize) {
        (undigits(&self.m, self.q), undigits(&self.n, self.q))
    }

    pub fn from_codes(q: usize, sites: usize, m: usize, n: usize) -> Self {
        WeylIndex { q, m: digits(m, q, sites), n: digits(n, q, sites) }
    }

    /// Index of the Hermitian conjugate together with its phase:
    /// (S^m W^n)^dag = w^{m.n} S^{-m} W^{-n}.
    pub fn adjoint(&self) -> (C64, WeylIndex) {
        let q = self.q as i64;
        let mn: i64 = self.m.iter().zip(&self.n).map(|(&a, &b)| (a * b) as i64).sum();
        let neg = |v: &[usize]| v.iter().map(|&x| ((q - x as i64) % q) as usize).collect();
        (omega_pow(self.q, mn), WeylIndex { q: self.q, m: neg(&self.m), n: neg(&self.n) })
    }
}

/// Dense operator on `sites` qudits of dimension q.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub q: usize,
    pub sites: usize,
    pub mat: Matrix,
}

impl DenseOperator {
    pub fn new(q: usize, sites: usize, mat: Matrix) -> Result<Self> {
        check_q(q)?;
        let d = q.pow(sites as u32);
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mat.nrows() });
        }
        Ok(DenseOperator { q, sites, mat })
    }

    /// Wrap a square matrix whose dimension must be a power of q.
    pub fn from_matrix(q: usize, mat: Matrix) -> Result<Self> {
        check_q(q)?;
        let d = mat.nrows();
        let sites = power_of(d, q).ok_or(Error::NotPowerOfQ { dim: d, q })?;
        Self::new(q, sites, mat)
    }

    pub fn identity(q: usize, sites: usize) -> Self {
        let d = q.pow(sites as u32);
        DenseOperator { q, sites, mat: Matrix::identity(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn kron(&self, other: &DenseOperator) -> Result<DenseOperator> {
        if self.q != other.q {
            return Err(Error::Incompatible("different q".into()));
        }
        Ok(DenseOperator { q: self.q, sites: self.sites + other.sites, mat: self.mat.kronecker(&other.mat) })
    }
}

pub fn power_of(d: usize, q: usize) -> Option<usize> {
    let mut x = 1;
    let mut k = 0;
    while x < d {
        x *= q;
        k += 1;
    }
    (x == d).then_some(k)
}

/// S^m W^n as a dense q x q matrix.
pub fn weyl_matrix(q: usize, m: i64, n: i64) -> Result<DenseOperator> {
    weyl_string(&WeylIndex::new(q, &[m], &[n])?)
}

/// Dense many-body Weyl operator. One nonzero per column:
/// column c maps to row c + m with value w^{n.c}.
pub fn weyl_string(idx: &WeylIndex) -> Result<DenseOperator> {
    let q = idx.q;
    let s = idx.sites();
    let d = q.pow(s as u32);
    let mut mat = Matrix::zeros(d, d);
    for c in 0..d {
        let cd = digits(c, q, s);
        let rd: Vec<usize> = cd.iter().zip(&idx.m).map(|(&a, &b)| (a + b) % q).collect();
        let ph: i64 = cd.iter().zip(&idx.n).map(|(&a, &b)| (a * b) as i64).sum();
        mat[(undigits(&rd, q), c)] = omega_pow(q, ph);
    }
    DenseOperator::new(q, s, mat)
}

/// (S^{m1} W^{n1})(S^{m2} W^{n2}) = w^{n1.m2} S^{m1+m2} W^{n1+n2}.
pub fn weyl_product(a: &WeylIndex, b: &WeylIndex) -> Result<(C64, WeylIndex)> {
    if a.q != b.q || a.sites() != b.sites() {
        return Err(Error::Incompatible("Weyl indices over different q or sites".into()));
    }
    let q = a.q;
    let k: i64 = a.n.iter().zip(&b.m).map(|(&x, &y)| (x * y) as i64).sum();
    let add = |u: &[usize], v: &[usize]| u.iter().zip(v).map(|(&x, &y)| (x + y) % q).collect();
    Ok((omega_pow(q, k), WeylIndex { q, m: add(&a.m, &b.m), n: add(&a.n, &b.n) }))
}

/// tr(a^dag b) / D.
pub fn op_inner(a: &DenseOperator, b: &DenseOperator) -> Result<C64> {
    mat_inner(&a.mat, &b.mat)
}

pub fn mat_inner(a: &Matrix, b: &Matrix) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.nrows() });
    }
    let d = a.nrows() as f64;
    let s: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    Ok(s / d)
}

/// Sparse coefficient vector over Weyl operators on a fixed number of sites.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorVector {
    pub q: usize,
    pub sites: usize,
    pub terms: BTreeMap<WeylIndex, C64>,
    pub prune: f64,
}

impl OperatorVector {
    pub fn zero(q: usize, sites: usize) -> Self {
        OperatorVector { q, sites, terms: BTreeMap::new(), prune: DEFAULT_PRUNE }
    }

    pub fn identity(q: usize, sites: usize) -> Self {
        let mut v = Self::zero(q, sites);
        v.terms.insert(WeylIndex::identity(q, sites), C64::new(1.0, 0.0));
        v
    }

    pub fn from_terms(q: usize, sites: usize, terms: impl IntoIterator<Item = (WeylIndex, C64)>) -> Self {
        let mut v = Self::zero(q, sites);
        for (k, c) in terms {
            v.add(k, c);
        }
        v.prune_small();
        v
    }

    /// Single basis element with coefficient `c`.
    pub fn basis(idx: WeylIndex, c: C64) -> Self {
        let (q, s) = (idx.q, idx.sites());
        Self::from_terms(q, s, [(idx, c)])
    }

    pub fn with_prune(mut self, eps: f64) -> Self {
        self.prune = eps;
        self.prune_small();
        self
    }

    pub fn add(&mut self, k: WeylIndex, c: C64) {
        *self.terms.entry(k).or_insert(C64::new(0.0, 0.0)) += c;
    }

    pub fn get(&self, k: &WeylIndex) -> C64 {
        self.terms.get(k).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn prune_small(&mut self) {
        let eps = self.prune;
        self.terms.retain(|_, c| c.norm() >= eps);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// <u|v> in the orthonormal Weyl basis.
    pub fn inner(&self, other: &OperatorVector) -> C64 {
        self.terms.iter().map(|(k, c)| c.conj() * other.get(k)).sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut v = self.clone();
        for c in v.terms.values_mut() {
            *c *= s;
        }
        v.prune_small();
        v
    }

    pub fn plus(&self, other: &OperatorVector) -> Self {
        let mut v = self.clone();
        for (k, c) in &other.terms {
            v.add(k.clone(), *c);
        }
        v.prune_small();
        v
    }

    /// Largest coefficient difference.
    pub fn max_diff(&self, other: &OperatorVector) -> f64 {
        let mut keys: Vec<&WeylIndex> = self.terms.keys().collect();
        keys.extend(other.terms.keys());
        keys.into_iter().map(|k| (self.get(k) - other.get(k)).norm()).fold(0.0, f64::max)
    }

    pub fn dense(&self) -> DenseOperator {
        reconstruct(self)
    }
}

/// Weyl coefficients A_{mn} = tr(W_{mn}^dag A) / D.
pub fn decompose(a: &DenseOperator) -> OperatorVector {
    let (q, s) = (a.q, a.sites);
    let d = a.dim();
    let cdig: Vec<Vec<usize>> = (0..d).map(|c| digits(c, q, s)).collect();
    let mut out = OperatorVector::zero(q, s);
    let mut v = vec![C64::new(0.0, 0.0); d];
    for mc in 0..d {
        let md = digits(mc, q, s);
        for c in 0..d {
            let rd: Vec<usize> = cdig[c].iter().zip(&md).map(|(&x, &y)| (x + y) % q).collect();
            v[c] = a.mat[(undigits(&rd, q), c)];
        }
        if v.iter().all(|x| x.norm() == 0.0) {
            continue;
        }
        for nc in 0..d {
            let nd = digits(nc, q, s);
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..d {
                let ph: i64 = cdig[c].iter().zip(&nd).map(|(&x, &y)| (x * y) as i64).sum();
                acc += omega_pow(q, -ph) * v[c];
            }
            let coeff = acc / d as f64;
            if coeff.norm() >= out.prune {
                out.terms.insert(WeylIndex { q, m: md.clone(), n: nd }, coeff);
            }
        }
    }
    out
}

/// Dense operator sum_k c_k W_k.
pub fn reconstruct(v: &OperatorVector) -> DenseOperator {
    let (q, s) = (v.q, v.sites);
    let d = q.pow(s as u32);
    let mut mat = Matrix::zeros(d, d);
    for (k, c) in &v.terms {
        for col in 0..d {
            let cd = digits(col, q, s);
            let rd: Vec<usize> = cd.iter().zip(&k.m).map(|(&a, &b)| (a + b) % q).collect();
            let ph: i64 = cd.iter().zip(&k.n).map(|(&a, &b)| (a * b) as i64).sum();
            mat[(undigits(&rd, q), col)] += c * omega_pow(q, ph);
        }
    }
    DenseOperator { q, sites: s, mat }
}

/// sqrt(q) |a><a| in the W eigenbasis.
pub fn z_projector(q: usize, a: usize) -> Result<DenseOperator> {
    check_q(q)?;
    if a >= q {
        return Err(Error::IndexOutOfRange { index: a, q });
    }
    let mut m = Matrix::zeros(q, q);
    m[(a, a)] = C64::new((q as f64).sqrt(), 0.0);
    DenseOperator::new(q, 1, m)
}

/// S eigenstate |a~> = q^{-1/2} sum_k w^{-a k} |k>, with S|a~> = w^a |a~>.
pub fn shift_eigenstate(q: usize, a: usize) -> Vec<C64> {
    let s = 1.0 / (q as f64).sqrt();
    (0..q).map(|k| omega_pow(q, -((a * k) as i64)) * s).collect()
}

/// sqrt(q) |a~><a~| in the S eigenbasis.
pub fn x_projector(q: usize, a: usize) -> Result<DenseOperator> {
    check_q(q)?;
    if a >= q {
        return Err(Error::IndexOutOfRange { index: a, q });
    }
    let v = shift_eigenstate(q, a);
    let sq = (q as f64).sqrt();
    let m = Matrix::from_fn(q, q, |i, j| v[i] * v[j].conj() * sq);
    DenseOperator::new(q, 1, m)
}

/// Naive basis element sqrt(q) |a><b| on one site.
pub fn naive_matrix(q: usize, a: usize, b: usize) -> Result<DenseOperator> {
    check_q(q)?;
    let mut m = Matrix::zeros(q, q);
    m[(a % q, b % q)] = C64::new((q as f64).sqrt(), 0.0);
    DenseOperator::new(q, 1, m)
}

/// Weyl expansion of the many-body naive element prod_j sqrt(q) |a_j><b_j|:
/// per site sum_n q^{-1/2} w^{-n b} S^{a-b} W^n.
pub fn naive_to_weyl(q: usize, a: &[usize], b: &[usize]) -> Vec<(WeylIndex, C64)> {
    let s = a.len();
    let m: Vec<usize> = a.iter().zip(b).map(|(&x, &y)| (x + q - y % q) % q).collect();
    let d = q.pow(s as u32);
    let norm = (q as f64).powf(-(s as f64) / 2.0);
    (0..d)
        .map(|nc| {
            let nd = digits(nc, q, s);
            let ph: i64 = nd.iter().zip(b).map(|(&x, &y)| (x * y) as i64).sum();
            (WeylIndex { q, m: m.clone(), n: nd }, omega_pow(q, -ph) * norm)
        })
        .collect()
}

/// Projector |a><a| on a multi-site configuration as an OperatorVector.
pub fn config_projector(q: usize, a: &[usize]) -> OperatorVector {
    let s = a.len();
    let scale = (q as f64).powf(-(s as f64) / 2.0);
    OperatorVector::from_terms(q, s, naive_to_weyl(q, a, a).into_iter().map(|(k, c)| (k, c * scale)))
}
