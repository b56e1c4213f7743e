//! Haar-averaged transition matrices acting on Weyl coefficient vectors.
//!
//! A gate on an l-site cluster is a q^{2l} x q^{2l} matrix T with
//! T[k', k] = <W_k' | E(W_k)>, where the cluster code of S^m W^n is
//! code(m) * q^l + code(n) with the first cluster site most significant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dilated::{haar_unitary, BlockGateSpec, MeasurementSpec};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::weyl::{
    decompose, digits, mat_inner, naive_to_weyl, reconstruct, shift_eigenstate, undigits, weyl_string, DenseOperator,
    Matrix, OperatorVector, WeylIndex, C64,
};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const PRUNE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    EvoGeneric,
    EvoBlocks,
    MeasZ,
    MeasX,
    MeasNondegenerate,
    CcEffective,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionGate {
    pub q: usize,
    pub cluster: Vec<usize>,
    pub kind: GateKind,
    /// columns[k] lists (k', T[k', k]) for nonzero entries.
    pub columns: Vec<Vec<(usize, C64)>>,
}

impl TransitionGate {
    pub fn local_dim(&self) -> usize {
        self.q.pow(2 * self.cluster.len() as u32)
    }

    pub fn from_dense(q: usize, cluster: Vec<usize>, kind: GateKind, t: &Matrix) -> Result<Self> {
        let d2 = q.pow(2 * cluster.len() as u32);
        if t.shape() != (d2, d2) {
            return Err(Error::DimensionMismatch { expected: d2, got: t.nrows() });
        }
        let columns = (0..d2)
            .map(|k| (0..d2).filter(|&r| t[(r, k)].norm() >= PRUNE).map(|r| (r, t[(r, k)])).collect())
            .collect();
        Ok(TransitionGate { q, cluster, kind, columns })
    }

    pub fn dense(&self) -> Matrix {
        let d2 = self.local_dim();
        let mut t = Matrix::zeros(d2, d2);
        for (k, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                t[(r, k)] = v;
            }
        }
        t
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.columns[col].iter().find(|(r, _)| *r == row).map_or(ZERO, |(_, v)| *v)
    }

    pub fn adjoint(&self) -> Self {
        let mut g = Self::from_dense(self.q, self.cluster.clone(), self.kind, &self.dense().adjoint()).expect("square");
        g.kind = self.kind;
        g
    }

    pub fn hermiticity_error(&self) -> f64 {
        let t = self.dense();
        (&t - t.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Local product self * other (other acts first). Clusters must match.
    pub fn then_after(&self, other: &TransitionGate) -> Result<Self> {
        if self.cluster != other.cluster || self.q != other.q {
            return Err(Error::Incompatible("gates act on different clusters".into()));
        }
        Self::from_dense(self.q, self.cluster.clone(), GateKind::Custom, &(self.dense() * other.dense()))
    }

    /// (1 - p) identity + p self.
    pub fn mixture(&self, p: f64) -> Self {
        let d2 = self.local_dim();
        let t = Matrix::identity(d2, d2) * C64::new(1.0 - p, 0.0) + self.dense() * C64::new(p, 0.0);
        Self::from_dense(self.q, self.cluster.clone(), GateKind::Custom, &t).expect("square")
    }

    fn code(&self, k: &WeylIndex) -> usize {
        let m: Vec<usize> = self.cluster.iter().map(|&j| k.m[j]).collect();
        let n: Vec<usize> = self.cluster.iter().map(|&j| k.n[j]).collect();
        undigits(&m, self.q) * self.q.pow(self.cluster.len() as u32) + undigits(&n, self.q)
    }

    fn with_code(&self, k: &WeylIndex, code: usize) -> WeylIndex {
        let l = self.cluster.len();
        let d = self.q.pow(l as u32);
        let md = digits(code / d, self.q, l);
        let nd = digits(code % d, self.q, l);
        let mut out = k.clone();
        for (i, &j) in self.cluster.iter().enumerate() {
            out.m[j] = md[i];
            out.n[j] = nd[i];
        }
        out
    }

    /// Coefficient update c'_{k'} = sum_k T[k', k] c_k on the cluster.
    pub fn apply(&self, v: &OperatorVector, stats: &mut EvolveStats) -> Result<OperatorVector> {
        if v.q != self.q || self.cluster.iter().any(|&j| j >= v.sites) {
            return Err(Error::Incompatible("gate cluster outside the operator support".into()));
        }
        let mut terms: BTreeMap<WeylIndex, C64> = BTreeMap::new();
        for (k, &c) in &v.terms {
            let code = self.code(k);
            if self.kind == GateKind::CcEffective && self.cluster.iter().any(|&j| k.m[j] != 0) {
                stats.cc_zeroed += 1;
                continue;
            }
            for &(r, t) in &self.columns[code] {
                *terms.entry(self.with_code(k, r)).or_insert(ZERO) += t * c;
            }
        }
        let mut out = OperatorVector::zero(v.q, v.sites).with_prune(v.prune);
        out.terms = terms;
        out.prune_small();
        Ok(out)
    }
}

/// Diagnostics collected while evolving.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvolveStats {
    /// Input terms with shift content dropped by charge-changing effective gates.
    pub cc_zeroed: usize,
}

fn local_index_code(k: &WeylIndex) -> usize {
    let (m, n) = k.codes();
    m * k.q.pow(k.sites() as u32) + n
}

/// Weyl coefficient vector (dense, cluster codes) of an operator on l sites.
fn coeffs_of(op: &DenseOperator) -> Vec<C64> {
    let d2 = op.q.pow(2 * op.sites as u32);
    let mut v = vec![ZERO; d2];
    for (k, c) in decompose(op).terms {
        v[local_index_code(&k)] = c;
    }
    v
}

fn naive_coeffs(q: usize, l: usize, a: usize, b: usize) -> Vec<C64> {
    let d2 = q.pow(2 * l as u32);
    let mut v = vec![ZERO; d2];
    for (k, c) in naive_to_weyl(q, &digits(a, q, l), &digits(b, q, l)) {
        v[local_index_code(&k)] += c;
    }
    v
}

/// sum of coef |v><u| over the listed rank-one terms.
fn rank_one_sum(d2: usize, terms: &[(f64, Vec<C64>, Vec<C64>)]) -> Matrix {
    let mut t = Matrix::zeros(d2, d2);
    for (w, v, u) in terms {
        for (r, vr) in v.iter().enumerate() {
            if *vr == ZERO {
                continue;
            }
            for (c, uc) in u.iter().enumerate() {
                t[(r, c)] += vr * uc.conj() * *w;
            }
        }
    }
    t
}

/// Replace the cluster content by its trace part: keep only terms trivial on the cluster.
pub fn onefold_haar_channel(op: &OperatorVector, cluster: &[usize]) -> Result<OperatorVector> {
    if cluster.iter().any(|&j| j >= op.sites) {
        return Err(Error::Incompatible("cluster outside the operator support".into()));
    }
    let mut out = op.clone();
    out.terms.retain(|k, _| cluster.iter().all(|&j| k.m[j] == 0 && k.n[j] == 0));
    Ok(out)
}

/// Generic Haar evolution: |I>><<I| on the cluster.
pub fn tgate_evo_generic(q: usize, cluster: Vec<usize>) -> TransitionGate {
    let d2 = q.pow(2 * cluster.len() as u32);
    let mut columns = vec![vec![]; d2];
    columns[0] = vec![(0, C64::new(1.0, 0.0))];
    TransitionGate { q, cluster, kind: GateKind::EvoGeneric, columns }
}

/// Haar evolution within W-basis blocks, with frozen blocks left untouched.
pub fn tgate_evo_blocks(spec: &BlockGateSpec) -> Result<TransitionGate> {
    BlockGateSpec::new(spec.q, spec.cluster.clone(), spec.blocks.clone(), spec.frozen.clone())?;
    let (q, l) = (spec.q, spec.cluster.len());
    let d2 = q.pow(2 * l as u32);
    let mut terms = Vec::new();
    let mut frozen_states = Vec::new();
    for (b, &f) in spec.blocks.iter().zip(&spec.frozen) {
        if f {
            frozen_states.extend(b.iter().copied());
            continue;
        }
        let w = 1.0 / b.len() as f64;
        for &a in b {
            for &a2 in b {
                terms.push((w, naive_coeffs(q, l, a, a), naive_coeffs(q, l, a2, a2)));
            }
        }
    }
    for &a in &frozen_states {
        for &b in &frozen_states {
            let v = naive_coeffs(q, l, a, b);
            terms.push((1.0, v.clone(), v));
        }
    }
    let t = rank_one_sum(d2, &terms);
    TransitionGate::from_dense(q, spec.cluster.clone(), GateKind::EvoBlocks, &t)
}

fn check_labels(q: usize, l: usize, labels: &[usize]) -> Result<()> {
    if labels.len() != q.pow(l as u32) {
        return Err(Error::NotAPartition(q.pow(l as u32)));
    }
    Ok(())
}

/// Measurement diagonal in the W basis; labels[a] is the outcome of configuration a.
pub fn tgate_meas_z(q: usize, cluster: Vec<usize>, labels: &[usize]) -> Result<TransitionGate> {
    let l = cluster.len();
    check_labels(q, l, labels)?;
    let d = labels.len();
    let mut terms = Vec::new();
    for a in 0..d {
        for a2 in 0..d {
            if labels[a] == labels[a2] {
                let v = naive_coeffs(q, l, a, a2);
                terms.push((1.0, v.clone(), v));
            }
        }
    }
    TransitionGate::from_dense(q, cluster, GateKind::MeasZ, &rank_one_sum(q.pow(2 * l as u32), &terms))
}

fn shift_naive(q: usize, l: usize, a: usize, b: usize) -> DenseOperator {
    let state = |x: usize| -> Vec<C64> {
        let xd = digits(x, q, l);
        (0..q.pow(l as u32))
            .map(|k| {
                let kd = digits(k, q, l);
                xd.iter().zip(&kd).map(|(&s, &t)| shift_eigenstate(q, s)[t]).product()
            })
            .collect()
    };
    let (va, vb) = (state(a), state(b));
    let sq = (q as f64).powf(l as f64 / 2.0);
    let d = va.len();
    DenseOperator { q, sites: l, mat: Matrix::from_fn(d, d, |i, j| va[i] * vb[j].conj() * sq) }
}

/// Measurement diagonal in the product S eigenbasis.
pub fn tgate_meas_x(q: usize, cluster: Vec<usize>, labels: &[usize]) -> Result<TransitionGate> {
    let l = cluster.len();
    check_labels(q, l, labels)?;
    let d = labels.len();
    let mut terms = Vec::new();
    for a in 0..d {
        for a2 in 0..d {
            if labels[a] == labels[a2] {
                let v = coeffs_of(&shift_naive(q, l, a, a2));
                terms.push((1.0, v.clone(), v));
            }
        }
    }
    TransitionGate::from_dense(q, cluster, GateKind::MeasX, &rank_one_sum(q.pow(2 * l as u32), &terms))
}

/// Measurement of an arbitrary projector list: O -> sum_mu P_mu O P_mu.
pub fn tgate_measurement(spec: &MeasurementSpec) -> Result<TransitionGate> {
    spec.validate()?;
    let ps = spec.projectors.clone();
    let mut g = channel_gate(spec.q, spec.cluster.clone(), GateKind::MeasNondegenerate, |o| {
        ps.iter().fold(Matrix::zeros(o.nrows(), o.ncols()), |acc, p| acc + p * o * p)
    })?;
    g.kind = GateKind::MeasNondegenerate;
    Ok(g)
}

/// Number of ordered pairs b != b' in a common block with b' - b = n (digitwise mod q).
pub fn cc_counter(q: usize, l: usize, labels: &[usize], n: &[usize]) -> usize {
    let d = labels.len();
    let mut count = 0;
    for b in 0..d {
        let bd = digits(b, q, l);
        let b2: Vec<usize> = bd.iter().zip(n).map(|(&x, &y)| (x + y) % q).collect();
        let b2 = undigits(&b2, q);
        if b2 != b && labels[b2] == labels[b] {
            count += 1;
        }
    }
    count
}

/// Effective gate for a charge-changing measurement between shift-free layers.
/// labels partition the S-eigenbasis configurations of the rotated observable.
pub fn tgate_cc_effective(q: usize, cluster: Vec<usize>, labels: &[usize]) -> Result<TransitionGate> {
    let l = cluster.len();
    check_labels(q, l, labels)?;
    let d = labels.len();
    let mut columns = vec![vec![]; d * d];
    columns[0] = vec![(0, C64::new(1.0, 0.0))];
    let scale = 1.0 / d as f64;
    for nc in 1..d {
        let c = cc_counter(q, l, labels, &digits(nc, q, l));
        if c > 0 {
            columns[nc] = vec![(nc, C64::new(c as f64 * scale, 0.0))];
        }
    }
    Ok(TransitionGate { q, cluster, kind: GateKind::CcEffective, columns })
}

/// Gate of an arbitrary linear map on cluster operators, T[k',k] = <W_k'|f(W_k)>.
pub fn channel_gate(q: usize, cluster: Vec<usize>, kind: GateKind, f: impl Fn(&Matrix) -> Matrix) -> Result<TransitionGate> {
    let l = cluster.len();
    let d = q.pow(l as u32);
    let basis: Vec<Matrix> = (0..d * d)
        .map(|k| weyl_string(&WeylIndex::from_codes(q, l, k / d, k % d)).map(|o| o.mat))
        .collect::<Result<_>>()?;
    let mut t = Matrix::zeros(d * d, d * d);
    for (k, w) in basis.iter().enumerate() {
        let img = f(w);
        for (r, w2) in basis.iter().enumerate() {
            t[(r, k)] = mat_inner(w2, &img)?;
        }
    }
    TransitionGate::from_dense(q, cluster, kind, &t)
}

/// Unitary conjugation O -> U O U^dag, used to rotate measurement bases.
pub fn tgate_conjugation(q: usize, cluster: Vec<usize>, u: &Matrix) -> Result<TransitionGate> {
    let ud = u.adjoint();
    channel_gate(q, cluster, GateKind::Custom, |o| u * o * &ud)
}

/// Measurement in a rotated basis: rotate, measure diagonally, rotate back.
pub fn tgate_meas_rotated(base: &TransitionGate, u: &Matrix) -> Result<TransitionGate> {
    let pre = tgate_conjugation(base.q, base.cluster.clone(), &u.adjoint())?;
    let post = tgate_conjugation(base.q, base.cluster.clone(), u)?;
    post.then_after(&base.then_after(&pre)?)
}

/// Monte Carlo estimate of a blocked Haar gate: mean and standard error per element.
pub fn monte_carlo_evo_gate(spec: &BlockGateSpec, samples: usize, rng: &mut Rng) -> Result<(Matrix, Matrix)> {
    let (q, l) = (spec.q, spec.cluster.len());
    let d = q.pow(l as u32);
    let basis: Vec<Matrix> = (0..d * d)
        .map(|k| weyl_string(&WeylIndex::from_codes(q, l, k / d, k % d)).map(|o| o.mat))
        .collect::<Result<_>>()?;
    let mut s1 = Matrix::zeros(d * d, d * d);
    let mut s2 = nalgebra::DMatrix::<f64>::zeros(d * d, d * d);
    for _ in 0..samples {
        let u = spec.sample(rng).matrix()?;
        let ud = u.adjoint();
        for (k, w) in basis.iter().enumerate() {
            let img = &ud * w * &u;
            for (r, w2) in basis.iter().enumerate() {
                let x = mat_inner(w2, &img)?;
                s1[(r, k)] += x;
                s2[(r, k)] += x.norm_sqr();
            }
        }
    }
    let n = samples as f64;
    let mean = s1 / C64::new(n, 0.0);
    let se = Matrix::from_fn(d * d, d * d, |r, c| {
        let var = (s2[(r, c)] / n - mean[(r, c)].norm_sqr()).max(0.0);
        C64::new((var / (n - 1.0).max(1.0)).sqrt(), 0.0)
    });
    Ok((mean, se))
}

/// Monte Carlo mean and per-entry variance of U^dag O U for Haar U on the full operator.
pub fn monte_carlo_haar_average(op: &Matrix, samples: usize, rng: &mut Rng) -> (Matrix, nalgebra::DMatrix<f64>) {
    let d = op.nrows();
    let mut s1 = Matrix::zeros(d, d);
    let mut s2 = nalgebra::DMatrix::<f64>::zeros(d, d);
    for _ in 0..samples {
        let u = haar_unitary(d, rng);
        let x = u.adjoint() * op * &u;
        s1 += &x;
        s2 += x.map(|z| z.norm_sqr());
    }
    let n = samples as f64;
    let mean = s1 / C64::new(n, 0.0);
    let var = nalgebra::DMatrix::from_fn(d, d, |r, c| (s2[(r, c)] / n - mean[(r, c)].norm_sqr()).max(0.0));
    (mean, var)
}

/// Exact onefold average for a dense operator on the whole space: (tr O / D) I.
pub fn haar_average_dense(op: &Matrix) -> Matrix {
    let d = op.nrows();
    Matrix::identity(d, d) * (op.trace() / C64::new(d as f64, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Heisenberg,
    Schrodinger,
}

/// Layers in physical time order; a layer is a set of gates on disjoint clusters.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionCircuit {
    pub q: usize,
    pub sites: usize,
    pub layers: Vec<Vec<TransitionGate>>,
    pub direction: Direction,
}

/// Build a circuit, checking that gates within a layer act on disjoint clusters.
pub fn compose(q: usize, sites: usize, layers: Vec<Vec<TransitionGate>>, direction: Direction) -> Result<TransitionCircuit> {
    for layer in &layers {
        let mut used = vec![false; sites];
        for g in layer {
            if g.q != q {
                return Err(Error::Incompatible("gate q differs from circuit q".into()));
            }
            for &j in &g.cluster {
                if j >= sites || used[j] {
                    return Err(Error::Incompatible("gate clusters overlap or leave the lattice".into()));
                }
                used[j] = true;
            }
        }
    }
    Ok(TransitionCircuit { q, sites, layers, direction })
}

impl TransitionCircuit {
    pub fn with_direction(&self, direction: Direction) -> Self {
        TransitionCircuit { direction, ..self.clone() }
    }

    /// Schrodinger: layers in time order. Heisenberg: reversed order with adjoint gates.
    pub fn evolve_with_stats(&self, v: &OperatorVector) -> Result<(OperatorVector, EvolveStats)> {
        if v.sites != self.sites || v.q != self.q {
            return Err(Error::Incompatible("vector does not match the circuit".into()));
        }
        let mut stats = EvolveStats::default();
        let mut cur = v.clone();
        match self.direction {
            Direction::Schrodinger => {
                for layer in &self.layers {
                    for g in layer {
                        cur = g.apply(&cur, &mut stats)?;
                    }
                }
            }
            Direction::Heisenberg => {
                for layer in self.layers.iter().rev() {
                    for g in layer {
                        cur = g.adjoint().apply(&cur, &mut stats)?;
                    }
                }
            }
        }
        Ok((cur, stats))
    }

    pub fn evolve(&self, v: &OperatorVector) -> Result<OperatorVector> {
        Ok(self.evolve_with_stats(v)?.0)
    }

    /// Dense transition matrix of the whole circuit over all q^{2N} Weyl strings (Schrodinger order).
    pub fn dense(&self) -> Result<Matrix> {
        let d = self.q.pow(self.sites as u32);
        let d2 = d * d;
        let fwd = self.with_direction(Direction::Schrodinger);
        let mut t = Matrix::zeros(d2, d2);
        for k in 0..d2 {
            let idx = WeylIndex::from_codes(self.q, self.sites, k / d, k % d);
            let out = fwd.evolve(&OperatorVector::basis(idx, C64::new(1.0, 0.0)))?;
            for (r, c) in out.terms {
                let (m, n) = r.codes();
                t[(m * d + n, k)] = c;
            }
        }
        Ok(t)
    }
}

/// Expectation tr(O rho) for operator vectors of O and rho.
pub fn expectation(o: &OperatorVector, rho: &OperatorVector) -> C64 {
    let d = o.q.pow(o.sites as u32) as f64;
    let od = reconstruct(o);
    let adj = decompose(&DenseOperator { q: od.q, sites: od.sites, mat: od.mat.adjoint() });
    adj.inner(rho) * d
}
