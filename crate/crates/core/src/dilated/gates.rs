use serde::{Deserialize, Serialize};

use super::haar::{haar_unitary, unitarity_error};
use super::lattice::SpacetimeLattice;
use super::tensor::{embed, permutation};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::weyl::{digits, shift_eigenstate, weyl_matrix, Matrix, C64};

const TOL: f64 = 1e-10;

/// An operator on a list of tensor factors of the dilated space.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOp {
    pub factors: Vec<usize>,
    pub op: Matrix,
}

impl LocalOp {
    pub fn dense(&self, lattice: &SpacetimeLattice) -> Matrix {
        embed(&self.op, &lattice.dims(), &self.factors)
    }
}

fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Projective measurement of an observable with M distinct eigenvalues on a cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSpec {
    pub q: usize,
    pub cluster: Vec<usize>,
    pub projectors: Vec<Matrix>,
    pub eigenvalues: Vec<f64>,
    pub register: usize,
}

impl MeasurementSpec {
    pub fn new(q: usize, cluster: Vec<usize>, projectors: Vec<Matrix>, eigenvalues: Vec<f64>, register: usize) -> Result<Self> {
        let s = MeasurementSpec { q, cluster, projectors, eigenvalues, register };
        s.validate()?;
        Ok(s)
    }

    pub fn levels(&self) -> usize {
        self.projectors.len()
    }

    pub fn local_dim(&self) -> usize {
        self.q.pow(self.cluster.len() as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.local_dim();
        let bad = |m: &str| Err(Error::InvalidMeasurement(m.to_string()));
        if self.projectors.is_empty() || self.projectors.len() > d {
            return bad("need 1..=q^l projectors");
        }
        if self.eigenvalues.len() != self.projectors.len() {
            return bad("one eigenvalue per projector");
        }
        for (i, a) in self.eigenvalues.iter().enumerate() {
            if self.eigenvalues[..i].iter().any(|b| (a - b).abs() < 1e-12) {
                return bad("eigenvalues must be distinct");
            }
        }
        let mut sum = Matrix::zeros(d, d);
        for (i, p) in self.projectors.iter().enumerate() {
            if p.shape() != (d, d) {
                return bad("projector dimension");
            }
            if max_abs(&(p - p.adjoint())) > TOL || max_abs(&(p * p - p)) > TOL {
                return bad("projectors must be Hermitian and idempotent");
            }
            for other in &self.projectors[i + 1..] {
                if max_abs(&(p * other)) > TOL {
                    return bad("projectors must be mutually orthogonal");
                }
            }
            sum += p;
        }
        if max_abs(&(sum - Matrix::identity(d, d))) > TOL {
            return bad("projectors must sum to the identity");
        }
        Ok(())
    }

    /// Measurement diagonal in the W basis: configuration a gives outcome labels[a].
    pub fn z_basis(q: usize, cluster: Vec<usize>, labels: &[usize], register: usize) -> Result<Self> {
        let d = q.pow(cluster.len() as u32);
        let vecs: Vec<Vec<C64>> = (0..d)
            .map(|a| {
                let mut v = vec![C64::new(0.0, 0.0); d];
                v[a] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        Self::from_labelled_basis(q, cluster, &vecs, labels, register)
    }

    /// Measurement diagonal in the product S eigenbasis |a~_1 ... a~_l>.
    pub fn x_basis(q: usize, cluster: Vec<usize>, labels: &[usize], register: usize) -> Result<Self> {
        let l = cluster.len();
        let d = q.pow(l as u32);
        let vecs: Vec<Vec<C64>> = (0..d)
            .map(|a| {
                let ad = digits(a, q, l);
                (0..d)
                    .map(|k| {
                        let kd = digits(k, q, l);
                        ad.iter().zip(&kd).map(|(&x, &y)| shift_eigenstate(q, x)[y]).product()
                    })
                    .collect()
            })
            .collect();
        Self::from_labelled_basis(q, cluster, &vecs, labels, register)
    }

    fn from_labelled_basis(q: usize, cluster: Vec<usize>, basis: &[Vec<C64>], labels: &[usize], register: usize) -> Result<Self> {
        let d = basis.len();
        if labels.len() != d {
            return Err(Error::InvalidMeasurement("one label per configuration".into()));
        }
        let m = labels.iter().max().map_or(0, |x| x + 1);
        let mut projectors = vec![Matrix::zeros(d, d); m];
        for (v, &lab) in basis.iter().zip(labels) {
            let col = nalgebra::DVector::from_vec(v.clone());
            projectors[lab] += &col * col.adjoint();
        }
        if projectors.iter().any(|p| max_abs(p) == 0.0) {
            return Err(Error::InvalidMeasurement("labels must be 0..M without gaps".into()));
        }
        let eigenvalues = (0..m).map(|x| x as f64).collect();
        Self::new(q, cluster, projectors, eigenvalues, register)
    }

    /// Qubit Pauli string such as "ZZ" or "X"; outcome 0 is eigenvalue +1.
    pub fn pauli(cluster: Vec<usize>, paulis: &str, register: usize) -> Result<Self> {
        if paulis.len() != cluster.len() {
            return Err(Error::InvalidMeasurement("one Pauli letter per site".into()));
        }
        let mut a = Matrix::identity(1, 1);
        for ch in paulis.chars() {
            a = a.kronecker(&pauli_matrix(ch)?);
        }
        let d = a.nrows();
        let id = Matrix::identity(d, d);
        let p0 = (&id + &a) * C64::new(0.5, 0.0);
        let p1 = (&id - &a) * C64::new(0.5, 0.0);
        if paulis.chars().all(|c| c == 'I') {
            return Self::new(2, cluster, vec![id], vec![1.0], register);
        }
        Self::new(2, cluster, vec![p0, p1], vec![1.0, -1.0], register)
    }

    /// The dense observable sum_m lambda_m P_m.
    pub fn observable(&self) -> Matrix {
        let d = self.local_dim();
        self.projectors
            .iter()
            .zip(&self.eigenvalues)
            .fold(Matrix::zeros(d, d), |acc, (p, &l)| acc + p * C64::new(l, 0.0))
    }
}

pub fn pauli_matrix(c: char) -> Result<Matrix> {
    Ok(match c {
        'I' => Matrix::identity(2, 2),
        'X' => weyl_matrix(2, 1, 0)?.mat,
        'Z' => weyl_matrix(2, 0, 1)?.mat,
        'Y' => weyl_matrix(2, 1, 1)?.mat * C64::new(0.0, 1.0),
        _ => return Err(Error::InvalidMeasurement(format!("unknown Pauli letter {c}"))),
    })
}

/// U[A] = sum_m P_m (x) S^m on the target register.
pub fn measurement_local(spec: &MeasurementSpec, lattice: &SpacetimeLattice) -> Result<LocalOp> {
    spec.validate()?;
    let rf = lattice.factor(spec.register)?;
    let levels = lattice.registers[spec.register].levels;
    if levels < spec.levels() {
        return Err(Error::RegisterTooSmall { levels, needed: spec.levels() });
    }
    if spec.cluster.iter().any(|&j| j >= lattice.n) || spec.q != lattice.q {
        return Err(Error::Incompatible("measurement cluster does not fit the lattice".into()));
    }
    let d = spec.local_dim();
    let mut u = Matrix::zeros(d * levels, d * levels);
    for (m, p) in spec.projectors.iter().enumerate() {
        let s = if levels == 1 { Matrix::identity(1, 1) } else { weyl_matrix(levels, m as i64, 0)?.mat };
        u += p.kronecker(&s);
    }
    let mut factors = spec.cluster.clone();
    factors.push(rf);
    Ok(LocalOp { factors, op: u })
}

pub fn build_measurement_unitary(spec: &MeasurementSpec, lattice: &SpacetimeLattice) -> Result<Matrix> {
    lattice.check_dense()?;
    Ok(measurement_local(spec, lattice)?.dense(lattice))
}

/// Block-diagonal local gate. Blocks list configuration codes of the cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockGateSpec {
    pub q: usize,
    pub cluster: Vec<usize>,
    pub blocks: Vec<Vec<usize>>,
    pub frozen: Vec<bool>,
    #[serde(skip)]
    pub unitaries: Vec<Matrix>,
}

impl BlockGateSpec {
    pub fn new(q: usize, cluster: Vec<usize>, blocks: Vec<Vec<usize>>, frozen: Vec<bool>) -> Result<Self> {
        let d = q.pow(cluster.len() as u32);
        let mut seen = vec![false; d];
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::NotAPartition(d));
            }
            for &a in b {
                if a >= d || seen[a] {
                    return Err(Error::NotAPartition(d));
                }
                seen[a] = true;
            }
        }
        if seen.iter().any(|s| !s) || frozen.len() != blocks.len() {
            return Err(Error::NotAPartition(d));
        }
        Ok(BlockGateSpec { q, cluster, blocks, frozen, unitaries: vec![] })
    }

    /// One block holding every configuration.
    pub fn generic(q: usize, cluster: Vec<usize>) -> Self {
        let d = q.pow(cluster.len() as u32);
        Self::new(q, cluster, vec![(0..d).collect()], vec![false]).expect("valid")
    }

    /// Blocks labelled by f(configuration digits).
    pub fn by_label(q: usize, cluster: Vec<usize>, f: impl Fn(&[usize]) -> usize) -> Self {
        let l = cluster.len();
        let d = q.pow(l as u32);
        let mut map: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for a in 0..d {
            map.entry(f(&digits(a, q, l))).or_default().push(a);
        }
        let blocks: Vec<Vec<usize>> = map.into_values().collect();
        let n = blocks.len();
        Self::new(q, cluster, blocks, vec![false; n]).expect("valid")
    }

    /// U(1): blocks of fixed total charge sum_j a_j.
    pub fn u1(q: usize, cluster: Vec<usize>) -> Self {
        Self::by_label(q, cluster, |d| d.iter().sum())
    }

    /// Z2 Ising parity on qubits.
    pub fn ising(cluster: Vec<usize>) -> Self {
        Self::by_label(2, cluster, |d| d.iter().sum::<usize>() % 2)
    }

    /// East gate on (j, j+1): Haar on j when j+1 is |1>, identity otherwise.
    pub fn east(cluster: Vec<usize>) -> Result<Self> {
        if cluster.len() != 2 {
            return Err(Error::InvalidParameter("east gate acts on two sites".into()));
        }
        Self::new(2, cluster, vec![vec![0], vec![2], vec![1, 3]], vec![true, true, false])
    }

    pub fn local_dim(&self) -> usize {
        self.q.pow(self.cluster.len() as u32)
    }

    /// Independent Haar unitary per non-frozen block, identity for frozen ones.
    pub fn sample(&self, rng: &mut Rng) -> BlockGateSpec {
        let mut g = self.clone();
        g.unitaries = self
            .blocks
            .iter()
            .zip(&self.frozen)
            .map(|(b, &f)| if f { Matrix::identity(b.len(), b.len()) } else { haar_unitary(b.len(), rng) })
            .collect();
        g
    }

    pub fn is_sampled(&self) -> bool {
        self.unitaries.len() == self.blocks.len()
    }

    pub fn matrix(&self) -> Result<Matrix> {
        if !self.is_sampled() {
            return Err(Error::InvalidParameter("block gate has no sampled unitaries".into()));
        }
        let d = self.local_dim();
        let mut m = Matrix::zeros(d, d);
        for (b, u) in self.blocks.iter().zip(&self.unitaries) {
            for (i, &r) in b.iter().enumerate() {
                for (j, &c) in b.iter().enumerate() {
                    m[(r, c)] = u[(i, j)];
                }
            }
        }
        Ok(m)
    }

    pub fn local(&self) -> Result<LocalOp> {
        Ok(LocalOp { factors: self.cluster.clone(), op: self.matrix()? })
    }
}

pub fn sample_haar_block_gate(spec: &BlockGateSpec, rng: &mut Rng) -> BlockGateSpec {
    spec.sample(rng)
}

/// Outcome-conditioned physical unitary, controlled by Stinespring registers.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveGateSpec {
    pub controls: Vec<usize>,
    pub table: Vec<Matrix>,
    pub target: Vec<usize>,
}

/// sum_m R_m (x) |m><m| on the controls, first control most significant.
pub fn adaptive_local(spec: &AdaptiveGateSpec, lattice: &SpacetimeLattice) -> Result<LocalOp> {
    let mut cf = Vec::new();
    let mut joint = 1;
    for &c in &spec.controls {
        cf.push(lattice.factor(c)?);
        joint *= lattice.registers[c].levels;
    }
    if spec.target.iter().any(|&j| j >= lattice.n) {
        return Err(Error::Incompatible("adaptive target outside the lattice".into()));
    }
    if spec.target.iter().any(|t| cf.contains(t)) {
        return Err(Error::ControlOverlap);
    }
    if spec.table.len() != joint {
        return Err(Error::IncompleteTable(format!("{} entries for {} joint outcomes", spec.table.len(), joint)));
    }
    let d = lattice.q.pow(spec.target.len() as u32);
    for r in &spec.table {
        if r.shape() != (d, d) || unitarity_error(r) > TOL {
            return Err(Error::IncompleteTable("every entry must be a unitary on the target".into()));
        }
    }
    let mut op = Matrix::zeros(d * joint, d * joint);
    for (m, r) in spec.table.iter().enumerate() {
        let mut proj = Matrix::zeros(joint, joint);
        proj[(m, m)] = C64::new(1.0, 0.0);
        op += r.kronecker(&proj);
    }
    let mut factors = spec.target.clone();
    factors.extend(cf);
    Ok(LocalOp { factors, op })
}

pub fn build_adaptive_gate(spec: &AdaptiveGateSpec, lattice: &SpacetimeLattice) -> Result<Matrix> {
    lattice.check_dense()?;
    Ok(adaptive_local(spec, lattice)?.dense(lattice))
}

/// Factor permutation moving the content of slice tau to slice tau - 1 (slice 1 wraps to S_tot).
pub fn time_shift_perm(lattice: &SpacetimeLattice) -> Result<Vec<usize>> {
    let s = lattice.slices();
    let n = lattice.n;
    let mut perm: Vec<usize> = (0..lattice.dims().len()).collect();
    if s <= 1 {
        return Ok(perm);
    }
    let layout = |tau: usize| -> Vec<(usize, usize)> {
        lattice.registers.iter().filter(|r| r.tau == tau).map(|r| (r.site, r.levels)).collect()
    };
    let first = layout(1);
    if (2..=s).any(|t| layout(t) != first) {
        return Err(Error::NonUniformSlices);
    }
    for (i, r) in lattice.registers.iter().enumerate() {
        let dest_tau = if r.tau == 1 { s } else { r.tau - 1 };
        let j = lattice.register_at(r.site, dest_tau).ok_or(Error::NonUniformSlices)?;
        perm[n + i] = n + j;
    }
    Ok(perm)
}

pub fn time_shift(lattice: &SpacetimeLattice) -> Result<Matrix> {
    lattice.check_dense()?;
    Ok(permutation(&lattice.dims(), &time_shift_perm(lattice)?))
}

/// One time-ordered element of a hybrid circuit.
#[derive(Clone, Debug)]
pub enum Layer {
    Gates(Vec<BlockGateSpec>),
    Measure(Vec<MeasurementSpec>),
    Adaptive(Vec<AdaptiveGateSpec>),
    Shift,
}

/// Local operators of a list of layers, in time order.
pub fn layer_ops(layers: &[Layer], lattice: &SpacetimeLattice) -> Result<Vec<LocalOp>> {
    let mut ops = Vec::new();
    for l in layers {
        match l {
            Layer::Gates(gs) => {
                for g in gs {
                    ops.push(g.local()?);
                }
            }
            Layer::Measure(ms) => {
                for m in ms {
                    ops.push(measurement_local(m, lattice)?);
                }
            }
            Layer::Adaptive(a) => {
                for g in a {
                    ops.push(adaptive_local(g, lattice)?);
                }
            }
            Layer::Shift => {
                let perm = time_shift_perm(lattice)?;
                let all: Vec<usize> = (0..lattice.dims().len()).collect();
                ops.push(LocalOp { factors: all, op: permutation(&lattice.dims(), &perm) });
            }
        }
    }
    Ok(ops)
}

/// Time-ordered dense product of the layers (later layers act on the left).
pub fn build_floquet(layers: &[Layer], lattice: &SpacetimeLattice) -> Result<Matrix> {
    lattice.check_dense()?;
    let d = lattice.dim();
    let mut f = Matrix::identity(d, d);
    for op in layer_ops(layers, lattice)? {
        f = op.dense(lattice) * f;
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilated::lattice::Register;
    use crate::rng::stream;

    fn lat(n: usize, regs: usize) -> SpacetimeLattice {
        SpacetimeLattice::new(n, 2, (0..regs).map(|i| Register { site: i % n, tau: 1 + i / n, levels: 2 }).collect()).unwrap()
    }

    #[test]
    fn pauli_measurement_unitary() {
        let l = lat(2, 1);
        let m = MeasurementSpec::pauli(vec![0, 1], "XZ", 0).unwrap();
        let u = build_measurement_unitary(&m, &l).unwrap();
        assert!(unitarity_error(&u) < 1e-12);
        let a = embed(&m.observable(), &l.dims(), &[0, 1]);
        assert!(max_abs(&(u.adjoint() * &a * &u - a)) < 1e-12);
        assert!(MeasurementSpec::pauli(vec![0], "Q", 0).is_err());
    }

    #[test]
    fn register_too_small() {
        let l = SpacetimeLattice::new(1, 3, vec![Register { site: 0, tau: 1, levels: 2 }]).unwrap();
        let m = MeasurementSpec::z_basis(3, vec![0], &[0, 1, 2], 0).unwrap();
        assert!(matches!(measurement_local(&m, &l), Err(Error::RegisterTooSmall { .. })));
    }

    #[test]
    fn invalid_projectors_rejected() {
        let p = Matrix::identity(2, 2);
        assert!(MeasurementSpec::new(2, vec![0], vec![p.clone(), p], vec![0.0, 1.0], 0).is_err());
        assert!(MeasurementSpec::z_basis(2, vec![0], &[0, 2], 0).is_err());
    }

    #[test]
    fn block_gates() {
        let mut r = stream(4, 0);
        let g = BlockGateSpec::u1(2, vec![0, 1]).sample(&mut r);
        let u = g.matrix().unwrap();
        assert!(unitarity_error(&u) < 1e-12);
        let z = pauli_matrix('Z').unwrap();
        let charge = z.kronecker(&Matrix::identity(2, 2)) + Matrix::identity(2, 2).kronecker(&z);
        assert!(max_abs(&(&u * &charge - &charge * &u)) < 1e-12);
        assert!(BlockGateSpec::new(2, vec![0, 1], vec![vec![0, 1], vec![1, 2, 3]], vec![false, false]).is_err());
        assert!(BlockGateSpec::new(2, vec![0], vec![vec![0]], vec![false]).is_err());
        let e = BlockGateSpec::east(vec![0, 1]).unwrap().sample(&mut r).matrix().unwrap();
        assert_eq!(e[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(e[(2, 2)], C64::new(1.0, 0.0));
        assert_eq!(e[(0, 2)], C64::new(0.0, 0.0));
    }

    #[test]
    fn adaptive_gate_forms() {
        let l = lat(1, 1);
        let x = pauli_matrix('X').unwrap();
        let i2 = Matrix::identity(2, 2);
        let g = AdaptiveGateSpec { controls: vec![0], table: vec![i2.clone(), x.clone()], target: vec![0] };
        let u = build_adaptive_gate(&g, &l).unwrap();
        let p0 = Matrix::from_diagonal(&nalgebra::dvector![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let p1 = &i2 - &p0;
        assert!(max_abs(&(u.clone() - (i2.kronecker(&p0) + x.kronecker(&p1)))) < 1e-14);
        let id = AdaptiveGateSpec { controls: vec![0], table: vec![i2.clone(), i2.clone()], target: vec![0] };
        assert!(max_abs(&(build_adaptive_gate(&id, &l).unwrap() - Matrix::identity(4, 4))) < 1e-14);
        let bad = AdaptiveGateSpec { controls: vec![0], table: vec![i2], target: vec![0] };
        assert!(matches!(build_adaptive_gate(&bad, &l), Err(Error::IncompleteTable(_))));
    }

    #[test]
    fn shift_operator() {
        let l1 = lat(1, 1);
        assert_eq!(time_shift(&l1).unwrap(), Matrix::identity(4, 4));
        let l2 = SpacetimeLattice::with_slices(1, 2, &[0], 2, 2).unwrap();
        let t = time_shift(&l2).unwrap();
        assert!(max_abs(&(&t * &t - Matrix::identity(8, 8))) < 1e-15);
        // |phys=0, tau1=1, tau2=0> -> |0, 0, 1>
        assert_eq!(t[(1, 2)], C64::new(1.0, 0.0));
        let l3 = SpacetimeLattice::with_slices(2, 2, &[0, 1], 3, 2).unwrap();
        let t3 = time_shift(&l3).unwrap();
        let mut p = Matrix::identity(l3.dim(), l3.dim());
        for _ in 0..3 {
            p = &t3 * p;
        }
        assert!(max_abs(&(p - Matrix::identity(l3.dim(), l3.dim()))) < 1e-15);
        let ragged = SpacetimeLattice::new(2, 2, vec![Register { site: 0, tau: 1, levels: 2 }, Register { site: 1, tau: 2, levels: 2 }]).unwrap();
        assert!(matches!(time_shift(&ragged), Err(Error::NonUniformSlices)));
    }

    #[test]
    fn floquet_products() {
        let mut r = stream(9, 0);
        let l = SpacetimeLattice::physical(2, 2).unwrap();
        let g = BlockGateSpec::generic(2, vec![0, 1]).sample(&mut r);
        let f = build_floquet(&[Layer::Gates(vec![g.clone()])], &l).unwrap();
        assert!(max_abs(&(f - g.matrix().unwrap())) < 1e-15);
        let l3 = SpacetimeLattice::with_slices(3, 2, &[0, 1, 2], 1, 2).unwrap();
        let layers = vec![
            Layer::Gates(vec![BlockGateSpec::generic(2, vec![0, 1]).sample(&mut r)]),
            Layer::Gates(vec![BlockGateSpec::generic(2, vec![1, 2]).sample(&mut r)]),
            Layer::Measure((0..3).map(|j| MeasurementSpec::pauli(vec![j], "Z", j).unwrap()).collect()),
            Layer::Shift,
        ];
        let f = build_floquet(&layers, &l3).unwrap();
        assert!(unitarity_error(&f) < 1e-12);
        let id = build_floquet(&[], &l3).unwrap();
        assert!((id.trace().re - l3.dim() as f64).abs() < 1e-12);
    }
}
