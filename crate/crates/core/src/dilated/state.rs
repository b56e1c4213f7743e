use nalgebra::DVector;

use super::gates::LocalOp;
use super::lattice::SpacetimeLattice;
use super::tensor::{apply, embed, reduce_mixed, reduce_pure, split, strides};
use crate::error::{Error, Result};
use crate::weyl::{Matrix, C64};

const IMPOSSIBLE: f64 = 1e-14;

/// Joint state of the physical qudits and all Stinespring registers.
#[derive(Clone, Debug)]
pub enum DilatedState {
    Pure(DVector<C64>),
    Mixed(Matrix),
}

impl DilatedState {
    /// psi_ph (x) |0...0> on the registers.
    pub fn pure_product(lattice: &SpacetimeLattice, phys: &DVector<C64>) -> Result<Self> {
        if phys.len() != lattice.physical_dim() {
            return Err(Error::DimensionMismatch { expected: lattice.physical_dim(), got: phys.len() });
        }
        let r = lattice.register_dim();
        let mut psi = DVector::zeros(lattice.dim());
        for (i, v) in phys.iter().enumerate() {
            psi[i * r] = *v;
        }
        Ok(DilatedState::Pure(psi))
    }

    /// rho_ph (x) |0...0><0...0|.
    pub fn mixed_product(lattice: &SpacetimeLattice, rho: &Matrix) -> Result<Self> {
        lattice.check_dense()?;
        let dp = lattice.physical_dim();
        if rho.shape() != (dp, dp) {
            return Err(Error::DimensionMismatch { expected: dp, got: rho.nrows() });
        }
        let r = lattice.register_dim();
        let mut out = Matrix::zeros(lattice.dim(), lattice.dim());
        for i in 0..dp {
            for j in 0..dp {
                out[(i * r, j * r)] = rho[(i, j)];
            }
        }
        Ok(DilatedState::Mixed(out))
    }

    pub fn apply(&mut self, op: &LocalOp, lattice: &SpacetimeLattice) {
        let dims = lattice.dims();
        match self {
            DilatedState::Pure(psi) => apply(&op.op, psi, &dims, &op.factors),
            DilatedState::Mixed(rho) => {
                let u = embed(&op.op, &dims, &op.factors);
                *rho = &u * &*rho * u.adjoint();
            }
        }
    }

    pub fn apply_all(&mut self, ops: &[LocalOp], lattice: &SpacetimeLattice) {
        for op in ops {
            self.apply(op, lattice);
        }
    }

    pub fn density(&self) -> Matrix {
        match self {
            DilatedState::Pure(psi) => psi * psi.adjoint(),
            DilatedState::Mixed(rho) => rho.clone(),
        }
    }

    /// Reduced state on the listed factors.
    pub fn reduce(&self, lattice: &SpacetimeLattice, keep: &[usize]) -> Matrix {
        let dims = lattice.dims();
        match self {
            DilatedState::Pure(psi) => reduce_pure(psi, &dims, keep),
            DilatedState::Mixed(rho) => reduce_mixed(rho, &dims, keep),
        }
    }

    /// Outcome-averaged physical density matrix (registers traced out).
    pub fn physical(&self, lattice: &SpacetimeLattice) -> Matrix {
        let keep: Vec<usize> = (0..lattice.n).collect();
        self.reduce(lattice, &keep)
    }
}

fn matches(x: usize, dims: &[usize], assignment: &[(usize, usize)], n: usize) -> bool {
    let d = split(x, dims);
    assignment.iter().all(|&(r, m)| d[n + r] == m)
}

fn check_assignment(lattice: &SpacetimeLattice, assignment: &[(usize, usize)]) -> Result<()> {
    for &(r, m) in assignment {
        let f = lattice.factor(r)?;
        if m >= lattice.dims()[f] {
            return Err(Error::IndexOutOfRange { index: m, q: lattice.dims()[f] });
        }
    }
    Ok(())
}

/// Probability of the register outcomes `assignment = [(register, value)]`.
pub fn outcome_probability(state: &DilatedState, lattice: &SpacetimeLattice, assignment: &[(usize, usize)]) -> Result<f64> {
    check_assignment(lattice, assignment)?;
    let dims = lattice.dims();
    let n = lattice.n;
    Ok(match state {
        DilatedState::Pure(psi) => psi
            .iter()
            .enumerate()
            .filter(|(x, _)| matches(*x, &dims, assignment, n))
            .map(|(_, v)| v.norm_sqr())
            .sum(),
        DilatedState::Mixed(rho) => (0..rho.nrows())
            .filter(|&x| matches(x, &dims, assignment, n))
            .map(|x| rho[(x, x)].re)
            .sum(),
    })
}

/// Normalized physical state conditioned on the register outcomes, with its probability.
pub fn project_trajectory(state: &DilatedState, lattice: &SpacetimeLattice, assignment: &[(usize, usize)]) -> Result<(f64, Matrix)> {
    let p = outcome_probability(state, lattice, assignment)?;
    if p < IMPOSSIBLE {
        return Err(Error::ImpossibleOutcome);
    }
    let dims = lattice.dims();
    let n = lattice.n;
    let projected = match state {
        DilatedState::Pure(psi) => {
            let v = DVector::from_fn(psi.len(), |x, _| if matches(x, &dims, assignment, n) { psi[x] } else { C64::new(0.0, 0.0) });
            DilatedState::Pure(v)
        }
        DilatedState::Mixed(rho) => {
            let keep: Vec<bool> = (0..rho.nrows()).map(|x| matches(x, &dims, assignment, n)).collect();
            DilatedState::Mixed(Matrix::from_fn(rho.nrows(), rho.ncols(), |r, c| {
                if keep[r] && keep[c] {
                    rho[(r, c)]
                } else {
                    C64::new(0.0, 0.0)
                }
            }))
        }
    };
    let rho = projected.physical(lattice) / C64::new(p, 0.0);
    Ok((p, rho))
}

/// Sum over every outcome of the listed registers of p(m) rho_m; equals the reduced physical state.
pub fn average_outcomes(state: &DilatedState, lattice: &SpacetimeLattice, registers: &[usize]) -> Result<Matrix> {
    let dims: Vec<usize> = registers.iter().map(|&r| lattice.factor(r).map(|f| lattice.dims()[f])).collect::<Result<_>>()?;
    let count: usize = dims.iter().product();
    let st = strides(&dims);
    let dp = lattice.physical_dim();
    let mut acc = Matrix::zeros(dp, dp);
    for k in 0..count {
        let assignment: Vec<(usize, usize)> = registers.iter().enumerate().map(|(i, &r)| (r, (k / st[i]) % dims[i])).collect();
        match project_trajectory(state, lattice, &assignment) {
            Ok((p, rho)) => acc += rho * C64::new(p, 0.0),
            Err(Error::ImpossibleOutcome) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(acc)
}

/// <O> for an operator on the listed factors.
pub fn dilated_expval(state: &DilatedState, lattice: &SpacetimeLattice, op: &Matrix, factors: &[usize]) -> C64 {
    let rho = state.reduce(lattice, factors);
    (rho * op).trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilated::gates::{measurement_local, BlockGateSpec, MeasurementSpec};
    use crate::rng::stream;

    #[test]
    fn born_rule_and_average() {
        let l = SpacetimeLattice::with_slices(2, 2, &[0, 1], 1, 2).unwrap();
        let mut r = stream(3, 0);
        let phys = DVector::from_fn(4, |i, _| C64::new(1.0 + i as f64, 0.3 * i as f64)).normalize();
        let mut s = DilatedState::pure_product(&l, &phys).unwrap();
        let g = BlockGateSpec::generic(2, vec![0, 1]).sample(&mut r);
        s.apply(&g.local().unwrap(), &l);
        let before = s.physical(&l);
        for j in 0..2 {
            let m = MeasurementSpec::pauli(vec![j], "Z", j).unwrap();
            s.apply(&measurement_local(&m, &l).unwrap(), &l);
        }
        let p = outcome_probability(&s, &l, &[(0, 1), (1, 0)]).unwrap();
        assert!((p - before[(2, 2)].re).abs() < 1e-12);
        let avg = average_outcomes(&s, &l, &[0, 1]).unwrap();
        let deph = Matrix::from_fn(4, 4, |a, b| if a == b { before[(a, a)] } else { C64::new(0.0, 0.0) });
        assert!((avg - &deph).norm() < 1e-12);
        assert!((s.physical(&l) - deph).norm() < 1e-12);
        let (_, rho) = project_trajectory(&s, &l, &[(0, 1), (1, 0)]).unwrap();
        assert!((rho[(2, 2)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn impossible_outcome() {
        let l = SpacetimeLattice::with_slices(1, 2, &[0], 1, 2).unwrap();
        let phys = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let mut s = DilatedState::pure_product(&l, &phys).unwrap();
        let m = MeasurementSpec::pauli(vec![0], "Z", 0).unwrap();
        s.apply(&measurement_local(&m, &l).unwrap(), &l);
        assert!(matches!(project_trajectory(&s, &l, &[(0, 1)]), Err(Error::ImpossibleOutcome)));
        assert!(project_trajectory(&s, &l, &[(3, 0)]).is_err());
    }

    #[test]
    fn pure_and_mixed_agree() {
        let l = SpacetimeLattice::with_slices(2, 2, &[1], 1, 2).unwrap();
        let mut r = stream(5, 0);
        let phys = DVector::from_fn(4, |i, _| C64::new(0.5, 0.1 * i as f64)).normalize();
        let mut a = DilatedState::pure_product(&l, &phys).unwrap();
        let mut b = DilatedState::mixed_product(&l, &(&phys * phys.adjoint())).unwrap();
        let ops = vec![
            BlockGateSpec::u1(2, vec![0, 1]).sample(&mut r).local().unwrap(),
            measurement_local(&MeasurementSpec::pauli(vec![1], "X", 0).unwrap(), &l).unwrap(),
        ];
        a.apply_all(&ops, &l);
        b.apply_all(&ops, &l);
        assert!((a.density() - b.density()).norm() < 1e-12);
        let z = crate::dilated::gates::pauli_matrix('Z').unwrap();
        let e1 = dilated_expval(&a, &l, &z, &[0]);
        let e2 = dilated_expval(&b, &l, &z, &[0]);
        assert!((e1 - e2).norm() < 1e-12);
    }
}
