//! Spectral form factor of unitary and hybrid Floquet circuits.
//!
//! Dense variants power the dilated Floquet operator directly. The
//! postselected form factor is tr_ss(A A^dag) / D_ss with A = tr_ph F^t,
//! i.e. the register loop is normalized by the register dimension so that a
//! circuit without registers reduces to |tr F^t|^2.

use std::io::Write;

use nalgebra::DVector;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dilated::{
    build_floquet, embed, BlockGateSpec, Layer, MeasurementSpec, Register, SpacetimeLattice,
};
use crate::dilated::tensor::{reduce_mixed, total};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::rng::{stream, Rng};
use crate::weyl::{Matrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SffVariant {
    Unitary,
    Postselected,
    Reset,
    Transition,
    StateDependent,
    /// Non-physical isometric candidate, diagnostics only.
    IsometricIn,
}

impl SffVariant {
    pub fn name(self) -> &'static str {
        match self {
            SffVariant::Unitary => "unitary",
            SffVariant::Postselected => "postselected",
            SffVariant::Reset => "reset",
            SffVariant::Transition => "transition",
            SffVariant::StateDependent => "state-dependent",
            SffVariant::IsometricIn => "isometric-in",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SffCurve {
    pub variant: SffVariant,
    pub times: Vec<u32>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
}

impl SffCurve {
    pub fn at(&self, t: u32) -> Option<(f64, f64)> {
        self.times.iter().position(|&x| x == t).map(|i| (self.values[i], self.errors[i]))
    }

    /// Columns variant, t, K_mean, K_stderr, realizations, seed.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["variant", "t", "K_mean", "K_stderr", "realizations", "seed"])?;
        for i in 0..self.times.len() {
            wr.write_record([
                self.variant.name().to_string(),
                self.times[i].to_string(),
                format!("{:.12e}", self.values[i]),
                format!("{:.12e}", self.errors[i]),
                self.realizations.to_string(),
                self.seed.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Earliest t after which |K / K_CUE - 1| < 0.2 holds at every later point.
    pub fn thouless_time(&self, dim: usize) -> Option<u32> {
        let mut found = None;
        for (i, &t) in self.times.iter().enumerate().rev() {
            if t == 0 {
                break;
            }
            let cue = (t as f64).min(dim as f64);
            if (self.values[i] / cue - 1.0).abs() < 0.2 {
                found = Some(t);
            } else {
                break;
            }
        }
        found
    }
}

/// Mean and standard error over independent realizations, reduced in index order.
pub fn ensemble_stats(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let len = samples.first().map_or(0, |s| s.len());
    let mut mean = vec![0.0; len];
    let mut se = vec![0.0; len];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    if n > 1 {
        for s in samples {
            for ((v, x), m) in se.iter_mut().zip(s).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        for v in &mut se {
            *v = (*v / ((n - 1) as f64) / n as f64).sqrt();
        }
    }
    (mean, se)
}

fn ensemble(
    variant: SffVariant,
    t_max: u32,
    realizations: usize,
    seed: u64,
    workers: usize,
    f: impl Fn(&mut Rng) -> Result<Vec<f64>> + Sync + Send,
) -> Result<SffCurve> {
    let runs = map_indexed(realizations, workers, |i| {
        let mut rng = stream(seed, i as u64);
        f(&mut rng)
    });
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    let (values, errors) = ensemble_stats(&runs);
    Ok(SffCurve { variant, times: (0..=t_max).collect(), values, errors, realizations, seed })
}

fn check_unitary(f: &Matrix) -> Result<()> {
    let err = crate::dilated::unitarity_error(f);
    if err > 1e-8 {
        return Err(Error::InvalidParameter(format!("Floquet operator is not unitary (error {err:.2e})")));
    }
    Ok(())
}

/// Eigenvalues of a unitary via the complex Schur form.
pub fn eigenphases(f: &Matrix) -> Result<Vec<f64>> {
    let ev = f
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::InvalidParameter("Schur form did not converge".into()))?;
    Ok(ev.iter().map(|z| z.arg()).collect())
}

/// |tr F^t|^2 for t = 0..=t_max from the eigenphases.
pub fn unitary_values(f: &Matrix, t_max: u32) -> Result<Vec<f64>> {
    check_unitary(f)?;
    let th = eigenphases(f)?;
    Ok((0..=t_max)
        .map(|t| {
            let s: C64 = th.iter().map(|&x| C64::from_polar(1.0, x * t as f64)).sum();
            s.norm_sqr()
        })
        .collect())
}

/// Single-realization SFF of a unitary Floquet operator.
pub fn sff_unitary(f: &Matrix, t_max: u32) -> Result<SffCurve> {
    let values = unitary_values(f, t_max)?;
    Ok(SffCurve {
        variant: SffVariant::Unitary,
        times: (0..=t_max).collect(),
        errors: vec![0.0; values.len()],
        values,
        realizations: 1,
        seed: 0,
    })
}

/// Ensemble SFF of a sampled unitary.
pub fn sff_unitary_ensemble(
    sample: impl Fn(&mut Rng) -> Matrix + Sync + Send,
    t_max: u32,
    realizations: usize,
    seed: u64,
    workers: usize,
) -> Result<SffCurve> {
    ensemble(SffVariant::Unitary, t_max, realizations, seed, workers, |rng| unitary_values(&sample(rng), t_max))
}

/// A hybrid Floquet period: layers with unsampled gates on a fixed spacetime lattice.
#[derive(Clone, Debug)]
pub struct HybridFloquetSpec {
    pub lattice: SpacetimeLattice,
    pub layers: Vec<Layer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateFamily {
    Generic,
    U1,
    Ising,
    East,
}

impl GateFamily {
    pub fn block(self, q: usize, cluster: Vec<usize>) -> Result<BlockGateSpec> {
        match self {
            GateFamily::Generic => Ok(BlockGateSpec::generic(q, cluster)),
            GateFamily::U1 => Ok(BlockGateSpec::u1(q, cluster)),
            GateFamily::Ising if q == 2 => Ok(BlockGateSpec::ising(cluster)),
            GateFamily::East if q == 2 => BlockGateSpec::east(cluster),
            _ => Err(Error::InvalidParameter("ising and east gates need q = 2".into())),
        }
    }
}

/// Open-boundary brickwork gate layers on n sites: bonds (0,1),(2,3).. then (1,2),(3,4)..
pub fn brickwork_layers(n: usize, q: usize, family: GateFamily) -> Result<Vec<Layer>> {
    let mut layers = Vec::new();
    for parity in 0..2 {
        let gates: Vec<BlockGateSpec> = (parity..n.saturating_sub(1))
            .step_by(2)
            .map(|j| family.block(q, vec![j, j + 1]))
            .collect::<Result<_>>()?;
        if !gates.is_empty() {
            layers.push(Layer::Gates(gates));
        }
    }
    Ok(layers)
}

impl HybridFloquetSpec {
    /// Brickwork period optionally followed by a W-basis measurement of every site
    /// into its own q-level register.
    pub fn brickwork(n: usize, q: usize, family: GateFamily, measure: bool) -> Result<Self> {
        let mut layers = brickwork_layers(n, q, family)?;
        let lattice = if measure {
            let labels: Vec<usize> = (0..q).collect();
            let ms = (0..n).map(|j| MeasurementSpec::z_basis(q, vec![j], &labels, j)).collect::<Result<_>>()?;
            layers.push(Layer::Measure(ms));
            SpacetimeLattice::new(n, q, (0..n).map(|j| Register { site: j, tau: 1, levels: q }).collect())?
        } else {
            SpacetimeLattice::physical(n, q)?
        };
        Ok(HybridFloquetSpec { lattice, layers })
    }

    pub fn has_registers(&self) -> bool {
        !self.lattice.registers.is_empty()
    }

    /// Same period with the register content removed (gamma = 0 counterpart).
    pub fn without_measurements(&self) -> Self {
        let layers = self.layers.iter().filter(|l| matches!(l, Layer::Gates(_))).cloned().collect();
        HybridFloquetSpec { lattice: self.lattice.without(&(0..self.lattice.registers.len()).collect::<Vec<_>>()), layers }
    }

    /// Layers with fresh Haar unitaries in every gate.
    pub fn realize(&self, rng: &mut Rng) -> Vec<Layer> {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Gates(gs) => Layer::Gates(gs.iter().map(|g| g.sample(rng)).collect()),
                other => other.clone(),
            })
            .collect()
    }

    pub fn floquet(&self, rng: &mut Rng) -> Result<Matrix> {
        build_floquet(&self.realize(rng), &self.lattice)
    }

    /// Unitary part of one realization (measurement layers dropped), on the physical space.
    pub fn evolution(&self, layers: &[Layer]) -> Result<Matrix> {
        let phys = SpacetimeLattice::physical(self.lattice.n, self.lattice.q)?;
        let gates: Vec<Layer> = layers.iter().filter(|l| matches!(l, Layer::Gates(_))).cloned().collect();
        build_floquet(&gates, &phys)
    }
}

/// A = tr_ph F^t as a D_ss x D_ss matrix.
fn physical_trace(f: &Matrix, lattice: &SpacetimeLattice) -> Matrix {
    let dims = lattice.dims();
    let keep: Vec<usize> = (lattice.n..dims.len()).collect();
    reduce_mixed(f, &dims, &keep)
}

fn postselected_values(f: &Matrix, lattice: &SpacetimeLattice, t_max: u32) -> Result<Vec<f64>> {
    if lattice.registers.is_empty() {
        return unitary_values(f, t_max);
    }
    check_unitary(f)?;
    let dss = lattice.register_dim() as f64;
    let d = f.nrows();
    let mut p = Matrix::identity(d, d);
    let mut out = Vec::with_capacity(t_max as usize + 1);
    for t in 0..=t_max {
        if t > 0 {
            p = f * p;
        }
        let a = physical_trace(&p, lattice);
        out.push(a.iter().map(|z| z.norm_sqr()).sum::<f64>() / dss);
    }
    Ok(out)
}

/// Postselected (swap-contracted) SFF of a hybrid Floquet circuit.
pub fn sff_postselected(spec: &HybridFloquetSpec, t_max: u32, realizations: usize, seed: u64, workers: usize) -> Result<SffCurve> {
    spec.lattice.check_dense()?;
    if !spec.has_registers() {
        let mut c = ensemble(SffVariant::Unitary, t_max, realizations, seed, workers, |rng| {
            unitary_values(&spec.floquet(rng)?, t_max)
        })?;
        c.variant = SffVariant::Postselected;
        return Ok(c);
    }
    ensemble(SffVariant::Postselected, t_max, realizations, seed, workers, |rng| {
        postselected_values(&spec.floquet(rng)?, &spec.lattice, t_max)
    })
}

/// Reset before every measurement: F_reset = M (I (x) R) W with R = sum_m |0><m|.
pub fn reset_floquet(spec: &HybridFloquetSpec, layers: &[Layer]) -> Result<Matrix> {
    let l = &spec.lattice;
    l.check_dense()?;
    let d = l.dim();
    let mut f = Matrix::identity(d, d);
    for layer in layers {
        if let Layer::Measure(ms) = layer {
            for m in ms {
                let levels = l.registers[m.register].levels;
                let mut r = Matrix::zeros(levels, levels);
                for x in 0..levels {
                    r[(0, x)] = C64::new(1.0, 0.0);
                }
                f = embed(&r, &l.dims(), &[l.factor(m.register)?]) * f;
            }
        }
        f = build_floquet(std::slice::from_ref(layer), l)? * f;
    }
    Ok(f)
}

fn trace_power_values(f: &Matrix, t_max: u32) -> Vec<f64> {
    let d = f.nrows();
    let mut p = Matrix::identity(d, d);
    (0..=t_max)
        .map(|t| {
            if t > 0 {
                p = f * &p;
            }
            p.trace().norm_sqr()
        })
        .collect()
}

pub fn sff_reset(spec: &HybridFloquetSpec, t_max: u32, realizations: usize, seed: u64, workers: usize) -> Result<SffCurve> {
    ensemble(SffVariant::Reset, t_max, realizations, seed, workers, |rng| {
        let layers = spec.realize(rng);
        Ok(trace_power_values(&reset_floquet(spec, &layers)?, t_max))
    })
}

/// D^2 (1/D_ss) sum_{m,n} |<m| tr_ph[(rho0 (x) I) F^t] |n>|^2.
pub fn sff_state_dependent(
    rho0: &Matrix,
    spec: &HybridFloquetSpec,
    t_max: u32,
    realizations: usize,
    seed: u64,
    workers: usize,
) -> Result<SffCurve> {
    let l = &spec.lattice;
    l.check_dense()?;
    let dp = l.physical_dim();
    if rho0.shape() != (dp, dp) {
        return Err(Error::DimensionMismatch { expected: dp, got: rho0.nrows() });
    }
    if (rho0.trace() - C64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::InvalidParameter("initial state must have unit trace".into()));
    }
    let r = embed(rho0, &l.dims(), &(0..l.n).collect::<Vec<_>>());
    let dss = l.register_dim() as f64;
    let d2 = (dp * dp) as f64;
    ensemble(SffVariant::StateDependent, t_max, realizations, seed, workers, |rng| {
        let f = spec.floquet(rng)?;
        check_unitary(&f)?;
        let d = f.nrows();
        let mut p = Matrix::identity(d, d);
        let mut out = Vec::new();
        for t in 0..=t_max {
            if t > 0 {
                p = &f * p;
            }
            let a = physical_trace(&(&r * &p), l);
            out.push(d2 * a.iter().map(|z| z.norm_sqr()).sum::<f64>() / dss);
        }
        Ok(out)
    })
}

/// Diagnostic: tr[(Delta o W)^t] on the doubled physical space, a fresh register per period.
pub fn sff_isometric_in(spec: &HybridFloquetSpec, t_max: u32, realizations: usize, seed: u64, workers: usize) -> Result<SffCurve> {
    let l = &spec.lattice;
    let dp = l.physical_dim();
    ensemble(SffVariant::IsometricIn, t_max, realizations, seed, workers, |rng| {
        let layers = spec.realize(rng);
        let w = spec.evolution(&layers)?;
        let mut sup = w.kronecker(&w.conjugate());
        for layer in &layers {
            if let Layer::Measure(ms) = layer {
                for m in ms {
                    let mut delta = Matrix::zeros(dp * dp, dp * dp);
                    for p in &m.projectors {
                        let pf = embed(p, &vec![l.q; l.n], &m.cluster);
                        delta += pf.kronecker(&pf.conjugate());
                    }
                    sup = delta * sup;
                }
            }
        }
        let n = sup.nrows();
        let mut p = Matrix::identity(n, n);
        Ok((0..=t_max)
            .map(|t| {
                if t > 0 {
                    p = &sup * &p;
                }
                p.trace().re
            })
            .collect())
    })
}

/// State-space SFF gate: sum_alpha (1/n_alpha) sum_{a,a'} |a><a'|, frozen blocks as identity.
pub fn sff_gate(spec: &BlockGateSpec) -> Vec<Vec<BigRational>> {
    let d = spec.local_dim();
    let mut g = vec![vec![BigRational::zero(); d]; d];
    for (b, &frozen) in spec.blocks.iter().zip(&spec.frozen) {
        if frozen {
            for &a in b {
                g[a][a] = BigRational::one();
            }
        } else {
            let w = BigRational::new(BigInt::one(), BigInt::from(b.len()));
            for &a in b {
                for &a2 in b {
                    g[a][a2] = w.clone();
                }
            }
        }
    }
    g
}

/// Evolution-only period for the state-space transition matrix.
#[derive(Clone, Debug)]
pub struct SffCircuit {
    pub n: usize,
    pub q: usize,
    pub layers: Vec<Vec<BlockGateSpec>>,
}

impl SffCircuit {
    pub fn brickwork(n: usize, q: usize, family: GateFamily) -> Result<Self> {
        let layers = brickwork_layers(n, q, family)?
            .into_iter()
            .map(|l| match l {
                Layer::Gates(g) => g,
                _ => unreachable!(),
            })
            .collect();
        Ok(SffCircuit { n, q, layers })
    }

    /// Exact q^N x q^N transfer matrix, later layers on the left.
    pub fn transfer_exact(&self) -> Result<Vec<Vec<BigRational>>> {
        let dims = vec![self.q; self.n];
        let d = total(&dims);
        if d > 1 << 12 {
            return Err(Error::BudgetExceeded { dim: d, budget: 1 << 12 });
        }
        let mut t = identity_rat(d);
        for layer in &self.layers {
            let mut lt = identity_rat(d);
            for g in layer {
                if g.q != self.q || g.cluster.iter().any(|&j| j >= self.n) {
                    return Err(Error::Incompatible("gate does not fit the circuit".into()));
                }
                lt = matmul_rat(&embed_rat(&sff_gate(g), &dims, &g.cluster), &lt);
            }
            t = matmul_rat(&lt, &t);
        }
        Ok(t)
    }

    pub fn transfer(&self) -> Result<Matrix> {
        let t = self.transfer_exact()?;
        let d = t.len();
        Ok(Matrix::from_fn(d, d, |r, c| C64::new(rat_f64(&t[r][c]), 0.0)))
    }
}

fn rat_f64(x: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

fn identity_rat(d: usize) -> Vec<Vec<BigRational>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect()
}

fn matmul_rat(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let d = a.len();
    let mut out = vec![vec![BigRational::zero(); d]; d];
    for i in 0..d {
        for k in 0..d {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..d {
                if !b[k][j].is_zero() {
                    out[i][j] += &a[i][k] * &b[k][j];
                }
            }
        }
    }
    out
}

fn embed_rat(g: &[Vec<BigRational>], dims: &[usize], targets: &[usize]) -> Vec<Vec<BigRational>> {
    let d = total(dims);
    let k = g.len();
    let pattern = Matrix::from_fn(k, k, |r, c| C64::new((r * k + c + 1) as f64, 0.0));
    let e = embed(&pattern, dims, targets);
    (0..d)
        .map(|r| {
            (0..d)
                .map(|c| {
                    let v = e[(r, c)].re as usize;
                    if v == 0 {
                        BigRational::zero()
                    } else {
                        g[(v - 1) / k][(v - 1) % k].clone()
                    }
                })
                .collect()
        })
        .collect()
}

/// K(t) = t tr(T^t) in exact arithmetic, t = 0..=t_max (K(0) = 0 by convention).
pub fn sff_transition_exact(circuit: &SffCircuit, t_max: u32) -> Result<Vec<BigRational>> {
    let t = circuit.transfer_exact()?;
    let d = t.len();
    let mut p = identity_rat(d);
    let mut out = vec![BigRational::zero()];
    for step in 1..=t_max {
        p = matmul_rat(&t, &p);
        let tr: BigRational = (0..d).map(|i| p[i][i].clone()).fold(BigRational::zero(), |a, b| a + b);
        out.push(tr * BigRational::from_integer(BigInt::from(step)));
    }
    Ok(out)
}

/// Floating-point version of the transfer-matrix SFF.
pub fn sff_transition(circuit: &SffCircuit, t_max: u32) -> Result<SffCurve> {
    let t = circuit.transfer()?;
    let d = t.nrows();
    let mut p = Matrix::identity(d, d);
    let mut values = vec![0.0];
    for step in 1..=t_max {
        p = &t * p;
        values.push(step as f64 * p.trace().re);
    }
    Ok(SffCurve {
        variant: SffVariant::Transition,
        times: (0..=t_max).collect(),
        errors: vec![0.0; values.len()],
        values,
        realizations: 0,
        seed: 0,
    })
}

/// CUE ramp min(t, D).
pub fn k_cue(t: u32, dim: usize) -> f64 {
    (t as f64).min(dim as f64)
}

/// Diagonal Floquet operator with i.i.d. uniform phases.
pub fn random_diagonal(dim: usize, rng: &mut Rng) -> Matrix {
    crate::dilated::random_phases(dim, rng)
}

pub fn pure_state_density(psi: &DVector<C64>) -> Matrix {
    psi * psi.adjoint()
}
