//! Finite-size scaling of defect-density curves.
//!
//! Quality metric: all rescaled points are sorted by x and cut into
//! equal-population bins. Every curve whose x range covers a bin's median x is
//! linearly interpolated there; the bin contributes var(y) / mean(y^2) over
//! those curves. Bins covered by fewer than two curves are skipped and the
//! quality is the mean over the remaining bins (0 if none remain).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::stochastic::DensityCurve;

pub const DEFAULT_BINS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseParams {
    pub gamma_c: f64,
    pub delta: f64,
    pub nu_par: f64,
    /// Only enters through t^{1/z}/L, which is constant at a fixed t/L ratio.
    pub z: f64,
}

impl Default for CollapseParams {
    fn default() -> Self {
        CollapseParams { gamma_c: 0.038, delta: 0.159, nu_par: 1.73, z: 1.58 }
    }
}

impl CollapseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.nu_par > 0.0 && self.z > 0.0 && self.gamma_c >= 0.0) {
            return Err(Error::InvalidParameter("collapse parameters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum CollapseMode {
    /// One curve per L over the gamma grid, read at t = ratio * L; x = (g - g_c) L^{1/nu}.
    FixedTimeRatio { ratio: f64 },
    /// One curve per input curve over t in [t_min, t_max]; x = (g - g_c) t^{1/nu}.
    FixedSize { t_min: u32, t_max: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledCurve {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub err: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub params: CollapseParams,
    pub curves: Vec<RescaledCurve>,
    pub bins: usize,
}

impl CollapseResult {
    pub fn quality(&self) -> f64 {
        collapse_quality(self)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["curve", "x", "y", "y_err"])?;
        for c in &self.curves {
            for i in 0..c.x.len() {
                wr.write_record([c.label.clone(), format!("{:.12e}", c.x[i]), format!("{:.12e}", c.y[i]), format!("{:.12e}", c.err[i])])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Curves from arbitrary (x, y, err) transforms of each curve's points.
pub fn rescale_with(
    curves: &[DensityCurve],
    params: CollapseParams,
    f: impl Fn(&DensityCurve, u32, f64, f64) -> Option<(f64, f64, f64)>,
) -> CollapseResult {
    let out = curves
        .iter()
        .map(|c| {
            let mut r = RescaledCurve { label: label(c), x: vec![], y: vec![], err: vec![] };
            for i in 0..c.times.len() {
                if let Some((x, y, e)) = f(c, c.times[i], c.n_d[i], c.stderr[i]) {
                    r.x.push(x);
                    r.y.push(y);
                    r.err.push(e);
                }
            }
            r
        })
        .collect();
    CollapseResult { params, curves: out, bins: DEFAULT_BINS }
}

fn label(c: &DensityCurve) -> String {
    format!("{}_L{}_g{}", c.params.model.name(), c.params.l, c.params.gamma)
}

pub fn rescale(curves: &[DensityCurve], p: CollapseParams, mode: CollapseMode) -> Result<CollapseResult> {
    p.validate()?;
    if let Some(c) = curves.first() {
        if curves.iter().any(|d| d.params.model != c.params.model || d.params.seed_site != c.params.seed_site) {
            return Err(Error::Incompatible("curves mix models or seed sites".into()));
        }
    }
    let inv_nu = 1.0 / p.nu_par;
    match mode {
        CollapseMode::FixedSize { t_min, t_max } => Ok(rescale_with(curves, p, |c, t, n, e| {
            if t < t_min.max(1) || t > t_max {
                return None;
            }
            let tf = t as f64;
            let s = tf.powf(p.delta);
            Some(((c.params.gamma - p.gamma_c) * tf.powf(inv_nu), n * s, e * s))
        })),
        CollapseMode::FixedTimeRatio { ratio } => {
            let mut ls: Vec<usize> = curves.iter().map(|c| c.params.l).collect();
            ls.sort_unstable();
            ls.dedup();
            let mut out = Vec::new();
            for l in ls {
                let t = (ratio * l as f64).round() as u32;
                let mut group: Vec<&DensityCurve> = curves.iter().filter(|c| c.params.l == l).collect();
                group.sort_by(|a, b| a.params.gamma.total_cmp(&b.params.gamma));
                let mut r = RescaledCurve { label: format!("L{l}_t{t}"), x: vec![], y: vec![], err: vec![] };
                let s = (t as f64).powf(p.delta);
                for c in group {
                    let (n, e) = c.at(t).ok_or_else(|| Error::InvalidParameter(format!("curve L={l} lacks t={t}")))?;
                    r.x.push((c.params.gamma - p.gamma_c) * (l as f64).powf(inv_nu));
                    r.y.push(n * s);
                    r.err.push(e * s);
                }
                out.push(r);
            }
            Ok(CollapseResult { params: p, curves: out, bins: DEFAULT_BINS })
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    if n == 1 {
        return Some(ys[0]);
    }
    let i = xs.partition_point(|&v| v < x);
    if i == 0 {
        return Some(ys[0]);
    }
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i.min(n - 1)], ys[i - 1], ys[i.min(n - 1)]);
    if x1 == x0 {
        return Some(0.5 * (y0 + y1));
    }
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

pub fn collapse_quality(r: &CollapseResult) -> f64 {
    let bins = r.bins.max(1);
    let sorted: Vec<(Vec<f64>, Vec<f64>)> = r
        .curves
        .iter()
        .map(|c| {
            let mut pts: Vec<(f64, f64)> = c.x.iter().copied().zip(c.y.iter().copied()).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts.into_iter().unzip()
        })
        .collect();
    let mut all: Vec<f64> = sorted.iter().flat_map(|(x, _)| x.iter().copied()).collect();
    all.sort_by(|a, b| a.total_cmp(b));
    let n = all.len();
    if n == 0 || r.curves.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for b in 0..bins.min(n) {
        let lo = b * n / bins.min(n);
        let hi = (b + 1) * n / bins.min(n);
        if hi <= lo {
            continue;
        }
        let slice = &all[lo..hi];
        let m = slice.len();
        let median = if m % 2 == 1 { slice[m / 2] } else { 0.5 * (slice[m / 2 - 1] + slice[m / 2]) };
        let ys: Vec<f64> = sorted.iter().filter_map(|(x, y)| interpolate(x, y, median)).collect();
        if ys.len() < 2 {
            continue;
        }
        let k = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / k;
        let mean_sq = ys.iter().map(|y| y * y).sum::<f64>() / k;
        if mean_sq <= 0.0 {
            continue;
        }
        let var = (mean_sq - mean * mean).max(0.0);
        total += var / mean_sq;
        used += 1;
    }
    if used == 0 {
        0.0
    } else {
        total / used as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaCEstimate {
    pub gamma_c: f64,
    pub quality: f64,
    pub profile: Vec<(f64, f64)>,
}

/// Grid search for the gamma_c minimizing the collapse quality at fixed exponents.
pub fn estimate_gamma_c(
    curves: &[DensityCurve],
    exponents: CollapseParams,
    grid: &[f64],
    mode: CollapseMode,
    workers: usize,
) -> Result<GammaCEstimate> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty gamma_c grid".into()));
    }
    let q = map_indexed(grid.len(), workers, |i| {
        let p = CollapseParams { gamma_c: grid[i], ..exponents };
        rescale(curves, p, mode).map(|r| r.quality())
    });
    let profile: Vec<(f64, f64)> = grid.iter().copied().zip(q.into_iter().collect::<Result<Vec<_>>>()?).collect();
    let (g, best) = profile.iter().copied().fold((f64::NAN, f64::INFINITY), |acc, (g, v)| if v < acc.1 { (g, v) } else { acc });
    Ok(GammaCEstimate { gamma_c: g, quality: best, profile })
}

/// Evenly spaced points from lo to hi inclusive, rounded to 1e-9.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| ((lo + step * i as f64) * 1e9).round() / 1e9).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Covariance of (intercept, slope).
    pub cov: [[f64; 2]; 2],
    pub points: usize,
}

impl LinearFit {
    pub fn slope_se(&self) -> f64 {
        self.cov[1][1].sqrt()
    }
}

/// Ordinary least squares with the residual-variance covariance.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::InvalidParameter("linear fit needs at least three points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("degenerate abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let s2 = rss / (nf - 2.0);
    let var_b = s2 / sxx;
    let var_a = s2 * (1.0 / nf + mx * mx / sxx);
    let cov_ab = -mx * var_b;
    Ok(LinearFit { intercept, slope, cov: [[var_a, cov_ab], [cov_ab, var_b]], points: n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub fit: LinearFit,
    pub window: (u32, u32),
    /// Change of the local log-log slope across the window from a quadratic fit.
    pub slope_drift: f64,
    pub curved: bool,
    pub expected: f64,
}

impl DecayFit {
    pub fn accepted(&self) -> bool {
        !self.curved
    }

    pub fn within(&self, tol: f64) -> bool {
        (self.fit.slope + self.expected).abs() <= tol
    }
}

/// Largest drift of the log-log slope across the window still treated as a power law.
pub const DEFAULT_DRIFT_LIMIT: f64 = 0.25;

/// Log-log fit of n_d(t) over [t_lo, t_hi]; flags curvature by the quadratic drift.
pub fn critical_decay_check(curve: &DensityCurve, window: (u32, u32), delta: f64, drift_limit: f64) -> Result<DecayFit> {
    let (mut x, mut y) = (vec![], vec![]);
    for (i, &t) in curve.times.iter().enumerate() {
        if t >= window.0.max(1) && t <= window.1 && curve.n_d[i] > 0.0 {
            x.push((t as f64).ln());
            y.push(curve.n_d[i].ln());
        }
    }
    if x.len() < 3 {
        let fit = LinearFit { intercept: f64::NAN, slope: f64::NEG_INFINITY, cov: [[f64::NAN; 2]; 2], points: x.len() };
        return Ok(DecayFit { fit, window, slope_drift: f64::INFINITY, curved: true, expected: delta });
    }
    let fit = linear_fit(&x, &y)?;
    let c2 = quadratic_coefficient(&x, &y);
    let span = x[x.len() - 1] - x[0];
    let drift = 2.0 * c2 * span;
    Ok(DecayFit { fit, window, slope_drift: drift, curved: drift.abs() > drift_limit, expected: delta })
}

fn quadratic_coefficient(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let u: Vec<f64> = x.iter().map(|a| a - mx).collect();
    let s = |k: i32| u.iter().map(|a| a.powi(k)).sum::<f64>();
    let (s1, s2, s3, s4) = (s(1), s(2), s(3), s(4));
    let t0: f64 = y.iter().sum();
    let t1: f64 = u.iter().zip(y).map(|(a, b)| a * b).sum();
    let t2: f64 = u.iter().zip(y).map(|(a, b)| a * a * b).sum();
    let m = nalgebra::Matrix3::new(n, s1, s2, s1, s2, s3, s2, s3, s4);
    let v = nalgebra::Vector3::new(t0, t1, t2);
    m.lu().solve(&v).map_or(0.0, |c| c[2])
}

/// Exponential hazard from ln n_d(t) = a + s t: rate = 1 - e^s.
pub fn fit_decay_rate(curve: &DensityCurve, window: (u32, u32)) -> Result<(f64, f64)> {
    let (mut x, mut y) = (vec![], vec![]);
    for (i, &t) in curve.times.iter().enumerate() {
        if t >= window.0 && t <= window.1 && curve.n_d[i] > 0.0 {
            x.push(t as f64);
            y.push(curve.n_d[i].ln());
        }
    }
    let f = linear_fit(&x, &y)?;
    let rate = 1.0 - f.slope.exp();
    Ok((rate, f.slope.exp() * f.slope_se()))
}

/// Largest |a - b| / sqrt(se_a^2 + se_b^2) over shared times (points with zero error on both sides are compared exactly).
pub fn max_deviation_sigmas(a: &DensityCurve, b: &DensityCurve) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &t) in a.times.iter().enumerate() {
        if let Some((nb, eb)) = b.at(t) {
            let se = (a.stderr[i].powi(2) + eb.powi(2)).sqrt();
            let d = (a.n_d[i] - nb).abs();
            let z = if se > 0.0 { d / se } else if d == 0.0 { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::{Model, ProtocolParams};

    fn synthetic(l: usize, gamma: f64, f: impl Fn(f64) -> f64, t_max: u32) -> DensityCurve {
        let times: Vec<u32> = (0..=t_max).collect();
        let n_d: Vec<f64> = times.iter().map(|&t| f(t as f64)).collect();
        DensityCurve {
            params: ProtocolParams::new(Model::East, l, gamma, t_max, 1, 0),
            stderr: vec![0.0; times.len()],
            active: vec![1; times.len()],
            times,
            n_d,
        }
    }

    #[test]
    fn power_law_fit() {
        let c = synthetic(64, 0.038, |t| 0.5 * t.max(1.0).powf(-0.159), 600);
        let fit = critical_decay_check(&c, (32, 512), 0.159, DEFAULT_DRIFT_LIMIT).unwrap();
        assert!((fit.fit.slope + 0.159).abs() < 1e-3);
        assert!(fit.accepted() && fit.within(0.001));
        let e = synthetic(64, 0.08, |t| 0.5 * (-t / 40.0).exp(), 600);
        assert!(!critical_decay_check(&e, (32, 512), 0.159, DEFAULT_DRIFT_LIMIT).unwrap().accepted());
        let dead = synthetic(64, 0.2, |t| if t < 5.0 { 0.5 } else { 0.0 }, 600);
        assert!(!critical_decay_check(&dead, (32, 512), 0.159, DEFAULT_DRIFT_LIMIT).unwrap().accepted());
    }

    #[test]
    fn quality_zero_for_identical_and_single() {
        let scaling = |l: usize, g: f64| synthetic(l, g, move |t| t.max(1.0).powf(-0.159) * (-(g - 0.038) * t.powf(1.0 / 1.73)).exp(), 100);
        let curves: Vec<DensityCurve> = [0.03, 0.035, 0.04, 0.045].iter().map(|&g| scaling(64, g)).collect();
        let p = CollapseParams::default();
        let r = rescale(&curves, p, CollapseMode::FixedSize { t_min: 2, t_max: 100 }).unwrap();
        assert!(r.quality() < 1e-4);
        let worse = rescale(&curves, CollapseParams { delta: 0.3, ..p }, CollapseMode::FixedSize { t_min: 2, t_max: 100 }).unwrap();
        assert!(worse.quality() > 10.0 * r.quality());
        let single = rescale(&curves[..1], p, CollapseMode::FixedSize { t_min: 2, t_max: 100 }).unwrap();
        assert_eq!(single.quality(), 0.0);
        let est = estimate_gamma_c(&curves, p, &linear_grid(0.02, 0.06, 0.001), CollapseMode::FixedSize { t_min: 2, t_max: 100 }, 2).unwrap();
        assert!((est.gamma_c - 0.038).abs() < 1.5e-3);
        assert_eq!(est.profile.len(), 41);
    }

    #[test]
    fn quality_scale_invariant_and_invertible() {
        let curves: Vec<DensityCurve> = [0.03, 0.04].iter().map(|&g| synthetic(32, g, move |t| 0.5 / (1.0 + g * t), 50)).collect();
        let p = CollapseParams { delta: 0.0, gamma_c: 0.03, ..Default::default() };
        let mode = CollapseMode::FixedSize { t_min: 1, t_max: 50 };
        let r = rescale(&curves, p, mode).unwrap();
        assert_eq!(r.curves[0].y, curves[0].n_d[1..].to_vec());
        let mut scaled = r.clone();
        for c in &mut scaled.curves {
            for y in &mut c.y {
                *y *= 7.5;
            }
        }
        assert!((scaled.quality() - r.quality()).abs() < 1e-12);
    }

    #[test]
    fn fixed_ratio_mode() {
        let mk = |l: usize, g: f64| synthetic(l, g, move |t| (t.max(1.0)).powf(-0.159) * (1.0 - (g - 0.038) * 10.0 * (l as f64).powf(1.0 / 1.73)), 2 * l as u32);
        let mut curves = vec![];
        for l in [16, 32, 64] {
            for g in [0.034, 0.036, 0.038, 0.04, 0.042] {
                curves.push(mk(l, g));
            }
        }
        let r = rescale(&curves, CollapseParams::default(), CollapseMode::FixedTimeRatio { ratio: 2.0 }).unwrap();
        assert_eq!(r.curves.len(), 3);
        assert!(r.quality() < 1e-12);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 16);
        let mut short = curves.clone();
        short[0].times.truncate(5);
        assert!(rescale(&short, CollapseParams::default(), CollapseMode::FixedTimeRatio { ratio: 2.0 }).is_err());
    }

    #[test]
    fn exponential_rate() {
        let c = synthetic(64, 0.1, |t| 0.5 * 0.9f64.powf(t), 40);
        let (rate, _) = fit_decay_rate(&c, (0, 40)).unwrap();
        assert!((rate - 0.1).abs() < 1e-12);
        assert_eq!(max_deviation_sigmas(&c, &c), 0.0);
    }
}
