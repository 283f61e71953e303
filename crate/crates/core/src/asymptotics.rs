//! Desk-scale quadrature of the state integrals and the fits of their exponential rates.

use crate::error::{FamedError, Result};
use crate::potential::{h_function, PotentialContext};
use crate::special_fn::{log_phi_b, QuantumParams};
use crate::geometry::ShapeAssignment;
use crate::triangulation::{AngleStructure, OrderedTriangulation};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use num_traits::Zero;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const MAX_DIM: usize = 3;
const KEY_SCALE: f64 = 16_777_216.0;

pub const DEFAULT_HBARS: [f64; 5] = [1.0 / 8.0, 1.0 / 12.0, 1.0 / 16.0, 1.0 / 24.0, 1.0 / 32.0];

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureSpec {
    /// Grid spacing is step_factor * sqrt(hbar).
    pub step_factor: f64,
    /// Truncate where Re S drops by 2 pi hbar * threshold below its maximum.
    pub threshold: f64,
    pub margin: f64,
    /// Fixed half widths per axis; overrides the scan.
    pub half_width: Option<Vec<f64>>,
    /// Contour offset v; defaults to v_alpha.
    pub offset: Option<Vec<f64>>,
    pub hbars: Vec<f64>,
    pub max_tail: f64,
    pub max_points: usize,
    pub directions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            step_factor: 0.3,
            threshold: 40.0,
            margin: 1.2,
            half_width: None,
            offset: None,
            hbars: DEFAULT_HBARS.to_vec(),
            max_tail: 1e-6,
            max_points: 20_000_000,
            directions: 32,
        }
    }
}

impl QuadratureSpec {
    pub fn halved(&self) -> Self {
        QuadratureSpec { step_factor: self.step_factor / 2.0, ..self.clone() }
    }
}

/// Values of log Phi_b keyed by tetrahedron and quantised argument.
#[derive(Debug, Default)]
pub struct PhiCache {
    hbar: f64,
    map: HashMap<(usize, i64, i64), C64>,
    pub evaluations: usize,
}

impl PhiCache {
    pub fn new(hbar: f64) -> Self {
        PhiCache { hbar, map: HashMap::new(), evaluations: 0 }
    }

    fn get(&mut self, k: usize, phi: C64, q: &QuantumParams) -> Result<C64> {
        if q.hbar != self.hbar {
            self.map.clear();
            self.hbar = q.hbar;
        }
        let key = (k, (phi.re * KEY_SCALE).round() as i64, (phi.im * KEY_SCALE).round() as i64);
        if let Some(v) = self.map.get(&key) {
            return Ok(*v);
        }
        let v = log_phi_b(phi / (2.0 * PI * q.hbar.sqrt()), q.b)?;
        self.evaluations += 1;
        self.map.insert(key, v);
        Ok(v)
    }
}

/// Integrand restricted to the affine plane x = base + A u, u real.
struct Plane<'a> {
    ctx: &'a PotentialContext,
    base: Vec<C64>,
    cols: Vec<Vec<f64>>,
    xi: C64,
}

impl<'a> Plane<'a> {
    fn m(&self) -> usize {
        self.cols.len()
    }

    fn point(&self, u: &[f64]) -> Vec<C64> {
        let mut x = self.base.clone();
        for (c, &t) in self.cols.iter().zip(u) {
            for (xl, cl) in x.iter_mut().zip(c) {
                *xl += cl * t;
            }
        }
        x
    }

    fn check_band(&self) -> Result<()> {
        if self.ctx.phi(&self.base).iter().any(|y| !(y.im > -PI && y.im < 0.0)) {
            return Err(FamedError::BandViolation);
        }
        Ok(())
    }

    fn re_s(&self, u: &[f64]) -> Result<f64> {
        Ok(self.ctx.eval_s(&self.point(u), self.xi)?.value.re)
    }

    fn a(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.ctx.dim, self.m(), |l, j| self.cols[j][l])
    }

    /// (Re S, gradient, Hessian) in u.
    fn re_s_full(&self, u: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let v = self.ctx.eval_s(&self.point(u), self.xi)?;
        let a = self.a();
        let g = a.transpose() * v.gradient.map(|c| c.re);
        let h = a.transpose() * v.hessian.map(|c| c.re) * &a;
        Ok((v.value.re, g, h))
    }

    /// Maximum of the concave function Re S on the plane.
    fn maximize(&self) -> Result<Vec<f64>> {
        let m = self.m();
        let mut u = vec![0.0; m];
        if m == 0 {
            return Ok(u);
        }
        for _ in 0..100 {
            let (f, g, h) = self.re_s_full(&u)?;
            if g.amax() < 1e-12 {
                return Ok(u);
            }
            let step = match (-h).cholesky() {
                Some(c) => c.solve(&g),
                None => g.clone(),
            };
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
                if let Ok(ft) = self.re_s(&trial) {
                    if ft >= f - 1e-14 {
                        u = trial;
                        break;
                    }
                }
                t /= 2.0;
                if t < 1e-10 {
                    return Ok(u);
                }
            }
        }
        let (_, g, _) = self.re_s_full(&u)?;
        if g.amax() < 1e-8 {
            Ok(u)
        } else {
            Err(FamedError::NoConvergence { residual: g.amax() })
        }
    }

    fn half_widths(&self, center: &[f64], hbar: f64, spec: &QuadratureSpec) -> Result<Vec<f64>> {
        let m = self.m();
        if let Some(hw) = &spec.half_width {
            if hw.len() != m {
                return Err(FamedError::DimensionMismatch("half_width".into()));
            }
            return Ok(hw.clone());
        }
        let top = self.re_s(center)?;
        let floor = top - 2.0 * PI * hbar * spec.threshold;
        let mut reach = vec![0.0f64; m];
        for dir in directions(m, spec.directions) {
            let mut r = 0.0;
            loop {
                r += 0.25;
                if r > 400.0 {
                    return Err(FamedError::TailBoundExceeded(f64::INFINITY));
                }
                let p: Vec<f64> = center.iter().zip(&dir).map(|(c, d)| c + r * d).collect();
                if self.re_s(&p)? < floor {
                    break;
                }
            }
            for (k, d) in dir.iter().enumerate() {
                reach[k] = reach[k].max(r * d.abs());
            }
        }
        Ok(reach.into_iter().map(|r| (spec.margin * r).max(1.0)).collect())
    }

    fn log_integrand(&self, x: &[C64], q: &QuantumParams, qd: &DMatrix<f64>, lin: &DVector<C64>, cache: &mut PhiCache) -> Result<C64> {
        let y = self.ctx.phi(x);
        let mut quad = C64::zero();
        for i in 0..y.len() {
            for j in 0..y.len() {
                if qd[(i, j)] != 0.0 {
                    quad += y[i] * qd[(i, j)] * y[j];
                }
            }
        }
        let lx: C64 = x.iter().zip(lin.iter()).map(|(a, b)| a * b).sum();
        let mut acc = (-0.5 * I * quad - lx) / (2.0 * PI * q.hbar);
        for (k, &yk) in y.iter().enumerate() {
            acc -= cache.get(k, yk, q)?;
        }
        Ok(acc)
    }
}

fn directions(m: usize, count: usize) -> Vec<Vec<f64>> {
    match m {
        0 => vec![],
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(4))
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count.max(4) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let n = (2 * count).max(16);
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    let mut v = vec![r * t.cos(), r * t.sin(), z];
                    v.truncate(m.max(3));
                    v
                })
                .collect()
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: C64,
    comp: C64,
}

impl Neumaier {
    fn add(&mut self, v: C64) {
        let t = self.sum + v;
        for (s, c, vv, tt) in [(self.sum.re, &mut self.comp.re, v.re, t.re), (self.sum.im, &mut self.comp.im, v.im, t.im)] {
            if s.abs() >= vv.abs() {
                *c += (s - tt) + vv;
            } else {
                *c += (vv - tt) + s;
            }
        }
        self.sum = t;
    }

    fn total(&self) -> C64 {
        self.sum + self.comp
    }
}

/// Trapezoid sum over the plane lattice, as log of the integral over u.
#[derive(Clone, Debug, Serialize)]
pub struct LatticeSum {
    pub log_value: C64,
    /// |coarse - fine| / |fine| against the sublattice of even indices.
    pub coarse_difference: f64,
    /// Boundary-layer mass relative to the integral.
    pub tail: f64,
    pub points: usize,
    pub step: f64,
    pub half_width: Vec<f64>,
    pub center: Vec<f64>,
}

fn lattice_sum(plane: &Plane, q: &QuantumParams, spec: &QuadratureSpec, cache: &mut PhiCache) -> Result<LatticeSum> {
    let ctx = plane.ctx;
    let m = plane.m();
    let qd = {
        let mut qd = ctx.q.clone();
        for k in 0..ctx.n_tet {
            qd[(k, k)] += (ctx.eps[k] - 1.0) / 2.0;
        }
        qd
    };
    let lin = ctx.lin(plane.xi);
    if m == 0 {
        let lv = plane.log_integrand(&plane.base, q, &qd, &lin, cache)?;
        return Ok(LatticeSum { log_value: lv, coarse_difference: 0.0, tail: 0.0, points: 1, step: 0.0, half_width: vec![], center: vec![] });
    }
    let center = plane.maximize()?;
    let hw = plane.half_widths(&center, q.hbar, spec)?;
    let step = spec.step_factor * q.hbar.sqrt();
    let n: Vec<i64> = hw.iter().map(|w| (w / step).ceil() as i64).collect();
    let total: usize = n.iter().map(|&k| (2 * k + 1) as usize).product();
    if total > spec.max_points {
        return Err(FamedError::DimensionTooLarge(m));
    }
    let origin = plane.point(&center);
    let xstep: Vec<Vec<f64>> = plane.cols.iter().map(|c| c.iter().map(|v| v * step).collect()).collect();
    let ref_log = plane.log_integrand(&origin, q, &qd, &lin, cache)?.re;
    let mut fine = Neumaier::default();
    let mut coarse = Neumaier::default();
    let mut boundary = 0.0;
    let mut idx: Vec<i64> = n.iter().map(|k| -k).collect();
    for _ in 0..total {
        let mut x = origin.clone();
        for (t, c) in idx.iter().zip(&xstep) {
            for (xl, cl) in x.iter_mut().zip(c) {
                *xl += cl * (*t as f64);
            }
        }
        let v = (plane.log_integrand(&x, q, &qd, &lin, cache)? - ref_log).exp();
        fine.add(v);
        if idx.iter().all(|t| t % 2 == 0) {
            coarse.add(v);
        }
        if idx.iter().zip(&n).any(|(t, k)| t.abs() == *k) {
            boundary += v.norm();
        }
        for (t, k) in idx.iter_mut().zip(&n) {
            *t += 1;
            if *t > *k {
                *t = -k;
            } else {
                break;
            }
        }
    }
    let hm = step.powi(m as i32);
    let fine_v = fine.total() * hm;
    let coarse_v = coarse.total() * hm * 2f64.powi(m as i32);
    if fine_v.norm() == 0.0 || !fine_v.norm().is_finite() {
        return Err(FamedError::TailBoundExceeded(f64::INFINITY));
    }
    let tail = boundary * hm / fine_v.norm();
    Ok(LatticeSum {
        log_value: fine_v.ln() + ref_log,
        coarse_difference: (fine_v - coarse_v).norm() / fine_v.norm(),
        tail,
        points: total,
        step,
        half_width: hw,
        center,
    })
}

fn check_dim(d: usize) -> Result<()> {
    if d > MAX_DIM {
        Err(FamedError::DimensionTooLarge(d))
    } else {
        Ok(())
    }
}

fn params(hbar: f64) -> Result<QuantumParams> {
    if !(hbar > 0.0) || hbar < 1.0 / 64.0 {
        return Err(FamedError::MalformedInput(format!("hbar {hbar} outside [1/64, 1/4]")));
    }
    QuantumParams::from_hbar(hbar)
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionEstimate {
    pub hbar: f64,
    pub lambda: f64,
    /// log |Z| up to the unresolved overall constant.
    pub log_modulus: f64,
    pub tail_bound: f64,
    pub error_estimate: f64,
    pub offset: Vec<f64>,
    pub lattice: LatticeSum,
    pub phi_evaluations: usize,
}

impl PartitionEstimate {
    pub fn modulus(&self) -> f64 {
        self.log_modulus.exp()
    }
}

fn offset_for(ctx: &PotentialContext, alpha: &AngleStructure, spec: &QuadratureSpec) -> Result<Vec<f64>> {
    let v = spec.offset.clone().unwrap_or_else(|| ctx.v_alpha(alpha));
    if v.len() != ctx.dim {
        return Err(FamedError::DimensionMismatch("offset".into()));
    }
    Ok(v)
}

fn identity_cols(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|j| (0..d).map(|l| if l == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// |Z_hbar(X, alpha)| by tensor trapezoid quadrature on R^d + i v.
pub fn partition_modulus(ctx: &PotentialContext, alpha: &AngleStructure, hbar: f64, spec: &QuadratureSpec) -> Result<PartitionEstimate> {
    let mut cache = PhiCache::new(hbar);
    partition_modulus_cached(ctx, alpha, hbar, spec, &mut cache)
}

pub fn partition_modulus_cached(
    ctx: &PotentialContext,
    alpha: &AngleStructure,
    hbar: f64,
    spec: &QuadratureSpec,
    cache: &mut PhiCache,
) -> Result<PartitionEstimate> {
    check_dim(ctx.dim)?;
    let q = params(hbar)?;
    let t = ctx.triangulation();
    if alpha.angles.len() != ctx.n_tet || !alpha.in_polytope(t, 1e-9) {
        return Err(FamedError::MalformedInput("not an angle structure".into()));
    }
    let lambda = t.angular_holonomy(alpha, &t.longitude);
    let v = offset_for(ctx, alpha, spec)?;
    let plane = Plane { ctx, base: v.iter().map(|&s| C64::new(0.0, s)).collect(), cols: identity_cols(ctx.dim), xi: I * lambda };
    plane.check_band()?;
    let before = cache.evaluations;
    let ls = lattice_sum(&plane, &q, spec, cache)?;
    let d = ctx.dim as f64;
    let log_modulus = ls.log_value.re - d * (2.0 * PI * hbar.sqrt()).ln();
    if ls.tail > spec.max_tail {
        return Err(FamedError::TailBoundExceeded(ls.tail));
    }
    Ok(PartitionEstimate {
        hbar,
        lambda,
        log_modulus,
        tail_bound: ls.tail,
        error_estimate: ls.coarse_difference.max(ls.tail) + 1e-13,
        offset: v,
        phi_evaluations: cache.evaluations - before,
        lattice: ls,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct JonesEstimate {
    pub hbar: f64,
    pub w: C64,
    /// log of the Jones function, including its phase.
    pub log_value: C64,
    pub tail_bound: f64,
    pub error_estimate: f64,
    pub lattice: LatticeSum,
}

impl JonesEstimate {
    pub fn log_modulus(&self) -> f64 {
        self.log_value.re
    }
}

fn jones_plane<'a>(ctx: &'a PotentialContext, w: C64, v: &[f64]) -> Result<Plane<'a>> {
    let iv: Vec<C64> = v.iter().map(|&s| C64::new(0.0, s)).collect();
    let vhat = ctx.xhat(&iv)?;
    let base = ctx.x_from_jones(w, &vhat)?;
    let m = vhat.len();
    let cols = (0..m)
        .map(|j| {
            let mut e = vhat.clone();
            e[j] += 1.0;
            let x = ctx.x_from_jones(w, &e).expect("dimension checked");
            x.iter().zip(&base).map(|(a, b)| (a - b).re).collect()
        })
        .collect();
    Ok(Plane { ctx, base, cols, xi: C64::zero() })
}

fn jones_scale(ctx: &PotentialContext, hbar: f64) -> Result<f64> {
    let c = ctx.c_coeffs.as_ref().ok_or(FamedError::DegeneratePivot)?;
    let j = ctx.jones_pivot.ok_or(FamedError::DegeneratePivot)?;
    Ok(-(ctx.dim as f64) * (2.0 * PI * hbar.sqrt()).ln() - c[j].abs().ln())
}

/// The Jones function at w: the fiber integral over R^{d-1} + i v^ with the 1/|C_1| normalisation.
pub fn jones_integral(ctx: &PotentialContext, hbar: f64, w: C64, spec: &QuadratureSpec, cache: &mut PhiCache) -> Result<JonesEstimate> {
    check_dim(ctx.dim)?;
    let q = params(hbar)?;
    let v = offset_for(ctx, &ctx.alpha0, spec)?;
    let plane = jones_plane(ctx, w, &v)?;
    plane.check_band()?;
    let ls = lattice_sum(&plane, &q, spec, cache)?;
    if ls.tail > spec.max_tail {
        return Err(FamedError::TailBoundExceeded(ls.tail));
    }
    Ok(JonesEstimate {
        hbar,
        w,
        log_value: ls.log_value + jones_scale(ctx, hbar)?,
        tail_bound: ls.tail,
        error_estimate: ls.coarse_difference.max(ls.tail) + 1e-13,
        lattice: ls,
    })
}

pub fn jones_modulus(ctx: &PotentialContext, hbar: f64, w: C64, spec: &QuadratureSpec) -> Result<JonesEstimate> {
    let mut cache = PhiCache::new(hbar);
    jones_integral(ctx, hbar, w, spec, &mut cache)
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticSample {
    pub hbar: f64,
    pub log_modulus: f64,
    /// 2 pi hbar (log|value| - p log hbar).
    pub scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticFit {
    pub samples: Vec<AsymptoticSample>,
    pub power: f64,
    pub slope: f64,
    pub slope_error: f64,
    /// s0 + s1 hbar + s2 hbar^2.
    pub coefficients: [f64; 3],
    /// Extrapolated slope using only hbar <= H, for decreasing H.
    pub slope_by_cutoff: Vec<(f64, f64)>,
    pub prefactor_ratios: Vec<f64>,
    pub prefactor_drift: f64,
    pub reference_rate: Option<f64>,
}

/// Leading behaviour predicted by the saddle point: |value| ~ normalizer hbar^power exp(rate / 2 pi hbar).
#[derive(Clone, Debug, Serialize)]
pub struct SaddlePrediction {
    pub rate: f64,
    pub normalizer: f64,
    pub power: f64,
}

fn quadratic_fit(pts: &[(f64, f64)]) -> [f64; 3] {
    let k = pts.len().min(3);
    let a = DMatrix::from_fn(pts.len(), k, |i, j| pts[i].0.powi(j as i32));
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let sol = (a.transpose() * &a).lu().solve(&(a.transpose() * b)).unwrap_or_else(|| DVector::zeros(k));
    let mut c = [0.0; 3];
    for j in 0..k {
        c[j] = sol[j];
    }
    c
}

pub fn spread(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / mean.abs()
}

/// Fit 2 pi hbar (log|v| - p log hbar) = s0 + s1 hbar + s2 hbar^2 over (hbar, log|v|) samples.
pub fn fit_samples(samples: &[(f64, f64)], power: f64, prediction: Option<&SaddlePrediction>) -> Result<AsymptoticFit> {
    if samples.len() < 4 {
        return Err(FamedError::InsufficientSamples { needed: 4, got: samples.len() });
    }
    let mut s: Vec<AsymptoticSample> = samples
        .iter()
        .map(|&(hbar, lm)| AsymptoticSample { hbar, log_modulus: lm, scaled: 2.0 * PI * hbar * (lm - power * hbar.ln()) })
        .collect();
    s.sort_by(|a, b| b.hbar.partial_cmp(&a.hbar).unwrap());
    let pts: Vec<(f64, f64)> = s.iter().map(|x| (x.hbar, x.scaled)).collect();
    let coefficients = quadratic_fit(&pts);
    let reduced = quadratic_fit(&pts[1..]);
    let slope_error = (coefficients[0] - reduced[0]).abs();
    let slope_by_cutoff = (0..pts.len().saturating_sub(2)).map(|i| (pts[i].0, quadratic_fit(&pts[i..])[0])).collect();
    let rate = prediction.map(|p| p.rate).unwrap_or(coefficients[0]);
    let norm = prediction.map(|p| p.normalizer).unwrap_or(1.0);
    let prefactor_ratios: Vec<f64> = s.iter().map(|x| (x.log_modulus - power * x.hbar.ln() - rate / (2.0 * PI * x.hbar)).exp() / norm).collect();
    Ok(AsymptoticFit {
        slope: coefficients[0],
        slope_error,
        coefficients,
        slope_by_cutoff,
        prefactor_drift: spread(&prefactor_ratios),
        prefactor_ratios,
        samples: s,
        power,
        reference_rate: prediction.map(|p| p.rate),
    })
}

/// Slope fit for partition samples (prefactor power 0).
pub fn volume_slope_fit(samples: &[(f64, f64)]) -> Result<AsymptoticFit> {
    fit_samples(samples, 0.0, None)
}

/// Saddle data for |Z_hbar(X, alpha)|: rate Re S(x_c) and |h(y_c)| / sqrt|det Hess S|.
pub fn partition_saddle(ctx: &PotentialContext, alpha: &AngleStructure) -> Result<SaddlePrediction> {
    let t = ctx.triangulation();
    let lambda = t.angular_holonomy(alpha, &t.longitude);
    let (_, x) = ctx.critical_point(I * lambda)?;
    let v = ctx.eval_s(&x, I * lambda)?;
    let h = h_function(&ctx.phi(&x))?;
    Ok(SaddlePrediction { rate: v.value.re, normalizer: h.norm() / v.hessian.determinant().norm().sqrt(), power: 0.0 })
}

/// Saddle data for the Jones function at w from the fiber critical point.
pub fn jones_saddle(ctx: &PotentialContext, w: C64) -> Result<SaddlePrediction> {
    let (_, x0) = ctx.critical_point(C64::zero())?;
    let xh = ctx.fiber_critical_point(w, &ctx.xhat(&x0)?)?;
    let v = ctx.eval_j(w, &xh)?;
    let k = xh.len();
    let det = if k == 0 { C64::new(1.0, 0.0) } else { v.hessian.view((1, 1), (k, k)).into_owned().determinant() };
    let x = ctx.x_from_jones(w, &xh)?;
    let h = h_function(&ctx.phi(&x))?;
    let c = ctx.c_coeffs.as_ref().ok_or(FamedError::DegeneratePivot)?[ctx.jones_pivot.ok_or(FamedError::DegeneratePivot)?];
    let gauss = (2.0 * PI).powf(k as f64 / 2.0 - ctx.dim as f64) * (2.0 * PI).powf(k as f64 / 2.0);
    Ok(SaddlePrediction { rate: v.value.re, normalizer: gauss * h.norm() / (c.abs() * det.norm().sqrt()), power: -0.5 })
}

/// Partition samples over the spec's hbar schedule, fitted against the saddle prediction.
pub fn partition_fit(ctx: &PotentialContext, alpha: &AngleStructure, spec: &QuadratureSpec) -> Result<(Vec<PartitionEstimate>, AsymptoticFit)> {
    let est: Vec<PartitionEstimate> = spec.hbars.iter().map(|&h| partition_modulus(ctx, alpha, h, spec)).collect::<Result<_>>()?;
    let pred = partition_saddle(ctx, alpha).ok();
    let samples: Vec<(f64, f64)> = est.iter().map(|e| (e.hbar, e.log_modulus)).collect();
    let fit = fit_samples(&samples, 0.0, pred.as_ref())?;
    Ok((est, fit))
}

pub fn jones_fit(ctx: &PotentialContext, w: C64, spec: &QuadratureSpec) -> Result<(Vec<JonesEstimate>, AsymptoticFit)> {
    let est: Vec<JonesEstimate> = spec.hbars.iter().map(|&h| jones_modulus(ctx, h, w, spec)).collect::<Result<_>>()?;
    let pred = jones_saddle(ctx, w).ok();
    let samples: Vec<(f64, f64)> = est.iter().map(|e| (e.hbar, e.log_modulus())).collect();
    let fit = fit_samples(&samples, -0.5, pred.as_ref())?;
    Ok((est, fit))
}

#[derive(Clone, Debug, Serialize)]
pub struct GridCheck {
    pub hbar: f64,
    pub coarse: f64,
    pub fine: f64,
    pub difference: f64,
    pub error_estimate: f64,
    pub consistent: bool,
}

/// Recompute log|Z| with half the grid spacing and compare against the reported error estimate.
pub fn grid_halving_check(ctx: &PotentialContext, alpha: &AngleStructure, hbar: f64, spec: &QuadratureSpec) -> Result<GridCheck> {
    let mut cache = PhiCache::new(hbar);
    let a = partition_modulus_cached(ctx, alpha, hbar, spec, &mut cache)?;
    let b = partition_modulus_cached(ctx, alpha, hbar, &spec.halved(), &mut cache)?;
    let difference = (a.log_modulus - b.log_modulus).abs();
    Ok(GridCheck { hbar, coarse: a.log_modulus, fine: b.log_modulus, difference, error_estimate: a.error_estimate, consistent: difference < a.error_estimate })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContourShiftCheck {
    pub hbar: f64,
    pub lambda: [f64; 2],
    pub log_modulus: [f64; 2],
    pub relative: f64,
}

/// |Z| for two angle structures with equal longitude holonomy.
pub fn contour_shift_check(
    ctx: &PotentialContext,
    alpha: &AngleStructure,
    beta: &AngleStructure,
    hbar: f64,
    spec: &QuadratureSpec,
) -> Result<ContourShiftCheck> {
    let a = partition_modulus(ctx, alpha, hbar, spec)?;
    let b = partition_modulus(ctx, beta, hbar, spec)?;
    if (a.lambda - b.lambda).abs() > 1e-12 {
        return Err(FamedError::MalformedInput("angle structures differ in longitude holonomy".into()));
    }
    Ok(ContourShiftCheck {
        hbar,
        lambda: [a.lambda, b.lambda],
        log_modulus: [a.log_modulus, b.log_modulus],
        relative: (a.log_modulus - b.log_modulus).exp_m1().abs(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LaplaceCheck {
    pub hbar: f64,
    pub lambda: f64,
    pub log_partition: f64,
    pub log_transform: f64,
    pub relative: f64,
    pub w_points: usize,
    pub w_step: f64,
}

/// Compare |Z| with |int J(w) e^{w lambda / 4 pi hbar} dw| over w in R + i mu.
pub fn laplace_check(ctx: &PotentialContext, alpha: &AngleStructure, hbar: f64, spec: &QuadratureSpec) -> Result<LaplaceCheck> {
    let mut cache = PhiCache::new(hbar);
    let z = partition_modulus_cached(ctx, alpha, hbar, spec, &mut cache)?;
    let v = z.offset.clone();
    let lambda = z.lambda;
    let center: Vec<C64> = z.lattice.center.iter().zip(&v).map(|(&h, &s)| C64::new(h, s)).collect();
    let wc = ctx.jones_w(&center)?;
    let w_step = 1.5 * spec.step_factor * hbar.sqrt();
    let jspec = QuadratureSpec { offset: Some(v), ..spec.clone() };
    let term = |j: i64, cache: &mut PhiCache| -> Result<C64> {
        let w = wc + w_step * j as f64;
        let je = jones_integral(ctx, hbar, w, &jspec, cache)?;
        Ok(je.log_value + w * lambda / (4.0 * PI * hbar))
    };
    let mut logs: Vec<C64> = vec![term(0, &mut cache)?];
    let top = logs[0].re;
    for dir in [1i64, -1] {
        let mut j = dir;
        let mut quiet = 0;
        loop {
            let l = term(j, &mut cache)?;
            logs.push(l);
            quiet = if l.re < top - spec.threshold { quiet + 1 } else { 0 };
            if quiet >= 3 {
                break;
            }
            if j.abs() > 100_000 {
                return Err(FamedError::TailBoundExceeded(f64::INFINITY));
            }
            j += dir;
        }
    }
    let mut acc = Neumaier::default();
    for l in &logs {
        acc.add((l - top).exp());
    }
    let log_transform = (acc.total() * w_step).norm().ln() + top;
    Ok(LaplaceCheck {
        hbar,
        lambda,
        log_partition: z.log_modulus,
        log_transform,
        relative: (log_transform - z.log_modulus).exp_m1().abs(),
        w_points: logs.len(),
        w_step,
    })
}

/// Angle structure made of the arguments of positively oriented shapes.
pub fn angles_of_shapes(t: &OrderedTriangulation, s: &ShapeAssignment) -> Result<AngleStructure> {
    if s.n() != t.num_tetrahedra() {
        return Err(FamedError::DimensionMismatch("shapes".into()));
    }
    let mut angles = vec![[0.0; 3]; s.n()];
    for (j, a) in angles.iter_mut().enumerate() {
        for (k, z) in [s.z[j], s.zp(j), s.zpp(j)].iter().enumerate() {
            a[t.angle_of_shape(j, k)] = z.arg();
        }
    }
    AngleStructure::new(angles)
}

#[derive(Clone, Debug, Serialize)]
pub struct SaddleReport {
    pub lambda: f64,
    pub critical_point: Vec<C64>,
    pub gradient_norm: f64,
    /// Shapes of the critical point have positive imaginary part (an angle structure).
    pub in_polytope_image: bool,
    /// Maximum of Re S on the horizontal plane through the critical point coincides with it.
    pub plane_maximum_distance: f64,
    pub strict_maximum: bool,
    pub hessian_condition: f64,
    pub hessian_nonsingular: bool,
    pub g_modulus: f64,
    pub passed: bool,
}

/// Checkable hypotheses of the saddle point argument for |Z_hbar(X, alpha)|.
pub fn saddle_diagnostics(ctx: &PotentialContext, alpha: &AngleStructure) -> Result<SaddleReport> {
    check_dim(ctx.dim)?;
    let t = ctx.triangulation();
    let lambda = t.angular_holonomy(alpha, &t.longitude);
    let (shapes, x) = ctx.critical_point(I * lambda)?;
    let val = ctx.eval_s(&x, I * lambda)?;
    let gradient_norm = val.gradient.norm();
    let in_polytope_image = shapes.z.iter().all(|z| z.im > 0.0);
    let plane = Plane { ctx, base: x.iter().map(|c| C64::new(0.0, c.im)).collect(), cols: identity_cols(ctx.dim), xi: I * lambda };
    plane.check_band()?;
    let u = plane.maximize()?;
    let plane_maximum_distance = u.iter().zip(&x).map(|(a, b)| (a - b.re).powi(2)).sum::<f64>().sqrt();
    let top = val.value.re;
    let d = ctx.dim;
    let n = 11i64;
    let total = (2 * n + 1).pow(d as u32);
    let mut strict_maximum = true;
    for idx in 0..total {
        let mut r = idx;
        let off: Vec<f64> = (0..d)
            .map(|_| {
                let i = r % (2 * n + 1) - n;
                r /= 2 * n + 1;
                0.3 * i as f64
            })
            .collect();
        if off.iter().all(|o| *o == 0.0) {
            continue;
        }
        let p: Vec<f64> = x.iter().zip(&off).map(|(a, o)| a.re + o).collect();
        if plane.re_s(&p)? >= top {
            strict_maximum = false;
        }
    }
    let re_h = val.hessian.map(|c| c.re);
    let eig = SymmetricEigen::new(re_h).eigenvalues;
    let sv = val.hessian.clone().svd(false, false).singular_values;
    let smin = sv.min();
    let hessian_condition = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    let hessian_nonsingular = smin > 1e-10 && eig.max() < 0.0;
    let g_modulus = h_function(&ctx.phi(&x))?.norm();
    let passed = gradient_norm < 1e-9 && in_polytope_image && plane_maximum_distance < 1e-6 && strict_maximum && hessian_nonsingular && g_modulus > 0.0;
    Ok(SaddleReport {
        lambda,
        critical_point: x,
        gradient_norm,
        in_polytope_image,
        plane_maximum_distance,
        strict_maximum,
        hessian_condition,
        hessian_nonsingular,
        g_modulus,
        passed,
    })
}
