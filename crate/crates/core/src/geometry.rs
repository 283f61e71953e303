//! Gluing equations in log form, volumes, holonomies and deformation families.

use crate::error::{FamedError, Result};
use crate::exact_linalg::{rat_to_f64, RationalMatrix};
use crate::nz_data::{build_gluing_matrices, build_nz_pair, curve_ab_row, NzPair};
use crate::special_fn::bloch_wigner;
use crate::triangulation::{OrderedTriangulation, PeripheralCurve};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::Serialize;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const SOLVE_TOL: f64 = 1e-12;
pub const DEFAULT_RADIUS: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeAssignment {
    pub z: Vec<C64>,
}

impl ShapeAssignment {
    pub fn new(z: Vec<C64>) -> Result<Self> {
        if z.iter().any(|&w| w.norm() < 1e-14 || (w - 1.0).norm() < 1e-14) {
            return Err(FamedError::SingularShape);
        }
        Ok(ShapeAssignment { z })
    }

    /// z_k = -e^{y_k}.
    pub fn from_y(y: &[C64]) -> Self {
        ShapeAssignment { z: y.iter().map(|v| -v.exp()).collect() }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn zp(&self, k: usize) -> C64 {
        (1.0 - self.z[k]).inv()
    }

    pub fn zpp(&self, k: usize) -> C64 {
        1.0 - self.z[k].inv()
    }

    /// y = Log z - i pi.
    pub fn y(&self) -> Vec<C64> {
        self.z.iter().map(|w| w.ln() - I * PI).collect()
    }

    pub fn conj(&self) -> Self {
        ShapeAssignment { z: self.z.iter().map(|w| w.conj()).collect() }
    }

    /// Largest of |z(1-z'')-1|, |z'(1-z)-1|, |z''(1-z')-1|.
    pub fn polynomial_residual(&self) -> f64 {
        (0..self.n())
            .map(|k| {
                let (z, zp, zpp) = (self.z[k], self.zp(k), self.zpp(k));
                let p = (z * (1.0 - zpp) - 1.0).norm();
                let pp = (zp * (1.0 - z) - 1.0).norm();
                let ppp = (zpp * (1.0 - zp) - 1.0).norm();
                p.max(pp).max(ppp)
            })
            .fold(0.0, f64::max)
    }

    pub fn has_negative(&self) -> bool {
        self.z.iter().any(|w| w.im < 0.0)
    }

    /// Geometric or flat with |Re y| > delta on flat tetrahedra.
    pub fn is_semi_geometric(&self, delta: f64) -> bool {
        self.z.iter().all(|w| w.im > 0.0 || (w.im == 0.0 && w.norm().ln().abs() > delta))
    }
}

/// A Log z + B Log z'' = i nu + (0, .., 0, xi) in y coordinates.
#[derive(Clone, Debug)]
pub struct GluingSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// In radians.
    pub nu: Vec<f64>,
    pub curve: PeripheralCurve,
}

fn to_dmatrix(m: &RationalMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| rat_to_f64(m.get(i, j)))
}

impl GluingSystem {
    pub fn from_pair(p: &NzPair, curve: &PeripheralCurve) -> Self {
        GluingSystem {
            a: to_dmatrix(&p.a),
            b: to_dmatrix(&p.b),
            nu: p.nu.iter().map(|&v| v as f64 * PI).collect(),
            curve: curve.clone(),
        }
    }

    pub fn for_curve(t: &OrderedTriangulation, curve: &PeripheralCurve) -> Result<Self> {
        let gm = build_gluing_matrices(t, curve)?;
        Ok(Self::from_pair(&build_nz_pair(&gm)?, curve))
    }

    pub fn n(&self) -> usize {
        self.nu.len()
    }

    pub fn residual(&self, y: &[C64], xi: C64) -> DVector<C64> {
        let n = self.n();
        let logz = DVector::from_iterator(n, y.iter().map(|&v| v + I * PI));
        let logzpp = DVector::from_iterator(n, y.iter().map(|&v| (1.0 + (-v).exp()).ln()));
        let a = self.a.map(|x| C64::new(x, 0.0));
        let b = self.b.map(|x| C64::new(x, 0.0));
        let mut f = &a * logz + &b * logzpp;
        for i in 0..n {
            f[i] -= I * self.nu[i];
        }
        f[n - 1] -= xi;
        f
    }

    /// A + B diag(d Log z'' / dy).
    pub fn jacobian(&self, y: &[C64]) -> DMatrix<C64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, k| C64::new(self.a[(i, k)], 0.0) - self.b[(i, k)] / (1.0 + y[k].exp()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeStructure {
    pub xi: C64,
    pub shapes: ShapeAssignment,
    pub residual: f64,
    pub iterations: usize,
    pub jacobian_det: C64,
}

fn max_norm(v: &DVector<C64>) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn newton(sys: &GluingSystem, xi: C64, y0: Vec<C64>) -> Result<(Vec<C64>, usize, f64)> {
    let mut y = y0;
    let mut f = sys.residual(&y, xi);
    let mut res = max_norm(&f);
    for it in 0..100 {
        if res < SOLVE_TOL * 0.1 || (it > 0 && res < SOLVE_TOL && res < 1e-15 * (1.0 + y.len() as f64)) {
            return Ok((y, it, res));
        }
        let step = sys.jacobian(&y).lu().solve(&(-&f)).ok_or(FamedError::NoConvergence { residual: res })?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<C64> = y.iter().zip(step.iter()).map(|(a, d)| a + d * lambda).collect();
            if trial.iter().any(|v| v.re.abs() > 30.0) {
                return Err(FamedError::DegenerateShape);
            }
            let ft = sys.residual(&trial, xi);
            let rt = max_norm(&ft);
            if rt < res || lambda < 1e-6 {
                if rt >= res && res < SOLVE_TOL {
                    return Ok((y, it, res));
                }
                y = trial;
                f = ft;
                res = rt;
                break;
            }
            lambda /= 2.0;
        }
        if y.iter().any(|v| (1.0 + v.exp()).norm() < 1e-10) {
            return Err(FamedError::DegenerateShape);
        }
    }
    if res < SOLVE_TOL {
        Ok((y, 100, res))
    } else {
        Err(FamedError::NoConvergence { residual: res })
    }
}

fn finish(sys: &GluingSystem, xi: C64, y: Vec<C64>, iterations: usize, residual: f64) -> Result<ConeStructure> {
    let jacobian_det = sys.jacobian(&y).determinant();
    let shapes = ShapeAssignment::from_y(&y);
    if shapes.z.iter().any(|w| w.norm() < 1e-12 || (w - 1.0).norm() < 1e-12) {
        return Err(FamedError::DegenerateShape);
    }
    Ok(ConeStructure { xi, shapes, residual, iterations, jacobian_det })
}

/// Newton in y = Log z - i pi. Default seed z = i, then seeded random upper half plane starts.
pub fn solve_gluing(sys: &GluingSystem, xi: C64, seed: Option<&ShapeAssignment>) -> Result<ConeStructure> {
    let n = sys.n();
    let mut seeds: Vec<Vec<C64>> = Vec::new();
    match seed {
        Some(s) => {
            if s.n() != n {
                return Err(FamedError::DimensionMismatch("seed length".into()));
            }
            ShapeAssignment::new(s.z.clone())?;
            seeds.push(s.y());
        }
        None => seeds.push(vec![C64::new(0.0, -PI / 2.0); n]),
    }
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for _ in 0..20 {
        seeds.push((0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), -rng.gen_range(0.2..2.9))).collect());
    }
    let mut last = FamedError::NoConvergence { residual: f64::INFINITY };
    for y0 in seeds {
        match newton(sys, xi, y0) {
            Ok((y, it, res)) => {
                let z = ShapeAssignment::from_y(&y);
                if seed.is_none() && z.has_negative() && xi == C64::new(0.0, 0.0) {
                    continue;
                }
                return finish(sys, xi, y, it, res);
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

pub fn volume(s: &ShapeAssignment) -> f64 {
    s.z.iter().map(|&z| bloch_wigner(z)).sum()
}

/// Signed log-sum with principal branches.
pub fn holonomy(s: &ShapeAssignment, sigma: &PeripheralCurve) -> C64 {
    (0..s.n())
        .map(|j| {
            sigma.c[j] as f64 * s.z[j].ln() + sigma.cp[j] as f64 * s.zp(j).ln() + sigma.cpp[j] as f64 * s.zpp(j).ln()
        })
        .sum()
}

/// Gradient of a curve's holonomy in y coordinates.
pub fn holonomy_gradient(s: &ShapeAssignment, sigma: &PeripheralCurve) -> DVector<C64> {
    let (a, b) = curve_ab_row(sigma);
    let y = s.y();
    DVector::from_fn(s.n(), |k, _| C64::new(a[k] as f64, 0.0) - b[k] as f64 / (1.0 + y[k].exp()))
}

/// d H_other / d xi along the solution family of `sys` (xi = holonomy of sys.curve).
pub fn holonomy_derivative(sys: &GluingSystem, s: &ShapeAssignment, other: &PeripheralCurve) -> Result<C64> {
    let n = sys.n();
    let mut e = DVector::from_element(n, C64::new(0.0, 0.0));
    e[n - 1] = C64::new(1.0, 0.0);
    let dy = sys.jacobian(&s.y()).lu().solve(&e).ok_or(FamedError::SingularShape)?;
    Ok(holonomy_gradient(s, other).dot(&dy))
}

#[derive(Clone, Debug, Serialize)]
pub struct PathSample {
    pub param: C64,
    pub shapes: ShapeAssignment,
}

#[derive(Clone, Debug)]
pub struct DeformationPath {
    pub system: GluingSystem,
    pub samples: Vec<PathSample>,
}

impl DeformationPath {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> &PathSample {
        self.samples.last().expect("path has the complete structure")
    }
}

fn tangent(sys: &GluingSystem, y: &[C64]) -> Option<DVector<C64>> {
    let n = sys.n();
    let mut e = DVector::from_element(n, C64::new(0.0, 0.0));
    e[n - 1] = C64::new(1.0, 0.0);
    sys.jacobian(y).lu().solve(&e)
}

/// Continue from `start` (solved at `from`) to `to` with tangent predictor, Newton corrector and step halving.
fn continue_to(sys: &GluingSystem, from: C64, start: &[C64], to: C64) -> Result<Vec<C64>> {
    let max_jump = 0.25;
    let mut t = 0.0f64;
    let mut dt = 1.0f64;
    let mut y = start.to_vec();
    while t < 1.0 {
        dt = dt.min(1.0 - t);
        if dt < 1e-8 {
            return Err(FamedError::ContinuationBreakdown("step underflow".into()));
        }
        let p0 = from + (to - from) * t;
        let p1 = from + (to - from) * (t + dt);
        let pred: Vec<C64> = match tangent(sys, &y) {
            Some(d) => y.iter().zip(d.iter()).map(|(a, b)| a + b * (p1 - p0)).collect(),
            None => y.clone(),
        };
        match newton(sys, p1, pred) {
            Ok((y1, _, _)) if y1.iter().zip(&y).all(|(a, b)| (a - b).norm() < max_jump) => {
                y = y1;
                t += dt;
                dt *= 2.0;
            }
            _ => dt /= 2.0,
        }
    }
    Ok(y)
}

/// Path from the complete structure to holonomy `target` of `sys.curve`, sampled at `steps` equal steps.
pub fn deform_path(sys: &GluingSystem, target: C64, steps: usize) -> Result<DeformationPath> {
    deform_path_with_radius(sys, target, steps, DEFAULT_RADIUS)
}

pub fn deform_path_with_radius(sys: &GluingSystem, target: C64, steps: usize, radius: f64) -> Result<DeformationPath> {
    if target.norm() > radius {
        return Err(FamedError::ContinuationBreakdown(format!("|target| = {} exceeds radius {radius}", target.norm())));
    }
    let complete = solve_gluing(sys, C64::new(0.0, 0.0), None)?;
    let mut samples = vec![PathSample { param: C64::new(0.0, 0.0), shapes: complete.shapes }];
    if target == C64::new(0.0, 0.0) || steps == 0 {
        return Ok(DeformationPath { system: sys.clone(), samples });
    }
    let mut y = samples[0].shapes.y();
    for k in 1..=steps {
        let from = target * ((k - 1) as f64 / steps as f64);
        let to = target * (k as f64 / steps as f64);
        let y1 = continue_to(sys, from, &y, to)?;
        let prev = ShapeAssignment::from_y(&y);
        let next = ShapeAssignment::from_y(&y1);
        if prev.z.iter().zip(&next.z).any(|(a, b)| (a.ln() - b.ln()).norm() > PI / 2.0) {
            return Err(FamedError::BranchJump);
        }
        y = y1;
        samples.push(PathSample { param: to, shapes: next });
    }
    Ok(DeformationPath { system: sys.clone(), samples })
}

/// Continue an existing path's endpoint to a new target (used for reversibility checks).
pub fn extend_path(path: &DeformationPath, to: C64) -> Result<ShapeAssignment> {
    let last = path.last();
    let y = continue_to(&path.system, last.param, &last.shapes.y(), to)?;
    Ok(ShapeAssignment::from_y(&y))
}

#[derive(Clone, Debug, Serialize)]
pub struct NzSample {
    pub w_m: C64,
    pub w_l: C64,
    /// d w_l / d w_m.
    pub slope: C64,
    pub phi: C64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NzPotential {
    pub volume: f64,
    pub samples: Vec<NzSample>,
}

impl NzPotential {
    /// Derivative table (w_m, w_l / 2).
    pub fn derivative_table(&self) -> Vec<(C64, C64)> {
        self.samples.iter().map(|s| (s.w_m, s.w_l / 2.0)).collect()
    }
}

/// phi(w) = i Vol + (1/2) int_0^w w_l dw_m along a meridian path (Chern-Simons part of the anchor set to 0).
/// Segments use the cubic Hermite rule with the exact slope d w_l / d w_m.
pub fn nz_potential(path: &DeformationPath, longitude: &PeripheralCurve) -> Result<NzPotential> {
    let vol = volume(&path.samples[0].shapes);
    let mut samples: Vec<NzSample> = Vec::with_capacity(path.len());
    for s in &path.samples {
        let w_l = holonomy(&s.shapes, longitude);
        let slope = holonomy_derivative(&path.system, &s.shapes, longitude)?;
        let phi = match samples.last() {
            None => I * vol,
            Some(p) => {
                let h = s.param - p.w_m;
                p.phi + 0.5 * (h / 2.0 * (p.w_l + w_l) + h * h / 12.0 * (p.slope - slope))
            }
        };
        samples.push(NzSample { w_m: s.param, w_l, slope, phi });
    }
    Ok(NzPotential { volume: vol, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FIG8;
    use crate::triangulation::parse_triangulation;
    use proptest::prelude::*;

    const VOL_41: f64 = 2.029883212819307;

    fn fig8() -> OrderedTriangulation {
        parse_triangulation(FIG8).unwrap()
    }

    fn sys_l() -> GluingSystem {
        let t = fig8();
        GluingSystem::for_curve(&t, &t.longitude).unwrap()
    }

    fn sys_m() -> GluingSystem {
        let t = fig8();
        GluingSystem::for_curve(&t, &t.meridian).unwrap()
    }

    #[test]
    fn complete_structure() {
        let c = solve_gluing(&sys_l(), C64::new(0.0, 0.0), None).unwrap();
        let w = C64::from_polar(1.0, PI / 3.0);
        for z in &c.shapes.z {
            assert!((z - w).norm() < 1e-12, "{z}");
        }
        assert!(c.shapes.polynomial_residual() < 1e-12);
        assert!((volume(&c.shapes) - VOL_41).abs() < 1e-9);
        let again = solve_gluing(&sys_l(), C64::new(0.0, 0.0), Some(&c.shapes)).unwrap();
        assert_eq!(again.iterations, 0);
        let t = fig8();
        assert!(holonomy(&c.shapes, &t.meridian).norm() < 1e-10);
        assert!(holonomy(&c.shapes, &t.longitude).norm() < 1e-10);
        assert_eq!(holonomy(&c.shapes, &PeripheralCurve::zero(2)), C64::new(0.0, 0.0));
        // log-sum identity on geometric shapes
        for k in 0..2 {
            let s = c.shapes.z[k].ln() + c.shapes.zp(k).ln() + c.shapes.zpp(k).ln();
            assert!((s - I * PI).norm() < 1e-13);
        }
    }

    #[test]
    fn volume_of_flat_and_conjugate() {
        let flat = ShapeAssignment::new(vec![C64::new(2.0, 0.0), C64::new(-0.5, 0.0)]).unwrap();
        assert_eq!(volume(&flat), 0.0);
        let c = solve_gluing(&sys_l(), C64::new(0.0, 0.0), None).unwrap();
        assert!((volume(&c.shapes.conj()) + volume(&c.shapes)).abs() < 1e-14);
        // series oracle: D(e^{i pi/3}) = sum sin(n pi/3)/n^2
        let d: f64 = (1..400000).map(|n| (n as f64 * PI / 3.0).sin() / (n as f64).powi(2)).sum();
        assert!((2.0 * d - VOL_41).abs() < 1e-9);
    }

    #[test]
    fn longitude_target() {
        let t = fig8();
        let c = solve_gluing(&sys_l(), C64::new(0.02, 0.0), None).unwrap();
        assert!((holonomy(&c.shapes, &t.longitude) - 0.02).norm() < 1e-10);
        assert!(c.shapes.polynomial_residual() < 1e-12);
        let e = solve_gluing(&sys_l(), C64::new(0.0, 0.1), None).unwrap();
        assert!((holonomy(&e.shapes, &t.longitude) - C64::new(0.0, 0.1)).norm() < 1e-10);
    }

    #[test]
    fn singular_seed_rejected() {
        let s = ShapeAssignment { z: vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)] };
        assert!(matches!(solve_gluing(&sys_l(), C64::new(0.0, 0.0), Some(&s)), Err(FamedError::SingularShape)));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let sys = sys_l();
        let y = vec![C64::new(0.3, -1.2), C64::new(-0.4, -2.0)];
        let jac = sys.jacobian(&y);
        let h = 1e-6;
        for k in 0..2 {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[k] += h;
            ym[k] -= h;
            let col = (sys.residual(&yp, C64::new(0.0, 0.0)) - sys.residual(&ym, C64::new(0.0, 0.0))) / C64::new(2.0 * h, 0.0);
            for i in 0..2 {
                assert!((col[i] - jac[(i, k)]).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn meridian_path() {
        let t = fig8();
        let sys = sys_m();
        let p = deform_path(&sys, C64::new(0.1, 0.0), 20).unwrap();
        assert_eq!(p.len(), 21);
        let end = &p.last().shapes;
        assert!((holonomy(end, &t.meridian) - 0.1).norm() < 1e-10);
        for s in &p.samples {
            assert!(sys.residual(&s.shapes.y(), s.param).iter().all(|v| v.norm() < 1e-12));
        }
        let back = extend_path(&p, C64::new(0.0, 0.0)).unwrap();
        let w = C64::from_polar(1.0, PI / 3.0);
        assert!(back.z.iter().all(|z| (z - w).norm() < 1e-9));
        assert_eq!(deform_path(&sys, C64::new(0.0, 0.0), 20).unwrap().len(), 1);
        assert!(matches!(deform_path(&sys, C64::new(2.0, 0.0), 20), Err(FamedError::ContinuationBreakdown(_))));
    }

    #[test]
    fn volume_even_under_reflection() {
        let sys = sys_m();
        let w = C64::new(0.05, 0.02);
        let p = deform_path(&sys, w, 5).unwrap();
        let q = deform_path(&sys, -w.conj(), 5).unwrap();
        for (a, b) in p.samples.iter().zip(&q.samples) {
            assert!((volume(&a.shapes) - volume(&b.shapes)).abs() < 1e-10);
        }
        assert!(volume(&p.last().shapes) < VOL_41);
    }

    #[test]
    fn holonomy_derivative_matches_path() {
        let t = fig8();
        let sys = sys_m();
        let h = 1e-4;
        let p = deform_path(&sys, C64::new(0.05 + h, 0.0), 1).unwrap();
        let q = deform_path(&sys, C64::new(0.05 - h, 0.0), 1).unwrap();
        let fd = (holonomy(&p.last().shapes, &t.longitude) - holonomy(&q.last().shapes, &t.longitude)) / (2.0 * h);
        let mid = deform_path(&sys, C64::new(0.05, 0.0), 1).unwrap();
        let exact = holonomy_derivative(&sys, &mid.last().shapes, &t.longitude).unwrap();
        assert!((fd - exact).norm() < 1e-7, "{fd} vs {exact}");
        // cusp shape of the figure-eight knot
        let c0 = deform_path(&sys, C64::new(0.0, 0.0), 0).unwrap();
        let d0 = holonomy_derivative(&sys, &c0.samples[0].shapes, &t.longitude).unwrap();
        assert!((d0 - C64::new(0.0, 2.0 * 3f64.sqrt())).norm() < 1e-10, "{d0}");
    }

    #[test]
    fn potential_contract() {
        let t = fig8();
        let p = deform_path(&sys_m(), C64::new(0.1, 0.0), 20).unwrap();
        let pot = nz_potential(&p, &t.longitude).unwrap();
        assert!(((I * pot.samples[0].phi).re + VOL_41).abs() < 1e-9);
        assert!(pot.samples[0].w_l.norm() < 1e-10);
        // fourth-order central differences of the phi samples
        let h = 0.005;
        let s = &pot.samples;
        for k in 2..s.len() - 2 {
            let fd = (s[k - 2].phi - 8.0 * s[k - 1].phi + 8.0 * s[k + 1].phi - s[k + 2].phi) / (12.0 * h);
            assert!((fd - s[k].w_l / 2.0).norm() < 1e-6, "k = {k}");
        }
        // at w = 0 the derivative vanishes (use the odd extension)
        let q = deform_path(&sys_m(), C64::new(-0.01, 0.0), 2).unwrap();
        let pq = nz_potential(&q, &t.longitude).unwrap();
        let fd0 = (s[1].phi - pq.samples[1].phi) / (2.0 * h);
        assert!(fd0.norm() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn solved_shapes_satisfy_invariants(re in -0.15f64..0.15, im in -0.15f64..0.15) {
            let t = fig8();
            let c = solve_gluing(&sys_l(), C64::new(re, im), None);
            prop_assume!(c.is_ok());
            let c = c.unwrap();
            prop_assert!(c.shapes.polynomial_residual() < 1e-12);
            prop_assert!((holonomy(&c.shapes, &t.longitude) - C64::new(re, im)).norm() < 1e-10);
            prop_assert!(c.jacobian_det.norm() > 1e-8);
        }
    }
}
