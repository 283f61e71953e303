//! The potentials S, S~ and J on the affine parametrisation of the shape space.

use crate::error::{FamedError, Result};
use crate::exact_linalg::{kernel_basis, rat, rat_to_f64, Rat, RationalMatrix};
use crate::famed_check::{check, FamedData};
use crate::geometry::{holonomy, solve_gluing, volume, GluingSystem, ShapeAssignment};
use crate::nz_data::Flattening;
use crate::one_loop::OneLoopValue;
use crate::special_fn::{bloch_wigner, cont_l_prime_with, cont_l_second, cont_l_with, DEFAULT_DELTA};
use crate::triangulation::{AngleStructure, ExactAngles, OrderedTriangulation};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use num_traits::Zero;
use serde::Serialize;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn real_matrix(m: &RationalMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| rat_to_f64(m.get(i, j)))
}

fn cplx(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

#[derive(Clone, Debug)]
pub struct PotentialContext {
    pub data: FamedData,
    pub n_tet: usize,
    /// N - 2n.
    pub dim: usize,
    pub pivots: Vec<usize>,
    /// (EB)_{N-2n}, dim x N.
    pub eb_top: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub eps: Vec<f64>,
    /// E'_{N-2n} nu - (EB)_{N-2n} G pi.
    pub lin0: DVector<f64>,
    /// Last column of E'_{N-2n}.
    pub e_last: DVector<f64>,
    pub alpha0: AngleStructure,
    pub a0: Vec<f64>,
    /// C_k of the Jones substitution (None without E').
    pub c_coeffs: Option<Vec<f64>>,
    /// First k with C_k != 0.
    pub jones_pivot: Option<usize>,
    /// C = -i sum C_k a0_{p_k}.
    pub jones_const: C64,
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct PotentialValue {
    pub value: C64,
    pub gradient: DVector<C64>,
    pub hessian: DMatrix<C64>,
}

pub fn build_context(t: &OrderedTriangulation, alpha0: &AngleStructure) -> Result<PotentialContext> {
    let (data, cert) = check(t)?;
    if !cert.def_1_3.passed {
        return Err(FamedError::NotFamed("FAMED(l) fails".into()));
    }
    if alpha0.angles.len() != t.num_tetrahedra() || !alpha0.in_polytope(t, 1e-9) {
        return Err(FamedError::MalformedInput("alpha0 is not an angle structure".into()));
    }
    let red = &data.reduction;
    let n_tet = t.num_tetrahedra();
    let dim = red.rank_b;
    let eb_top = real_matrix(&red.eb_top());
    let ep = red.e_prime_top().ok_or_else(|| FamedError::NotFamed("E' missing".into()))?;
    let ep = real_matrix(&ep);
    let q = real_matrix(&data.kernel.q);
    let g = real_matrix(&data.kernel.g);
    let eps: Vec<f64> = t.signs().iter().map(|&s| s as f64).collect();
    let nu = DVector::from_iterator(n_tet, data.nz.nu.iter().map(|&v| v as f64 * PI));
    let lin0 = &ep * nu - &eb_top * (&g * DVector::from_element(n_tet, PI));
    let e_last = ep.column(n_tet - 1).into_owned();
    let a0 = alpha0.a();
    let c_coeffs: Option<Vec<f64>> = red.c_vector().map(|c| c.iter().map(rat_to_f64).collect());
    let jones_pivot = c_coeffs.as_ref().and_then(|c| c.iter().position(|v| *v != 0.0));
    let jones_const = match &c_coeffs {
        Some(c) => -I * c.iter().zip(&red.pivots).map(|(ck, &p)| ck * a0[p]).sum::<f64>(),
        None => C64::zero(),
    };
    Ok(PotentialContext {
        n_tet,
        dim,
        pivots: red.pivots.clone(),
        eb_top,
        q,
        g,
        eps,
        lin0,
        e_last,
        alpha0: alpha0.clone(),
        a0,
        c_coeffs,
        jones_pivot,
        jones_const,
        delta: DEFAULT_DELTA,
        data,
    })
}

impl PotentialContext {
    pub fn triangulation(&self) -> &OrderedTriangulation {
        &self.data.tri
    }

    /// phi(x) = (EB)^T x - i(pi - a0).
    pub fn phi(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n_tet)
            .map(|k| {
                let s: C64 = (0..self.dim).map(|l| self.eb_top[(l, k)] * x[l]).sum();
                s - I * (PI - self.a0[k])
            })
            .collect()
    }

    /// The point x with phi(x) = Log z - i pi on the pivot coordinates.
    pub fn x_of_shapes(&self, s: &ShapeAssignment) -> Vec<C64> {
        self.pivots.iter().map(|&p| s.z[p].ln() - I * self.a0[p]).collect()
    }

    pub fn v_alpha(&self, alpha: &AngleStructure) -> Vec<f64> {
        let a = alpha.a();
        self.pivots.iter().map(|&p| a[p] - self.a0[p]).collect()
    }

    /// E'(nu - i u~) - (EB) G pi with u~ = (0, .., xi).
    pub fn lin(&self, xi: C64) -> DVector<C64> {
        DVector::from_fn(self.dim, |l, _| self.lin0[l] - I * xi * self.e_last[l])
    }

    fn quadratic_diag(&self) -> DMatrix<f64> {
        let mut m = self.q.clone();
        for k in 0..self.n_tet {
            m[(k, k)] += (self.eps[k] - 1.0) / 2.0;
        }
        m
    }

    /// S~(x; xi) with gradient and Hessian.
    pub fn eval_s(&self, x: &[C64], xi: C64) -> Result<PotentialValue> {
        if x.len() != self.dim {
            return Err(FamedError::DimensionMismatch("x".into()));
        }
        let y = self.phi(x);
        let mut lv = Vec::with_capacity(self.n_tet);
        let mut lp = Vec::with_capacity(self.n_tet);
        for &yk in &y {
            lv.push(cont_l_with(yk, self.delta).map_err(|_| FamedError::CutProximity)?);
            lp.push(cont_l_prime_with(yk, self.delta).map_err(|_| FamedError::CutProximity)?);
        }
        let qd = cplx(&self.quadratic_diag());
        let yv = DVector::from_vec(y.clone());
        let qy = &qd * &yv;
        let lin = self.lin(xi);
        let xv = DVector::from_column_slice(x);
        let value = -0.5 * I * yv.dot(&qy) + I * lv.iter().sum::<C64>() - xv.dot(&lin);
        let eb = cplx(&self.eb_top);
        let inner = qy * (-I) + DVector::from_vec(lp) * I;
        let gradient = &eb * inner - lin;
        let mut mid = qd * (-I);
        for k in 0..self.n_tet {
            mid[(k, k)] += I * cont_l_second(y[k]);
        }
        let hessian = &eb * mid * eb.transpose();
        Ok(PotentialValue { value, gradient, hessian })
    }

    /// S(x; lambda) = S~(x; i lambda).
    pub fn eval_s_real(&self, x: &[C64], lambda: f64) -> Result<PotentialValue> {
        self.eval_s(x, I * lambda)
    }

    /// Closed form of the gradient in terms of shapes: -i[(EB) G Log z + (EB) Log z''] - E'(nu - i u~).
    pub fn gradient_from_shapes(&self, s: &ShapeAssignment, xi: C64) -> DVector<C64> {
        let eb = cplx(&self.eb_top);
        let logz = DVector::from_iterator(self.n_tet, s.z.iter().map(|z| z.ln()));
        let logzpp = DVector::from_iterator(self.n_tet, (0..self.n_tet).map(|k| s.zpp(k).ln()));
        let lin_e = DVector::from_fn(self.dim, |l, _| self.lin0[l] - I * xi * self.e_last[l])
            + &eb * (cplx(&self.g) * DVector::from_element(self.n_tet, C64::new(PI, 0.0)));
        (&eb * (cplx(&self.g) * logz) + &eb * logzpp) * (-I) - lin_e
    }

    /// Critical point for xi from the longitude gluing system.
    pub fn critical_point(&self, xi: C64) -> Result<(ShapeAssignment, Vec<C64>)> {
        let t = self.triangulation();
        let sys = GluingSystem::for_curve(t, &t.longitude)?;
        let c = solve_gluing(&sys, xi, None)?;
        let x = self.x_of_shapes(&c.shapes);
        Ok((c.shapes, x))
    }

    /// Re S + sum D(z) - sum h_l d_{h_l} Re S with h = Re x; vanishes identically.
    pub fn volume_identity_residual(&self, x: &[C64], lambda: f64) -> Result<f64> {
        let val = self.eval_s(x, I * lambda)?;
        let dsum: f64 = self.phi(x).iter().map(|yk| bloch_wigner(-yk.exp())).sum();
        let hd: f64 = x.iter().zip(val.gradient.iter()).map(|(a, g)| a.re * g.re).sum();
        Ok((val.value.re + dsum - hd).abs())
    }

    fn require_jones(&self) -> Result<(&[f64], usize)> {
        let c = self.c_coeffs.as_deref().ok_or(FamedError::DegeneratePivot)?;
        let j = self.jones_pivot.ok_or(FamedError::DegeneratePivot)?;
        Ok((c, j))
    }

    /// w = sum C_k x_k - C.
    pub fn jones_w(&self, x: &[C64]) -> Result<C64> {
        let (c, _) = self.require_jones()?;
        Ok(c.iter().zip(x).map(|(ck, xk)| ck * xk).sum::<C64>() - self.jones_const)
    }

    /// x from (w, x^) where x^ lists the coordinates other than the Jones pivot.
    pub fn x_from_jones(&self, w: C64, xhat: &[C64]) -> Result<Vec<C64>> {
        let (c, j) = self.require_jones()?;
        if xhat.len() + 1 != self.dim {
            return Err(FamedError::DimensionMismatch("x^".into()));
        }
        let mut x = Vec::with_capacity(self.dim);
        let mut it = xhat.iter();
        for k in 0..self.dim {
            x.push(if k == j { C64::zero() } else { *it.next().expect("length checked") });
        }
        let rest: C64 = (0..self.dim).filter(|&k| k != j).map(|k| c[k] * x[k]).sum();
        x[j] = (w + self.jones_const - rest) / c[j];
        Ok(x)
    }

    pub fn xhat(&self, x: &[C64]) -> Result<Vec<C64>> {
        let (_, j) = self.require_jones()?;
        Ok(x.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v).collect())
    }

    /// d x / d (w, x^).
    fn jones_jacobian(&self) -> Result<DMatrix<C64>> {
        let (c, j) = self.require_jones()?;
        let mut m = DMatrix::from_element(self.dim, self.dim, C64::zero());
        let others: Vec<usize> = (0..self.dim).filter(|&k| k != j).collect();
        m[(j, 0)] = C64::new(1.0 / c[j], 0.0);
        for (col, &k) in others.iter().enumerate() {
            m[(k, col + 1)] = C64::new(1.0, 0.0);
            m[(j, col + 1)] = C64::new(-c[k] / c[j], 0.0);
        }
        Ok(m)
    }

    /// J(w, x^) = S~(x(w, x^); 0); gradient and Hessian in (w, x^).
    pub fn eval_j(&self, w: C64, xhat: &[C64]) -> Result<PotentialValue> {
        let x = self.x_from_jones(w, xhat)?;
        let s = self.eval_s(&x, C64::zero())?;
        let m = self.jones_jacobian()?;
        Ok(PotentialValue {
            value: s.value,
            gradient: m.transpose() * s.gradient,
            hessian: m.transpose() * s.hessian * m,
        })
    }

    /// Critical point of J(w, .) by Newton from `start`.
    pub fn fiber_critical_point(&self, w: C64, start: &[C64]) -> Result<Vec<C64>> {
        let mut xh = start.to_vec();
        let k = xh.len();
        if k == 0 {
            return Ok(xh);
        }
        for _ in 0..60 {
            let v = self.eval_j(w, &xh)?;
            let g = v.gradient.rows(1, k).into_owned();
            let res = g.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if res < 1e-13 {
                return Ok(xh);
            }
            let h = v.hessian.view((1, 1), (k, k)).into_owned();
            let step = h.lu().solve(&(-g)).ok_or(FamedError::NoConvergence { residual: res })?;
            for (a, b) in xh.iter_mut().zip(step.iter()) {
                *a += b;
            }
        }
        let v = self.eval_j(w, &xh)?;
        let res = v.gradient.rows(1, k).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if res < 1e-10 {
            Ok(xh)
        } else {
            Err(FamedError::NoConvergence { residual: res })
        }
    }
}

/// det Hess S~ at x against the 1-loop side (prod z^{-f''} z''^{f-1}) tau; the ratio is xi-independent.
pub fn hessian_one_loop_ratio(ctx: &PotentialContext, s: &ShapeAssignment, tau: &OneLoopValue) -> Result<f64> {
    let x = ctx.x_of_shapes(s);
    let det = ctx.eval_s(&x, C64::zero())?.hessian.determinant();
    let f = &tau.flattening;
    let pre: C64 = (0..s.n()).map(|k| s.z[k].powi(-f.fpp[k] as i32) * s.zpp(k).powi((f.f[k] - 1) as i32)).product();
    let rhs = (pre * tau.tau).norm();
    if rhs == 0.0 {
        return Err(FamedError::ZeroInvariant);
    }
    Ok(det.norm() / rhs)
}

/// Largest relative deviation of the ratios from their mean.
pub fn ratio_spread(ratios: &[f64]) -> f64 {
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    ratios.iter().map(|r| (r - mean).abs() / mean).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct JonesHessianCheck {
    pub det_hess_s: C64,
    pub det_hess_j: C64,
    pub dwl_dwm: C64,
    pub c1: f64,
    /// |lhs - rhs| / |lhs| for det Hess S~ = C1^2 (i/2)(dw_l/dw_m) det Hess J.
    pub residual: f64,
}

/// Relation between the Hessians of S~ and of the fiber potential J at shapes `s` (meridian holonomy w).
pub fn jones_hessian_check(ctx: &PotentialContext, s: &ShapeAssignment, dwl_dwm: C64) -> Result<JonesHessianCheck> {
    let (c, j) = ctx.require_jones()?;
    let x = ctx.x_of_shapes(s);
    let det_s = ctx.eval_s(&x, C64::zero())?.hessian.determinant();
    let w = ctx.jones_w(&x)?;
    let xh = ctx.xhat(&x)?;
    let hj = ctx.eval_j(w, &xh)?.hessian;
    let k = xh.len();
    let det_j = if k == 0 { C64::new(1.0, 0.0) } else { hj.view((1, 1), (k, k)).into_owned().determinant() };
    let c1 = c[j];
    let rhs = c1 * c1 * 0.5 * I * dwl_dwm * det_j;
    Ok(JonesHessianCheck { det_hess_s: det_s, det_hess_j: det_j, dwl_dwm, c1, residual: (det_s - rhs).norm() / det_s.norm() })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcavityReport {
    pub points: usize,
    /// Largest eigenvalue of Re Hess over the grid.
    pub max_eigenvalue: f64,
    /// Largest diagonal entry Im(1/(1+e^{-y_k})) over the grid.
    pub max_diagonal: f64,
    pub negative_definite: bool,
    pub on_boundary: bool,
}

/// Scan Re Hess S~ over a tensor grid of Re x (half width `half`, `n` points per axis) on R^d + i v.
pub fn concavity_scan(ctx: &PotentialContext, v: &[f64], half: f64, n: usize) -> Result<ConcavityReport> {
    let d = ctx.dim;
    if v.len() != d {
        return Err(FamedError::DimensionMismatch("v".into()));
    }
    if d > 3 {
        return Err(FamedError::DimensionTooLarge(d));
    }
    let probe: Vec<C64> = v.iter().map(|&t| C64::new(0.0, t)).collect();
    let ims: Vec<f64> = ctx.phi(&probe).iter().map(|y| y.im).collect();
    if ims.iter().any(|&t| !(-PI - 1e-12..=1e-12).contains(&t)) {
        return Err(FamedError::BandViolation);
    }
    let on_boundary = ims.iter().any(|&t| t.abs() < 1e-12 || (t + PI).abs() < 1e-12);
    let mut max_eig = f64::NEG_INFINITY;
    let mut max_diag = f64::NEG_INFINITY;
    let total = n.pow(d as u32);
    let step = if n > 1 { 2.0 * half / (n - 1) as f64 } else { 0.0 };
    for idx in 0..total {
        let mut r = idx;
        let x: Vec<C64> = (0..d)
            .map(|l| {
                let i = r % n;
                r /= n;
                C64::new(-half + step * i as f64, v[l])
            })
            .collect();
        let y = ctx.phi(&x);
        let eb = &ctx.eb_top;
        let diag: Vec<f64> = y.iter().map(|yk| (1.0 / (1.0 + (-yk).exp())).im).collect();
        let dm = DMatrix::from_diagonal(&DVector::from_vec(diag.clone()));
        let re_h = eb * dm * eb.transpose();
        let eig = SymmetricEigen::new(re_h).eigenvalues.max();
        max_eig = max_eig.max(eig);
        max_diag = max_diag.max(diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(ConcavityReport { points: total, max_eigenvalue: max_eig, max_diagonal: max_diag, negative_definite: max_eig < 0.0, on_boundary })
}

/// h(y) = exp(sum (i y_k / 2 pi) L'(y_k) - (i / pi) L(y_k)).
pub fn h_function(y: &[C64]) -> Result<C64> {
    let mut s = C64::zero();
    for &yk in y {
        let l = cont_l_with(yk, DEFAULT_DELTA).map_err(|_| FamedError::CutProximity)?;
        let lp = cont_l_prime_with(yk, DEFAULT_DELTA).map_err(|_| FamedError::CutProximity)?;
        s += I * yk / (2.0 * PI) * lp - I / PI * l;
    }
    Ok(s.exp())
}

/// R(z) = h(y) (prod z^{-f''} z''^{f-1})^{-1}.
pub fn r_function(s: &ShapeAssignment, f: &Flattening) -> Result<C64> {
    let h = h_function(&s.y())?;
    let pre: C64 = (0..s.n()).map(|k| s.z[k].powi(-f.fpp[k] as i32) * s.zpp(k).powi((f.f[k] - 1) as i32)).product();
    Ok(h / pre)
}

/// Both sides of -(EB) W(alpha) = E'(nu + u) - (EB) G pi, in units of pi.
pub fn w_alpha_sides(data: &FamedData, alpha: &ExactAngles) -> Result<(Vec<Rat>, Vec<Rat>)> {
    let red = &data.reduction;
    let t = &data.tri;
    let n = t.num_tetrahedra();
    let ep = red.e_prime_top().ok_or_else(|| FamedError::NotFamed("E' missing".into()))?;
    let a = alpha.a();
    let one_minus_a: Vec<Rat> = a.iter().map(|x| rat(1) - x).collect();
    let qa = data.kernel.q.mul_vec(&one_minus_a);
    let w: Vec<Rat> = (0..n).map(|k| &qa[k] + rat(t.signs()[k] as i64) * &alpha.0[k][2]).collect();
    let lhs: Vec<Rat> = red.eb_top().mul_vec(&w).into_iter().map(|x| -x).collect();
    let lambda = t.angular_holonomy_exact(alpha, &t.longitude);
    let mut nu_u: Vec<Rat> = data.nz.nu.iter().map(|&v| rat(v)).collect();
    nu_u[n - 1] += lambda;
    let ones = vec![rat(1); n];
    let gp = red.eb_top().mul_vec(&data.kernel.g.mul_vec(&ones));
    let rhs: Vec<Rat> = ep.mul_vec(&nu_u).into_iter().zip(gp).map(|(p, q)| p - q).collect();
    Ok((lhs, rhs))
}

/// Volume of the structure with longitude holonomy xi (independent of the potential).
pub fn cone_volume(t: &OrderedTriangulation, xi: C64) -> Result<f64> {
    let sys = GluingSystem::for_curve(t, &t.longitude)?;
    Ok(volume(&solve_gluing(&sys, xi, None)?.shapes))
}

/// Meridian holonomy of shapes, for comparison with the Jones variable.
pub fn meridian_holonomy(t: &OrderedTriangulation, s: &ShapeAssignment) -> C64 {
    holonomy(s, &t.meridian)
}

/// Rational angle directions preserving normalisation, edge sums and the longitude holonomy.
pub fn flat_directions(t: &OrderedTriangulation) -> Vec<Vec<Rat>> {
    let n = t.num_tetrahedra();
    let mut rows: Vec<Vec<Rat>> = Vec::new();
    for j in 0..n {
        let mut r = vec![rat(0); 3 * n];
        for k in 0..3 {
            r[3 * j + k] = rat(1);
        }
        rows.push(r);
    }
    for e in 0..t.num_edge_classes() {
        let cnt = t.edge_angle_counts(e).unwrap();
        rows.push((0..3 * n).map(|i| rat(cnt[i / 3][i % 3])).collect());
    }
    let mut r = vec![rat(0); 3 * n];
    for j in 0..n {
        for s in 0..3 {
            r[3 * j + t.angle_of_shape(j, s)] += rat(t.longitude.count(j, s));
        }
    }
    rows.push(r);
    kernel_basis(&RationalMatrix::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_linalg::frac;
    use crate::fixtures::FIG8;
    use crate::geometry::{deform_path, holonomy_derivative};
    use crate::one_loop::{CurveData, CurveTag};
    use crate::triangulation::parse_triangulation;
    use proptest::prelude::*;

    const VOL_41: f64 = 2.029883212819307;

    fn fig8() -> OrderedTriangulation {
        parse_triangulation(FIG8).unwrap()
    }

    fn ctx() -> PotentialContext {
        build_context(&fig8(), &AngleStructure::regular(2)).unwrap()
    }

    #[test]
    fn four_one_context() {
        let c = ctx();
        assert_eq!(c.dim, 2);
        assert_eq!(c.eb_top, DMatrix::identity(2, 2));
        let y = c.phi(&[C64::zero(), C64::zero()]);
        for yk in y {
            assert!((yk + I * 2.0 * PI / 3.0).norm() < 1e-15);
        }
        assert_eq!(c.v_alpha(&AngleStructure::regular(2)), vec![0.0, 0.0]);
        assert_eq!(c.c_coeffs, Some(vec![1.0, -1.0]));
        assert!(c.jones_const.norm() < 1e-15);
        // G - Id = Q + diag((eps - 1)/2)
        let mut m = c.quadratic_diag();
        for k in 0..2 {
            m[(k, k)] += 1.0;
        }
        assert_eq!(m, c.g);
    }

    #[test]
    fn v_alpha_formula() {
        let c = ctx();
        let alpha = AngleStructure::new(vec![[0.9, 1.0, PI - 1.9], [1.2, 0.7, PI - 1.9]]).unwrap();
        assert_eq!(c.v_alpha(&alpha), vec![0.9 - PI / 3.0, 1.2 - PI / 3.0]);
    }

    #[test]
    fn critical_points() {
        let c = ctx();
        let t = fig8();
        for lam in [0.0, 0.05, -0.05, 0.1, -0.1] {
            let xi = I * lam;
            let (s, x) = c.critical_point(xi).unwrap();
            let y = c.phi(&x);
            for (a, b) in y.iter().zip(s.y()) {
                assert!((a - b).norm() < 1e-12);
            }
            let v = c.eval_s(&x, xi).unwrap();
            assert!(v.gradient.norm() < 1e-10, "lambda {lam}: {}", v.gradient.norm());
            assert!((v.gradient.clone() - c.gradient_from_shapes(&s, xi)).norm() < 1e-10);
            let vol = cone_volume(&t, xi).unwrap();
            assert!((v.value.re + vol).abs() < 1e-9, "lambda {lam}: {} vs {}", v.value.re, -vol);
            assert!(c.volume_identity_residual(&x, lam).unwrap() < 1e-9);
        }
        let (_, x) = c.critical_point(C64::zero()).unwrap();
        assert!((c.eval_s(&x, C64::zero()).unwrap().value.re + VOL_41).abs() < 1e-9);
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let c = ctx();
        let x = vec![C64::new(0.3, 0.1), C64::new(-0.2, -0.05)];
        let xi = C64::new(0.02, 0.07);
        let v = c.eval_s(&x, xi).unwrap();
        let h = 1e-5;
        for l in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[l] += h;
            xm[l] -= h;
            let sp = c.eval_s(&xp, xi).unwrap();
            let sm = c.eval_s(&xm, xi).unwrap();
            assert!(((sp.value - sm.value) / (2.0 * h) - v.gradient[l]).norm() < 1e-6);
            let col = (sp.gradient - sm.gradient) / C64::new(2.0 * h, 0.0);
            for k in 0..2 {
                assert!((col[k] - v.hessian[(k, l)]).norm() < 1e-6);
            }
        }
        assert!((v.hessian.clone() - v.hessian.transpose()).norm() < 1e-14);
    }

    #[test]
    fn volume_identity_on_grid() {
        let c = ctx();
        for i in -5..=5 {
            for j in -5..=5 {
                let x = vec![C64::new(0.3 * i as f64, 0.1), C64::new(0.3 * j as f64, -0.2)];
                assert!(c.volume_identity_residual(&x, 0.3).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn hessian_one_loop_proportional() {
        let c = ctx();
        let d = CurveData::new(&fig8(), CurveTag::Longitude).unwrap();
        let mut ratios = Vec::new();
        for lam in [0.0, 0.01, 0.02, 0.05] {
            let (s, x) = c.critical_point(I * lam).unwrap();
            let det = c.eval_s(&x, I * lam).unwrap().hessian.determinant();
            assert!(det.norm() > 1e-6);
            ratios.push(hessian_one_loop_ratio(&c, &s, &d.tau_base(&s).unwrap()).unwrap());
        }
        assert!(ratio_spread(&ratios) < 1e-6, "{ratios:?}");
    }

    #[test]
    fn jones_potential() {
        let c = ctx();
        let t = fig8();
        let (s0, x0) = c.critical_point(C64::zero()).unwrap();
        let w0 = c.jones_w(&x0).unwrap();
        assert!(w0.norm() < 1e-12);
        let xh0 = c.xhat(&x0).unwrap();
        let j0 = c.eval_j(w0, &xh0).unwrap();
        assert!((j0.value.re + VOL_41).abs() < 1e-9);
        assert!(j0.gradient.norm() < 1e-10);
        assert!((meridian_holonomy(&t, &s0)).norm() < 1e-12);
        // w = 0.05 along the meridian deformation
        let sys = GluingSystem::for_curve(&t, &t.meridian).unwrap();
        let p = deform_path(&sys, C64::new(0.05, 0.0), 10).unwrap();
        let s = &p.last().shapes;
        let x = c.x_of_shapes(s);
        let w = c.jones_w(&x).unwrap();
        assert!((w - 0.05).norm() < 1e-10);
        let wl = holonomy(s, &t.longitude);
        let xh = c.fiber_critical_point(w, &xh0).unwrap();
        for (a, b) in xh.iter().zip(c.xhat(&x).unwrap()) {
            assert!((a - b).norm() < 1e-10);
        }
        let v = c.eval_j(w, &xh).unwrap();
        assert!((v.gradient[0] - I * wl / 2.0).norm() < 1e-10);
        // total derivative of the fiber critical value
        let hw = 1e-4;
        let jp = c.eval_j(w + hw, &c.fiber_critical_point(w + hw, &xh).unwrap()).unwrap().value;
        let jm = c.eval_j(w - hw, &c.fiber_critical_point(w - hw, &xh).unwrap()).unwrap().value;
        assert!(((jp - jm) / (2.0 * hw) - I * wl / 2.0).norm() < 1e-6);
        let dwl = holonomy_derivative(&sys, s, &t.longitude).unwrap();
        let chk = jones_hessian_check(&c, s, dwl).unwrap();
        assert!(chk.residual < 1e-5, "{chk:?}");
    }

    #[test]
    fn concavity() {
        let c = ctx();
        let r = concavity_scan(&c, &[0.0, 0.0], 3.0, 21).unwrap();
        assert_eq!(r.points, 441);
        assert!(r.negative_definite && r.max_diagonal < 0.0 && !r.on_boundary);
        // Im y = -pi on the first coordinate
        let b = concavity_scan(&c, &[-PI / 3.0, 0.0], 3.0, 21).unwrap();
        assert!(b.on_boundary && b.max_eigenvalue <= 1e-12);
        assert!(matches!(concavity_scan(&c, &[2.5, 0.0], 1.0, 3), Err(FamedError::BandViolation)));
    }

    #[test]
    fn cut_proximity() {
        let c = ctx();
        let x = vec![C64::new(0.0, -PI / 3.0), C64::zero()];
        assert!(matches!(c.eval_s(&x, C64::zero()), Err(FamedError::CutProximity)));
    }

    #[test]
    fn h_and_r() {
        let c = ctx();
        let (s, _) = c.critical_point(C64::zero()).unwrap();
        let d = CurveData::new(&fig8(), CurveTag::Longitude).unwrap();
        assert!(h_function(&s.y()).unwrap().norm() > 0.0);
        let r = r_function(&s, &d.flattenings.base).unwrap();
        assert!(r.norm().is_finite() && r.norm() > 0.0);
    }

    fn exact_regular() -> ExactAngles {
        ExactAngles(vec![[frac(1, 3), frac(1, 3), frac(1, 3)]; 2])
    }


    #[test]
    fn w_alpha_identity_exact() {
        let c = ctx();
        let t = fig8();
        let base = exact_regular();
        let (l, r) = w_alpha_sides(&c.data, &base).unwrap();
        assert_eq!(l, r);
        let dirs = flat_directions(&t);
        assert!(!dirs.is_empty());
        let step = frac(1, 20);
        let moved = ExactAngles(
            (0..2).map(|j| [0, 1, 2].map(|k| &base.0[j][k] + &step * &dirs[0][3 * j + k])).collect(),
        );
        assert_eq!(t.angular_holonomy_exact(&moved, &t.longitude), t.angular_holonomy_exact(&base, &t.longitude));
        let (l2, r2) = w_alpha_sides(&c.data, &moved).unwrap();
        assert_eq!(l2, r2);
        assert_eq!(r2, r);
        // a structure with a different longitude holonomy
        let other = ExactAngles(vec![
            [frac(1, 3), frac(1, 3) + frac(1, 30), frac(1, 3) - frac(1, 30)],
            [frac(1, 3), frac(1, 3) - frac(1, 30), frac(1, 3) + frac(1, 30)],
        ]);
        if other.to_radians().in_polytope(&t, 1e-12) {
            let (l3, r3) = w_alpha_sides(&c.data, &other).unwrap();
            assert_eq!(l3, r3);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn hessian_symmetric_and_concave(h1 in -3.0f64..3.0, h2 in -3.0f64..3.0, v1 in -0.5f64..0.5, v2 in -0.5f64..0.5) {
            let c = ctx();
            let x = vec![C64::new(h1, v1), C64::new(h2, v2)];
            let val = c.eval_s(&x, C64::zero()).unwrap();
            prop_assert!((val.hessian.clone() - val.hessian.transpose()).norm() < 1e-12);
            let re = val.hessian.map(|z| z.re);
            prop_assert!(SymmetricEigen::new(re).eigenvalues.max() < 0.0);
        }
    }
}
