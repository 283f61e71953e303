//! The 1-loop invariant of a shape assignment and its change-of-curve check.

use crate::error::{FamedError, Result};
use crate::exact_linalg::{rat_to_f64, RationalMatrix};
use crate::geometry::{holonomy, DeformationPath, ShapeAssignment};
use crate::nz_data::{
    build_gluing_matrices, build_nz_pair, solve_strong_flattening, verify_flattening, Flattening,
    FlatteningFamily, GluingMatrices, NzPair,
};
use crate::triangulation::{OrderedTriangulation, PeripheralCurve};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

/// Which difference of gluing matrices plays the role of B in the determinant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
pub enum BConvention {
    /// B = G'' - G', as in the gluing equations.
    #[default]
    GppMinusGp,
    /// B = G'' - G.
    GppMinusG,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CurveTag {
    Longitude,
    Meridian,
}

#[derive(Clone, Debug, Serialize)]
pub struct OneLoopValue {
    /// Representative of +-tau.
    pub tau: C64,
    pub curve: CurveTag,
    pub flattening: Flattening,
    pub convention: BConvention,
    /// tau under the other B convention.
    pub alternative: C64,
    /// Relative modulus gap between the two conventions.
    pub convention_gap: f64,
}

impl OneLoopValue {
    pub fn modulus(&self) -> f64 {
        self.tau.norm()
    }

    pub fn both_signs(&self) -> [C64; 2] {
        [self.tau, -self.tau]
    }
}

/// Gluing data for one choice of peripheral curve in the last row.
#[derive(Clone, Debug)]
pub struct CurveData {
    pub tag: CurveTag,
    pub curve: PeripheralCurve,
    pub other: PeripheralCurve,
    pub gluing: GluingMatrices,
    pub pair: NzPair,
    pub flattenings: FlatteningFamily,
}

impl CurveData {
    pub fn new(t: &OrderedTriangulation, tag: CurveTag) -> Result<Self> {
        let (curve, other) = match tag {
            CurveTag::Longitude => (t.longitude.clone(), t.meridian.clone()),
            CurveTag::Meridian => (t.meridian.clone(), t.longitude.clone()),
        };
        let gluing = build_gluing_matrices(t, &curve)?;
        let pair = build_nz_pair(&gluing)?;
        let flattenings = solve_strong_flattening(&gluing, &other)?;
        Ok(CurveData { tag, curve, other, gluing, pair, flattenings })
    }

    pub fn tau(&self, s: &ShapeAssignment, f: &Flattening, conv: BConvention) -> Result<OneLoopValue> {
        if !verify_flattening(&self.gluing, &self.other, f) {
            return Err(FamedError::InvalidFlattening);
        }
        one_loop_invariant(s, &self.gluing, &self.pair, f, self.tag, conv)
    }

    pub fn tau_base(&self, s: &ShapeAssignment) -> Result<OneLoopValue> {
        self.tau(s, &self.flattenings.base, BConvention::default())
    }
}

fn to_complex(m: &RationalMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| C64::new(rat_to_f64(m.get(i, j)), 0.0))
}

fn half_det(a: &DMatrix<C64>, b: &DMatrix<C64>, s: &ShapeAssignment) -> C64 {
    let n = s.n();
    let dzpp = DMatrix::from_fn(n, n, |i, j| if i == j { s.zpp(i) } else { C64::new(0.0, 0.0) });
    let dzinv = DMatrix::from_fn(n, n, |i, j| if i == j { s.z[i].inv() } else { C64::new(0.0, 0.0) });
    (a * dzpp + b * dzinv).determinant() / 2.0
}

/// tau = 1/2 det(A D_{z''} + B D_z^{-1}) prod z^{f''} z''^{-f}; the flattening must already verify.
pub fn one_loop_invariant(
    s: &ShapeAssignment,
    gm: &GluingMatrices,
    p: &NzPair,
    f: &Flattening,
    tag: CurveTag,
    conv: BConvention,
) -> Result<OneLoopValue> {
    let n = s.n();
    if p.n() != n || f.f.len() != n {
        return Err(FamedError::DimensionMismatch("shapes vs NZ data".into()));
    }
    if s.z.iter().any(|z| z.norm() < 1e-14 || (z - 1.0).norm() < 1e-14) {
        return Err(FamedError::SingularShape);
    }
    let a = to_complex(&p.a);
    let b_main = to_complex(&p.b);
    let b_alt = to_complex(&NzPair::b_alternative(gm));
    let monomial: C64 = (0..n).map(|i| s.z[i].powi(f.fpp[i] as i32) * s.zpp(i).powi(-f.f[i] as i32)).product();
    let (b, other) = match conv {
        BConvention::GppMinusGp => (b_main, b_alt),
        BConvention::GppMinusG => (b_alt, b_main),
    };
    let tau = half_det(&a, &b, s) * monomial;
    if tau.norm() == 0.0 {
        return Err(FamedError::ZeroInvariant);
    }
    let alternative = half_det(&a, &other, s) * monomial;
    let convention_gap = (alternative.norm() - tau.norm()).abs() / tau.norm();
    Ok(OneLoopValue { tau, curve: tag, flattening: f.clone(), convention: conv, alternative, convention_gap })
}

/// Derivative of the other curve's holonomy at the path start (second-order one-sided stencil, equal steps).
pub fn path_start_derivative(path: &DeformationPath, other: &PeripheralCurve) -> Result<C64> {
    if path.len() < 3 {
        return Err(FamedError::InsufficientSamples { needed: 3, got: path.len() });
    }
    let s = &path.samples;
    let h = s[1].param - s[0].param;
    let v: Vec<C64> = s[..3].iter().map(|p| holonomy(&p.shapes, other)).collect();
    Ok((-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h))
}

/// | |tau_m| - |dw_m/dw_l| |tau_l| | / |tau_m| with dw_m/dw_l taken along a longitude path.
pub fn change_of_curve_check(
    path: &DeformationPath,
    meridian: &PeripheralCurve,
    tau_l: C64,
    tau_m: C64,
) -> Result<f64> {
    if tau_l.norm() == 0.0 || tau_m.norm() == 0.0 {
        return Err(FamedError::ZeroInvariant);
    }
    let d = path_start_derivative(path, meridian)?;
    Ok((tau_m.norm() - d.norm() * tau_l.norm()).abs() / tau_m.norm())
}
