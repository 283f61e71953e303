//! Face adjacency matrices and the reduced kinematical-kernel data.

use crate::exact_linalg::{frac, rat, two_sided_reduce, RationalMatrix, Rat, TwoSidedWitness};
use crate::triangulation::OrderedTriangulation;
use num_traits::One;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct FaceMatrices {
    /// X_k has a 1 in row i at the face class of x_k(T_i).
    pub x: [RationalMatrix; 4],
    pub cal_a: RationalMatrix,
    pub cal_b: RationalMatrix,
    pub eps: RationalMatrix,
}

pub fn build_face_matrices(t: &OrderedTriangulation) -> FaceMatrices {
    let n = t.num_tetrahedra();
    let x = [0, 1, 2, 3].map(|k| {
        let mut m = RationalMatrix::zeros(n, 2 * n);
        for i in 0..n {
            m.set(i, t.face_class_of(i, k), Rat::one());
        }
        m
    });
    let top = x[0].sub(&x[1]).add(&x[2]);
    let bottom = x[2].sub(&x[3]);
    let eps = RationalMatrix::diag(&t.signs().iter().map(|&s| rat(s as i64)).collect::<Vec<_>>());
    FaceMatrices {
        cal_a: top.vstack(&bottom),
        cal_b: RationalMatrix::zeros(n, n).vstack(&eps),
        eps,
        x,
    }
}

impl FaceMatrices {
    pub fn n(&self) -> usize {
        self.eps.rows()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelReduction {
    pub r: usize,
    pub n: usize,
    pub witness: TwoSidedWitness,
    pub x0e2_r: RationalMatrix,
    pub x0e2_n: RationalMatrix,
    pub e1b_r: RationalMatrix,
    pub e1b_n: RationalMatrix,
    pub g: RationalMatrix,
    pub q: RationalMatrix,
}

impl KernelReduction {
    /// The 2n x N matrix stacking (X0 E2)_n^T over (E1 B)_n.
    pub fn delta_block(&self) -> RationalMatrix {
        let cols = self.g.cols();
        let top = if self.n == 0 { RationalMatrix::zeros(0, cols) } else { self.x0e2_n.transpose() };
        top.vstack(&self.e1b_n)
    }
}

pub fn reduce_kernel(f: &FaceMatrices) -> KernelReduction {
    let n_tet = f.n();
    let w = two_sided_reduce(&f.cal_a);
    let r = w.rank;
    let x0e2 = f.x[0].mul(&w.e2);
    let e1b = w.e1.mul(&f.cal_b);
    let x0e2_r = x0e2.col_range(0, r);
    let x0e2_n = x0e2.col_range(r, 2 * n_tet);
    let e1b_r = e1b.row_range(0, r);
    let e1b_n = e1b.row_range(r, 2 * n_tet);
    let m = x0e2_r.mul(&e1b_r);
    let q = m.add(&m.transpose());
    let half = f.eps.add(&RationalMatrix::identity(n_tet)).scale(&frac(1, 2));
    let g = q.add(&half);
    KernelReduction { r, n: 2 * n_tet - r, witness: w, x0e2_r, x0e2_n, e1b_r, e1b_n, g, q }
}
