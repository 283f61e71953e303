//! Neumann-Zagier matrices, their reduction, symplectic checks and combinatorial flattenings.

use crate::error::{FamedError, Result};
use crate::exact_linalg::{
    integer_solve, rat, rref_with_witness, solve_left, RationalMatrix, Rat,
};
use crate::triangulation::{OrderedTriangulation, PeripheralCurve};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GluingMatrices {
    pub g: Vec<Vec<i64>>,
    pub gp: Vec<Vec<i64>>,
    pub gpp: Vec<Vec<i64>>,
}

impl GluingMatrices {
    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// Row i as a length-3N vector (G | G' | G'').
    pub fn row3(&self, i: usize) -> Vec<i64> {
        let mut v = self.g[i].clone();
        v.extend(&self.gp[i]);
        v.extend(&self.gpp[i]);
        v
    }
}

/// (A | B) row of a curve: A = c - cp, B = cpp - cp.
pub fn curve_ab_row(sigma: &PeripheralCurve) -> (Vec<i64>, Vec<i64>) {
    let a = sigma.c.iter().zip(&sigma.cp).map(|(x, y)| x - y).collect();
    let b = sigma.cpp.iter().zip(&sigma.cp).map(|(x, y)| x - y).collect();
    (a, b)
}

/// All N edge rows in (A|B|nu/pi) form, including the dropped one.
pub fn edge_rows(t: &OrderedTriangulation) -> Vec<Vec<i64>> {
    let n = t.num_tetrahedra();
    (0..t.num_edge_classes())
        .map(|e| {
            let counts = t.edge_shape_counts(e).expect("edge class exists");
            let mut row: Vec<i64> = counts.iter().map(|c| c[0] - c[1]).collect();
            row.extend(counts.iter().map(|c| c[2] - c[1]));
            row.push(2 - counts.iter().map(|c| c[1]).sum::<i64>());
            debug_assert_eq!(row.len(), 2 * n + 1);
            row
        })
        .collect()
}

/// N-1 kept edge rows followed by the curve row.
pub fn build_gluing_matrices(t: &OrderedTriangulation, curve: &PeripheralCurve) -> Result<GluingMatrices> {
    let n = t.num_tetrahedra();
    if curve.len() != n {
        return Err(FamedError::DimensionMismatch("peripheral curve length".into()));
    }
    let rows = edge_rows(t);
    let as_matrix = |rs: &[Vec<i64>]| RationalMatrix::from_i64(&rs.iter().map(|r| r[..2 * n].to_vec()).collect::<Vec<_>>());
    let kept = &rows[..n - 1];
    if n > 1 {
        let km = as_matrix(kept);
        if km.rank() != n - 1 {
            return Err(FamedError::DependentRowViolation);
        }
        let dropped = as_matrix(&rows[n - 1..]);
        let aug_kept = RationalMatrix::from_i64(kept);
        let combo = solve_left(&km, &dropped).map_err(|_| FamedError::DependentRowViolation)?;
        if combo.mul(&aug_kept) != RationalMatrix::from_i64(&rows[n - 1..]) {
            return Err(FamedError::DependentRowViolation);
        }
    }
    let mut g = Vec::with_capacity(n);
    let mut gp = Vec::with_capacity(n);
    let mut gpp = Vec::with_capacity(n);
    for e in 0..n - 1 {
        let counts = t.edge_shape_counts(e)?;
        g.push(counts.iter().map(|c| c[0]).collect());
        gp.push(counts.iter().map(|c| c[1]).collect());
        gpp.push(counts.iter().map(|c| c[2]).collect());
    }
    g.push(curve.c.clone());
    gp.push(curve.cp.clone());
    gpp.push(curve.cpp.clone());
    Ok(GluingMatrices { g, gp, gpp })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NzPair {
    pub a: RationalMatrix,
    pub b: RationalMatrix,
    /// nu / pi.
    pub nu: Vec<i64>,
}

impl NzPair {
    pub fn new(a: RationalMatrix, b: RationalMatrix, nu: Vec<i64>) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || b.rows() != n || b.cols() != n || nu.len() != n {
            return Err(FamedError::DimensionMismatch("NZ pair shapes".into()));
        }
        let rank = a.hstack(&b).rank();
        if rank != n {
            return Err(FamedError::RankDeficient { rank, n });
        }
        Ok(NzPair { a, b, nu })
    }

    pub fn n(&self) -> usize {
        self.nu.len()
    }

    /// B = G'' - G (the alternative convention of the 1-loop formula).
    pub fn b_alternative(gm: &GluingMatrices) -> RationalMatrix {
        let rows: Vec<Vec<i64>> =
            gm.gpp.iter().zip(&gm.g).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect()).collect();
        RationalMatrix::from_i64(&rows)
    }
}

pub fn build_nz_pair(gm: &GluingMatrices) -> Result<NzPair> {
    let n = gm.n();
    let diff = |x: &Vec<Vec<i64>>, y: &Vec<Vec<i64>>| -> Vec<Vec<i64>> {
        x.iter().zip(y).map(|(r, s)| r.iter().zip(s).map(|(p, q)| p - q).collect()).collect()
    };
    let a = RationalMatrix::from_i64(&diff(&gm.g, &gm.gp));
    let b = RationalMatrix::from_i64(&diff(&gm.gpp, &gm.gp));
    let nu = (0..n)
        .map(|j| {
            let s: i64 = gm.gp[j].iter().sum();
            if j + 1 < n {
                2 - s
            } else {
                -s
            }
        })
        .collect();
    NzPair::new(a, b, nu)
}

#[derive(Clone, Debug, Serialize)]
pub struct NzReduction {
    pub e: RationalMatrix,
    pub eb: RationalMatrix,
    pub ea: RationalMatrix,
    /// rank of B = N - 2n when the nullity condition holds.
    pub rank_b: usize,
    /// Pivot columns of (EB)_top.
    pub pivots: Vec<usize>,
    /// Solves E~ (EA)_bot = (EB)_top G - (EA)_top, when solvable.
    pub e_tilde: Option<RationalMatrix>,
    pub e_prime: Option<RationalMatrix>,
}

impl NzReduction {
    pub fn n(&self) -> usize {
        self.e.rows()
    }

    pub fn eb_top(&self) -> RationalMatrix {
        self.eb.row_range(0, self.rank_b)
    }

    pub fn ea_top(&self) -> RationalMatrix {
        self.ea.row_range(0, self.rank_b)
    }

    pub fn ea_bot(&self) -> RationalMatrix {
        self.ea.row_range(self.rank_b, self.n())
    }

    pub fn eb_bot(&self) -> RationalMatrix {
        self.eb.row_range(self.rank_b, self.n())
    }

    pub fn e_top(&self) -> RationalMatrix {
        self.e.row_range(0, self.rank_b)
    }

    pub fn e_bot(&self) -> RationalMatrix {
        self.e.row_range(self.rank_b, self.n())
    }

    pub fn e_prime_top(&self) -> Option<RationalMatrix> {
        self.e_prime.as_ref().map(|m| m.row_range(0, self.rank_b))
    }

    /// Last column of -2 E'_top.
    pub fn c_vector(&self) -> Option<Vec<Rat>> {
        let ep = self.e_prime_top()?;
        let last = ep.cols() - 1;
        Some((0..ep.rows()).map(|i| rat(-2) * ep.get(i, last)).collect())
    }
}

pub fn reduce_nz(p: &NzPair, g: &RationalMatrix) -> Result<NzReduction> {
    let n = p.n();
    if g.rows() != n || g.cols() != n {
        return Err(FamedError::DimensionMismatch("G must be N x N".into()));
    }
    let w = rref_with_witness(&p.b.hstack(&p.a));
    let e = w.e;
    let eb = e.mul(&p.b);
    let ea = e.mul(&p.a);
    let pivots: Vec<usize> = w.pivots.iter().copied().filter(|&c| c < n).collect();
    let rank_b = pivots.len();
    let mut red = NzReduction { e, eb, ea, rank_b, pivots, e_tilde: None, e_prime: None };
    let target = red.eb_top().mul(g).sub(&red.ea_top());
    let bot = red.ea_bot();
    let e_tilde = if bot.rows() == 0 {
        target.is_zero().then(|| RationalMatrix::zeros(rank_b, 0))
    } else {
        solve_left(&bot, &target).ok().filter(|x| x.mul(&bot) == target)
    };
    if let Some(et) = e_tilde {
        let mut lift = RationalMatrix::identity(n);
        for i in 0..rank_b {
            for j in 0..n - rank_b {
                lift.set(i, rank_b + j, et.get(i, j).clone());
            }
        }
        red.e_prime = Some(lift.mul(&red.e));
        red.e_tilde = Some(et);
    }
    Ok(red)
}

/// omega(r, s) = r_A . s_B - r_B . s_A.
pub fn omega(ra: &[Rat], rb: &[Rat], sa: &[Rat], sb: &[Rat]) -> Rat {
    let dot = |x: &[Rat], y: &[Rat]| x.iter().zip(y).fold(Rat::zero(), |acc, (p, q)| acc + p * q);
    dot(ra, sb) - dot(rb, sa)
}

fn to_rats(v: &[i64]) -> Vec<Rat> {
    v.iter().map(|&x| rat(x)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SymplecticReport {
    pub row_pairings_zero: bool,
    pub meridian_edge_pairings_zero: bool,
    pub meridian_longitude: i64,
    /// The meridian was negated to get i(l, m) = +1.
    pub meridian_flipped: bool,
    pub meridian: PeripheralCurve,
}

/// Pairings of the rows of (A|B) (edges + longitude) and of the meridian against them.
pub fn symplectic_check(
    p: &NzPair,
    meridian: &PeripheralCurve,
    longitude: &PeripheralCurve,
) -> Result<SymplecticReport> {
    let n = p.n();
    for i in 0..n {
        for j in i + 1..n {
            let w = omega(p.a.row(i), p.b.row(i), p.a.row(j), p.b.row(j));
            if !w.is_zero() {
                return Err(FamedError::SymplecticViolation(format!("rows {i} and {j} pair to {w}")));
            }
        }
    }
    let (ma, mb) = curve_ab_row(meridian);
    let (ma, mb) = (to_rats(&ma), to_rats(&mb));
    for i in 0..n - 1 {
        let w = omega(&ma, &mb, p.a.row(i), p.b.row(i));
        if !w.is_zero() {
            return Err(FamedError::SymplecticViolation(format!("meridian pairs to {w} with edge {i}")));
        }
    }
    let (la, lb) = curve_ab_row(longitude);
    if to_rats(&la) != p.a.row(n - 1) || to_rats(&lb) != p.b.row(n - 1) {
        return Err(FamedError::SymplecticViolation("last NZ row is not the longitude".into()));
    }
    let ml = omega(&ma, &mb, &to_rats(&la), &to_rats(&lb)).to_integer().to_i64().unwrap_or(i64::MAX);
    match ml {
        0 => Err(FamedError::NotAGeneratorPair),
        -2 => Ok(SymplecticReport {
            row_pairings_zero: true,
            meridian_edge_pairings_zero: true,
            meridian_longitude: -2,
            meridian_flipped: false,
            meridian: meridian.clone(),
        }),
        2 => Ok(SymplecticReport {
            row_pairings_zero: true,
            meridian_edge_pairings_zero: true,
            meridian_longitude: 2,
            meridian_flipped: true,
            meridian: meridian.negated(),
        }),
        other => Err(FamedError::SymplecticViolation(format!("meridian-longitude pairing {other}, expected +-2"))),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Flattening {
    pub f: Vec<i64>,
    pub fp: Vec<i64>,
    pub fpp: Vec<i64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatteningFamily {
    pub base: Flattening,
    /// Integer kernel lattice basis, each vector (f | f' | f'').
    pub lattice: Vec<Vec<i64>>,
}

impl FlatteningFamily {
    pub fn shifted(&self, coeffs: &[i64]) -> Flattening {
        let n = self.base.f.len();
        let mut v: Vec<i64> = self.base.f.iter().chain(&self.base.fp).chain(&self.base.fpp).copied().collect();
        for (c, k) in coeffs.iter().zip(&self.lattice) {
            for (x, y) in v.iter_mut().zip(k) {
                *x += c * y;
            }
        }
        Flattening { f: v[..n].to_vec(), fp: v[n..2 * n].to_vec(), fpp: v[2 * n..].to_vec() }
    }
}

fn flattening_system(gm: &GluingMatrices, meridian: &PeripheralCurve) -> (RationalMatrix, Vec<Rat>) {
    let n = gm.n();
    let mut rows: Vec<Vec<i64>> = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        let mut r = vec![0i64; 3 * n];
        r[i] = 1;
        r[n + i] = 1;
        r[2 * n + i] = 1;
        rows.push(r);
        rhs.push(rat(1));
    }
    for i in 0..n {
        rows.push(gm.row3(i));
        rhs.push(rat(if i + 1 < n { 2 } else { 0 }));
    }
    let mut m = meridian.c.clone();
    m.extend(&meridian.cp);
    m.extend(&meridian.cpp);
    rows.push(m);
    rhs.push(rat(0));
    (RationalMatrix::from_i64(&rows), rhs)
}

pub fn solve_strong_flattening(gm: &GluingMatrices, meridian: &PeripheralCurve) -> Result<FlatteningFamily> {
    let n = gm.n();
    let (m, rhs) = flattening_system(gm, meridian);
    let sol = integer_solve(&m, &rhs).map_err(|e| match e {
        FamedError::NoRationalSolution => FamedError::NoIntegerSolution,
        other => other,
    })?;
    let small = |v: &[BigInt]| -> Result<Vec<i64>> {
        v.iter().map(|x| x.to_i64().ok_or(FamedError::NoIntegerSolution)).collect()
    };
    let x = small(&sol.x)?;
    let base = Flattening { f: x[..n].to_vec(), fp: x[n..2 * n].to_vec(), fpp: x[2 * n..].to_vec() };
    let lattice = sol.kernel.iter().map(|k| small(k)).collect::<Result<Vec<_>>>()?;
    Ok(FlatteningFamily { base, lattice })
}

pub fn verify_flattening(gm: &GluingMatrices, meridian: &PeripheralCurve, fl: &Flattening) -> bool {
    let (m, rhs) = flattening_system(gm, meridian);
    let v: Vec<Rat> = fl.f.iter().chain(&fl.fp).chain(&fl.fpp).map(|&x| rat(x)).collect();
    v.len() == m.cols() && m.mul_vec(&v) == rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_linalg::is_rref;
    use crate::face_kernel::{build_face_matrices, reduce_kernel};
    use crate::fixtures::FIG8;
    use crate::triangulation::parse_triangulation;

    fn setup() -> (OrderedTriangulation, GluingMatrices, NzPair) {
        let t = parse_triangulation(FIG8).unwrap();
        let gm = build_gluing_matrices(&t, &t.longitude).unwrap();
        let p = build_nz_pair(&gm).unwrap();
        (t, gm, p)
    }

    fn g_matrix(t: &OrderedTriangulation) -> RationalMatrix {
        reduce_kernel(&build_face_matrices(t)).g
    }

    #[test]
    fn four_one_gluing_rows() {
        let (t, gm, _) = setup();
        assert_eq!(gm.g[0], vec![2, 0]);
        assert_eq!(gm.gp[0], vec![1, 2]);
        assert_eq!(gm.gpp[0], vec![0, 1]);
        let valence: i64 = t.edge_class(0).unwrap().len() as i64;
        assert_eq!(gm.row3(0).iter().sum::<i64>(), valence);
    }

    #[test]
    fn zero_longitude_rows() {
        let (t, _, _) = setup();
        let gm = build_gluing_matrices(&t, &PeripheralCurve::zero(2)).unwrap();
        assert_eq!(gm.g[1], vec![0, 0]);
        assert_eq!(gm.gp[1], vec![0, 0]);
        assert_eq!(gm.gpp[1], vec![0, 0]);
        assert!(matches!(build_nz_pair(&gm), Err(FamedError::RankDeficient { .. })));
    }

    #[test]
    fn four_one_nz_pair() {
        let (_, gm, p) = setup();
        assert_eq!(p.a, RationalMatrix::from_i64(&[vec![1, -2], vec![0, 4]]));
        assert_eq!(p.b, RationalMatrix::from_i64(&[vec![-1, -1], vec![0, 2]]));
        let expect_nu: Vec<i64> = vec![2 - gm.gp[0].iter().sum::<i64>(), -gm.gp[1].iter().sum::<i64>()];
        assert_eq!(p.nu, expect_nu);
        assert_eq!(p.nu, vec![-1, 2]);
    }

    #[test]
    fn zero_gp_gives_default_nu() {
        let gm = GluingMatrices {
            g: vec![vec![1, 0], vec![0, 1]],
            gp: vec![vec![0, 0], vec![0, 0]],
            gpp: vec![vec![0, 0], vec![0, 0]],
        };
        assert_eq!(build_nz_pair(&gm).unwrap().nu, vec![2, 0]);
    }

    #[test]
    fn renumbering_conjugates() {
        let (t, _, p) = setup();
        let r = t.renumbered(&[1, 0]).unwrap();
        let gm2 = build_gluing_matrices(&r, &r.longitude).unwrap();
        let p2 = build_nz_pair(&gm2).unwrap();
        let perm = [1usize, 0];
        assert_eq!(p2.a.row(1), p.a.select_cols(&perm).row(1));
        assert_eq!(p2.b.row(1), p.b.select_cols(&perm).row(1));
        assert_eq!(p2.nu[1], p.nu[1]);
        // edge equations span the same affine space
        let aug = |q: &NzPair, pc: &[usize]| {
            let a = q.a.select_cols(pc).row_range(0, 1);
            let b = q.b.select_cols(pc).row_range(0, 1);
            a.hstack(&b).hstack(&RationalMatrix::from_i64(&[vec![q.nu[0]]]))
        };
        let x = aug(&p, &perm);
        let y = aug(&p2, &[0, 1]);
        assert_eq!(x.vstack(&y).rank(), 1);
    }

    #[test]
    fn four_one_reduction_is_b_inverse() {
        let (t, _, p) = setup();
        let red = reduce_nz(&p, &g_matrix(&t)).unwrap();
        assert_eq!(red.e, p.b.inverse().unwrap());
        assert_eq!(red.rank_b, 2);
        assert_eq!(red.pivots, vec![0, 1]);
        assert_eq!(red.e_prime.as_ref().unwrap(), &red.e);
        assert_eq!(red.c_vector().unwrap(), vec![rat(1), rat(-1)]);
        assert!(is_rref(&red.eb.hstack(&red.ea)));
    }

    #[test]
    fn identity_b() {
        let a = RationalMatrix::from_i64(&[vec![3, 1], vec![1, 5]]);
        let p = NzPair::new(a.clone(), RationalMatrix::identity(2), vec![0, 0]).unwrap();
        let red = reduce_nz(&p, &a).unwrap();
        assert_eq!(red.e, RationalMatrix::identity(2));
        assert_eq!(red.rank_b, 2);
        assert!(red.e_prime.is_some());
        let red2 = reduce_nz(&p, &RationalMatrix::zeros(2, 2)).unwrap();
        assert!(red2.e_prime.is_none());
    }

    /// N = 4, B of rank 2, rows pairwise symplectically orthogonal, mixed by an invertible P.
    pub(crate) fn synthetic_rank2() -> NzPair {
        let b0 = RationalMatrix::diag(&[rat(1), rat(1), rat(0), rat(0)]);
        let a0 = RationalMatrix::from_i64(&[vec![2, 1, 0, 0], vec![1, 3, 0, 0], vec![0, 0, 1, 0], vec![0, 0, 0, 1]]);
        let mix = RationalMatrix::from_i64(&[vec![1, 0, 1, 0], vec![0, 1, 1, 1], vec![1, 1, 0, 0], vec![0, 0, 1, 1]]);
        assert!(!mix.det().is_zero());
        NzPair::new(mix.mul(&a0), mix.mul(&b0), vec![0, 0, 0, 0]).unwrap()
    }

    #[test]
    fn synthetic_bottom_block_zero() {
        let p = synthetic_rank2();
        for i in 0..4 {
            for j in 0..4 {
                assert!(omega(p.a.row(i), p.b.row(i), p.a.row(j), p.b.row(j)).is_zero());
            }
        }
        let red = reduce_nz(&p, &RationalMatrix::zeros(4, 4)).unwrap();
        assert_eq!(red.rank_b, 2);
        assert!(red.eb_bot().is_zero());
        assert_eq!(red.ea_bot().rank(), 2);
        assert_eq!(red.eb_top().rank(), 2);
        assert!(red.ea_bot().mul(&red.eb_top().transpose()).is_zero());
    }

    #[test]
    fn symplectic_four_one() {
        let (t, _, p) = setup();
        let rep = symplectic_check(&p, &t.meridian, &t.longitude).unwrap();
        assert!(rep.row_pairings_zero && rep.meridian_edge_pairings_zero);
        assert_eq!(rep.meridian_longitude, -2);
        assert!(!rep.meridian_flipped);
        let flipped = symplectic_check(&p, &t.meridian.negated(), &t.longitude).unwrap();
        assert!(flipped.meridian_flipped);
        assert_eq!(flipped.meridian, t.meridian);
    }

    #[test]
    fn meridian_equal_longitude_not_generator() {
        let (t, _, p) = setup();
        assert!(matches!(symplectic_check(&p, &t.longitude, &t.longitude), Err(FamedError::NotAGeneratorPair)));
    }

    #[test]
    fn corrupted_meridian_detected() {
        let (t, _, p) = setup();
        for j in 0..2 {
            for field in 0..3 {
                let mut m = t.meridian.clone();
                match field {
                    0 => m.c[j] += 1,
                    1 => m.cp[j] += 1,
                    _ => m.cpp[j] += 1,
                }
                assert!(symplectic_check(&p, &m, &t.longitude).is_err(), "tet {j} field {field}");
            }
        }
    }

    #[test]
    fn edge_rows_pair_to_zero() {
        let (t, _, _) = setup();
        let rows = edge_rows(&t);
        let (la, lb) = curve_ab_row(&t.longitude);
        let (ma, mb) = curve_ab_row(&t.meridian);
        for r in &rows {
            let (ra, rb) = (to_rats(&r[..2]), to_rats(&r[2..4]));
            assert!(omega(&ra, &rb, &to_rats(&la), &to_rats(&lb)).is_zero());
            assert!(omega(&ra, &rb, &to_rats(&ma), &to_rats(&mb)).is_zero());
        }
    }

    #[test]
    fn strong_flattening_four_one() {
        let (t, gm, _) = setup();
        let fam = solve_strong_flattening(&gm, &t.meridian).unwrap();
        assert!(verify_flattening(&gm, &t.meridian, &fam.base));
        for k in 0..fam.lattice.len() {
            let mut c = vec![0; fam.lattice.len()];
            c[k] = 1;
            assert!(verify_flattening(&gm, &t.meridian, &fam.shifted(&c)));
        }
        let mut bad = fam.base.clone();
        bad.f[0] += 1;
        assert!(!verify_flattening(&gm, &t.meridian, &bad));
    }

    #[test]
    fn symmetric_flattening_impossible_but_solver_succeeds() {
        // f = f' = f'' would need 3f = 1
        let (t, gm, _) = setup();
        let fam = solve_strong_flattening(&gm, &t.meridian).unwrap();
        let b = &fam.base;
        assert!((0..2).any(|i| b.f[i] != b.fp[i] || b.fp[i] != b.fpp[i]));
    }
}
