//! Exact decision of the generalized FAMED conditions, with re-checkable witnesses.

use crate::error::Result;
use crate::exact_linalg::{
    rat, rref_with_witness, ser_opt_rats, ser_rat, ser_rats, solve_left, RationalMatrix, Rat,
};
use crate::face_kernel::{build_face_matrices, reduce_kernel, FaceMatrices, KernelReduction};
use crate::nz_data::{
    build_gluing_matrices, build_nz_pair, curve_ab_row, reduce_nz, symplectic_check, GluingMatrices,
    NzPair, NzReduction, SymplecticReport,
};
use crate::triangulation::{ExactAngles, OrderedTriangulation, PeripheralCurve};
use num_traits::{One, Signed, Zero};
use serde::Serialize;

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal { x: Vec<Rat>, value: Rat, dual: Vec<Rat> },
    /// y with A^T y >= 0 and b.y < 0.
    Infeasible { farkas: Vec<Rat> },
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Rat>>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rat {
        self.rows[i].last().unwrap()
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let inv = self.rows[r][col].recip();
        for v in self.rows[r].iter_mut() {
            *v *= &inv;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r && !row[col].is_zero() {
                let f = row[col].clone();
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= &f * p;
                }
            }
        }
        self.basis[r] = col;
    }

    fn value(&self, cost: &[Rat]) -> Rat {
        self.basis.iter().enumerate().map(|(i, &b)| &cost[b] * self.rhs(i)).sum()
    }

    /// Bland's rule; false when unbounded.
    fn run(&mut self, cost: &[Rat], allowed: usize) -> bool {
        loop {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let z: Rat = self.basis.iter().enumerate().map(|(i, &b)| &cost[b] * &self.rows[i][j]).sum();
                cost[j] > z
            });
            let Some(j) = entering else { return true };
            let mut best: Option<(usize, Rat)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][j];
                if a.is_positive() {
                    let ratio = self.rhs(i) / a;
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = best else { return false };
            self.pivot(r, j);
        }
    }

    fn duals(&self, cost: &[Rat], n: usize, m: usize) -> Vec<Rat> {
        (0..m)
            .map(|k| self.basis.iter().enumerate().map(|(i, &b)| &cost[b] * &self.rows[i][n + k]).sum())
            .collect()
    }
}

/// Maximize c.x subject to A x = b, x >= 0, in exact arithmetic (two-phase simplex).
pub fn lp_maximize(a: &RationalMatrix, b: &[Rat], c: &[Rat]) -> LpOutcome {
    let (m, n) = (a.rows(), a.cols());
    let signs: Vec<Rat> = b.iter().map(|q| if q.is_negative() { rat(-1) } else { rat(1) }).collect();
    let rows = (0..m)
        .map(|i| {
            let mut r: Vec<Rat> = a.row(i).iter().map(|q| q * &signs[i]).collect();
            r.extend((0..m).map(|k| if k == i { Rat::one() } else { Rat::zero() }));
            r.push(&b[i] * &signs[i]);
            r
        })
        .collect();
    let mut tab = Tableau { rows, basis: (n..n + m).collect() };
    let mut cost1 = vec![Rat::zero(); n];
    cost1.extend((0..m).map(|_| rat(-1)));
    tab.run(&cost1, n + m);
    if tab.value(&cost1).is_negative() {
        let y = tab.duals(&cost1, n, m);
        return LpOutcome::Infeasible { farkas: y.iter().zip(&signs).map(|(p, s)| p * s).collect() };
    }
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !tab.rows[i][j].is_zero()) {
                tab.pivot(i, j);
            }
        }
    }
    let mut cost2 = c.to_vec();
    cost2.extend((0..m).map(|_| Rat::zero()));
    if !tab.run(&cost2, n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![Rat::zero(); n];
    for (i, &bcol) in tab.basis.iter().enumerate() {
        if bcol < n {
            x[bcol] = tab.rhs(i).clone();
        }
    }
    let y = tab.duals(&cost2, n, m);
    LpOutcome::Optimal {
        value: tab.value(&cost2),
        x,
        dual: y.iter().zip(&signs).map(|(p, s)| p * s).collect(),
    }
}

/// Max-min-angle LP: variables (t+, t-, s_jk), angle_jk = t + s_jk in units of pi.
pub fn angle_lp(num_tets: usize, edges: &[Vec<[i64; 3]>]) -> (RationalMatrix, Vec<Rat>, Vec<Rat>) {
    let cols = 2 + 3 * num_tets;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..num_tets {
        let mut r = vec![0i64; cols];
        r[0] = 3;
        r[1] = -3;
        for k in 0..3 {
            r[2 + 3 * j + k] = 1;
        }
        rows.push(r);
        rhs.push(rat(1));
    }
    for e in edges {
        let mut r = vec![0i64; cols];
        let val: i64 = e.iter().flatten().sum();
        r[0] = val;
        r[1] = -val;
        for (j, c) in e.iter().enumerate() {
            for k in 0..3 {
                r[2 + 3 * j + k] = c[k];
            }
        }
        rows.push(r);
        rhs.push(rat(2));
    }
    let mut c = vec![Rat::zero(); cols];
    c[0] = rat(1);
    c[1] = rat(-1);
    (RationalMatrix::from_i64(&rows), rhs, c)
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AngleFeasibility {
    Feasible {
        angles: ExactAngles,
        #[serde(serialize_with = "ser_rat")]
        min_angle: Rat,
    },
    /// max min angle <= 0, certified by an optimal dual (or a Farkas vector when the system has no real solution).
    Infeasible {
        #[serde(serialize_with = "crate::exact_linalg::ser_opt_rat")]
        max_min_angle: Option<Rat>,
        #[serde(serialize_with = "ser_rats")]
        dual: Vec<Rat>,
    },
}

impl AngleFeasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, AngleFeasibility::Feasible { .. })
    }

    pub fn verify(&self, num_tets: usize, edges: &[Vec<[i64; 3]>]) -> bool {
        let (a, b, c) = angle_lp(num_tets, edges);
        match self {
            AngleFeasibility::Feasible { angles, min_angle } => {
                angles.0.len() == num_tets
                    && min_angle.is_positive()
                    && angles.0.iter().all(|x| x.iter().all(|q| q >= min_angle) && x.iter().sum::<Rat>() == rat(1))
                    && edges.iter().all(|e| {
                        e.iter().zip(&angles.0).map(|(c, x)| (0..3).map(|k| rat(c[k]) * &x[k]).sum::<Rat>()).sum::<Rat>()
                            == rat(2)
                    })
            }
            AngleFeasibility::Infeasible { max_min_angle, dual } => {
                if dual.len() != a.rows() {
                    return false;
                }
                let aty = a.transpose().mul_vec(dual);
                let by: Rat = b.iter().zip(dual).map(|(p, q)| p * q).sum();
                match max_min_angle {
                    Some(v) => aty.iter().zip(&c).all(|(l, r)| l >= r) && by == *v && !v.is_positive(),
                    None => aty.iter().all(|q| !q.is_negative()) && by.is_negative(),
                }
            }
        }
    }
}

pub fn solve_angle_lp(num_tets: usize, edges: &[Vec<[i64; 3]>]) -> AngleFeasibility {
    let (a, b, c) = angle_lp(num_tets, edges);
    match lp_maximize(&a, &b, &c) {
        LpOutcome::Optimal { x, value, dual } => {
            if value.is_positive() {
                let t = &x[0] - &x[1];
                let angles = (0..num_tets).map(|j| [0, 1, 2].map(|k| &t + &x[2 + 3 * j + k])).collect();
                AngleFeasibility::Feasible { angles: ExactAngles(angles), min_angle: value }
            } else {
                AngleFeasibility::Infeasible { max_min_angle: Some(value), dual }
            }
        }
        LpOutcome::Infeasible { farkas } => AngleFeasibility::Infeasible { max_min_angle: None, dual: farkas },
        LpOutcome::Unbounded => unreachable!("t is bounded by 1/3"),
    }
}

pub fn edge_incidence(t: &OrderedTriangulation) -> Vec<Vec<[i64; 3]>> {
    (0..t.num_edge_classes()).map(|e| t.edge_angle_counts(e).expect("edge exists")).collect()
}

pub fn angle_polytope_feasible(t: &OrderedTriangulation) -> AngleFeasibility {
    solve_angle_lp(t.num_tetrahedra(), &edge_incidence(t))
}

/// Everything the FAMED clauses and the potential need, built once.
#[derive(Clone, Debug)]
pub struct FamedData {
    pub tri: OrderedTriangulation,
    pub faces: FaceMatrices,
    pub kernel: KernelReduction,
    pub gluing: GluingMatrices,
    pub nz: NzPair,
    pub reduction: NzReduction,
}

impl FamedData {
    pub fn build(t: &OrderedTriangulation) -> Result<Self> {
        let faces = build_face_matrices(t);
        let kernel = reduce_kernel(&faces);
        let gluing = build_gluing_matrices(t, &t.longitude)?;
        let nz = build_nz_pair(&gluing)?;
        let reduction = reduce_nz(&nz, &kernel.g)?;
        Ok(FamedData { tri: t.clone(), faces, kernel, gluing, nz, reduction })
    }

    pub fn num_tetrahedra(&self) -> usize {
        self.tri.num_tetrahedra()
    }
}

pub fn clause2(nullity_b: usize, nullity_cal_a: usize, num_tets: usize) -> bool {
    nullity_b == 2 * nullity_cal_a && nullity_b < num_tets
}

/// RREFs of (EA)_bot and of the delta block; equal iff row equivalent.
pub fn clause3(red: &NzReduction, kernel: &KernelReduction) -> (bool, RationalMatrix, RationalMatrix) {
    let x = rref_with_witness(&red.ea_bot()).r;
    let y = rref_with_witness(&kernel.delta_block()).r;
    (x == y, x, y)
}

pub fn clause4_matrices(red: &NzReduction, g: &RationalMatrix) -> (RationalMatrix, RationalMatrix) {
    let n = red.n();
    let bottom = RationalMatrix::zeros(n - red.rank_b, n).hstack(&red.ea_bot());
    let m1 = red.eb_top().hstack(&red.ea_top()).vstack(&bottom);
    let m2 = red.eb_top().hstack(&red.eb_top().mul(g)).vstack(&bottom);
    (m1, m2)
}

pub fn clause4(red: &NzReduction, g: &RationalMatrix) -> (bool, RationalMatrix, RationalMatrix) {
    let (m1, m2) = clause4_matrices(red, g);
    let x = rref_with_witness(&m1).r;
    let y = rref_with_witness(&m2).r;
    (x == y, x, y)
}

#[derive(Clone, Debug, Serialize)]
pub struct Def13Report {
    pub clause1: bool,
    pub angle_structure: AngleFeasibility,
    pub clause2: bool,
    pub nullity_b: usize,
    pub nullity_cal_a: usize,
    pub clause3: bool,
    pub rref_ea_bottom: RationalMatrix,
    pub rref_delta_block: RationalMatrix,
    pub clause4: bool,
    pub rref_stacked_a: RationalMatrix,
    pub rref_stacked_g: RationalMatrix,
    pub e_tilde: Option<RationalMatrix>,
    pub e_prime: Option<RationalMatrix>,
    pub passed: bool,
}

pub fn check_def_1_3(d: &FamedData) -> Def13Report {
    let angle_structure = angle_polytope_feasible(&d.tri);
    let nullity_b = d.nz.b.nullity();
    let nullity_cal_a = d.kernel.n;
    let c2 = clause2(nullity_b, nullity_cal_a, d.num_tetrahedra());
    let (c3, rref_ea_bottom, rref_delta_block) = clause3(&d.reduction, &d.kernel);
    let (c4, rref_stacked_a, rref_stacked_g) = clause4(&d.reduction, &d.kernel.g);
    let c1 = angle_structure.is_feasible();
    Def13Report {
        clause1: c1,
        angle_structure,
        clause2: c2,
        nullity_b,
        nullity_cal_a,
        clause3: c3,
        rref_ea_bottom,
        rref_delta_block,
        clause4: c4,
        rref_stacked_a,
        rref_stacked_g,
        e_tilde: d.reduction.e_tilde.clone(),
        e_prime: d.reduction.e_prime.clone(),
        passed: c1 && c2 && c3 && c4,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum HolonomyMatch {
    Match {
        #[serde(serialize_with = "ser_rat")]
        k: Rat,
        /// Coefficients of the kept edge rows.
        #[serde(serialize_with = "ser_rats")]
        lambda: Vec<Rat>,
    },
    NoMatch {
        /// (A_m - C~ | B_m), not in the edge-row span.
        #[serde(serialize_with = "ser_rats")]
        residual: Vec<Rat>,
    },
}

/// Row (A_m - C~ | B_m) with C~ placing C_i at pivot k_i.
pub fn holonomy_target(c_vector: &[Rat], pivots: &[usize], meridian: &PeripheralCurve) -> Vec<Rat> {
    let (am, bm) = curve_ab_row(meridian);
    let mut a: Vec<Rat> = am.iter().map(|&x| rat(x)).collect();
    for (c, &k) in c_vector.iter().zip(pivots) {
        a[k] -= c;
    }
    a.extend(bm.iter().map(|&x| rat(x)));
    a
}

/// Whether sum C_i Log z_{k_i} equals the meridian holonomy modulo edge equations and i pi Q.
pub fn meridian_holonomy_match(
    c_vector: &[Rat],
    pivots: &[usize],
    nz: &NzPair,
    meridian: &PeripheralCurve,
) -> HolonomyMatch {
    let n = nz.n();
    let target = holonomy_target(c_vector, pivots, meridian);
    let edges = nz.a.hstack(&nz.b).row_range(0, n - 1);
    let target_m = RationalMatrix::from_rows(vec![target.clone()]);
    let lambda = if n == 1 {
        target.iter().all(|q| q.is_zero()).then(Vec::new)
    } else {
        solve_left(&edges, &target_m).ok().filter(|x| x.mul(&edges) == target_m).map(|x| x.row(0).to_vec())
    };
    match lambda {
        Some(lambda) => {
            let k = lambda.iter().zip(&nz.nu).map(|(l, &v)| l * rat(v)).sum::<Rat>() + rat(meridian.cp.iter().sum());
            HolonomyMatch::Match { k, lambda }
        }
        None => HolonomyMatch::NoMatch { residual: target },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Def17Report {
    pub clause2: bool,
    pub clause2_vacuous: bool,
    #[serde(serialize_with = "ser_rats")]
    pub e_bottom_last_column: Vec<Rat>,
    pub symplectic: Option<SymplecticReport>,
    pub symplectic_error: Option<String>,
    #[serde(serialize_with = "ser_opt_rats")]
    pub c_vector: Option<Vec<Rat>>,
    pub pivots: Vec<usize>,
    pub clause3: bool,
    pub holonomy: Option<HolonomyMatch>,
    pub passed: bool,
}

pub fn check_def_1_7(d: &FamedData, def13: &Def13Report) -> Def17Report {
    let n = d.num_tetrahedra();
    let e_bot = d.reduction.e_bot();
    let e_bottom_last_column = e_bot.col(n - 1);
    let c2 = e_bottom_last_column.iter().all(|q| q.is_zero());
    let (symplectic, symplectic_error) = match symplectic_check(&d.nz, &d.tri.meridian, &d.tri.longitude) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let meridian = symplectic.as_ref().map(|r| r.meridian.clone()).unwrap_or_else(|| d.tri.meridian.clone());
    let c_vector = d.reduction.c_vector();
    let holonomy = c_vector.as_ref().map(|c| meridian_holonomy_match(c, &d.reduction.pivots, &d.nz, &meridian));
    let c3 = symplectic.is_some() && matches!(holonomy, Some(HolonomyMatch::Match { .. }));
    Def17Report {
        clause2: c2,
        clause2_vacuous: e_bot.rows() == 0,
        e_bottom_last_column,
        symplectic,
        symplectic_error,
        c_vector,
        pivots: d.reduction.pivots.clone(),
        clause3: c3,
        holonomy,
        passed: def13.passed && c2 && c3,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FamedCertificate {
    pub name: Option<String>,
    pub def_1_3: Def13Report,
    pub def_1_7: Def17Report,
    pub famed_l: bool,
    pub famed_lm: bool,
}

pub fn check(t: &OrderedTriangulation) -> Result<(FamedData, FamedCertificate)> {
    let d = FamedData::build(t)?;
    let def_1_3 = check_def_1_3(&d);
    let def_1_7 = check_def_1_7(&d, &def_1_3);
    let cert = FamedCertificate {
        name: t.name.clone(),
        famed_l: def_1_3.passed,
        famed_lm: def_1_7.passed,
        def_1_3,
        def_1_7,
    };
    Ok((d, cert))
}

impl FamedCertificate {
    /// Re-check every stored witness against freshly built matrices; no LP or search is re-run.
    pub fn verify(&self, t: &OrderedTriangulation) -> Result<bool> {
        let d = FamedData::build(t)?;
        let n = d.num_tetrahedra();
        let r13 = &self.def_1_3;
        let mut ok = r13.angle_structure.verify(n, &edge_incidence(t)) && r13.clause1 == r13.angle_structure.is_feasible();
        ok &= r13.nullity_b == d.nz.b.nullity() && r13.nullity_cal_a == d.faces.cal_a.nullity();
        ok &= r13.clause2 == clause2(r13.nullity_b, r13.nullity_cal_a, n);
        let red = &d.reduction;
        ok &= rref_with_witness(&red.ea_bot()).r == r13.rref_ea_bottom
            && rref_with_witness(&d.kernel.delta_block()).r == r13.rref_delta_block
            && r13.clause3 == (r13.rref_ea_bottom == r13.rref_delta_block);
        let (m1, m2) = clause4_matrices(red, &d.kernel.g);
        ok &= rref_with_witness(&m1).r == r13.rref_stacked_a
            && rref_with_witness(&m2).r == r13.rref_stacked_g
            && r13.clause4 == (r13.rref_stacked_a == r13.rref_stacked_g);
        if let (Some(et), Some(ep)) = (&r13.e_tilde, &r13.e_prime) {
            ok &= et.mul(&red.ea_bot()) == red.eb_top().mul(&d.kernel.g).sub(&red.ea_top());
            let mut lift = RationalMatrix::identity(n);
            for i in 0..red.rank_b {
                for j in 0..n - red.rank_b {
                    lift.set(i, red.rank_b + j, et.get(i, j).clone());
                }
            }
            ok &= *ep == lift.mul(&red.e);
        }
        ok &= r13.passed == (r13.clause1 && r13.clause2 && r13.clause3 && r13.clause4);

        let r17 = &self.def_1_7;
        ok &= r17.e_bottom_last_column == red.e_bot().col(n - 1)
            && r17.clause2 == r17.e_bottom_last_column.iter().all(|q| q.is_zero());
        if let (Some(c), Some(ep)) = (&r17.c_vector, &r13.e_prime) {
            let top = ep.row_range(0, red.rank_b);
            ok &= *c == top.col(n - 1).iter().map(|q| rat(-2) * q).collect::<Vec<_>>();
        }
        if let (Some(HolonomyMatch::Match { k, lambda }), Some(c)) = (&r17.holonomy, &r17.c_vector) {
            let meridian = r17.symplectic.as_ref().map(|s| s.meridian.clone()).unwrap_or_else(|| t.meridian.clone());
            let target = holonomy_target(c, &r17.pivots, &meridian);
            let edges = d.nz.a.hstack(&d.nz.b).row_range(0, n - 1);
            let combo: Vec<Rat> = if n == 1 { vec![Rat::zero(); 2] } else { edges.transpose().mul_vec(lambda) };
            ok &= combo == target;
            ok &= *k == lambda.iter().zip(&d.nz.nu).map(|(l, &v)| l * rat(v)).sum::<Rat>() + rat(meridian.cp.iter().sum());
        }
        ok &= self.famed_l == r13.passed && self.famed_lm == (r13.passed && r17.clause2 && r17.clause3);
        Ok(ok)
    }
}
