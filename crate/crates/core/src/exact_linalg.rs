//! Exact rational matrices with recorded row/column operation witnesses.

use crate::error::{FamedError, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use std::fmt;

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn frac(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RationalMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|q| q.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Serialize for RationalMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix { rows, cols, data: vec![Rat::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rat::one());
        }
        m
    }

    pub fn from_i64(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, rat(v));
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        RationalMatrix { rows: r, cols: c, data }
    }

    /// Empty matrix with a fixed column count (0 rows).
    pub fn empty_rows(cols: usize) -> Self {
        Self::zeros(0, cols)
    }

    pub fn diag(d: &[Rat]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, v.clone());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rat) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Rat> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|q| q.is_zero())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let v = out.get(i, j) + a * b;
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(Rat::zero(), |acc, (a, b)| acc + a * b))
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        RationalMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        RationalMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: &Rat) -> Self {
        let data = self.data.iter().map(|a| a * s).collect();
        RationalMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn neg(&self) -> Self {
        self.scale(&rat(-1))
    }

    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "hstack needs equal row counts");
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j).clone());
            }
        }
        out
    }

    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "vstack needs equal column counts");
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        RationalMatrix { rows: self.rows + other.rows, cols: self.cols, data }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len(), self.cols);
        for (r, &i) in idx.iter().enumerate() {
            for j in 0..self.cols {
                out.set(r, j, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (c, &j) in idx.iter().enumerate() {
                out.set(i, c, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn row_range(&self, start: usize, end: usize) -> Self {
        self.select_rows(&(start..end).collect::<Vec<_>>())
    }

    pub fn col_range(&self, start: usize, end: usize) -> Self {
        self.select_cols(&(start..end).collect::<Vec<_>>())
    }

    pub fn rank(&self) -> usize {
        rref_with_witness(self).pivots.len()
    }

    pub fn nullity(&self) -> usize {
        self.cols - self.rank()
    }

    pub fn det(&self) -> Rat {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = Rat::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&r| !a.get(r, c).is_zero()) else {
                return Rat::zero();
            };
            if p != c {
                a.swap_rows(p, c);
                det = -det;
            }
            let piv = a.get(c, c).clone();
            det *= &piv;
            for r in c + 1..n {
                let f = a.get(r, c) / &piv;
                if !f.is_zero() {
                    a.add_row_multiple(r, c, &(-f));
                }
            }
        }
        det
    }

    pub fn inverse(&self) -> Option<Self> {
        if !self.is_square() {
            return None;
        }
        let w = rref_with_witness(self);
        if w.pivots.len() == self.rows {
            Some(w.e)
        } else {
            None
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(rat_to_f64).collect())
            .collect()
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(rat_string).collect())
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn scale_row(&mut self, r: usize, s: &Rat) {
        for j in 0..self.cols {
            let v = self.get(r, j) * s;
            self.set(r, j, v);
        }
    }

    /// row[target] += f * row[src]
    fn add_row_multiple(&mut self, target: usize, src: usize, f: &Rat) {
        for j in 0..self.cols {
            let s = self.get(src, j);
            if !s.is_zero() {
                let v = self.get(target, j) + f * s;
                self.set(target, j, v);
            }
        }
    }
}

pub fn rat_to_f64(q: &Rat) -> f64 {
    q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN)
}

/// "p/q" form (integers print without a denominator).
pub fn rat_string(q: &Rat) -> String {
    q.to_string()
}

pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                None
            } else {
                Some(Rat::new(p, q))
            }
        }
        None => Some(Rat::from_integer(s.parse().ok()?)),
    }
}

pub fn ser_rat<S: Serializer>(q: &Rat, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rat_string(q))
}

pub fn ser_rats<S: Serializer>(v: &[Rat], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(rat_string).collect::<Vec<_>>().serialize(s)
}

pub fn ser_opt_rats<S: Serializer>(v: &Option<Vec<Rat>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.as_ref().map(|v| v.iter().map(rat_string).collect::<Vec<_>>()).serialize(s)
}

pub fn ser_opt_rat<S: Serializer>(v: &Option<Rat>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.as_ref().map(rat_string).serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct RrefWitness {
    pub input: RationalMatrix,
    pub r: RationalMatrix,
    pub e: RationalMatrix,
    pub pivots: Vec<usize>,
}

impl RrefWitness {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn verify(&self) -> bool {
        self.e.mul(&self.input) == self.r && is_rref(&self.r) && !self.e.det().is_zero()
    }
}

/// Gauss-Jordan elimination; pivot = first nonzero entry at or below the current row.
pub fn rref_with_witness(m: &RationalMatrix) -> RrefWitness {
    let (rows, cols) = (m.rows(), m.cols());
    let mut r = m.clone();
    let mut e = RationalMatrix::identity(rows);
    let mut pivots = Vec::new();
    let mut row = 0;
    for c in 0..cols {
        if row == rows {
            break;
        }
        let Some(p) = (row..rows).find(|&i| !r.get(i, c).is_zero()) else {
            continue;
        };
        r.swap_rows(p, row);
        e.swap_rows(p, row);
        let inv = r.get(row, c).recip();
        r.scale_row(row, &inv);
        e.scale_row(row, &inv);
        for i in 0..rows {
            if i != row {
                let f = -r.get(i, c).clone();
                if !f.is_zero() {
                    r.add_row_multiple(i, row, &f);
                    e.add_row_multiple(i, row, &f);
                }
            }
        }
        pivots.push(c);
        row += 1;
    }
    RrefWitness { input: m.clone(), r, e, pivots }
}

pub fn is_rref(m: &RationalMatrix) -> bool {
    let mut last_pivot: Option<usize> = None;
    let mut seen_zero_row = false;
    for i in 0..m.rows() {
        match m.row(i).iter().position(|q| !q.is_zero()) {
            None => seen_zero_row = true,
            Some(p) => {
                if seen_zero_row || last_pivot.is_some_and(|lp| p <= lp) || !m.get(i, p).is_one() {
                    return false;
                }
                if (0..m.rows()).any(|k| k != i && !m.get(k, p).is_zero()) {
                    return false;
                }
                last_pivot = Some(p);
            }
        }
    }
    true
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoSidedWitness {
    pub e1: RationalMatrix,
    pub e2: RationalMatrix,
    pub rank: usize,
}

impl TwoSidedWitness {
    pub fn verify(&self, m: &RationalMatrix) -> bool {
        let p = self.e1.mul(m).mul(&self.e2);
        let mut expect = RationalMatrix::zeros(m.rows(), m.cols());
        for i in 0..self.rank {
            expect.set(i, i, Rat::one());
        }
        p == expect && !self.e1.det().is_zero() && !self.e2.det().is_zero()
    }
}

/// E1 M E2 = [[I_r, 0], [0, 0]]. For invertible M this gives E1 = M^-1, E2 = Id.
pub fn two_sided_reduce(m: &RationalMatrix) -> TwoSidedWitness {
    let w = rref_with_witness(m);
    let r = w.rank();
    let cols = m.cols();
    let mut order = w.pivots.clone();
    order.extend((0..cols).filter(|c| !w.pivots.contains(c)));
    // permutation P with (R P)_{:,k} = R_{:,order[k]}
    let mut p = RationalMatrix::zeros(cols, cols);
    for (k, &c) in order.iter().enumerate() {
        p.set(c, k, Rat::one());
    }
    let rp = w.r.mul(&p);
    let mut clear = RationalMatrix::identity(cols);
    for i in 0..r {
        for j in r..cols {
            clear.set(i, j, -rp.get(i, j).clone());
        }
    }
    TwoSidedWitness { e1: w.e, e2: p.mul(&clear), rank: r }
}

pub fn row_equivalent(a: &RationalMatrix, b: &RationalMatrix) -> Result<bool> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(FamedError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(rref_with_witness(a).r == rref_with_witness(b).r)
}

/// One rational solution of M x = b (free variables set to zero).
pub fn solve_rational(m: &RationalMatrix, b: &[Rat]) -> Result<Vec<Rat>> {
    if m.rows() != b.len() {
        return Err(FamedError::DimensionMismatch("rhs length".into()));
    }
    let col = RationalMatrix::from_rows(b.iter().map(|q| vec![q.clone()]).collect());
    let aug = if m.rows() == 0 { RationalMatrix::zeros(0, m.cols() + 1) } else { m.hstack(&col) };
    let w = rref_with_witness(&aug);
    if w.pivots.contains(&m.cols()) {
        return Err(FamedError::NoRationalSolution);
    }
    let mut x = vec![Rat::zero(); m.cols()];
    for (i, &p) in w.pivots.iter().enumerate() {
        x[p] = w.r.get(i, m.cols()).clone();
    }
    Ok(x)
}

/// Rational basis of the right kernel, one vector per free column.
pub fn kernel_basis(m: &RationalMatrix) -> Vec<Vec<Rat>> {
    let w = rref_with_witness(m);
    let free: Vec<usize> = (0..m.cols()).filter(|c| !w.pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rat::zero(); m.cols()];
            v[f] = Rat::one();
            for (i, &p) in w.pivots.iter().enumerate() {
                v[p] = -w.r.get(i, f).clone();
            }
            v
        })
        .collect()
}

/// Solve X M = B for X (rows of B expressed in the row space of M).
pub fn solve_left(m: &RationalMatrix, b: &RationalMatrix) -> Result<RationalMatrix> {
    if m.cols() != b.cols() {
        return Err(FamedError::DimensionMismatch("solve_left column counts".into()));
    }
    let mt = m.transpose();
    let mut rows = Vec::with_capacity(b.rows());
    for i in 0..b.rows() {
        rows.push(solve_rational(&mt, b.row(i))?);
    }
    if rows.is_empty() {
        return Ok(RationalMatrix::zeros(0, m.rows()));
    }
    Ok(RationalMatrix::from_rows(rows))
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegerSolution {
    pub x: Vec<BigInt>,
    /// Z-basis of the integer kernel lattice.
    pub kernel: Vec<Vec<BigInt>>,
}

fn lcm_denominators(row: &[Rat]) -> BigInt {
    row.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}

/// Integer solution of M x = b via unimodular column reduction of M to lower echelon form.
pub fn integer_solve(m: &RationalMatrix, b: &[Rat]) -> Result<IntegerSolution> {
    if m.rows() != b.len() {
        return Err(FamedError::DimensionMismatch("rhs length".into()));
    }
    solve_rational(m, b)?;
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<BigInt>> = Vec::with_capacity(rows);
    let mut rhs: Vec<BigInt> = Vec::with_capacity(rows);
    for i in 0..rows {
        let l = lcm_denominators(m.row(i)).lcm(b[i].denom());
        a.push(m.row(i).iter().map(|q| (q * Rat::from_integer(l.clone())).to_integer()).collect());
        rhs.push((&b[i] * Rat::from_integer(l)).to_integer());
    }
    let mut u: Vec<Vec<BigInt>> = (0..cols)
        .map(|i| (0..cols).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let col_op = |a: &mut Vec<Vec<BigInt>>, u: &mut Vec<Vec<BigInt>>, t: usize, s: usize, q: &BigInt| {
        // column t -= q * column s
        for row in a.iter_mut() {
            let v = &row[t] - q * &row[s];
            row[t] = v;
        }
        for row in u.iter_mut() {
            let v = &row[t] - q * &row[s];
            row[t] = v;
        }
    };
    let col_swap = |a: &mut Vec<Vec<BigInt>>, u: &mut Vec<Vec<BigInt>>, s: usize, t: usize| {
        for row in a.iter_mut() {
            row.swap(s, t);
        }
        for row in u.iter_mut() {
            row.swap(s, t);
        }
    };
    // pivot rows: (row index, pivot column)
    let mut pivot_rows: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    for i in 0..rows {
        if next == cols {
            break;
        }
        loop {
            let nz: Vec<usize> = (next..cols).filter(|&j| !a[i][j].is_zero()).collect();
            if nz.is_empty() {
                break;
            }
            let best = *nz.iter().min_by_key(|&&j| a[i][j].abs()).unwrap();
            col_swap(&mut a, &mut u, next, best);
            let mut done = true;
            for j in next + 1..cols {
                if !a[i][j].is_zero() {
                    let q = a[i][j].div_floor(&a[i][next]);
                    col_op(&mut a, &mut u, j, next, &q);
                    if !a[i][j].is_zero() {
                        done = false;
                    }
                }
            }
            if done {
                pivot_rows.push((i, next));
                next += 1;
                break;
            }
        }
    }
    // forward substitution on the lower echelon form
    let mut y = vec![BigInt::zero(); cols];
    for i in 0..rows {
        let acc: BigInt = (0..cols).map(|j| &a[i][j] * &y[j]).sum();
        let resid = &rhs[i] - acc;
        match pivot_rows.iter().find(|&&(r, _)| r == i) {
            Some(&(_, c)) => {
                let (q, rem) = resid.div_rem(&a[i][c]);
                if !rem.is_zero() {
                    return Err(FamedError::NoIntegerSolution);
                }
                y[c] = q;
            }
            None => {
                if !resid.is_zero() {
                    return Err(FamedError::NoIntegerSolution);
                }
            }
        }
    }
    let x: Vec<BigInt> = (0..cols).map(|i| (0..cols).map(|j| &u[i][j] * &y[j]).sum()).collect();
    let kernel = (next..cols).map(|j| (0..cols).map(|i| u[i][j].clone()).collect()).collect();
    Ok(IntegerSolution { x, kernel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn four_one_a() -> RationalMatrix {
        RationalMatrix::from_i64(&[
            vec![0, 1, 1, -1],
            vec![-1, 1, 1, 0],
            vec![-1, 0, 1, 0],
            vec![0, 1, 0, -1],
        ])
    }

    #[test]
    fn rref_identity() {
        let w = rref_with_witness(&RationalMatrix::identity(3));
        assert_eq!(w.r, RationalMatrix::identity(3));
        assert_eq!(w.e, RationalMatrix::identity(3));
        assert_eq!(w.pivots, vec![0, 1, 2]);
    }

    #[test]
    fn rref_zero() {
        let w = rref_with_witness(&RationalMatrix::zeros(2, 3));
        assert!(w.r.is_zero());
        assert!(w.pivots.is_empty());
        assert!(w.verify());
    }

    #[test]
    fn four_one_full_rank() {
        let w = rref_with_witness(&four_one_a());
        assert_eq!(w.rank(), 4);
        assert!(w.verify());
        assert!(!four_one_a().det().is_zero());
    }

    #[test]
    fn two_sided_invertible_is_inverse() {
        let a = four_one_a();
        let t = two_sided_reduce(&a);
        assert_eq!(t.rank, 4);
        assert_eq!(t.e1, a.inverse().unwrap());
        assert_eq!(t.e2, RationalMatrix::identity(4));
        assert!(t.verify(&a));
    }

    #[test]
    fn two_sided_diag() {
        let m = RationalMatrix::from_i64(&[vec![1, 0], vec![0, 0]]);
        let t = two_sided_reduce(&m);
        assert_eq!(t.rank, 1);
        assert_eq!(t.e1, RationalMatrix::identity(2));
        assert_eq!(t.e2, RationalMatrix::identity(2));
    }

    #[test]
    fn two_sided_rank4_6x6() {
        let l = RationalMatrix::from_i64(&[
            vec![1, 2, 0, -1],
            vec![0, 1, 3, 2],
            vec![2, 0, 1, 1],
            vec![1, 1, 1, 1],
            vec![-1, 0, 2, 5],
            vec![3, 1, 0, 0],
        ]);
        let r = RationalMatrix::from_i64(&[
            vec![1, 0, 2, 0, 1, -1],
            vec![0, 1, 1, 1, 0, 2],
            vec![1, 1, 0, 3, -2, 0],
            vec![2, 0, 1, 1, 1, 1],
        ]);
        let m = l.mul(&r).scale(&frac(1, 3));
        let t = two_sided_reduce(&m);
        assert_eq!(t.rank, 4);
        assert_eq!(t.rank, m.rank());
        assert!(t.verify(&m));
    }

    #[test]
    fn row_equivalence_basics() {
        let m = four_one_a();
        assert!(row_equivalent(&m, &m.scale(&rat(2))).unwrap());
        let mut z = m.clone();
        for j in 0..4 {
            z.set(2, j, rat(0));
        }
        assert!(!row_equivalent(&m, &z).unwrap());
        assert!(matches!(
            row_equivalent(&m, &RationalMatrix::zeros(3, 4)),
            Err(FamedError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn integer_solve_identity() {
        let b = vec![rat(3), rat(-4)];
        let s = integer_solve(&RationalMatrix::identity(2), &b).unwrap();
        assert_eq!(s.x, vec![BigInt::from(3), BigInt::from(-4)]);
        assert!(s.kernel.is_empty());
    }

    #[test]
    fn integer_solve_parity() {
        let m = RationalMatrix::from_i64(&[vec![2]]);
        assert_eq!(integer_solve(&m, &[rat(1)]).unwrap_err(), FamedError::NoIntegerSolution);
        let z = RationalMatrix::zeros(1, 1);
        assert_eq!(integer_solve(&z, &[rat(1)]).unwrap_err(), FamedError::NoRationalSolution);
    }

    #[test]
    fn integer_solve_with_kernel() {
        // 2x + 3y = 1 has integer solutions; kernel spanned by (3,-2)
        let m = RationalMatrix::from_i64(&[vec![2, 3]]);
        let s = integer_solve(&m, &[rat(1)]).unwrap();
        assert_eq!(BigInt::from(2) * &s.x[0] + BigInt::from(3) * &s.x[1], BigInt::from(1));
        assert_eq!(s.kernel.len(), 1);
        let k = &s.kernel[0];
        assert_eq!(BigInt::from(2) * &k[0] + BigInt::from(3) * &k[1], BigInt::zero());
        assert_eq!(k[0].abs(), BigInt::from(3));
    }

    #[test]
    fn rational_strings_round_trip() {
        for s in ["3", "-2/5", "0"] {
            assert_eq!(rat_string(&parse_rat(s).unwrap()), s);
        }
        assert!(parse_rat("1/0").is_none());
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = RationalMatrix> {
        proptest::collection::vec(-3i64..=3, rows * cols).prop_map(move |v| {
            let rs: Vec<Vec<i64>> = v.chunks(cols).map(|c| c.to_vec()).collect();
            RationalMatrix::from_i64(&rs)
        })
    }

    proptest! {
        #[test]
        fn rref_witness_holds(m in small_matrix(4, 5)) {
            let w = rref_with_witness(&m);
            prop_assert!(w.verify());
            let again = rref_with_witness(&w.r);
            prop_assert_eq!(&again.r, &w.r);
        }

        #[test]
        fn two_sided_rank_agrees(m in small_matrix(5, 5)) {
            let t = two_sided_reduce(&m);
            prop_assert_eq!(t.rank, m.rank());
            prop_assert!(t.verify(&m));
        }

        #[test]
        fn integer_solutions_check(m in small_matrix(3, 4), x in proptest::collection::vec(-4i64..=4, 4)) {
            let xr: Vec<Rat> = x.iter().map(|&v| rat(v)).collect();
            let b = m.mul_vec(&xr);
            let s = integer_solve(&m, &b).unwrap();
            let sx: Vec<Rat> = s.x.iter().map(|v| Rat::from_integer(v.clone())).collect();
            prop_assert_eq!(m.mul_vec(&sx), b);
            for k in &s.kernel {
                let kr: Vec<Rat> = k.iter().map(|v| Rat::from_integer(v.clone())).collect();
                prop_assert!(m.mul_vec(&kr).iter().all(|q| q.is_zero()));
            }
        }
    }
}
