//! Ordered ideal triangulations: parsing, edge/face classes, angle structures, angular holonomy.

use crate::error::{FamedError, Result};
use crate::exact_linalg::{rat, rat_to_f64, Rat};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;

/// Edge index -> vertex pair: 0:01, 1:02, 2:03, 3:12, 4:13, 5:23.
pub const EDGE_VERTICES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Angle carried by each edge: a on 01/23, b on 02/13, c on 03/12.
pub const EDGE_ANGLE: [usize; 6] = [0, 1, 2, 2, 1, 0];

pub fn edge_index(u: usize, v: usize) -> usize {
    let (u, v) = if u < v { (u, v) } else { (v, u) };
    EDGE_VERTICES.iter().position(|&p| p == (u, v)).expect("distinct vertices")
}

/// Vertices of the face opposite `k`, increasing.
pub fn face_vertices(k: usize) -> [usize; 3] {
    let mut out = [0; 3];
    let mut i = 0;
    for v in 0..4 {
        if v != k {
            out[i] = v;
            i += 1;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FaceTarget {
    pub tet: usize,
    pub face: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeripheralCurve {
    pub c: Vec<i64>,
    pub cp: Vec<i64>,
    pub cpp: Vec<i64>,
}

impl PeripheralCurve {
    pub fn zero(n: usize) -> Self {
        PeripheralCurve { c: vec![0; n], cp: vec![0; n], cpp: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn negated(&self) -> Self {
        let neg = |v: &Vec<i64>| v.iter().map(|x| -x).collect();
        PeripheralCurve { c: neg(&self.c), cp: neg(&self.cp), cpp: neg(&self.cpp) }
    }

    /// Counts for shape `s` (0 = z, 1 = z', 2 = z'') at tetrahedron `j`.
    pub fn count(&self, j: usize, s: usize) -> i64 {
        match s {
            0 => self.c[j],
            1 => self.cp[j],
            _ => self.cpp[j],
        }
    }

    fn permuted(&self, new_of_old: &[usize]) -> Self {
        let p = |v: &Vec<i64>| {
            let mut out = vec![0; v.len()];
            for (old, &x) in v.iter().enumerate() {
                out[new_of_old[old]] = x;
            }
            out
        };
        PeripheralCurve { c: p(&self.c), cp: p(&self.cp), cpp: p(&self.cpp) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeripheralData {
    pub meridian: PeripheralCurve,
    pub longitude: PeripheralCurve,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangulationFile {
    pub num_tetrahedra: usize,
    pub gluings: Vec<Vec<FaceTarget>>,
    pub peripheral: PeripheralData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<i8>>,
}

#[derive(Clone, Debug)]
pub struct OrderedTriangulation {
    pub name: Option<String>,
    gluings: Vec<[FaceTarget; 4]>,
    signs: Vec<i8>,
    edge_class_of: Vec<[usize; 6]>,
    edge_classes: Vec<Vec<(usize, usize)>>,
    face_class_of: Vec<[usize; 4]>,
    face_classes: Vec<[FaceTarget; 2]>,
    num_vertex_classes: usize,
    pub meridian: PeripheralCurve,
    pub longitude: PeripheralCurve,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

pub fn parse_triangulation(text: &str) -> Result<OrderedTriangulation> {
    let file: TriangulationFile =
        serde_json::from_str(text).map_err(|e| FamedError::MalformedInput(e.to_string()))?;
    OrderedTriangulation::from_file(&file)
}

impl OrderedTriangulation {
    pub fn from_file(file: &TriangulationFile) -> Result<Self> {
        let n = file.num_tetrahedra;
        if n == 0 {
            return Err(FamedError::MalformedInput("no tetrahedra".into()));
        }
        if file.gluings.len() != n {
            return Err(FamedError::MalformedInput(format!(
                "expected {} gluing rows, found {}",
                n,
                file.gluings.len()
            )));
        }
        let mut gluings = Vec::with_capacity(n);
        for (t, row) in file.gluings.iter().enumerate() {
            if row.len() != 4 {
                return Err(FamedError::MalformedInput(format!("tetrahedron {t} needs 4 faces")));
            }
            for g in row {
                if g.tet >= n || g.face >= 4 {
                    return Err(FamedError::MalformedInput(format!(
                        "tetrahedron {t}: target ({}, {}) out of range",
                        g.tet, g.face
                    )));
                }
            }
            gluings.push([row[0], row[1], row[2], row[3]]);
        }
        for (t, row) in gluings.iter().enumerate() {
            for (i, g) in row.iter().enumerate() {
                let back = gluings[g.tet][g.face];
                if (g.tet == t && g.face == i) || back != (FaceTarget { tet: t, face: i }) {
                    return Err(FamedError::UnpairedFace { tet: t, face: i });
                }
            }
        }
        for (label, curve) in [("meridian", &file.peripheral.meridian), ("longitude", &file.peripheral.longitude)] {
            if curve.c.len() != n || curve.cp.len() != n || curve.cpp.len() != n {
                return Err(FamedError::MalformedInput(format!("{label} arrays must have length {n}")));
            }
        }

        let signs = propagate_signs(&gluings)?;
        if let Some(given) = &file.signs {
            let flipped: Vec<i8> = signs.iter().map(|s| -s).collect();
            if given.len() != n || given.iter().any(|s| *s != 1 && *s != -1) {
                return Err(FamedError::MalformedInput("signs must be +1/-1 per tetrahedron".into()));
            }
            if *given != signs && *given != flipped {
                return Err(FamedError::OrderViolation("declared signs disagree with the gluing".into()));
            }
        }
        let signs = file.signs.clone().unwrap_or(signs);

        let mut edges = UnionFind::new(6 * n);
        let mut verts = UnionFind::new(4 * n);
        for (t, row) in gluings.iter().enumerate() {
            for (i, g) in row.iter().enumerate() {
                let src = face_vertices(i);
                let dst = face_vertices(g.face);
                for k in 0..3 {
                    verts.union(4 * t + src[k], 4 * g.tet + dst[k]);
                }
                for a in 0..3 {
                    for b in a + 1..3 {
                        edges.union(
                            6 * t + edge_index(src[a], src[b]),
                            6 * g.tet + edge_index(dst[a], dst[b]),
                        );
                    }
                }
            }
        }
        let mut roots: Vec<usize> = Vec::new();
        let mut edge_class_of = vec![[0usize; 6]; n];
        let mut edge_classes: Vec<Vec<(usize, usize)>> = Vec::new();
        for t in 0..n {
            for e in 0..6 {
                let r = edges.find(6 * t + e);
                let cls = match roots.iter().position(|&x| x == r) {
                    Some(c) => c,
                    None => {
                        roots.push(r);
                        edge_classes.push(Vec::new());
                        roots.len() - 1
                    }
                };
                edge_class_of[t][e] = cls;
                edge_classes[cls].push((t, e));
            }
        }
        let mut vroots: Vec<usize> = (0..4 * n).map(|x| verts.find(x)).collect();
        vroots.sort_unstable();
        vroots.dedup();
        let num_vertex_classes = vroots.len();

        let mut face_class_of = vec![[usize::MAX; 4]; n];
        let mut face_classes = Vec::with_capacity(2 * n);
        for t in 0..n {
            for i in 0..4 {
                if face_class_of[t][i] == usize::MAX {
                    let g = gluings[t][i];
                    let idx = face_classes.len();
                    face_class_of[t][i] = idx;
                    face_class_of[g.tet][g.face] = idx;
                    face_classes.push([FaceTarget { tet: t, face: i }, g]);
                }
            }
        }

        if num_vertex_classes != 1 {
            return Err(FamedError::MalformedInput(format!(
                "expected one ideal vertex, found {num_vertex_classes} (multi-cusp input is not supported)"
            )));
        }
        if edge_classes.len() != n {
            return Err(FamedError::MalformedInput(format!(
                "expected {} edge classes, found {}",
                n,
                edge_classes.len()
            )));
        }

        Ok(OrderedTriangulation {
            name: file.name.clone(),
            gluings,
            signs,
            edge_class_of,
            edge_classes,
            face_class_of,
            face_classes,
            num_vertex_classes,
            meridian: file.peripheral.meridian.clone(),
            longitude: file.peripheral.longitude.clone(),
        })
    }

    pub fn num_tetrahedra(&self) -> usize {
        self.gluings.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn gluing(&self, tet: usize, face: usize) -> FaceTarget {
        self.gluings[tet][face]
    }

    pub fn num_edge_classes(&self) -> usize {
        self.edge_classes.len()
    }

    pub fn num_face_classes(&self) -> usize {
        self.face_classes.len()
    }

    pub fn num_vertex_classes(&self) -> usize {
        self.num_vertex_classes
    }

    pub fn edge_class(&self, e: usize) -> Result<&[(usize, usize)]> {
        self.edge_classes.get(e).map(|v| v.as_slice()).ok_or(FamedError::UnknownEdge(e))
    }

    pub fn edge_class_of(&self, tet: usize, edge: usize) -> usize {
        self.edge_class_of[tet][edge]
    }

    /// Face class of x_k(T_tet), the face opposite vertex k.
    pub fn face_class_of(&self, tet: usize, k: usize) -> usize {
        self.face_class_of[tet][k]
    }

    pub fn face_class(&self, f: usize) -> [FaceTarget; 2] {
        self.face_classes[f]
    }

    /// Angle index (0 = a, 1 = b, 2 = c) paired with shape `s` (0 = z, 1 = z', 2 = z'').
    pub fn angle_of_shape(&self, tet: usize, s: usize) -> usize {
        match (s, self.signs[tet] > 0) {
            (0, _) => 0,
            (1, true) => 2,
            (1, false) => 1,
            (_, true) => 1,
            (_, false) => 2,
        }
    }

    pub fn shape_of_angle(&self, tet: usize, angle: usize) -> usize {
        (0..3).find(|&s| self.angle_of_shape(tet, s) == angle).unwrap()
    }

    /// Per tetrahedron (a, b, c) incidence counts around edge class `e`.
    pub fn edge_angle_counts(&self, e: usize) -> Result<Vec<[i64; 3]>> {
        let members = self.edge_class(e)?;
        let mut out = vec![[0i64; 3]; self.num_tetrahedra()];
        for &(t, k) in members {
            out[t][EDGE_ANGLE[k]] += 1;
        }
        Ok(out)
    }

    /// Per tetrahedron (z, z', z'') incidence counts around edge class `e`.
    pub fn edge_shape_counts(&self, e: usize) -> Result<Vec<[i64; 3]>> {
        let angles = self.edge_angle_counts(e)?;
        Ok(angles
            .iter()
            .enumerate()
            .map(|(t, a)| {
                let mut s = [0i64; 3];
                for (shape, slot) in s.iter_mut().enumerate() {
                    *slot = a[self.angle_of_shape(t, shape)];
                }
                s
            })
            .collect())
    }

    pub fn weight_function(&self, alpha: &AngleStructure, e: usize) -> Result<f64> {
        let counts = self.edge_angle_counts(e)?;
        Ok(counts
            .iter()
            .zip(&alpha.angles)
            .map(|(c, a)| (0..3).map(|k| c[k] as f64 * a[k]).sum::<f64>())
            .sum())
    }

    /// Weight in units of pi for angles given in units of pi.
    pub fn weight_exact(&self, alpha: &ExactAngles, e: usize) -> Result<Rat> {
        let counts = self.edge_angle_counts(e)?;
        let mut w = Rat::zero();
        for (c, a) in counts.iter().zip(&alpha.0) {
            for k in 0..3 {
                w += rat(c[k]) * &a[k];
            }
        }
        Ok(w)
    }

    pub fn angular_holonomy(&self, alpha: &AngleStructure, sigma: &PeripheralCurve) -> f64 {
        (0..self.num_tetrahedra())
            .map(|j| (0..3).map(|s| sigma.count(j, s) as f64 * alpha.angles[j][self.angle_of_shape(j, s)]).sum::<f64>())
            .sum()
    }

    pub fn angular_holonomy_exact(&self, alpha: &ExactAngles, sigma: &PeripheralCurve) -> Rat {
        let mut h = Rat::zero();
        for j in 0..self.num_tetrahedra() {
            for s in 0..3 {
                h += rat(sigma.count(j, s)) * &alpha.0[j][self.angle_of_shape(j, s)];
            }
        }
        h
    }

    pub fn to_file(&self) -> TriangulationFile {
        TriangulationFile {
            num_tetrahedra: self.num_tetrahedra(),
            gluings: self.gluings.iter().map(|r| r.to_vec()).collect(),
            peripheral: PeripheralData { meridian: self.meridian.clone(), longitude: self.longitude.clone() },
            name: self.name.clone(),
            signs: Some(self.signs.clone()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("serializable")
    }

    /// Relabel tetrahedra: old index t becomes new_of_old[t].
    pub fn renumbered(&self, new_of_old: &[usize]) -> Result<Self> {
        let n = self.num_tetrahedra();
        let mut gluings = vec![Vec::new(); n];
        let mut signs = vec![0i8; n];
        for (t, &s) in self.signs.iter().enumerate() {
            signs[new_of_old[t]] = s;
        }
        for (t, row) in self.gluings.iter().enumerate() {
            gluings[new_of_old[t]] =
                row.iter().map(|g| FaceTarget { tet: new_of_old[g.tet], face: g.face }).collect();
        }
        let file = TriangulationFile {
            num_tetrahedra: n,
            gluings,
            peripheral: PeripheralData {
                meridian: self.meridian.permuted(new_of_old),
                longitude: self.longitude.permuted(new_of_old),
            },
            name: self.name.clone(),
            signs: Some(signs),
        };
        Self::from_file(&file)
    }

    /// Least BFS relabelling over all start tetrahedra.
    pub fn canonical_form(&self) -> CanonicalForm {
        let n = self.num_tetrahedra();
        let mut best: Option<CanonicalForm> = None;
        for start in 0..n {
            let mut label = vec![usize::MAX; n];
            let mut order = Vec::with_capacity(n);
            let mut queue = VecDeque::from([start]);
            label[start] = 0;
            while let Some(t) = queue.pop_front() {
                order.push(t);
                for g in &self.gluings[t] {
                    if label[g.tet] == usize::MAX {
                        label[g.tet] = order.len() + queue.len();
                        queue.push_back(g.tet);
                    }
                }
            }
            let gluings: Vec<[(usize, usize); 4]> = order
                .iter()
                .map(|&t| {
                    let r = &self.gluings[t];
                    [0, 1, 2, 3].map(|i| (label[r[i].tet], r[i].face))
                })
                .collect();
            let m = self.meridian.permuted(&label);
            let l = self.longitude.permuted(&label);
            let cand = CanonicalForm {
                signs: order.iter().map(|&t| self.signs[t]).collect(),
                gluings,
                meridian: [m.c, m.cp, m.cpp],
                longitude: [l.c, l.cp, l.cpp],
            };
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
        best.expect("at least one tetrahedron")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CanonicalForm {
    pub signs: Vec<i8>,
    pub gluings: Vec<[(usize, usize); 4]>,
    pub meridian: [Vec<i64>; 3],
    pub longitude: [Vec<i64>; 3],
}

fn propagate_signs(gluings: &[[FaceTarget; 4]]) -> Result<Vec<i8>> {
    let n = gluings.len();
    let mut signs = vec![0i8; n];
    for root in 0..n {
        if signs[root] != 0 {
            continue;
        }
        signs[root] = 1;
        let mut queue = VecDeque::from([root]);
        while let Some(t) = queue.pop_front() {
            for (i, g) in gluings[t].iter().enumerate() {
                // eps(T)(-1)^i = -eps(T')(-1)^j
                let parity = if (i + g.face) % 2 == 0 { 1 } else { -1 };
                let want = -signs[t] * parity;
                if signs[g.tet] == 0 {
                    signs[g.tet] = want;
                    queue.push_back(g.tet);
                } else if signs[g.tet] != want {
                    return Err(FamedError::OrderViolation(format!(
                        "gluing ({t},{i}) -> ({},{}) reverses the induced orientation",
                        g.tet, g.face
                    )));
                }
            }
        }
    }
    Ok(signs)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleStructure {
    /// (a, b, c) per tetrahedron, radians.
    pub angles: Vec<[f64; 3]>,
}

impl AngleStructure {
    pub fn new(angles: Vec<[f64; 3]>) -> Result<Self> {
        for (j, a) in angles.iter().enumerate() {
            if a.iter().any(|&x| !(x > 0.0 && x < PI)) {
                return Err(FamedError::MalformedInput(format!("tetrahedron {j}: angles must lie in (0, pi)")));
            }
            if (a.iter().sum::<f64>() - PI).abs() > 1e-12 {
                return Err(FamedError::MalformedInput(format!("tetrahedron {j}: a + b + c != pi")));
            }
        }
        Ok(AngleStructure { angles })
    }

    pub fn regular(n: usize) -> Self {
        AngleStructure { angles: vec![[PI / 3.0; 3]; n] }
    }

    pub fn a(&self) -> Vec<f64> {
        self.angles.iter().map(|x| x[0]).collect()
    }

    pub fn in_polytope(&self, t: &OrderedTriangulation, tol: f64) -> bool {
        (0..t.num_edge_classes()).all(|e| (t.weight_function(self, e).unwrap() - 2.0 * PI).abs() < tol)
    }
}

/// Angles in units of pi.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactAngles(pub Vec<[Rat; 3]>);

impl Serialize for ExactAngles {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.iter().map(|a| a.iter().map(|q| q.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
    }
}

impl ExactAngles {
    pub fn to_radians(&self) -> AngleStructure {
        AngleStructure {
            angles: self.0.iter().map(|a| [0, 1, 2].map(|k| PI * rat_to_f64(&a[k]))).collect(),
        }
    }

    pub fn a(&self) -> Vec<Rat> {
        self.0.iter().map(|x| x[0].clone()).collect()
    }
}
