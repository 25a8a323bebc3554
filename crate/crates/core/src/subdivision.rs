//! The canonical `kM`-periodic piecewise linear function `phi` whose graph
//! is the lower convex hull of `{(m, phi_bar(m)) : m in M}`, its cell
//! decomposition, and the quotient complex on `B_k = M_R / kM`.
//!
//! The hull is invariant under the affine shears `(y, r) -> (y + g, r +
//! alpha_g(y))`, so the whole decomposition is generated by the cells
//! containing the origin. Those are read off the dual polytope
//!
//! ```text
//!   { s in N_R : <s, m> <= phi_bar(m) for all m in M }
//! ```
//!
//! whose vertices are exactly the slopes of the top cells through 0. The
//! polytope is cut out by coset-minimal vectors of `M / 2M`, and each vertex
//! is certified against the whole lattice with an exact empty-ellipsoid
//! search (violations are added back as cuts).

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, box_points, AffineLinear, LatticeVector, QForm};
use crate::linalg::{self, q, QVec, Rational};
use crate::polytope::{combinations, VPolytope};

const MAX_CUT_ROUNDS: usize = 16;

/// A cell of the decomposition: a lattice polytope on which `phi` is affine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    /// Sorted lattice vertices; no other lattice point lies in the cell.
    pub vertices: Vec<LatticeVector>,
    pub dim: usize,
    /// `phi` restricted to the cell. For lower-dimensional cells this is the
    /// piece of an adjacent top cell, which agrees with `phi` on the cell.
    pub affine: AffineLinear,
}

impl Cell {
    pub fn slope(&self) -> &QVec {
        &self.affine.slope
    }

    /// Translate by `gamma in M`, carrying the affine piece along the
    /// cocycle: on `sigma + g` the piece is
    /// `<s + Zg, y> + c - <s, g> - Z(g, g) / 2`.
    pub fn translate(&self, form: &QForm, gamma: &LatticeVector) -> Cell {
        Cell {
            vertices: self.vertices.iter().map(|v| v.add(gamma)).collect(),
            dim: self.dim,
            affine: shift_piece(form, &self.affine, gamma),
        }
    }

    fn polytope(&self) -> VPolytope {
        let n = self.vertices[0].dim();
        VPolytope::new(n, self.vertices.iter().map(LatticeVector::as_rational).collect())
    }

    /// Translate so the lexicographically smallest vertex sits at the origin;
    /// returns the normalized cell and the removed offset.
    fn normalized(&self, form: &QForm) -> (Cell, LatticeVector) {
        let offset = self.vertices.iter().min().unwrap().clone();
        (self.translate(form, &offset.scale(-1)), offset)
    }

    fn bounds(&self) -> (Vec<i64>, Vec<i64>) {
        let n = self.vertices[0].dim();
        let lo = (0..n).map(|i| self.vertices.iter().map(|v| v.0[i]).min().unwrap()).collect();
        let hi = (0..n).map(|i| self.vertices.iter().map(|v| v.0[i]).max().unwrap()).collect();
        (lo, hi)
    }
}

pub(crate) fn shift_piece(form: &QForm, piece: &AffineLinear, gamma: &LatticeVector) -> AffineLinear {
    let g = gamma.as_rational();
    let slope = linalg::add(&piece.slope, &linalg::qvec(&form.apply(&gamma.0)));
    let half = Rational::new(form.pair(&gamma.0, &gamma.0).into(), 2.into());
    let constant = &piece.constant - linalg::dot(&piece.slope, &g) - half;
    AffineLinear { slope, constant }
}

/// The canonical periodic subdivision for a form and a level `k`.
#[derive(Clone, Debug)]
pub struct PeriodicSubdivision {
    form: QForm,
    k: u32,
    /// Cell classes modulo `M`, by dimension, each normalized so its
    /// smallest vertex is the origin. `classes[n]` are the top cells.
    classes: Vec<Vec<Cell>>,
    /// For each class, its facets as `(class index, offset)` pairs.
    boundaries: Vec<Vec<Vec<(usize, LatticeVector)>>>,
}

/// Builds the canonical subdivision of `M_R` for `form` at level `k`.
pub fn build_subdivision(form: &QForm, k: u32) -> Result<PeriodicSubdivision> {
    if k == 0 {
        return Err(Error::ZeroLevel);
    }
    let star = star_of_origin(form)?;
    let mut tops: BTreeSet<Vec<LatticeVector>> = BTreeSet::new();
    let mut top_cells = Vec::new();
    for cell in star {
        let (norm, _) = cell.normalized(form);
        if tops.insert(norm.vertices.clone()) {
            top_cells.push(norm);
        }
    }
    let sub = PeriodicSubdivision::from_top_classes(form.clone(), k, top_cells)?;
    sub.check_canonical()?;
    Ok(sub)
}

/// Top cells containing the origin, one per vertex of the dual polytope.
fn star_of_origin(form: &QForm) -> Result<Vec<Cell>> {
    let n = form.rank();
    let mut cuts: BTreeSet<Vec<i64>> = coset_minimal_vectors(form).into_iter().collect();
    for _ in 0..MAX_CUT_ROUNDS {
        let constraints: Vec<Vec<i64>> = cuts.iter().cloned().collect();
        let vertices = dual_vertices(form, &constraints)?;
        let mut violated = Vec::new();
        let mut cells = Vec::new();
        for s in &vertices {
            let (below, contact) = ellipsoid_search(form, s);
            if !below.is_empty() {
                violated.extend(below);
                continue;
            }
            let vertices: Vec<LatticeVector> = contact.into_iter().map(LatticeVector).collect();
            let dim = linalg::affine_rank(&vertices.iter().map(LatticeVector::as_rational).collect::<Vec<_>>());
            if dim != n {
                return Err(Error::WindowExhausted(format!(
                    "contact set of slope {s:?} spans dimension {dim} < {n}"
                )));
            }
            cells.push(Cell {
                vertices,
                dim: n,
                affine: AffineLinear { slope: s.clone(), constant: Rational::zero() },
            });
        }
        if violated.is_empty() {
            return Ok(cells);
        }
        cuts.extend(violated);
    }
    Err(Error::WindowExhausted(format!("no certified star after {MAX_CUT_ROUNDS} cut rounds")))
}

/// For every nonzero class of `M / 2M`, all vectors of minimal `Z`-norm in
/// that class. Only these can carry facets of the dual polytope.
fn coset_minimal_vectors(form: &QForm) -> Vec<Vec<i64>> {
    let n = form.rank();
    let zinv = form.inverse();
    let mut out = Vec::new();
    for class in lattice::residues(2, n).into_iter().skip(1) {
        let bound = form.pair(&class.0, &class.0);
        let radius: Vec<i64> =
            (0..n).map(|i| linalg::ceil_sqrt(&(q(bound) * &zinv[i][i]))).collect();
        let lo: Vec<i64> = radius.iter().map(|r| -r).collect();
        let mut best = i64::MAX;
        let mut found: Vec<Vec<i64>> = Vec::new();
        for v in box_points(&lo, &radius) {
            if v.iter().zip(&class.0).any(|(a, c)| (a - c).rem_euclid(2) != 0) {
                continue;
            }
            let norm = form.pair(&v, &v);
            if norm < best {
                best = norm;
                found.clear();
            }
            if norm == best {
                found.push(v);
            }
        }
        out.extend(found);
    }
    out
}

/// Vertices of `{ s : <s, v> <= phi_bar(v) for v in constraints }`.
fn dual_vertices(form: &QForm, constraints: &[Vec<i64>]) -> Result<Vec<QVec>> {
    let n = form.rank();
    let normals: Vec<QVec> = constraints.iter().map(|v| linalg::qvec(v)).collect();
    if linalg::rank(&normals) < n {
        return Err(Error::WindowExhausted("cut normals do not span N_R".into()));
    }
    let rhs: Vec<Rational> = constraints.iter().map(|v| q(form.phi_bar_int(v))).collect();
    let mut out: BTreeSet<QVec> = BTreeSet::new();
    for combo in combinations(constraints.len(), n) {
        let a: Vec<QVec> = combo.iter().map(|&i| normals[i].clone()).collect();
        let b: Vec<Rational> = combo.iter().map(|&i| rhs[i].clone()).collect();
        let Some(s) = linalg::solve(&a, &b) else { continue };
        if normals.iter().zip(&rhs).all(|(a, b)| linalg::dot(a, &s) <= *b) {
            out.insert(s);
        }
    }
    Ok(out.into_iter().collect())
}

/// Lattice points strictly inside, and on, the ellipsoid
/// `Z(m - c, m - c) <= Z(c, c)` with `c = Z^{-1} s`: the points where
/// `phi_bar(m) - <s, m>` is negative, and zero.
fn ellipsoid_search(form: &QForm, s: &[Rational]) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let n = form.rank();
    let zinv = form.inverse();
    let c = linalg::mat_vec(&zinv, s);
    let r2 = linalg::dot(&c, &form.apply_rational(&c));
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        let r = linalg::ceil_sqrt(&(&r2 * &zinv[i][i]));
        lo.push(c[i].floor().to_integer().to_i64().unwrap() - r);
        hi.push(c[i].ceil().to_integer().to_i64().unwrap() + r);
    }
    let mut below = Vec::new();
    let mut contact = Vec::new();
    for m in box_points(&lo, &hi) {
        let gap = q(form.phi_bar_int(&m)) - linalg::dot(s, &linalg::qvec(&m));
        if gap.is_negative() {
            below.push(m);
        } else if gap.is_zero() {
            contact.push(m);
        }
    }
    (below, contact)
}

impl PeriodicSubdivision {
    /// Assembles a subdivision from top-cell class representatives without
    /// checking that it is the canonical hull (used for hand-built inputs).
    pub fn from_top_classes(form: QForm, k: u32, tops: Vec<Cell>) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroLevel);
        }
        let n = form.rank();
        for c in &tops {
            if c.dim != n || c.vertices.iter().any(|v| v.dim() != n) || c.affine.slope.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.dim });
            }
        }
        let mut tops: Vec<Cell> = tops.into_iter().map(|c| c.normalized(&form).0).collect();
        tops.sort_by(|a, b| a.vertices.cmp(&b.vertices));
        tops.dedup_by(|a, b| a.vertices == b.vertices);

        // every face of every top representative, grouped into classes mod M
        let mut found: Vec<BTreeMap<Vec<LatticeVector>, Cell>> = vec![BTreeMap::new(); n + 1];
        let mut top_faces = Vec::new();
        for top in &tops {
            let poly = top.polytope();
            let faces: Vec<Cell> = poly
                .faces()
                .into_iter()
                .map(|f| {
                    let mut vertices: Vec<LatticeVector> = f
                        .vertices
                        .iter()
                        .map(|&i| LatticeVector(poly.vertices()[i].iter().map(|x| x.to_integer().to_i64().unwrap()).collect()))
                        .collect();
                    vertices.sort();
                    Cell { vertices, dim: f.dim, affine: top.affine.clone() }
                })
                .collect();
            for face in &faces {
                let (norm, _) = face.normalized(&form);
                found[face.dim].entry(norm.vertices.clone()).or_insert(norm);
            }
            top_faces.push(faces);
        }
        let classes: Vec<Vec<Cell>> = found.into_iter().map(|m| m.into_values().collect()).collect();
        let index: Vec<BTreeMap<Vec<LatticeVector>, usize>> = classes
            .iter()
            .map(|cs| cs.iter().enumerate().map(|(i, c)| (c.vertices.clone(), i)).collect())
            .collect();

        let mut boundaries: Vec<Vec<Vec<(usize, LatticeVector)>>> =
            classes.iter().map(|cs| vec![Vec::new(); cs.len()]).collect();
        let mut done: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 1];
        for faces in &top_faces {
            for face in faces {
                let (norm, off) = face.normalized(&form);
                let id = index[face.dim][&norm.vertices];
                if face.dim == 0 || !done[face.dim].insert(id) {
                    continue;
                }
                let mut facets: Vec<(usize, LatticeVector)> = faces
                    .iter()
                    .filter(|g| g.dim + 1 == face.dim && g.vertices.iter().all(|v| face.vertices.contains(v)))
                    .map(|g| {
                        let (gn, goff) = g.normalized(&form);
                        (index[g.dim][&gn.vertices], goff.sub(&off))
                    })
                    .collect();
                facets.sort();
                boundaries[face.dim][id] = facets;
            }
        }
        Ok(PeriodicSubdivision { form, k, classes, boundaries })
    }

    fn check_canonical(&self) -> Result<()> {
        for top in self.top_classes() {
            for v in &top.vertices {
                if top.affine.eval(&v.as_rational()) != q(self.form.phi_bar_int(&v.0)) {
                    return Err(Error::WindowExhausted(format!(
                        "piece of cell {:?} misses phi_bar at {:?}",
                        top.vertices, v
                    )));
                }
            }
        }
        // cells through the origin are counted once per vertex of each class
        let star: usize = self.top_classes().iter().map(|c| c.vertices.len()).sum();
        if star == 0 {
            return Err(Error::WindowExhausted("empty star".into()));
        }
        Ok(())
    }

    pub fn form(&self) -> &QForm {
        &self.form
    }

    pub fn level(&self) -> u32 {
        self.k
    }

    pub fn rank(&self) -> usize {
        self.form.rank()
    }

    /// Top-dimensional cell classes modulo translation by `M`.
    pub fn top_classes(&self) -> &[Cell] {
        &self.classes[self.rank()]
    }

    /// Cell classes modulo `M` of dimension `d`.
    pub fn classes(&self, d: usize) -> &[Cell] {
        &self.classes[d]
    }

    /// Top cells covering the fundamental domain: every class translated by
    /// every `g in {0..k-1}^n`.
    pub fn cells(&self) -> Vec<Cell> {
        let n = self.rank();
        let mut out = Vec::new();
        for g in lattice::residues(self.k, n) {
            for c in self.top_classes() {
                out.push(c.translate(&self.form, &g));
            }
        }
        out
    }

    /// Top cells that contain the lattice point `m`.
    pub fn cells_at(&self, m: &LatticeVector) -> Vec<Cell> {
        let mut out = Vec::new();
        for c in self.top_classes() {
            for v in &c.vertices {
                out.push(c.translate(&self.form, &m.sub(v)));
            }
        }
        out
    }

    /// All affine pieces whose cell may contain a point of `[0,1)^n`.
    fn pieces_near_unit_cube(&self) -> Vec<AffineLinear> {
        let mut out = Vec::new();
        for c in self.top_classes() {
            let (lo, hi) = c.bounds();
            let glo: Vec<i64> = hi.iter().map(|h| -h).collect();
            let ghi: Vec<i64> = lo.iter().map(|l| 1 - l).collect();
            for g in box_points(&glo, &ghi) {
                out.push(shift_piece(&self.form, &c.affine, &LatticeVector(g)));
            }
        }
        out
    }

    /// Splits `y = f + g` with `g in M`, `f in [0,1)^n`.
    fn split(y: &[Rational]) -> (QVec, LatticeVector) {
        let g: Vec<i64> = y.iter().map(|x| x.floor().to_integer().to_i64().unwrap()).collect();
        let f = linalg::sub(y, &linalg::qvec(&g));
        (f, LatticeVector(g))
    }

    /// Exact `phi(y)`.
    pub fn eval_phi(&self, y: &[Rational]) -> Result<Rational> {
        if y.len() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), got: y.len() });
        }
        let (f, g) = Self::split(y);
        // every piece is a global minorant, so the max over a superset of the
        // cells meeting f is exact
        let at_f = self
            .pieces_near_unit_cube()
            .iter()
            .map(|p| p.eval(&f))
            .max()
            .expect("nonempty decomposition");
        Ok(at_f + lattice::alpha(&self.form, &g)?.eval(&f))
    }

    /// The affine pieces of the top cells containing `y`.
    pub fn active_pieces(&self, y: &[Rational]) -> Result<Vec<AffineLinear>> {
        if y.len() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), got: y.len() });
        }
        let (f, g) = Self::split(y);
        let pieces = self.pieces_near_unit_cube();
        let values: Vec<Rational> = pieces.iter().map(|p| p.eval(&f)).collect();
        let best = values.iter().max().unwrap().clone();
        let mut active: Vec<AffineLinear> = pieces
            .into_iter()
            .zip(values)
            .filter(|(_, v)| *v == best)
            .map(|(p, _)| shift_piece(&self.form, &p, &g))
            .collect();
        active.sort_by(|a, b| a.slope.cmp(&b.slope));
        active.dedup_by(|a, b| a.slope == b.slope);
        Ok(active)
    }

    /// Every top-cell slope lies in `N`.
    pub fn slope_integrality(&self) -> bool {
        self.top_classes().iter().all(|c| c.affine.slope.iter().all(|s| s.is_integer()))
    }

    pub fn quotient_complex(&self) -> QuotientComplex {
        let n = self.rank();
        let residues = lattice::residues(self.k, n);
        let per_class = residues.len();
        let mut cells = Vec::with_capacity(n + 1);
        for d in 0..=n {
            let mut layer = Vec::new();
            for (cid, rep) in self.classes[d].iter().enumerate() {
                for g in &residues {
                    let vertices: Vec<LatticeVector> = rep
                        .vertices
                        .iter()
                        .map(|v| lattice::reduce_mod(self.k, &v.add(g)).unwrap())
                        .collect();
                    let facets = self.boundaries[d][cid]
                        .iter()
                        .map(|(fc, off)| fc * per_class + lattice::residue_index(self.k, &g.add(off)))
                        .collect();
                    let component = (d == n).then(|| ToricComponent::of(rep));
                    layer.push(QuotientCell { class: cid, offset: g.clone(), vertices, facets, component });
                }
            }
            cells.push(layer);
        }
        QuotientComplex { k: self.k, n, cells }
    }

    pub fn to_doc(&self) -> SubdivisionDoc {
        SubdivisionDoc {
            q: self.form.clone(),
            k: self.k,
            cells: self.cells().iter().map(CellDoc::from_cell).collect(),
        }
    }

    /// Rebuilds a subdivision from its JSON document (top cells of the
    /// fundamental domain).
    pub fn from_doc(doc: &SubdivisionDoc) -> Result<Self> {
        let n = doc.q.rank();
        let tops = doc
            .cells
            .iter()
            .map(|c| c.to_cell(n))
            .collect::<Result<Vec<_>>>()?;
        PeriodicSubdivision::from_top_classes(doc.q.clone(), doc.k, tops)
    }
}

/// Polarized toric variety attached to a top cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToricComponent {
    pub vertex_count: usize,
    /// `n!` times the Euclidean volume.
    pub normalized_volume: i64,
    pub kind: String,
}

impl ToricComponent {
    fn of(cell: &Cell) -> Self {
        let n = cell.dim;
        let poly = cell.polytope();
        let nv = (poly.volume() * Rational::from_integer(linalg::factorial(n))).to_integer().to_i64().unwrap();
        let kind = if cell.vertices.len() == n + 1 && nv == 1 {
            format!("P^{n}")
        } else if cell.vertices.len() == 1 << n && is_unit_parallelotope(cell) {
            vec!["P^1"; n].join("x")
        } else {
            "X_sigma".to_string()
        };
        ToricComponent { vertex_count: cell.vertices.len(), normalized_volume: nv, kind }
    }
}

fn is_unit_parallelotope(cell: &Cell) -> bool {
    let n = cell.dim;
    let origin = cell.vertices.iter().min().unwrap();
    let mut edges: Vec<LatticeVector> = cell.vertices.iter().map(|v| v.sub(origin)).collect();
    edges.sort_by_key(|e| e.0.iter().map(|x| x.abs()).sum::<i64>());
    let basis: Vec<QVec> = edges[1..=n].iter().map(LatticeVector::as_rational).collect();
    if linalg::det(&basis).abs() != q(1) {
        return false;
    }
    // all 0/1 combinations of the basis
    lattice::residues(2, n).iter().all(|bits| {
        let mut p = origin.clone();
        for (i, b) in bits.0.iter().enumerate() {
            if *b == 1 {
                p = p.add(&edges[i + 1]);
            }
        }
        cell.vertices.contains(&p)
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotientCell {
    pub class: usize,
    /// Translation (mod `k`) of the class representative.
    pub offset: LatticeVector,
    /// Vertices reduced into `B_k(Z)`.
    pub vertices: Vec<LatticeVector>,
    /// Indices into the next-lower dimension of the complex.
    pub facets: Vec<usize>,
    pub component: Option<ToricComponent>,
}

/// The intersection complex `(B_k, P~)`, with face identifications given by
/// the facet indices.
#[derive(Clone, Debug)]
pub struct QuotientComplex {
    pub k: u32,
    pub n: usize,
    /// `cells[d]` lists the `d`-cells.
    pub cells: Vec<Vec<QuotientCell>>,
}

impl QuotientComplex {
    pub fn count(&self, d: usize) -> usize {
        self.cells[d].len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.cells
            .iter()
            .enumerate()
            .map(|(d, c)| if d % 2 == 0 { c.len() as i64 } else { -(c.len() as i64) })
            .sum()
    }

    pub fn top_cells(&self) -> &[QuotientCell] {
        &self.cells[self.n]
    }
}

/// `m in B_k(Z)` with `theta_m` not vanishing on the component of `cell`:
/// exactly the vertices of the cell.
pub fn restriction_support(cell: &QuotientCell) -> Vec<LatticeVector> {
    let mut v = cell.vertices.clone();
    v.sort();
    v.dedup();
    v
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDoc {
    pub vertices: Vec<Vec<i64>>,
    pub slope: Vec<String>,
    pub constant: String,
}

impl CellDoc {
    fn from_cell(c: &Cell) -> Self {
        CellDoc {
            vertices: c.vertices.iter().map(|v| v.0.clone()).collect(),
            slope: c.affine.slope.iter().map(linalg::format_rational).collect(),
            constant: linalg::format_rational(&c.affine.constant),
        }
    }

    fn to_cell(&self, n: usize) -> Result<Cell> {
        let parse = |s: &String| {
            linalg::parse_rational(s).ok_or_else(|| Error::InvalidParameter(format!("bad rational {s:?}")))
        };
        let slope = self.slope.iter().map(parse).collect::<Result<Vec<_>>>()?;
        let constant = parse(&self.constant)?;
        let mut vertices: Vec<LatticeVector> = self.vertices.iter().cloned().map(LatticeVector).collect();
        vertices.sort();
        if vertices.is_empty() || vertices.iter().any(|v| v.dim() != n) || slope.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: slope.len() });
        }
        let dim = linalg::affine_rank(&vertices.iter().map(LatticeVector::as_rational).collect::<Vec<_>>());
        Ok(Cell { vertices, dim, affine: AffineLinear { slope, constant } })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubdivisionDoc {
    pub q: QForm,
    pub k: u32,
    pub cells: Vec<CellDoc>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{qvec, ratio};
    use proptest::prelude::*;

    fn form(flat: &[i64]) -> QForm {
        QForm::from_flat(flat).unwrap()
    }

    /// Independent oracle: exact 1-d lower hull of `(m, m^2)` for
    /// `|m| <= 5` by the monotone chain.
    fn lower_hull_1d() -> Vec<(i64, i64)> {
        let pts: Vec<(i64, i64)> = (-5..=5).map(|m| (m, m * m)).collect();
        let mut hull: Vec<(i64, i64)> = Vec::new();
        for p in pts {
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                if cross <= 0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull
    }

    #[test]
    fn one_dimensional_cells_match_hull_oracle() {
        let hull = lower_hull_1d();
        // strictly convex graph: every lattice point is a hull vertex
        assert_eq!(hull.len(), 11);
        let s = build_subdivision(&form(&[2]), 3).unwrap();
        let cells = s.cells();
        assert_eq!(cells.len(), 3);
        for (j, c) in cells.iter().enumerate() {
            let j = j as i64;
            assert_eq!(c.vertices, vec![LatticeVector(vec![j]), LatticeVector(vec![j + 1])]);
            let (a, b) = (hull[(j + 5) as usize], hull[(j + 6) as usize]);
            assert_eq!(c.affine.slope, qvec(&[(b.1 - a.1) / (b.0 - a.0)]));
            assert_eq!(c.affine.slope, qvec(&[2 * j + 1]));
        }
        assert!(s.slope_integrality());
    }

    #[test]
    fn square_form_gives_unit_squares() {
        let s = build_subdivision(&form(&[2, 0, 0, 2]), 2).unwrap();
        assert_eq!(s.top_classes().len(), 1);
        assert_eq!(s.top_classes()[0].vertices.len(), 4);
        assert_eq!(s.cells().len(), 4);
        assert!(s.slope_integrality());
    }

    #[test]
    fn a2_form_gives_unimodular_triangles() {
        let s = build_subdivision(&form(&[2, 1, 1, 2]), 2).unwrap();
        assert_eq!(s.top_classes().len(), 2);
        for c in s.top_classes() {
            assert_eq!(c.vertices.len(), 3);
            assert_eq!(ToricComponent::of(c).kind, "P^2");
        }
        assert!(s.slope_integrality());
    }

    #[test]
    fn eval_phi_examples() {
        let s = build_subdivision(&form(&[2]), 3).unwrap();
        assert_eq!(s.eval_phi(&[ratio(1, 2)]).unwrap(), ratio(1, 2));
        assert_eq!(s.eval_phi(&[q(-4)]).unwrap(), q(16));
        assert_eq!(s.eval_phi(&[ratio(7, 3)]).unwrap(), ratio(5 * 7 - 18, 3));
        assert!(s.eval_phi(&[q(1), q(2)]).is_err());
    }

    #[test]
    fn hand_built_half_slope_fails_integrality() {
        let cell = Cell {
            vertices: vec![LatticeVector(vec![0]), LatticeVector(vec![1])],
            dim: 1,
            affine: AffineLinear { slope: vec![ratio(1, 2)], constant: q(0) },
        };
        let s = PeriodicSubdivision::from_top_classes(form(&[2]), 3, vec![cell]).unwrap();
        assert!(!s.slope_integrality());
    }

    #[test]
    fn quotient_complex_counts() {
        let c = build_subdivision(&form(&[2]), 3).unwrap().quotient_complex();
        assert_eq!((c.count(0), c.count(1)), (3, 3));
        assert_eq!(c.euler_characteristic(), 0);
        // cycle: each interval glues to the next one's start
        assert_eq!(c.top_cells()[1].vertices, vec![LatticeVector(vec![1]), LatticeVector(vec![2])]);
        assert_eq!(c.top_cells()[2].vertices, vec![LatticeVector(vec![2]), LatticeVector(vec![0])]);
        assert_eq!(c.top_cells()[2].facets, vec![2, 0]);

        let sq = build_subdivision(&form(&[2, 0, 0, 2]), 2).unwrap().quotient_complex();
        assert_eq!((sq.count(0), sq.count(1), sq.count(2)), (4, 8, 4));
        assert_eq!(sq.euler_characteristic(), 0);
        assert_eq!(sq.top_cells()[0].component.as_ref().unwrap().kind, "P^1xP^1");

        let a2 = build_subdivision(&form(&[2, 1, 1, 2]), 1).unwrap().quotient_complex();
        assert_eq!((a2.count(0), a2.count(1), a2.count(2)), (1, 3, 2));
        assert_eq!(a2.euler_characteristic(), 0);
    }

    #[test]
    fn restriction_support_on_cycle() {
        let c = build_subdivision(&form(&[2]), 3).unwrap().quotient_complex();
        let sigma = &c.top_cells()[1];
        let support = restriction_support(sigma);
        assert!(!support.contains(&LatticeVector(vec![0])));
        assert_eq!(support, vec![LatticeVector(vec![1]), LatticeVector(vec![2])]);
    }

    #[test]
    fn three_dimensional_forms_build() {
        // A3 (fcc): tetrahedra and octahedra; cubic: cubes
        let a3 = build_subdivision(&form(&[2, 1, 0, 1, 2, 1, 0, 1, 2]), 1).unwrap();
        let counts: Vec<usize> = (0..=3).map(|d| a3.classes(d).len()).collect();
        assert_eq!(counts[0], 1);
        assert_eq!(a3.quotient_complex().euler_characteristic(), 0);
        let cubic = build_subdivision(&form(&[2, 0, 0, 0, 2, 0, 0, 0, 2]), 2).unwrap();
        assert_eq!(cubic.top_classes().len(), 1);
        assert_eq!(cubic.top_classes()[0].vertices.len(), 8);
        assert_eq!(cubic.quotient_complex().euler_characteristic(), 0);
    }

    #[test]
    fn doc_round_trip() {
        let s = build_subdivision(&form(&[4, 1, 1, 2]), 2).unwrap();
        let doc = s.to_doc();
        let text = serde_json::to_string(&doc).unwrap();
        let back: SubdivisionDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        let rebuilt = PeriodicSubdivision::from_doc(&back).unwrap();
        assert_eq!(rebuilt.top_classes(), s.top_classes());
    }

    fn forms() -> impl Strategy<Value = QForm> {
        prop_oneof![
            Just(form(&[2])),
            Just(form(&[6])),
            Just(form(&[2, 0, 0, 2])),
            Just(form(&[2, 1, 1, 2])),
            Just(form(&[4, 1, 1, 2])),
            Just(form(&[4, -2, -2, 6])),
        ]
    }

    fn rat() -> impl Strategy<Value = Rational> {
        (-40i64..40, 1i64..9).prop_map(|(p, d)| ratio(p, d))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn phi_is_convex(f in forms(), a in prop::collection::vec(rat(), 2), b in prop::collection::vec(rat(), 2), l in 0i64..=8) {
            let s = build_subdivision(&f, 2).unwrap();
            let n = f.rank();
            let lam = ratio(l, 8);
            let one_minus = q(1) - &lam;
            let mid: QVec = a[..n].iter().zip(&b[..n]).map(|(x, y)| &lam * x + &one_minus * y).collect();
            let lhs = s.eval_phi(&mid).unwrap();
            let rhs = &lam * s.eval_phi(&a[..n]).unwrap() + &one_minus * s.eval_phi(&b[..n]).unwrap();
            prop_assert!(lhs <= rhs);
        }

        #[test]
        fn phi_dominates_phi_bar_with_equality_on_lattice(f in forms(), y in prop::collection::vec(rat(), 2)) {
            let s = build_subdivision(&f, 3).unwrap();
            let y = &y[..f.rank()];
            let phi = s.eval_phi(y).unwrap();
            let bar = lattice::phi_bar(&f, y).unwrap();
            prop_assert!(phi >= bar);
            prop_assert_eq!(phi == bar, y.iter().all(|x| x.is_integer()));
        }

        #[test]
        fn periodic_cocycle(f in forms(), k in 1u32..5, y in prop::collection::vec(rat(), 2), g in prop::collection::vec(-4i64..4, 2)) {
            let s = build_subdivision(&f, k).unwrap();
            let n = f.rank();
            let kg = LatticeVector(g[..n].to_vec()).scale(k as i64);
            let y = &y[..n];
            let shifted = linalg::add(y, &kg.as_rational());
            let defect = s.eval_phi(&shifted).unwrap() - s.eval_phi(y).unwrap() - lattice::alpha(&f, &kg).unwrap().eval(y);
            prop_assert!(defect.is_zero());
        }

        #[test]
        fn cells_are_invariant_under_unit_translation(f in forms(), g in prop::collection::vec(-3i64..3, 2)) {
            let s = build_subdivision(&f, 1).unwrap();
            let n = f.rank();
            let g = LatticeVector(g[..n].to_vec());
            for c in s.top_classes() {
                let moved = c.translate(&f, &g);
                // the translated piece still interpolates phi_bar at its vertices
                for v in &moved.vertices {
                    prop_assert_eq!(moved.affine.eval(&v.as_rational()), q(f.phi_bar_int(&v.0)));
                }
                let (norm, _) = moved.normalized(&f);
                prop_assert!(s.top_classes().contains(&norm));
            }
        }
    }
}
