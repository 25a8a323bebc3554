//! Exact convex polytopes given by their vertex sets.
//!
//! Only full-dimensional polytopes get facets and a face lattice; the
//! ambient dimension is small (at most 3 or 4), so facets are found by
//! brute force over affinely independent subsets of vertices.

use std::collections::BTreeSet;

use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::linalg::{self, QVec, Rational};

/// A supporting hyperplane `<normal, y> <= offset` and the vertices on it.
#[derive(Clone, Debug)]
pub struct Facet {
    pub normal: QVec,
    pub offset: Rational,
    pub vertices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub vertices: Vec<usize>,
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub struct VPolytope {
    ambient: usize,
    points: Vec<QVec>,
    dim: usize,
    facets: Vec<Facet>,
}

impl VPolytope {
    /// Builds the polytope `conv(points)`; points that are not extreme are
    /// dropped, duplicates are merged.
    pub fn new(ambient: usize, points: Vec<QVec>) -> Self {
        let mut pts: Vec<QVec> = points;
        pts.sort();
        pts.dedup();
        let dim = linalg::affine_rank(&pts);
        let mut poly = VPolytope { ambient, points: pts, dim, facets: Vec::new() };
        if dim == ambient && ambient > 0 {
            poly.facets = poly.compute_facets();
            let extreme: Vec<usize> = poly
                .faces()
                .into_iter()
                .filter(|f| f.dim == 0)
                .map(|f| f.vertices[0])
                .collect();
            if extreme.len() < poly.points.len() {
                let kept = extreme.iter().map(|&i| poly.points[i].clone()).collect();
                return VPolytope::new(ambient, kept);
            }
        }
        poly
    }

    pub fn vertices(&self) -> &[QVec] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_full_dimensional(&self) -> bool {
        self.dim == self.ambient
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    fn compute_facets(&self) -> Vec<Facet> {
        let d = self.ambient;
        let n = self.points.len();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut out = Vec::new();
        for combo in combinations(n, d) {
            let base = &self.points[combo[0]];
            let diffs: Vec<QVec> =
                combo[1..].iter().map(|&i| linalg::sub(&self.points[i], base)).collect();
            let ns = linalg::nullspace(&diffs, d);
            if ns.len() != 1 {
                continue;
            }
            let mut normal = ns.into_iter().next().unwrap();
            let mut offset = linalg::dot(&normal, base);
            let sides: Vec<Rational> =
                self.points.iter().map(|p| linalg::dot(&normal, p) - &offset).collect();
            let has_pos = sides.iter().any(|s| s.is_positive());
            let has_neg = sides.iter().any(|s| s.is_negative());
            if has_pos && has_neg {
                continue;
            }
            if has_pos {
                normal = normal.into_iter().map(|x| -x).collect();
                offset = -offset;
            }
            let on: Vec<usize> = (0..n).filter(|&i| sides[i].is_zero()).collect();
            if seen.insert(on.clone()) {
                let (normal, offset) = primitive(normal, &offset);
                out.push(Facet { normal, offset, vertices: on });
            }
        }
        out
    }

    /// All nonempty faces including the polytope itself, as vertex index
    /// sets. Requires a full-dimensional polytope (or a single point).
    pub fn faces(&self) -> Vec<Face> {
        let all: Vec<usize> = (0..self.points.len()).collect();
        if self.dim == 0 {
            return vec![Face { vertices: all, dim: 0 }];
        }
        assert!(self.is_full_dimensional(), "face lattice needs a full-dimensional polytope");
        let mut sets: BTreeSet<Vec<usize>> = self.facets.iter().map(|f| f.vertices.clone()).collect();
        loop {
            let current: Vec<Vec<usize>> = sets.iter().cloned().collect();
            let mut grew = false;
            for (i, a) in current.iter().enumerate() {
                for b in &current[i + 1..] {
                    let meet: Vec<usize> = a.iter().filter(|x| b.contains(x)).copied().collect();
                    if !meet.is_empty() && sets.insert(meet) {
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        sets.insert(all);
        sets.into_iter()
            .map(|v| {
                let pts: Vec<QVec> = v.iter().map(|&i| self.points[i].clone()).collect();
                Face { dim: linalg::affine_rank(&pts), vertices: v }
            })
            .collect()
    }

    /// `point` lies in the closed polytope (full-dimensional case only).
    pub fn contains(&self, point: &[Rational]) -> bool {
        if self.dim == 0 {
            return self.points.first().is_some_and(|p| p.as_slice() == point);
        }
        assert!(self.is_full_dimensional());
        self.facets.iter().all(|f| linalg::dot(&f.normal, point) <= f.offset)
    }

    /// Simplices (as vertex index lists) of a pulling triangulation from
    /// the smallest vertex index of every face.
    pub fn triangulation(&self) -> Vec<Vec<usize>> {
        if !self.is_full_dimensional() {
            return Vec::new();
        }
        let faces = self.faces();
        let top = faces.iter().find(|f| f.dim == self.dim).unwrap().clone();
        triangulate(&faces, &top)
    }

    /// Exact Euclidean volume; zero for lower-dimensional polytopes.
    pub fn volume(&self) -> Rational {
        let d = self.ambient;
        let total: Rational = self
            .triangulation()
            .iter()
            .map(|s| {
                let base = &self.points[s[0]];
                let m: Vec<QVec> = s[1..].iter().map(|&i| linalg::sub(&self.points[i], base)).collect();
                linalg::det(&m).abs()
            })
            .sum();
        total / Rational::from_integer(linalg::factorial(d))
    }
}

fn triangulate(faces: &[Face], face: &Face) -> Vec<Vec<usize>> {
    if face.dim == 0 {
        return vec![vec![face.vertices[0]]];
    }
    let apex = face.vertices[0];
    let mut out = Vec::new();
    for sub in faces.iter().filter(|g| {
        g.dim + 1 == face.dim
            && !g.vertices.contains(&apex)
            && g.vertices.iter().all(|v| face.vertices.contains(v))
    }) {
        for mut s in triangulate(faces, sub) {
            s.insert(0, apex);
            out.push(s);
        }
    }
    out
}

/// Scales a hyperplane so the normal is a primitive integer vector.
fn primitive(normal: QVec, offset: &Rational) -> (QVec, Rational) {
    let lcm = normal
        .iter()
        .chain(std::iter::once(offset))
        .fold(num_bigint::BigInt::from(1), |acc, x| acc.lcm(x.denom()));
    let scaled: Vec<Rational> = normal.iter().map(|x| x * Rational::from_integer(lcm.clone())).collect();
    let off = offset * Rational::from_integer(lcm);
    let g = scaled
        .iter()
        .fold(num_bigint::BigInt::from(0), |acc, x| acc.gcd(x.numer()));
    if g.is_zero() {
        return (scaled, off);
    }
    let g = Rational::from_integer(g);
    (scaled.iter().map(|x| x / &g).collect(), off / g)
}

pub(crate) fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < r - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::with_capacity(r), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{q, qvec, ratio};

    #[test]
    fn unit_square_faces_and_volume() {
        let sq = VPolytope::new(2, vec![qvec(&[0, 0]), qvec(&[1, 0]), qvec(&[0, 1]), qvec(&[1, 1])]);
        let faces = sq.faces();
        let count = |d| faces.iter().filter(|f| f.dim == d).count();
        assert_eq!((count(0), count(1), count(2)), (4, 4, 1));
        assert_eq!(sq.volume(), q(1));
        assert!(sq.contains(&[ratio(1, 2), q(1)]));
        assert!(!sq.contains(&[ratio(3, 2), q(0)]));
    }

    #[test]
    fn interior_points_are_dropped() {
        let tri = VPolytope::new(
            2,
            vec![qvec(&[0, 0]), qvec(&[4, 0]), qvec(&[0, 4]), qvec(&[1, 1]), qvec(&[2, 0])],
        );
        assert_eq!(tri.vertices().len(), 3);
        assert_eq!(tri.volume(), q(8));
    }

    #[test]
    fn interval_and_cube_volumes() {
        let iv = VPolytope::new(1, vec![qvec(&[-1]), qvec(&[1]), qvec(&[0])]);
        assert_eq!(iv.vertices().len(), 2);
        assert_eq!(iv.volume(), q(2));
        let mut cube = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    cube.push(qvec(&[2 * x, 3 * y, z]));
                }
            }
        }
        let c = VPolytope::new(3, cube);
        assert_eq!(c.volume(), q(6));
        assert_eq!(c.faces().iter().filter(|f| f.dim == 2).count(), 6);
        assert_eq!(c.faces().iter().filter(|f| f.dim == 1).count(), 12);
    }

    #[test]
    fn hexagon_volume() {
        // Voronoi-type hexagon of the A2 lattice, scaled to integers
        let hex = VPolytope::new(
            2,
            vec![
                qvec(&[1, 1]),
                qvec(&[-1, 2]),
                qvec(&[-2, 1]),
                qvec(&[-1, -1]),
                qvec(&[1, -2]),
                qvec(&[2, -1]),
            ],
        );
        assert_eq!(hex.facets().len(), 6);
        assert_eq!(hex.volume(), q(9));
    }

    #[test]
    fn lower_dimensional_has_no_volume() {
        let seg = VPolytope::new(2, vec![qvec(&[0, 0]), qvec(&[1, 1])]);
        assert_eq!(seg.dim(), 1);
        assert_eq!(seg.volume(), q(0));
    }
}
