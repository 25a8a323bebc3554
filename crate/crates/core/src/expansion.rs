//! Theta functions written in the local monomial chart of the total space
//! at a vertex of the decomposition.
//!
//! At a vertex `u` every top cell containing `u` contributes the primitive
//! edge vectors `e` leaving `u`, lifted to `(e, phi_bar(u + e) - phi_bar(u))`.
//! When each vertex cone is simplicial and unimodular these lifted edges
//! together with `t` generate the cone, and a term
//! `Z^{(v, phi_bar(v), 1)}` of the series factors as
//! `prod z_j^{c_j} t^{r}` with `v - u = sum c_j e_j`, `c_j >= 0`.

use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, box_points, LatticeVector};
use crate::linalg::{self, q, QVec, Rational};
use crate::polytope::VPolytope;
use crate::subdivision::PeriodicSubdivision;

/// A lattice point `(m, r, l)` of the cone over the graph of `phi`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialTerm {
    pub m: LatticeVector,
    pub r: i64,
    pub l: i64,
}

/// One term of an expansion: the monomial and its chart exponents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub monomial: MonomialTerm,
    /// `v = m + k nu`
    pub nu: Vec<i64>,
    pub z_exps: Vec<i64>,
    pub t_exp: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalChart {
    pub vertex: LatticeVector,
    /// Lifted generators `(e, lift)`, in descending lexicographic order of `e`.
    pub generators: Vec<(Vec<i64>, i64)>,
    /// For each top cell at the vertex, the indices of its generators.
    pub cones: Vec<Vec<usize>>,
}

pub fn local_chart(sub: &PeriodicSubdivision, vertex: &LatticeVector) -> Result<LocalChart> {
    let n = sub.rank();
    if vertex.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: vertex.dim() });
    }
    let form = sub.form();
    let base = form.phi_bar_int(&vertex.0);
    let mut cone_edges: Vec<Vec<Vec<i64>>> = Vec::new();
    for cell in sub.cells_at(vertex) {
        let poly = VPolytope::new(n, cell.vertices.iter().map(LatticeVector::as_rational).collect());
        let here = poly
            .vertices()
            .iter()
            .position(|p| *p == vertex.as_rational())
            .expect("cell contains the vertex");
        let mut edges: Vec<Vec<i64>> = poly
            .faces()
            .into_iter()
            .filter(|f| f.dim == 1 && f.vertices.contains(&here))
            .map(|f| {
                let other = *f.vertices.iter().find(|&&i| i != here).unwrap();
                let d = linalg::sub(&poly.vertices()[other], &poly.vertices()[here]);
                d.iter().map(|x| x.to_integer().to_i64().unwrap()).collect()
            })
            .collect();
        edges.sort();
        let mat: Vec<QVec> = edges.iter().map(|e| linalg::qvec(e)).collect();
        if edges.len() != n || linalg::det(&mat).abs() != q(1) {
            return Err(Error::UnsupportedChart(format!("{:?}", vertex.0)));
        }
        cone_edges.push(edges);
    }
    let mut all: Vec<Vec<i64>> = cone_edges.iter().flatten().cloned().collect();
    all.sort();
    all.dedup();
    all.reverse();
    let generators = all
        .iter()
        .map(|e| {
            let target: Vec<i64> = vertex.0.iter().zip(e).map(|(a, b)| a + b).collect();
            (e.clone(), form.phi_bar_int(&target) - base)
        })
        .collect();
    let cones = cone_edges
        .iter()
        .map(|edges| edges.iter().map(|e| all.iter().position(|g| g == e).unwrap()).collect())
        .collect();
    Ok(LocalChart { vertex: vertex.clone(), generators, cones })
}

/// Terms `Z^{(v, phi_bar(v), 1)}` of `theta_m` with `v = m + k nu`,
/// `|nu|_inf <= order`, in the chart at `vertex`, sorted by `t` exponent.
pub fn monomial_expansion(
    sub: &PeriodicSubdivision,
    vertex: &[Rational],
    m: &LatticeVector,
    order: u32,
) -> Result<Vec<ExpansionTerm>> {
    let n = sub.rank();
    if vertex.len() != n || m.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: vertex.len().min(m.dim()) });
    }
    if !vertex.iter().all(|x| x.is_integer()) {
        return Err(Error::NotAVertex(vertex.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")));
    }
    let u = LatticeVector(vertex.iter().map(|x| x.to_integer().to_i64().unwrap()).collect());
    let chart = local_chart(sub, &u)?;
    let form = sub.form();
    let k = sub.level() as i64;
    let base = form.phi_bar_int(&u.0);
    let m = lattice::reduce_mod(sub.level(), m)?;
    let o = order as i64;
    let mut out = Vec::new();
    for nu in box_points(&vec![-o; n], &vec![o; n]) {
        let v: Vec<i64> = m.0.iter().zip(&nu).map(|(a, b)| a + k * b).collect();
        let d: QVec = linalg::qvec(&v.iter().zip(&u.0).map(|(a, b)| a - b).collect::<Vec<_>>());
        let mut z_exps = vec![0i64; chart.generators.len()];
        let mut lifted = 0i64;
        let mut placed = false;
        for cone in &chart.cones {
            let cols: Vec<QVec> = (0..n)
                .map(|i| cone.iter().map(|&g| q(chart.generators[g].0[i])).collect())
                .collect();
            let Some(c) = linalg::solve(&cols, &d) else { continue };
            if c.iter().any(|x| x.is_negative()) {
                continue;
            }
            for (&g, x) in cone.iter().zip(&c) {
                let e = x.to_integer().to_i64().unwrap();
                z_exps[g] = e;
                lifted += e * chart.generators[g].1;
            }
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::UnsupportedChart(format!("{:?}", u.0)));
        }
        let r = form.phi_bar_int(&v);
        out.push(ExpansionTerm {
            monomial: MonomialTerm { m: LatticeVector(v), r, l: 1 },
            nu,
            z_exps,
            t_exp: r - base - lifted,
        });
    }
    out.sort_by(|a, b| (a.t_exp, &a.nu).cmp(&(b.t_exp, &b.nu)));
    Ok(out)
}

/// Checks `r >= l phi(m / l)` for `l > 0`; for `l = 0` only `(0, r >= 0)`
/// lies in the recession cone.
pub fn in_cone(sub: &PeriodicSubdivision, term: &MonomialTerm) -> Result<bool> {
    if term.l < 0 {
        return Ok(false);
    }
    if term.l == 0 {
        return Ok(term.r >= 0 && term.m.0.iter().all(|x| *x == 0));
    }
    let l = q(term.l);
    let y: QVec = term.m.as_rational().into_iter().map(|x| x / &l).collect();
    let bound = sub.eval_phi(&y)? * &l;
    Ok(q(term.r) >= bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::QForm;
    use crate::subdivision::build_subdivision;

    fn cycle3() -> PeriodicSubdivision {
        build_subdivision(&QForm::from_flat(&[2]).unwrap(), 3).unwrap()
    }

    #[test]
    fn chart_generators_in_one_dimension() {
        let chart = local_chart(&cycle3(), &LatticeVector(vec![0])).unwrap();
        assert_eq!(chart.generators, vec![(vec![1], 1), (vec![-1], 1)]);
    }

    #[test]
    fn theta_zero_expansion() {
        let terms = monomial_expansion(&cycle3(), &[q(0)], &LatticeVector(vec![0]), 2).unwrap();
        let got: Vec<(Vec<i64>, i64)> = terms.iter().map(|t| (t.z_exps.clone(), t.t_exp)).collect();
        assert_eq!(
            got,
            vec![
                (vec![0, 0], 0),
                (vec![0, 3], 6),
                (vec![3, 0], 6),
                (vec![0, 6], 30),
                (vec![6, 0], 30),
            ]
        );
    }

    #[test]
    fn theta_one_leading_terms() {
        let terms = monomial_expansion(&cycle3(), &[q(0)], &LatticeVector(vec![1]), 1).unwrap();
        let got: Vec<(Vec<i64>, i64)> = terms.iter().map(|t| (t.z_exps.clone(), t.t_exp)).collect();
        assert_eq!(got, vec![(vec![1, 0], 0), (vec![0, 2], 2), (vec![4, 0], 12)]);
    }

    #[test]
    fn vertex_must_be_lattice_point() {
        let err = monomial_expansion(&cycle3(), &[linalg::ratio(1, 2)], &LatticeVector(vec![0]), 1);
        assert!(matches!(err, Err(Error::NotAVertex(_))));
    }

    #[test]
    fn square_form_has_a_chart() {
        let s = build_subdivision(&QForm::from_flat(&[2, 0, 0, 2]).unwrap(), 2).unwrap();
        let chart = local_chart(&s, &LatticeVector(vec![0, 0])).unwrap();
        assert_eq!(chart.generators.len(), 4);
        assert_eq!(chart.cones.len(), 4);
        let terms = monomial_expansion(&s, &[q(0), q(0)], &LatticeVector(vec![1, 1]), 1).unwrap();
        assert!(terms.iter().all(|t| t.t_exp >= 0));
        for t in &terms {
            assert!(in_cone(&s, &t.monomial).unwrap());
        }
    }

    #[test]
    fn a2_vertex_chart() {
        let s = build_subdivision(&QForm::from_flat(&[2, 1, 1, 2]).unwrap(), 2).unwrap();
        let chart = local_chart(&s, &LatticeVector(vec![0, 0])).unwrap();
        assert_eq!(chart.generators.len(), 6);
        let terms = monomial_expansion(&s, &[q(0), q(0)], &LatticeVector(vec![0, 1]), 2).unwrap();
        assert!(terms.iter().all(|t| t.t_exp >= 0));
    }

    #[test]
    fn cone_membership() {
        let s = cycle3();
        assert!(in_cone(&s, &MonomialTerm { m: LatticeVector(vec![1]), r: 1, l: 2 }).unwrap());
        assert!(!in_cone(&s, &MonomialTerm { m: LatticeVector(vec![3]), r: 4, l: 2 }).unwrap());
        assert!(in_cone(&s, &MonomialTerm { m: LatticeVector(vec![0]), r: 2, l: 0 }).unwrap());
    }
}
