//! Monge-Ampere measures of the periodic piecewise linear potential, the
//! sup-norm gap `phi - phi_bar` and the weak-convergence pairing.

use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, AffineLinear, LatticeVector, QForm};
use crate::linalg::{self, q, QVec, Rational};
use crate::polytope::VPolytope;
use crate::subdivision::{build_subdivision, PeriodicSubdivision};

/// The dual polytope of a lattice point: the slopes of all top cells
/// through it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualCell {
    pub base_point: LatticeVector,
    pub vertices: Vec<QVec>,
}

impl DualCell {
    pub fn volume(&self) -> Rational {
        let n = self.base_point.dim();
        VPolytope::new(n, self.vertices.clone()).volume()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub point: LatticeVector,
    pub mass: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn total(&self) -> Rational {
        self.atoms.iter().map(|a| a.mass.clone()).sum()
    }

    pub fn to_doc(&self) -> MeasureDoc {
        MeasureDoc {
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomDoc { m: a.point.0.clone(), mass: linalg::format_rational(&a.mass) })
                .collect(),
            total: linalg::format_rational(&self.total()),
        }
    }

    pub fn from_doc(doc: &MeasureDoc) -> Result<Self> {
        let atoms = doc
            .atoms
            .iter()
            .map(|a| {
                let mass = linalg::parse_rational(&a.mass)
                    .ok_or_else(|| Error::InvalidParameter(format!("bad rational {:?}", a.mass)))?;
                Ok(Atom { point: LatticeVector(a.m.clone()), mass })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AtomicMeasure { atoms })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomDoc {
    pub m: Vec<i64>,
    pub mass: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub atoms: Vec<AtomDoc>,
    pub total: String,
}

/// Vertices of the subdifferential of `phi` at `y0`.
pub fn subdifferential(sub: &PeriodicSubdivision, y0: &[Rational]) -> Result<Vec<QVec>> {
    subdifferential_shifted(sub, y0, &AffineLinear::zero(sub.rank()))
}

/// Subdifferential of `phi + alpha`.
pub fn subdifferential_shifted(
    sub: &PeriodicSubdivision,
    y0: &[Rational],
    alpha: &AffineLinear,
) -> Result<Vec<QVec>> {
    if alpha.slope.len() != sub.rank() {
        return Err(Error::DimensionMismatch { expected: sub.rank(), got: alpha.slope.len() });
    }
    let slopes: Vec<QVec> = sub
        .active_pieces(y0)?
        .into_iter()
        .map(|p| p.add(alpha).slope)
        .collect();
    Ok(VPolytope::new(sub.rank(), slopes).vertices().to_vec())
}

pub fn dual_cell(sub: &PeriodicSubdivision, m: &LatticeVector) -> Result<DualCell> {
    Ok(DualCell { base_point: m.clone(), vertices: subdifferential(sub, &m.as_rational())? })
}

/// `MA(phi)` on `B_k`: one atom per point of `B_k(Z)` with the exact volume
/// of its dual cell, each computed independently.
pub fn ma_measure(sub: &PeriodicSubdivision) -> Result<AtomicMeasure> {
    ma_measure_shifted(sub, &AffineLinear::zero(sub.rank()))
}

/// `MA(phi + alpha)` for an affine `alpha`.
pub fn ma_measure_shifted(sub: &PeriodicSubdivision, alpha: &AffineLinear) -> Result<AtomicMeasure> {
    let points = lattice::residues(sub.level(), sub.rank());
    let atoms = points
        .into_par_iter()
        .map(|m| {
            let verts = subdifferential_shifted(sub, &m.as_rational(), alpha)?;
            let mass = VPolytope::new(sub.rank(), verts).volume();
            Ok(Atom { point: m, mass })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AtomicMeasure { atoms })
}

/// Volume of the fundamental domain of `kM` acting on `N_R` through `Z`,
/// i.e. `|det(kZ)|`.
pub fn fundamental_domain_volume(form: &QForm, k: u32) -> Rational {
    let kz: Vec<QVec> = form
        .as_rational()
        .into_iter()
        .map(|row| row.into_iter().map(|x| x * q(k as i64)).collect())
        .collect();
    linalg::det(&kz).abs()
}

/// `sup |k^{-2} chi_k^* phi - phi_bar| = k^{-2} sup |phi - phi_bar|`, exact.
///
/// On a top cell with piece `l`, `l - phi_bar` is concave, so its maximum
/// over the cell is attained at the stationary point of its restriction to
/// the affine hull of some face.
pub fn rescaled_sup_gap(form: &QForm, k: u32) -> Result<Rational> {
    if k == 0 {
        return Err(Error::ZeroLevel);
    }
    let sub = build_subdivision(form, 1)?;
    let gap = unscaled_sup_gap(&sub);
    Ok(gap / q(k as i64 * k as i64))
}

fn unscaled_sup_gap(sub: &PeriodicSubdivision) -> Rational {
    let form = sub.form();
    let z = form.as_rational();
    let mut best = Rational::zero();
    for cell in sub.top_classes() {
        let poly = VPolytope::new(
            sub.rank(),
            cell.vertices.iter().map(LatticeVector::as_rational).collect(),
        );
        for face in poly.faces() {
            let pts: Vec<&QVec> = face.vertices.iter().map(|&i| &poly.vertices()[i]).collect();
            let p0 = pts[0];
            let y = if face.dim == 0 {
                p0.clone()
            } else {
                // a basis of the face directions
                let dirs: Vec<QVec> = pts[1..].iter().map(|p| linalg::sub(p, p0)).collect();
                let basis = independent_rows(&dirs);
                let zd: Vec<QVec> = basis.iter().map(|d| linalg::mat_vec(&z, d)).collect();
                let gram: Vec<QVec> = basis
                    .iter()
                    .map(|a| zd.iter().map(|b| linalg::dot(a, b)).collect())
                    .collect();
                let resid = linalg::sub(&cell.affine.slope, &linalg::mat_vec(&z, p0));
                let rhs: Vec<Rational> = basis.iter().map(|d| linalg::dot(d, &resid)).collect();
                let Some(u) = linalg::solve(&gram, &rhs) else { continue };
                let mut y = p0.clone();
                for (d, c) in basis.iter().zip(&u) {
                    for (yi, di) in y.iter_mut().zip(d) {
                        *yi += c * di;
                    }
                }
                y
            };
            if !poly.contains(&y) {
                continue;
            }
            let gap = cell.affine.eval(&y) - lattice::phi_bar(form, &y).expect("dimension checked");
            if gap > best {
                best = gap;
            }
        }
    }
    best
}

fn independent_rows(rows: &[QVec]) -> Vec<QVec> {
    let mut kept: Vec<QVec> = Vec::new();
    for r in rows {
        let mut trial = kept.clone();
        trial.push(r.clone());
        if linalg::rank(&trial) == trial.len() {
            kept = trial;
        }
    }
    kept
}

/// Test functions on the torus `B = M_R / M` for the pairing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    One,
    /// `prod_i sin^2(pi y_i)`
    Sin2,
    /// A smooth bump of half-width 0.3 centred at `(1/2, ..., 1/2)`.
    Bump,
}

impl TestFunction {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "one" => Some(TestFunction::One),
            "sin2" => Some(TestFunction::Sin2),
            "bump" => Some(TestFunction::Bump),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::Sin2 => "sin2",
            TestFunction::Bump => "bump",
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Sin2 => y.iter().map(|x| (std::f64::consts::PI * x).sin().powi(2)).product(),
            TestFunction::Bump => y
                .iter()
                .map(|x| {
                    let u = (x.rem_euclid(1.0) - 0.5) / 0.3;
                    if u.abs() < 1.0 {
                        (1.0 - 1.0 / (1.0 - u * u)).exp()
                    } else {
                        0.0
                    }
                })
                .product(),
        }
    }
}

/// Default reference resolution: about `10^6` midpoint samples in total.
pub fn default_reference_samples(n: usize) -> usize {
    match n {
        1 => 1_000_000,
        2 => 1_000,
        _ => 100,
    }
}

/// `(k^{-n} det Z sum_{j in B_k(Z)} f(j/k), det Z int_B f)`; the integral is
/// a midpoint rule with `samples` nodes per axis.
pub fn weak_convergence_pairing<F>(form: &QForm, k: u32, f: F, samples: usize) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if k == 0 {
        return Err(Error::ZeroLevel);
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("reference samples must be positive".into()));
    }
    let n = form.rank();
    let det = form.det().to_f64().unwrap();
    let lhs = det * grid_mean(n, k as usize, 0.0, &f);
    let rhs = det * grid_mean(n, samples, 0.5, &f);
    Ok((lhs, rhs))
}

/// Mean of `f` over the tensor grid `(j + shift) / per_axis`, with a fixed
/// pairwise reduction order.
fn grid_mean<F>(n: usize, per_axis: usize, shift: f64, f: &F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let total = per_axis.pow(n as u32);
    let h = 1.0 / per_axis as f64;
    // rows along the last axis are summed sequentially, then combined pairwise
    let rows = total / per_axis;
    let row_sums: Vec<f64> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let mut y = vec![0.0; n];
            let mut idx = r;
            for i in (0..n.saturating_sub(1)).rev() {
                y[i] = ((idx % per_axis) as f64 + shift) * h;
                idx /= per_axis;
            }
            let vals: Vec<f64> = (0..per_axis)
                .map(|j| {
                    y[n - 1] = (j as f64 + shift) * h;
                    f(&y)
                })
                .collect();
            pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&row_sums) / total as f64
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{qvec, ratio};
    use proptest::prelude::*;

    fn form(flat: &[i64]) -> QForm {
        QForm::from_flat(flat).unwrap()
    }

    #[test]
    fn subdifferential_examples() {
        let s = build_subdivision(&form(&[2]), 3).unwrap();
        assert_eq!(subdifferential(&s, &[ratio(1, 2)]).unwrap(), vec![qvec(&[1])]);
        assert_eq!(subdifferential(&s, &[q(0)]).unwrap(), vec![qvec(&[-1]), qvec(&[1])]);
        assert_eq!(subdifferential(&s, &[q(2)]).unwrap(), vec![qvec(&[3]), qvec(&[5])]);
    }

    #[test]
    fn refined_subdifferential_shrinks_to_gradient() {
        // psi(y) = N^{-2} phi(N y) interpolates phi_bar on (1/N) M, and
        // d psi(y0) = (1/N) d phi(N y0)
        let f = form(&[2, 1, 1, 2]);
        let s = build_subdivision(&f, 1).unwrap();
        let y0 = [ratio(1, 3), ratio(-2, 3)];
        let grad = f.apply_rational(&y0);
        for big_n in [3i64, 6, 12, 48] {
            let m: Vec<Rational> = y0.iter().map(|c| c * q(big_n)).collect();
            let verts: Vec<QVec> = subdifferential(&s, &m)
                .unwrap()
                .into_iter()
                .map(|v| v.into_iter().map(|x| x / q(big_n)).collect())
                .collect();
            let poly = VPolytope::new(2, verts.clone());
            assert!(poly.contains(&grad));
            let diam = verts
                .iter()
                .map(|v| linalg::to_f64(&linalg::sub(v, &grad).iter().map(|x| x.abs()).max().unwrap()))
                .fold(0.0, f64::max);
            assert!(diam <= 2.0 / big_n as f64);
        }
    }

    #[test]
    fn atoms_are_det_z() {
        let m = ma_measure(&build_subdivision(&form(&[2]), 3).unwrap()).unwrap();
        assert_eq!(m.atoms.len(), 3);
        assert!(m.atoms.iter().all(|a| a.mass == q(2)));
        let m = ma_measure(&build_subdivision(&form(&[2, 1, 1, 2]), 2).unwrap()).unwrap();
        assert_eq!(m.atoms.len(), 4);
        assert!(m.atoms.iter().all(|a| a.mass == q(3)));
        assert_eq!(m.total(), fundamental_domain_volume(&form(&[2, 1, 1, 2]), 2));
    }

    #[test]
    fn measure_doc_round_trip() {
        let m = ma_measure(&build_subdivision(&form(&[4, 1, 1, 2]), 2).unwrap()).unwrap();
        let doc = m.to_doc();
        assert_eq!(doc.total, "28/1");
        let back: MeasureDoc = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(AtomicMeasure::from_doc(&back).unwrap(), m);
    }

    #[test]
    fn sup_gap_closed_form() {
        for k in [1u32, 3, 6] {
            assert_eq!(rescaled_sup_gap(&form(&[2]), k).unwrap(), ratio(1, 4 * (k * k) as i64));
        }
        // square form: product of two 1-d gaps
        assert_eq!(rescaled_sup_gap(&form(&[2, 0, 0, 2]), 1).unwrap(), ratio(1, 2));
    }

    /// Dense sampling oracle for the 2-d sup gap.
    #[test]
    fn sup_gap_matches_sampling() {
        let f = form(&[2, 1, 1, 2]);
        let s = build_subdivision(&f, 1).unwrap();
        let exact = rescaled_sup_gap(&f, 1).unwrap();
        let mut sampled = Rational::zero();
        let d = 24;
        for i in 0..=d {
            for j in 0..=d {
                let y = [ratio(i, d), ratio(j, d)];
                let g = s.eval_phi(&y).unwrap() - lattice::phi_bar(&f, &y).unwrap();
                assert!(g <= exact);
                if g > sampled {
                    sampled = g;
                }
            }
        }
        assert!(linalg::to_f64(&(&exact - &sampled)) < 0.01);
    }

    #[test]
    fn pairing_total_mass() {
        let (l, r) = weak_convergence_pairing(&form(&[2, 1, 1, 2]), 4, |y| TestFunction::One.eval(y), 50).unwrap();
        assert_eq!(l, 3.0);
        assert!((r - 3.0).abs() < 1e-13);
    }

    #[test]
    fn pairing_bump_converges() {
        let f = form(&[2]);
        let bump = |y: &[f64]| TestFunction::Bump.eval(y);
        let (l10, r10) = weak_convergence_pairing(&f, 10, bump, 100_000).unwrap();
        let (l40, r40) = weak_convergence_pairing(&f, 40, bump, 100_000).unwrap();
        assert!((l40 - r40).abs() < (l10 - r10).abs());
        assert!((l40 - r40).abs() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn affine_shift_leaves_measure_unchanged(a in -5i64..5, b in -5i64..5, c in -9i64..9, d in 1i64..4) {
            let s = build_subdivision(&form(&[4, 1, 1, 2]), 2).unwrap();
            let alpha = AffineLinear { slope: vec![ratio(a, d), ratio(b, d)], constant: ratio(c, d) };
            prop_assert_eq!(ma_measure_shifted(&s, &alpha).unwrap(), ma_measure(&s).unwrap());
        }

        #[test]
        fn gap_scales_with_k(k in 1u32..20) {
            let f = form(&[2, 1, 1, 2]);
            let g1 = rescaled_sup_gap(&f, k).unwrap();
            let g2 = rescaled_sup_gap(&f, 2 * k).unwrap();
            prop_assert_eq!(g1, g2 * q(4));
        }
    }
}
