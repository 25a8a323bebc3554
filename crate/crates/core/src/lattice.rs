//! The lattice `M = Z^n`, the even quadratic form `Z`, the potential
//! `phi_bar(y) = Z(y, y) / 2` and the affine cocycle `alpha_gamma`.
//!
//! All arithmetic here is exact.

use std::fmt;

use num_integer::Integer;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, q, QVec, Rational};

/// Symmetric positive definite integer matrix with even diagonal.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "QFormDoc", into = "QFormDoc")]
pub struct QForm {
    n: usize,
    entries: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QFormDoc {
    pub n: usize,
    pub entries: Vec<Vec<i64>>,
}

impl TryFrom<QFormDoc> for QForm {
    type Error = Error;

    fn try_from(doc: QFormDoc) -> Result<Self> {
        if doc.entries.len() != doc.n {
            return Err(Error::DimensionMismatch { expected: doc.n, got: doc.entries.len() });
        }
        QForm::new(doc.entries)
    }
}

impl From<QForm> for QFormDoc {
    fn from(q: QForm) -> Self {
        QFormDoc { n: q.n, entries: q.entries }
    }
}

impl fmt::Debug for QForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QForm{:?}", self.entries)
    }
}

impl QForm {
    pub fn new(entries: Vec<Vec<i64>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::InvalidParameter("rank must be positive".into()));
        }
        for row in &entries {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i][j] != entries[j][i] {
                    return Err(Error::NotSymmetric(i, j));
                }
            }
        }
        for i in 1..=n {
            let minor: Vec<QVec> =
                (0..i).map(|r| (0..i).map(|c| q(entries[r][c])).collect()).collect();
            if linalg::det(&minor) <= Rational::zero() {
                return Err(Error::NotPositiveDefinite(i));
            }
        }
        if let Some(i) = (0..n).find(|&i| entries[i][i].is_odd()) {
            return Err(Error::OddDiagonal(i));
        }
        Ok(QForm { n, entries })
    }

    /// Row-major flat list, e.g. `[2, 1, 1, 2]` for `[[2,1],[1,2]]`.
    pub fn from_flat(flat: &[i64]) -> Result<Self> {
        let n = (flat.len() as f64).sqrt().round() as usize;
        if n * n != flat.len() || n == 0 {
            return Err(Error::NotSquare(flat.len()));
        }
        QForm::new(flat.chunks(n).map(|c| c.to_vec()).collect())
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Vec<i64>] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.entries[i][j]
    }

    pub fn det(&self) -> Rational {
        linalg::det(&self.as_rational())
    }

    pub fn as_rational(&self) -> Vec<QVec> {
        self.entries.iter().map(|r| linalg::qvec(r)).collect()
    }

    /// `Z^{-1}`, exact.
    pub fn inverse(&self) -> Vec<QVec> {
        linalg::inverse(&self.as_rational()).expect("positive definite form is invertible")
    }

    pub fn inverse_f64(&self) -> Vec<Vec<f64>> {
        self.inverse().iter().map(|r| r.iter().map(linalg::to_f64).collect()).collect()
    }

    /// `Z v` for an integer vector.
    pub fn apply(&self, v: &[i64]) -> Vec<i64> {
        self.entries.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn apply_rational(&self, v: &[Rational]) -> QVec {
        self.entries
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| q(*a) * b).sum())
            .collect()
    }

    pub fn pair(&self, u: &[i64], v: &[i64]) -> i64 {
        self.apply(u).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// `phi_bar(m)` on lattice points; an integer because the diagonal is even.
    pub fn phi_bar_int(&self, m: &[i64]) -> i64 {
        self.pair(m, m) / 2
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: len });
        }
        Ok(())
    }

    /// A rational `lambda > 0` with `Z - lambda I` positive definite,
    /// found by bisection on exact leading minors.
    pub fn min_eigenvalue_lower_bound(&self) -> Rational {
        let z = self.as_rational();
        let pd = |lambda: &Rational| {
            (1..=self.n).all(|i| {
                let minor: Vec<QVec> = (0..i)
                    .map(|r| {
                        (0..i)
                            .map(|c| if r == c { &z[r][c] - lambda } else { z[r][c].clone() })
                            .collect()
                    })
                    .collect();
                linalg::det(&minor) > Rational::zero()
            })
        };
        let mut lo = Rational::zero();
        let mut hi = q(*self.entries.iter().enumerate().map(|(i, r)| &r[i]).min().unwrap());
        for _ in 0..40 {
            let mid = (&lo + &hi) / q(2);
            if pd(&mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// An element of `M` (or of `N` when used as a dual vector).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeVector(pub Vec<i64>);

impl LatticeVector {
    pub fn zero(n: usize) -> Self {
        LatticeVector(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        LatticeVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_rational(&self) -> QVec {
        linalg::qvec(&self.0)
    }

    pub fn add(&self, other: &LatticeVector) -> LatticeVector {
        LatticeVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &LatticeVector) -> LatticeVector {
        LatticeVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: i64) -> LatticeVector {
        LatticeVector(self.0.iter().map(|a| a * s).collect())
    }

    pub fn dot(&self, other: &LatticeVector) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

impl From<Vec<i64>> for LatticeVector {
    fn from(v: Vec<i64>) -> Self {
        LatticeVector(v)
    }
}

/// `y -> <slope, y> + constant` with rational data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineLinear {
    pub slope: QVec,
    pub constant: Rational,
}

impl AffineLinear {
    pub fn zero(n: usize) -> Self {
        AffineLinear { slope: vec![Rational::zero(); n], constant: Rational::zero() }
    }

    pub fn eval(&self, y: &[Rational]) -> Rational {
        linalg::dot(&self.slope, y) + &self.constant
    }

    pub fn add(&self, other: &AffineLinear) -> AffineLinear {
        AffineLinear {
            slope: linalg::add(&self.slope, &other.slope),
            constant: &self.constant + &other.constant,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.slope.iter().all(Zero::is_zero)
    }
}

/// `phi_bar(y) = Z(y, y) / 2`.
pub fn phi_bar(form: &QForm, y: &[Rational]) -> Result<Rational> {
    form.check_dim(y.len())?;
    Ok(linalg::dot(y, &form.apply_rational(y)) / q(2))
}

/// `alpha_gamma(y) = Z(gamma, y) + Z(gamma, gamma) / 2`.
pub fn alpha(form: &QForm, gamma: &LatticeVector) -> Result<AffineLinear> {
    form.check_dim(gamma.dim())?;
    let slope = linalg::qvec(&form.apply(&gamma.0));
    let constant = Rational::new(form.pair(&gamma.0, &gamma.0).into(), 2.into());
    Ok(AffineLinear { slope, constant })
}

/// `phi_bar(y + gamma) - phi_bar(y) - alpha_gamma(y)`; identically zero.
pub fn cocycle_defect(form: &QForm, y: &[Rational], gamma: &LatticeVector) -> Result<Rational> {
    form.check_dim(y.len())?;
    form.check_dim(gamma.dim())?;
    let shifted = linalg::add(y, &gamma.as_rational());
    Ok(phi_bar(form, &shifted)? - phi_bar(form, y)? - alpha(form, gamma)?.eval(y))
}

/// Canonical representative of `m` in `M / kM`, coordinates in `0..k`.
pub fn reduce_mod(k: u32, m: &LatticeVector) -> Result<LatticeVector> {
    if k == 0 {
        return Err(Error::ZeroLevel);
    }
    Ok(LatticeVector(m.0.iter().map(|x| x.rem_euclid(k as i64)).collect()))
}

/// Lexicographic index of a reduced representative in `B_k(Z)`.
pub fn residue_index(k: u32, m: &LatticeVector) -> usize {
    m.0.iter().fold(0usize, |acc, &x| acc * k as usize + x.rem_euclid(k as i64) as usize)
}

/// All of `B_k(Z) = M / kM` in lexicographic order of reduced representatives.
pub fn residues(k: u32, n: usize) -> Vec<LatticeVector> {
    let total = (k as usize).pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut v = vec![0i64; n];
            for i in (0..n).rev() {
                v[i] = (idx % k as usize) as i64;
                idx /= k as usize;
            }
            LatticeVector(v)
        })
        .collect()
}

/// All integer vectors in the box `lo[i] ..= hi[i]`, lexicographic.
pub(crate) fn box_points(lo: &[i64], hi: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for (&l, &h) in lo.iter().zip(hi) {
        let mut next = Vec::new();
        for p in &out {
            for x in l..=h {
                let mut v = p.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{qvec, ratio};
    use proptest::prelude::*;

    fn a2() -> QForm {
        QForm::from_flat(&[2, 1, 1, 2]).unwrap()
    }

    #[test]
    fn rejects_invalid_forms() {
        assert_eq!(QForm::from_flat(&[2, 1, 0, 2]), Err(Error::NotSymmetric(1, 0)));
        assert_eq!(QForm::from_flat(&[2, 3, 3, 2]), Err(Error::NotPositiveDefinite(2)));
        assert_eq!(QForm::from_flat(&[3]), Err(Error::OddDiagonal(0)));
        assert_eq!(QForm::from_flat(&[0]), Err(Error::NotPositiveDefinite(1)));
        assert_eq!(QForm::from_flat(&[2, 1, 1]), Err(Error::NotSquare(3)));
    }

    #[test]
    fn phi_bar_examples() {
        let one = QForm::from_flat(&[2]).unwrap();
        assert_eq!(phi_bar(&one, &qvec(&[1])).unwrap(), q(1));
        assert_eq!(phi_bar(&a2(), &qvec(&[1, 1])).unwrap(), q(3));
        assert_eq!(phi_bar(&one, &qvec(&[5])).unwrap(), q(25));
        assert!(phi_bar(&one, &qvec(&[1, 2])).is_err());
    }

    #[test]
    fn alpha_examples() {
        let one = QForm::from_flat(&[2]).unwrap();
        let a = alpha(&one, &LatticeVector(vec![3])).unwrap();
        assert_eq!(a.slope, qvec(&[6]));
        assert_eq!(a.constant, q(9));
        assert!(alpha(&one, &LatticeVector(vec![0])).unwrap().is_zero());
        let b = alpha(&a2(), &LatticeVector(vec![1, 0])).unwrap();
        assert_eq!(b.slope, qvec(&[2, 1]));
        assert_eq!(b.constant, q(1));
    }

    #[test]
    fn cocycle_defect_at_half() {
        let one = QForm::from_flat(&[2]).unwrap();
        let d = cocycle_defect(&one, &[ratio(1, 2)], &LatticeVector(vec![1])).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn reduce_mod_examples() {
        assert_eq!(reduce_mod(3, &LatticeVector(vec![4])).unwrap(), LatticeVector(vec![1]));
        assert_eq!(reduce_mod(3, &LatticeVector(vec![-1, 5])).unwrap(), LatticeVector(vec![2, 2]));
        assert_eq!(reduce_mod(1, &LatticeVector(vec![-7, 9])).unwrap(), LatticeVector(vec![0, 0]));
        assert_eq!(reduce_mod(0, &LatticeVector(vec![1])), Err(Error::ZeroLevel));
    }

    #[test]
    fn residues_are_lexicographic() {
        let r = residues(2, 2);
        assert_eq!(r.len(), 4);
        assert_eq!(r[1], LatticeVector(vec![0, 1]));
        for (i, m) in r.iter().enumerate() {
            assert_eq!(residue_index(2, m), i);
        }
    }

    #[test]
    fn min_eigenvalue_bound_is_valid() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let l = a2().min_eigenvalue_lower_bound();
        assert!(l > ratio(99, 100) && l <= q(1));
    }

    #[test]
    fn json_round_trip_validates() {
        let s = serde_json::to_string(&a2()).unwrap();
        assert_eq!(s, r#"{"n":2,"entries":[[2,1],[1,2]]}"#);
        let back: QForm = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a2());
        assert!(serde_json::from_str::<QForm>(r#"{"n":1,"entries":[[3]]}"#).is_err());
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-50i64..50, 1i64..12).prop_map(|(p, d)| ratio(p, d))
    }

    fn form_strategy() -> impl Strategy<Value = QForm> {
        prop_oneof![
            Just(QForm::from_flat(&[2]).unwrap()),
            Just(QForm::from_flat(&[4]).unwrap()),
            Just(a2()),
            Just(QForm::from_flat(&[4, 1, 1, 2]).unwrap()),
            Just(QForm::from_flat(&[2, 1, 0, 1, 2, 1, 0, 1, 2]).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn cocycle_defect_vanishes(
            form in form_strategy(),
            ys in prop::collection::vec(small_rational(), 3),
            gs in prop::collection::vec(-9i64..9, 3),
        ) {
            let n = form.rank();
            let d = cocycle_defect(&form, &ys[..n], &LatticeVector(gs[..n].to_vec())).unwrap();
            prop_assert!(d.is_zero());
        }

        #[test]
        fn cocycle_composes(
            form in form_strategy(),
            ys in prop::collection::vec(small_rational(), 3),
            g1 in prop::collection::vec(-9i64..9, 3),
            g2 in prop::collection::vec(-9i64..9, 3),
        ) {
            let n = form.rank();
            let (g1, g2) = (LatticeVector(g1[..n].to_vec()), LatticeVector(g2[..n].to_vec()));
            let y = &ys[..n];
            let lhs = alpha(&form, &g1.add(&g2)).unwrap().eval(y);
            let shifted = linalg::add(y, &g2.as_rational());
            let rhs = alpha(&form, &g1).unwrap().eval(&shifted) + alpha(&form, &g2).unwrap().eval(y);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn phi_bar_is_integral_on_lattice(form in form_strategy(), ms in prop::collection::vec(-30i64..30, 3)) {
            let m = &ms[..form.rank()];
            let v = phi_bar(&form, &qvec(m)).unwrap();
            prop_assert!(v.is_integer());
            prop_assert_eq!(v, q(form.phi_bar_int(m)));
        }

        #[test]
        fn reduce_mod_is_idempotent_homomorphism(k in 1u32..9, a in prop::collection::vec(-40i64..40, 2), b in prop::collection::vec(-40i64..40, 2)) {
            let (a, b) = (LatticeVector(a), LatticeVector(b));
            let ra = reduce_mod(k, &a).unwrap();
            prop_assert_eq!(reduce_mod(k, &ra).unwrap(), ra.clone());
            let rb = reduce_mod(k, &b).unwrap();
            prop_assert_eq!(reduce_mod(k, &a.add(&b)).unwrap(), reduce_mod(k, &ra.add(&rb)).unwrap());
        }
    }
}
