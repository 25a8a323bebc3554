//! The finite Heisenberg group `H_k = mu_k x B_k(Z) x T_k` and its action on
//! the span of the theta functions, as exact monomial matrices.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, LatticeVector};

/// `(zeta, a, b)` with `zeta = exp(2 pi i e / k)` stored as `e mod k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeisenbergElement {
    pub zeta: u32,
    pub a: LatticeVector,
    pub b: LatticeVector,
}

impl HeisenbergElement {
    pub fn new(k: u32, zeta: i64, a: LatticeVector, b: LatticeVector) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroLevel);
        }
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
        }
        Ok(HeisenbergElement {
            zeta: zeta.rem_euclid(k as i64) as u32,
            a: lattice::reduce_mod(k, &a)?,
            b: lattice::reduce_mod(k, &b)?,
        })
    }

    pub fn identity(n: usize) -> Self {
        HeisenbergElement { zeta: 0, a: LatticeVector::zero(n), b: LatticeVector::zero(n) }
    }

    /// `(z, a, b)(z', a', b') = (z z' e^{2 pi i <b, a'>/k}, a + a', b + b')`.
    pub fn mul(&self, other: &Self, k: u32) -> Self {
        let ki = k as i64;
        let e = self.zeta as i64 + other.zeta as i64 + self.b.dot(&other.a);
        HeisenbergElement {
            zeta: e.rem_euclid(ki) as u32,
            a: lattice::reduce_mod(k, &self.a.add(&other.a)).unwrap(),
            b: lattice::reduce_mod(k, &self.b.add(&other.b)).unwrap(),
        }
    }
}

/// A `k^n x k^n` matrix with exactly one nonzero entry per column, a `k`-th
/// root of unity: column `j` carries `exp(2 pi i phase[j] / k)` in row
/// `perm[j]`. Rows and columns are indexed by `residues(k, n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialMatrix {
    pub k: u32,
    pub perm: Vec<usize>,
    pub phase: Vec<u32>,
}

impl MonomialMatrix {
    pub fn identity(k: u32, n: usize) -> Self {
        let d = (k as usize).pow(n as u32);
        MonomialMatrix { k, perm: (0..d).collect(), phase: vec![0; d] }
    }

    pub fn scalar(k: u32, n: usize, e: i64) -> Self {
        let mut m = Self::identity(k, n);
        m.phase.iter_mut().for_each(|p| *p = e.rem_euclid(k as i64) as u32);
        m
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        let k = self.k;
        let perm = other.perm.iter().map(|&r| self.perm[r]).collect();
        let phase = other
            .perm
            .iter()
            .zip(&other.phase)
            .map(|(&r, &p)| (p + self.phase[r]) % k)
            .collect();
        MonomialMatrix { k, perm, phase }
    }

    /// `Some(e)` when the matrix is `exp(2 pi i e / k) I`.
    pub fn as_scalar(&self) -> Option<u32> {
        let first = *self.phase.first()?;
        let diag = self.perm.iter().enumerate().all(|(j, &r)| r == j);
        (diag && self.phase.iter().all(|&p| p == first)).then_some(first)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for (j, (&r, &p)) in self.perm.iter().zip(&self.phase).enumerate() {
            out[(r, j)] = root_of_unity(self.k, p as i64);
        }
        out
    }

    /// `(M c)` for a coefficient vector in the theta basis.
    pub fn apply(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (j, (&r, &p)) in self.perm.iter().zip(&self.phase).enumerate() {
            out[r] += root_of_unity(self.k, p as i64) * c[j];
        }
        out
    }
}

pub fn root_of_unity(k: u32, e: i64) -> Complex64 {
    let e = e.rem_euclid(k as i64);
    Complex64::from_polar(1.0, TAU * e as f64 / k as f64)
}

/// `T_a : theta_m -> theta_{m+a}`.
pub fn heisenberg_translate(k: u32, a: &LatticeVector) -> MonomialMatrix {
    let n = a.dim();
    let residues = lattice::residues(k, n);
    let perm = residues.iter().map(|m| lattice::residue_index(k, &m.add(a))).collect();
    MonomialMatrix { k, perm, phase: vec![0; residues.len()] }
}

/// `S_b : theta_m -> exp(2 pi i <b, m>/k) theta_m`.
pub fn heisenberg_phase(k: u32, b: &LatticeVector) -> MonomialMatrix {
    let n = b.dim();
    let residues = lattice::residues(k, n);
    let phase = residues.iter().map(|m| m.dot(b).rem_euclid(k as i64) as u32).collect();
    MonomialMatrix { k, perm: (0..residues.len()).collect(), phase }
}

/// `rho(zeta, a, b) = zeta T_a S_b`, a representation of the group law above.
pub fn representation(k: u32, g: &HeisenbergElement) -> MonomialMatrix {
    let n = g.a.dim();
    MonomialMatrix::scalar(k, n, g.zeta as i64)
        .mul(&heisenberg_translate(k, &g.a))
        .mul(&heisenberg_phase(k, &g.b))
}

/// `T_{e_i}` and `S_{e_i}` for every coordinate direction.
pub fn generators(k: u32, n: usize) -> Vec<MonomialMatrix> {
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        out.push(heisenberg_translate(k, &LatticeVector::unit(n, i)));
    }
    for i in 0..n {
        out.push(heisenberg_phase(k, &LatticeVector::unit(n, i)));
    }
    out
}
