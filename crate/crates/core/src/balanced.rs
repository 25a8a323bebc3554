//! Fubini-Study quadrature on the abelian fiber and the balanced-embedding
//! checks built on it.
//!
//! The fiber `C^n / Lambda_s`, `s = t^k`, is parametrized by
//! `w = x + tau (y - 1/2)` with `(x, y) in [0,1)^{2n}` and
//! `tau = k (log t / 2 pi i) Z`; centring `y` keeps `|Im w|` as small as
//! possible. Pulled back through the theta map, the Fubini-Study form is
//! `i H_ij dw_i ^ dw_j-bar` with `H = (1/2 pi) dd-bar log S`,
//! `S = sum_m |theta_m|^2`, so its volume density against `dRe w dIm w` is
//! `2^n det H`. With this normalization a line has unit area, the total
//! volume is `k^n`, and a balanced embedding has Gram matrix `I`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heisenberg::{representation, HeisenbergElement};
use crate::lattice::{self, QForm};
use crate::theta::{ThetaContext, DEFAULT_EPS};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The fiber over `t`, its period lattice and parametrization.
#[derive(Clone, Debug)]
pub struct AbelianFiber {
    ctx: ThetaContext,
    /// `tau = k (log t / 2 pi i) Z`, row-major.
    tau: Vec<Vec<Complex64>>,
    jacobian: f64,
}

impl AbelianFiber {
    /// A fiber whose theta context certifies the whole fundamental domain.
    pub fn new(form: QForm, k: u32, t: Complex64) -> Result<Self> {
        Self::with_band_factor(form, k, t, 1.0)
    }

    /// As [`AbelianFiber::new`] with the imaginary band widened by `factor`
    /// (shifted arguments in the action checks leave the domain).
    pub fn with_band_factor(form: QForm, k: u32, t: Complex64, factor: f64) -> Result<Self> {
        Self::with_policy(form, k, t, DEFAULT_EPS, factor)
    }

    /// Truncation `eps` and band factor for the underlying theta context.
    pub fn with_policy(form: QForm, k: u32, t: Complex64, eps: f64, factor: f64) -> Result<Self> {
        if !(factor >= 1.0) {
            return Err(Error::InvalidParameter(format!("band factor {factor} must be >= 1")));
        }
        let band = domain_band(&form, k, t.norm().ln()) * factor;
        let ctx = ThetaContext::with_policy(form, k, t, eps, band)?;
        Self::from_context(ctx)
    }

    pub fn from_context(ctx: ThetaContext) -> Result<Self> {
        let form = ctx.form().clone();
        let k = ctx.level();
        let needed = domain_band(&form, k, ctx.log_t().re);
        if ctx.im_w_bound() < needed {
            return Err(Error::InvalidParameter(format!(
                "context band {} does not cover the fundamental domain band {needed}",
                ctx.im_w_bound()
            )));
        }
        let scale = ctx.log_t() / (I * TAU) * k as f64;
        let tau = form
            .entries()
            .iter()
            .map(|row| row.iter().map(|&z| scale * z as f64).collect())
            .collect();
        let n = form.rank() as i32;
        let jacobian = (k as f64 * ctx.log_t().re.abs() / TAU).powi(n) * crate::linalg::to_f64(&form.det());
        Ok(AbelianFiber { ctx, tau, jacobian })
    }

    pub fn context(&self) -> &ThetaContext {
        &self.ctx
    }

    pub fn rank(&self) -> usize {
        self.ctx.rank()
    }

    /// `|det d(Re w, Im w) / d(x, y)| = (k |ln|t|| / 2 pi)^n det Z`.
    pub fn jacobian(&self) -> f64 {
        self.jacobian
    }

    /// `w(x, y) = x + tau (y - 1/2)`.
    pub fn point(&self, x: &[f64], y: &[f64]) -> Vec<Complex64> {
        let c = self.tau_shift(y);
        x.iter().zip(c).map(|(a, b)| b + a).collect()
    }

    fn tau_shift(&self, y: &[f64]) -> Vec<Complex64> {
        self.tau
            .iter()
            .map(|row| row.iter().zip(y).map(|(t, yi)| t * (yi - 0.5)).sum())
            .collect()
    }

    /// `tau p` for a lattice vector `p`: the generators of `Lambda_s` besides `Z^n`.
    pub fn period(&self, p: &[i64]) -> Vec<Complex64> {
        self.tau
            .iter()
            .map(|row| row.iter().zip(p).map(|(t, &pi)| t * pi as f64).sum())
            .collect()
    }

    pub fn weight(&self) -> HermitianWeight {
        HermitianWeight::new(self.ctx.form(), self.ctx.log_t().re)
    }
}

/// `max_i |Im w_i|` over the centred fundamental domain.
fn domain_band(form: &QForm, k: u32, ln_abs_t: f64) -> f64 {
    let scale = k as f64 * ln_abs_t.abs() / TAU;
    form.entries()
        .iter()
        .map(|row| 0.5 * scale * row.iter().map(|z| z.abs() as f64).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `h(w) = exp((4 pi^2 / ln|t|) Im(w)^T Z^{-1} Im(w))`; `h |theta_m|^2` is
/// invariant under `Lambda_s`.
#[derive(Clone, Debug)]
pub struct HermitianWeight {
    coef: f64,
    zinv: Vec<Vec<f64>>,
}

impl HermitianWeight {
    pub fn new(form: &QForm, ln_abs_t: f64) -> Self {
        HermitianWeight { coef: 2.0 * TAU * std::f64::consts::PI / ln_abs_t, zinv: form.inverse_f64() }
    }

    pub fn eval(&self, w: &[Complex64]) -> f64 {
        let mut q = 0.0;
        for (i, row) in self.zinv.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                q += w[i].im * z * w[j].im;
            }
        }
        (self.coef * q).exp()
    }
}

/// Hermitian `n x n` matrix `H` at one point from theta values and
/// gradients, together with `S` and the scale `tr(A) / (2 pi S)` bounding `tr H`.
fn kahler_from_jet(values: &[Complex64], grads: &[Vec<Complex64>], n: usize) -> (Vec<Vec<Complex64>>, f64, f64) {
    let s: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    if values.len() == 1 {
        // A S - |b|^2 vanishes identically for a single section
        return (vec![vec![ZERO; n]; n], s, 0.0);
    }
    let mut b = vec![ZERO; n];
    let mut a = vec![vec![ZERO; n]; n];
    for (v, g) in values.iter().zip(grads) {
        for i in 0..n {
            b[i] += g[i] * v.conj();
            for j in 0..n {
                a[i][j] += g[i] * g[j].conj();
            }
        }
    }
    let denom = TAU * s * s;
    let h = (0..n)
        .map(|i| (0..n).map(|j| (a[i][j] * s - b[i] * b[j].conj()) / denom).collect())
        .collect();
    let scale = (0..n).map(|i| a[i][i].re).sum::<f64>() / (TAU * s);
    (h, s, scale)
}

/// Determinant of a Hermitian matrix by elimination without pivoting;
/// `None` unless every pivot (ratio of leading minors) is positive.
fn positive_det(h: &[Vec<Complex64>]) -> Option<f64> {
    let n = h.len();
    let mut a: Vec<Vec<Complex64>> = h.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let p = a[k][k].re;
        if !(p > 0.0 && p.is_finite()) {
            return None;
        }
        det *= p;
        for i in k + 1..n {
            let f = a[i][k] / p;
            for j in k + 1..n {
                let d = f * a[k][j];
                a[i][j] -= d;
            }
        }
    }
    Some(det)
}

/// `det H` for a positive semidefinite `H`, allowing eigenvalues down to
/// `-1e-10 scale`. Below `k = 3` the theta map is not an embedding and `H`
/// degenerates at ramification points (identically for `k = 1`).
fn semidefinite_det(h: &[Vec<Complex64>], scale: f64) -> Option<f64> {
    if let Some(d) = positive_det(h) {
        return Some(d);
    }
    let n = h.len();
    let m = DMatrix::from_fn(n, n, |i, j| h[i][j]);
    let eig = m.symmetric_eigenvalues();
    if !eig.iter().all(|e| e.is_finite() && *e >= -1e-10 * scale) {
        return None;
    }
    Some(eig.iter().map(|e| e.max(0.0)).product())
}

fn describe(w: &[Complex64]) -> String {
    let parts: Vec<String> = w.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
    format!("({})", parts.join(", "))
}

/// `H_ij = (1/2 pi) d_i dbar_j log S` at `w`.
pub fn fs_kahler_matrix(fiber: &AbelianFiber, w: &[Complex64]) -> Result<DMatrix<Complex64>> {
    let jet = fiber.ctx.theta_jet(w)?;
    let n = fiber.rank();
    let (h, _, _) = kahler_from_jet(&jet.values, &jet.grads, n);
    if positive_det(&h).is_none() {
        return Err(Error::NotPositiveDefiniteMetric(describe(w)));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| h[i][j]))
}

/// Tensor trapezoid rule on `[0,1)^{2n}`: nodes `(j + offset) / grid`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub grid: usize,
    /// Origin shift in grid units for the `n` x-axes then the `n` y-axes.
    pub offset: Vec<f64>,
}

impl Quadrature {
    pub fn new(grid: usize, n: usize) -> Self {
        Quadrature { grid, offset: vec![0.0; 2 * n] }
    }
}

/// Gram matrix of the theta basis with respect to the pulled-back
/// Fubini-Study volume, indexed by `residues(k, n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    pub dim: usize,
    pub entries: Vec<Vec<Complex64>>,
    pub grid: usize,
    /// Total Fubini-Study volume from the same quadrature.
    pub volume: f64,
    /// Largest entry change against the half-resolution subgrid.
    pub estimated_error: f64,
}

impl GramMatrix {
    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let d = m.nrows();
        let entries = (0..d).map(|i| (0..d).map(|j| m[(i, j)]).collect()).collect();
        let volume = (0..d).map(|i| m[(i, i)].re).sum();
        GramMatrix { dim: d, entries, grid: 0, volume, estimated_error: 0.0 }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entries[i][j])
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[i][i].re).sum()
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    m = m.max(self.entries[i][j].norm());
                }
            }
        }
        m
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max((self.entries[i][j] - self.entries[j][i].conj()).norm());
            }
        }
        m
    }
}

/// `|| G - (tr G / d) I ||_F / (tr G / d)`.
pub fn balanced_defect(g: &GramMatrix) -> f64 {
    let mean = g.trace() / g.dim as f64;
    let mut acc = 0.0;
    for i in 0..g.dim {
        for j in 0..g.dim {
            let target = if i == j { Complex64::new(mean, 0.0) } else { ZERO };
            acc += (g.entries[i][j] - target).norm_sqr();
        }
    }
    acc.sqrt() / mean
}

pub fn fubini_volume(fiber: &AbelianFiber, grid: usize) -> Result<f64> {
    Ok(gram_matrix(fiber, grid)?.volume)
}

pub fn gram_matrix(fiber: &AbelianFiber, grid: usize) -> Result<GramMatrix> {
    gram_matrix_with(fiber, &Quadrature::new(grid, fiber.rank()))
}

/// Per-residue layout of the truncated series for row evaluation.
struct ClassLayout {
    /// Allowed coordinates along each axis (`= m_i mod k`, within the radius).
    axes: Vec<Vec<i64>>,
    /// `(flat position, t^{phi_bar(v)}, v)` of every term.
    terms: Vec<(usize, Complex64, Vec<i64>)>,
    /// `exp(2 pi i x_j v)` for each axis, `grid x axes[i].len()` row-major.
    x_factors: Vec<Vec<Complex64>>,
}

impl ClassLayout {
    fn new(ctx: &ThetaContext, idx: usize, m: &[i64], grid: usize, x_offset: &[f64]) -> Self {
        let k = ctx.level() as i64;
        let r = ctx.max_radius() as i64;
        let axes: Vec<Vec<i64>> = m
            .iter()
            .map(|&mi| (-r..=r).filter(|v| (v - mi).rem_euclid(k) == 0).collect())
            .collect();
        let terms = ctx
            .terms(idx)
            .iter()
            .map(|t| {
                let mut pos = 0;
                for (i, &vi) in t.v.iter().enumerate() {
                    let p = axes[i].iter().position(|&a| a == vi).unwrap();
                    pos = pos * axes[i].len() + p;
                }
                (pos, t.weight, t.v.clone())
            })
            .collect();
        let x_factors = axes
            .iter()
            .enumerate()
            .map(|(i, list)| {
                let mut f = Vec::with_capacity(grid * list.len());
                for j in 0..grid {
                    let x = (j as f64 + x_offset[i]) / grid as f64;
                    for &v in list {
                        f.push(Complex64::from_polar(1.0, TAU * (x * v as f64).rem_euclid(1.0)));
                    }
                }
                f
            })
            .collect();
        ClassLayout { axes, terms, x_factors }
    }

    /// Values (channel 0) and gradients (channels 1..=n) of this theta on
    /// the whole x-grid for a fixed complex shift `c`.
    fn row(&self, c: &[Complex64], grid: usize, r: i64) -> Vec<Vec<Complex64>> {
        let n = c.len();
        let tables: Vec<Vec<Complex64>> = c
            .iter()
            .map(|ci| {
                let re = ci.re.rem_euclid(1.0);
                (-r..=r)
                    .map(|v| {
                        let v = v as f64;
                        Complex64::from_polar((-TAU * ci.im * v).exp(), TAU * (re * v).rem_euclid(1.0))
                    })
                    .collect()
            })
            .collect();
        let size: usize = self.axes.iter().map(Vec::len).product();
        let mut channels = vec![vec![ZERO; size]; n + 1];
        for (pos, weight, v) in &self.terms {
            let mut z = *weight;
            for (i, &vi) in v.iter().enumerate() {
                z *= tables[i][(vi + r) as usize];
            }
            channels[0][*pos] = z;
            for i in 0..n {
                channels[i + 1][*pos] = z * I * (TAU * v[i] as f64);
            }
        }
        channels.into_iter().map(|ch| self.contract(ch, grid)).collect()
    }

    /// Contracts every axis against the x-factors; output is indexed by the
    /// x-grid in row-major order.
    fn contract(&self, mut t: Vec<Complex64>, grid: usize) -> Vec<Complex64> {
        let n = self.axes.len();
        for axis in (0..n).rev() {
            let l = self.axes[axis].len();
            let rest = t.len() / l;
            let f = &self.x_factors[axis];
            let mut out = vec![ZERO; grid * rest];
            for x in 0..grid {
                let fx = &f[x * l..(x + 1) * l];
                for r in 0..rest {
                    let row = &t[r * l..(r + 1) * l];
                    let mut s = ZERO;
                    for (a, b) in fx.iter().zip(row) {
                        s += a * b;
                    }
                    out[x * rest + r] = s;
                }
            }
            t = out;
        }
        t
    }
}

#[derive(Clone)]
struct Partial {
    volume: f64,
    volume_half: f64,
    gram: Vec<Complex64>,
    gram_half: Vec<Complex64>,
}

impl Partial {
    fn zero(d: usize) -> Self {
        Partial { volume: 0.0, volume_half: 0.0, gram: vec![ZERO; d * d], gram_half: vec![ZERO; d * d] }
    }

    fn add(mut self, o: &Partial) -> Self {
        self.volume += o.volume;
        self.volume_half += o.volume_half;
        for (a, b) in self.gram.iter_mut().zip(&o.gram) {
            *a += b;
        }
        for (a, b) in self.gram_half.iter_mut().zip(&o.gram_half) {
            *a += b;
        }
        self
    }
}

fn tree_sum(parts: &[Partial], d: usize) -> Partial {
    match parts.len() {
        0 => Partial::zero(d),
        1 => parts[0].clone(),
        len => {
            let (a, b) = parts.split_at(len / 2);
            tree_sum(a, d).add(&tree_sum(b, d))
        }
    }
}

fn unravel(mut idx: usize, grid: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for i in (0..n).rev() {
        out[i] = idx % grid;
        idx /= grid;
    }
    out
}

/// Gram matrix and volume with an explicit quadrature rule. Nodes are
/// evaluated in parallel over `y`; the reduction order is fixed.
pub fn gram_matrix_with(fiber: &AbelianFiber, quad: &Quadrature) -> Result<GramMatrix> {
    let n = fiber.rank();
    let grid = quad.grid;
    if grid < 8 {
        return Err(Error::InvalidParameter(format!("quadrature grid {grid} must be at least 8")));
    }
    if quad.offset.len() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: quad.offset.len() });
    }
    let ctx = &fiber.ctx;
    let k = ctx.level();
    let residues = lattice::residues(k, n);
    let d = residues.len();
    let layouts: Vec<ClassLayout> = residues
        .iter()
        .enumerate()
        .map(|(idx, m)| ClassLayout::new(ctx, idx, &m.0, grid, &quad.offset[..n]))
        .collect();
    let r = ctx.max_radius() as i64;
    let nodes = grid.pow(n as u32);
    let density_scale = 2f64.powi(n as i32) * fiber.jacobian;

    let partials = (0..nodes)
        .into_par_iter()
        .map(|yi| -> Result<Partial> {
            let yidx = unravel(yi, grid, n);
            let y: Vec<f64> = yidx.iter().zip(&quad.offset[n..]).map(|(&j, o)| (j as f64 + o) / grid as f64).collect();
            let y_even = yidx.iter().all(|j| j % 2 == 0);
            let c = fiber.tau_shift(&y);
            let rows: Vec<Vec<Vec<Complex64>>> = layouts.iter().map(|l| l.row(&c, grid, r)).collect();
            let mut part = Partial::zero(d);
            let mut values = vec![ZERO; d];
            let mut grads = vec![vec![ZERO; n]; d];
            for xi in 0..nodes {
                for m in 0..d {
                    values[m] = rows[m][0][xi];
                    for i in 0..n {
                        grads[m][i] = rows[m][i + 1][xi];
                    }
                }
                let (h, s, scale) = kahler_from_jet(&values, &grads, n);
                let Some(det) = semidefinite_det(&h, scale) else {
                    let x: Vec<f64> = unravel(xi, grid, n)
                        .iter()
                        .zip(&quad.offset[..n])
                        .map(|(&j, o)| (j as f64 + o) / grid as f64)
                        .collect();
                    return Err(Error::NotPositiveDefiniteMetric(describe(&fiber.point(&x, &y))));
                };
                let density = det * density_scale;
                let half = y_even && unravel(xi, grid, n).iter().all(|j| j % 2 == 0);
                part.volume += density;
                let scale = density / s;
                for a in 0..d {
                    let va = values[a] * scale;
                    for b in 0..d {
                        part.gram[a * d + b] += va * values[b].conj();
                    }
                }
                if half {
                    part.volume_half += density;
                    for a in 0..d {
                        let va = values[a] * scale;
                        for b in 0..d {
                            part.gram_half[a * d + b] += va * values[b].conj();
                        }
                    }
                }
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;

    let total = tree_sum(&partials, d);
    let full_nodes = (nodes * nodes) as f64;
    let half_nodes = ((grid / 2).pow(n as u32) * (grid / 2).pow(n as u32)) as f64;
    let entries: Vec<Vec<Complex64>> =
        (0..d).map(|a| (0..d).map(|b| total.gram[a * d + b] / full_nodes).collect()).collect();
    let volume = total.volume / full_nodes;
    let estimated_error = if grid.is_multiple_of(2) {
        let mut e = (total.volume_half / half_nodes - volume).abs();
        for a in 0..d {
            for b in 0..d {
                e = e.max((total.gram_half[a * d + b] / half_nodes - entries[a][b]).norm());
            }
        }
        e
    } else {
        f64::NAN
    };
    Ok(GramMatrix { dim: d, entries, grid, volume, estimated_error })
}

/// Relative defect of `h(w) |(rho(g) f)(w)|^2 = (h |f|^2)(w + b/k + tau_t(a))`
/// for `f = sum_m c_m theta_m`, where `tau_t(a) = (log t / 2 pi i) Z a`.
pub fn hermitian_norm_invariance(
    fiber: &AbelianFiber,
    g: &HeisenbergElement,
    coeffs: &[Complex64],
    w: &[Complex64],
) -> Result<f64> {
    let ctx = &fiber.ctx;
    let k = ctx.level();
    let n = ctx.rank();
    if coeffs.len() != ctx.dimension() {
        return Err(Error::DimensionMismatch { expected: ctx.dimension(), got: coeffs.len() });
    }
    if g.a.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: g.a.dim() });
    }
    let weight = fiber.weight();
    let moved = representation(k, g).apply(coeffs);
    let here = ctx.theta_vector(w)?.values;
    let lhs_f: Complex64 = moved.iter().zip(&here).map(|(c, v)| c * v).sum();
    let lhs = weight.eval(w) * lhs_f.norm_sqr();

    let tau = ctx.period(&g.a);
    let shifted: Vec<Complex64> = w
        .iter()
        .zip(&g.b.0)
        .zip(&tau)
        .map(|((z, &b), s)| z + b as f64 / k as f64 + s)
        .collect();
    let there = ctx.theta_vector(&shifted)?.values;
    let rhs_f: Complex64 = coeffs.iter().zip(&there).map(|(c, v)| c * v).sum();
    let rhs = weight.eval(&shifted) * rhs_f.norm_sqr();
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).abs() / scale)
}

/// Dimension of `{A : A g = g A for every generator g}`.
pub fn commutant_dimension(generators: &[DMatrix<Complex64>]) -> Result<usize> {
    let Some(first) = generators.first() else {
        return Err(Error::InvalidParameter("no generators".into()));
    };
    let d = first.nrows();
    for (i, g) in generators.iter().enumerate() {
        if g.nrows() != d || g.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: g.nrows() });
        }
        let sv = g.clone().singular_values();
        let max = sv.max();
        if !(sv.min() > 1e-10 * max) {
            return Err(Error::SingularGenerator(i));
        }
    }
    let id = DMatrix::<Complex64>::identity(d, d);
    let dd = d * d;
    let mut system = DMatrix::<Complex64>::zeros(generators.len() * dd, dd);
    for (i, g) in generators.iter().enumerate() {
        // vec(A g - g A) = (g^T kron I - I kron g) vec(A)
        let block = g.transpose().kronecker(&id) - id.kronecker(g);
        system.view_mut((i * dd, 0), (dd, dd)).copy_from(&block);
    }
    let sv = system.singular_values();
    let max = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-9 * max.max(1.0)).count();
    Ok(dd - rank)
}

/// `|| G g - g G ||_F` for each generator.
pub fn commutator_norms(gram: &GramMatrix, generators: &[DMatrix<Complex64>]) -> Vec<f64> {
    let gm = gram.to_dense();
    generators.iter().map(|g| (&gm * g - g * &gm).norm()).collect()
}
