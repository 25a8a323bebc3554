//! Level-`k` theta functions
//!
//! ```text
//!   theta_m(w) = sum_{v in m + kM} exp(2 pi i <w, v>) t^{phi_bar(v)}
//! ```
//!
//! evaluated in double precision with a certified truncation radius.
//! `phi_bar(v)` is an exact integer, so `t^{phi_bar(v)}` is assembled from
//! `|t|^{phi_bar(v)}` and the phase `phi_bar(v) * arg t`; the branch of
//! `log t` only adds `phi_bar(v)` whole turns and is dropped exactly.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{self, box_points, LatticeVector, QForm};
use crate::linalg;

pub const DEFAULT_EPS: f64 = 1e-12;
pub const DEFAULT_IM_W_BOUND: f64 = 1.0;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub(crate) struct Term {
    pub v: Vec<i64>,
    /// `t^{phi_bar(v)}`
    pub weight: Complex64,
}

/// Evaluation context: form, level, base point `t` and truncation policy.
#[derive(Clone, Debug)]
pub struct ThetaContext {
    form: QForm,
    k: u32,
    ln_abs_t: f64,
    arg_t: f64,
    sheet: i64,
    eps: f64,
    im_w_bound: f64,
    radius: usize,
    grad_radius: usize,
    /// Terms of every series, grouped by residue index, `|v|_inf <= max radius`.
    terms: Vec<Vec<Term>>,
}

impl ThetaContext {
    pub fn new(form: QForm, k: u32, t: Complex64) -> Result<Self> {
        Self::with_policy(form, k, t, DEFAULT_EPS, DEFAULT_IM_W_BOUND)
    }

    pub fn with_policy(form: QForm, k: u32, t: Complex64, eps: f64, im_w_bound: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroLevel);
        }
        let abs = t.norm();
        if !(abs > 0.0 && abs < 1.0) {
            return Err(Error::InvalidParameter(format!("|t| = {abs} must lie in (0, 1)")));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("truncation eps {eps} must be positive")));
        }
        if !(im_w_bound >= 0.0 && im_w_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("im_w_bound {im_w_bound} must be nonnegative")));
        }
        let arg_t = t.arg().rem_euclid(TAU);
        let mut ctx = ThetaContext {
            form,
            k,
            ln_abs_t: abs.ln(),
            arg_t,
            sheet: 0,
            eps,
            im_w_bound,
            radius: 0,
            grad_radius: 0,
            terms: Vec::new(),
        };
        let lambda = linalg::to_f64(&ctx.form.min_eigenvalue_lower_bound()) * (1.0 - 1e-12);
        let n = ctx.form.rank();
        ctx.radius = certified_radius(n, -ctx.ln_abs_t, lambda, im_w_bound, eps, 0)?;
        ctx.grad_radius = certified_radius(n, -ctx.ln_abs_t, lambda, im_w_bound, eps, 1)?;
        ctx.terms = ctx.collect_terms();
        Ok(ctx)
    }

    fn collect_terms(&self) -> Vec<Vec<Term>> {
        let n = self.form.rank();
        let r = self.radius.max(self.grad_radius) as i64;
        let mut out = vec![Vec::new(); (self.k as usize).pow(n as u32)];
        for v in box_points(&vec![-r; n], &vec![r; n]) {
            let phi_bar = self.form.phi_bar_int(&v);
            let p = phi_bar as f64;
            let phase = (p * self.arg_t).rem_euclid(TAU);
            let weight = Complex64::from_polar((p * self.ln_abs_t).exp(), phase);
            let idx = lattice::residue_index(self.k, &LatticeVector(v.clone()));
            out[idx].push(Term { v, weight });
        }
        out
    }

    /// The same context on another sheet: `log t -> log t + 2 pi i j`.
    pub fn monodromy(&self, j: i64) -> Self {
        ThetaContext { sheet: self.sheet + j, ..self.clone() }
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

    pub fn dimension(&self) -> usize {
        self.terms.len()
    }

    pub fn t(&self) -> Complex64 {
        Complex64::from_polar(self.ln_abs_t.exp(), self.arg_t)
    }

    /// The chosen branch: `ln|t| + i (arg t + 2 pi sheet)`, `arg t in [0, 2 pi)`.
    pub fn log_t(&self) -> Complex64 {
        Complex64::new(self.ln_abs_t, self.arg_t + TAU * self.sheet as f64)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn im_w_bound(&self) -> f64 {
        self.im_w_bound
    }

    /// Truncation radius for values.
    pub fn truncation_radius(&self) -> usize {
        self.radius
    }

    /// Truncation radius for first derivatives.
    pub fn grad_radius(&self) -> usize {
        self.grad_radius
    }

    pub(crate) fn terms(&self, idx: usize) -> &[Term] {
        &self.terms[idx]
    }

    pub(crate) fn max_radius(&self) -> usize {
        self.radius.max(self.grad_radius)
    }

    fn check_w(&self, w: &[Complex64]) -> Result<()> {
        if w.len() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), got: w.len() });
        }
        for (index, z) in w.iter().enumerate() {
            if z.im.abs() > self.im_w_bound {
                return Err(Error::OutsideImBand { index, value: z.im.abs(), bound: self.im_w_bound });
            }
        }
        Ok(())
    }

    /// `exp(2 pi i w_i j)` for `j in -r..=r`, per axis.
    fn axis_tables(&self, w: &[Complex64], r: usize) -> Vec<Vec<Complex64>> {
        w.iter()
            .map(|z| {
                let x = z.re.rem_euclid(1.0);
                (-(r as i64)..=r as i64)
                    .map(|j| {
                        let j = j as f64;
                        Complex64::from_polar((-TAU * z.im * j).exp(), TAU * x * j)
                    })
                    .collect()
            })
            .collect()
    }

    fn index_of(&self, m: &LatticeVector) -> Result<usize> {
        if m.dim() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), got: m.dim() });
        }
        Ok(lattice::residue_index(self.k, m))
    }

    /// `theta_m(w)`; `m` may be any representative of its class mod `k`.
    pub fn theta_eval(&self, m: &LatticeVector, w: &[Complex64]) -> Result<Complex64> {
        let idx = self.index_of(m)?;
        self.check_w(w)?;
        let r = self.radius;
        let tables = self.axis_tables(w, r);
        Ok(self.sum_class(idx, &tables, r))
    }

    fn sum_class(&self, idx: usize, tables: &[Vec<Complex64>], r: usize) -> Complex64 {
        let ri = r as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.terms[idx] {
            if term.v.iter().any(|x| x.abs() > ri) {
                continue;
            }
            let mut z = term.weight;
            for (i, &vi) in term.v.iter().enumerate() {
                z *= tables[i][(vi + ri) as usize];
            }
            acc += z;
        }
        acc
    }

    /// `d theta_m / d w_i` for every `i`.
    pub fn theta_grad(&self, m: &LatticeVector, w: &[Complex64]) -> Result<Vec<Complex64>> {
        let idx = self.index_of(m)?;
        self.check_w(w)?;
        let r = self.grad_radius;
        let tables = self.axis_tables(w, r);
        let (_, grad) = self.jet_class(idx, &tables, r);
        Ok(grad)
    }

    fn jet_class(&self, idx: usize, tables: &[Vec<Complex64>], r: usize) -> (Complex64, Vec<Complex64>) {
        let n = self.rank();
        let ri = r as i64;
        let mut value = Complex64::new(0.0, 0.0);
        let mut grad = vec![Complex64::new(0.0, 0.0); n];
        for term in &self.terms[idx] {
            if term.v.iter().any(|x| x.abs() > ri) {
                continue;
            }
            let mut z = term.weight;
            for (i, &vi) in term.v.iter().enumerate() {
                z *= tables[i][(vi + ri) as usize];
            }
            value += z;
            for (g, &vi) in grad.iter_mut().zip(&term.v) {
                *g += z * (vi as f64);
            }
        }
        for g in grad.iter_mut() {
            *g *= I * TAU;
        }
        (value, grad)
    }

    /// All `k^n` values at `w`, indexed by `residues(k, n)`.
    pub fn theta_vector(&self, w: &[Complex64]) -> Result<ThetaVector> {
        self.check_w(w)?;
        let r = self.radius;
        let tables = self.axis_tables(w, r);
        let values = (0..self.terms.len()).map(|i| self.sum_class(i, &tables, r)).collect();
        Ok(ThetaVector { values })
    }

    /// All values and gradients at `w`, using the gradient radius throughout.
    pub fn theta_jet(&self, w: &[Complex64]) -> Result<ThetaJet> {
        self.check_w(w)?;
        let r = self.max_radius();
        let tables = self.axis_tables(w, r);
        let (values, grads) = (0..self.terms.len()).map(|i| self.jet_class(i, &tables, r)).unzip();
        Ok(ThetaJet { values, grads })
    }

    /// `(log t / 2 pi i) Z p`, the `t`-period attached to `p in M`.
    pub fn period(&self, p: &LatticeVector) -> Vec<Complex64> {
        let scale = self.log_t() / (I * TAU);
        self.form.apply(&p.0).iter().map(|&x| scale * x as f64).collect()
    }

    /// Relative defect of
    /// `theta_m(w + mu + k tau(p)) = theta_m(w) exp(-2 pi i k <w, p> - k^2 log t phi_bar(p))`
    /// where `tau(p) = (log t / 2 pi i) Z p`. The absolute defect is divided
    /// by `max(1, |automorphy factor|)`.
    pub fn quasi_periodicity_defect(
        &self,
        m: &LatticeVector,
        w: &[Complex64],
        mu: &LatticeVector,
        p: &LatticeVector,
    ) -> Result<f64> {
        if mu.dim() != self.rank() || p.dim() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), got: mu.dim().min(p.dim()) });
        }
        let k = self.k as f64;
        let tau = self.period(p);
        let shifted: Vec<Complex64> =
            w.iter().zip(&mu.0).zip(&tau).map(|((z, &u), s)| z + u as f64 + s * k).collect();
        let lhs = self.theta_eval(m, &shifted)?;
        let wp: Complex64 = w.iter().zip(&p.0).map(|(z, &x)| z * x as f64).sum();
        let factor = (-I * TAU * k * wp - self.log_t() * (k * k * self.form.phi_bar_int(&p.0) as f64)).exp();
        let rhs = self.theta_eval(m, w)? * factor;
        Ok((lhs - rhs).norm() / factor.norm().max(1.0))
    }

    /// `(T_a theta_m)(w) = e^{2 pi i <w,a>} t^{phi_bar(a)} theta_m(w + tau(a))`,
    /// which should equal `theta_{m+a}(w)`. Returns the relative defect.
    pub fn translate_defect(&self, m: &LatticeVector, a: &LatticeVector, w: &[Complex64]) -> Result<f64> {
        let tau = self.period(a);
        let shifted: Vec<Complex64> = w.iter().zip(&tau).map(|(z, s)| z + s).collect();
        let wa: Complex64 = w.iter().zip(&a.0).map(|(z, &x)| z * x as f64).sum();
        let factor = (I * TAU * wa + self.log_t() * self.form.phi_bar_int(&a.0) as f64).exp();
        let lhs = factor * self.theta_eval(m, &shifted)?;
        let rhs = self.theta_eval(&m.add(a), w)?;
        Ok((lhs - rhs).norm() / rhs.norm().max(lhs.norm()).max(1.0))
    }

    /// `theta_m(w + b/k)` against `e^{2 pi i <b,m>/k} theta_m(w)`; relative defect.
    pub fn phase_defect(&self, m: &LatticeVector, b: &LatticeVector, w: &[Complex64]) -> Result<f64> {
        let k = self.k as f64;
        let shifted: Vec<Complex64> = w.iter().zip(&b.0).map(|(z, &x)| z + x as f64 / k).collect();
        let lhs = self.theta_eval(m, &shifted)?;
        let phase = Complex64::from_polar(1.0, TAU * m.dot(b) as f64 / k);
        let rhs = phase * self.theta_eval(m, w)?;
        Ok((lhs - rhs).norm() / rhs.norm().max(1.0))
    }
}

/// Smallest `R` such that the bound on the terms with `|v|_inf > R` sums to
/// less than `eps`. Shell `r` holds at most `(2r+1)^n - (2r-1)^n` lattice
/// points, each bounded by `(2 pi r)^p exp(-a lambda r^2 / 2 + 2 pi B n r)`
/// where `a = -ln|t|` and `B` is the imaginary band. The ratio of
/// consecutive shell bounds decreases in `r`, so once it drops to `q <= 1/2`
/// the rest of the tail is at most `bound(r) / (1 - q)`.
fn certified_radius(n: usize, a: f64, lambda: f64, band: f64, eps: f64, power: i32) -> Result<usize> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("form has no positive eigenvalue bound".into()));
    }
    let nf = n as f64;
    let ln_bound = |r: f64| {
        let cnt = (2.0 * r + 1.0).powi(n as i32) - (2.0 * r - 1.0).powi(n as i32);
        cnt.ln() + power as f64 * (TAU * r).ln() - 0.5 * a * lambda * r * r + TAU * band * nf * r
    };
    let ln_eps = eps.ln();
    let tail = |big_r: usize| -> f64 {
        // log-sum-exp over shells, relative to the first shell's bound
        let first = ln_bound(big_r as f64 + 1.0);
        let mut rel = 0.0f64;
        let mut r = big_r + 1;
        loop {
            let here = ln_bound(r as f64);
            let ratio = (ln_bound(r as f64 + 1.0) - here).exp();
            if ratio <= 0.5 {
                rel += (here - first).exp() / (1.0 - ratio);
                break;
            }
            rel += (here - first).exp();
            r += 1;
            if r > big_r + 100_000 {
                return f64::INFINITY;
            }
        }
        first + rel.ln()
    };
    (0..100_000)
        .find(|&r| tail(r) < ln_eps)
        .ok_or_else(|| Error::InvalidParameter("no finite truncation radius; |t| too close to 1".into()))
}

/// Values `theta_m(w)` for all `m in B_k(Z)`, in `residues` order.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaVector {
    pub values: Vec<Complex64>,
}

/// Values and gradients of all `theta_m` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaJet {
    pub values: Vec<Complex64>,
    pub grads: Vec<Vec<Complex64>>,
}

/// Magnitude of the leading term `|t|^{phi_bar(m)}` for the reduced `m`.
pub fn leading_magnitude(ctx: &ThetaContext, m: &LatticeVector) -> Result<f64> {
    let r = lattice::reduce_mod(ctx.level(), m)?;
    Ok((ctx.form().phi_bar_int(&r.0) as f64 * ctx.log_t().re).exp())
}
