#![allow(dead_code)]

use abelian_degen::lattice::QForm;
use abelian_degen::linalg::{self, q, QVec, Rational};
use astro_float::{BigFloat, Consts, RoundingMode};
use num_complex::Complex64;
use num_traits::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const PREC: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

fn to_f64(x: &BigFloat, cc: &mut Consts) -> f64 {
    x.format(astro_float::Radix::Dec, RM, cc).unwrap().parse().unwrap()
}

/// `theta_m(w)` summed over `v = m + k nu`, `|nu|_inf <= radius`, in 192-bit
/// arithmetic. `ln|t|` and `arg t` are taken from the binary value of `t`.
pub fn theta_bigfloat(form: &QForm, k: u32, m: &[i64], w: &[Complex64], t: Complex64, radius: i64) -> Complex64 {
    let mut cc = Consts::new().unwrap();
    let n = m.len();
    let pi = cc.pi(PREC, RM);
    let two_pi = pi.mul(&big(2.0), PREC, RM);
    let (tr, ti) = (big(t.re), big(t.im));
    let ln_r = tr
        .mul(&tr, PREC, RM)
        .add(&ti.mul(&ti, PREC, RM), PREC, RM)
        .ln(PREC, RM, &mut cc)
        .div(&big(2.0), PREC, RM);
    // any branch will do: phi_bar is an integer
    let arg = if t.re == 0.0 {
        pi.div(&big(2.0f64.copysign(t.im)), PREC, RM)
    } else {
        let a = ti.div(&tr, PREC, RM).atan(PREC, RM, &mut cc);
        if t.re < 0.0 { a.add(&pi, PREC, RM) } else { a }
    };
    let mut re = big(0.0);
    let mut im = big(0.0);
    let mut nu = vec![-radius; n];
    loop {
        let v: Vec<i64> = m.iter().zip(&nu).map(|(a, b)| a + k as i64 * b).collect();
        let pb = big(form.phi_bar_int(&v) as f64);
        let mut wre = big(0.0);
        let mut wim = big(0.0);
        for (z, &vi) in w.iter().zip(&v) {
            wre = wre.add(&big(z.re).mul(&big(vi as f64), PREC, RM), PREC, RM);
            wim = wim.add(&big(z.im).mul(&big(vi as f64), PREC, RM), PREC, RM);
        }
        // exp(2 pi i <w, v>) t^{phi_bar}: modulus exp(-2 pi Im + pb ln r), angle 2 pi Re + pb arg
        let modulus = pb
            .mul(&ln_r, PREC, RM)
            .sub(&two_pi.mul(&wim, PREC, RM), PREC, RM)
            .exp(PREC, RM, &mut cc);
        let angle = two_pi.mul(&wre, PREC, RM).add(&pb.mul(&arg, PREC, RM), PREC, RM);
        re = re.add(&modulus.mul(&angle.cos(PREC, RM, &mut cc), PREC, RM), PREC, RM);
        im = im.add(&modulus.mul(&angle.sin(PREC, RM, &mut cc), PREC, RM), PREC, RM);
        let mut i = 0;
        loop {
            if i == n {
                return Complex64::new(to_f64(&re, &mut cc), to_f64(&im, &mut cc));
            }
            nu[i] += 1;
            if nu[i] <= radius {
                break;
            }
            nu[i] = -radius;
            i += 1;
        }
    }
}

/// Lower convex envelope of `(v, phi_bar(v))` over the lattice points of a
/// planar window, evaluated at `y` by minimizing over all triangles.
pub fn hull_phi_2d(form: &QForm, y: &[Rational], lo: i64, hi: i64) -> Rational {
    let pts: Vec<(QVec, Rational)> = (lo..=hi)
        .flat_map(|a| (lo..=hi).map(move |b| vec![a, b]))
        .map(|v| (linalg::qvec(&v), q(form.phi_bar_int(&v))))
        .collect();
    let mut best: Option<Rational> = None;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for l in j + 1..pts.len() {
                let (a, b, c) = (&pts[i], &pts[j], &pts[l]);
                // y = a + s (b - a) + u (c - a)
                let cols = vec![
                    vec![&b.0[0] - &a.0[0], &c.0[0] - &a.0[0]],
                    vec![&b.0[1] - &a.0[1], &c.0[1] - &a.0[1]],
                ];
                if linalg::det(&cols) == q(0) {
                    continue;
                }
                let rhs = linalg::sub(y, &a.0);
                let su = linalg::solve(&cols, &rhs).unwrap();
                if su[0].is_negative() || su[1].is_negative() || &su[0] + &su[1] > q(1) {
                    continue;
                }
                let val = &a.1 + &su[0] * (&b.1 - &a.1) + &su[1] * (&c.1 - &a.1);
                if best.as_ref().is_none_or(|x| val < *x) {
                    best = Some(val);
                }
            }
        }
    }
    best.expect("window covers y")
}
