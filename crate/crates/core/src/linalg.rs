//! Exact linear algebra over the rationals.
//!
//! Everything here is plain Gaussian elimination on `BigRational` entries;
//! the matrices are tiny (at most 4x4 in practice) so no attempt is made
//! at fraction-free tricks.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;
pub type QVec = Vec<Rational>;

pub fn q(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn qvec(v: &[i64]) -> QVec {
    v.iter().map(|&x| q(x)).collect()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[Rational], b: &[Rational]) -> QVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[Rational], b: &[Rational]) -> QVec {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn mat_vec(m: &[QVec], v: &[Rational]) -> QVec {
    m.iter().map(|row| dot(row, v)).collect()
}

pub fn to_f64(x: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(m: &mut [QVec]) -> Vec<usize> {
    let rows = m.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = m[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let d = &f * &m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(rows: &[QVec]) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m).len()
}

/// Affine dimension of a point set (-1 is reported as 0 for the empty set).
pub fn affine_rank(points: &[QVec]) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let diffs: Vec<QVec> = points[1..].iter().map(|p| sub(p, &points[0])).collect();
    rank(&diffs)
}

/// Basis of the right null space of `rows` (each row has `cols` entries).
pub fn nullspace(rows: &[QVec], cols: usize) -> Vec<QVec> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); cols];
            v[f] = Rational::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[r][f].clone();
            }
            v
        })
        .collect()
}

pub fn det(m: &[QVec]) -> Rational {
    let n = m.len();
    let mut a = m.to_vec();
    let mut d = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return Rational::zero();
        };
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= &a[c][c];
        for i in c + 1..n {
            if !a[i][c].is_zero() {
                let f = &a[i][c] / &a[c][c];
                for j in c..n {
                    let s = &f * &a[c][j];
                    a[i][j] -= s;
                }
            }
        }
    }
    d
}

/// Solves `a x = b` for square nonsingular `a`.
pub fn solve(a: &[QVec], b: &[Rational]) -> Option<QVec> {
    let n = a.len();
    let mut aug: Vec<QVec> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.len() < n || pivots.iter().enumerate().any(|(i, &p)| p != i) {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n].clone()).collect())
}

pub fn inverse(a: &[QVec]) -> Option<Vec<QVec>> {
    let n = a.len();
    let mut aug: Vec<QVec> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Smallest nonnegative integer `r` with `r^2 >= x` (for `x >= 0`).
pub fn ceil_sqrt(x: &Rational) -> i64 {
    if !x.is_positive() {
        return 0;
    }
    let approx = to_f64(x).sqrt().ceil() as i64;
    let mut r = approx.max(0);
    while r > 0 && q(r - 1) * q(r - 1) >= *x {
        r -= 1;
    }
    while q(r) * q(r) < *x {
        r += 1;
    }
    r
}

pub fn factorial(n: usize) -> BigInt {
    (1..=n as u64).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `"p/q"` in lowest terms, including `"3/1"` for integers.
pub fn format_rational(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `"p"` or `"p/q"`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, d)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Rational::new(p, d))
            }
        }
        None => s.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}
