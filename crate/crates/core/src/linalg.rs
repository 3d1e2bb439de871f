//! Small dense linear algebra: exact elimination over rationals, float
//! row reduction, and best rational approximation.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::ast::Rational;

/// Reduced row echelon form over the rationals. Returns the reduced rows
/// (zero rows removed) and the pivot column of each.
pub fn rref_exact(rows: &[Vec<Rational>]) -> (Vec<Vec<Rational>>, Vec<usize>) {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == m.len() {
            break;
        }
        let Some(piv) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, piv);
        let inv = Rational::one() / m[r][c].clone();
        for k in c..cols {
            m[r][k] = m[r][k].clone() * inv.clone();
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for k in c..cols {
                    let d = f.clone() * m[r][k].clone();
                    m[i][k] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(rows: &[Vec<Rational>]) -> usize {
    rref_exact(rows).1.len()
}

/// Basis of `{v : row . v = 0 for every row}` with `cols` columns.
pub fn null_space(rows: &[Vec<Rational>], cols: usize) -> Vec<Vec<Rational>> {
    let (red, pivots) = rref_exact(rows);
    let mut out = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![Rational::zero(); cols];
        v[free] = Rational::one();
        for (row, &p) in red.iter().zip(&pivots) {
            v[p] = -row[free].clone();
        }
        out.push(v);
    }
    out
}

/// Scales a rational vector to coprime integers with a positive first
/// nonzero entry.
pub fn integer_vector(v: &[Rational]) -> Vec<BigInt> {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let mut ints: Vec<BigInt> = v.iter().map(|x| (x * Rational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if !g.is_zero() && !g.is_one() {
        ints.iter_mut().for_each(|x| *x = &*x / &g);
    }
    if ints.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
        ints.iter_mut().for_each(|x| *x = -&*x);
    }
    ints
}

/// Reduced row echelon form in floating point with partial pivoting. Rows
/// whose remaining mass falls below `tol` (relative to the input row norms)
/// are dropped.
pub fn rref_f64(rows: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                r.iter().map(|x| x / n).collect()
            } else {
                r.clone()
            }
        })
        .collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        if r == m.len() {
            break;
        }
        let (piv, mag) = (r..m.len()).map(|i| (i, m[i][c].abs())).fold((r, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        if mag <= tol {
            continue;
        }
        m.swap(r, piv);
        let p = m[r][c];
        m[r].iter_mut().for_each(|x| *x /= p);
        for i in 0..m.len() {
            if i != r {
                let f = m[i][c];
                if f != 0.0 {
                    let pivot_row = m[r].clone();
                    for (x, y) in m[i].iter_mut().zip(pivot_row) {
                        *x -= f * y;
                    }
                }
            }
        }
        r += 1;
    }
    m.truncate(r);
    m
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// by continued fractions. `None` for non-finite input.
pub fn best_rational(x: f64, max_den: u64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let max_den = max_den.max(1);
    let exact = Rational::from_float(x)?;
    if exact.denom() <= &BigInt::from(max_den) {
        return Some(exact);
    }
    // Convergents p/q with the semiconvergent check, as in the standard
    // limit-denominator algorithm.
    let (mut p0, mut q0, mut p1, mut q1) = (BigInt::zero(), BigInt::one(), BigInt::one(), BigInt::zero());
    let (mut n, mut d) = (exact.numer().clone(), exact.denom().clone());
    let bound = BigInt::from(max_den);
    loop {
        let a = n.div_floor(&d);
        let q2 = &q0 + &a * &q1;
        if q2 > bound {
            break;
        }
        let p2 = &p0 + &a * &p1;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        let r = &n - &a * &d;
        n = std::mem::replace(&mut d, r);
        if d.is_zero() {
            break;
        }
    }
    let k = (&bound - &q0).div_floor(&q1);
    let b1 = Rational::new(&p0 + &k * &p1, &q0 + &k * &q1);
    let b2 = Rational::new(p1, q1);
    let e1 = (&b1 - &exact).abs();
    let e2 = (&b2 - &exact).abs();
    Some(if e2 <= e1 { b2 } else { b1 })
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
