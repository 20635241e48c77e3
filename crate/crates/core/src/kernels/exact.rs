//! Exact projection polynomials over `[1, 2]`.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn pow2(e: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(1u8) << e)
}

/// `int_1^2 x^e dx`.
fn monomial_integral(e: usize) -> BigRational {
    (pow2(e + 1) - BigRational::one()) / BigRational::from_integer(BigInt::from(e + 1))
}

/// Projection `h` of `x^(lo + count)` onto the orthogonal complement of
/// `span{x^lo, .., x^(lo + count - 1)}` in `L^2([1, 2])`.
///
/// Returns the coefficients of `h` in the centered variable `y = 2x - 3`
/// (ascending), and `||h||^2 = int_1^2 h(x) x^(lo+count) dx`.
pub fn complement_polynomial(lo: usize, count: usize) -> (Vec<f64>, f64) {
    let p = lo + count;
    // Normal equations G c = b with G_jk = <x^(lo+j), x^(lo+k)>.
    let mut g: Vec<Vec<BigRational>> =
        (0..count).map(|j| (0..count).map(|k| monomial_integral(2 * lo + j + k)).collect()).collect();
    let mut b: Vec<BigRational> = (0..count).map(|j| monomial_integral(lo + j + p)).collect();
    // Gaussian elimination; G is a Hilbert-like positive definite matrix so
    // no pivoting is needed in exact arithmetic.
    for col in 0..count {
        let piv = g[col][col].clone();
        for row in (col + 1)..count {
            let f = &g[row][col] / &piv;
            for k in col..count {
                let t = &f * &g[col][k];
                g[row][k] -= t;
            }
            let t = &f * &b[col];
            b[row] -= t;
        }
    }
    let mut c = vec![BigRational::zero(); count];
    for row in (0..count).rev() {
        let mut s = b[row].clone();
        for k in (row + 1)..count {
            s -= &g[row][k] * &c[k];
        }
        c[row] = s / &g[row][row];
    }
    // h(x) in monomials of x
    let mut hx = vec![BigRational::zero(); p + 1];
    hx[p] = BigRational::one();
    for (j, cj) in c.iter().enumerate() {
        hx[lo + j] -= cj;
    }
    let mut norm2 = monomial_integral(2 * p);
    for (j, cj) in c.iter().enumerate() {
        norm2 -= cj * monomial_integral(lo + j + p);
    }
    // substitute x = (y + 3) / 2 by Horner in y
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let three_halves = BigRational::new(BigInt::from(3), BigInt::from(2));
    let mut hy = vec![BigRational::zero(); p + 1];
    for coef in hx.iter().rev() {
        // hy <- hy * (y/2 + 3/2) + coef
        let mut next = vec![BigRational::zero(); p + 1];
        for k in 0..=p {
            if hy[k].is_zero() {
                continue;
            }
            next[k] += &hy[k] * &three_halves;
            if k < p {
                next[k + 1] += &hy[k] * &half;
            }
        }
        next[0] += coef;
        hy = next;
    }
    let out: Vec<f64> = hy.iter().map(|q| q.to_f64().unwrap_or(0.0)).collect();
    (out, norm2.to_f64().unwrap_or(0.0))
}

/// Evaluates an ascending polynomial by Horner's rule.
pub fn horner(c: &[f64], y: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * y + k)
}
