use crate::fmath;

/// `exp(-1/(1-r^2))` on `(-1, 1)`, zero elsewhere.
#[inline]
pub fn bump(r: f64) -> f64 {
    let s = 1.0 - r * r;
    if s <= 0.0 {
        0.0
    } else {
        fmath::exp(-1.0 / s)
    }
}

/// `int_{-1}^{1} bump(r) dr`.
pub const BUMP_INTEGRAL: f64 = 0.443_993_816_168_079_4;

/// Legendre polynomial values `L_0(s) .. L_{n-1}(s)` into `out`.
pub fn legendre_values(s: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = s;
    }
    for k in 2..out.len() {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * s * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

/// `sum_k c_k L_k(s)` by Clenshaw's recurrence.
pub fn legendre_series(c: &[f64], s: f64) -> f64 {
    let n = c.len();
    if n == 0 {
        return 0.0;
    }
    let (mut b1, mut b2) = (0.0, 0.0);
    for k in (0..n).rev() {
        let kf = k as f64;
        // L_{k+1} = a_k(s) L_k - b_{k+1} L_{k-1}
        let alpha = (2.0 * kf + 1.0) / (kf + 1.0) * s;
        let beta = (kf + 1.0) / (kf + 2.0);
        let b0 = c[k] + alpha * b1 - beta * b2;
        b2 = b1;
        b1 = b0;
    }
    b1
}
