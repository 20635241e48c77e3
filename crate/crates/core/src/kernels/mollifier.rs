use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::bump::{bump, legendre_series, legendre_values};
use crate::error::{Error, Result};
use crate::fmath;
use crate::quadrature::integrate_breaks;

/// Tolerance certified for the mollifier moments.
pub const MOLLIFIER_TOL: f64 = 1e-10;

/// `rho(t) = bump(t/s) P(t/s) / s` on `[-s, s]` with `deg P = m + d - 1`,
/// `int rho = 1` and `int rho(t) t^i dt = 0` for `i = 1..=m+d-1`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mollifier {
    pub support: f64,
    /// Coefficients of `P` in the Legendre basis of the scaled variable.
    pub legendre: Vec<f64>,
    /// Quadrature values of `int rho(t) t^i dt`, `i = 0..=m+d-1`.
    pub moments: Vec<f64>,
    /// `int |rho|`.
    pub abs_mass: f64,
}

impl Mollifier {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let s = t / self.support;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        bump(s) * legendre_series(&self.legendre, s) / self.support
    }

    /// Same polynomial, support scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let moments = self
            .moments
            .iter()
            .enumerate()
            .map(|(i, m)| m * fmath::powi(factor, i as i32))
            .collect();
        Mollifier { support: self.support * factor, legendre: self.legendre.clone(), moments, abs_mass: self.abs_mass }
    }

    pub fn degree(&self) -> usize {
        self.legendre.len() - 1
    }
}

/// Solves the moment system in the Legendre basis and certifies the moments
/// by adaptive quadrature.
pub fn build_mollifier(m: usize, d: usize, support: f64) -> Result<Mollifier> {
    if !(support > 0.0) || !support.is_finite() {
        return Err(Error::invalid("support", "must be positive and finite"));
    }
    let n = m + d;
    // Gram matrix G_jk = int bump L_j L_k; the conditions int bump P s^j =
    // delta_j0 are equivalent to int bump P L_j = L_j(0).
    let mut g = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            if (j + k) % 2 == 1 {
                continue;
            }
            let v = integrate_breaks(
                |s| {
                    let mut l = vec![0.0; n];
                    legendre_values(s, &mut l);
                    bump(s) * l[j] * l[k]
                },
                &[-1.0, 0.0, 1.0],
                1e-17,
                1e-15,
                4000,
            )?
            .value;
            g[(j, k)] = v;
            g[(k, j)] = v;
        }
    }
    let mut rhs = vec![0.0; n];
    legendre_values(0.0, &mut rhs);
    let chol = g.cholesky().ok_or(Error::SingularMomentSystem { size: n })?;
    let c = chol.solve(&DVector::from_vec(rhs));
    let legendre: Vec<f64> = c.iter().copied().collect();
    let unit = Mollifier { support: 1.0, legendre, moments: Vec::new(), abs_mass: 0.0 };
    let (moments, abs_mass) = certify(&unit, n)?;
    let unit = Mollifier { moments, abs_mass, ..unit };
    Ok(unit.scaled(support))
}

fn certify(unit: &Mollifier, n: usize) -> Result<(Vec<f64>, f64)> {
    let mut moments = Vec::with_capacity(n);
    for i in 0..n {
        let v = integrate_breaks(|t| unit.eval(t) * fmath::powi(t, i as i32), &[-1.0, 0.0, 1.0], 1e-16, 1e-14, 4000)?
            .value;
        let target = if i == 0 { 1.0 } else { 0.0 };
        if !((v - target).abs() <= MOLLIFIER_TOL) {
            return Err(Error::Certification {
                what: alloc::format!("mollifier moment {i}"),
                value: (v - target).abs(),
                tol: MOLLIFIER_TOL,
            });
        }
        moments.push(v);
    }
    let abs_mass = integrate_breaks(|t| unit.eval(t).abs(), &[-1.0, 0.0, 1.0], 1e-14, 1e-12, 4000)?.value;
    Ok((moments, abs_mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    #[test]
    fn degree_zero_is_normalized_bump() {
        let r = build_mollifier(0, 1, 0.5).unwrap();
        assert_eq!(r.degree(), 0);
        let mass = integrate(|t| r.eval(t), -0.5, 0.5, 1e-15, 1e-14, 1000).unwrap().value;
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((r.eval(0.0) - fmath::exp(-1.0) / (0.5 * super::super::bump::BUMP_INTEGRAL)).abs() < 1e-12);
    }

    #[test]
    fn moments_vanish_by_independent_quadrature() {
        for (m, d) in [(2usize, 1usize), (3, 2), (4, 3)] {
            for s in [0.3, 1.0, 2.5] {
                let r = build_mollifier(m, d, s).unwrap();
                for i in 0..(m + d) {
                    let v = integrate(|t| r.eval(t) * fmath::powi(t, i as i32), -s, s, 1e-15, 1e-13, 4000).unwrap().value;
                    let target = if i == 0 { 1.0 } else { 0.0 };
                    assert!((v - target).abs() <= 1e-10, "m={m} d={d} s={s} i={i} v={v}");
                }
            }
        }
    }
}
