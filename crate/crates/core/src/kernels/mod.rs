//! Compactly supported radial kernels with vanishing moments and bounded
//! negative mass.
//!
//! A kernel on `R^d` is `K(|v|)` for an even profile `K` supported in
//! `[-1, 1]`. With the radial weight `|r|^(d-1)` the profile satisfies
//!
//! - mass: `int K(r) |r|^(d-1) dr = 2 / |S^(d-1)|`, i.e. `int_{R^d} K = 1`;
//! - moments: `int K(r) |r|^(d-1) r^i dr = 0` for `i = 1..=m`;
//! - negative mass: `int_{R^d} K_- = |S^(d-1)| / 2 int K_-(r) |r|^(d-1) dr <= beta`.
//!
//! Odd moments vanish by evenness. Each even moment is removed in turn by
//! adding a smoothed polynomial correction supported away from the current
//! kernel, then shrinking the support back to `[-1, 1]`.

mod bump;
mod cheb;
mod exact;
mod mollifier;

pub use bump::{bump, BUMP_INTEGRAL};
pub use cheb::ChebTable;
pub use exact::complement_polynomial;
pub use mollifier::{build_mollifier, Mollifier, MOLLIFIER_TOL};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::quadrature::integrate_breaks;

/// Moment tolerance certified for every kernel.
pub const MOMENT_TOL: f64 = 1e-8;
/// Tolerance on the unit mass.
pub const MASS_TOL: f64 = 1e-8;
/// Smallest correction radius; keeps corrections clear of `[-1, 1]`.
pub const R0_START: f64 = 1.25;
const R0_GROWTH: f64 = 1.25;
/// From this radius on the mollifier support is `r0 / 2`.
const SELF_SIMILAR_FROM: f64 = 2.5;
const R0_MAX_STEPS: usize = 200;
/// Fast-table agreement with the exact profile, relative to its maximum.
pub const TABLE_TOL: f64 = 1e-12;
/// Allowed drift between a stored certificate and its recomputation.
pub const RECORD_TOL: f64 = 1e-9;

/// One term of the profile, evaluated at `r >= 0` (the profile is even).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "piece"))]
pub enum Piece {
    /// `coef * bump(r / radius)`.
    Bump { coef: f64, radius: f64 },
    /// `coef * int_{L}^{2L} h(2u/L - 3) rho(r - u) du`: a polynomial on the
    /// interval `[L, 2L]` smoothed by a mollifier.
    Smoothed { coef: f64, scale: f64, poly: Vec<f64>, mollifier: Mollifier },
}

impl Piece {
    /// Outer end of the support.
    pub fn reach(&self) -> f64 {
        match self {
            Piece::Bump { radius, .. } => *radius,
            Piece::Smoothed { scale, mollifier, .. } => 2.0 * scale + mollifier.support,
        }
    }

    /// Support interval on the half-line.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Piece::Bump { radius, .. } => (0.0, *radius),
            Piece::Smoothed { scale, mollifier, .. } => (scale - mollifier.support, 2.0 * scale + mollifier.support),
        }
    }

    /// `R^d * piece(R r)`.
    pub fn rescaled(&self, factor: f64, d: usize) -> Piece {
        let rd = fmath::powi(factor, d as i32);
        match self {
            Piece::Bump { coef, radius } => Piece::Bump { coef: coef * rd, radius: radius / factor },
            Piece::Smoothed { coef, scale, poly, mollifier } => Piece::Smoothed {
                coef: coef * rd,
                scale: scale / factor,
                poly: poly.clone(),
                mollifier: mollifier.scaled(1.0 / factor),
            },
        }
    }

    /// Exact value at `r` (by adaptive quadrature for smoothed pieces).
    pub fn eval(&self, r: f64) -> Result<f64> {
        let r = r.abs();
        match self {
            Piece::Bump { coef, radius } => Ok(coef * bump(r / radius)),
            Piece::Smoothed { coef, scale, poly, mollifier } => {
                let s = mollifier.support;
                let lo = scale.max(r - s);
                let hi = (2.0 * scale).min(r + s);
                if !(hi > lo) {
                    return Ok(0.0);
                }
                let hmax: f64 = poly.iter().map(|c| c.abs()).sum();
                let mag = hmax * mollifier.abs_mass * (3.0 / s).max(1.0);
                let v = integrate_breaks(
                    |u| exact::horner(poly, 2.0 * u / scale - 3.0) * mollifier.eval(r - u),
                    &[lo, 0.5 * (lo + hi), hi],
                    1e-17 * mag,
                    1e-14,
                    4000,
                )?
                .value;
                Ok(coef * v)
            }
        }
    }
}

/// Quadrature certificate, recomputed from the fast evaluator.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelCertificate {
    /// `int_{R^d} K`.
    pub mass: f64,
    /// `int K(r) |r|^(d-1) r^i dr` for `i = 1..=m`.
    pub moments: Vec<f64>,
    /// `int_{R^d} K_-`.
    pub negative_mass: f64,
    /// Largest deviation of the fast table from the exact profile.
    pub table_error: f64,
    /// Correction radii chosen at each step.
    pub radii: Vec<f64>,
}

/// Serializable description of a kernel.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelRecord {
    pub d: usize,
    pub m: usize,
    pub beta: f64,
    pub pieces: Vec<Piece>,
    pub certificate: KernelCertificate,
}

#[derive(Clone, Debug)]
pub struct RadialKernel {
    d: usize,
    m: usize,
    beta: f64,
    pieces: Vec<Piece>,
    certificate: KernelCertificate,
    table: ChebTable,
}

/// Mollifier support for a correction at `r0`: `r0 / 2` from 2.5 on, and
/// below that shrunk linearly so that `r0 - support > 1`.
fn mollifier_support(r0: f64) -> f64 {
    if r0 >= SELF_SIMILAR_FROM {
        0.5 * r0
    } else {
        (r0 - 1.0) * (0.5 * SELF_SIMILAR_FROM / (SELF_SIMILAR_FROM - 1.0))
    }
}

/// `2 / |S^(d-1)|`: target of `int K |r|^(d-1) dr`.
pub fn radial_normalization(d: usize) -> f64 {
    2.0 / fmath::unit_sphere_area(d)
}

fn exact_profile(pieces: &[Piece], r: f64) -> Result<f64> {
    let r = r.abs();
    let mut acc = 0.0;
    for p in pieces {
        let (a, b) = p.support();
        if r < b && (r > a || a <= 0.0) {
            acc += p.eval(r)?;
        }
    }
    Ok(acc)
}

fn breakpoints(pieces: &[Piece], hi: f64) -> Vec<f64> {
    let mut b = vec![0.0, hi];
    for p in pieces {
        let (s0, s1) = p.support();
        for v in [s0, s1] {
            if v > 0.0 && v < hi {
                b.push(v);
            }
        }
        if let Piece::Smoothed { scale, .. } = p {
            for v in [*scale, 2.0 * scale] {
                if v > 0.0 && v < hi {
                    b.push(v);
                }
            }
        }
    }
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// `int_0^hi g(r) dr` of the exact profile-based integrand.
fn half_line_integral<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64) -> Result<f64> {
    Ok(integrate_breaks(f, breaks, abs_tol, 1e-13, 20_000)?.value)
}

/// Builds the kernel by the moment-correction recursion and certifies it.
pub fn build_kernel(d: usize, m: usize, beta: f64) -> Result<RadialKernel> {
    if d == 0 {
        return Err(Error::invalid("d", "must be positive"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid("beta", "must be positive"));
    }
    let kappa = radial_normalization(d);
    // int_R bump(r) |r|^(d-1) dr
    let base = 2.0
        * half_line_integral(|r| bump(r) * fmath::powi(r, d as i32 - 1), &[0.0, 0.5, 1.0], 1e-17)?;
    let mut pieces = vec![Piece::Bump { coef: kappa / base, radius: 1.0 }];
    let mut radii = Vec::new();
    let mut step = 0usize;
    for i in (2..=m).step_by(2) {
        step += 1;
        // current moment int K |r|^(d-1) r^i
        let br = breakpoints(&pieces, 1.0);
        let mi = 2.0
            * half_line_integral(
                |r| exact_profile(&pieces, r).unwrap_or(f64::NAN) * fmath::powi(r, (d - 1 + i) as i32),
                &br,
                1e-17,
            )?;
        if !mi.is_finite() {
            return Err(Error::Certification { what: format!("moment {i} before correction"), value: mi, tol: 0.0 });
        }
        let (poly, norm2) = complement_polynomial(d - 1, i);
        let moll = build_mollifier(m, d, 1.0)?;
        // correction at radius r0: coef * h(x) on u = r0 x, x in [1, 2],
        // with int_0 corr u^(d-1+i) du = -mi / 2
        let make = |r0: f64| {
            let coef = -mi / (2.0 * fmath::powi(r0, (d + i) as i32) * norm2);
            Piece::Smoothed { coef, scale: r0, poly: poly.clone(), mollifier: moll.scaled(mollifier_support(r0)) }
        };
        // absolute mass of the piece over R^d
        let abs_mass = |p: &Piece| -> Result<f64> {
            let (s0, s1) = p.support();
            let pb = breakpoints(core::slice::from_ref(p), s1 + 1.0);
            Ok(2.0 / kappa
                * half_line_integral(
                    |r| {
                        if r <= s0 || r >= s1 {
                            0.0
                        } else {
                            p.eval(r).unwrap_or(f64::NAN).abs() * fmath::powi(r, d as i32 - 1)
                        }
                    },
                    &pb,
                    1e-18,
                )?)
        };
        let budget = beta / fmath::powi(2.0, step as i32);
        // below SELF_SIMILAR_FROM each candidate is integrated; beyond it the
        // piece is self-similar and the absolute mass scales as r0^(-i)
        let mut r0 = R0_START;
        let mut k = 0;
        let mut anchor: Option<(f64, f64)> = None;
        loop {
            let mass = match anchor {
                Some((ra, ma)) => ma * fmath::powi(ra / r0, i as i32),
                None => {
                    let ma = abs_mass(&make(r0))?;
                    if r0 >= SELF_SIMILAR_FROM {
                        anchor = Some((r0, ma));
                    }
                    ma
                }
            };
            if !mass.is_finite() {
                return Err(Error::RadiusSearchExhausted { step, r0 });
            }
            if mass <= budget {
                break;
            }
            k += 1;
            if k > R0_MAX_STEPS {
                return Err(Error::RadiusSearchExhausted { step, r0 });
            }
            r0 *= R0_GROWTH;
        }
        radii.push(r0);
        pieces.push(make(r0));
        let factor = pieces.iter().map(Piece::reach).fold(0.0, f64::max);
        pieces = pieces.iter().map(|p| p.rescaled(factor, d)).collect();
    }
    finish(d, m, beta, pieces, radii)
}

fn finish(d: usize, m: usize, beta: f64, pieces: Vec<Piece>, radii: Vec<f64>) -> Result<RadialKernel> {
    let br = breakpoints(&pieces, 1.0);
    let fail = core::cell::RefCell::new(None);
    let peak = exact_profile(&pieces, 0.0)?.abs();
    let table = ChebTable::build(
        |r| match exact_profile(&pieces, r) {
            Ok(v) => v,
            Err(e) => {
                fail.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        &br,
        TABLE_TOL * peak,
    );
    if let Some(e) = fail.into_inner() {
        return Err(e);
    }
    let mut k = RadialKernel {
        d,
        m,
        beta,
        pieces,
        certificate: KernelCertificate {
            mass: 0.0,
            moments: Vec::new(),
            negative_mass: 0.0,
            table_error: table.max_error,
            radii,
        },
        table,
    };
    let (mass, moments, negative_mass) = k.certify_values()?;
    k.certificate.mass = mass;
    k.certificate.moments = moments;
    k.certificate.negative_mass = negative_mass;
    k.check()?;
    Ok(k)
}

impl RadialKernel {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn certificate(&self) -> &KernelCertificate {
        &self.certificate
    }

    /// Profile `K(r)` from the fast table; zero for `|r| >= 1`.
    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= 1.0 {
            0.0
        } else {
            self.table.eval(r, 0)
        }
    }

    /// `K'(r)` or `K''(r)` for `r >= 0` from the fast table.
    pub fn profile_derivative(&self, r: f64, order: usize) -> f64 {
        assert!(order == 1 || order == 2);
        if r.abs() >= 1.0 {
            0.0
        } else {
            self.table.eval(r.abs(), order)
        }
    }

    /// Exact profile by quadrature of every piece.
    pub fn profile_exact(&self, r: f64) -> Result<f64> {
        if r.abs() >= 1.0 {
            return Ok(0.0);
        }
        exact_profile(&self.pieces, r)
    }

    /// `h^(-d) K(|x| / h)`.
    #[inline]
    pub fn eval_scaled(&self, h: f64, x: &[f64]) -> f64 {
        self.eval_scaled_norm(h, fmath::norm(x))
    }

    #[inline]
    pub fn eval_scaled_norm(&self, h: f64, norm: f64) -> f64 {
        if norm >= h {
            return 0.0;
        }
        self.profile(norm / h) / fmath::powi(h, self.d as i32)
    }

    /// Breakpoints of the piece structure on `[0, 1]`.
    pub fn breakpoints(&self) -> Vec<f64> {
        breakpoints(&self.pieces, 1.0)
    }

    /// Recomputes mass, moments and negative mass of the fast profile by
    /// adaptive quadrature over `[-1, 1]`.
    pub fn certify_values(&self) -> Result<(f64, Vec<f64>, f64)> {
        let half = self.breakpoints();
        let mut br: Vec<f64> = half.iter().rev().map(|b| -b).collect();
        br.pop();
        br.extend_from_slice(&half);
        let d = self.d as i32;
        let w = |r: f64| fmath::powi(r.abs(), d - 1);
        let mass_r = integrate_breaks(|r| self.profile(r) * w(r), &br, 1e-16, 1e-13, 20_000)?.value;
        let mass = mass_r / radial_normalization(self.d);
        let mut moments = Vec::with_capacity(self.m);
        for i in 1..=self.m {
            let v = integrate_breaks(|r| self.profile(r) * w(r) * fmath::powi(r, i as i32), &br, 1e-15, 1e-13, 20_000)?
                .value;
            moments.push(v);
        }
        let neg_r = integrate_breaks(|r| (-self.profile(r)).max(0.0) * w(r), &br, 1e-14, 1e-12, 20_000)?.value;
        Ok((mass, moments, neg_r / radial_normalization(self.d)))
    }

    fn check(&self) -> Result<()> {
        let c = &self.certificate;
        let tol_table = 1e-10 * self.profile(0.0).abs().max(1.0);
        if !(c.table_error <= tol_table) {
            return Err(Error::Certification { what: "fast profile table".into(), value: c.table_error, tol: tol_table });
        }
        if !((c.mass - 1.0).abs() <= MASS_TOL) {
            return Err(Error::Certification { what: "kernel mass".into(), value: (c.mass - 1.0).abs(), tol: MASS_TOL });
        }
        for (i, v) in c.moments.iter().enumerate() {
            if !(v.abs() <= MOMENT_TOL) {
                return Err(Error::Certification { what: format!("kernel moment {}", i + 1), value: v.abs(), tol: MOMENT_TOL });
            }
        }
        if !(c.negative_mass <= self.beta) {
            return Err(Error::Certification { what: "negative mass".into(), value: c.negative_mass, tol: self.beta });
        }
        Ok(())
    }

    pub fn to_record(&self) -> KernelRecord {
        KernelRecord {
            d: self.d,
            m: self.m,
            beta: self.beta,
            pieces: self.pieces.clone(),
            certificate: self.certificate.clone(),
        }
    }

    /// Rebuilds the fast table from the pieces and recertifies.
    pub fn from_record(rec: &KernelRecord) -> Result<Self> {
        if rec.d == 0 || !(rec.beta > 0.0) {
            return Err(Error::invalid("kernel", "invalid dimension or beta"));
        }
        if rec.pieces.iter().any(|p| p.reach() > 1.0 + 1e-12) {
            return Err(Error::invalid("kernel", "piece support exceeds [-1, 1]"));
        }
        let k = finish(rec.d, rec.m, rec.beta, rec.pieces.clone(), rec.certificate.radii.clone())?;
        let (a, b) = (&rec.certificate, &k.certificate);
        let mut worst = (a.mass - b.mass).abs().max((a.negative_mass - b.negative_mass).abs());
        if a.moments.len() != b.moments.len() {
            worst = f64::INFINITY;
        } else {
            for (x, y) in a.moments.iter().zip(&b.moments) {
                worst = worst.max((x - y).abs());
            }
        }
        // stored values must agree with the recomputation
        if !(worst <= RECORD_TOL) {
            return Err(Error::Certification { what: "stored kernel certificate".into(), value: worst, tol: RECORD_TOL });
        }
        Ok(k)
    }

    /// Support radius in profile units.
    pub fn support_radius(&self) -> f64 {
        1.0
    }

    /// Radius of the central (bump) piece.
    pub fn core_radius(&self) -> f64 {
        self.pieces
            .iter()
            .find_map(|p| match p {
                Piece::Bump { radius, .. } => Some(*radius),
                _ => None,
            })
            .unwrap_or(1.0)
    }
}

/// Negative-mass budget keeping the smoothed density bounded below:
/// `f_min / (8 (f_max - f_min))`, or `fallback` for a constant density.
pub fn default_beta(f_min: f64, f_max: f64, fallback: f64) -> f64 {
    if f_max > f_min {
        f_min / (8.0 * (f_max - f_min))
    } else {
        fallback
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_zero_is_bump() {
        let k = build_kernel(1, 0, 0.1).unwrap();
        assert_eq!(k.pieces().len(), 1);
        assert!(k.certificate().negative_mass == 0.0);
        assert!((k.certificate().mass - 1.0).abs() < 1e-12);
        assert!((k.profile(0.0) - fmath::exp(-1.0) / BUMP_INTEGRAL).abs() < 1e-12);
    }

    #[test]
    fn second_order_one_dimension() {
        let k = build_kernel(1, 2, 0.1).unwrap();
        let c = k.certificate();
        assert!(c.moments.iter().all(|v| v.abs() < 1e-8), "{:?}", c.moments);
        assert!(c.negative_mass > 0.0 && c.negative_mass <= 0.05 + 1e-9);
        assert_eq!(c.radii.len(), 1);
        // exact and fast agree
        for j in 0..50 {
            let r = j as f64 / 50.0;
            assert!((k.profile(r) - k.profile_exact(r).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn eval_scaled_support() {
        let k = build_kernel(2, 2, 0.1).unwrap();
        assert_eq!(k.eval_scaled(0.5, &[1.0, 0.0]), 0.0);
        assert_eq!(k.eval_scaled(1.0, &[0.3, 0.4]), k.profile(0.5));
    }
}
