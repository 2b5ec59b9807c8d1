//! Scalar abstraction and shared numerical routines: standard normal
//! CDF/quantile, bracketing root finder, and adaptive Simpson quadrature.

use num_traits::{Float, FromPrimitive};
use thiserror::Error;

/// Floating scalar the analytic core is generic over (`f32` or `f64`).
pub trait Real: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {}
impl<T: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static> Real for T {}

/// Shorthand for lifting an `f64` constant into the generic scalar.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("f64 constant representable in scalar type")
}

#[derive(Debug, Error, PartialEq)]
pub enum NumError {
    #[error("root is not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("root finder failed to converge within {max_iter} iterations")]
    NoConvergence { max_iter: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Standard normal CDF, accurate to better than 1e-14 via `erfc`.
pub fn normal_cdf<F: Real>(x: F) -> F {
    let x = x.to_f64().unwrap();
    real(0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2))
}

/// Standard normal quantile. `p` must lie strictly in (0, 1).
pub fn normal_quantile<F: Real>(p: F) -> Result<F, NumError> {
    let p = p.to_f64().unwrap();
    if !(0.0..=1.0).contains(&p) || p == 0.0 || p == 1.0 {
        return Err(NumError::InvalidArgument(format!(
            "quantile requires p in (0, 1), got {p}"
        )));
    }
    // Halley refinement of an erfc-inverse seed; converges to full precision
    // in a couple of steps for any p away from the extreme denormal range.
    let mut x = inverse_cdf_seed(p);
    for _ in 0..3 {
        let e = 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2) - p;
        let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
        x -= u / (1.0 + x * u / 2.0);
    }
    Ok(real(x))
}

/// Acklam-style rational seed for the normal quantile (~1e-9 on its own).
fn inverse_cdf_seed(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_cdf_seed(1.0 - p)
    }
}

/// Find the root of a continuous function on `[lo, hi]` by a
/// bisection/regula-falsi hybrid. The bracket must straddle the root.
pub fn find_root<F: Real>(
    f: impl Fn(F) -> F,
    lo: F,
    hi: F,
    tol_x: F,
    tol_f: F,
) -> Result<F, NumError> {
    let max_iter = 200;
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let zero = F::zero();
    if f_lo == zero {
        return Ok(lo);
    }
    if f_hi == zero {
        return Ok(hi);
    }
    if (f_lo > zero) == (f_hi > zero) {
        return Err(NumError::NotBracketed {
            lo: lo.to_f64().unwrap(),
            hi: hi.to_f64().unwrap(),
            f_lo: f_lo.to_f64().unwrap(),
            f_hi: f_hi.to_f64().unwrap(),
        });
    }
    let half = real::<F>(0.5);
    for iter in 0..max_iter {
        // Alternate regula falsi with plain bisection so a flat flank
        // cannot stall progress.
        let mid = if iter % 2 == 0 && f_hi != f_lo {
            let m = lo - f_lo * (hi - lo) / (f_hi - f_lo);
            if m > lo && m < hi {
                m
            } else {
                (lo + hi) * half
            }
        } else {
            (lo + hi) * half
        };
        let f_mid = f(mid);
        if f_mid.abs() <= tol_f || (hi - lo) <= tol_x {
            return Ok(mid);
        }
        if (f_mid > zero) == (f_lo > zero) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Err(NumError::NoConvergence { max_iter })
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Real>(f: impl Fn(F) -> F, a: F, b: F, tol: F) -> F {
    if a == b {
        return F::zero();
    }
    let half = real::<F>(0.5);
    let m = (a + b) * half;
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, tol, 50)
}

fn simpson<F: Real>(a: F, b: F, fa: F, fm: F, fb: F) -> F {
    (b - a) / real::<F>(6.0) * (fa + real::<F>(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Real>(
    f: &impl Fn(F) -> F,
    a: F,
    b: F,
    fa: F,
    fm: F,
    fb: F,
    whole: F,
    tol: F,
    depth: u32,
) -> F {
    let half = real::<F>(0.5);
    let m = (a + b) * half;
    let lm = (a + m) * half;
    let rm = (m + b) * half;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= real::<F>(15.0) * tol {
        left + right + delta / real::<F>(15.0)
    } else {
        let half_tol = tol * half;
        adaptive(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
    }
}
