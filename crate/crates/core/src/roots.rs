//! Scalar root finding and minimization helpers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finds `x` in `[lo, hi]` with `f(x) = 0` given a sign change at the ends.
///
/// Bisection safeguarded secant (Illinois variant): every iterate stays inside
/// the current bracket, and a plain bisection step is forced whenever the
/// bracket fails to halve.
pub(crate) fn bracketed_root<T: Scalar>(
    f: &dyn Fn(T) -> Result<T>,
    mut lo: T,
    mut hi: T,
    abs_tol: T,
) -> Result<T> {
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    if f_lo == T::zero() {
        return Ok(lo);
    }
    if f_hi == T::zero() {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoConvergence(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    let half = T::lit(0.5);
    let mut last_width = hi - lo;
    let mut side = 0i8;
    for _ in 0..400 {
        let width = hi - lo;
        if width <= abs_tol {
            break;
        }
        let secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        let bisect = lo + width * half;
        let use_bisect = !(secant > lo && secant < hi) || width > last_width * half;
        let x = if use_bisect { bisect } else { secant };
        if x <= lo || x >= hi {
            break;
        }
        last_width = width;
        let fx = f(x)?;
        if fx == T::zero() {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi = f_hi * half;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo = f_lo * half;
            }
            side = 1;
        }
    }
    Ok(lo + (hi - lo) * half)
}

/// Solves `f(x) = target` for a strictly increasing `f` on `[0, limit)`,
/// expanding the bracket geometrically from `[0, 1]`.
pub(crate) fn invert_increasing<T: Scalar>(
    f: &dyn Fn(T) -> Result<T>,
    target: T,
    limit: T,
    abs_tol: T,
) -> Result<T> {
    let mut lo = T::zero();
    let mut hi = T::one();
    let two = T::lit(2.0);
    loop {
        if hi >= limit {
            hi = limit;
            if f(hi)? < target {
                return Err(Error::OutOfRange {
                    name: "target",
                    value: target.as_f64(),
                    limit: f(hi)?.as_f64(),
                });
            }
            break;
        }
        if f(hi)? >= target {
            break;
        }
        lo = hi;
        hi = hi * two;
    }
    bracketed_root(&|x| Ok(f(x)? - target), lo, hi, abs_tol)
}

/// Golden-section search for a minimum of `f` on `[a, b]`, stopping once the
/// bracket is narrower than `width`. Returns the final bracket.
pub(crate) fn golden_section<T: Scalar>(
    f: &dyn Fn(T) -> Result<T>,
    mut a: T,
    mut b: T,
    width: T,
) -> Result<(T, T)> {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..200 {
        if b - a <= width {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok((a, b))
}
