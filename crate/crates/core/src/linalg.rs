//! Tridiagonal kernels: periodic (cyclic) solves for the time stepper and
//! Sturm-sequence bisection for the Poincaré eigenproblem.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves a tridiagonal system without pivoting (Thomas algorithm).
///
/// `sub[i]` multiplies `x[i-1]` in row `i` (`sub[0]` unused), `sup[i]`
/// multiplies `x[i+1]` (`sup[n-1]` unused).
fn thomas<T: Scalar>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut x = vec![T::zero(); n];
    let mut pivot = diag[0];
    if pivot == T::zero() {
        return Err(Error::NoConvergence("zero pivot in tridiagonal solve".into()));
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = sup[i - 1] / pivot;
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot == T::zero() {
            return Err(Error::NoConvergence("zero pivot in tridiagonal solve".into()));
        }
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] = x[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Solves a periodic tridiagonal system: row `i` reads
/// `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]` with indices mod n.
///
/// Sherman–Morrison reduction to two ordinary tridiagonal solves; stable for
/// the column diagonally dominant matrices produced by the implicit stepper.
pub(crate) fn solve_cyclic<T: Scalar>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::NoConvergence(
            "cyclic solve needs at least three unknowns".into(),
        ));
    }
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = thomas(sub, &bb, sup, rhs)?;
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(sub, &bb, sup, &u)?;
    let fact = (x[0] + beta * x[n - 1] / gamma) / (T::one() + z[0] + beta * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(&xi, &zi)| xi - fact * zi).collect())
}

/// Symmetric tridiagonal matrix given by its diagonal and off-diagonal.
#[derive(Debug, Clone)]
pub(crate) struct SymTridiagonal<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Scalar> SymTridiagonal<T> {
    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: T) -> usize {
        let tiny = T::min_positive_value().sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < T::zero() {
            count += 1;
        }
        for i in 1..self.diag.len() {
            if q == T::zero() {
                q = tiny;
            }
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            if q < T::zero() {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (T, T) {
        let n = self.diag.len();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..n {
            let mut r = T::zero();
            if i > 0 {
                r = r + self.off[i - 1].abs();
            }
            if i + 1 < n {
                r = r + self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> T {
        let (mut lo, mut hi) = self.gershgorin();
        let half = T::lit(0.5);
        let eps = T::epsilon() * T::lit(2.0);
        for _ in 0..300 {
            let mid = lo + (hi - lo) * half;
            if mid <= lo || mid >= hi || hi - lo <= eps * (lo.abs().max(hi.abs())) {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo + (hi - lo) * half
    }

    /// Eigenvector for a converged eigenvalue, by shifted inverse iteration.
    pub fn eigenvector(&self, lambda: T) -> Vec<T> {
        let n = self.diag.len();
        let scale = self
            .diag
            .iter()
            .fold(T::zero(), |m, d| m.max(d.abs()))
            .max(T::one());
        let shift = lambda + scale * T::epsilon() * T::lit(8.0);
        let mut v = vec![T::one(); n];
        for (i, vi) in v.iter_mut().enumerate() {
            // generic start vector with components along every eigenvector
            *vi = T::one() + T::lit(0.1) * T::from_count(i % 7);
        }
        for _ in 0..4 {
            let d: Vec<T> = self.diag.iter().map(|&d| d - shift).collect();
            v = solve_pivoted(&self.off, &d, &self.off, &v);
            let norm = v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
            if norm == T::zero() || !norm.is_finite() {
                break;
            }
            for x in v.iter_mut() {
                *x = *x / norm;
            }
        }
        v
    }
}

/// Tridiagonal solve with partial pivoting; zero pivots are perturbed, as
/// wanted for inverse iteration on a nearly singular shifted matrix.
fn solve_pivoted<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    let tiny = T::epsilon() * diag.iter().fold(T::zero(), |m, d| m.max(d.abs())).max(T::one());
    let mut d = diag.to_vec();
    let mut dl = lower.to_vec();
    let mut du = upper.to_vec();
    let mut b = rhs.to_vec();
    if n == 1 {
        return vec![b[0] / if d[0] == T::zero() { tiny } else { d[0] }];
    }
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == T::zero() {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            d[i + 1] = d[i + 1] - fact * du[i];
            b[i + 1] = b[i + 1] - fact * b[i];
            dl[i] = T::zero();
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = T::zero();
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    if d[n - 1] == T::zero() {
        d[n - 1] = tiny;
    }
    b[n - 1] = b[n - 1] / d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
    }
    b
}
