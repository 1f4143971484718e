//! Exponential convergence rates towards the two kinds of stable equilibria.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bifurcation::{self, MARGINAL_TOL};
use crate::coefficients::{self, Coefficients};
use crate::error::{domain, Error, Result};
use crate::poincare;
use crate::scalar::Scalar;
use crate::vonmises::{self, Dimension};

/// λ₀ = (n − 1) τ(0) (1 − ρ/ρ_c), the rate towards the uniform state.
pub fn rate_uniform<T, M>(rho: T, model: &M, n: Dimension) -> Result<T>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    if !(rho > T::zero()) {
        return Err(domain("rho", rho.as_f64(), "rho > 0"));
    }
    let rho_c = bifurcation::critical_density_rho_c(model, n)?;
    if rho > rho_c {
        return Err(Error::NotApplicable(format!(
            "rho = {rho} exceeds rho_c = {rho_c}: the uniform state is unstable"
        )));
    }
    let tau0 = model.tau(T::zero())?;
    let dim: T = n.to_scalar();
    Ok((dim - T::one()) * tau0 * (T::one() - rho / rho_c))
}

/// λ_κ = c τ(σ)/σ′ · Λ_κ · (σ/c)′ at a root κ of the compatibility equation.
///
/// `lambda` is the Poincaré constant Λ_κ, passed in so that callers can share
/// one computation between several rate evaluations.
pub fn rate_vonmises<T, M>(rho: T, kappa: T, model: &M, n: Dimension, lambda: T) -> Result<T>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    if !(lambda > T::zero()) {
        return Err(domain("lambda", lambda.as_f64(), "lambda > 0"));
    }
    let residual = bifurcation::compatibility_residual(rho, kappa, model, n)?;
    if residual.abs() > T::tol(1e-7) * (T::one() + kappa) {
        return Err(domain(
            "kappa",
            kappa.as_f64(),
            "a root of the compatibility equation at the given rho",
        ));
    }
    let slope = bifurcation::sigma_over_c_derivative(kappa, model, n)?;
    if slope < -T::lit(MARGINAL_TOL) {
        return Err(Error::NotApplicable(format!(
            "(sigma/c)'({kappa}) = {slope} < 0: the von Mises family is unstable"
        )));
    }
    let c = vonmises::order_parameter_c(kappa, n)?;
    let s = coefficients::sigma(model, kappa)?;
    let sp = coefficients::sigma_prime(model, kappa)?;
    let tau = model.tau(s)?;
    Ok(c * tau / sp * lambda * slope.max(T::zero()))
}

/// Specialized form of λ_κ for ν(j) = j, τ(j) = 1/(1 + j):
/// (1/(1 + σ)) Λ (1 − (1/c − c − (n − 1)/κ) σ(1 + 2σ)).
pub fn rate_vonmises_vicsek_closed_form<T: Scalar>(kappa: T, n: Dimension, lambda: T) -> Result<T> {
    if !(kappa > T::zero()) {
        return Err(domain("kappa", kappa.as_f64(), "kappa > 0"));
    }
    let c = vonmises::order_parameter_c(kappa, n)?;
    let s = coefficients::vicsek_sigma(kappa);
    let dim: T = n.to_scalar();
    let bracket = T::one() / c - c - (dim - T::one()) / kappa;
    let two = T::lit(2.0);
    Ok(lambda / (T::one() + s) * (T::one() - bracket * s * (T::one() + two * s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow<T> {
    pub rho: T,
    pub lambda_uniform: Option<T>,
    pub lambda_vonmises: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateDiagram<T> {
    pub model: String,
    pub n: Dimension,
    pub rows: Vec<RateRow<T>>,
}

/// Both rates over a ρ grid. The von Mises column follows the stable root
/// with the largest κ; Λ_κ is computed to mesh convergence for each row.
pub fn rate_diagram<T, M>(model: &M, n: Dimension, rho_grid: &[T]) -> Result<RateDiagram<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    for (i, &r) in rho_grid.iter().enumerate() {
        if !(r > T::zero()) {
            return Err(domain("rho", r.as_f64(), "rho > 0"));
        }
        if i > 0 && !(r > rho_grid[i - 1]) {
            return Err(domain("rho", r.as_f64(), "rho grid strictly increasing"));
        }
    }
    let rho_c = bifurcation::critical_density_rho_c(model, n)?;
    let kappa_max = T::lit(bifurcation::DEFAULT_KAPPA_SEARCH_MAX);
    let rows = rho_grid
        .par_iter()
        .map(|&rho| {
            let lambda_uniform = if rho <= rho_c {
                Some(rate_uniform(rho, model, n)?)
            } else {
                None
            };
            let branch = bifurcation::solve_branches(rho, model, n, kappa_max)?;
            let lambda_vonmises = match branch.largest_stable() {
                Some(root) => {
                    let lambda = poincare::poincare_constant_converged(root.kappa, n)?;
                    Some(rate_vonmises(rho, root.kappa, model, n, lambda)?)
                }
                None => None,
            };
            Ok(RateRow {
                rho,
                lambda_uniform,
                lambda_vonmises,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateDiagram {
        model: model.label(),
        n,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientModel;

    #[test]
    fn uniform_rate_examples() {
        let v = CoefficientModel::<f64>::vicsek_vectorial();
        assert!((rate_uniform(1.0, &v, Dimension::TWO).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(rate_uniform(2.0, &v, Dimension::TWO).unwrap(), 0.0);
        assert!((rate_uniform(1e-12, &v, Dimension::THREE).unwrap() - 2.0).abs() < 1e-11);
        assert!(matches!(rate_uniform(2.5, &v, Dimension::TWO), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn vonmises_rate_vanishes_at_fold() {
        let v = CoefficientModel::<f64>::vicsek_vectorial();
        let fold = bifurcation::critical_density_rho_star(&v, Dimension::TWO).unwrap();
        let r = rate_vonmises(fold.rho_star, fold.kappa_star, &v, Dimension::TWO, 1.0).unwrap();
        assert!(r.abs() < 1e-7);
    }

    #[test]
    fn dipolar_rate_matches_langevin_oracle() {
        let dip = CoefficientModel::dipolar(1.0f64).unwrap();
        let d = Dimension::THREE;
        let root = bifurcation::solve_branches(4.0, &dip, d, 200.0).unwrap().roots[0];
        let k = root.kappa;
        let c = 1.0 / k.tanh() - 1.0 / k;
        let cp = 1.0 / (k * k) - 1.0 / k.sinh().powi(2);
        let oracle = c * 0.7 * (c - k * cp) / (c * c);
        let r = rate_vonmises(4.0, k, &dip, d, 0.7).unwrap();
        assert!(((r - oracle) / oracle).abs() < 1e-9);
    }

    #[test]
    fn unstable_root_has_no_rate() {
        let v = CoefficientModel::<f64>::vicsek_vectorial();
        let b = bifurcation::solve_branches(1.5, &v, Dimension::TWO, 200.0).unwrap();
        let low = b.roots[0].kappa;
        assert!(matches!(
            rate_vonmises(1.5, low, &v, Dimension::TWO, 1.0),
            Err(Error::NotApplicable(_))
        ));
        assert!(rate_vonmises(1.7, low, &v, Dimension::TWO, 1.0).is_err());
    }
}
