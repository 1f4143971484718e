//! Coefficient models: the alignment strength ν(j) and diffusion intensity
//! τ(j) as functions of the first-moment length j = |J_f|, together with the
//! derived quantities h = ν/τ, its inverse σ, and the antiderivative Φ of h.
//!
//! Admissible models have ν(0) = 0, τ > 0, and h strictly increasing, so σ is
//! well defined from [0, κ_max) onto [0, ∞).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::roots::invert_increasing;
use crate::scalar::Scalar;
use crate::vonmises::{self, Dimension};

/// Upper end of the j-range probed when looking for a plateau of h.
const PROBE_J_MAX: f64 = 1e6;

/// Largest j the generic σ inversion will bracket to.
const SIGMA_J_LIMIT: f64 = 1e12;

/// The interface every analysis routine consumes.
///
/// Only `nu` and `tau` are required. The remaining methods have generic
/// implementations (finite differences, bracketed inversion, adaptive
/// quadrature) that built-in models override with closed forms. Arguments
/// are assumed to be in the domain; the free functions of this module check
/// them before dispatching.
pub trait Coefficients<T: Scalar>: Sync {
    fn nu(&self, j: T) -> Result<T>;

    fn tau(&self, j: T) -> Result<T>;

    fn h(&self, j: T) -> Result<T> {
        Ok(self.nu(j)? / self.tau(j)?)
    }

    /// dh/dj, by central differences (forward near the origin).
    fn h_prime(&self, j: T) -> Result<T> {
        let step = T::lit(1e-5) * (T::one() + j);
        if j < step {
            let two = T::lit(2.0);
            let h0 = self.h(j)?;
            let h1 = self.h(j + step)?;
            let h2 = self.h(j + two * step)?;
            Ok((T::lit(-3.0) * h0 + T::lit(4.0) * h1 - h2) / (two * step))
        } else {
            Ok((self.h(j + step)? - self.h(j - step)?) / (T::lit(2.0) * step))
        }
    }

    /// σ = h⁻¹.
    fn sigma(&self, kappa: T) -> Result<T> {
        if kappa == T::zero() {
            return Ok(T::zero());
        }
        invert_increasing(&|j| self.h(j), kappa, T::lit(SIGMA_J_LIMIT), T::tol(1e-12))
    }

    /// dσ/dκ = 1 / h′(σ(κ)).
    fn sigma_prime(&self, kappa: T) -> Result<T> {
        let j = self.sigma(kappa)?;
        let slope = self.h_prime(j)?;
        if !(slope > T::zero()) {
            return Err(Error::ModelInvalid(format!(
                "h'({}) = {} is not positive",
                j, slope
            )));
        }
        Ok(T::one() / slope)
    }

    /// Φ(j) = ∫_0^j h, by adaptive quadrature.
    fn phi(&self, j: T) -> Result<T> {
        adaptive_simpson(&|s| self.h(s), T::zero(), j, T::tol(1e-13))
    }

    /// ν′(0), by a second-order one-sided difference. Its truncation error is
    /// of order 10⁻¹² ν‴, so magnitudes below 10⁻⁹ are reported as exactly 0.
    fn nu_prime_zero(&self) -> Result<T> {
        let step = T::lit(1e-6);
        let two = T::lit(2.0);
        let n0 = self.nu(T::zero())?;
        let n1 = self.nu(step)?;
        let n2 = self.nu(two * step)?;
        let slope = (T::lit(-3.0) * n0 + T::lit(4.0) * n1 - n2) / (two * step);
        Ok(if slope.abs() <= T::tol(1e-9) { T::zero() } else { slope })
    }

    /// Supremum of the range of h (possibly +∞).
    fn kappa_max(&self) -> T {
        T::infinity()
    }

    fn label(&self) -> String {
        "custom".to_string()
    }
}

impl<T: Scalar, M: Coefficients<T> + ?Sized> Coefficients<T> for &M {
    fn nu(&self, j: T) -> Result<T> {
        (**self).nu(j)
    }
    fn tau(&self, j: T) -> Result<T> {
        (**self).tau(j)
    }
    fn h(&self, j: T) -> Result<T> {
        (**self).h(j)
    }
    fn h_prime(&self, j: T) -> Result<T> {
        (**self).h_prime(j)
    }
    fn sigma(&self, kappa: T) -> Result<T> {
        (**self).sigma(kappa)
    }
    fn sigma_prime(&self, kappa: T) -> Result<T> {
        (**self).sigma_prime(kappa)
    }
    fn phi(&self, j: T) -> Result<T> {
        (**self).phi(j)
    }
    fn nu_prime_zero(&self) -> Result<T> {
        (**self).nu_prime_zero()
    }
    fn kappa_max(&self) -> T {
        (**self).kappa_max()
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

/// Built-in model families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind<T> {
    /// ν(j) = j, τ ≡ τ0: the classical Smoluchowski equation with dipolar potential.
    Dipolar { tau0: T },
    /// ν(j) = j, τ(j) = 1/(1 + j).
    VicsekVectorial,
    /// τ ≡ 1 and σ(κ) = c(κ)(1 + κ^{1/β}), which yields a continuous
    /// transition with critical exponent β. σ depends on the dimension
    /// through c, so the family carries it.
    SigmaFamily { beta: T, dim: Dimension },
}

/// A built-in model. All three families have h unbounded, so κ_max = ∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientModel<T> {
    pub kind: ModelKind<T>,
}

impl<T: Scalar> CoefficientModel<T> {
    pub fn dipolar(tau0: T) -> Result<Self> {
        if !(tau0 > T::zero() && tau0.is_finite()) {
            return Err(domain("tau0", tau0.as_f64(), "tau0 > 0"));
        }
        Ok(Self {
            kind: ModelKind::Dipolar { tau0 },
        })
    }

    pub fn vicsek_vectorial() -> Self {
        Self {
            kind: ModelKind::VicsekVectorial,
        }
    }

    pub fn sigma_family(beta: T, dim: Dimension) -> Result<Self> {
        if !(beta > T::zero() && beta <= T::one()) {
            return Err(domain("beta", beta.as_f64(), "0 < beta <= 1"));
        }
        Ok(Self {
            kind: ModelKind::SigmaFamily { beta, dim },
        })
    }

    /// Builds a model from a configuration section:
    /// `kind = "dipolar" | "vicsek-vectorial" | "sigma-family"`.
    pub fn from_config(kind: &str, tau0: Option<T>, beta: Option<T>, dim: Dimension) -> Result<Self> {
        match kind {
            "dipolar" => Self::dipolar(tau0.unwrap_or_else(T::one)),
            "vicsek-vectorial" => Ok(Self::vicsek_vectorial()),
            "sigma-family" => {
                let beta = beta.ok_or_else(|| {
                    Error::ModelInvalid("sigma-family requires a beta parameter".into())
                })?;
                Self::sigma_family(beta, dim)
            }
            other => Err(Error::ModelInvalid(format!("unknown model kind `{other}`"))),
        }
    }

    /// σ(κ) for the sigma family, with its κ-derivative.
    fn family_sigma(beta: T, dim: Dimension, kappa: T) -> Result<(T, T)> {
        if kappa == T::zero() {
            return Ok((T::zero(), T::one() / dim.to_scalar::<T>()));
        }
        let (c, cp) = vonmises::c_and_prime(kappa, dim)?;
        let p = T::one() / beta;
        let kp = kappa.powf(p);
        let sigma = c * (T::one() + kp);
        let slope = cp * (T::one() + kp) + c * p * kappa.powf(p - T::one());
        Ok((sigma, slope))
    }
}

/// σ(κ) = ½(√(1+4κ) − 1), written to avoid cancellation at small κ.
pub(crate) fn vicsek_sigma<T: Scalar>(kappa: T) -> T {
    let two = T::lit(2.0);
    two * kappa / (T::one() + (T::one() + T::lit(4.0) * kappa).sqrt())
}

impl<T: Scalar> Coefficients<T> for CoefficientModel<T> {
    fn nu(&self, j: T) -> Result<T> {
        match self.kind {
            ModelKind::Dipolar { .. } | ModelKind::VicsekVectorial => Ok(j),
            ModelKind::SigmaFamily { .. } => self.h(j),
        }
    }

    fn tau(&self, j: T) -> Result<T> {
        match self.kind {
            ModelKind::Dipolar { tau0 } => Ok(tau0),
            ModelKind::VicsekVectorial => Ok(T::one() / (T::one() + j)),
            ModelKind::SigmaFamily { .. } => Ok(T::one()),
        }
    }

    fn h(&self, j: T) -> Result<T> {
        match self.kind {
            ModelKind::Dipolar { tau0 } => Ok(j / tau0),
            ModelKind::VicsekVectorial => Ok(j + j * j),
            ModelKind::SigmaFamily { beta, dim } => {
                if j == T::zero() {
                    return Ok(T::zero());
                }
                let sigma = |kappa: T| Ok(Self::family_sigma(beta, dim, kappa)?.0);
                invert_increasing(&sigma, j, T::lit(vonmises::KAPPA_CAP), T::tol(1e-13))
            }
        }
    }

    fn h_prime(&self, j: T) -> Result<T> {
        match self.kind {
            ModelKind::Dipolar { tau0 } => Ok(T::one() / tau0),
            ModelKind::VicsekVectorial => Ok(T::one() + T::lit(2.0) * j),
            ModelKind::SigmaFamily { beta, dim } => {
                let kappa = self.h(j)?;
                Ok(T::one() / Self::family_sigma(beta, dim, kappa)?.1)
            }
        }
    }

    fn sigma(&self, kappa: T) -> Result<T> {
        match self.kind {
            ModelKind::Dipolar { tau0 } => Ok(tau0 * kappa),
            ModelKind::VicsekVectorial => Ok(vicsek_sigma(kappa)),
            ModelKind::SigmaFamily { beta, dim } => Ok(Self::family_sigma(beta, dim, kappa)?.0),
        }
    }

    fn sigma_prime(&self, kappa: T) -> Result<T> {
        match self.kind {
            ModelKind::Dipolar { tau0 } => Ok(tau0),
            ModelKind::VicsekVectorial => Ok(T::one() / (T::one() + T::lit(4.0) * kappa).sqrt()),
            ModelKind::SigmaFamily { beta, dim } => Ok(Self::family_sigma(beta, dim, kappa)?.1),
        }
    }

    fn phi(&self, j: T) -> Result<T> {
        match self.kind {
            ModelKind::Dipolar { tau0 } => Ok(j * j / (T::lit(2.0) * tau0)),
            ModelKind::VicsekVectorial => Ok(j * j / T::lit(2.0) + j * j * j / T::lit(3.0)),
            // by parts, Φ(j) = jκ − ∫_0^κ σ with κ = h(j), so only one inversion is needed
            ModelKind::SigmaFamily { beta, dim } => {
                let kappa = self.h(j)?;
                let sigma = |k: T| Ok(Self::family_sigma(beta, dim, k)?.0);
                Ok(j * kappa - adaptive_simpson(&sigma, T::zero(), kappa, T::tol(1e-14))?)
            }
        }
    }

    fn nu_prime_zero(&self) -> Result<T> {
        match self.kind {
            ModelKind::Dipolar { .. } | ModelKind::VicsekVectorial => Ok(T::one()),
            // ν = h = σ⁻¹ and σ′(0) = c′(0) = 1/n
            ModelKind::SigmaFamily { dim, .. } => Ok(dim.to_scalar()),
        }
    }


    fn label(&self) -> String {
        match self.kind {
            ModelKind::Dipolar { tau0 } => format!("dipolar(tau0={tau0})"),
            ModelKind::VicsekVectorial => "vicsek-vectorial".to_string(),
            ModelKind::SigmaFamily { beta, dim } => format!("sigma-family(beta={beta}, n={dim})"),
        }
    }
}

/// A model given by arbitrary closures, for experiments and for exercising
/// the validation report on inadmissible coefficients.
pub struct FnModel<T, N, D> {
    nu: N,
    tau: D,
    kappa_max: T,
}

impl<T, N, D> FnModel<T, N, D>
where
    T: Scalar,
    N: Fn(T) -> T + Sync,
    D: Fn(T) -> T + Sync,
{
    /// Wraps the closures and probes h for a plateau to set κ_max.
    pub fn new(nu: N, tau: D) -> Self {
        let mut model = Self {
            nu,
            tau,
            kappa_max: T::infinity(),
        };
        model.kappa_max = probe_kappa_max(&model);
        model
    }
}

impl<T, N, D> Coefficients<T> for FnModel<T, N, D>
where
    T: Scalar,
    N: Fn(T) -> T + Sync,
    D: Fn(T) -> T + Sync,
{
    fn nu(&self, j: T) -> Result<T> {
        Ok((self.nu)(j))
    }

    fn tau(&self, j: T) -> Result<T> {
        Ok((self.tau)(j))
    }

    fn sigma(&self, kappa: T) -> Result<T> {
        if kappa == T::zero() {
            return Ok(T::zero());
        }
        let limit = if self.kappa_max.is_finite() {
            T::lit(PROBE_J_MAX)
        } else {
            T::lit(SIGMA_J_LIMIT)
        };
        invert_increasing(&|j| self.h(j), kappa, limit, T::tol(1e-12))
    }

    fn kappa_max(&self) -> T {
        self.kappa_max
    }
}

/// Probes h on a geometric grid up to j = 10⁶ and returns the plateau value
/// when h has saturated, +∞ otherwise.
pub fn probe_kappa_max<T: Scalar, M: Coefficients<T> + ?Sized>(model: &M) -> T {
    let top = T::lit(PROBE_J_MAX);
    let (Ok(h_top), Ok(h_half)) = (model.h(top), model.h(top * T::lit(0.5))) else {
        return T::infinity();
    };
    if h_top.is_finite() && h_top > T::zero() && h_top - h_half <= T::lit(1e-5) * h_top {
        h_top
    } else {
        T::infinity()
    }
}

fn check_j<T: Scalar>(j: T) -> Result<()> {
    if !(j >= T::zero()) {
        return Err(domain("j", j.as_f64(), "j >= 0"));
    }
    Ok(())
}

fn check_kappa_range<T: Scalar, M: Coefficients<T> + ?Sized>(model: &M, kappa: T) -> Result<()> {
    if !(kappa >= T::zero()) {
        return Err(domain("kappa", kappa.as_f64(), "kappa >= 0"));
    }
    if kappa >= model.kappa_max() {
        return Err(Error::OutOfRange {
            name: "kappa",
            value: kappa.as_f64(),
            limit: model.kappa_max().as_f64(),
        });
    }
    Ok(())
}

/// Alignment strength ν(j).
pub fn nu<T: Scalar, M: Coefficients<T> + ?Sized>(model: &M, j: T) -> Result<T> {
    check_j(j)?;
    model.nu(j)
}

/// Diffusion intensity τ(j).
pub fn tau<T: Scalar, M: Coefficients<T> + ?Sized>(model: &M, j: T) -> Result<T> {
    check_j(j)?;
    model.tau(j)
}

/// h(j) = ν(j)/τ(j).
pub fn h<T: Scalar, M: Coefficients<T> + ?Sized>(model: &M, j: T) -> Result<T> {
    check_j(j)?;
    model.h(j)
}

/// σ(κ), the unique j ≥ 0 with h(j) = κ.
pub fn sigma<T: Scalar, M: Coefficients<T> + ?Sized>(model: &M, kappa: T) -> Result<T> {
    check_kappa_range(model, kappa)?;
    model.sigma(kappa)
}

/// dσ/dκ.
pub fn sigma_prime<T: Scalar, M: Coefficients<T> + ?Sized>(model: &M, kappa: T) -> Result<T> {
    check_kappa_range(model, kappa)?;
    let s = model.sigma_prime(kappa)?;
    if !(s > T::zero()) {
        return Err(Error::ModelInvalid(format!(
            "sigma'({kappa}) = {s} is not positive"
        )));
    }
    Ok(s)
}

/// Φ(j), the antiderivative of h with Φ(0) = 0.
pub fn phi<T: Scalar, M: Coefficients<T> + ?Sized>(model: &M, j: T) -> Result<T> {
    check_j(j)?;
    model.phi(j)
}

/// Outcome of checking a model against the admissibility conditions on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport<T> {
    pub nu_at_zero: T,
    /// Grid points where τ ≤ 0 (or is not finite), with the value found.
    pub tau_failures: Vec<(T, T)>,
    /// Consecutive grid points (j₁, j₂) where h(j₂) ≤ h(j₁).
    pub monotonicity_failures: Vec<(T, T)>,
    /// Grid points where |σ(h(j)) − j| exceeds 10⁻⁸(1 + j), or σ failed.
    pub roundtrip_failures: Vec<T>,
    pub max_roundtrip_error: T,
    /// One-sided slope of h at the origin, when 0 is on the grid. Only
    /// reported: a finite one-sided derivative is not a failure.
    pub h_slope_at_zero: Option<T>,
    pub evaluation_errors: Vec<String>,
}

impl<T: Scalar> ValidationReport<T> {
    pub fn passed(&self) -> bool {
        self.nu_at_zero.abs() <= T::tol(1e-14)
            && self.tau_failures.is_empty()
            && self.monotonicity_failures.is_empty()
            && self.roundtrip_failures.is_empty()
            && self.evaluation_errors.is_empty()
    }
}

/// Checks ν(0) = 0, τ > 0, strict increase of h, and the σ∘h round trip on a
/// sorted grid of j values.
pub fn validate_model<T: Scalar, M: Coefficients<T> + ?Sized>(
    model: &M,
    grid: &[T],
) -> ValidationReport<T> {
    let mut report = ValidationReport {
        nu_at_zero: T::zero(),
        tau_failures: Vec::new(),
        monotonicity_failures: Vec::new(),
        roundtrip_failures: Vec::new(),
        max_roundtrip_error: T::zero(),
        h_slope_at_zero: None,
        evaluation_errors: Vec::new(),
    };
    match model.nu(T::zero()) {
        Ok(v) => report.nu_at_zero = v,
        Err(e) => report.evaluation_errors.push(format!("nu(0): {e}")),
    }
    let mut prev: Option<(T, T)> = None;
    for &j in grid {
        match model.tau(j) {
            Ok(t) if t > T::zero() && t.is_finite() => {}
            Ok(t) => report.tau_failures.push((j, t)),
            Err(e) => report.evaluation_errors.push(format!("tau({j}): {e}")),
        }
        let hj = match model.h(j) {
            Ok(v) => v,
            Err(e) => {
                report.evaluation_errors.push(format!("h({j}): {e}"));
                continue;
            }
        };
        if let Some((pj, ph)) = prev {
            if !(hj > ph) {
                report.monotonicity_failures.push((pj, j));
            }
        }
        prev = Some((j, hj));
        if !(hj >= T::zero() && hj.is_finite() && hj < model.kappa_max()) {
            report.roundtrip_failures.push(j);
            continue;
        }
        match model.sigma(hj) {
            Ok(s) => {
                let err = (s - j).abs();
                report.max_roundtrip_error = report.max_roundtrip_error.max(err);
                if err > T::tol(1e-8) * (T::one() + j) {
                    report.roundtrip_failures.push(j);
                }
            }
            Err(_) => report.roundtrip_failures.push(j),
        }
    }
    if grid.first() == Some(&T::zero()) {
        report.h_slope_at_zero = model.h_prime(T::zero()).ok();
    }
    report
}
