//! Von Mises distributions on the sphere of R^n and their order parameter.
//!
//! All densities are taken with respect to the uniform probability measure on
//! the sphere (total mass one), so the uniform distribution has density 1.
//! Integrals are written in the polar angle θ ∈ [0, π] measured from the mean
//! direction, where the sphere measure is proportional to sin^{n-2}θ dθ.

use serde::{Deserialize, Serialize};

use crate::coefficients::{self, Coefficients};
use crate::error::{domain, Error, Result};
use crate::quadrature::integrate_gl;
use crate::scalar::Scalar;

/// Largest concentration accepted by the order-parameter routines.
pub const KAPPA_CAP: f64 = 1e4;

/// Below this concentration the mean cosine is integrated through `exp_m1`
/// so that c(κ) keeps full relative accuracy as κ → 0.
const SMALL_KAPPA: f64 = 1.0;

/// Ambient dimension n ≥ 2 of R^n; the sphere has dimension n − 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    pub const TWO: Dimension = Dimension(2);
    pub const THREE: Dimension = Dimension(3);

    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(domain("n", n as f64, "n >= 2"));
        }
        Ok(Dimension(n))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn to_scalar<T: Scalar>(self) -> T {
        T::from_count(self.0 as usize)
    }
}

impl TryFrom<u32> for Dimension {
    type Error = Error;
    fn try_from(n: u32) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Concentration and dimension of a von Mises distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesParams<T> {
    pub kappa: T,
    pub n: Dimension,
}

impl<T: Scalar> VonMisesParams<T> {
    pub fn new(kappa: T, n: Dimension) -> Result<Self> {
        check_kappa(kappa)?;
        Ok(Self { kappa, n })
    }

    pub fn order_parameter(&self) -> Result<T> {
        order_parameter_c(self.kappa, self.n)
    }
}

pub(crate) fn check_kappa<T: Scalar>(kappa: T) -> Result<()> {
    if !(kappa >= T::zero()) {
        return Err(domain("kappa", kappa.as_f64(), "kappa >= 0"));
    }
    if kappa > T::lit(KAPPA_CAP) {
        return Err(Error::OutOfRange {
            name: "kappa",
            value: kappa.as_f64(),
            limit: KAPPA_CAP,
        });
    }
    Ok(())
}

/// ∫_0^π sin^{n-2}θ dθ.
fn sphere_weight<T: Scalar>(n: Dimension) -> T {
    let mut w = if n.get().is_multiple_of(2) { T::PI() } else { T::lit(2.0) };
    let mut k = if n.get().is_multiple_of(2) { 4 } else { 5 };
    while k <= n.get() {
        w = w * T::from_count(k as usize - 3) / T::from_count(k as usize - 2);
        k += 2;
    }
    w
}

/// Upper integration limit beyond which e^{κ(cos θ − 1)} underflows.
fn truncation<T: Scalar>(kappa: T) -> T {
    let cut = -T::min_positive_value().ln() * T::lit(0.98);
    if kappa * T::lit(2.0) <= cut {
        T::PI()
    } else {
        (T::one() - cut / kappa).acos()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ThetaMoments<T> {
    pub log_z: T,
    pub c: T,
    pub variance: T,
}

/// Normalization, mean and variance of cos θ under the von Mises weight,
/// from one vector-valued quadrature. The weight is factored as
/// e^{κ} · e^{κ(cos θ − 1)} so that nothing overflows for large κ.
pub(crate) fn theta_moments<T: Scalar>(kappa: T, n: Dimension) -> ThetaMoments<T> {
    let p = n.get() as i32 - 2;
    let small = kappa < T::lit(SMALL_KAPPA);
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let [i0, i1, i2, i3] = integrate_gl(
        |theta: T| {
            let s = theta.sin().powi(p);
            let sh = (theta * half).sin();
            let d = two * sh * sh;
            let w = (-kappa * d).exp() * s;
            let num = if small {
                let cos = theta.cos();
                cos * (kappa * cos).exp_m1() * s
            } else {
                T::zero()
            };
            [w, w * d, w * d * d, num]
        },
        T::zero(),
        truncation(kappa),
        T::tol(1e-12),
    );
    let log_z = kappa + i0.ln() - sphere_weight::<T>(n).ln();
    let mean_d = i1 / i0;
    let c = if small {
        i3 / (i0 * kappa.exp())
    } else {
        T::one() - mean_d
    };
    let variance = (i2 / i0 - mean_d * mean_d).max(T::zero());
    ThetaMoments { log_z, c, variance }
}

/// Order parameter c(κ): the length of the first moment of the normalized
/// von Mises distribution. Strictly increasing from c(0) = 0 towards 1.
pub fn order_parameter_c<T: Scalar>(kappa: T, n: Dimension) -> Result<T> {
    check_kappa(kappa)?;
    if kappa == T::zero() {
        return Ok(T::zero());
    }
    Ok(theta_moments(kappa, n).c)
}

/// dc/dκ, the variance of cos θ under the von Mises weight,
/// equal to 1 − c² − (n − 1)c/κ.
pub fn order_parameter_c_prime<T: Scalar>(kappa: T, n: Dimension) -> Result<T> {
    if !(kappa > T::zero()) {
        return Err(domain("kappa", kappa.as_f64(), "kappa > 0"));
    }
    check_kappa(kappa)?;
    Ok(theta_moments(kappa, n).variance)
}

/// (c(κ), c′(κ)) from a single quadrature; at κ = 0 returns (0, 1/n).
pub(crate) fn c_and_prime<T: Scalar>(kappa: T, n: Dimension) -> Result<(T, T)> {
    check_kappa(kappa)?;
    if kappa == T::zero() {
        return Ok((T::zero(), T::one() / n.to_scalar()));
    }
    let m = theta_moments(kappa, n);
    Ok((m.c, m.variance))
}

/// Inverse of κ ↦ c(κ), by bracketed Newton iteration.
pub fn inverse_order_parameter<T: Scalar>(c: T, n: Dimension) -> Result<T> {
    if !(c >= T::zero() && c < T::one()) {
        return Err(domain("c", c.as_f64(), "0 <= c < 1"));
    }
    if c == T::zero() {
        return Ok(T::zero());
    }
    let nf: T = n.to_scalar();
    let cap = T::lit(KAPPA_CAP);
    let mut lo = T::zero();
    // c ≈ κ/n near 0 and c ≈ 1 − (n−1)/(2κ) for large κ
    let mut guess = (nf * c).max((nf - T::one()) / (T::lit(2.0) * (T::one() - c)));
    if !(guess < cap) {
        guess = cap;
    }
    let mut hi = guess;
    loop {
        let value = order_parameter_c(hi, n)?;
        if value >= c {
            break;
        }
        lo = hi;
        if hi >= cap {
            return Err(Error::OutOfRange {
                name: "c",
                value: c.as_f64(),
                limit: value.as_f64(),
            });
        }
        hi = (hi * T::lit(2.0)).min(cap);
    }
    let mut kappa = guess.min(hi).max(lo);
    if kappa <= lo || kappa >= hi {
        kappa = (lo + hi) * T::lit(0.5);
    }
    for _ in 0..200 {
        let (value, slope) = c_and_prime(kappa, n)?;
        let f = value - c;
        if f == T::zero() {
            return Ok(kappa);
        }
        if f > T::zero() {
            hi = kappa;
        } else {
            lo = kappa;
        }
        let mut next = kappa - f / slope;
        if !(next > lo && next < hi) {
            next = (lo + hi) * T::lit(0.5);
        }
        let step = (next - kappa).abs();
        kappa = next;
        if step <= T::epsilon() * T::lit(4.0) * kappa || hi - lo <= T::epsilon() * kappa {
            break;
        }
    }
    Ok(kappa)
}

/// ln Z(κ), with Z(κ) = ∫ e^{κ ω·Ω} dω under the normalized measure.
pub fn log_normalization<T: Scalar>(kappa: T, n: Dimension) -> Result<T> {
    check_kappa(kappa)?;
    if kappa == T::zero() {
        return Ok(T::zero());
    }
    Ok(theta_moments(kappa, n).log_z)
}

/// Density M_{κΩ}(ω) at a point with ω·Ω = `cos_angle`.
pub fn vonmises_density<T: Scalar>(kappa: T, cos_angle: T, n: Dimension) -> Result<T> {
    if !(cos_angle.abs() <= T::one()) {
        return Err(domain("cos_angle", cos_angle.as_f64(), "-1 <= cos_angle <= 1"));
    }
    let log_z = log_normalization(kappa, n)?;
    Ok((kappa * cos_angle - log_z).exp())
}

/// Free energy ρ ln ρ of the uniform state of mass ρ.
pub fn free_energy_uniform<T: Scalar>(rho: T) -> Result<T> {
    if !(rho > T::zero()) {
        return Err(domain("rho", rho.as_f64(), "rho > 0"));
    }
    Ok(rho * rho.ln())
}

/// F(ρ M_{κΩ}) − F(ρ): the free energy of the von Mises state relative to
/// the uniform state with the same mass.
pub fn free_energy_excess<T, M>(rho: T, kappa: T, model: &M, n: Dimension) -> Result<T>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    if !(rho > T::zero()) {
        return Err(domain("rho", rho.as_f64(), "rho > 0"));
    }
    check_kappa(kappa)?;
    if kappa == T::zero() {
        return Ok(T::zero());
    }
    let m = theta_moments(kappa, n);
    let phi = coefficients::phi(model, rho * m.c)?;
    Ok(rho * (kappa * m.c - m.log_z) - phi)
}

/// Free energy ∫ f ln f − Φ(|J_f|) evaluated at f = ρ M_{κΩ}.
pub fn free_energy_vonmises<T, M>(rho: T, kappa: T, model: &M, n: Dimension) -> Result<T>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let uniform = free_energy_uniform(rho)?;
    if kappa == T::zero() {
        return Ok(uniform);
    }
    Ok(uniform + free_energy_excess(rho, kappa, model, n)?)
}

/// Closed form of the von Mises free energy for ν(j) = j, τ(j) = 1/(1 + j),
/// valid on the compatibility manifold σ(κ) = ρ c(κ), where σ² = κ − σ.
pub fn free_energy_vicsek_closed_form<T: Scalar>(rho: T, kappa: T, n: Dimension) -> Result<T> {
    let uniform = free_energy_uniform(rho)?;
    let sigma = coefficients::vicsek_sigma(kappa);
    let log_z = log_normalization(kappa, n)?;
    Ok(uniform - rho * log_z - (kappa - sigma) / T::lit(6.0)
        + T::lit(2.0) / T::lit(3.0) * sigma * kappa)
}
