//! Non-isotropic equilibria: roots of the compatibility equation
//! σ(κ) = ρ c(κ), their stability, the critical densities, and the phase
//! diagram assembled from them.
//!
//! Stability of the von Mises family at κ follows the sign of (σ/c)′(κ).
//! Roots on the increasing part of σ/c are stable, those on the decreasing
//! part unstable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::Coefficients;
use crate::error::{domain, Error, Result};
use crate::poincare;
use crate::rates;
use crate::roots::{bracketed_root, golden_section};
use crate::scalar::Scalar;
use crate::vonmises::{self, Dimension};

/// Half-width of the band around (σ/c)′ = 0 labeled [`Stability::Marginal`].
pub const MARGINAL_TOL: f64 = 1e-8;

/// Upper end of the κ range searched for roots unless told otherwise.
pub const DEFAULT_KAPPA_SEARCH_MAX: f64 = 200.0;

const SCAN_POINTS: usize = 2048;
const SCAN_MIN: f64 = 1e-4;
const EXPONENT_SAMPLES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }

    fn from_slope<T: Scalar>(slope: T) -> Self {
        let tol = T::lit(MARGINAL_TOL);
        if slope > tol {
            Stability::Stable
        } else if slope < -tol {
            Stability::Unstable
        } else {
            Stability::Marginal
        }
    }
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `n` points spaced geometrically from `lo` to `hi` inclusive.
pub(crate) fn geometric_grid<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    let ratio = (hi / lo).ln() / T::from_count(n - 1);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * (ratio * T::from_count(i)).exp()
            }
        })
        .collect()
}

fn check_rho<T: Scalar>(rho: T) -> Result<()> {
    if !(rho > T::zero() && rho.is_finite()) {
        return Err(domain("rho", rho.as_f64(), "rho > 0"));
    }
    Ok(())
}

fn check_model_kappa<T: Scalar, M: Coefficients<T> + ?Sized>(kappa: T, model: &M) -> Result<()> {
    vonmises::check_kappa(kappa)?;
    if kappa >= model.kappa_max() {
        return Err(Error::OutOfRange {
            name: "kappa",
            value: kappa.as_f64(),
            limit: model.kappa_max().as_f64(),
        });
    }
    Ok(())
}

/// σ(κ) − ρ c(κ).
pub fn compatibility_residual<T, M>(rho: T, kappa: T, model: &M, n: Dimension) -> Result<T>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    check_rho(rho)?;
    check_model_kappa(kappa, model)?;
    if kappa == T::zero() {
        return Ok(T::zero());
    }
    Ok(model.sigma(kappa)? - rho * vonmises::order_parameter_c(kappa, n)?)
}

/// c(κ)/σ(κ). At κ = 0 the quotient is 0/0, so the analytic limit 1/ρ_c is
/// returned and marked as such.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Ratio<T> {
    Direct(T),
    Limit(T),
}

impl<T: Copy> Ratio<T> {
    pub fn value(self) -> T {
        match self {
            Ratio::Direct(v) | Ratio::Limit(v) => v,
        }
    }
}

pub fn ratio_c_over_sigma<T, M>(kappa: T, model: &M, n: Dimension) -> Result<Ratio<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    check_model_kappa(kappa, model)?;
    if kappa == T::zero() {
        return Ok(Ratio::Limit(T::one() / critical_density_rho_c(model, n)?));
    }
    let c = vonmises::order_parameter_c(kappa, n)?;
    Ok(Ratio::Direct(c / model.sigma(kappa)?))
}

/// σ′c − σc′, which carries the sign of (σ/c)′ and stays well scaled as κ → 0.
fn slope_numerator<T, M>(kappa: T, model: &M, n: Dimension) -> Result<(T, T)>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let (c, cp) = vonmises::c_and_prime(kappa, n)?;
    let s = model.sigma(kappa)?;
    let sp = model.sigma_prime(kappa)?;
    Ok((sp * c - s * cp, c))
}

/// (σ/c)′(κ) = (σ′c − σc′)/c², for κ > 0.
pub fn sigma_over_c_derivative<T, M>(kappa: T, model: &M, n: Dimension) -> Result<T>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    if !(kappa > T::zero()) {
        return Err(domain("kappa", kappa.as_f64(), "kappa > 0"));
    }
    check_model_kappa(kappa, model)?;
    let (num, c) = slope_numerator(kappa, model, n)?;
    Ok(num / (c * c))
}

pub fn stability_at<T, M>(kappa: T, model: &M, n: Dimension) -> Result<Stability>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    Ok(Stability::from_slope(sigma_over_c_derivative(kappa, model, n)?))
}

/// ρ_c = n τ(0)/ν′(0); +∞ when ν′(0) = 0.
pub fn critical_density_rho_c<T, M>(model: &M, n: Dimension) -> Result<T>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let slope = model.nu_prime_zero()?;
    let tau0 = model.tau(T::zero())?;
    if slope == T::zero() {
        return Ok(T::infinity());
    }
    if !(slope > T::zero()) {
        return Err(Error::ModelInvalid(format!("nu'(0) = {slope} is negative")));
    }
    Ok(n.to_scalar::<T>() * tau0 / slope)
}

/// The minimum of σ/c and the concentration where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fold<T> {
    pub rho_star: T,
    pub kappa_star: T,
}

fn search_limit<T: Scalar, M: Coefficients<T> + ?Sized>(model: &M, requested: T) -> (T, bool) {
    let kmax = model.kappa_max();
    if requested < kmax {
        (requested, false)
    } else {
        (kmax * (T::one() - T::lit(1e-9)), true)
    }
}

/// ρ_* = min over κ ≥ 0 of σ(κ)/c(κ), with the κ = 0 value taken as ρ_c.
///
/// A coarse scan locates the basin, golden section narrows it, and the
/// sign change of σ′c − σc′ pins the minimizer down to round-off.
pub fn critical_density_rho_star<T, M>(model: &M, n: Dimension) -> Result<Fold<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let rho_c = critical_density_rho_c(model, n)?;
    let (hi, _) = search_limit(model, T::lit(DEFAULT_KAPPA_SEARCH_MAX));
    let grid = geometric_grid(T::lit(SCAN_MIN), hi, SCAN_POINTS);
    let ratio = |k: T| -> Result<T> { Ok(model.sigma(k)? / vonmises::order_parameter_c(k, n)?) };
    let values = grid.iter().map(|&k| ratio(k)).collect::<Result<Vec<_>>>()?;
    let (imin, &vmin) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or_else(|| Error::NoConvergence("empty scan".into()))?;
    // increasing from the origin: the infimum is the κ → 0 limit ρ_c
    if imin == 0 && slope_numerator(grid[0], model, n)?.0 >= T::zero() {
        return Ok(Fold {
            rho_star: rho_c.min(vmin),
            kappa_star: T::zero(),
        });
    }
    let lo = if imin == 0 { T::zero() } else { grid[imin - 1] };
    let up = grid[(imin + 1).min(grid.len() - 1)];
    let (a, b) = golden_section(&ratio, lo.max(T::lit(SCAN_MIN) * T::lit(0.5)), up, T::tol(1e-6) * up)?;
    let d = |k: T| Ok(slope_numerator(k, model, n)?.0);
    let kappa_star = match bracketed_root(&d, a, b, T::tol(1e-12)) {
        Ok(k) => k,
        Err(_) => {
            // derivative does not change sign inside the golden bracket; widen
            // to the scan neighbours before falling back to the midpoint
            bracketed_root(&d, lo.max(T::lit(SCAN_MIN) * T::lit(0.5)), up, T::tol(1e-12))
                .unwrap_or((a + b) * T::lit(0.5))
        }
    };
    let rho_star = ratio(kappa_star)?;
    Ok(Fold {
        rho_star: rho_star.min(rho_c),
        kappa_star: if rho_star <= rho_c { kappa_star } else { T::zero() },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root<T> {
    pub kappa: T,
    pub c: T,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumBranch<T> {
    pub rho: T,
    pub roots: Vec<Root<T>>,
    /// Set when the requested search range reached κ_max and was cut short.
    pub clipped: bool,
}

impl<T: Scalar> EquilibriumBranch<T> {
    /// The stable root with the largest κ, if any.
    pub fn largest_stable(&self) -> Option<Root<T>> {
        self.roots
            .iter()
            .rev()
            .find(|r| r.stability == Stability::Stable)
            .copied()
    }
}

/// All positive roots of the compatibility equation in (0, kappa_search_max].
pub fn solve_branches<T, M>(
    rho: T,
    model: &M,
    n: Dimension,
    kappa_search_max: T,
) -> Result<EquilibriumBranch<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    check_rho(rho)?;
    if !(kappa_search_max > T::lit(SCAN_MIN)) {
        return Err(domain(
            "kappa_search_max",
            kappa_search_max.as_f64(),
            "kappa_search_max > 1e-4",
        ));
    }
    let (hi, clipped) = search_limit(model, kappa_search_max.min(T::lit(vonmises::KAPPA_CAP)));
    let residual = |k: T| -> Result<T> { Ok(model.sigma(k)? - rho * vonmises::order_parameter_c(k, n)?) };
    let grid = geometric_grid(T::lit(SCAN_MIN), hi, SCAN_POINTS);
    let values = grid.iter().map(|&k| residual(k)).collect::<Result<Vec<_>>>()?;
    let mut roots = Vec::new();
    for i in 0..grid.len() - 1 {
        let (a, b) = (values[i], values[i + 1]);
        let kappa = if a == T::zero() {
            grid[i]
        } else if a.signum() != b.signum() && b != T::zero() {
            bracketed_root(&residual, grid[i], grid[i + 1], T::tol(1e-12) * grid[i + 1].max(T::one()))?
        } else {
            continue;
        };
        let (num, c) = slope_numerator(kappa, model, n)?;
        roots.push(Root {
            kappa,
            c,
            stability: Stability::from_slope(num / (c * c)),
        });
    }
    if values[grid.len() - 1] == T::zero() {
        let kappa = grid[grid.len() - 1];
        let (num, c) = slope_numerator(kappa, model, n)?;
        roots.push(Root {
            kappa,
            c,
            stability: Stability::from_slope(num / (c * c)),
        });
    }
    Ok(EquilibriumBranch { rho, roots, clipped })
}

fn check_c_grid<T: Scalar>(c_grid: &[T]) -> Result<()> {
    for (i, &c) in c_grid.iter().enumerate() {
        if !(c > T::zero() && c < T::one()) {
            return Err(domain("c", c.as_f64(), "0 < c < 1"));
        }
        if i > 0 && !(c > c_grid[i - 1]) {
            return Err(domain("c", c.as_f64(), "c_grid strictly increasing"));
        }
    }
    Ok(())
}

/// ρ = σ(κ(c))/c for a point of the von Mises branch parameterized by c.
fn branch_point<T, M>(c: T, model: &M, n: Dimension) -> Result<(T, T, Stability)>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let kappa = vonmises::inverse_order_parameter(c, n)?;
    check_model_kappa(kappa, model)?;
    let rho = model.sigma(kappa)? / c;
    let stability = stability_at(kappa, model, n)?;
    Ok((kappa, rho, stability))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramRow<T> {
    pub c: T,
    pub kappa: T,
    pub rho: T,
    pub stability: Stability,
    pub free_energy: T,
    /// λ_κ on stable and marginal rows; absent on unstable rows.
    pub rate: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues<T> {
    /// `None` stands for ρ_c = +∞.
    pub rho_c: Option<T>,
    pub rho_star: T,
    pub kappa_star: T,
    pub rho_1: Option<T>,
}

/// Computes ρ_c, ρ_*, κ_* and (when the model has a fold) ρ₁.
pub fn critical_values<T, M>(model: &M, n: Dimension) -> Result<CriticalValues<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let rho_c = critical_density_rho_c(model, n)?;
    let fold = critical_density_rho_star(model, n)?;
    let rho_1 = match energy_crossing_rho1(model, n) {
        Ok(x) => Some(x.rho),
        Err(Error::NotApplicable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(CriticalValues {
        rho_c: rho_c.is_finite().then_some(rho_c),
        rho_star: fold.rho_star,
        kappa_star: fold.kappa_star,
        rho_1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram<T> {
    pub model: String,
    pub n: Dimension,
    pub rows: Vec<DiagramRow<T>>,
    pub critical: CriticalValues<T>,
}

/// Samples the von Mises branch over `c_grid`. Rows are computed in parallel
/// and returned in grid order.
pub fn phase_diagram<T, M>(model: &M, n: Dimension, c_grid: &[T]) -> Result<PhaseDiagram<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    check_c_grid(c_grid)?;
    let critical = critical_values(model, n)?;
    let rows = c_grid
        .par_iter()
        .map(|&c| {
            let (kappa, rho, stability) = branch_point(c, model, n)?;
            let free_energy = vonmises::free_energy_vonmises(rho, kappa, model, n)?;
            let rate = match stability {
                Stability::Unstable => None,
                _ => {
                    let lambda = poincare::poincare_constant_converged(kappa, n)?;
                    Some(rates::rate_vonmises(rho, kappa, model, n, lambda)?)
                }
            };
            Ok(DiagramRow {
                c,
                kappa,
                rho,
                stability,
                free_energy,
                rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram {
        model: model.label(),
        n,
        rows,
        critical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow<T> {
    pub c: T,
    pub kappa: T,
    pub rho: T,
    pub stability: Stability,
    /// F_κ(ρ) − F(ρ): von Mises free energy relative to the uniform state.
    pub free_energy_difference: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDiagram<T> {
    pub model: String,
    pub n: Dimension,
    pub rows: Vec<EnergyRow<T>>,
    pub rho_1: Option<T>,
}

/// Free-energy difference along the branch. The first row is the κ = 0 end
/// of the branch at ρ = ρ_c (when finite), where the difference vanishes.
pub fn energy_diagram<T, M>(model: &M, n: Dimension, c_grid: &[T]) -> Result<EnergyDiagram<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    check_c_grid(c_grid)?;
    let rho_c = critical_density_rho_c(model, n)?;
    let mut rows = Vec::with_capacity(c_grid.len() + 1);
    if rho_c.is_finite() {
        rows.push(EnergyRow {
            c: T::zero(),
            kappa: T::zero(),
            rho: rho_c,
            stability: Stability::Marginal,
            free_energy_difference: T::zero(),
        });
    }
    let branch = c_grid
        .par_iter()
        .map(|&c| {
            let (kappa, rho, stability) = branch_point(c, model, n)?;
            Ok(EnergyRow {
                c,
                kappa,
                rho,
                stability,
                free_energy_difference: vonmises::free_energy_excess(rho, kappa, model, n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.extend(branch);
    let rho_1 = match energy_crossing_rho1(model, n) {
        Ok(x) => Some(x.rho),
        Err(Error::NotApplicable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EnergyDiagram {
        model: model.label(),
        n,
        rows,
        rho_1,
    })
}

/// Fits the exponent β of c ∼ (ρ − ρ_c)^β along the branch near c = 0.
///
/// Least squares of log c against log(ρ − ρ_c) on 24 log-spaced c values in
/// [10⁻³, 10⁻¹]. Models whose branch leaves κ = 0 towards ρ < ρ_c (a fold)
/// have no such power law.
pub fn critical_exponent<T, M>(model: &M, n: Dimension) -> Result<T>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let rho_c = critical_density_rho_c(model, n)?;
    if !rho_c.is_finite() {
        return Err(Error::NotApplicable("rho_c is infinite".into()));
    }
    let cs = geometric_grid(T::lit(1e-3), T::lit(1e-1), EXPONENT_SAMPLES);
    let mut xs = Vec::with_capacity(cs.len());
    let mut ys = Vec::with_capacity(cs.len());
    for &c in &cs {
        let kappa = vonmises::inverse_order_parameter(c, n)?;
        let rho = model.sigma(kappa)? / c;
        if !(rho > rho_c) {
            return Err(Error::NotApplicable(format!(
                "branch reaches rho = {rho} <= rho_c = {rho_c} at c = {c}: the transition is not continuous"
            )));
        }
        xs.push((rho - rho_c).ln());
        ys.push(c.ln());
    }
    let m = T::from_count(xs.len());
    let mx = xs.iter().fold(T::zero(), |s, &x| s + x) / m;
    let my = ys.iter().fold(T::zero(), |s, &y| s + y) / m;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(&ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCrossing<T> {
    pub rho: T,
    pub kappa: T,
}

/// ρ₁ ∈ (ρ_*, ρ_c): the density at which the stable von Mises branch and the
/// uniform state have equal free energy.
pub fn energy_crossing_rho1<T, M>(model: &M, n: Dimension) -> Result<EnergyCrossing<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let rho_c = critical_density_rho_c(model, n)?;
    let fold = critical_density_rho_star(model, n)?;
    if !rho_c.is_finite() || !(fold.kappa_star > T::zero() && fold.rho_star < rho_c) {
        return Err(Error::NotApplicable("the branch has no fold below rho_c".into()));
    }
    let ratio = |k: T| -> Result<T> { Ok(model.sigma(k)? / vonmises::order_parameter_c(k, n)?) };
    // κ_c: where the stable branch reaches ρ_c
    let (limit, _) = search_limit(model, T::lit(DEFAULT_KAPPA_SEARCH_MAX));
    let mut hi = fold.kappa_star * T::lit(2.0);
    while ratio(hi)? < rho_c {
        if hi >= limit {
            return Err(Error::NotApplicable(
                "the stable branch does not reach rho_c in the search range".into(),
            ));
        }
        hi = (hi * T::lit(2.0)).min(limit);
    }
    let kappa_c = bracketed_root(&|k| Ok(ratio(k)? - rho_c), fold.kappa_star, hi, T::tol(1e-13))?;
    let excess = |k: T| -> Result<T> {
        let rho = ratio(k)?;
        vonmises::free_energy_excess(rho, k, model, n)
    };
    let at_fold = excess(fold.kappa_star)?;
    let at_c = excess(kappa_c)?;
    if !(at_fold > T::zero() && at_c < T::zero()) {
        return Err(Error::NotApplicable(format!(
            "free-energy difference does not change sign on the stable branch ({at_fold} at the fold, {at_c} at rho_c)"
        )));
    }
    let kappa = bracketed_root(&excess, fold.kappa_star, kappa_c, T::tol(1e-13))?;
    Ok(EnergyCrossing {
        rho: ratio(kappa)?,
        kappa,
    })
}
