//! Time integration of the kinetic equation on the circle,
//!
//! ∂_t f = τ(|J_f|) ∂²_θ f − ν(|J_f|) ∂_θ(f ∂_θ cos(θ − φ)),
//!
//! where φ is the direction of the first moment J_f.
//!
//! With κ = h(|J_f|) and M = e^{κ cos(θ − φ)} the right-hand side is
//! τ ∂_θ(M ∂_θ(f/M)). Each step freezes τ, κ and φ at the current state and
//! takes one backward-Euler step of this linear Fokker–Planck operator. Fluxes
//! live at half-nodes, F_{i+½} = τ M_{i+½}(u_{i+1} − u_i)/Δθ with u = f/M and
//! M_{i+½} the geometric mean of the neighbouring nodal values. The algebraic
//! consequences are the ones the diagnostics check:
//!
//! * fluxes telescope, so mass is conserved to round-off;
//! * the matrix is an M-matrix with unit column sums, so positivity holds;
//! * sampled von Mises states at a compatibility root are exact fixed points;
//! * the discrete free energy cannot increase, by convexity of Φ and the
//!   contraction of relative entropy under the frozen step.
//!
//! Densities are expressed with respect to the normalized measure dθ/2π, so
//! the mass is the arithmetic mean of the nodal values.

use serde::{Deserialize, Serialize};

use crate::coefficients::{self, Coefficients};
use crate::error::{domain, Error, Result};
use crate::linalg::solve_cyclic;
use crate::scalar::Scalar;
use crate::vonmises::{self, Dimension};

pub const DEFAULT_GRID: usize = 100;
pub const DEFAULT_DT: f64 = 0.01;

/// |J| at or below this fraction of the mass is treated as exactly zero.
/// Even-mode data have J = 0 analytically but pick up round-off of order
/// 10⁻¹⁷ per step; above ρ_c that noise would otherwise seed the instability.
pub const ZERO_FLUX_TOL: f64 = 1e-12;

/// Nodal values below −10⁻¹⁰ ρ abort a run.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState<T> {
    theta: Vec<T>,
    f: Vec<T>,
    t: T,
    rho: T,
}

fn grid<T: Scalar>(n: usize) -> Vec<T> {
    let step = T::lit(2.0) * T::PI() / T::from_count(n);
    (0..n).map(|i| T::from_count(i) * step).collect()
}

fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, &x| s + x) / T::from_count(v.len())
}

impl<T: Scalar> SolverState<T> {
    /// Wraps nodal values on the equispaced grid θ_i = 2πi/N.
    pub fn new(f: Vec<T>, t: T) -> Result<Self> {
        if f.len() < 3 {
            return Err(domain("N", f.len() as f64, "N >= 3"));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(domain("f", f64::NAN, "finite values"));
        }
        let rho = mean(&f);
        if !(rho > T::zero()) {
            return Err(domain("mass", rho.as_f64(), "mass > 0"));
        }
        Ok(Self {
            theta: grid(f.len()),
            f,
            t,
            rho,
        })
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn f(&self) -> &[T] {
        &self.f
    }

    pub fn t(&self) -> T {
        self.t
    }

    /// Mass at construction; every step preserves it.
    pub fn rho(&self) -> T {
        self.rho
    }

    /// Current mass (1/N)Σf_i.
    pub fn mass(&self) -> T {
        mean(&self.f)
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn step_size(&self) -> T {
        T::lit(2.0) * T::PI() / T::from_count(self.f.len())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.f
    }

    /// ‖f − ρ‖ in discrete L² for the normalized measure.
    pub fn l2_deviation(&self) -> T {
        let rho = self.mass();
        mean(&self.f.iter().map(|&v| (v - rho) * (v - rho)).collect::<Vec<_>>()).sqrt()
    }

    pub fn linf_deviation(&self) -> T {
        let rho = self.mass();
        self.f.iter().fold(T::zero(), |m, &v| m.max((v - rho).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment<T> {
    pub j: [T; 2],
    pub abs_j: T,
    /// J/|J|, or `None` when J vanishes.
    pub omega: Option<[T; 2]>,
}

impl<T: Scalar> Moment<T> {
    fn angle(&self) -> T {
        self.omega.map_or(T::zero(), |[x, y]| y.atan2(x))
    }
}

/// J = ((1/N)Σf_i cos θ_i, (1/N)Σf_i sin θ_i).
pub fn first_moment<T: Scalar>(state: &SolverState<T>) -> Moment<T> {
    let mut jx = T::zero();
    let mut jy = T::zero();
    for (&f, &th) in state.f.iter().zip(&state.theta) {
        jx = jx + f * th.cos();
        jy = jy + f * th.sin();
    }
    let count = T::from_count(state.len());
    let j = [jx / count, jy / count];
    let abs_j = j[0].hypot(j[1]);
    let omega = (abs_j > T::zero()).then(|| [j[0] / abs_j, j[1] / abs_j]);
    Moment { j, abs_j, omega }
}

/// The moment used to freeze coefficients: as [`first_moment`], but snapped
/// to zero below [`ZERO_FLUX_TOL`].
pub(crate) fn effective_moment<T: Scalar>(state: &SolverState<T>) -> Moment<T> {
    let m = first_moment(state);
    if m.abs_j <= T::lit(ZERO_FLUX_TOL) * state.mass().abs() {
        Moment {
            j: [T::zero(); 2],
            abs_j: T::zero(),
            omega: None,
        }
    } else {
        m
    }
}

/// Frozen coefficients of one step: τ, κ and the log-weights κ(cos(θ − φ) − 1).
struct Frozen<T> {
    tau: T,
    kappa: T,
    phi: T,
}

fn freeze<T, M>(state: &SolverState<T>, model: &M, scale: T) -> Result<Frozen<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let m = effective_moment(state);
    let j = scale * m.abs_j;
    Ok(Frozen {
        tau: model.tau(j)?,
        kappa: if j > T::zero() { model.h(j)? } else { T::zero() },
        phi: m.angle(),
    })
}

/// Advances by `dt` with coefficients evaluated at |J_f|.
pub fn step<T, M>(state: &SolverState<T>, dt: T, model: &M) -> Result<SolverState<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    step_scaled(state, dt, model, T::one())
}

/// Advances by `dt` with coefficients evaluated at `scale`·|J_f|.
///
/// With `f` a probability density and `scale` = ρ this integrates the
/// equation for f/ρ.
pub fn step_scaled<T, M>(state: &SolverState<T>, dt: T, model: &M, scale: T) -> Result<SolverState<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    if !(dt > T::zero()) {
        return Err(domain("dt", dt.as_f64(), "dt > 0"));
    }
    let frozen = freeze(state, model, scale)?;
    let n = state.len();
    let h = state.step_size();
    let r = dt * frozen.tau / (h * h);
    let log_m: Vec<T> = state
        .theta
        .iter()
        .map(|&th| frozen.kappa * ((th - frozen.phi).cos() - T::one()))
        .collect();
    let half = T::lit(0.5);
    let mut sub = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut sup = vec![T::zero(); n];
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let next = (i + 1) % n;
        // M_{i±½}/M_j as exponentials of log differences
        let left = (log_m[prev] + log_m[i]) * half;
        let right = (log_m[i] + log_m[next]) * half;
        diag[i] = T::one() + r * ((left - log_m[i]).exp() + (right - log_m[i]).exp());
        sub[i] = -r * (left - log_m[prev]).exp();
        sup[i] = -r * (right - log_m[next]).exp();
    }
    let f = solve_cyclic(&sub, &diag, &sup, &state.f).map_err(|e| Error::Solver {
        t: state.t.as_f64(),
        reason: e.to_string(),
    })?;
    Ok(SolverState {
        theta: state.theta.clone(),
        f,
        t: state.t + dt,
        rho: state.rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics<T> {
    pub t: T,
    pub mass: T,
    pub j: [T; 2],
    pub abs_j: T,
    pub omega: Option<[T; 2]>,
    pub free_energy: T,
    pub dissipation: T,
}

/// Discrete free energy (1/N)Σf ln f − Φ(|J|), with 0 ln 0 = 0.
pub fn free_energy<T, M>(state: &SolverState<T>, model: &M) -> Result<T>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let entropy = mean(
        &state
            .f
            .iter()
            .map(|&v| if v > T::zero() { v * v.ln() } else { T::zero() })
            .collect::<Vec<_>>(),
    );
    Ok(entropy - coefficients::phi(model, first_moment(state).abs_j)?)
}

/// τ(|J|)(1/N)Σ f_i |∂_θ ψ|², ψ = ln f − h(|J|) cos(θ − φ), with centred differences.
pub fn dissipation<T, M>(state: &SolverState<T>, model: &M) -> Result<T>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let frozen = freeze(state, model, T::one())?;
    let n = state.len();
    let tiny = T::min_positive_value();
    let psi: Vec<T> = state
        .f
        .iter()
        .zip(&state.theta)
        .map(|(&v, &th)| v.max(tiny).ln() - frozen.kappa * (th - frozen.phi).cos())
        .collect();
    let two_h = T::lit(2.0) * state.step_size();
    let mut sum = T::zero();
    for i in 0..n {
        if state.f[i] > T::zero() {
            let d = (psi[(i + 1) % n] - psi[(i + n - 1) % n]) / two_h;
            sum = sum + state.f[i] * d * d;
        }
    }
    Ok(frozen.tau * sum / T::from_count(n))
}

pub fn diagnostics<T, M>(state: &SolverState<T>, model: &M) -> Result<Diagnostics<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let m = first_moment(state);
    Ok(Diagnostics {
        t: state.t,
        mass: state.mass(),
        j: m.j,
        abs_j: m.abs_j,
        omega: m.omega,
        free_energy: free_energy(state, model)?,
        dissipation: dissipation(state, model)?,
    })
}

/// Initial data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition<T> {
    /// ρ(1 + amplitude·cos(mode·θ)).
    UniformPerturbed { amplitude: T, mode: u32 },
    /// ρ M_{κΩ} with Ω at the given angle.
    VonMises { kappa: T, angle: T },
    /// Arbitrary nonnegative nodal values, rescaled to mass ρ.
    Custom { values: Vec<T> },
}

/// Samples the initial condition on N nodes and rescales it to mass exactly ρ.
pub fn project_initial<T: Scalar>(kind: &InitialCondition<T>, rho: T, n: usize) -> Result<SolverState<T>> {
    if !(rho > T::zero()) {
        return Err(domain("rho", rho.as_f64(), "rho > 0"));
    }
    let theta: Vec<T> = grid(n);
    let raw: Vec<T> = match kind {
        InitialCondition::UniformPerturbed { amplitude, mode } => {
            if !(amplitude.abs() <= T::one()) {
                return Err(domain("amplitude", amplitude.as_f64(), "|amplitude| <= 1"));
            }
            let m = T::from_count(*mode as usize);
            theta.iter().map(|&th| T::one() + *amplitude * (m * th).cos()).collect()
        }
        InitialCondition::VonMises { kappa, angle } => {
            let log_z = vonmises::log_normalization(*kappa, Dimension::TWO)?;
            theta
                .iter()
                .map(|&th| (*kappa * (th - *angle).cos() - log_z).exp())
                .collect()
        }
        InitialCondition::Custom { values } => {
            if values.len() != n {
                return Err(domain("values", values.len() as f64, "one value per grid node"));
            }
            if values.iter().any(|&v| !(v >= T::zero() && v.is_finite())) {
                return Err(domain("values", f64::NAN, "finite nonnegative values"));
            }
            values.clone()
        }
    };
    let mass = mean(&raw);
    if !(mass > T::zero()) {
        return Err(domain("values", 0.0, "not all zero"));
    }
    let f = raw.iter().map(|&v| v * rho / mass).collect();
    let mut state = SolverState::new(f, T::zero())?;
    state.rho = rho;
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams<T> {
    pub dt: T,
    pub t_end: T,
    /// Diagnostics are recorded every `cadence` steps (and at both ends).
    pub cadence: usize,
}

impl<T: Scalar> SimulationParams<T> {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord<T> {
    pub t: T,
    pub reason: String,
    pub last: Diagnostics<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub samples: Vec<Diagnostics<T>>,
    pub final_state: SolverState<T>,
    /// Set when the run stopped early on a non-finite or negative value.
    pub abort: Option<AbortRecord<T>>,
}

/// Checks an accepted step for NaN and for negativity beyond tolerance.
pub(crate) fn admissibility<T: Scalar>(state: &SolverState<T>) -> Option<String> {
    let floor = -T::lit(POSITIVITY_TOL) * state.rho.abs();
    for (i, &v) in state.f.iter().enumerate() {
        if !v.is_finite() {
            return Some(format!("non-finite value at node {i}"));
        }
        if v < floor {
            return Some(format!("negative value {v} at node {i}"));
        }
    }
    None
}

/// Repeated [`step`]s from `f0` up to `t_end`, calling `observer` on each
/// recorded snapshot.
pub fn simulate<T, M>(
    f0: SolverState<T>,
    model: &M,
    params: &SimulationParams<T>,
    mut observer: impl FnMut(&Diagnostics<T>),
) -> Result<Trajectory<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    if !(params.dt > T::zero()) {
        return Err(domain("dt", params.dt.as_f64(), "dt > 0"));
    }
    if !(params.t_end >= T::zero()) {
        return Err(domain("t_end", params.t_end.as_f64(), "t_end >= 0"));
    }
    if params.cadence == 0 {
        return Err(domain("cadence", 0.0, "cadence >= 1"));
    }
    let steps = params.steps();
    let mut state = f0;
    let first = diagnostics(&state, model)?;
    observer(&first);
    let mut samples = vec![first];
    for k in 1..=steps {
        let next = step(&state, params.dt, model)?;
        if let Some(reason) = admissibility(&next) {
            let last = *samples.last().expect("at least one sample");
            return Ok(Trajectory {
                samples,
                final_state: state,
                abort: Some(AbortRecord {
                    t: next.t,
                    reason,
                    last,
                }),
            });
        }
        state = next;
        if k % params.cadence == 0 || k == steps {
            let d = diagnostics(&state, model)?;
            observer(&d);
            samples.push(d);
        }
    }
    Ok(Trajectory {
        samples,
        final_state: state,
        abort: None,
    })
}

/// Exponential decay rate of a positive series: minus the least-squares
/// slope of ln(value) against t over the trailing `window` fraction.
pub fn measure_decay_rate<T: Scalar>(series: &[(T, T)], window: T) -> Result<T> {
    if !(window > T::zero() && window <= T::one()) {
        return Err(domain("window", window.as_f64(), "0 < window <= 1"));
    }
    let count = (T::from_count(series.len()) * window)
        .ceil()
        .to_usize()
        .unwrap_or(0)
        .min(series.len());
    if count < 10 {
        return Err(Error::NotApplicable(format!(
            "{count} points in the fit window, at least 10 needed"
        )));
    }
    let tail = &series[series.len() - count..];
    if let Some(&(_, v)) = tail.iter().find(|p| !(p.1 > T::zero())) {
        return Err(domain("value", v.as_f64(), "positive values in the fit window"));
    }
    let m = T::from_count(count);
    let mt = tail.iter().fold(T::zero(), |s, p| s + p.0) / m;
    let my = tail.iter().fold(T::zero(), |s, p| s + p.1.ln()) / m;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for &(t, v) in tail {
        sxy = sxy + (t - mt) * (v.ln() - my);
        sxx = sxx + (t - mt) * (t - mt);
    }
    Ok(-(sxy / sxx))
}
