//! Slow periodic sweeps of the density through the bistable window.
//!
//! The run integrates the equation for the probability density f̃ = f/ρ with
//! ρ = ρ̄ − a cos(πt/T), so the coefficients are evaluated at ρ(t)|J_f̃|.
//! Near the uniform state a tiny floor on the deviation keeps J_f̃ from
//! collapsing to round-off, which would otherwise pin the dynamics on the
//! uniform branch forever: whenever ‖f̃ − 1‖∞ drops below ε the mode
//! cos(θ − φ) is added with the missing amplitude.

use serde::{Deserialize, Serialize};

use crate::bifurcation;
use crate::coefficients::Coefficients;
use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;
use crate::solver::{self, effective_moment, first_moment, InitialCondition, SolverState};
use crate::vonmises::{self, Dimension};

pub const DEFAULT_JUMP_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HysteresisParams<T> {
    pub rho_mean: T,
    pub rho_amp: T,
    pub period: T,
    pub epsilon: T,
    pub grid: usize,
    pub dt: T,
    pub cycles: u32,
    /// Steps between recorded samples.
    pub sample_every: usize,
}

impl<T: Scalar> Default for HysteresisParams<T> {
    fn default() -> Self {
        Self {
            rho_mean: T::lit(1.75),
            rho_amp: T::lit(0.75),
            period: T::lit(500.0),
            epsilon: T::lit(0.02),
            grid: solver::DEFAULT_GRID,
            dt: T::lit(solver::DEFAULT_DT),
            cycles: 1,
            sample_every: 10,
        }
    }
}

impl<T: Scalar> HysteresisParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_amp >= T::zero()) {
            return Err(domain("rho_amp", self.rho_amp.as_f64(), "rho_amp >= 0"));
        }
        if !(self.rho_mean - self.rho_amp > T::zero()) {
            return Err(domain(
                "rho_mean",
                self.rho_mean.as_f64(),
                "rho_mean - rho_amp > 0",
            ));
        }
        if !(self.period > T::zero()) {
            return Err(domain("period", self.period.as_f64(), "period > 0"));
        }
        if !(self.epsilon >= T::zero() && self.epsilon < T::one()) {
            return Err(domain("epsilon", self.epsilon.as_f64(), "0 <= epsilon < 1"));
        }
        if self.grid < 3 {
            return Err(domain("grid", self.grid as f64, "grid >= 3"));
        }
        if !(self.dt > T::zero()) {
            return Err(domain("dt", self.dt.as_f64(), "dt > 0"));
        }
        if self.cycles == 0 {
            return Err(domain("cycles", 0.0, "cycles >= 1"));
        }
        if self.sample_every == 0 {
            return Err(domain("sample_every", 0.0, "sample_every >= 1"));
        }
        Ok(())
    }

    /// One cycle is a full period of the schedule, 2T.
    pub fn duration(&self) -> T {
        T::lit(2.0) * self.period * T::from_count(self.cycles as usize)
    }

    pub fn steps(&self) -> usize {
        (self.duration() / self.dt).round().to_usize().unwrap_or(0)
    }
}

/// ρ(t) = ρ̄ − a cos(πt/T).
pub fn rho_schedule<T: Scalar>(t: T, params: &HysteresisParams<T>) -> T {
    params.rho_mean - params.rho_amp * (T::PI() * t / params.period).cos()
}

fn is_rising<T: Scalar>(t: T, params: &HysteresisParams<T>) -> bool {
    (T::PI() * t / params.period).sin() > T::zero()
}

/// Tops the deviation of a unit-mass density up to ε along cos(θ − φ),
/// φ the direction of J (angle 0 when J vanishes).
pub fn reinforce_threshold<T: Scalar>(state: &mut SolverState<T>, epsilon: T) {
    let m = effective_moment(state);
    let deviation = state
        .f()
        .iter()
        .fold(T::zero(), |d, &v| d.max((v - T::one()).abs()));
    let missing = epsilon - deviation;
    if !(missing > T::zero()) {
        return;
    }
    let phi = m.omega.map_or(T::zero(), |[x, y]| y.atan2(x));
    let theta = state.theta().to_vec();
    for (v, th) in state.values_mut().iter_mut().zip(theta) {
        *v = *v + missing * (th - phi).cos();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample<T> {
    pub t: T,
    pub rho: T,
    pub c: T,
}

/// Theoretical landmarks of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlay<T> {
    pub rho_star: T,
    pub rho_c: Option<T>,
    pub c_star: T,
    /// Order parameter on the stable aligned branch at ρ_c, absent when
    /// there is none.
    pub c_c: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jumps<T> {
    pub up_jump_rho: Option<T>,
    pub down_jump_rho: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HysteresisRun<T> {
    pub params: HysteresisParams<T>,
    pub samples: Vec<Sample<T>>,
    pub jumps: Jumps<T>,
    pub overlay: Overlay<T>,
}

impl<T: Scalar> HysteresisRun<T> {
    /// Samples recorded while ρ was increasing.
    pub fn rising(&self) -> impl Iterator<Item = &Sample<T>> {
        self.samples.iter().filter(|s| is_rising(s.t, &self.params))
    }

    /// Samples recorded while ρ was decreasing.
    pub fn falling(&self) -> impl Iterator<Item = &Sample<T>> {
        self.samples
            .iter()
            .filter(|s| s.t > T::zero() && !is_rising(s.t, &self.params))
    }
}

pub fn overlay<T, M>(model: &M) -> Result<Overlay<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    let n = Dimension::TWO;
    let fold = bifurcation::critical_density_rho_star(model, n)?;
    let rho_c = bifurcation::critical_density_rho_c(model, n)?;
    let c_c = if rho_c.is_finite() {
        bifurcation::solve_branches(rho_c, model, n, T::lit(bifurcation::DEFAULT_KAPPA_SEARCH_MAX))?
            .largest_stable()
            .map(|r| r.c)
    } else {
        None
    };
    Ok(Overlay {
        rho_star: fold.rho_star,
        rho_c: rho_c.is_finite().then_some(rho_c),
        c_star: vonmises::order_parameter_c(fold.kappa_star, n)?,
        c_c,
    })
}

/// Integrates the sweep from uniform plus (ε/2)cos θ.
pub fn run_hysteresis<T, M>(params: &HysteresisParams<T>, model: &M) -> Result<HysteresisRun<T>>
where
    T: Scalar,
    M: Coefficients<T> + ?Sized,
{
    params.validate()?;
    let half = T::lit(0.5);
    let mut state = solver::project_initial(
        &InitialCondition::UniformPerturbed {
            amplitude: params.epsilon * half,
            mode: 1,
        },
        T::one(),
        params.grid,
    )?;
    let sample = |s: &SolverState<T>| Sample {
        t: s.t(),
        rho: rho_schedule(s.t(), params),
        c: first_moment(s).abs_j,
    };
    let steps = params.steps();
    let mut samples = Vec::with_capacity(steps / params.sample_every + 2);
    samples.push(sample(&state));
    for k in 1..=steps {
        let rho = rho_schedule(state.t() + params.dt * half, params);
        state = solver::step_scaled(&state, params.dt, model, rho)?;
        reinforce_threshold(&mut state, params.epsilon);
        if let Some(reason) = solver::admissibility(&state) {
            return Err(Error::Solver {
                t: state.t().as_f64(),
                reason,
            });
        }
        if k % params.sample_every == 0 || k == steps {
            samples.push(sample(&state));
        }
    }
    let mut run = HysteresisRun {
        params: *params,
        samples,
        jumps: Jumps {
            up_jump_rho: None,
            down_jump_rho: None,
        },
        overlay: overlay(model)?,
    };
    run.jumps = detect_jumps(&run, T::lit(DEFAULT_JUMP_THRESHOLD));
    Ok(run)
}

/// First upward crossing of `threshold` on a rising sweep and first downward
/// crossing on a falling sweep, with ρ linearly interpolated between samples.
pub fn detect_jumps<T: Scalar>(run: &HysteresisRun<T>, threshold: T) -> Jumps<T> {
    let mut jumps = Jumps {
        up_jump_rho: None,
        down_jump_rho: None,
    };
    let half = T::lit(0.5);
    for w in run.samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        let rising = is_rising((a.t + b.t) * half, &run.params);
        let crossing = || {
            let s = (threshold - a.c) / (b.c - a.c);
            a.rho + s * (b.rho - a.rho)
        };
        if rising && jumps.up_jump_rho.is_none() && a.c < threshold && b.c >= threshold {
            jumps.up_jump_rho = Some(crossing());
        }
        if !rising && jumps.down_jump_rho.is_none() && a.c >= threshold && b.c < threshold {
            jumps.down_jump_rho = Some(crossing());
        }
    }
    jumps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientModel;

    #[test]
    fn schedule_examples() {
        let p = HysteresisParams::<f64>::default();
        assert!((rho_schedule(0.0, &p) - 1.0).abs() < 1e-15);
        assert!((rho_schedule(500.0, &p) - 2.5).abs() < 1e-15);
        assert!((rho_schedule(1000.0, &p) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reinforcement_examples() {
        let mut s = solver::project_initial(
            &InitialCondition::UniformPerturbed { amplitude: 0.0f64, mode: 1 },
            1.0,
            100,
        )
        .unwrap();
        reinforce_threshold(&mut s, 0.02);
        for (&v, &th) in s.f().iter().zip(s.theta()) {
            assert!((v - (1.0 + 0.02 * th.cos())).abs() < 1e-15);
        }
        assert!((s.mass() - 1.0).abs() < 1e-15);
        let mut big = solver::project_initial(
            &InitialCondition::UniformPerturbed { amplitude: 0.05f64, mode: 3 },
            1.0,
            100,
        )
        .unwrap();
        let before = big.clone();
        reinforce_threshold(&mut big, 0.02);
        assert_eq!(big, before);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let p = HysteresisParams::<f64> { rho_amp: 2.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = HysteresisParams::<f64> { epsilon: 1.0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn constant_subcritical_density_has_no_jumps() {
        let v = CoefficientModel::<f64>::vicsek_vectorial();
        let p = HysteresisParams {
            rho_mean: 1.0,
            rho_amp: 0.0,
            period: 10.0,
            ..Default::default()
        };
        let run = run_hysteresis(&p, &v).unwrap();
        assert!(run.samples.iter().all(|s| s.c <= 2.0 * p.epsilon));
        assert_eq!(run.jumps, Jumps { up_jump_rho: None, down_jump_rho: None });
    }
}
