use proptest::prelude::*;

use smoluchowski::coefficients::{self, CoefficientModel, Coefficients};
use smoluchowski::hysteresis::reinforce_threshold;
use smoluchowski::solver::{self, first_moment, InitialCondition, SimulationParams};
use smoluchowski::vonmises::{self, Dimension};
use smoluchowski::{bifurcation, Stability};

fn models() -> impl Strategy<Value = CoefficientModel<f64>> {
    prop_oneof![
        (0.2f64..5.0).prop_map(|t| CoefficientModel::dipolar(t).unwrap()),
        Just(CoefficientModel::vicsek_vectorial()),
        (0.3f64..1.0, 2u32..4).prop_map(|(b, n)| CoefficientModel::sigma_family(b, Dimension::new(n).unwrap()).unwrap()),
    ]
}

fn dims() -> impl Strategy<Value = Dimension> {
    (2u32..5).prop_map(|n| Dimension::new(n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_inverts_h(model in models(), kappa in 1e-3f64..50.0) {
        let s = coefficients::sigma(&model, kappa).unwrap();
        let back = model.h(s).unwrap();
        prop_assert!((back - kappa).abs() <= 1e-9 * (1.0 + kappa));
    }

    #[test]
    fn sigma_is_increasing(model in models(), a in 1e-3f64..40.0, gap in 1e-2f64..10.0) {
        let lo = coefficients::sigma(&model, a).unwrap();
        let hi = coefficients::sigma(&model, a + gap).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn order_parameter_is_increasing_and_bounded(n in dims(), a in 1e-4f64..100.0, gap in 1e-3f64..10.0) {
        let lo = vonmises::order_parameter_c(a, n).unwrap();
        let hi = vonmises::order_parameter_c(a + gap, n).unwrap();
        prop_assert!(0.0 < lo && lo < hi && hi < 1.0);
        let back = vonmises::inverse_order_parameter(lo, n).unwrap();
        prop_assert!((back - a).abs() <= 1e-7 * (1.0 + a));
    }

    #[test]
    fn every_root_solves_the_compatibility_equation(model in models(), rho in 0.5f64..6.0) {
        let n = Dimension::TWO;
        let branch = bifurcation::solve_branches(rho, &model, n, 200.0).unwrap();
        for r in &branch.roots {
            let residual = bifurcation::compatibility_residual(rho, r.kappa, &model, n).unwrap();
            prop_assert!(residual.abs() <= 1e-7 * (1.0 + r.kappa));
            prop_assert!(r.kappa > 0.0 && r.c < 1.0 && r.stability != Stability::Marginal);
        }
    }

    #[test]
    fn custom_initial_data_is_rescaled(values in prop::collection::vec(0.0f64..5.0, 32), rho in 0.1f64..10.0) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let s = solver::project_initial(&InitialCondition::Custom { values }, rho, 32).unwrap();
        prop_assert!((s.mass() - rho).abs() <= 1e-12 * rho);
    }

    #[test]
    fn reinforcement_keeps_mass_and_floor(amp in 0.0f64..0.05, angle in -3.0f64..3.0, eps in 0.0f64..0.05) {
        let values: Vec<f64> = (0..100)
            .map(|i| 1.0 + amp * (2.0 * std::f64::consts::PI * i as f64 / 100.0 - angle).cos())
            .collect();
        let mut s = solver::project_initial(&InitialCondition::Custom { values }, 1.0, 100).unwrap();
        let before = s.clone();
        let j_before = first_moment(&s).abs_j;
        reinforce_threshold(&mut s, eps);
        prop_assert!((s.mass() - 1.0).abs() <= 1e-15 * 10.0);
        if before.linf_deviation() >= eps {
            prop_assert_eq!(s.f(), before.f());
        } else {
            prop_assert!(s.linf_deviation() <= eps + 1e-15);
        }
        prop_assert!(first_moment(&s).abs_j >= j_before - 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn mass_and_free_energy(
        rho in 0.3f64..4.0,
        amp in 0.0f64..1.0,
        mode in 1u32..4,
        model in models(),
    ) {
        let f0 = solver::project_initial(&InitialCondition::UniformPerturbed { amplitude: amp, mode }, rho, 64).unwrap();
        let params = SimulationParams { dt: 0.02, t_end: 4.0, cadence: 1 };
        let tr = solver::simulate(f0, &model, &params, |_| {}).unwrap();
        prop_assert!(tr.abort.is_none());
        for w in tr.samples.windows(2) {
            prop_assert!((w[1].mass - rho).abs() <= 1e-12 * rho);
            prop_assert!(w[1].free_energy <= w[0].free_energy + 1e-10);
            prop_assert!(w[1].abs_j <= w[1].mass * (1.0 + 1e-12));
        }
    }
}
