//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary (`harness = false`).

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use smoluchowski::bifurcation::{self, Stability};
use smoluchowski::coefficients::{self, CoefficientModel, FnModel};
use smoluchowski::hysteresis::{self, HysteresisParams};
use smoluchowski::poincare::{self, PoincareProblem};
use smoluchowski::rates;
use smoluchowski::solver::{self, InitialCondition, SimulationParams, SolverState};
use smoluchowski::vonmises::{self, Dimension};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// I_ν(x) for integer ν by its power series; every term is positive.
fn bessel_i(nu: u32, x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = (0..nu).fold(1.0, |t, k| t * (x / 2.0) / (k + 1) as f64);
    let mut sum = term;
    for k in 1..400 {
        term *= q / (k as f64 * (k + nu) as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

fn langevin(k: f64) -> f64 {
    1.0 / k.tanh() - 1.0 / k
}

fn order_parameter_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in geometric(1e-3, 50.0, 50) {
        let c2 = vonmises::order_parameter_c(k, Dimension::TWO).map_err(|e| e.to_string())?;
        let c3 = vonmises::order_parameter_c(k, Dimension::THREE).map_err(|e| e.to_string())?;
        let o2 = bessel_i(1, k) / bessel_i(0, k);
        // coth κ − 1/κ cancels catastrophically at small κ; use its series there
        let o3 = if k < 1e-2 {
            k / 3.0 - k.powi(3) / 45.0 + 2.0 * k.powi(5) / 945.0
        } else {
            langevin(k)
        };
        worst = worst.max(((c2 - o2) / o2).abs()).max(((c3 - o3) / o3).abs());
    }
    ensure(worst <= 1e-10, format!("max relative error {worst:.2e}"))
}

fn critical_values() -> Outcome {
    let v = CoefficientModel::<f64>::vicsek_vectorial();
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, rho_star, kappa_star) in [(Dimension::TWO, 1.3726, 1.2619), (Dimension::THREE, 1.8602, 1.9014)] {
        let rho_c = bifurcation::critical_density_rho_c(&v, n).map_err(|e| e.to_string())?;
        let fold = bifurcation::critical_density_rho_star(&v, n).map_err(|e| e.to_string())?;
        ok &= (rho_c - n.get() as f64).abs() <= 1e-12;
        ok &= (fold.rho_star - rho_star).abs() <= 1e-3;
        ok &= (fold.kappa_star - kappa_star).abs() <= 5e-3;
        parts.push(format!(
            "n={n}: rho_c={rho_c:.12} rho*={:.5} kappa*={:.5}",
            fold.rho_star, fold.kappa_star
        ));
    }
    ensure(ok, parts.join("; "))
}

fn branch_structure() -> Outcome {
    let v = CoefficientModel::<f64>::vicsek_vectorial();
    let n = Dimension::TWO;
    let solve = |rho| bifurcation::solve_branches(rho, &v, n, 200.0).map_err(|e| e.to_string());
    let fold = bifurcation::critical_density_rho_star(&v, n).map_err(|e| e.to_string())?;
    let low = solve(1.2)?;
    let mid = solve(1.5)?;
    let high = solve(3.0)?;
    let mid_ok = mid.roots.len() == 2
        && mid.roots[0].stability == Stability::Unstable
        && mid.roots[0].kappa < fold.kappa_star
        && mid.roots[1].stability == Stability::Stable
        && mid.roots[1].kappa > fold.kappa_star;
    let high_ok = high.roots.len() == 1 && high.roots[0].stability == Stability::Stable;
    let labels = |b: &smoluchowski::EquilibriumBranch<f64>| {
        b.roots
            .iter()
            .map(|r| format!("{:.4}:{}", r.kappa, r.stability))
            .collect::<Vec<_>>()
            .join(" ")
    };
    ensure(
        low.roots.is_empty() && mid_ok && high_ok,
        format!(
            "rho=1.2 [{}] rho=1.5 [{}] rho=3 [{}]",
            labels(&low),
            labels(&mid),
            labels(&high)
        ),
    )
}

fn critical_exponent() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [Dimension::TWO, Dimension::THREE] {
        for tau0 in [0.5f64, 1.0, 2.0] {
            let m = CoefficientModel::dipolar(tau0).map_err(|e| e.to_string())?;
            let beta = bifurcation::critical_exponent(&m, n).map_err(|e| e.to_string())?;
            ok &= (beta - 0.5).abs() <= 0.03 && beta <= 1.03;
            parts.push(format!("dipolar(tau0={tau0}, n={n})={beta:.4}"));
        }
        let m = CoefficientModel::sigma_family(0.75f64, n).map_err(|e| e.to_string())?;
        let beta = bifurcation::critical_exponent(&m, n).map_err(|e| e.to_string())?;
        ok &= (beta - 0.75).abs() <= 0.03 && beta <= 1.03;
        parts.push(format!("sigma(0.75, n={n})={beta:.4}"));
    }
    ensure(ok, parts.join(" "))
}

/// ∫ f ln f over the sphere for f = ρ M_κ, by direct quadrature.
fn entropy_quadrature(rho: f64, kappa: f64, n: Dimension) -> f64 {
    if n == Dimension::TWO {
        let m = 4000;
        let log_z = bessel_i(0, kappa).ln();
        (0..m)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / m as f64;
                let log_f = rho.ln() + kappa * th.cos() - log_z;
                log_f.exp() * log_f
            })
            .sum::<f64>()
            / m as f64
    } else {
        // u = cos θ with the normalized measure du/2 and Z = sinh κ / κ
        let log_z = kappa + (-(-2.0 * kappa).exp()).ln_1p() - (2.0 * kappa).ln();
        let m = 20000;
        let h = 2.0 / m as f64;
        let g = |u: f64| {
            let log_f = rho.ln() + kappa * u - log_z;
            0.5 * log_f.exp() * log_f
        };
        let mut s = g(-1.0) + g(1.0);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(-1.0 + i as f64 * h);
        }
        s * h / 3.0
    }
}

fn rate_formula_equivalence() -> Outcome {
    let v = CoefficientModel::<f64>::vicsek_vectorial();
    let generic = FnModel::new(|j: f64| j, |j: f64| 1.0 / (1.0 + j));
    let (mut rate_err, mut closed_err, mut quad_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut count = 0;
    for n in [Dimension::TWO, Dimension::THREE] {
        let fold = bifurcation::critical_density_rho_star(&v, n).map_err(|e| e.to_string())?;
        for kappa in geometric(1.5 * fold.kappa_star, 40.0, 25) {
            let c = vonmises::order_parameter_c(kappa, n).map_err(|e| e.to_string())?;
            let rho = coefficients::sigma(&v, kappa).map_err(|e| e.to_string())? / c;
            let problem = PoincareProblem::new(kappa, n, 1000).map_err(|e| e.to_string())?;
            let lambda = poincare::eigenpair(&problem).lambda;
            let a = rates::rate_vonmises(rho, kappa, &v, n, lambda).map_err(|e| e.to_string())?;
            let b = rates::rate_vonmises_vicsek_closed_form(kappa, n, lambda).map_err(|e| e.to_string())?;
            rate_err = rate_err.max(((a - b) / b).abs());
            let quad = vonmises::free_energy_vonmises(rho, kappa, &generic, n).map_err(|e| e.to_string())?;
            let closed = vonmises::free_energy_vicsek_closed_form(rho, kappa, n).map_err(|e| e.to_string())?;
            closed_err = closed_err.max((quad - closed).abs());
            let j = rho * c;
            let direct = entropy_quadrature(rho, kappa, n) - (j * j / 2.0 + j * j * j / 3.0);
            quad_err = quad_err.max((direct - closed).abs());
            count += 1;
        }
    }
    ensure(
        count == 50 && rate_err <= 1e-8 && closed_err <= 1e-8 && quad_err <= 1e-8,
        format!(
            "{count} points: rate rel {rate_err:.2e}, free energy generic {closed_err:.2e}, direct quadrature {quad_err:.2e}"
        ),
    )
}

fn poincare_constant() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [Dimension::TWO, Dimension::THREE] {
        let p = PoincareProblem::new(0.0, n, 4000).map_err(|e| e.to_string())?;
        let l0 = poincare::eigenpair(&p).lambda;
        let err = (l0 - (n.get() - 1) as f64).abs();
        ok &= err <= 1e-6;
        parts.push(format!("n={n} Lambda0 err {err:.1e}"));
        let mut worst: f64 = 0.0;
        for kappa in [0.5f64, 1.0, 2.0, 5.0] {
            let coarse = poincare::eigenpair(&PoincareProblem::new(kappa, n, 2000).map_err(|e| e.to_string())?).lambda;
            let fine = poincare::eigenpair(&PoincareProblem::new(kappa, n, 4000).map_err(|e| e.to_string())?).lambda;
            worst = worst.max(((coarse - fine) / fine).abs());
        }
        ok &= worst < 5e-4;
        parts.push(format!("n={n} 2000/4000 rel change {worst:.1e}"));
    }
    ensure(ok, parts.join("; "))
}

fn conservation_dissipation() -> Outcome {
    let v = CoefficientModel::<f64>::vicsek_vectorial();
    let n = 100;
    let custom: Vec<f64> = (0..n)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / n as f64;
            0.2 + (3.0 * th).sin().powi(2) + 2.0 * (-8.0 * (th - 2.0).powi(2)).exp()
        })
        .collect();
    let starts = [
        (1.5, InitialCondition::UniformPerturbed { amplitude: 0.6, mode: 1 }),
        (2.5, InitialCondition::VonMises { kappa: 0.7, angle: 1.0 }),
        (3.0, InitialCondition::Custom { values: custom }),
    ];
    let params = SimulationParams { dt: 0.01, t_end: 100.0, cadence: 1 };
    let (mut drift, mut rise): (f64, f64) = (0.0, f64::NEG_INFINITY);
    for (rho, init) in &starts {
        let f0 = solver::project_initial(init, *rho, n).map_err(|e| e.to_string())?;
        let tr = solver::simulate(f0, &v, &params, |_| {}).map_err(|e| e.to_string())?;
        if let Some(a) = tr.abort {
            return Err(format!("aborted at t={}: {}", a.t, a.reason));
        }
        if tr.samples.len() != 10_001 {
            return Err(format!("{} samples", tr.samples.len()));
        }
        let m0 = tr.samples[0].mass;
        for w in tr.samples.windows(2) {
            drift = drift.max((w[1].mass - m0).abs() / rho);
            rise = rise.max(w[1].free_energy - w[0].free_energy);
        }
    }
    ensure(
        drift <= 1e-12 && rise <= 1e-10,
        format!("3 runs x 1e4 steps: mass drift {drift:.1e} rho, max free energy increase {rise:.1e}"),
    )
}

fn decay_series(rho: f64, grid: usize, dt: f64, t_end: f64) -> Result<Vec<(f64, f64)>, String> {
    let v = CoefficientModel::<f64>::vicsek_vectorial();
    let mut s = solver::project_initial(&InitialCondition::UniformPerturbed { amplitude: 1e-3, mode: 1 }, rho, grid)
        .map_err(|e| e.to_string())?;
    let steps = (t_end / dt).round() as usize;
    let every = (0.1 / dt).round() as usize;
    let mut series = vec![(0.0, s.l2_deviation())];
    for k in 1..=steps {
        s = solver::step(&s, dt, &v).map_err(|e| e.to_string())?;
        if k % every == 0 {
            series.push((s.t(), s.l2_deviation()));
        }
    }
    Ok(series)
}

fn rate_reproduction() -> Outcome {
    let coarse = solver::measure_decay_rate(&decay_series(1.0, 100, 0.01, 20.0)?, 0.5).map_err(|e| e.to_string())?;
    let fine = solver::measure_decay_rate(&decay_series(1.0, 200, 0.005, 20.0)?, 0.5).map_err(|e| e.to_string())?;
    let v = CoefficientModel::<f64>::vicsek_vectorial();
    let f0 = solver::project_initial(&InitialCondition::UniformPerturbed { amplitude: 0.3, mode: 1 }, 3.0, 100)
        .map_err(|e| e.to_string())?;
    let tr = solver::simulate(f0, &v, &SimulationParams { dt: 0.01, t_end: 100.0, cadence: 1000 }, |_| {})
        .map_err(|e| e.to_string())?;
    let branch = bifurcation::solve_branches(3.0, &v, Dimension::TWO, 200.0).map_err(|e| e.to_string())?;
    let target = 3.0 * branch.largest_stable().ok_or("no stable root at rho=3")?.c;
    let abs_j = tr.samples.last().ok_or("empty trajectory")?.abs_j;
    ensure(
        (coarse - 0.5).abs() <= 0.025
            && (fine - 0.5).abs() <= 0.005
            && ((fine - coarse) / coarse).abs() < 0.01
            && (abs_j - target).abs() <= 1e-3,
        format!(
            "rate {coarse:.5} (refined {fine:.5}); rho=3 |J|={abs_j:.8} vs rho c(kappa)={target:.8}"
        ),
    )
}

fn critical_slowdown() -> Outcome {
    let d = CoefficientModel::dipolar(1.0).map_err(|e| e.to_string())?;
    let rho_c = bifurcation::critical_density_rho_c(&d, Dimension::TWO).map_err(|e| e.to_string())?;
    let mut s: SolverState<f64> =
        solver::project_initial(&InitialCondition::UniformPerturbed { amplitude: 0.5, mode: 1 }, rho_c, 100)
            .map_err(|e| e.to_string())?;
    let mut products = Vec::new();
    for k in 1..=10_000 {
        s = solver::step(&s, 0.01, &d).map_err(|e| e.to_string())?;
        if k % 100 == 0 && k >= 1000 {
            products.push(s.linf_deviation() * s.t().sqrt());
        }
    }
    let mut sorted = products.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    ensure(
        hi <= 2.0 * median && lo >= median / 2.0,
        format!("rho=rho_c={rho_c}: product in [{lo:.4}, {hi:.4}], median {median:.4}"),
    )
}

fn hysteresis_loop() -> Outcome {
    let v = CoefficientModel::<f64>::vicsek_vectorial();
    let params = HysteresisParams::default();
    let run = hysteresis::run_hysteresis(&params, &v).map_err(|e| e.to_string())?;
    let up = run.jumps.up_jump_rho.ok_or("no up-jump")?;
    let down = run.jumps.down_jump_rho.ok_or("no down-jump")?;
    let rho_star = run.overlay.rho_star;
    let rho_c = run.overlay.rho_c.ok_or("no rho_c")?;

    let rising: Vec<_> = run.rising().copied().collect();
    let rising_c_at = |rho: f64| {
        rising.windows(2).find(|w| w[0].rho <= rho && rho <= w[1].rho).map(|w| {
            let s = (rho - w[0].rho) / (w[1].rho - w[0].rho);
            w[0].c + s * (w[1].c - w[0].c)
        })
    };
    let mut oriented = true;
    let mut gap = f64::INFINITY;
    for s in run.falling().filter(|s| s.rho > rho_star + 0.1 && s.rho < rho_c - 0.1) {
        let below = rising_c_at(s.rho).ok_or("rising sweep does not cover the window")?;
        oriented &= s.c > below;
        gap = gap.min(s.c - below);
    }
    let mut branch_err: f64 = 0.0;
    for s in run.falling().filter(|s| s.rho > 1.45 && s.rho < 1.95).step_by(5) {
        let b = bifurcation::solve_branches(s.rho, &v, Dimension::TWO, 200.0).map_err(|e| e.to_string())?;
        let c = b.largest_stable().ok_or("no stable branch")?.c;
        branch_err = branch_err.max((s.c - c).abs());
    }
    ensure(
        oriented && (1.95..=2.3).contains(&up) && (1.25..=1.45).contains(&down) && branch_err <= 0.02,
        format!(
            "up-jump rho={up:.4}, down-jump rho={down:.4}, min falling-rising gap {gap:.3}, falling branch error {branch_err:.4}"
        ),
    )
}

fn zero_flux() -> Outcome {
    let v = CoefficientModel::<f64>::vicsek_vectorial();
    let (rho, a, dt, n) = (3.0, 0.5, 0.01, 100);
    let f0 = solver::project_initial(&InitialCondition::UniformPerturbed { amplitude: a, mode: 2 }, rho, n)
        .map_err(|e| e.to_string())?;
    let tr = solver::simulate(f0, &v, &SimulationParams { dt, t_end: 10.0, cadence: 1 }, |_| {})
        .map_err(|e| e.to_string())?;
    let max_j = tr.samples.iter().fold(0.0f64, |m, d| m.max(d.abs_j));
    let h = 2.0 * PI / n as f64;
    let eig = 2.0 / (h * h) * (1.0 - (2.0 * h).cos());
    let factor = (1.0 + dt * eig).powi(-1000);
    let fs = &tr.final_state;
    let heat_err = fs
        .theta()
        .iter()
        .zip(fs.f())
        .fold(0.0f64, |m, (&th, &f)| m.max((f - rho * (1.0 + a * factor * (2.0 * th).cos())).abs()));
    let dev = fs.linf_deviation();
    ensure(
        max_j <= 1e-12 * rho && heat_err <= 1e-8 && dev <= 1e-8 * rho,
        format!("rho=3: max |J| {max_j:.1e}, deviation at t=10 {dev:.1e}, error vs discrete heat {heat_err:.1e}"),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "order-parameter oracle", budget: Duration::from_secs(1), run: order_parameter_oracle },
        Criterion { id: 2, name: "critical values", budget: Duration::from_secs(5), run: critical_values },
        Criterion { id: 3, name: "branch structure", budget: Duration::from_secs(1), run: branch_structure },
        Criterion { id: 4, name: "critical exponent", budget: Duration::from_secs(10), run: critical_exponent },
        Criterion { id: 5, name: "rate-formula equivalence", budget: Duration::from_secs(10), run: rate_formula_equivalence },
        Criterion { id: 6, name: "Poincare constant", budget: Duration::from_secs(30), run: poincare_constant },
        Criterion { id: 7, name: "conservation and dissipation", budget: Duration::from_secs(10), run: conservation_dissipation },
        Criterion { id: 8, name: "rate reproduction", budget: Duration::from_secs(60), run: rate_reproduction },
        Criterion { id: 9, name: "critical slowdown", budget: Duration::from_secs(60), run: critical_slowdown },
        Criterion { id: 10, name: "hysteresis loop", budget: Duration::from_secs(120), run: hysteresis_loop },
        Criterion { id: 11, name: "zero-flux invariant", budget: Duration::from_secs(10), run: zero_flux },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget of {:?}", c.budget)),
            Err(d) => (false, d),
        };
        failures += usize::from(!pass);
        println!(
            "{} {:>2} {:<30} {:>9.3}s  {}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            detail
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
