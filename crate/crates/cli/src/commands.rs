use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use smoluchowski::bifurcation::{self, CriticalValues, DEFAULT_KAPPA_SEARCH_MAX};
use smoluchowski::export::{self, Table};
use smoluchowski::hysteresis::{self, HysteresisParams, HysteresisRun, Jumps, Overlay};
use smoluchowski::poincare::{self, PoincareProblem, PoincareTable};
use smoluchowski::solver::{self, InitialCondition, SimulationParams};
use smoluchowski::{rates, CoefficientModel, Dimension};

use crate::config::RunConfig;
use crate::{Command, Common, Format, GridArgs, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Options shared by every subcommand after merging flags over the config file.
struct Session {
    model: CoefficientModel<f64>,
    dim: Dimension,
    out: Option<PathBuf>,
    format: Format,
}

impl Session {
    fn new(common: &Common, cfg: &RunConfig) -> Result<Self> {
        let kind = common
            .model
            .clone()
            .or_else(|| cfg.model.kind.clone())
            .unwrap_or_else(|| "vicsek-vectorial".into());
        let dim = Dimension::new(common.dim.or(cfg.model.dim).unwrap_or(2))?;
        let model = CoefficientModel::from_config(
            &kind,
            common.tau0.or(cfg.model.tau0),
            common.beta.or(cfg.model.beta),
            dim,
        )?;
        let format = match (common.format, cfg.output.format.as_deref()) {
            (Some(f), _) => f,
            (None, None) | (None, Some("csv")) => Format::Csv,
            (None, Some("json")) => Format::Json,
            (None, Some(other)) => return Err(usage(format!("unknown output format {other:?}"))),
        };
        Ok(Self {
            model,
            dim,
            out: common.out.clone().or_else(|| cfg.output.path.clone()),
            format,
        })
    }

    fn write(&self, body: &str) -> Result<()> {
        match &self.out {
            Some(path) => write_file(path, body),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(body.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    }

    /// Writes the main table in the selected format, or `record` as JSON.
    fn emit<R: Serialize>(&self, table: Table, record: &R) -> Result<()> {
        match self.format {
            Format::Csv => self.write(&table.to_csv()),
            Format::Json => self.write(&json(record)?),
        }
    }

    /// Path of a companion file next to `--out`, e.g. `run.csv` → `run.summary.json`.
    fn sidecar(&self, suffix: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|p| p.with_extension(suffix))
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn json<R: Serialize>(record: &R) -> Result<String> {
    let mut s = serde_json::to_string_pretty(record)?;
    s.push('\n');
    Ok(s)
}

fn linear_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(usage("a grid needs at least 2 points"));
    }
    if !(lo < hi) {
        return Err(usage(format!("empty grid range [{lo}, {hi}]")));
    }
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

fn c_grid(args: &GridArgs, file: &crate::config::GridSection) -> Result<Vec<f64>> {
    let lo = args.c_min.or(file.c_min).unwrap_or(0.005);
    let hi = args.c_max.or(file.c_max).unwrap_or(0.99);
    if !(lo > 0.0 && hi < 1.0) {
        return Err(usage("the c grid must lie inside (0, 1)"));
    }
    linear_grid(lo, hi, args.points.or(file.points).unwrap_or(100))
}

fn parse_init(text: &str, grid: usize) -> Result<InitialCondition<f64>> {
    let mut parts = text.splitn(2, ':');
    let kind = parts.next().unwrap_or_default();
    let rest = parts.next().unwrap_or_default();
    let numbers = || -> Result<Vec<f64>> {
        rest.split(':')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| usage(format!("bad number {s:?} in --init"))))
            .collect()
    };
    match kind {
        "uniform" | "uniform-perturbed" => {
            let v = numbers()?;
            let mode = match v.get(1) {
                Some(&m) if m >= 0.0 && m.fract() == 0.0 => m as u32,
                Some(&m) => return Err(usage(format!("mode {m} is not a nonnegative integer"))),
                None => 1,
            };
            Ok(InitialCondition::UniformPerturbed {
                amplitude: v.first().copied().unwrap_or(0.0),
                mode,
            })
        }
        "vonmises" => {
            let v = numbers()?;
            Ok(InitialCondition::VonMises {
                kappa: *v.first().ok_or_else(|| usage("vonmises needs a concentration"))?,
                angle: v.get(1).copied().unwrap_or(0.0),
            })
        }
        "custom" => {
            let text = std::fs::read_to_string(rest).with_context(|| format!("reading {rest}"))?;
            // one value per line, or CSV whose last column holds the values; headers are skipped
            let values: Vec<f64> = text
                .lines()
                .filter_map(|l| l.rsplit(',').next()?.trim().parse().ok())
                .collect();
            if values.len() != grid {
                return Err(usage(format!(
                    "{rest} holds {} values but the grid has {grid} nodes",
                    values.len()
                )));
            }
            Ok(InitialCondition::Custom { values })
        }
        other => Err(usage(format!("unknown initial condition {other:?}"))),
    }
}

#[derive(Serialize)]
struct HysteresisSummary {
    params: HysteresisParams<f64>,
    threshold: f64,
    jumps: Jumps<f64>,
    overlay: Overlay<f64>,
}

#[derive(Serialize)]
struct PoincareOutput {
    mesh_check: bool,
    #[serde(flatten)]
    table: PoincareTable<f64>,
}

pub fn run(common: &Common, command: &Command) -> Result<()> {
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ctx = Session::new(common, &cfg)?;
    match command {
        Command::Equilibria { rho, kappa_max } => {
            let rho = rho
                .or(cfg.equilibria.rho)
                .ok_or_else(|| usage("equilibria needs --rho"))?;
            let kappa_max = kappa_max.or(cfg.equilibria.kappa_max).unwrap_or(DEFAULT_KAPPA_SEARCH_MAX);
            let branch = bifurcation::solve_branches(rho, &ctx.model, ctx.dim, kappa_max)?;
            if branch.clipped {
                eprintln!("warning: roots may exist beyond kappa = {kappa_max}");
            }
            ctx.emit(export::branches_table(&branch), &branch)
        }
        Command::PhaseDiagram(args) => {
            let grid = c_grid(args, &cfg.phase_diagram)?;
            let diagram = bifurcation::phase_diagram(&ctx.model, ctx.dim, &grid)?;
            if let Some(path) = ctx.sidecar("critical.json") {
                write_file(&path, &json::<CriticalValues<f64>>(&diagram.critical)?)?;
            }
            ctx.emit(export::phase_diagram_table(&diagram), &diagram)
        }
        Command::Energy(args) => {
            let grid = c_grid(args, &cfg.energy)?;
            let diagram = bifurcation::energy_diagram(&ctx.model, ctx.dim, &grid)?;
            ctx.emit(export::energy_table(&diagram), &diagram)
        }
        Command::Rates { rho_min, rho_max, points } => {
            let grid = linear_grid(
                rho_min.or(cfg.rates.rho_min).unwrap_or(0.1),
                rho_max.or(cfg.rates.rho_max).unwrap_or(4.0),
                points.or(cfg.rates.points).unwrap_or(40),
            )?;
            let diagram = rates::rate_diagram(&ctx.model, ctx.dim, &grid)?;
            ctx.emit(export::rates_table(&diagram), &diagram)
        }
        Command::Poincare {
            kappa,
            kappa_max,
            points,
            mesh,
            no_mesh_check,
        } => {
            let file = &cfg.poincare;
            let grid = match kappa.clone().or_else(|| file.kappa.clone()) {
                Some(list) => list,
                None => linear_grid(
                    0.0,
                    kappa_max.or(file.kappa_max).unwrap_or(10.0),
                    points.or(file.points).unwrap_or(21),
                )?,
            };
            if let Some(k) = grid.iter().find(|k| !(**k >= 0.0)) {
                return Err(usage(format!("kappa = {k} must be nonnegative")));
            }
            let mesh = mesh.or(file.mesh).unwrap_or(poincare::DEFAULT_MESH);
            let mesh_check = !no_mesh_check && file.mesh_check.unwrap_or(true);
            let table = if mesh_check {
                poincare::poincare_table(&grid, ctx.dim, mesh)?
            } else {
                let lambda = grid
                    .iter()
                    .map(|&k| Ok(poincare::eigenpair(&PoincareProblem::new(k, ctx.dim, mesh)?).lambda))
                    .collect::<Result<Vec<_>>>()?;
                PoincareTable {
                    n: ctx.dim,
                    mesh_size: mesh,
                    kappa: grid,
                    lambda,
                }
            };
            ctx.emit(export::poincare_table(&table), &PoincareOutput { mesh_check, table: table.clone() })
        }
        Command::Simulate {
            rho,
            grid,
            dt,
            tend,
            init,
            cadence,
        } => {
            if ctx.dim != Dimension::TWO {
                return Err(usage("simulate supports only the circle (--dim 2)"));
            }
            let file = &cfg.simulate;
            let grid = grid.or(file.grid).unwrap_or(solver::DEFAULT_GRID);
            let init = init
                .clone()
                .or_else(|| file.init.clone())
                .unwrap_or_else(|| "uniform-perturbed:0.001:1".into());
            let f0 = solver::project_initial(&parse_init(&init, grid)?, rho.or(file.rho).unwrap_or(1.0), grid)?;
            let params = SimulationParams {
                dt: dt.or(file.dt).unwrap_or(solver::DEFAULT_DT),
                t_end: tend.or(file.tend).unwrap_or(20.0),
                cadence: cadence.or(file.cadence).unwrap_or(10),
            };
            let trajectory = solver::simulate(f0, &ctx.model, &params, |_| {})?;
            if let Some(path) = ctx.sidecar("final.csv") {
                write_file(&path, &export::state_table(&trajectory.final_state).to_csv())?;
            }
            ctx.emit(export::trajectory_table(&trajectory.samples), &trajectory)?;
            if let Some(abort) = &trajectory.abort {
                bail!("simulation aborted at t = {}: {}", abort.t, abort.reason);
            }
            Ok(())
        }
        Command::Hysteresis {
            period,
            eps,
            rho_mean,
            rho_amp,
            grid,
            dt,
            cycles,
            sample_every,
            threshold,
        } => {
            if ctx.dim != Dimension::TWO {
                return Err(usage("hysteresis supports only the circle (--dim 2)"));
            }
            let file = &cfg.hysteresis;
            let d = HysteresisParams::<f64>::default();
            let params = HysteresisParams {
                rho_mean: rho_mean.or(file.rho_mean).unwrap_or(d.rho_mean),
                rho_amp: rho_amp.or(file.rho_amp).unwrap_or(d.rho_amp),
                period: period.or(file.period).unwrap_or(d.period),
                epsilon: eps.or(file.eps).unwrap_or(d.epsilon),
                grid: grid.or(file.grid).unwrap_or(d.grid),
                dt: dt.or(file.dt).unwrap_or(d.dt),
                cycles: cycles.or(file.cycles).unwrap_or(d.cycles),
                sample_every: sample_every.or(file.sample_every).unwrap_or(d.sample_every),
            };
            let threshold = threshold
                .or(file.threshold)
                .unwrap_or(hysteresis::DEFAULT_JUMP_THRESHOLD);
            let mut run: HysteresisRun<f64> = hysteresis::run_hysteresis(&params, &ctx.model)?;
            run.jumps = hysteresis::detect_jumps(&run, threshold);
            let summary = HysteresisSummary {
                params,
                threshold,
                jumps: run.jumps,
                overlay: run.overlay,
            };
            match ctx.sidecar("summary.json") {
                Some(path) => write_file(&path, &json(&summary)?)?,
                None if ctx.format == Format::Csv => eprint!("{}", json(&summary)?),
                None => {}
            }
            ctx.emit(export::hysteresis_table(&run), &run)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_strings() {
        assert_eq!(
            parse_init("uniform-perturbed:0.5:2", 10).unwrap(),
            InitialCondition::UniformPerturbed { amplitude: 0.5, mode: 2 }
        );
        assert_eq!(
            parse_init("vonmises:1.5", 10).unwrap(),
            InitialCondition::VonMises { kappa: 1.5, angle: 0.0 }
        );
        assert!(parse_init("gaussian:1", 10).is_err());
        assert!(parse_init("uniform:0.1:1.5", 10).is_err());
        assert!(parse_init("vonmises", 10).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(linear_grid(0.0, 1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(linear_grid(1.0, 1.0, 3).is_err());
        assert!(linear_grid(0.0, 1.0, 1).is_err());
    }
}
