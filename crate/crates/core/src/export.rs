//! Plot-ready CSV tables. Floats carry 17 significant digits so that output
//! round-trips bit for bit; absent values are empty cells.

use std::fmt::Write as _;

use crate::bifurcation::{EnergyDiagram, EquilibriumBranch, PhaseDiagram};
use crate::hysteresis::HysteresisRun;
use crate::poincare::PoincareTable;
use crate::rates::RateDiagram;
use crate::scalar::Scalar;
use crate::solver::{Diagnostics, SolverState};

pub fn float<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

pub fn optional<T: Scalar>(x: Option<T>) -> String {
    x.map(float).unwrap_or_default()
}

/// A header plus rows of preformatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn branches_table<T: Scalar>(branch: &EquilibriumBranch<T>) -> Table {
    let mut t = Table::new(&["rho", "kappa", "c", "stability"]);
    for r in &branch.roots {
        t.push(vec![float(branch.rho), float(r.kappa), float(r.c), r.stability.to_string()]);
    }
    t
}

pub fn phase_diagram_table<T: Scalar>(d: &PhaseDiagram<T>) -> Table {
    let mut t = Table::new(&["c", "kappa", "rho", "stability", "free_energy", "rate"]);
    for r in &d.rows {
        t.push(vec![
            float(r.c),
            float(r.kappa),
            float(r.rho),
            r.stability.to_string(),
            float(r.free_energy),
            optional(r.rate),
        ]);
    }
    t
}

pub fn energy_table<T: Scalar>(d: &EnergyDiagram<T>) -> Table {
    let mut t = Table::new(&["c", "kappa", "rho", "stability", "free_energy_difference"]);
    for r in &d.rows {
        t.push(vec![
            float(r.c),
            float(r.kappa),
            float(r.rho),
            r.stability.to_string(),
            float(r.free_energy_difference),
        ]);
    }
    t
}

pub fn rates_table<T: Scalar>(d: &RateDiagram<T>) -> Table {
    let mut t = Table::new(&["rho", "lambda_uniform", "lambda_vonmises"]);
    for r in &d.rows {
        t.push(vec![float(r.rho), optional(r.lambda_uniform), optional(r.lambda_vonmises)]);
    }
    t
}

pub fn poincare_table<T: Scalar>(p: &PoincareTable<T>) -> Table {
    let mut t = Table::new(&["kappa", "lambda"]);
    for (&k, &l) in p.kappa.iter().zip(&p.lambda) {
        t.push(vec![float(k), float(l)]);
    }
    t
}

pub fn trajectory_table<T: Scalar>(samples: &[Diagnostics<T>]) -> Table {
    let mut t = Table::new(&["t", "mass", "absJ", "free_energy", "dissipation"]);
    for d in samples {
        t.push(vec![
            float(d.t),
            float(d.mass),
            float(d.abs_j),
            float(d.free_energy),
            float(d.dissipation),
        ]);
    }
    t
}

pub fn state_table<T: Scalar>(s: &SolverState<T>) -> Table {
    let mut t = Table::new(&["theta", "f"]);
    for (&th, &f) in s.theta().iter().zip(s.f()) {
        t.push(vec![float(th), float(f)]);
    }
    t
}

pub fn hysteresis_table<T: Scalar>(run: &HysteresisRun<T>) -> Table {
    let mut t = Table::new(&["t", "rho", "c"]);
    for s in &run.samples {
        t.push(vec![float(s.t), float(s.rho), float(s.c)]);
    }
    t
}

/// Renders any table as aligned text, for terminal display.
pub fn to_text(table: &Table) -> String {
    let widths: Vec<usize> = (0..table.header.len())
        .map(|j| {
            table
                .rows
                .iter()
                .map(|r| r[j].len())
                .chain([table.header[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  "));
    };
    line(&mut out, &mut table.header.iter().copied());
    for r in &table.rows {
        line(&mut out, &mut r.iter().map(String::as_str));
    }
    out
}
