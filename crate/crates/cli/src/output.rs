//! Deterministic CSV and JSON writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use pvb_core::reduced_space::CellSet;
use pvb_core::space::PhaseSpace;
use pvb_core::c64;

use crate::error::CliError;

/// 17 significant digits, so every value round-trips exactly.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        let mut first = true;
        for f in fields {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(&f);
            first = false;
        }
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, &self.text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `x_0,p_0,x_1,p_1,...`
pub fn centre_header(n_dofs: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(2 * n_dofs);
    for d in 0..n_dofs {
        h.push(format!("x_{d}"));
        h.push(format!("p_{d}"));
    }
    h
}

fn centre_fields(space: &PhaseSpace, cell: usize) -> Vec<String> {
    space
        .cell_center(cell)
        .into_iter()
        .zip(space.dofs())
        .flat_map(|((x, p), dof)| [fmt_f(dof.grid().physical(x)), fmt_f(p)])
        .collect()
}

pub fn cells_csv(space: &PhaseSpace, cells: &CellSet) -> Csv {
    let mut header = vec!["cell".to_string()];
    header.extend(centre_header(space.n_dofs()));
    let mut csv = Csv::new(&header);
    for c in cells.iter() {
        let mut row = vec![c.to_string()];
        row.extend(centre_fields(space, c));
        csv.row(row);
    }
    csv
}

/// Every lattice cell with `|<g|psi>|`; cells outside `cells` get 0.
pub fn heatmap_csv(space: &PhaseSpace, cells: &CellSet, coeffs: &[c64]) -> Csv {
    let mut header = vec!["cell".to_string()];
    header.extend(centre_header(space.n_dofs()));
    header.push("amplitude".into());
    let mut csv = Csv::new(&header);
    for c in 0..space.n_cells() {
        let a = cells.position(c).map_or(0.0, |i| coeffs[i].norm());
        let mut row = vec![c.to_string()];
        row.extend(centre_fields(space, c));
        row.push(fmt_f(a));
        csv.row(row);
    }
    csv
}

pub fn numbered(dir: &Path, stem: &str, i: usize, width: usize) -> PathBuf {
    let mut name = String::new();
    let _ = write!(name, "{stem}_{i:0width$}.csv");
    dir.join(name)
}
