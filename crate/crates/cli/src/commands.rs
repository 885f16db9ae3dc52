//! `tise`, `tdse`, `validate` and `bench`.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde_json::{json, Value};

use pvb_core::dynamics::{
    coherent_state, max_timestep, step_cap, tdse_adaptive, ControlPulse, PropagationConfig, ReducedState, Trajectory,
};
use pvb_core::fourier_grid::FourierGrid;
use pvb_core::hamiltonian::{ControlTerm, Coupling, HamiltonianAssembler, OperatorSpec, ReducedHamiltonian};
use pvb_core::reduced_space::CellSet;
use pvb_core::solvers::{reference_full_eig, tise_adaptive, EigenResult, TiseConfig};
use pvb_core::space::PhaseSpace;
use pvb_core::validation::{run_suite, CheckOutcome, ValidationOptions};
use pvb_core::vn_basis::{build_lattice, Alignment};
use pvb_core::{models, PvbError};

use crate::config::{CouplingKind, InitialState, ModelConfig, RunConfig, TdseConfig};
use crate::error::CliError;
use crate::output::{self, fmt_f, Csv};

pub fn build_space(cfg: &RunConfig) -> Result<Arc<PhaseSpace>, CliError> {
    let mut lattices = Vec::with_capacity(cfg.dofs.len());
    for (i, d) in cfg.dofs.iter().enumerate() {
        let g = FourierGrid::new(d.grid.length, d.grid.n, d.grid.x0)
            .map_err(|e| CliError::Config(format!("`dofs[{i}].grid`: {e}")))?;
        let lat = build_lattice(&g, d.lattice.nx, d.lattice.np, d.lattice.sigma, d.lattice.alignment)
            .map_err(|e| CliError::Config(format!("`dofs[{i}].lattice`: {e}")))?;
        lattices.push(lat);
    }
    Ok(Arc::new(PhaseSpace::new(lattices)?))
}

fn read_potential(path: &Path, xs: &[f64]) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let bad = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(|h| h.replace(' ', "")) {
        Some(h) if h == "x,v" => {}
        _ => return Err(bad("expected header `x,v`".into())),
    }
    let mut v = Vec::with_capacity(xs.len());
    for (row, line) in lines.enumerate() {
        let mut parts = line.split(',').map(str::trim);
        let (Some(x), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad(format!("row {} does not have two fields", row + 1)));
        };
        let x: f64 = x.parse().map_err(|_| bad(format!("row {}: bad x `{x}`", row + 1)))?;
        let val: f64 = val.parse().map_err(|_| bad(format!("row {}: bad v `{val}`", row + 1)))?;
        let Some(&want) = xs.get(row) else {
            return Err(bad(format!("more rows than the {} grid points", xs.len())));
        };
        if (x - want).abs() > 1e-8 * (1.0 + want.abs()) || !val.is_finite() {
            return Err(bad(format!("row {}: x = {x} but grid point is {want}", row + 1)));
        }
        v.push(val);
    }
    if v.len() != xs.len() {
        return Err(bad(format!("{} rows for {} grid points", v.len(), xs.len())));
    }
    Ok(v)
}

/// Operator for the configured model plus model-specific metadata.
pub fn build_model(cfg: &RunConfig, space: &PhaseSpace) -> Result<(OperatorSpec, Value), CliError> {
    let (mut spec, meta) = match &cfg.model {
        ModelConfig::Free { masses } => (models::free(space, masses)?, json!({})),
        ModelConfig::DoubleWell { m, omega, b, d } => (models::double_well(space, *m, *omega, *b, *d)?, json!({})),
        ModelConfig::Harmonic { m, omega } => (models::harmonic(space, *m, *omega)?, json!({})),
        ModelConfig::Helium1d { a0, nuclear_charge, masses, sop_tolerance } => {
            let he = models::helium1d(space, *a0, *nuclear_charge, *masses, *sop_tolerance)?;
            let meta = json!({ "sop_terms": he.interaction.terms.len(), "sop_max_error": he.interaction.max_error });
            (he.spec, meta)
        }
        ModelConfig::Tabulated { masses, potentials } => {
            let mut spec = models::free(space, masses)?;
            for (d, path) in potentials.iter().enumerate() {
                let xs = space.dof(d).grid().physical_points();
                spec = spec.with_potential(d, read_potential(path, &xs)?);
            }
            (spec, json!({}))
        }
    };
    if let Some(t) = &cfg.tdse {
        for c in &t.couplings {
            let coupling = match c.coupling {
                CouplingKind::Position => Coupling::Position,
                CouplingKind::Momentum => Coupling::Momentum,
            };
            spec = spec.with_control(ControlTerm { dof: c.dof, coupling, signal: c.signal });
        }
    }
    spec.validate()?;
    Ok((spec, meta))
}

pub struct TiseOutcome {
    pub result: EigenResult,
    pub out_dir: std::path::PathBuf,
}

pub fn cmd_tise(cfg: &RunConfig, out_dir: &Path) -> Result<TiseOutcome, CliError> {
    let tise = cfg.tise.ok_or_else(|| CliError::Config("the `tise` command needs a `tise` section".into()))?;
    output::ensure_dir(out_dir)?;
    let t0 = Instant::now();
    let space = build_space(cfg)?;
    let (spec, model_meta) = build_model(cfg, &space)?;
    let model_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let res = tise_adaptive(&spec, space.clone(), &tise);
    let solve_s = t1.elapsed().as_secs_f64();
    let mut meta = json!({
        "command": "tise",
        "config": cfg,
        "model": model_meta,
        "n_total_cells": space.n_cells(),
        "timings": { "model_s": model_s, "solve_s": solve_s },
    });
    let result = match res {
        Ok(r) => r,
        Err(e) => {
            if let PvbError::NoConvergence { history, .. } = &e {
                meta["history"] = json!(history.iter().map(|(n, b)| json!({ "n_cells": n, "boundary_max": b })).collect::<Vec<_>>());
            }
            meta["error"] = json!(e.to_string());
            output::write_json(&out_dir.join("run_meta.json"), &meta)?;
            return Err(e.into());
        }
    };

    let mut ev = Csv::new(&["index".into(), "eigenvalue".into()]);
    for (i, e) in result.eigenvalues.iter().enumerate() {
        ev.row([i.to_string(), fmt_f(*e)]);
    }
    ev.write(&out_dir.join("eigenvalues.csv"))?;
    output::cells_csv(&space, &result.final_cells).write(&out_dir.join("cells.csv"))?;
    if cfg.output.heatmaps {
        for j in 0..result.eigenvalues.len() {
            let coeffs: Vec<_> = (0..result.eigenvectors.nrows()).map(|i| result.eigenvectors[(i, j)]).collect();
            output::heatmap_csv(&space, &result.final_cells, &coeffs)
                .write(&output::numbered(out_dir, "heatmap_mode", j, 3))?;
        }
    }
    meta["iterations"] = json!(result.iterations);
    meta["n_cells"] = json!(result.final_cells.len());
    meta["reduction_ratio"] = json!(result.final_cells.len() as f64 / space.n_cells() as f64);
    meta["history"] = json!(result.history);
    output::write_json(&out_dir.join("run_meta.json"), &meta)?;
    Ok(TiseOutcome { result, out_dir: out_dir.to_path_buf() })
}

fn initial_state(
    tdse: &TdseConfig,
    spec: &OperatorSpec,
    space: &Arc<PhaseSpace>,
) -> Result<ReducedState, CliError> {
    match &tdse.initial_state {
        InitialState::GroundState { tise } => {
            let r = tise_adaptive(spec, space.clone(), &TiseConfig { n_modes: 1, ..*tise })?;
            let coeffs = (0..r.eigenvectors.nrows()).map(|i| r.eigenvectors[(i, 0)]).collect();
            Ok(ReducedState { cells: r.final_cells, coeffs })
        }
        InitialState::Coherent { centres } => {
            let c: Vec<(f64, f64, f64)> = centres.iter().map(|c| (c[0], c[1], c[2])).collect();
            let psi = coherent_state(space, &c)?;
            Ok(ReducedState::from_grid(space, &psi, tdse.propagation.zeta, tdse.propagation.radius)?)
        }
    }
}

/// Propagation settings with the optional `max_du_dt` bound folded into `t_max_cap`.
pub fn effective_propagation(tdse: &TdseConfig, space: &PhaseSpace) -> Result<PropagationConfig, CliError> {
    let mut p = tdse.propagation.clone();
    if let Some(s) = tdse.max_du_dt {
        let bound = max_timestep(p.zeta, space.bandwidth(), s)?;
        p.t_max_cap = Some(p.t_max_cap.map_or(bound, |c| c.min(bound)));
    }
    Ok(p)
}

pub fn cmd_tdse(cfg: &RunConfig, out_dir: &Path) -> Result<Trajectory, CliError> {
    let tdse = cfg.tdse.as_ref().ok_or_else(|| CliError::Config("the `tdse` command needs a `tdse` section".into()))?;
    output::ensure_dir(out_dir)?;
    let t0 = Instant::now();
    let space = build_space(cfg)?;
    let (spec, model_meta) = build_model(cfg, &space)?;
    let model_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let initial = initial_state(tdse, &spec, &space)?;
    let initial_s = t1.elapsed().as_secs_f64();
    let prop = effective_propagation(tdse, &space)?;
    let t_span = (tdse.t_span[0], tdse.t_span[1]);
    let cap = step_cap(&space, &tdse.pulses, t_span, &prop)?;
    let initial_cells = initial.cells.len();
    let t2 = Instant::now();
    let res = tdse_adaptive(&spec, space.clone(), initial, t_span, &tdse.pulses, &prop);
    let propagate_s = t2.elapsed().as_secs_f64();
    let mut meta = json!({
        "command": "tdse",
        "config": cfg,
        "model": model_meta,
        "n_total_cells": space.n_cells(),
        "initial_cells": initial_cells,
        "tau_cap": cap,
        "timings": { "model_s": model_s, "initial_state_s": initial_s, "propagate_s": propagate_s },
    });
    let tr = match res {
        Ok(tr) => tr,
        Err(e) => {
            meta["error"] = json!(e.to_string());
            output::write_json(&out_dir.join("run_meta.json"), &meta)?;
            return Err(e.into());
        }
    };

    let mut traj = Csv::new(&["t", "n_cells", "norm", "discarded", "tau"].map(String::from));
    for p in &tr.points {
        traj.row([fmt_f(p.t), p.n_cells.to_string(), fmt_f(p.norm), fmt_f(p.discarded), fmt_f(p.tau)]);
    }
    traj.write(&out_dir.join("trajectory.csv"))?;

    write_pulses(&tdse.pulses, &tr, cfg.output.pulse_every, out_dir)?;

    let mut snaps = Vec::new();
    if cfg.output.heatmaps {
        for (i, s) in tr.snapshots.iter().enumerate() {
            let path = output::numbered(out_dir, "snapshot", i, 4);
            output::heatmap_csv(&space, &s.state.cells, &s.state.coeffs).write(&path)?;
            snaps.push(json!({ "file": path.file_name().map(|f| f.to_string_lossy().into_owned()), "t": s.t }));
        }
    }
    let last = tr.points.last().copied();
    meta["snapshots"] = json!(snaps);
    meta["accepted_steps"] = json!(tr.accepted_steps());
    meta["rejected_steps"] = json!(tr.rejected_steps);
    meta["max_cells"] = json!(tr.max_cells());
    meta["reduction_ratio"] = json!(tr.max_cells() as f64 / space.n_cells() as f64);
    meta["final"] = json!(last);
    meta["events"] = json!(tr.events);
    output::write_json(&out_dir.join("run_meta.json"), &meta)?;
    Ok(tr)
}

fn write_pulses(pulses: &[ControlPulse], tr: &Trajectory, every: usize, out_dir: &Path) -> Result<(), CliError> {
    let mut header = vec!["t".to_string()];
    header.extend((0..pulses.len()).map(|i| format!("u_{i}")));
    let mut csv = Csv::new(&header);
    let n = tr.points.len();
    for (i, p) in tr.points.iter().enumerate() {
        if i % every == 0 || i + 1 == n {
            let mut row = vec![fmt_f(p.t)];
            row.extend(pulses.iter().map(|u| fmt_f(u.value(p.t))));
            csv.row(row);
        }
    }
    csv.write(&out_dir.join("pulse.csv"))
}

pub fn cmd_validate(seed: u64, out_dir: Option<&Path>, mut print: impl FnMut(&str)) -> Result<Vec<CheckOutcome>, CliError> {
    let opts = ValidationOptions { seed, ..Default::default() };
    let start = Instant::now();
    print(&format!("{:<14} {:<64} {:>11} {:>9} {:>8}  result", "module", "check", "value", "tol", "secs"));
    let outcomes = run_suite(&opts, |o| {
        let mut line = format!(
            "{:<14} {:<64} {:>11.3e} {:>9.1e} {:>8.2}  {}",
            o.module,
            o.name,
            o.value,
            o.tolerance,
            o.seconds,
            if o.passed { "PASS" } else { "FAIL" }
        );
        if let Some(e) = &o.error {
            line.push_str(&format!("  ({e})"));
        }
        print(&line);
    });
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    print(&format!("{} checks, {failed} failed, {:.1} s", outcomes.len(), start.elapsed().as_secs_f64()));
    if let Some(dir) = out_dir {
        output::ensure_dir(dir)?;
        output::write_json(&dir.join("validation.json"), &outcomes)?;
    }
    if failed > 0 {
        return Err(CliError::Validation { failed, total: outcomes.len() });
    }
    Ok(outcomes)
}

/// Double-well block of at least 100 cells, assembled with and without the symmetry cache.
pub fn assembly_speedup() -> Result<(f64, f64, usize, u64), CliError> {
    let g = FourierGrid::new(80.0, 160, 0.0)?;
    let space = Arc::new(PhaseSpace::new(vec![build_lattice(&g, 32, 5, None, Alignment::Auto)?])?);
    let spec = models::double_well(&space, 1.0, 1.0, 20.0, 22.0)?;
    let lat = &space.dof(0).lattice;
    let cells: CellSet = (0..lat.nx())
        .filter(|&ix| g.physical(lat.center(lat.cell(ix, 0)).x).abs() <= 30.0)
        .flat_map(|ix| (0..lat.np()).map(move |ip| lat.cell(ix, ip)))
        .collect();
    let time = |sym: bool| -> Result<(f64, u64), CliError> {
        let mut best = f64::INFINITY;
        let mut hits = 0;
        for _ in 0..5 {
            let asm = HamiltonianAssembler::new(&spec, space.clone())?;
            let mut asm = if sym { asm } else { asm.without_symmetry() };
            let t = Instant::now();
            let _ = ReducedHamiltonian::new(&mut asm, &cells);
            best = best.min(t.elapsed().as_secs_f64());
            hits = asm.cache_stats().hits;
        }
        Ok((best, hits))
    };
    let (with, hits) = time(true)?;
    let (without, _) = time(false)?;
    Ok((with, without, cells.len(), hits))
}

pub fn cmd_bench(out_dir: Option<&Path>, mut print: impl FnMut(&str)) -> Result<(), CliError> {
    let (with, without, n, hits) = assembly_speedup()?;
    print(&format!(
        "assembly of {n} double-well cells: {:.3} ms with cache ({hits} hits), {:.3} ms without, speedup {:.2}x",
        with * 1e3,
        without * 1e3,
        without / with
    ));

    let g = FourierGrid::new(80.0, 160, 0.0)?;
    let space = Arc::new(PhaseSpace::new(vec![build_lattice(&g, 32, 5, None, Alignment::Auto)?])?);
    let spec = models::double_well(&space, 1.0, 1.0, 20.0, 22.0)?;
    let t = Instant::now();
    let dense = reference_full_eig(&spec, &space)?;
    let dense_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let r = tise_adaptive(&spec, space.clone(), &TiseConfig { n_modes: 8, ..Default::default() })?;
    let tise_s = t.elapsed().as_secs_f64();
    let err = r.eigenvalues.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    print(&format!(
        "double well, 8 modes: adaptive {:.3} s on {} of {} cells (max error {err:.2e}), dense {:.3} s",
        tise_s,
        r.final_cells.len(),
        space.n_cells(),
        dense_s
    ));

    let g = FourierGrid::new(60.0, 180, 0.0)?;
    let space = Arc::new(PhaseSpace::new(vec![build_lattice(&g, 20, 9, None, Alignment::Auto)?])?);
    let spec = models::free(&space, &[1.0])?;
    let psi = coherent_state(&space, &[(-10.0, 1.0, 1.5)])?;
    let st = ReducedState::from_grid(&space, &psi, 1e-6, pvb_core::reduced_space::DEFAULT_RADIUS)?;
    let cfg = PropagationConfig { max_steps: Some(1000), ..Default::default() };
    let t = Instant::now();
    let tr = tdse_adaptive(&spec, space, st, (0.0, 1e6), &[], &cfg)?;
    let tdse_s = t.elapsed().as_secs_f64();
    print(&format!(
        "free packet, 1000 steps: {:.3} s, {} rejected, at most {} cells",
        tdse_s,
        tr.rejected_steps,
        tr.max_cells()
    ));
    if let Some(dir) = out_dir {
        output::ensure_dir(dir)?;
        let report = json!({
            "assembly": { "cells": n, "with_cache_s": with, "without_cache_s": without, "hits": hits, "speedup": without / with },
            "tise_double_well": { "adaptive_s": tise_s, "dense_s": dense_s, "max_error": err, "n_cells": r.final_cells.len() },
            "tdse_free": { "seconds": tdse_s, "rejected_steps": tr.rejected_steps, "max_cells": tr.max_cells() },
        });
        output::write_json(&dir.join("bench.json"), &report)?;
    }
    Ok(())
}
