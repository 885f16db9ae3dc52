//! Time propagation in an adaptive reduced basis.

mod pulse;
mod taylor;

use std::sync::Arc;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{PvbError, Result};
use crate::hamiltonian::{HamiltonianAssembler, OperatorSpec, ReducedHamiltonian};
use crate::linalg::{self, ZERO};
use crate::reduced_space::{
    boundary_cells, expand_cells, prune_cells, CellSet, ReducedBasis, DEFAULT_RADIUS,
};
use crate::space::PhaseSpace;

pub use pulse::ControlPulse;
pub use taylor::{dense_propagate_oracle, max_timestep, taylor_step, StepTooLarge};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub zeta: f64,
    pub radius: f64,
    pub tau0: f64,
    pub max_taylor_terms: usize,
    pub taylor_eps: f64,
    pub shrink_factor: f64,
    pub growth_factor: f64,
    pub growth_patience: usize,
    /// Extra upper bound on the step, combined with the control-slope bound.
    pub t_max_cap: Option<f64>,
    pub min_tau: f64,
    pub snapshot_every: usize,
    /// Stop after this many accepted steps even if the end time is not reached.
    pub max_steps: Option<usize>,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            zeta: 1e-6,
            radius: DEFAULT_RADIUS,
            tau0: 0.05,
            max_taylor_terms: 30,
            taylor_eps: 1e-12,
            shrink_factor: 0.5,
            growth_factor: 1.2,
            growth_patience: 3,
            t_max_cap: None,
            min_tau: 1e-12,
            snapshot_every: 50,
            max_steps: None,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PvbError::InvalidInput(m));
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return bad(format!("zeta must be positive, got {}", self.zeta));
        }
        if !(self.radius >= 1.0 && self.radius.is_finite()) {
            return bad(format!("radius must be at least 1, got {}", self.radius));
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return bad(format!("tau0 must be positive, got {}", self.tau0));
        }
        if self.max_taylor_terms < 2 {
            return bad("max_taylor_terms must be at least 2".into());
        }
        if !(self.taylor_eps > 0.0) {
            return bad("taylor_eps must be positive".into());
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return bad(format!("shrink_factor must lie in (0, 1), got {}", self.shrink_factor));
        }
        if !(self.growth_factor > 1.0 && self.growth_factor.is_finite()) {
            return bad(format!("growth_factor must exceed 1, got {}", self.growth_factor));
        }
        if self.t_max_cap.is_some_and(|c| !(c > 0.0)) {
            return bad("t_max_cap must be positive".into());
        }
        if !(self.min_tau > 0.0) {
            return bad("min_tau must be positive".into());
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        Ok(())
    }
}

/// Coefficients on a cell set, in reduced (`B~`) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub cells: CellSet,
    pub coeffs: Vec<c64>,
}

impl ReducedState {
    /// Cells where the full-space coefficients reach `zeta`, grown by `radius`; the state is
    /// projected onto them and rescaled to unit physical norm.
    pub fn from_grid(space: &PhaseSpace, psi: &[c64], zeta: f64, radius: f64) -> Result<Self> {
        let full = space.to_pvb(psi);
        let big: CellSet = full.iter().enumerate().filter(|(_, z)| z.norm() >= zeta).map(|(i, _)| i).collect();
        if big.is_empty() {
            return Err(PvbError::EmptySet);
        }
        let cells = expand_cells(&big, space, radius);
        let rb = ReducedBasis::new(space, cells.clone())?;
        let mut coeffs = rb.project(space, psi);
        let n = rb.norm_sqr(&coeffs).sqrt();
        coeffs.iter_mut().for_each(|z| *z /= n);
        Ok(Self { cells, coeffs })
    }

    /// Sampled wavefunction `B~ c`.
    pub fn to_grid(&self, space: &PhaseSpace) -> Vec<c64> {
        space.synthesize(self.cells.as_slice(), &self.coeffs)
    }
}

/// Product of normalized Gaussians `exp(-(x - x0)^2 / 4 s^2 + i p0 (x - x0))`, one per DoF.
pub fn coherent_state(space: &PhaseSpace, centres: &[(f64, f64, f64)]) -> Result<Vec<c64>> {
    if centres.len() != space.n_dofs() {
        return Err(PvbError::DimensionMismatch(format!(
            "{} centres for {} degrees of freedom",
            centres.len(),
            space.n_dofs()
        )));
    }
    let factors: Vec<Vec<c64>> = centres
        .iter()
        .enumerate()
        .map(|(d, &(x0, p0, s))| {
            let g = space.dof(d).grid();
            let v: Vec<c64> = g
                .sample_points()
                .iter()
                .map(|&x| {
                    let y = g.physical(x - x0);
                    c64::from_polar((-(y / (2.0 * s)).powi(2)).exp(), p0 * y)
                })
                .collect();
            let n = (g.weight() * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
            v.into_iter().map(|z| z / n).collect()
        })
        .collect();
    let dims = space.point_dims();
    let psi = (0..space.n_points())
        .map(|i| {
            crate::space::split_index(i, &dims)
                .iter()
                .zip(&factors)
                .map(|(&j, f)| f[j])
                .product()
        })
        .collect();
    Ok(psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkReason {
    SeriesTooLong,
    NewCellsOverflow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ControllerEvent {
    Shrink { t: f64, from: f64, to: f64, reason: ShrinkReason },
    Grow { t: f64, from: f64, to: f64 },
    BasisChange { t: f64, before: usize, after: usize, added: usize, removed: usize, discarded: f64, refreshed: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub n_cells: usize,
    pub norm: f64,
    /// Cumulative discarded mass.
    pub discarded: f64,
    /// Step that led to this point (0 for the initial point).
    pub tau: f64,
    /// Largest amplitude on boundary cells added by the preceding basis change, if this
    /// is the first step after one.
    pub fresh_max: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub state: ReducedState,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub events: Vec<ControllerEvent>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: ReducedState,
    pub rejected_steps: usize,
    /// Step cap from the control slope and `t_max_cap`, if any.
    pub tau_cap: Option<f64>,
}

impl Trajectory {
    pub fn accepted_steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn max_cells(&self) -> usize {
        self.points.iter().map(|p| p.n_cells).max().unwrap_or(0)
    }
}

/// Step cap implied by the control pulses over `[t0, t1]` and the configured cap.
pub fn step_cap(space: &PhaseSpace, pulses: &[ControlPulse], t_span: (f64, f64), cfg: &PropagationConfig) -> Result<Option<f64>> {
    let slope = pulses.iter().map(|p| p.max_slope(t_span.0, t_span.1)).fold(0.0, f64::max);
    let from_pulses = if slope > 0.0 { Some(max_timestep(cfg.zeta, space.bandwidth(), slope)?) } else { None };
    Ok(match (from_pulses, cfg.t_max_cap) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    })
}

/// Adaptive-basis propagation of `initial` over `t_span`.
///
/// `pulses[i]` drives control signal `i` of `spec`; controls are held at their midpoint
/// value within each step. Amplitude on pruned cells is dropped without renormalizing,
/// and the dropped mass is recorded.
pub fn tdse_adaptive(
    spec: &OperatorSpec,
    space: Arc<PhaseSpace>,
    initial: ReducedState,
    t_span: (f64, f64),
    pulses: &[ControlPulse],
    cfg: &PropagationConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let (t_start, t_end) = t_span;
    if !(t_end >= t_start) || !t_start.is_finite() || !t_end.is_finite() {
        return Err(PvbError::InvalidInput(format!("bad time span [{t_start}, {t_end}]")));
    }
    if pulses.len() < spec.n_signals() {
        return Err(PvbError::InvalidInput(format!(
            "{} control signals but {} pulses",
            spec.n_signals(),
            pulses.len()
        )));
    }
    for p in pulses {
        p.validate()?;
    }
    if initial.coeffs.len() != initial.cells.len() {
        return Err(PvbError::DimensionMismatch("initial coefficients and cells differ in length".into()));
    }

    let mut asm = HamiltonianAssembler::new(spec, space.clone())?;
    let mut rb = ReducedBasis::new(&space, initial.cells.clone())?;
    let mut rh = ReducedHamiltonian::new(&mut asm, rb.cells());
    let mut coeffs = initial.coeffs;

    let norm0 = rb.norm_sqr(&coeffs).sqrt();
    if (norm0 - 1.0).abs() > 1e-8 {
        return Err(PvbError::InvalidInput(format!("initial state has norm {norm0}, expected 1")));
    }

    let cap = step_cap(&space, pulses, t_span, cfg)?;
    let mut tau = cap.map_or(cfg.tau0, |c| cfg.tau0.min(c));
    let mut t = t_start;
    let mut discarded = 0.0;
    let mut points = vec![TrajectoryPoint { t, n_cells: rb.dim(), norm: norm0, discarded, tau: 0.0, fresh_max: 0.0 }];
    let mut events = Vec::new();
    let mut snapshots = vec![Snapshot { t, state: ReducedState { cells: rb.cells().clone(), coeffs: coeffs.clone() } }];
    let mut rejected = 0usize;
    let mut calm_steps = 0usize;
    // boundary cells added by the last basis change, checked on the next step only
    let mut fresh: Vec<usize> = Vec::new();
    let max_steps = cfg.max_steps.unwrap_or(usize::MAX);
    let end_tol = 1e-12 * t_end.abs().max(1.0);

    while t < t_end - end_tol && points.len() - 1 < max_steps {
        if tau < cfg.min_tau {
            return Err(PvbError::StepUnderflow { t, tau });
        }
        let h = tau.min(t_end - t);
        let tm = t + 0.5 * h;
        let u: Vec<f64> = pulses.iter().map(|p| p.value(tm)).collect();
        // controls are constant within a step, so sum them once
        let h_u = u.iter().any(|&x| x != 0.0).then(|| rh.matrix_at(&u));
        let h_ref = h_u.as_ref().unwrap_or(rh.drift()).as_ref();
        let s_tilde = rb.s_tilde().as_ref();
        let step = taylor_step(
            |v| linalg::mat_vec(s_tilde, &linalg::mat_vec(h_ref, v)),
            &coeffs,
            h,
            cfg.max_taylor_terms,
            cfg.taylor_eps,
        );
        let next = match step {
            Ok((v, _)) => v,
            Err(_) => {
                let to = tau * cfg.shrink_factor;
                events.push(ControllerEvent::Shrink { t, from: tau, to, reason: ShrinkReason::SeriesTooLong });
                tau = to;
                rejected += 1;
                calm_steps = 0;
                continue;
            }
        };
        let fresh_max = fresh.iter().map(|&i| next[i].norm()).fold(0.0, f64::max);
        if fresh_max > cfg.zeta {
            let to = tau * cfg.shrink_factor;
            events.push(ControllerEvent::Shrink { t, from: tau, to, reason: ShrinkReason::NewCellsOverflow });
            tau = to;
            rejected += 1;
            calm_steps = 0;
            continue;
        }
        fresh.clear();
        coeffs = next;
        t += h;

        let amps: Vec<f64> = coeffs.iter().map(|z| z.norm()).collect();
        let boundary = boundary_cells(rb.cells(), &space, cfg.radius);
        let overflow = boundary.iter().any(|c| amps[rb.cells().position(c).unwrap()] >= cfg.zeta);
        if overflow {
            let before = rb.dim();
            let mass_before = rb.norm_sqr(&coeffs);
            let kept = prune_cells(rb.cells(), &amps, cfg.zeta);
            let target = expand_cells(&kept, &space, cfg.radius);
            let change = rb.update(&space, target)?;
            rh.update(&mut asm, rb.cells(), &change);
            coeffs = change.carry(&coeffs);
            let lost = mass_before - rb.norm_sqr(&coeffs);
            discarded += lost.abs();
            let new_boundary = boundary_cells(rb.cells(), &space, cfg.radius);
            fresh = rb
                .cells()
                .iter()
                .enumerate()
                .filter(|&(i, c)| change.origin[i].is_none() && new_boundary.contains(c))
                .map(|(i, _)| i)
                .collect();
            events.push(ControllerEvent::BasisChange {
                t,
                before,
                after: rb.dim(),
                added: change.added.len(),
                removed: change.removed.len(),
                discarded: lost,
                refreshed: change.refreshed,
            });
            calm_steps = 0;
        } else {
            calm_steps += 1;
            if calm_steps >= cfg.growth_patience {
                let grown = tau * cfg.growth_factor;
                let to = cap.map_or(grown, |c| grown.min(c));
                if to > tau {
                    events.push(ControllerEvent::Grow { t, from: tau, to });
                    tau = to;
                }
                calm_steps = 0;
            }
        }

        let norm = rb.norm_sqr(&coeffs).sqrt();
        points.push(TrajectoryPoint { t, n_cells: rb.dim(), norm, discarded, tau: h, fresh_max });
        if (points.len() - 1) % cfg.snapshot_every == 0 {
            snapshots.push(Snapshot { t, state: ReducedState { cells: rb.cells().clone(), coeffs: coeffs.clone() } });
        }
    }

    let final_state = ReducedState { cells: rb.cells().clone(), coeffs };
    if snapshots.last().is_some_and(|s| s.t < t) {
        snapshots.push(Snapshot { t, state: final_state.clone() });
    }
    Ok(Trajectory { points, events, snapshots, final_state, rejected_steps: rejected, tau_cap: cap })
}

/// Zero coefficients for every cell of `cells`, for tests and seeding.
pub fn zero_state(cells: CellSet) -> ReducedState {
    let n = cells.len();
    ReducedState { cells, coeffs: vec![ZERO; n] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier_grid::FourierGrid;
    use crate::hamiltonian::{ControlTerm, Coupling};
    use crate::vn_basis::{build_lattice, Alignment};

    fn space1(l: f64, n: usize, nx: usize, np: usize) -> Arc<PhaseSpace> {
        let g = FourierGrid::new(l, n, 0.0).unwrap();
        Arc::new(PhaseSpace::new(vec![build_lattice(&g, nx, np, None, Alignment::Auto).unwrap()]).unwrap())
    }

    #[test]
    fn coherent_state_is_normalized() {
        let sp = space1(30.0, 90, 10, 9);
        let psi = coherent_state(&sp, &[(-5.0, 1.0, 1.2)]).unwrap();
        let n: f64 = sp.weight() * psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!((n - 1.0).abs() < 1e-12);
        let st = ReducedState::from_grid(&sp, &psi, 1e-6, DEFAULT_RADIUS).unwrap();
        assert!(st.cells.len() < sp.n_cells());
        let back = st.to_grid(&sp);
        let err: f64 = sp.weight() * back.iter().zip(&psi).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        assert!(err.sqrt() < 1e-5);
    }

    #[test]
    fn free_packet_keeps_norm() {
        let sp = space1(60.0, 180, 20, 9);
        let spec = crate::models::free(&sp, &[1.0]).unwrap();
        let psi = coherent_state(&sp, &[(-10.0, 1.0, 1.5)]).unwrap();
        let st = ReducedState::from_grid(&sp, &psi, 1e-6, DEFAULT_RADIUS).unwrap();
        let cfg = PropagationConfig { max_steps: Some(200), ..Default::default() };
        let tr = tdse_adaptive(&spec, sp, st, (0.0, 1e3), &[], &cfg).unwrap();
        assert_eq!(tr.accepted_steps(), 200);
        for p in &tr.points {
            assert!((p.norm - 1.0).abs() < 1e-6, "{p:?}");
        }
        assert!(tr.points.windows(2).all(|w| w[1].t > w[0].t));
        assert!(tr.events.iter().any(|e| matches!(e, ControllerEvent::BasisChange { .. })));
    }

    #[test]
    fn first_step_respects_cap() {
        let sp = space1(30.0, 90, 10, 9);
        let spec = crate::models::free(&sp, &[1.0])
            .unwrap()
            .with_control(ControlTerm { dof: 0, coupling: Coupling::Position, signal: 0 });
        let psi = coherent_state(&sp, &[(0.0, 0.0, 1.2)]).unwrap();
        let st = ReducedState::from_grid(&sp, &psi, 1e-6, DEFAULT_RADIUS).unwrap();
        let pulse = ControlPulse::Table { times: vec![0.0, 1.0], values: vec![0.0, 0.5] };
        let cfg = PropagationConfig { max_steps: Some(3), ..Default::default() };
        let tr = tdse_adaptive(&spec, sp.clone(), st, (0.0, 1.0), &[pulse], &cfg).unwrap();
        let want = max_timestep(1e-6, sp.bandwidth(), 0.5).unwrap();
        assert!((tr.points[1].tau - want.min(0.05)).abs() < 1e-15);
    }

    #[test]
    fn rejects_missing_pulse_and_bad_norm() {
        let sp = space1(30.0, 90, 10, 9);
        let spec = crate::models::free(&sp, &[1.0])
            .unwrap()
            .with_control(ControlTerm { dof: 0, coupling: Coupling::Momentum, signal: 0 });
        let psi = coherent_state(&sp, &[(0.0, 0.0, 1.2)]).unwrap();
        let st = ReducedState::from_grid(&sp, &psi, 1e-6, DEFAULT_RADIUS).unwrap();
        let cfg = PropagationConfig::default();
        assert!(tdse_adaptive(&spec, sp.clone(), st.clone(), (0.0, 1.0), &[], &cfg).is_err());
        let spec0 = crate::models::free(&sp, &[1.0]).unwrap();
        let mut bad = st;
        bad.coeffs.iter_mut().for_each(|z| *z *= 2.0);
        assert!(tdse_adaptive(&spec0, sp, bad, (0.0, 1.0), &[], &cfg).is_err());
    }
}
