//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pvb_core::dynamics::{ControlPulse, PropagationConfig};
use pvb_core::solvers::TiseConfig;
use pvb_core::vn_basis::Alignment;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dofs: Vec<DofConfig>,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tise: Option<TiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tdse: Option<TdseConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DofConfig {
    pub grid: GridConfig,
    pub lattice: LatticeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub length: f64,
    pub n: usize,
    #[serde(default)]
    pub x0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub nx: usize,
    pub np: usize,
    /// Gaussian width; `None` picks the symmetric width for the lattice spacing.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub alignment: Alignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Free {
        masses: Vec<f64>,
    },
    DoubleWell {
        m: f64,
        omega: f64,
        b: f64,
        d: f64,
    },
    Harmonic {
        m: f64,
        omega: f64,
    },
    Helium1d {
        #[serde(default = "default_soft_core")]
        a0: f64,
        #[serde(default = "default_charge")]
        nuclear_charge: f64,
        #[serde(default = "default_masses")]
        masses: [f64; 2],
        #[serde(default = "default_sop_tolerance")]
        sop_tolerance: f64,
    },
    /// One CSV file per DoF with header `x,v` and one row per grid point.
    Tabulated {
        masses: Vec<f64>,
        potentials: Vec<PathBuf>,
    },
}

fn default_soft_core() -> f64 {
    pvb_core::models::HELIUM_SOFT_CORE
}

fn default_charge() -> f64 {
    2.0
}

fn default_masses() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_sop_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    Position,
    Momentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub dof: usize,
    pub coupling: CouplingKind,
    pub signal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Lowest eigenmode from an adaptive solve with these settings.
    GroundState {
        #[serde(default)]
        tise: TiseConfig,
    },
    /// Product of Gaussians, one `[x0, p0, sigma]` per DoF.
    Coherent { centres: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdseConfig {
    pub t_span: [f64; 2],
    pub initial_state: InitialState,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub pulses: Vec<ControlPulse>,
    #[serde(default)]
    pub couplings: Vec<CouplingConfig>,
    /// Bound on `|du/dt|` used for the step cap instead of the sampled pulse slope.
    #[serde(default)]
    pub max_du_dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Per-mode heatmaps (TISE) and snapshot heatmaps (TDSE).
    pub heatmaps: bool,
    /// Cadence of pulse.csv samples in accepted steps.
    pub pulse_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("pvb_out"), heatmaps: true, pulse_every: 1 }
    }
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse(&text)?;
    // tabulated potentials are relative to the config file
    if let ModelConfig::Tabulated { potentials, .. } = &mut cfg.model {
        let base = path.parent().unwrap_or(Path::new("."));
        for p in potentials.iter_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(cfg)
}

fn finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{field}` must be finite, got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{field}` must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.dofs.is_empty() {
            return Err(CliError::Config("`dofs` must list at least one degree of freedom".into()));
        }
        for (i, d) in self.dofs.iter().enumerate() {
            positive(&format!("dofs[{i}].grid.length"), d.grid.length)?;
            finite(&format!("dofs[{i}].grid.x0"), d.grid.x0)?;
            if d.lattice.nx * d.lattice.np != d.grid.n {
                return Err(CliError::Config(format!(
                    "`dofs[{i}].lattice`: nx * np = {} does not match grid n = {}",
                    d.lattice.nx * d.lattice.np,
                    d.grid.n
                )));
            }
            if let Some(s) = d.lattice.sigma {
                positive(&format!("dofs[{i}].lattice.sigma"), s)?;
            }
        }
        match (&self.tise, &self.tdse) {
            (Some(_), Some(_)) => return Err(CliError::Config("exactly one of `tise` and `tdse` may be given".into())),
            (None, None) => return Err(CliError::Config("one of `tise` or `tdse` is required".into())),
            _ => {}
        }
        let nd = self.n_dofs();
        let want_dofs = |name: &str, n: usize| {
            if n == nd {
                Ok(())
            } else {
                Err(CliError::Config(format!("`model.{name}` has {n} entries for {nd} degrees of freedom")))
            }
        };
        match &self.model {
            ModelConfig::Free { masses } => {
                want_dofs("masses", masses.len())?;
                for (i, m) in masses.iter().enumerate() {
                    positive(&format!("model.masses[{i}]"), *m)?;
                }
            }
            ModelConfig::DoubleWell { m, omega, b, d } => {
                if nd != 1 {
                    return Err(CliError::Config("`model`: double_well needs exactly one degree of freedom".into()));
                }
                positive("model.m", *m)?;
                positive("model.omega", *omega)?;
                positive("model.b", *b)?;
                positive("model.d", *d)?;
            }
            ModelConfig::Harmonic { m, omega } => {
                positive("model.m", *m)?;
                positive("model.omega", *omega)?;
            }
            ModelConfig::Helium1d { a0, nuclear_charge, masses, sop_tolerance } => {
                if nd != 2 {
                    return Err(CliError::Config("`model`: helium1d needs exactly two degrees of freedom".into()));
                }
                positive("model.a0", *a0)?;
                finite("model.nuclear_charge", *nuclear_charge)?;
                positive("model.masses[0]", masses[0])?;
                positive("model.masses[1]", masses[1])?;
                positive("model.sop_tolerance", *sop_tolerance)?;
            }
            ModelConfig::Tabulated { masses, potentials } => {
                want_dofs("masses", masses.len())?;
                want_dofs("potentials", potentials.len())?;
                for (i, m) in masses.iter().enumerate() {
                    positive(&format!("model.masses[{i}]"), *m)?;
                }
            }
        }
        if let Some(t) = &self.tise {
            t.validate().map_err(|e| CliError::Config(format!("`tise`: {e}")))?;
        }
        if let Some(t) = &self.tdse {
            t.validate(nd)?;
        }
        if self.output.pulse_every == 0 {
            return Err(CliError::Config("`output.pulse_every` must be at least 1".into()));
        }
        Ok(())
    }
}

impl TdseConfig {
    fn validate(&self, n_dofs: usize) -> Result<(), CliError> {
        let [t0, t1] = self.t_span;
        finite("tdse.t_span[0]", t0)?;
        finite("tdse.t_span[1]", t1)?;
        if t1 < t0 {
            return Err(CliError::Config(format!("`tdse.t_span` is reversed: [{t0}, {t1}]")));
        }
        self.propagation.validate().map_err(|e| CliError::Config(format!("`tdse.propagation`: {e}")))?;
        for (i, p) in self.pulses.iter().enumerate() {
            p.validate().map_err(|e| CliError::Config(format!("`tdse.pulses[{i}]`: {e}")))?;
        }
        for (i, c) in self.couplings.iter().enumerate() {
            if c.dof >= n_dofs {
                return Err(CliError::Config(format!("`tdse.couplings[{i}].dof` = {} is out of range", c.dof)));
            }
            if c.signal >= self.pulses.len() {
                return Err(CliError::Config(format!(
                    "`tdse.couplings[{i}].signal` = {} has no pulse ({} given)",
                    c.signal,
                    self.pulses.len()
                )));
            }
        }
        if let Some(s) = self.max_du_dt {
            positive("tdse.max_du_dt", s)?;
        }
        match &self.initial_state {
            InitialState::GroundState { tise } => {
                tise.validate().map_err(|e| CliError::Config(format!("`tdse.initial_state.tise`: {e}")))?;
            }
            InitialState::Coherent { centres } => {
                if centres.len() != n_dofs {
                    return Err(CliError::Config(format!(
                        "`tdse.initial_state.centres` has {} entries for {n_dofs} degrees of freedom",
                        centres.len()
                    )));
                }
                for (i, c) in centres.iter().enumerate() {
                    finite(&format!("tdse.initial_state.centres[{i}][0]"), c[0])?;
                    finite(&format!("tdse.initial_state.centres[{i}][1]"), c[1])?;
                    positive(&format!("tdse.initial_state.centres[{i}][2]"), c[2])?;
                }
            }
        }
        Ok(())
    }
}
