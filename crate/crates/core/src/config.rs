//! JSON run configuration and the objects it resolves to.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::control::ControlArch;
use crate::dynamics::ReferencePath;
use crate::energy::{
    gradient_gate, CompositeEnergy, EnergyModel, ExternalEnergy, Idpp, MullerBrown, PhysParams, Potential,
    QuadraticModeEnergy, TpdFkNll, TpdSyntheticNll,
};
use crate::error::{FasError, Result};
use crate::measures::{NoiseSchedule, ReferenceProcess};
use crate::pathinit::{gradient_flow_refine, idpp_init};
use crate::spectral::{CovarianceScaling, EigenSystem, Grid};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Interior grid points `K`.
    pub n_points: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 100,
            length: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigsysConfig {
    pub kappa: f64,
    pub s: f64,
    pub scaling: CovarianceScaling,
}

impl Default for EigsysConfig {
    fn default() -> Self {
        Self {
            kappa: 1e-2,
            s: 1.0,
            scaling: CovarianceScaling::Laplacian,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn beta_min_default() -> f64 {
    0.1
}

fn beta_max_default() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Geometric {
        #[serde(default = "beta_min_default")]
        beta_min: f64,
        #[serde(default = "beta_max_default")]
        beta_max: f64,
        #[serde(default = "one")]
        horizon: f64,
    },
    Constant {
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default = "one")]
        horizon: f64,
    },
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::Geometric {
            beta_min: 0.1,
            beta_max: 10.0,
            horizon: 1.0,
        }
    }
}

impl ScheduleConfig {
    pub fn horizon(&self) -> f64 {
        match *self {
            ScheduleConfig::Geometric { horizon, .. } | ScheduleConfig::Constant { horizon, .. } => horizon,
        }
    }

    pub fn schedule(&self) -> NoiseSchedule {
        match *self {
            ScheduleConfig::Geometric {
                beta_min,
                beta_max,
                horizon,
            } => NoiseSchedule::Geometric {
                beta_min,
                beta_max,
                horizon,
            },
            ScheduleConfig::Constant { sigma, .. } => NoiseSchedule::Constant { sigma },
        }
    }

    /// Multiply the noise scale by `factor`, keeping the horizon.
    pub fn rescaled(&self, factor: f64) -> Self {
        match *self {
            ScheduleConfig::Geometric {
                beta_min,
                beta_max,
                horizon,
            } => ScheduleConfig::Geometric {
                beta_min: beta_min * factor,
                beta_max: beta_max * factor,
                horizon,
            },
            ScheduleConfig::Constant { sigma, horizon } => ScheduleConfig::Constant {
                sigma: sigma * factor,
                horizon,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    #[default]
    MullerBrownTpd,
    MullerBrownFk,
    Quadratic,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub kind: EnergyKind,
    /// Mode stiffnesses for `quadratic`.
    pub b: Vec<f64>,
    /// Program and arguments for `external`.
    pub command: Option<String>,
    pub args: Vec<String>,
    pub work_dir: Option<PathBuf>,
    /// Weight of the IDPP bond-length regularizer added to the terminal cost.
    pub lambda_reg: f64,
    /// Finite-difference gate on the energy gradient at the initial path; skipped for `external`.
    pub gate_tolerance: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            kind: EnergyKind::MullerBrownTpd,
            b: Vec::new(),
            command: None,
            args: Vec::new(),
            work_dir: None,
            lambda_reg: 0.0,
            gate_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub atom_dim: usize,
    pub idpp_steps: usize,
    pub idpp_step_size: f64,
    /// Gradient-flow refinement of the initial path against the energy.
    pub flow_steps: usize,
    pub flow_eps: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            a: MullerBrown::STATE_A.to_vec(),
            b: MullerBrown::STATE_B.to_vec(),
            atom_dim: 2,
            idpp_steps: 0,
            idpp_step_size: 0.01,
            flow_steps: 0,
            flow_eps: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// THP radius around the target state.
    pub thp_eps: f64,
    /// Landscape box `[x_min, x_max, y_min, y_max]`.
    pub bbox: [f64; 4],
    pub nx: usize,
    pub ny: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thp_eps: 0.1,
            bbox: [-1.5, 1.2, -0.5, 2.0],
            nx: 100,
            ny: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub eigsys: EigsysConfig,
    pub schedule: ScheduleConfig,
    pub arch: ControlArch,
    pub train: TrainConfig,
    pub energy: EnergyConfig,
    /// Unset means the defaults for the grid; the resolved value is always written back.
    pub phys: Option<PhysParams>,
    pub path: PathConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            eigsys: EigsysConfig::default(),
            schedule: ScheduleConfig::default(),
            arch: ControlArch::default(),
            train: TrainConfig::default(),
            energy: EnergyConfig::default(),
            phys: None,
            path: PathConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Objects a run needs, built from a [`RunConfig`].
pub struct Setup {
    pub grid: Grid,
    pub process: ReferenceProcess,
    pub reference: ReferencePath,
    pub energy: Box<dyn EnergyModel>,
    pub potential: Option<Arc<dyn Potential>>,
    pub phys: PhysParams,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FasError::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.n_points == 0 || !(self.grid.length > 0.0) {
            return Err(FasError::InvalidParameter("grid needs n_points >= 1 and a positive length".into()));
        }
        self.schedule.schedule().validate()?;
        if !(self.schedule.horizon() > 0.0) {
            return Err(FasError::InvalidParameter("horizon must be positive".into()));
        }
        self.arch.validate()?;
        self.train.validate()?;
        if let Some(p) = &self.phys {
            p.validate()?;
        }
        let d = self.path.a.len();
        if d == 0 || self.path.b.len() != d {
            return Err(FasError::InvalidParameter(format!(
                "path endpoints must have equal nonzero length, got {} and {}",
                d,
                self.path.b.len()
            )));
        }
        if self.arch.channels != d {
            return Err(FasError::InvalidParameter(format!(
                "arch.channels = {} but the endpoints have dimension {d}",
                self.arch.channels
            )));
        }
        match self.energy.kind {
            EnergyKind::MullerBrownTpd | EnergyKind::MullerBrownFk if d != 2 => {
                return Err(FasError::InvalidParameter("Müller-Brown energies need 2-D endpoints".into()));
            }
            EnergyKind::External if self.energy.command.is_none() => {
                return Err(FasError::InvalidParameter("external energy needs a command".into()));
            }
            _ => {}
        }
        if self.energy.lambda_reg < 0.0 {
            return Err(FasError::InvalidParameter("lambda_reg must be non-negative".into()));
        }
        if !(self.eval.thp_eps > 0.0) || self.eval.nx == 0 || self.eval.ny == 0 {
            return Err(FasError::InvalidParameter("eval needs thp_eps > 0 and nx, ny >= 1".into()));
        }
        Ok(())
    }

    pub fn resolved_phys(&self) -> PhysParams {
        self.phys.unwrap_or_else(|| PhysParams::for_grid(self.grid.n_points))
    }

    /// Copy with every defaulted value made explicit.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.phys = Some(self.resolved_phys());
        out
    }

    /// Same run sampled on a grid `factor` times finer with the noise rescaled by `1 + 2 log10 factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(FasError::InvalidParameter("refine factor must be positive".into()));
        }
        let mut out = self.resolved();
        let k = self.grid.n_points;
        let k2 = factor * k;
        out.grid.n_points = k2;
        out.schedule = self.schedule.rescaled(beta_rescale(factor as f64));
        if let Some(p) = out.phys.as_mut() {
            p.delta_u *= (k + 1) as f64 / (k2 + 1) as f64;
        }
        Ok(out)
    }

    pub fn build(&self) -> Result<Setup> {
        self.validate()?;
        let grid = Grid::new(self.grid.n_points, self.grid.length)?;
        let eig = EigenSystem::new(
            self.grid.n_points,
            self.grid.length,
            self.eigsys.kappa,
            self.eigsys.s,
            self.eigsys.scaling,
        )?;
        let process = ReferenceProcess::new(self.schedule.schedule(), eig, self.schedule.horizon())?;
        let phys = self.resolved_phys();
        phys.validate()?;
        let a = Array1::from(self.path.a.clone());
        let b = Array1::from(self.path.b.clone());
        let mut reference = idpp_init(
            a.view(),
            b.view(),
            &grid,
            self.path.atom_dim,
            self.path.idpp_steps,
            self.path.idpp_step_size,
        )?;

        let mb: Arc<dyn Potential> = Arc::new(MullerBrown);
        let (base, potential): (Box<dyn EnergyModel>, Option<Arc<dyn Potential>>) = match self.energy.kind {
            EnergyKind::MullerBrownTpd => (Box::new(TpdSyntheticNll::new(phys, mb.clone())?), Some(mb)),
            EnergyKind::MullerBrownFk => (Box::new(TpdFkNll::new(phys, mb.clone())?), Some(mb)),
            EnergyKind::Quadratic => (Box::new(QuadraticModeEnergy::new(self.energy.b.clone(), reference.clone())?), None),
            EnergyKind::External => (
                Box::new(ExternalEnergy {
                    command: self.energy.command.clone().expect("validated"),
                    args: self.energy.args.clone(),
                    work_dir: self.energy.work_dir.clone().unwrap_or_else(std::env::temp_dir),
                }),
                None,
            ),
        };
        let energy: Box<dyn EnergyModel> = if self.energy.lambda_reg > 0.0 {
            Box::new(CompositeEnergy {
                terms: vec![
                    (1.0, base),
                    (self.energy.lambda_reg, Box::new(Idpp::new(a.view(), b.view(), self.path.atom_dim)?)),
                ],
            })
        } else {
            base
        };

        if self.energy.kind != EnergyKind::External {
            let err = gradient_gate(energy.as_ref(), reference.path(), 1e-5)?;
            if err > self.energy.gate_tolerance {
                return Err(FasError::InvalidParameter(format!(
                    "energy gradient disagrees with finite differences (relative error {err:.3e})"
                )));
            }
        }
        if self.path.flow_steps > 0 {
            let flow = gradient_flow_refine(reference.path(), energy.as_ref(), self.path.flow_eps, self.path.flow_steps)?;
            info!(
                "gradient flow: energy {:.4} -> {:.4}",
                flow.trace[0],
                flow.trace.iter().copied().fold(f64::INFINITY, f64::min)
            );
            reference = ReferencePath::from_path(flow.path, &grid)?;
        }
        Ok(Setup {
            grid,
            process,
            reference,
            energy,
            potential,
            phys,
        })
    }
}

/// Noise multiplier applied when sampling on a grid refined by `factor`.
pub fn beta_rescale(factor: f64) -> f64 {
    1.0 + 2.0 * factor.log10()
}
