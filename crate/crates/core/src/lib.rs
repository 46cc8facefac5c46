//! Function-space adjoint sampler.
//!
//! A stochastic-optimal-control diffusion sampler whose state is a path
//! `[0, L] -> R^d` with pinned endpoints. The path is lifted as
//! `X = x0 + R` where the residual `R` lives in the span of the Dirichlet
//! sine basis, evolves by a mode-wise Ornstein-Uhlenbeck process, and is
//! steered by a learned control trained with adjoint matching.
//!
//! Module map:
//! - [`spectral`]: grid, sine basis, DST transforms, eigen-system.
//! - [`measures`]: noise schedules, OU marginals, Radon-Nikodym correction, bridges.
//! - [`dynamics`]: path types, lifting, controlled rollouts.
//! - [`control`]: spectral operator network, reverse-mode loss gradient, Adam, checkpoints.
//! - [`energy`]: Müller-Brown, transition-path NLLs, IDPP, terminal adjoint.
//! - [`pathinit`]: reference-path construction and refinement.
//! - [`trainer`]: replay buffer and the training loop.
//! - [`metrics`]: THP, ETS, LLK, Kabsch RMSD.
//! - [`config`]: JSON run configuration.
//! - [`io`]: trajectory file formats.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod io;
pub mod measures;
pub mod metrics;
pub mod pathinit;
pub mod spectral;
pub mod trainer;

pub use control::{Adam, ControlArch, ControlParams, SpectralControl, Weighting};
pub use dynamics::{lift, reference_path, simulate, Integrator, PathSample, ReferencePath, Rollout};
pub use energy::{EnergyModel, MullerBrown, PhysParams, Potential};
pub use error::{FasError, Result};
pub use measures::{NoiseSchedule, ReferenceProcess};
pub use spectral::{build_basis, CovarianceScaling, EigenSystem, Grid, SineBasis, SpectralCoeffs};
pub use trainer::{ReplayBuffer, TrainConfig};
