//! Replay buffer, adjoint-matching training loop and the SOC cost estimator.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use log::{debug, info, warn};
use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{Adam, SpectralControl, Weighting};
use crate::dynamics::{simulate, Integrator, ReferencePath, SimOptions};
use crate::energy::{terminal_adjoint_from, Clip, ClipMode, ClipScope, EnergyModel, Potential};
use crate::error::{FasError, Result};
use crate::measures::ReferenceProcess;
use crate::metrics::{ets, mean_std};
use crate::spectral::{SineBasis, SpectralCoeffs};

/// Epochs in a row without a finite loss before training gives up.
const NAN_PATIENCE: usize = 3;

/// Stream reserved for minibatch draws, far away from the rollout streams.
const MINIBATCH_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry {
    /// Terminal residual coefficients, `K x d`.
    pub coeffs: Array2<f64>,
    /// Clipped terminal adjoint on the grid, `K x d`.
    pub adjoint: Array2<f64>,
}

/// FIFO store of the most recent terminal states and their adjoints.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<BufferEntry>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(FasError::InvalidParameter("buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: BufferEntry) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn get(&self, i: usize) -> Option<&BufferEntry> {
        self.entries.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    /// Uniform draw with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Result<Vec<&'a BufferEntry>> {
        if self.entries.is_empty() {
            return Err(FasError::EmptyBatch);
        }
        Ok((0..n).map(|_| &self.entries[rng.random_range(0..self.entries.len())]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub grad_steps: usize,
    pub rollouts: usize,
    pub buffer_capacity: usize,
    pub lr: f64,
    pub alpha_max: f64,
    pub n_sde_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weighting: Weighting,
    pub clip: ClipMode,
    pub clip_scope: ClipScope,
    pub integrator: Integrator,
    pub threads: usize,
    /// Write a checkpoint every this many epochs; 0 disables intermediate checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            grad_steps: 100,
            rollouts: 512,
            buffer_capacity: 10_000,
            lr: 1e-4,
            alpha_max: 100.0,
            n_sde_steps: 100,
            batch_size: 256,
            seed: 0,
            weighting: Weighting::Unweighted,
            clip: ClipMode::Global,
            clip_scope: ClipScope::Total,
            integrator: Integrator::EulerMaruyama,
            threads: 1,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("epochs", self.epochs),
            ("grad_steps", self.grad_steps),
            ("rollouts", self.rollouts),
            ("buffer_capacity", self.buffer_capacity),
            ("n_sde_steps", self.n_sde_steps),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(FasError::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(FasError::InvalidParameter(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.alpha_max > 0.0) {
            return Err(FasError::InvalidParameter(format!("alpha_max must be positive, got {}", self.alpha_max)));
        }
        Ok(())
    }

    pub fn clip_settings(&self) -> Clip {
        Clip {
            max_norm: self.alpha_max,
            mode: self.clip,
            scope: self.clip_scope,
        }
    }

    pub fn sim_options(&self, epoch: usize) -> SimOptions {
        SimOptions {
            n_steps: self.n_sde_steps,
            integrator: self.integrator,
            seed: self.seed,
            record_trajectory: false,
            threads: self.threads,
            first_sample: (epoch * self.rollouts) as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean matching loss over the epoch's finite gradient steps.
    pub loss: f64,
    pub ets_mean: Option<f64>,
    pub ets_std: Option<f64>,
    pub wall_ms: u128,
    /// Rollouts whose terminal adjoint was not finite.
    pub dropped: usize,
    pub buffer_len: usize,
}

/// What the observer wants the loop to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

pub struct TrainOutcome {
    pub control: SpectralControl,
    pub log: Vec<EpochLog>,
    pub optimizer: Adam,
}

/// Everything the loop needs besides hyper-parameters.
pub struct Problem<'a> {
    pub process: &'a ReferenceProcess,
    pub reference: &'a ReferencePath,
    pub energy: &'a dyn EnergyModel,
    /// Pointwise potential for ETS logging, when the energy has one.
    pub potential: Option<Arc<dyn Potential>>,
}

/// Roll out, compute adjoints, and push them. Returns the rollout's ETS values and drop count.
fn refresh(
    cfg: &TrainConfig,
    epoch: usize,
    control: &SpectralControl,
    prob: &Problem<'_>,
    basis: &SineBasis,
    buffer: &mut ReplayBuffer,
) -> Result<(Vec<f64>, usize)> {
    let roll = simulate(control, prob.process, prob.reference, cfg.rollouts, &cfg.sim_options(epoch))?;
    let evals = prob.energy.evaluate_batch(&roll.paths);
    let mut dropped = 0;
    let mut tops = Vec::new();
    for (j, (path, ev)) in roll.paths.iter().zip(evals).enumerate() {
        let adj = ev.and_then(|(u, g)| {
            terminal_adjoint_from(u, g, path, prob.reference, prob.process, basis, cfg.clip_settings())
        });
        match adj {
            Ok(a) => buffer.push(BufferEntry {
                coeffs: roll.coeffs.index_axis(Axis(1), j).to_owned(),
                adjoint: a.grad,
            }),
            Err(err) => {
                debug!("dropping rollout {j}: {err}");
                dropped += 1;
            }
        }
        if let Some(p) = &prob.potential {
            if let Ok(e) = ets(path, p.as_ref()) {
                tops.push(e);
            }
        }
    }
    Ok((tops, dropped))
}

/// Draw a minibatch: per-sample times, bridge states lifted to the grid, and adjoint targets.
pub fn bridge_minibatch<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    batch: usize,
    process: &ReferenceProcess,
    reference: &ReferencePath,
    basis: &SineBasis,
    rng: &mut R,
) -> Result<(Array3<f64>, Vec<f64>, Array3<f64>)> {
    let picks = buffer.sample(batch, rng)?;
    let k = basis.n_points();
    let d = reference.channels();
    let horizon = process.horizon();
    let mut x = Array3::zeros((k, batch, d));
    let mut y = Array3::zeros((k, batch, d));
    let mut ts = Vec::with_capacity(batch);
    for (j, e) in picks.into_iter().enumerate() {
        let t = rng.random_range(0.0..horizon);
        let rt = process.sample_bridge(&SpectralCoeffs(e.coeffs.clone()), t, rng)?;
        let xt = basis.idst(&rt)? + &reference.path().interior;
        x.index_axis_mut(Axis(1), j).assign(&xt);
        y.index_axis_mut(Axis(1), j).assign(&e.adjoint);
        ts.push(t);
    }
    Ok((x, ts, y))
}

/// Adjoint-matching training.
///
/// The observer runs after every epoch and may stop the loop early.
pub fn train(
    cfg: &TrainConfig,
    mut control: SpectralControl,
    prob: &Problem<'_>,
    observer: &mut dyn FnMut(&EpochLog, &SpectralControl) -> Result<Flow>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let grid = *prob.reference.grid();
    if control.grid() != &grid {
        control = control.rebind(&grid)?;
    }
    let basis = SineBasis::new(grid);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut opt = Adam::new(control.params().n_params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(MINIBATCH_STREAM);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut bad_epochs = 0;

    for epoch in 0..cfg.epochs {
        let clock = Instant::now();
        let (tops, dropped) = match refresh(cfg, epoch, &control, prob, &basis, &mut buffer) {
            Ok(r) => r,
            Err(FasError::NumericalAbort(msg)) => {
                warn!("epoch {epoch}: rollout aborted: {msg}");
                (Vec::new(), cfg.rollouts)
            }
            Err(e) => return Err(e),
        };

        let mut total = 0.0;
        let mut finite = 0usize;
        if !buffer.is_empty() {
            for _ in 0..cfg.grad_steps {
                let (x, ts, y) = bridge_minibatch(&buffer, cfg.batch_size, prob.process, prob.reference, &basis, &mut rng)?;
                match control.loss_and_grad(x.view(), &ts, y.view(), cfg.weighting, prob.process) {
                    Ok((loss, grad)) => {
                        if opt.step(control.theta_mut(), &grad, cfg.lr)? {
                            total += loss;
                            finite += 1;
                        }
                    }
                    Err(FasError::NonFinite(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        let loss = if finite > 0 { total / finite as f64 } else { f64::NAN };
        bad_epochs = if loss.is_finite() { 0 } else { bad_epochs + 1 };

        let (em, es) = if tops.is_empty() { (None, None) } else {
            let (m, s) = mean_std(&tops);
            (Some(m), Some(s))
        };
        let entry = EpochLog {
            epoch,
            loss,
            ets_mean: em,
            ets_std: es,
            wall_ms: clock.elapsed().as_millis(),
            dropped,
            buffer_len: buffer.len(),
        };
        info!(
            "epoch {epoch}: loss {loss:.6e} ets {} dropped {dropped} buffer {}",
            em.map_or("n/a".to_string(), |v| format!("{v:.3}")),
            buffer.len()
        );
        let flow = observer(&entry, &control)?;
        log.push(entry);
        if bad_epochs >= NAN_PATIENCE {
            return Err(FasError::NumericalAbort(format!(
                "{NAN_PATIENCE} consecutive epochs without a finite loss (last epoch {epoch})"
            )));
        }
        if flow == Flow::Stop {
            break;
        }
    }
    Ok(TrainOutcome {
        control,
        log,
        optimizer: opt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub control_cost: f64,
    pub terminal: f64,
}

/// Monte-Carlo estimate of running control cost plus terminal cost `U + log q_T`.
pub fn soc_cost(
    control: &dyn crate::control::ControlField,
    prob: &Problem<'_>,
    n_samples: usize,
    opts: &SimOptions,
) -> Result<SocEstimate> {
    let roll = simulate(control, prob.process, prob.reference, n_samples, opts)?;
    let mut totals = Vec::with_capacity(n_samples);
    let mut run = 0.0;
    let mut term = 0.0;
    for (j, path) in roll.paths.iter().enumerate() {
        let coeffs = SpectralCoeffs(roll.coeffs.index_axis(Axis(1), j).to_owned());
        let g = prob.energy.energy(path)? + prob.process.log_rnd(&coeffs)?;
        run += roll.control_cost[j];
        term += g;
        totals.push(roll.control_cost[j] + g);
    }
    let (mean, sd) = mean_std(&totals);
    let n = n_samples as f64;
    Ok(SocEstimate {
        mean,
        stderr: sd / n.sqrt(),
        control_cost: run / n,
        terminal: term / n,
    })
}
