//! Reference Ornstein-Uhlenbeck process in sine coordinates.
//!
//! Each mode `k` of the residual path evolves as
//! `dr = -lambda_k r dt + sigma_t sqrt(w_k) dW`, started at zero, so its
//! marginal is a centered Gaussian with variance `q_t^(k)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FasError, Result};
use crate::spectral::{EigenSystem, SpectralCoeffs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSchedule {
    Constant { sigma: f64 },
    Geometric { beta_min: f64, beta_max: f64, horizon: f64 },
}

impl NoiseSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSchedule::Constant { sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(FasError::InvalidParameter(format!("sigma must be positive, got {sigma}")));
                }
            }
            NoiseSchedule::Geometric {
                beta_min,
                beta_max,
                horizon,
            } => {
                if !(beta_min > 0.0 && beta_max > beta_min) || !beta_max.is_finite() {
                    return Err(FasError::InvalidParameter(format!(
                        "geometric schedule needs 0 < beta_min < beta_max, got {beta_min}, {beta_max}"
                    )));
                }
                if !(horizon > 0.0) || !horizon.is_finite() {
                    return Err(FasError::InvalidParameter(format!("horizon must be positive, got {horizon}")));
                }
            }
        }
        Ok(())
    }

    /// `(beta, alpha)` with `sigma_t = beta e^{alpha t}`. Constant schedules have `alpha = 0`.
    pub fn beta_alpha(&self) -> (f64, f64) {
        match *self {
            NoiseSchedule::Constant { sigma } => (sigma, 0.0),
            NoiseSchedule::Geometric {
                beta_min,
                beta_max,
                horizon,
            } => {
                let ratio = beta_max / beta_min;
                let beta = beta_min * ratio.powf(horizon) * (2.0 * ratio.ln()).sqrt();
                (beta, -ratio.ln())
            }
        }
    }

    /// Unchecked `sigma_t`.
    pub fn sigma(&self, t: f64) -> f64 {
        let (beta, alpha) = self.beta_alpha();
        beta * (alpha * t).exp()
    }

    /// Same schedule with `beta_min` and `beta_max` multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> NoiseSchedule {
        match *self {
            NoiseSchedule::Constant { sigma } => NoiseSchedule::Constant { sigma: sigma * factor },
            NoiseSchedule::Geometric {
                beta_min,
                beta_max,
                horizon,
            } => NoiseSchedule::Geometric {
                beta_min: beta_min * factor,
                beta_max: beta_max * factor,
                horizon,
            },
        }
    }
}

/// Variance at time `t` of a mode with eigenvalue `lambda` and covariance weight `w`.
pub fn ou_variance(schedule: &NoiseSchedule, lambda: f64, w: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let (beta, alpha) = schedule.beta_alpha();
    let b2w = beta * beta * w;
    let rate = alpha + lambda;
    if rate == 0.0 {
        return t * b2w * (2.0 * alpha * t).exp();
    }
    // e^{2 alpha t} - e^{-2 lambda t}, factored so neither exponential overflows
    let diff = if rate > 0.0 {
        (2.0 * alpha * t).exp() * -(-2.0 * rate * t).exp_m1()
    } else {
        (-2.0 * lambda * t).exp() * (2.0 * rate * t).exp_m1()
    };
    b2w * diff / (2.0 * rate)
}

fn draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProcess {
    schedule: NoiseSchedule,
    eig: EigenSystem,
    horizon: f64,
    q_terminal: Vec<f64>,
    q_invariant: Vec<f64>,
}

impl ReferenceProcess {
    pub fn new(schedule: NoiseSchedule, eig: EigenSystem, horizon: f64) -> Result<Self> {
        schedule.validate()?;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(FasError::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        if let NoiseSchedule::Geometric { horizon: h, .. } = schedule {
            if (h - horizon).abs() > 1e-12 * horizon {
                return Err(FasError::InvalidParameter(format!(
                    "schedule horizon {h} differs from process horizon {horizon}"
                )));
            }
        }
        let sigma_inf = schedule.sigma(horizon);
        let q_terminal = (0..eig.n_modes())
            .map(|k| ou_variance(&schedule, eig.lambda(k), eig.q_weight(k), horizon))
            .collect();
        let q_invariant = (0..eig.n_modes())
            .map(|k| 0.5 * sigma_inf * sigma_inf * eig.q_weight(k) / eig.lambda(k))
            .collect();
        Ok(Self {
            schedule,
            eig,
            horizon,
            q_terminal,
            q_invariant,
        })
    }

    /// Same schedule and horizon on another eigensystem.
    pub fn with_eigensystem(&self, eig: EigenSystem) -> Result<Self> {
        Self::new(self.schedule, eig, self.horizon)
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn eig(&self) -> &EigenSystem {
        &self.eig
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_modes(&self) -> usize {
        self.eig.n_modes()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon;
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(FasError::TimeOutOfRange { t, horizon: self.horizon });
        }
        Ok(())
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if k >= self.n_modes() {
            return Err(FasError::InvalidParameter(format!(
                "mode index {k} out of range for {} modes",
                self.n_modes()
            )));
        }
        Ok(())
    }

    pub fn sigma_at(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.schedule.sigma(t))
    }

    /// Limiting noise level, taken as the schedule's terminal value.
    pub fn sigma_inf(&self) -> f64 {
        self.schedule.sigma(self.horizon)
    }

    /// `q_t^(k)` for a 0-based mode index.
    pub fn mode_variance(&self, k: usize, t: f64) -> Result<f64> {
        self.check_time(t)?;
        self.check_mode(k)?;
        Ok(ou_variance(&self.schedule, self.eig.lambda(k), self.eig.q_weight(k), t))
    }

    pub fn mode_variances(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        Ok((0..self.n_modes())
            .map(|k| ou_variance(&self.schedule, self.eig.lambda(k), self.eig.q_weight(k), t))
            .collect())
    }

    pub fn terminal_variances(&self) -> &[f64] {
        &self.q_terminal
    }

    pub fn invariant_variance(&self, k: usize) -> Result<f64> {
        self.check_mode(k)?;
        Ok(self.q_invariant[k])
    }

    pub fn invariant_variances(&self) -> &[f64] {
        &self.q_invariant
    }

    fn check_coeffs(&self, r: &SpectralCoeffs) -> Result<()> {
        if r.n_modes() != self.n_modes() {
            return Err(FasError::shape(format!("{} modes", self.n_modes()), r.n_modes()));
        }
        if let Some(k) = self.q_terminal.iter().position(|&q| !(q > 0.0)) {
            return Err(FasError::InvalidParameter(format!("terminal variance of mode {k} is zero")));
        }
        Ok(())
    }

    /// Log density ratio of the time-`T` reference marginal against the invariant law.
    pub fn log_rnd(&self, r: &SpectralCoeffs) -> Result<f64> {
        self.check_coeffs(r)?;
        let mut total = 0.0;
        for (k, row) in r.0.outer_iter().enumerate() {
            let (qt, qi) = (self.q_terminal[k], self.q_invariant[k]);
            let log_ratio = (qt / qi).ln();
            let prec = 1.0 / qt - 1.0 / qi;
            for &x in row {
                total -= 0.5 * (log_ratio + x * x * prec);
            }
        }
        Ok(total)
    }

    pub fn grad_log_rnd(&self, r: &SpectralCoeffs) -> Result<SpectralCoeffs> {
        self.check_coeffs(r)?;
        let mut out = r.0.clone();
        for (k, mut row) in out.outer_iter_mut().enumerate() {
            let prec = 1.0 / self.q_terminal[k] - 1.0 / self.q_invariant[k];
            row.mapv_inplace(|x| -x * prec);
        }
        Ok(SpectralCoeffs(out))
    }

    /// Mean and variance of mode `k` at time `t` given the terminal value `r_t_end`.
    pub fn bridge_moments(&self, k: usize, t: f64, r_end: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        self.check_mode(k)?;
        let t = t.clamp(0.0, self.horizon);
        if t >= self.horizon {
            return Ok((r_end, 0.0));
        }
        let qt = ou_variance(&self.schedule, self.eig.lambda(k), self.eig.q_weight(k), t);
        if qt == 0.0 {
            return Ok((0.0, 0.0));
        }
        let qe = self.q_terminal[k];
        let decay = (-(self.horizon - t) * self.eig.lambda(k)).exp();
        let mean = qt / qe * decay * r_end;
        let var = (qt - qt * qt * decay * decay / qe).max(0.0);
        Ok((mean, var))
    }

    /// Draw `R_t` from the reference bridge pinned at `R_0 = 0` and `R_T = r_end`.
    pub fn sample_bridge<R: Rng + ?Sized>(&self, r_end: &SpectralCoeffs, t: f64, rng: &mut R) -> Result<SpectralCoeffs> {
        self.check_coeffs(r_end)?;
        self.check_time(t)?;
        let mut out = r_end.0.clone();
        for (k, mut row) in out.outer_iter_mut().enumerate() {
            for x in row.iter_mut() {
                let (m, v) = self.bridge_moments(k, t, *x)?;
                *x = if v > 0.0 { m + v.sqrt() * draw(rng) } else { m };
            }
        }
        Ok(SpectralCoeffs(out))
    }

    /// Independent draws from the centered time-`t` marginal.
    pub fn sample_marginal<R: Rng + ?Sized>(&self, t: f64, channels: usize, rng: &mut R) -> Result<SpectralCoeffs> {
        let q = self.mode_variances(t)?;
        let mut out = SpectralCoeffs::zeros(self.n_modes(), channels);
        for (k, mut row) in out.0.outer_iter_mut().enumerate() {
            if q[k] > 0.0 {
                let sd = q[k].sqrt();
                row.iter_mut().for_each(|x| *x = sd * draw(rng));
            }
        }
        Ok(out)
    }
}
