//! Dirichlet sine basis on `[0, L]`.
//!
//! Interior grid points are `u_i = i L / (K + 1)` for `i = 1..=K`. The
//! transform matrix `E[k, i] = sqrt(2 / (K + 1)) sin(pi k i / (K + 1))` is
//! orthogonal and symmetric, so the forward and inverse DST-I are the same
//! linear map. Coefficients are stored mode-major: row `k` holds mode
//! `k + 1` for every channel.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{FasError, Result};

/// Above this mode count transforms go through an FFT instead of a dense matrix.
const DENSE_MAX: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_points: usize,
    length: f64,
}

impl Grid {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points == 0 {
            return Err(FasError::InvalidParameter("grid needs at least one interior point".into()));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(FasError::InvalidParameter(format!("domain length must be positive, got {length}")));
        }
        Ok(Self { n_points, length })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Distance between neighbouring points, `L / (K + 1)`.
    pub fn spacing(&self) -> f64 {
        self.length / (self.n_points + 1) as f64
    }

    /// Interior point `i` (0-based), i.e. `u_{i+1}`.
    pub fn point(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Interior points divided by `L`, all in `(0, 1)`.
    pub fn unit_points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| (i + 1) as f64 / (self.n_points + 1) as f64).collect()
    }

    /// Nested refinement: every point of `self` is also a point of the result.
    pub fn nested_refinement(&self, factor: usize) -> Result<Grid> {
        if factor == 0 {
            return Err(FasError::InvalidParameter("refinement factor must be positive".into()));
        }
        Grid::new(factor * (self.n_points + 1) - 1, self.length)
    }
}

/// How the noise covariance `Q` relates to the drift operator `A = kappa^2 (-Laplacian)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceScaling {
    /// `Q = A^{-s}`: weights `lambda_k^{-s}` include the precision scale.
    Operator,
    /// `Q = (-Laplacian)^{-s}`: weights `(pi k / L)^{-2s}`; kappa only stiffens the drift.
    #[default]
    Laplacian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    lambdas: Vec<f64>,
    q_weights: Vec<f64>,
    s: f64,
    kappa: f64,
    length: f64,
    scaling: CovarianceScaling,
}

/// Dirichlet spectrum `lambda_k = kappa^2 (pi k / L)^2`, `k = 1..=K`, with `Q = A^{-s}`.
pub fn build_basis(n_modes: usize, length: f64, kappa: f64, s: f64) -> Result<EigenSystem> {
    EigenSystem::new(n_modes, length, kappa, s, CovarianceScaling::Operator)
}

impl EigenSystem {
    pub fn new(n_modes: usize, length: f64, kappa: f64, s: f64, scaling: CovarianceScaling) -> Result<Self> {
        if n_modes == 0 {
            return Err(FasError::InvalidParameter("mode count must be positive".into()));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(FasError::InvalidParameter(format!("domain length must be positive, got {length}")));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(FasError::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        if !(s > 0.5) || !s.is_finite() {
            return Err(FasError::InvalidParameter(format!(
                "covariance exponent must exceed 1/2 for a trace-class Q, got {s}"
            )));
        }
        let mut lambdas = Vec::with_capacity(n_modes);
        let mut q_weights = Vec::with_capacity(n_modes);
        for k in 1..=n_modes {
            let base = (PI * k as f64 / length).powi(2);
            let lambda = kappa * kappa * base;
            lambdas.push(lambda);
            q_weights.push(match scaling {
                CovarianceScaling::Operator => lambda.powf(-s),
                CovarianceScaling::Laplacian => base.powf(-s),
            });
        }
        Ok(Self {
            lambdas,
            q_weights,
            s,
            kappa,
            length,
            scaling,
        })
    }

    /// Same operator settings on a different mode count.
    pub fn with_modes(&self, n_modes: usize) -> Result<Self> {
        Self::new(n_modes, self.length, self.kappa, self.s, self.scaling)
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.lambdas[k]
    }

    /// Eigenvalues of `Q`.
    pub fn q_weights(&self) -> &[f64] {
        &self.q_weights
    }

    pub fn q_weight(&self, k: usize) -> f64 {
        self.q_weights[k]
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn scaling(&self) -> CovarianceScaling {
        self.scaling
    }

    /// `e^{-t lambda_k}` for every mode.
    pub fn semigroup(&self, t: f64) -> Vec<f64> {
        self.lambdas.iter().map(|l| (-t * l).exp()).collect()
    }

    /// `Q^{1/2}` eigenvalues.
    pub fn sqrt_q(&self) -> Vec<f64> {
        self.q_weights.iter().map(|w| w.sqrt()).collect()
    }

    /// Truncated trace of `Q`.
    pub fn trace_q(&self) -> f64 {
        self.q_weights.iter().sum()
    }
}

/// Per-mode, per-channel coefficients (`K x d`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs(pub Array2<f64>);

impl SpectralCoeffs {
    pub fn zeros(n_modes: usize, channels: usize) -> Self {
        Self(Array2::zeros((n_modes, channels)))
    }

    pub fn n_modes(&self) -> usize {
        self.0.nrows()
    }

    pub fn channels(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Multiply every channel of mode `k` by `factors[k]`.
pub fn scale_modes(coeffs: &SpectralCoeffs, factors: &[f64]) -> Result<SpectralCoeffs> {
    if factors.len() != coeffs.n_modes() {
        return Err(FasError::shape(format!("{} factors", coeffs.n_modes()), factors.len()));
    }
    if let Some(bad) = factors.iter().find(|f| !f.is_finite()) {
        return Err(FasError::NonFinite(format!("mode factor {bad}")));
    }
    let mut out = coeffs.0.clone();
    for (mut row, &f) in out.axis_iter_mut(Axis(0)).zip(factors) {
        row.mapv_inplace(|v| v * f);
    }
    Ok(SpectralCoeffs(out))
}

#[derive(Clone)]
enum Backend {
    Dense(Array2<f64>),
    Fft(Arc<dyn Fft<f64>>),
}

/// Orthonormal DST-I on a fixed grid.
#[derive(Clone)]
pub struct SineBasis {
    grid: Grid,
    backend: Backend,
}

impl fmt::Debug for SineBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.backend {
            Backend::Dense(_) => "dense",
            Backend::Fft(_) => "fft",
        };
        f.debug_struct("SineBasis").field("grid", &self.grid).field("backend", &kind).finish()
    }
}

/// `sqrt(2/(K+1)) sin(pi (k+1) (i+1) / (K+1))` for 0-based `k`, `i`.
pub fn basis_entry(n_points: usize, k: usize, i: usize) -> f64 {
    let n1 = (n_points + 1) as f64;
    // reduce the integer product first so large K keeps full precision in sin
    let m = ((k + 1) * (i + 1)) % (2 * (n_points + 1));
    (2.0 / n1).sqrt() * (PI * m as f64 / n1).sin()
}

/// The first `n_rows` rows of the transform matrix.
pub fn basis_rows(n_points: usize, n_rows: usize) -> Array2<f64> {
    Array2::from_shape_fn((n_rows, n_points), |(k, i)| basis_entry(n_points, k, i))
}

impl SineBasis {
    pub fn new(grid: Grid) -> Self {
        let k = grid.n_points();
        let backend = if k <= DENSE_MAX {
            Backend::Dense(basis_rows(k, k))
        } else {
            let mut planner = FftPlanner::new();
            Backend::Fft(planner.plan_fft_forward(2 * (k + 1)))
        };
        Self { grid, backend }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    /// The full `K x K` transform matrix.
    pub fn matrix(&self) -> Array2<f64> {
        match &self.backend {
            Backend::Dense(m) => m.clone(),
            Backend::Fft(_) => basis_rows(self.n_points(), self.n_points()),
        }
    }

    /// Transform every column of a `K x n` array. The map is its own inverse.
    pub fn transform_columns(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let k = self.n_points();
        if x.nrows() != k {
            return Err(FasError::shape(format!("{k} rows"), x.nrows()));
        }
        match &self.backend {
            // a single column is both C and F contiguous, so dot may hand back either
            Backend::Dense(m) => Ok(m.dot(&x).as_standard_layout().into_owned()),
            Backend::Fft(fft) => {
                let n = 2 * (k + 1);
                let scale = -0.5 * (2.0 / (k + 1) as f64).sqrt();
                let mut out = Array2::zeros(x.raw_dim());
                let mut buf = vec![Complex64::new(0.0, 0.0); n];
                for (col, mut dst) in x.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
                    buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                    for (i, &v) in col.iter().enumerate() {
                        buf[i + 1] = Complex64::new(v, 0.0);
                        buf[n - 1 - i] = Complex64::new(-v, 0.0);
                    }
                    fft.process(&mut buf);
                    for (j, d) in dst.iter_mut().enumerate() {
                        *d = scale * buf[j + 1].im;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Grid values (`K x d`) to sine coefficients.
    pub fn dst(&self, values: ArrayView2<'_, f64>) -> Result<SpectralCoeffs> {
        self.transform_columns(values).map(SpectralCoeffs)
    }

    /// Sine coefficients back to grid values.
    pub fn idst(&self, coeffs: &SpectralCoeffs) -> Result<Array2<f64>> {
        self.transform_columns(coeffs.view())
    }
}
