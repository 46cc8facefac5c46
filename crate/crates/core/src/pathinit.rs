//! Initial path construction: linear interpolation, IDPP relaxation, gradient flow.

use log::warn;
use ndarray::ArrayView1;

use crate::dynamics::{reference_path, PathSample, ReferencePath};
use crate::energy::{EnergyModel, Idpp};
use crate::error::{FasError, Result};
use crate::spectral::Grid;

/// Consecutive energy increases that count as divergence.
const DIVERGENCE_RUN: usize = 5;

/// Linear interpolation relaxed by `n_steps` of fixed-step descent on the IDPP energy.
///
/// Configurations are split into atoms of `atom_dim` coordinates. With a
/// single atom there are no pair distances and the linear path is returned.
pub fn idpp_init(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    grid: &Grid,
    atom_dim: usize,
    n_steps: usize,
    step_size: f64,
) -> Result<ReferencePath> {
    let linear = reference_path(a, b, grid)?;
    if a.len() % atom_dim.max(1) != 0 || atom_dim == 0 {
        return Err(FasError::InvalidParameter(format!(
            "configuration length {} is not a multiple of atom dimension {atom_dim}",
            a.len()
        )));
    }
    if a.len() / atom_dim < 2 || n_steps == 0 {
        return Ok(linear);
    }
    if !(step_size > 0.0) {
        return Err(FasError::InvalidParameter(format!("step size must be positive, got {step_size}")));
    }
    let idpp = Idpp::new(a, b, atom_dim)?;
    let start = idpp.energy(linear.path())?;
    let mut path = linear.path().clone();
    let mut best = (start, path.clone());
    for _ in 0..n_steps {
        let g = idpp.gradient(&path)?;
        path.interior.scaled_add(-step_size, &g);
        let e = idpp.energy(&path)?;
        if e < best.0 {
            best = (e, path.clone());
        }
    }
    ReferencePath::from_path(best.1, grid)
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub path: PathSample,
    /// Energy before the first step and after each step taken.
    pub trace: Vec<f64>,
    pub diverged: bool,
}

/// `x <- x - eps * grad U(x)` on the interior, returning the lowest-energy iterate.
pub fn gradient_flow_refine(path: &PathSample, energy: &dyn EnergyModel, epsilon: f64, n: usize) -> Result<FlowResult> {
    if !(epsilon > 0.0) {
        return Err(FasError::InvalidParameter(format!("flow step must be positive, got {epsilon}")));
    }
    let mut x = path.clone();
    let e0 = energy.energy(&x)?;
    let mut trace = vec![e0];
    let mut best = (e0, x.clone());
    let mut rising = 0;
    let mut diverged = false;
    for _ in 0..n {
        let g = energy.gradient(&x)?;
        x.interior.scaled_add(-epsilon, &g);
        let e = energy.energy(&x)?;
        rising = if e > *trace.last().expect("nonempty") { rising + 1 } else { 0 };
        trace.push(e);
        if e < best.0 {
            best = (e, x.clone());
        }
        if rising >= DIVERGENCE_RUN || !e.is_finite() {
            warn!("gradient flow diverged after {} steps; keeping the best iterate", trace.len() - 1);
            diverged = true;
            break;
        }
    }
    Ok(FlowResult {
        path: best.1,
        trace,
        diverged,
    })
}
