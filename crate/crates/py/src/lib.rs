//! Python bindings. Arrays cross the boundary as nested lists of floats.

use std::path::PathBuf;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fas_core::config::RunConfig;
use fas_core::control::{load_checkpoint, save_checkpoint, CheckpointHeader, ControlParams, SpectralControl, PARAMS_VERSION};
use fas_core::dynamics::{reference_path, simulate, Integrator, PathSample, SimOptions};
use fas_core::energy::{MullerBrown, PhysParams};
use fas_core::measures::{NoiseSchedule, ReferenceProcess};
use fas_core::metrics;
use fas_core::spectral::{CovarianceScaling, EigenSystem, Grid, SineBasis, SpectralCoeffs};
use fas_core::trainer::{self, Flow, Problem};
use fas_core::FasError;

fn err(e: FasError) -> PyErr {
    match e {
        FasError::NumericalAbort(_) | FasError::External(_) | FasError::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn full_path(p: &PathSample) -> Vec<Vec<f64>> {
    rows(&p.full())
}

fn path_from_full(full: Vec<Vec<f64>>) -> PyResult<PathSample> {
    let f = matrix(full)?;
    let n = f.nrows();
    if n < 3 {
        return Err(PyValueError::new_err("a path needs at least 3 points, endpoints included"));
    }
    PathSample::new(f.slice(ndarray::s![1..n - 1, ..]).to_owned(), f.row(0).to_owned(), f.row(n - 1).to_owned()).map_err(err)
}

/// Orthonormal sine transform of the columns of a `K x d` array.
#[pyfunction]
fn dst(x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let x = matrix(x)?;
    let basis = SineBasis::new(Grid::new(x.nrows(), 1.0).map_err(err)?);
    Ok(rows(&basis.dst(x.view()).map_err(err)?.0))
}

#[pyfunction]
fn idst(c: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let c = matrix(c)?;
    let basis = SineBasis::new(Grid::new(c.nrows(), 1.0).map_err(err)?);
    Ok(rows(&basis.idst(&SpectralCoeffs(c)).map_err(err)?))
}

#[pyfunction]
fn muller_brown(x: f64, y: f64) -> f64 {
    MullerBrown::eval(x, y)
}

#[pyfunction]
fn muller_brown_grad(x: f64, y: f64) -> (f64, f64) {
    let [gx, gy] = MullerBrown::grad(x, y);
    (gx, gy)
}

/// Straight path between `a` and `b` on `n_points` interior points, endpoints included.
#[pyfunction]
fn linear_path(a: Vec<f64>, b: Vec<f64>, n_points: usize) -> PyResult<Vec<Vec<f64>>> {
    let grid = Grid::new(n_points, 1.0).map_err(err)?;
    let p = reference_path(Array1::from(a).view(), Array1::from(b).view(), &grid).map_err(err)?;
    Ok(full_path(p.path()))
}

#[pyfunction]
fn ets(path: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::ets(&path_from_full(path)?, &MullerBrown).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (path, gamma_m = 1.0, kbt = 5.0, delta_u = None))]
fn llk(path: Vec<Vec<f64>>, gamma_m: f64, kbt: f64, delta_u: Option<f64>) -> PyResult<(f64, f64)> {
    let p = path_from_full(path)?;
    let phys = PhysParams {
        gamma_m,
        kbt,
        delta_u: delta_u.unwrap_or(1.0 / (p.n_points() + 1) as f64),
    };
    let l = metrics::llk(&p, &phys, Arc::new(MullerBrown)).map_err(err)?;
    Ok((l.total, l.per_transition))
}

#[pyfunction]
fn thp(endpoints: Vec<Vec<f64>>, target: Vec<f64>, eps: f64) -> PyResult<f64> {
    let ends: Vec<Array1<f64>> = endpoints.into_iter().map(Array1::from).collect();
    metrics::thp(&ends, &Array1::from(target), eps).map_err(err)
}

/// RMSD after optimal rigid alignment, and whether the alignment was degenerate.
#[pyfunction]
fn kabsch_rmsd(p: Vec<Vec<f64>>, q: Vec<Vec<f64>>) -> PyResult<(f64, bool)> {
    let k = metrics::kabsch_rmsd(matrix(p)?.view(), matrix(q)?.view()).map_err(err)?;
    Ok((k.rmsd, k.degenerate))
}

/// Mode-wise Ornstein-Uhlenbeck reference process.
#[pyclass(name = "ReferenceProcess")]
struct PyReferenceProcess {
    inner: ReferenceProcess,
}

#[pymethods]
impl PyReferenceProcess {
    #[new]
    #[pyo3(signature = (n_modes, length = 1.0, kappa = 1e-2, s = 1.0, schedule = "geometric", beta_min = 0.1, beta_max = 10.0, sigma = 1.0, horizon = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_modes: usize,
        length: f64,
        kappa: f64,
        s: f64,
        schedule: &str,
        beta_min: f64,
        beta_max: f64,
        sigma: f64,
        horizon: f64,
    ) -> PyResult<Self> {
        let sched = match schedule {
            "geometric" => NoiseSchedule::Geometric {
                beta_min,
                beta_max,
                horizon,
            },
            "constant" => NoiseSchedule::Constant { sigma },
            other => return Err(PyValueError::new_err(format!("unknown schedule '{other}'"))),
        };
        let eig = EigenSystem::new(n_modes, length, kappa, s, CovarianceScaling::Laplacian).map_err(err)?;
        Ok(Self {
            inner: ReferenceProcess::new(sched, eig, horizon).map_err(err)?,
        })
    }

    fn sigma(&self, t: f64) -> PyResult<f64> {
        self.inner.sigma_at(t).map_err(err)
    }

    fn mode_variances(&self, t: f64) -> PyResult<Vec<f64>> {
        self.inner.mode_variances(t).map_err(err)
    }

    fn invariant_variances(&self) -> Vec<f64> {
        self.inner.invariant_variances().to_vec()
    }

    fn log_rnd(&self, coeffs: Vec<Vec<f64>>) -> PyResult<f64> {
        self.inner.log_rnd(&SpectralCoeffs(matrix(coeffs)?)).map_err(err)
    }

    fn bridge_moments(&self, k: usize, t: f64, r_end: f64) -> PyResult<(f64, f64)> {
        self.inner.bridge_moments(k, t, r_end).map_err(err)
    }
}

/// A trained control together with the configuration it was trained under.
#[pyclass(name = "Model")]
struct PyModel {
    cfg: RunConfig,
    params: ControlParams,
    epochs: usize,
}

fn resolve_integrator(cfg: &RunConfig, setup: &fas_core::config::Setup) -> Integrator {
    let dt = setup.process.horizon() / cfg.train.n_sde_steps as f64;
    let stiff = setup.process.eig().lambdas().iter().fold(0.0f64, |m, l| m.max(*l)) * dt;
    if cfg.train.integrator == Integrator::EulerMaruyama && stiff >= 1.0 {
        Integrator::ExponentialEuler
    } else {
        cfg.train.integrator
    }
}

#[pymethods]
impl PyModel {
    /// Train from a JSON config string. Returns the model; the per-epoch log is in `log`.
    #[staticmethod]
    fn train(py: Python<'_>, config_json: &str) -> PyResult<(Self, Vec<String>)> {
        let cfg = RunConfig::from_json(config_json).map_err(err)?.resolved();
        let (params, log) = py
            .detach(|| -> fas_core::Result<_> {
                let setup = cfg.build()?;
                let control = SpectralControl::new(ControlParams::init(cfg.arch, cfg.train.seed)?, &setup.grid)?;
                let prob = Problem {
                    process: &setup.process,
                    reference: &setup.reference,
                    energy: setup.energy.as_ref(),
                    potential: setup.potential.clone(),
                };
                let out = trainer::train(&cfg.train, control, &prob, &mut |_, _| Ok(Flow::Continue))?;
                let log = out.log.iter().map(|l| serde_json::to_string(l).expect("plain data")).collect::<Vec<_>>();
                Ok((out.control.into_params(), log))
            })
            .map_err(err)?;
        let epochs = log.len();
        Ok((Self { cfg, params, epochs }, log))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (header, params) = load_checkpoint(&path).map_err(err)?;
        let cfg: RunConfig = serde_json::from_value(header.config).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            cfg,
            params,
            epochs: header.epoch,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let header = CheckpointHeader {
            version: PARAMS_VERSION,
            arch: self.params.arch,
            n_params: self.params.n_params(),
            seed: self.cfg.train.seed,
            epoch: self.epochs,
            config: serde_json::to_value(&self.cfg).map_err(|e| PyValueError::new_err(e.to_string()))?,
        };
        save_checkpoint(&path, &header, &self.params).map_err(err)
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.params.n_params()
    }

    #[getter]
    fn config_json(&self) -> String {
        serde_json::to_string(&self.cfg).expect("plain data")
    }

    /// Control on a path interior (`K x d`) at diffusion time `t`.
    fn control(&self, interior: Vec<Vec<f64>>, t: f64) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(interior)?;
        let grid = Grid::new(x.nrows(), self.cfg.grid.length).map_err(err)?;
        let ctl = SpectralControl::new(self.params.clone(), &grid).map_err(err)?;
        Ok(rows(&ctl.forward(x.view(), t).map_err(err)?))
    }

    /// Sample `n` terminal paths (endpoints included) on a grid refined by `refine`.
    #[pyo3(signature = (n, refine = 1, seed = 0))]
    fn sample(&self, py: Python<'_>, n: usize, refine: usize, seed: u64) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let paths = py
            .detach(|| -> fas_core::Result<_> {
                let cfg = self.cfg.refined(refine)?;
                let setup = cfg.build()?;
                let ctl = SpectralControl::new(self.params.clone(), &setup.grid)?;
                let opts = SimOptions {
                    n_steps: cfg.train.n_sde_steps,
                    integrator: resolve_integrator(&cfg, &setup),
                    seed,
                    ..Default::default()
                };
                Ok(simulate(&ctl, &setup.process, &setup.reference, n, &opts)?.paths)
            })
            .map_err(err)?;
        Ok(paths.iter().map(full_path).collect())
    }
}

#[pymodule]
fn fas_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dst, m)?)?;
    m.add_function(wrap_pyfunction!(idst, m)?)?;
    m.add_function(wrap_pyfunction!(muller_brown, m)?)?;
    m.add_function(wrap_pyfunction!(muller_brown_grad, m)?)?;
    m.add_function(wrap_pyfunction!(linear_path, m)?)?;
    m.add_function(wrap_pyfunction!(ets, m)?)?;
    m.add_function(wrap_pyfunction!(llk, m)?)?;
    m.add_function(wrap_pyfunction!(thp, m)?)?;
    m.add_function(wrap_pyfunction!(kabsch_rmsd, m)?)?;
    m.add_class::<PyReferenceProcess>()?;
    m.add_class::<PyModel>()?;
    m.add("STATE_A", (MullerBrown::STATE_A[0], MullerBrown::STATE_A[1]))?;
    m.add("STATE_B", (MullerBrown::STATE_B[0], MullerBrown::STATE_B[1]))?;
    Ok(())
}
