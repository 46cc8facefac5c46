//! Paths with pinned endpoints and controlled simulation of the residual SDE.

use std::thread;

use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::ControlField;
use crate::error::{FasError, Result};
use crate::measures::{ou_variance, ReferenceProcess};
use crate::spectral::{Grid, SineBasis};

/// A discretized path: `K x d` interior values plus the two pinned endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub interior: Array2<f64>,
    pub start: Array1<f64>,
    pub end: Array1<f64>,
}

impl PathSample {
    pub fn new(interior: Array2<f64>, start: Array1<f64>, end: Array1<f64>) -> Result<Self> {
        let d = interior.ncols();
        if start.len() != d || end.len() != d {
            return Err(FasError::shape(format!("endpoints of dimension {d}"), format!("{} and {}", start.len(), end.len())));
        }
        if interior.nrows() == 0 {
            return Err(FasError::InvalidParameter("path needs at least one interior point".into()));
        }
        Ok(Self { interior, start, end })
    }

    pub fn n_points(&self) -> usize {
        self.interior.nrows()
    }

    pub fn channels(&self) -> usize {
        self.interior.ncols()
    }

    /// All `K + 2` points, endpoints included.
    pub fn full(&self) -> Array2<f64> {
        let a = self.start.view().insert_axis(Axis(0));
        let b = self.end.view().insert_axis(Axis(0));
        concatenate(Axis(0), &[a, self.interior.view(), b]).expect("matching widths")
    }

    pub fn is_finite(&self) -> bool {
        self.interior.iter().chain(&self.start).chain(&self.end).all(|v| v.is_finite())
    }
}

/// Fixed boundary-satisfying path `x0` that residuals are added to.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    path: PathSample,
    grid: Grid,
}

/// Linear interpolation `x0[u] = (1 - u/L) A + (u/L) B`.
pub fn reference_path(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, grid: &Grid) -> Result<ReferencePath> {
    if a.len() != b.len() || a.is_empty() {
        return Err(FasError::shape(format!("endpoint dimension {}", a.len()), b.len()));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(FasError::NonFinite("endpoint".into()));
    }
    let unit = grid.unit_points();
    let interior = Array2::from_shape_fn((grid.n_points(), a.len()), |(i, c)| (1.0 - unit[i]) * a[c] + unit[i] * b[c]);
    Ok(ReferencePath {
        path: PathSample::new(interior, a.to_owned(), b.to_owned())?,
        grid: *grid,
    })
}

impl ReferencePath {
    /// Any interior with the right endpoints, e.g. a refined initial path.
    pub fn from_path(path: PathSample, grid: &Grid) -> Result<Self> {
        if path.n_points() != grid.n_points() {
            return Err(FasError::shape(grid.n_points(), path.n_points()));
        }
        if !path.is_finite() {
            return Err(FasError::NonFinite("reference path".into()));
        }
        Ok(Self { path, grid: *grid })
    }

    pub fn path(&self) -> &PathSample {
        &self.path
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn start(&self) -> ArrayView1<'_, f64> {
        self.path.start.view()
    }

    pub fn end(&self) -> ArrayView1<'_, f64> {
        self.path.end.view()
    }

    pub fn channels(&self) -> usize {
        self.path.channels()
    }

    /// Piecewise-linear transfer onto another grid over the same domain.
    pub fn resample(&self, grid: &Grid) -> Result<ReferencePath> {
        let full = self.path.full();
        let n = full.nrows() - 1;
        let unit = grid.unit_points();
        let d = self.channels();
        let interior = Array2::from_shape_fn((grid.n_points(), d), |(i, c)| {
            let pos = unit[i] * n as f64;
            let j = (pos.floor() as usize).min(n - 1);
            let w = pos - j as f64;
            (1.0 - w) * full[[j, c]] + w * full[[j + 1, c]]
        });
        ReferencePath::from_path(PathSample::new(interior, self.path.start.clone(), self.path.end.clone())?, grid)
    }
}

/// `X = x0 + R` on the interior; endpoints come from `x0`.
pub fn lift(residual: ArrayView2<'_, f64>, reference: &ReferencePath) -> Result<PathSample> {
    if residual.dim() != reference.path.interior.dim() {
        return Err(FasError::shape(format!("{:?}", reference.path.interior.dim()), format!("{:?}", residual.dim())));
    }
    Ok(PathSample {
        interior: &reference.path.interior + &residual,
        start: reference.path.start.clone(),
        end: reference.path.end.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    EulerMaruyama,
    /// Exact linear part and exact per-step noise variance.
    ExponentialEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub n_steps: usize,
    pub integrator: Integrator,
    pub seed: u64,
    pub record_trajectory: bool,
    /// Worker threads; 0 or 1 runs on the calling thread.
    pub threads: usize,
    /// Global index of the first sample, selecting its random stream.
    pub first_sample: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            n_steps: 100,
            integrator: Integrator::EulerMaruyama,
            seed: 0,
            record_trajectory: false,
            threads: 1,
            first_sample: 0,
        }
    }
}

/// Result of a batch of controlled rollouts.
#[derive(Debug, Clone)]
pub struct Rollout {
    /// Terminal residual sine coefficients, `(K, B, d)`.
    pub coeffs: Array3<f64>,
    /// Terminal lifted paths.
    pub paths: Vec<PathSample>,
    /// Per-sample running cost `sum_t 0.5 |sigma_t Q^{1/2} e^{-(T-t)A} u~|^2 dt`.
    pub control_cost: Vec<f64>,
    /// `(t, X_t)` with `X_t` laid out `(K, B, d)`, when recording was requested.
    pub trajectory: Option<Vec<(f64, Array3<f64>)>>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Recorded states of one sample as lifted paths.
    pub fn sample_trajectory(&self, j: usize, reference: &ReferencePath) -> Option<Vec<(f64, PathSample)>> {
        self.trajectory.as_ref().map(|steps| {
            steps
                .iter()
                .map(|(t, x)| {
                    let interior = x.index_axis(Axis(1), j).to_owned();
                    (
                        *t,
                        PathSample {
                            interior,
                            start: reference.path.start.clone(),
                            end: reference.path.end.clone(),
                        },
                    )
                })
                .collect()
        })
    }
}

/// Grid values of a `(K, B, d)` coefficient batch, plus the reference path.
pub fn lift_batch(basis: &SineBasis, coeffs: &Array3<f64>, reference: &ReferencePath) -> Result<Array3<f64>> {
    let (k, b, d) = coeffs.dim();
    let std = coeffs.as_standard_layout();
    let flat = std.view().into_shape_with_order((k, b * d)).expect("standard layout");
    let mut x = basis.transform_columns(flat)?.into_shape_with_order((k, b, d)).expect("contiguous");
    let x0 = &reference.path.interior;
    for (i, mut plane) in x.outer_iter_mut().enumerate() {
        for mut row in plane.outer_iter_mut() {
            row += &x0.row(i);
        }
    }
    Ok(x)
}

struct StepTables {
    lambdas: Vec<f64>,
    weights: Vec<f64>,
    sqrt_w: Vec<f64>,
}

fn run_chunk(
    control: &dyn ControlField,
    process: &ReferenceProcess,
    reference: &ReferencePath,
    basis: &SineBasis,
    tables: &StepTables,
    opts: &SimOptions,
    first: u64,
    count: usize,
) -> Result<(Array3<f64>, Vec<f64>, Option<Vec<(f64, Array3<f64>)>>)> {
    let k = basis.n_points();
    let d = reference.channels();
    let horizon = process.horizon();
    let dt = horizon / opts.n_steps as f64;
    let sqdt = dt.sqrt();
    let schedule = process.schedule();

    let mut rngs: Vec<ChaCha8Rng> = (0..count)
        .map(|j| {
            let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
            r.set_stream(first + j as u64);
            r
        })
        .collect();
    let mut c = Array3::<f64>::zeros((k, count, d));
    let mut cost = vec![0.0; count];
    let mut traj = opts.record_trajectory.then(Vec::new);
    let mut noise = Array3::<f64>::zeros((k, count, d));

    for n in 0..opts.n_steps {
        let t = n as f64 * dt;
        let x = lift_batch(basis, &c, reference)?;
        if let Some(tr) = traj.as_mut() {
            tr.push((t, x.clone()));
        }
        let u = control.eval(x.view(), &vec![t; count])?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(FasError::NumericalAbort(format!("control returned non-finite values at t = {t}")));
        }
        let ut = basis
            .transform_columns(u.view().into_shape_with_order((k, count * d)).expect("contiguous"))?
            .into_shape_with_order((k, count, d))
            .expect("contiguous");

        for (j, rng) in rngs.iter_mut().enumerate() {
            for m in 0..k {
                for ch in 0..d {
                    noise[[m, j, ch]] = StandardNormal.sample(rng);
                }
            }
        }

        let sig = schedule.sigma(t);
        for m in 0..k {
            let lam = tables.lambdas[m];
            let smooth = sig * tables.sqrt_w[m] * (-(horizon - t) * lam).exp();
            // drift is sigma_t Q^{1/2} applied to alpha = smooth * u~
            let gain = smooth * sig * tables.sqrt_w[m];
            let (decay, drift_w, noise_sd) = match opts.integrator {
                Integrator::EulerMaruyama => (1.0 - lam * dt, dt, sig * tables.sqrt_w[m] * sqdt),
                Integrator::ExponentialEuler => {
                    let e = (-lam * dt).exp();
                    let var = ou_variance(schedule, lam, tables.weights[m], t + dt)
                        - e * e * ou_variance(schedule, lam, tables.weights[m], t);
                    (e, -(-lam * dt).exp_m1() / lam, var.max(0.0).sqrt())
                }
            };
            let mut cm = c.index_axis_mut(Axis(0), m);
            let um = ut.index_axis(Axis(0), m);
            let nm = noise.index_axis(Axis(0), m);
            for j in 0..count {
                for ch in 0..d {
                    let a = smooth * um[[j, ch]];
                    cost[j] += 0.5 * a * a * dt;
                    cm[[j, ch]] = decay * cm[[j, ch]] + drift_w * gain * um[[j, ch]] + noise_sd * nm[[j, ch]];
                }
            }
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(FasError::NumericalAbort(format!(
                "state became non-finite at step {n}; reduce the step size or use the exponential integrator"
            )));
        }
    }
    if let Some(tr) = traj.as_mut() {
        tr.push((horizon, lift_batch(basis, &c, reference)?));
    }
    Ok((c, cost, traj))
}

/// Roll out `n_samples` controlled paths from `R_0 = 0` to the horizon.
pub fn simulate(
    control: &dyn ControlField,
    process: &ReferenceProcess,
    reference: &ReferencePath,
    n_samples: usize,
    opts: &SimOptions,
) -> Result<Rollout> {
    let grid = *reference.grid();
    let k = grid.n_points();
    if opts.n_steps == 0 {
        return Err(FasError::InvalidParameter("n_steps must be at least 1".into()));
    }
    if n_samples == 0 {
        return Err(FasError::EmptyBatch);
    }
    if process.n_modes() != k {
        return Err(FasError::shape(format!("{k} modes"), process.n_modes()));
    }
    if control.channels() != reference.channels() {
        return Err(FasError::shape(reference.channels(), control.channels()));
    }
    let eig = process.eig();
    let dt = process.horizon() / opts.n_steps as f64;
    let stiff = eig.lambdas().iter().fold(0.0f64, |m, l| m.max(*l)) * dt;
    if opts.integrator == Integrator::EulerMaruyama && stiff >= 2.0 {
        return Err(FasError::InvalidParameter(format!(
            "explicit step is unstable (lambda_max * dt = {stiff:.3}); use more steps or the exponential integrator"
        )));
    }
    let tables = StepTables {
        lambdas: eig.lambdas().to_vec(),
        weights: eig.q_weights().to_vec(),
        sqrt_w: eig.sqrt_q(),
    };
    let basis = SineBasis::new(grid);
    let threads = opts.threads.max(1).min(n_samples);

    let (coeffs, cost, traj) = if threads == 1 {
        run_chunk(control, process, reference, &basis, &tables, opts, opts.first_sample, n_samples)?
    } else {
        let per = n_samples.div_ceil(threads);
        let parts: Vec<Result<_>> = thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let lo = w * per;
                    let cnt = per.min(n_samples.saturating_sub(lo));
                    let (basis, tables) = (&basis, &tables);
                    scope.spawn(move || {
                        if cnt == 0 {
                            return Ok(None);
                        }
                        run_chunk(control, process, reference, basis, tables, opts, opts.first_sample + lo as u64, cnt).map(Some)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(FasError::NumericalAbort("worker panicked".into()))))
                .collect()
        });
        let mut cs = Vec::new();
        let mut costs = Vec::new();
        let mut trajs: Vec<Vec<(f64, Array3<f64>)>> = Vec::new();
        for p in parts {
            if let Some((c, cost, tr)) = p? {
                cs.push(c);
                costs.extend(cost);
                if let Some(tr) = tr {
                    trajs.push(tr);
                }
            }
        }
        let views: Vec<_> = cs.iter().map(|c| c.view()).collect();
        let coeffs = concatenate(Axis(1), &views).expect("chunks share shape").as_standard_layout().into_owned();
        let traj = (!trajs.is_empty()).then(|| {
            (0..trajs[0].len())
                .map(|s| {
                    let v: Vec<_> = trajs.iter().map(|tr| tr[s].1.view()).collect();
                    let x = concatenate(Axis(1), &v).expect("chunks share shape");
                    (trajs[0][s].0, x.as_standard_layout().into_owned())
                })
                .collect()
        });
        (coeffs, costs, traj)
    };

    let x = lift_batch(&basis, &coeffs, reference)?;
    let paths = (0..n_samples)
        .map(|j| PathSample {
            interior: x.slice(s![.., j, ..]).to_owned(),
            start: reference.path.start.clone(),
            end: reference.path.end.clone(),
        })
        .collect();
    Ok(Rollout {
        coeffs,
        paths,
        control_cost: cost,
        trajectory: traj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlArch, ControlParams, SpectralControl, ZeroControl};
    use crate::measures::NoiseSchedule;
    use crate::spectral::{build_basis, CovarianceScaling, EigenSystem};
    use ndarray::array;
    use rand::Rng;

    fn geometric() -> NoiseSchedule {
        NoiseSchedule::Geometric {
            beta_min: 0.1,
            beta_max: 10.0,
            horizon: 1.0,
        }
    }

    fn mode_variance(roll: &Rollout, m: usize) -> (f64, f64) {
        let v: Vec<f64> = roll.coeffs.index_axis(Axis(0), m).iter().copied().collect();
        let n = v.len() as f64;
        let var = v.iter().map(|x| x * x).sum::<f64>() / n;
        (var, var * (2.0 / n).sqrt())
    }

    #[test]
    fn reference_path_examples() {
        let grid = Grid::new(9, 1.0).unwrap();
        let a = array![-0.558, 1.442];
        let b = array![0.624, 0.028];
        let x0 = reference_path(a.view(), b.view(), &grid).unwrap();
        let mid = x0.path().interior.row(4);
        assert!((mid[0] - 0.033).abs() < 1e-12 && (mid[1] - 0.735).abs() < 1e-12);
        let full = x0.path().full();
        assert_eq!(full.row(0), a);
        assert_eq!(full.row(10), b);
        let same = reference_path(a.view(), a.view(), &grid).unwrap();
        assert!(same.path().interior.outer_iter().all(|r| (&r - &a).iter().all(|v| v.abs() < 1e-15)));
    }

    #[test]
    fn lift_round_trips() {
        let grid = Grid::new(5, 1.0).unwrap();
        let x0 = reference_path(array![0.0, 1.0].view(), array![2.0, -1.0].view(), &grid).unwrap();
        let zero = lift(Array2::zeros((5, 2)).view(), &x0).unwrap();
        assert_eq!(&zero, x0.path());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.0..1.0));
        let x = lift(r.view(), &x0).unwrap();
        assert_eq!(x.start, x0.path().start);
        assert_eq!(x.end, x0.path().end);
        let back = &x.interior - &x0.path().interior;
        for (a, b) in back.iter().zip(r.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(lift(Array2::zeros((4, 2)).view(), &x0).is_err());
    }

    #[test]
    fn resample_preserves_linear_paths() {
        let grid = Grid::new(9, 1.0).unwrap();
        let x0 = reference_path(array![0.0, 1.0].view(), array![2.0, -1.0].view(), &grid).unwrap();
        let fine = Grid::new(90, 1.0).unwrap();
        let direct = reference_path(array![0.0, 1.0].view(), array![2.0, -1.0].view(), &fine).unwrap();
        let moved = x0.resample(&fine).unwrap();
        for (a, b) in moved.path().interior.iter().zip(direct.path().interior.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_control_matches_ou_marginal() {
        let grid = Grid::new(4, 1.0).unwrap();
        let eig = build_basis(4, 1.0, 0.3, 1.0).unwrap();
        let proc_ = ReferenceProcess::new(NoiseSchedule::Constant { sigma: 1.0 }, eig, 1.0).unwrap();
        let x0 = reference_path(array![0.0, 0.0].view(), array![1.0, 1.0].view(), &grid).unwrap();
        let opts = SimOptions {
            n_steps: 200,
            seed: 3,
            ..Default::default()
        };
        let roll = simulate(&ZeroControl { channels: 2 }, &proc_, &x0, 5000, &opts).unwrap();
        for m in 0..4 {
            let (var, se) = mode_variance(&roll, m);
            let q = proc_.terminal_variances()[m];
            // Euler bias at dt = 5e-3 is well below the Monte-Carlo error here
            assert!((var - q).abs() < 3.0 * se, "mode {m}: {var} vs {q}");
        }
        assert!(roll.paths.iter().all(|p| p.start == x0.path().start && p.end == x0.path().end));
        assert!(roll.control_cost.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn exponential_integrator_is_exact_for_zero_control() {
        let grid = Grid::new(6, 1.0).unwrap();
        let eig = EigenSystem::new(6, 1.0, 1.0, 1.0, CovarianceScaling::Laplacian).unwrap();
        let proc_ = ReferenceProcess::new(geometric(), eig, 1.0).unwrap();
        let x0 = reference_path(array![0.0].view(), array![0.0].view(), &grid).unwrap();
        let opts = SimOptions {
            n_steps: 10,
            integrator: Integrator::ExponentialEuler,
            seed: 4,
            ..Default::default()
        };
        let roll = simulate(&ZeroControl { channels: 1 }, &proc_, &x0, 10_000, &opts).unwrap();
        for m in 0..6 {
            let (var, se) = mode_variance(&roll, m);
            let q = proc_.terminal_variances()[m];
            assert!((var - q).abs() < 3.0 * se, "mode {m}: {var} vs {q}");
        }
    }

    #[test]
    fn single_euler_step_is_gaussian() {
        let grid = Grid::new(1, std::f64::consts::PI).unwrap();
        let eig = build_basis(1, std::f64::consts::PI, 1.0, 1.0).unwrap();
        let proc_ = ReferenceProcess::new(geometric(), eig, 1.0).unwrap();
        let x0 = reference_path(array![0.0].view(), array![0.0].view(), &grid).unwrap();
        let opts = SimOptions {
            n_steps: 1,
            seed: 5,
            ..Default::default()
        };
        let roll = simulate(&ZeroControl { channels: 1 }, &proc_, &x0, 20_000, &opts).unwrap();
        let s0 = proc_.sigma_at(0.0).unwrap();
        let want = s0 * s0 * 1.0 * 1.0;
        let (var, se) = mode_variance(&roll, 0);
        assert!((var - want).abs() < 3.0 * se, "{var} vs {want}");
    }

    #[test]
    fn halving_the_step_stays_within_mc_error() {
        let grid = Grid::new(3, 1.0).unwrap();
        let eig = build_basis(3, 1.0, 0.3, 1.0).unwrap();
        let proc_ = ReferenceProcess::new(NoiseSchedule::Constant { sigma: 1.0 }, eig, 1.0).unwrap();
        let x0 = reference_path(array![0.0].view(), array![0.0].view(), &grid).unwrap();
        let run = |n| {
            let opts = SimOptions {
                n_steps: n,
                seed: 6,
                ..Default::default()
            };
            simulate(&ZeroControl { channels: 1 }, &proc_, &x0, 10_000, &opts).unwrap()
        };
        let (a, b) = (run(100), run(200));
        for m in 0..3 {
            let (va, se) = mode_variance(&a, m);
            let (vb, _) = mode_variance(&b, m);
            assert!((va - vb).abs() < 3.0 * se * 2f64.sqrt());
        }
    }

    #[test]
    fn rollouts_are_deterministic_and_thread_invariant() {
        let grid = Grid::new(8, 1.0).unwrap();
        let eig = build_basis(8, 1.0, 0.2, 1.0).unwrap();
        let proc_ = ReferenceProcess::new(geometric(), eig, 1.0).unwrap();
        let x0 = reference_path(array![0.0, 1.0].view(), array![1.0, 0.0].view(), &grid).unwrap();
        let arch = ControlArch {
            n_layers: 1,
            n_modes: 4,
            width: 4,
            embed_dim: 4,
            channels: 2,
        };
        let mut params = ControlParams::init(arch, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        params.theta.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        let ctl = SpectralControl::new(params, &grid).unwrap();
        let opts = SimOptions {
            n_steps: 20,
            seed: 9,
            record_trajectory: true,
            ..Default::default()
        };
        let a = simulate(&ctl, &proc_, &x0, 7, &opts).unwrap();
        let b = simulate(&ctl, &proc_, &x0, 7, &opts).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
        assert_eq!(a.control_cost, b.control_cost);
        let threaded = simulate(&ctl, &proc_, &x0, 7, &SimOptions { threads: 3, ..opts }).unwrap();
        for (x, y) in a.coeffs.iter().zip(threaded.coeffs.iter()) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
        let traj = a.trajectory.as_ref().unwrap();
        assert_eq!(traj.len(), 21);
        let tr0 = a.sample_trajectory(0, &x0).unwrap();
        assert!(tr0.iter().all(|(_, p)| p.start == x0.path().start && p.end == x0.path().end));
        assert!(a.control_cost.iter().all(|&c| c > 0.0));
    }

    #[test]
    fn stiff_explicit_steps_are_rejected() {
        let grid = Grid::new(50, 1.0).unwrap();
        let eig = build_basis(50, 1.0, 1.0, 1.0).unwrap();
        let proc_ = ReferenceProcess::new(NoiseSchedule::Constant { sigma: 1.0 }, eig, 1.0).unwrap();
        let x0 = reference_path(array![0.0].view(), array![0.0].view(), &grid).unwrap();
        assert!(simulate(&ZeroControl { channels: 1 }, &proc_, &x0, 2, &SimOptions::default()).is_err());
        let opts = SimOptions {
            integrator: Integrator::ExponentialEuler,
            ..Default::default()
        };
        assert!(simulate(&ZeroControl { channels: 1 }, &proc_, &x0, 2, &opts).is_ok());
    }
}
