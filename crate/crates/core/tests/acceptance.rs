//! Acceptance criteria AC-1 .. AC-8.
//!
//! Each criterion is one test and prints a single `AC-n PASS|FAIL` line before
//! asserting. AC-2 and AC-3 train the full Müller-Brown model and are ignored by
//! default; run them with `cargo test --release -p fas-core --test acceptance -- --ignored`.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use ndarray::{array, Array1, Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use fas_core::config::RunConfig;
use fas_core::control::{
    load_checkpoint, save_checkpoint, CheckpointHeader, ControlArch, ControlParams, SpectralControl,
    Weighting, PARAMS_VERSION,
};
use fas_core::dynamics::{reference_path, simulate, Integrator, PathSample, SimOptions};
use fas_core::energy::{
    CompositeEnergy, EnergyModel, Idpp, MullerBrown, PhysParams, QuadraticModeEnergy, TpdFkNll, TpdSyntheticNll,
};
use fas_core::measures::{NoiseSchedule, ReferenceProcess};
use fas_core::metrics::{ets, kabsch_rmsd, llk, mean_std, thp};
use fas_core::pathinit::idpp_init;
use fas_core::spectral::{CovarianceScaling, EigenSystem, Grid, SineBasis, SpectralCoeffs};
use fas_core::trainer::{train, Flow, Problem, TrainConfig};

fn verdict(id: &str, ok: bool, detail: String) {
    println!("{id} {}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{id} failed: {detail}");
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------- AC-1

#[test]
fn ac1_closed_form_gaussian_recovery() {
    // L = pi, kappa = 1, s = 1: lambda_k = k^2 and the noise weight is k^-2,
    // so the invariant mode variance is 1 / (2 k^4) at sigma = 1.
    let k = 32;
    let grid = Grid::new(k, PI).unwrap();
    let eig = EigenSystem::new(k, PI, 1.0, 1.0, CovarianceScaling::Laplacian).unwrap();
    let process = ReferenceProcess::new(NoiseSchedule::Constant { sigma: 1.0 }, eig, 1.0).unwrap();
    let reference = reference_path(array![0.0, 0.0].view(), array![0.0, 0.0].view(), &grid).unwrap();
    let b: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
    let energy = QuadraticModeEnergy::new(b.clone(), reference.clone()).unwrap();

    let arch = ControlArch {
        n_layers: 2,
        n_modes: 8,
        width: 16,
        embed_dim: 16,
        channels: 2,
    };
    let control = SpectralControl::new(ControlParams::init(arch, 0).unwrap(), &grid).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        rollouts: 256,
        grad_steps: 100,
        batch_size: 32,
        lr: 1e-3,
        integrator: Integrator::ExponentialEuler,
        seed: 1,
        ..Default::default()
    };
    let prob = Problem {
        process: &process,
        reference: &reference,
        energy: &energy,
        potential: None,
    };
    let out = train(&cfg, control, &prob, &mut |_, _| Ok(Flow::Continue)).unwrap();

    let opts = SimOptions {
        integrator: Integrator::ExponentialEuler,
        seed: 77,
        ..Default::default()
    };
    let n = 4096;
    let roll = simulate(&out.control, &process, &reference, n, &opts).unwrap();
    let mut worst: f64 = 0.0;
    let mut errs = Vec::new();
    for (m, bk) in b.iter().enumerate() {
        let kk = (m + 1) as f64;
        let q_inf = 0.5 / kk.powi(4);
        let want = 1.0 / (1.0 / q_inf + bk);
        let plane = roll.coeffs.index_axis(Axis(0), m);
        let got = plane.iter().map(|c| c * c).sum::<f64>() / plane.len() as f64;
        let rel = got / want - 1.0;
        worst = worst.max(rel.abs());
        errs.push(format!("{rel:+.3}"));
    }
    verdict(
        "AC-1",
        worst <= 0.05,
        format!("per-mode relative variance error [{}], worst {worst:.4} (tol 0.05)", errs.join(", ")),
    );
}

// ---------------------------------------------------------------- AC-2 / AC-3

fn ac2_checkpoint() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ac2_mb_checkpoint.bin")
}

/// Train the Müller-Brown model with the default synthetic settings, or reuse a previous run.
fn ac2_model() -> (RunConfig, ControlParams) {
    let path = ac2_checkpoint();
    if let Ok((header, params)) = load_checkpoint(&path) {
        if let Ok(cfg) = serde_json::from_value::<RunConfig>(header.config) {
            if header.epoch == cfg.train.epochs {
                return (cfg, params);
            }
        }
    }
    let mut cfg = RunConfig::default().resolved();
    cfg.train.threads = std::env::var("FAS_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(1);
    let setup = cfg.build().unwrap();
    let control = SpectralControl::new(ControlParams::init(cfg.arch, cfg.train.seed).unwrap(), &setup.grid).unwrap();
    let prob = Problem {
        process: &setup.process,
        reference: &setup.reference,
        energy: setup.energy.as_ref(),
        potential: setup.potential.clone(),
    };
    let out = train(&cfg.train, control, &prob, &mut |l, _| {
        if l.epoch % 10 == 0 {
            eprintln!("AC-2 epoch {}: loss {:.4} ets {:?}", l.epoch, l.loss, l.ets_mean);
        }
        Ok(Flow::Continue)
    })
    .unwrap();
    let params = out.control.into_params();
    let header = CheckpointHeader {
        version: PARAMS_VERSION,
        arch: cfg.arch,
        n_params: params.n_params(),
        seed: cfg.train.seed,
        epoch: out.log.len(),
        config: serde_json::to_value(&cfg).unwrap(),
    };
    save_checkpoint(&path, &header, &params).unwrap();
    (cfg, params)
}

/// Sample `n` paths at refinement factor `r` and return them with the resolved config.
fn ac_sample(cfg: &RunConfig, params: &ControlParams, r: usize, n: usize) -> (Vec<PathSample>, PhysParams) {
    let cfg = cfg.refined(r).unwrap();
    let setup = cfg.build().unwrap();
    let control = SpectralControl::new(params.clone(), &setup.grid).unwrap();
    let dt = setup.process.horizon() / cfg.train.n_sde_steps as f64;
    let stiff = setup.process.eig().lambdas().iter().fold(0.0f64, |m, l| m.max(*l)) * dt;
    let opts = SimOptions {
        n_steps: cfg.train.n_sde_steps,
        integrator: if stiff >= 1.0 { Integrator::ExponentialEuler } else { cfg.train.integrator },
        seed: 7,
        ..Default::default()
    };
    (simulate(&control, &setup.process, &setup.reference, n, &opts).unwrap().paths, setup.phys)
}

#[test]
#[ignore = "trains the full Müller-Brown model; hours of CPU"]
fn ac2_muller_brown() {
    let (cfg, params) = ac2_model();
    let (paths, phys) = ac_sample(&cfg, &params, 1, 64);
    let b = array![MullerBrown::STATE_B[0], MullerBrown::STATE_B[1]];
    let ends: Vec<Array1<f64>> = paths.iter().map(|p| p.end.clone()).collect();
    let hit = thp(&ends, &b, cfg.eval.thp_eps).unwrap();
    let e: Vec<f64> = paths.iter().map(|p| ets(p, &MullerBrown).unwrap()).collect();
    let (em, es) = mean_std(&e);
    let l: Vec<f64> = paths.iter().map(|p| llk(p, &phys, Arc::new(MullerBrown)).unwrap().total).collect();
    let (lm, ls) = mean_std(&l);
    let ok = hit == 100.0 && (-40.7..=-30.0).contains(&em) && ls <= 0.1 * lm.abs();
    verdict(
        "AC-2",
        ok,
        format!("THP {hit}% ETS {em:.3} +- {es:.3} (want [-40.7, -30.0]) LLK {lm:.3} +- {ls:.3}"),
    );
}

#[test]
#[ignore = "needs the trained Müller-Brown model"]
fn ac3_discretization_invariance() {
    let (cfg, params) = ac2_model();
    // paths that overflow the potential count as failures, not panics
    let mean_ets = |r| {
        let (paths, _) = ac_sample(&cfg, &params, r, 64);
        let e: Vec<f64> = paths.iter().filter_map(|p| ets(p, &MullerBrown).ok()).collect();
        let bad = paths.len() - e.len();
        (if bad == 0 { mean_std(&e).0 } else { f64::NAN }, bad)
    };
    let ((e1, bad1), (e10, bad10)) = (mean_ets(1), mean_ets(10));
    verdict(
        "AC-3",
        (e10 - e1).abs() <= 3.0,
        format!(
            "ETS x1 {e1:.3}, x10 {e10:.3}, shift {:.3} (tol 3.0), non-finite paths {bad1}/{bad10}",
            e10 - e1
        ),
    );
}

// ---------------------------------------------------------------- AC-4

/// Terminal variance written as an integral over elapsed time `tau = T - s`.
fn oracle_terminal_variance(schedule: &NoiseSchedule, lambda: f64, w: f64, horizon: f64) -> f64 {
    match *schedule {
        NoiseSchedule::Constant { sigma } => sigma * sigma * w * (1.0 - (-2.0 * lambda * horizon).exp()) / (2.0 * lambda),
        NoiseSchedule::Geometric { beta_min, beta_max, .. } => {
            // sigma_{T - tau}^2 = beta_min^2 (beta_max / beta_min)^{2 tau} 2 ln(beta_max / beta_min)
            let lr = (beta_max / beta_min).ln();
            let rate = 2.0 * (lr - lambda);
            beta_min * beta_min * 2.0 * lr * w * ((rate * horizon).exp() - 1.0) / rate
        }
    }
}

fn oracle_invariant_variance(schedule: &NoiseSchedule, lambda: f64, w: f64) -> f64 {
    let s_inf = match *schedule {
        NoiseSchedule::Constant { sigma } => sigma,
        NoiseSchedule::Geometric { beta_min, beta_max, .. } => beta_min * (2.0 * (beta_max / beta_min).ln()).sqrt(),
    };
    0.5 * s_inf * s_inf * w / lambda
}

fn gauss_logpdf(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - 0.5 * x * x / var
}

#[test]
fn ac4_rnd_oracle() {
    let (k, len, kappa, s) = (12, 1.0, 0.3, 1.0);
    let eig = EigenSystem::new(k, len, kappa, s, CovarianceScaling::Laplacian).unwrap();
    let schedules = [
        NoiseSchedule::Constant { sigma: 1.3 },
        NoiseSchedule::Geometric {
            beta_min: 0.1,
            beta_max: 10.0,
            horizon: 1.0,
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for sched in schedules {
        let process = ReferenceProcess::new(sched, eig.clone(), 1.0).unwrap();
        let (qt, qi): (Vec<f64>, Vec<f64>) = (1..=k)
            .map(|m| {
                let z = PI * m as f64 / len;
                let (lam, w) = (kappa * kappa * z * z, z.powf(-2.0 * s));
                (oracle_terminal_variance(&sched, lam, w, 1.0), oracle_invariant_variance(&sched, lam, w))
            })
            .unzip();
        for _ in 0..1000 {
            let c = Array2::from_shape_fn((k, 2), |(m, _)| 2.0 * qt[m].sqrt() * normal(&mut rng));
            let want: f64 = c
                .indexed_iter()
                .map(|((m, _), &x)| gauss_logpdf(x, qt[m]) - gauss_logpdf(x, qi[m]))
                .sum();
            let got = process.log_rnd(&SpectralCoeffs(c)).unwrap();
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    verdict("AC-4", worst <= 1e-10, format!("max relative deviation {worst:.3e} over 2000 inputs (tol 1e-10)"));
}

// ---------------------------------------------------------------- AC-5

fn fd_relative_error(energy: &dyn EnergyModel, path: &PathSample) -> f64 {
    let g = energy.gradient(path).unwrap();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut probe = path.clone();
    let mut err: f64 = 0.0;
    for i in 0..path.n_points() {
        for c in 0..path.channels() {
            let x = path.interior[[i, c]];
            let h = 1e-6 * x.abs().max(1.0);
            probe.interior[[i, c]] = x + h;
            let up = energy.energy(&probe).unwrap();
            probe.interior[[i, c]] = x - h;
            let dn = energy.energy(&probe).unwrap();
            probe.interior[[i, c]] = x;
            err = err.max(((up - dn) / (2.0 * h) - g[[i, c]]).abs());
        }
    }
    err / norm
}

#[test]
fn ac5_gradient_gates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // control: 64 random coordinates, both weightings
    let k = 15;
    let grid = Grid::new(k, 1.0).unwrap();
    let eig = EigenSystem::new(k, 1.0, 0.1, 1.0, CovarianceScaling::Laplacian).unwrap();
    let process = ReferenceProcess::new(
        NoiseSchedule::Geometric {
            beta_min: 0.1,
            beta_max: 10.0,
            horizon: 1.0,
        },
        eig,
        1.0,
    )
    .unwrap();
    let arch = ControlArch {
        n_layers: 2,
        n_modes: 4,
        width: 8,
        embed_dim: 8,
        channels: 2,
    };
    let mut params = ControlParams::init(arch, 3).unwrap();
    params.theta.iter_mut().for_each(|v| *v += 0.1 * normal(&mut rng));
    let mut ctl = SpectralControl::new(params.clone(), &grid).unwrap();
    let x = Array3::from_shape_fn((k, 4, 2), |_| normal(&mut rng));
    let y = Array3::from_shape_fn((k, 4, 2), |_| normal(&mut rng));
    let ts = [0.1, 0.4, 0.7, 0.95];
    let mut ctl_worst: f64 = 0.0;
    for weighting in [Weighting::Unweighted, Weighting::CtWeighted] {
        ctl.set_theta(&params.theta).unwrap();
        let (_, grad) = ctl.loss_and_grad(x.view(), &ts, y.view(), weighting, &process).unwrap();
        for _ in 0..64 {
            let i = rng.random_range(0..params.theta.len());
            let h = 1e-6;
            let mut th = params.theta.clone();
            th[i] += h;
            ctl.set_theta(&th).unwrap();
            let up = ctl.loss_and_grad(x.view(), &ts, y.view(), weighting, &process).unwrap().0;
            th[i] -= 2.0 * h;
            ctl.set_theta(&th).unwrap();
            let dn = ctl.loss_and_grad(x.view(), &ts, y.view(), weighting, &process).unwrap().0;
            let fd = (up - dn) / (2.0 * h);
            ctl_worst = ctl_worst.max((fd - grad[i]).abs() / grad[i].abs().max(1e-6));
        }
    }

    // every energy model on a perturbed Müller-Brown path
    let eg = Grid::new(20, 1.0).unwrap();
    let a = array![MullerBrown::STATE_A[0], MullerBrown::STATE_A[1]];
    let b = array![MullerBrown::STATE_B[0], MullerBrown::STATE_B[1]];
    let lin = reference_path(a.view(), b.view(), &eg).unwrap();
    let mut path = lin.path().clone();
    path.interior.mapv_inplace(|v| v + 0.05 * normal(&mut rng));
    let phys = PhysParams::for_grid(20);
    let mb = Arc::new(MullerBrown);
    let a6 = array![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.2, 0.3];
    let b6 = array![0.1, 0.0, 0.0, 1.5, 0.2, 0.0, -0.3, 1.0, 0.8];
    let lin3 = reference_path(a6.view(), b6.view(), &eg).unwrap();
    let mut path3 = lin3.path().clone();
    path3.interior.mapv_inplace(|v| v + 0.05 * normal(&mut rng));
    let models: Vec<(&str, Box<dyn EnergyModel>, &PathSample)> = vec![
        ("tpd_synthetic", Box::new(TpdSyntheticNll::new(phys, mb.clone()).unwrap()), &path),
        ("tpd_fk", Box::new(TpdFkNll::new(phys, mb.clone()).unwrap()), &path),
        ("quadratic", Box::new(QuadraticModeEnergy::new(vec![0.5, 1.0, 2.0], lin.clone()).unwrap()), &path),
        ("idpp", Box::new(Idpp::new(a6.view(), b6.view(), 3).unwrap()), &path3),
        (
            "composite",
            Box::new(CompositeEnergy {
                terms: vec![
                    (1.0, Box::new(TpdSyntheticNll::new(phys, mb.clone()).unwrap()) as Box<dyn EnergyModel>),
                    (0.3, Box::new(QuadraticModeEnergy::new(vec![1.0], lin.clone()).unwrap())),
                ],
            }),
            &path,
        ),
    ];
    let mut energy_worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, m, p) in &models {
        let e = fd_relative_error(m.as_ref(), p);
        energy_worst = energy_worst.max(e);
        parts.push(format!("{name} {e:.1e}"));
    }
    verdict(
        "AC-5",
        ctl_worst <= 1e-4 && energy_worst <= 1e-5,
        format!(
            "control max rel {ctl_worst:.2e} (tol 1e-4); energies [{}] (tol 1e-5)",
            parts.join(", ")
        ),
    );
}

// ---------------------------------------------------------------- AC-6

#[test]
fn ac6_bridge_forward_consistency() {
    let k = 6;
    let eig = EigenSystem::new(k, 1.0, 0.2, 1.0, CovarianceScaling::Laplacian).unwrap();
    let schedules = [
        NoiseSchedule::Constant { sigma: 1.0 },
        NoiseSchedule::Geometric {
            beta_min: 0.1,
            beta_max: 10.0,
            horizon: 1.0,
        },
    ];
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for sched in schedules {
        let process = ReferenceProcess::new(sched, eig.clone(), 1.0).unwrap();
        for t in [0.25, 0.5, 0.75] {
            let mut bridged = Array2::<f64>::zeros((k, n));
            let mut direct = Array2::<f64>::zeros((k, n));
            for j in 0..n {
                let end = process.sample_marginal(1.0, 1, &mut rng).unwrap();
                let mid = process.sample_bridge(&end, t, &mut rng).unwrap();
                bridged.column_mut(j).assign(&mid.0.column(0));
                direct.column_mut(j).assign(&process.sample_marginal(t, 1, &mut rng).unwrap().0.column(0));
            }
            for m in 0..k {
                let (mb, sb) = mean_std(&bridged.row(m).to_vec());
                let (md, sd) = mean_std(&direct.row(m).to_vec());
                let (vb, vd) = (sb * sb, sd * sd);
                let se_mean = ((vb + vd) / n as f64).sqrt();
                let se_var = ((vb * vb + vd * vd) * 2.0 / (n - 1) as f64).sqrt();
                worst = worst.max((mb - md).abs() / se_mean).max((vb - vd).abs() / se_var);
            }
        }
    }
    verdict(
        "AC-6",
        worst <= 3.0,
        format!("largest mean/variance gap {worst:.2} standard errors over 72 checks (tol 3)"),
    );
}

// ---------------------------------------------------------------- AC-7

#[test]
fn ac7_transform_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for k in [1, 7, 64, 1000] {
        let basis = SineBasis::new(Grid::new(k, 1.0).unwrap());
        let x = Array2::from_shape_fn((k, 3), |_| normal(&mut rng));
        let back = basis.idst(&basis.dst(x.view()).unwrap()).unwrap();
        let err = (&back - &x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(err);
    }
    verdict("AC-7", worst <= 1e-10, format!("max round-trip error {worst:.2e} for K in {{1, 7, 64, 1000}} (tol 1e-10)"));
}

// ---------------------------------------------------------------- AC-8

fn euler_zyz(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (ca, sa, cb, sb, cc, sc) = (a.cos(), a.sin(), b.cos(), b.sin(), c.cos(), c.sin());
    [
        [ca * cb * cc - sa * sc, -ca * cb * sc - sa * cc, ca * sb],
        [sa * cb * cc + ca * sc, -sa * cb * sc + ca * cc, sa * sb],
        [-sb * cc, sb * sc, cb],
    ]
}

/// Brute-force RMSD minimum over a 1-degree ZYZ Euler grid.
fn grid_search_rmsd(p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    let center = |x: &Array2<f64>| {
        let c = x.mean_axis(Axis(0)).unwrap();
        x - &c
    };
    let (p, q) = (center(p), center(q));
    let n = p.nrows() as f64;
    let sq: f64 = p.iter().chain(q.iter()).map(|v| v * v).sum();
    // h[i][j] = sum_n q_i p_j, so sum_n q . (R p) = sum_ij R_ij h_ij
    let mut h = [[0.0; 3]; 3];
    for (pr, qr) in p.outer_iter().zip(q.outer_iter()) {
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] += qr[i] * pr[j];
            }
        }
    }
    let deg = PI / 180.0;
    let mut best = f64::INFINITY;
    for ia in 0..360 {
        for ib in 0..=180 {
            for ic in 0..360 {
                let r = euler_zyz(ia as f64 * deg, ib as f64 * deg, ic as f64 * deg);
                let mut cross = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        cross += r[i][j] * h[i][j];
                    }
                }
                best = best.min(sq - 2.0 * cross);
            }
        }
    }
    (best.max(0.0) / n).sqrt()
}

#[test]
fn ac8_substitute_oracles() {
    // Kabsch against the rotation grid search on 3-point configurations
    let p = array![[0.0, 0.0, 0.0], [1.2, 0.1, -0.3], [0.2, 0.9, 0.4]];
    let r = euler_zyz(0.7, 1.1, -2.3);
    let disp = array![[0.3, -0.2, 0.1], [-0.1, 0.25, 0.2], [0.15, 0.05, -0.3]];
    let mut q = Array2::zeros((3, 3));
    for (mut qr, pr) in q.outer_iter_mut().zip(p.outer_iter()) {
        for i in 0..3 {
            qr[i] = (0..3).map(|j| r[i][j] * pr[j]).sum::<f64>() + 2.0;
        }
    }
    q += &disp;
    let kab = kabsch_rmsd(p.view(), q.view()).unwrap().rmsd;
    let brute = grid_search_rmsd(&p, &q);
    let kabsch_ok = (kab - brute).abs() <= 1e-3 && kab <= brute + 1e-12;

    // IDPP two-atom oracle: bond 1 along x turning into bond 3 along y
    let grid = Grid::new(9, 1.0).unwrap();
    let a = array![0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    let b = array![0.0, 0.0, 0.0, 0.0, 3.0, 0.0];
    let path = idpp_init(a.view(), b.view(), &grid, 3, 4000, 0.2).unwrap();
    let mut idpp_worst: f64 = 0.0;
    for (i, u) in grid.unit_points().iter().enumerate() {
        let x = path.path().interior.row(i);
        let d = ((x[3] - x[0]).powi(2) + (x[4] - x[1]).powi(2) + (x[5] - x[2]).powi(2)).sqrt();
        idpp_worst = idpp_worst.max((d - ((1.0 - u) + 3.0 * u)).abs());
    }
    verdict(
        "AC-8",
        kabsch_ok && idpp_worst <= 1e-3,
        format!(
            "molecular runs not reproducible at desk scale; substitutes: Kabsch {kab:.6} vs grid search {brute:.6}, \
             IDPP max distance error {idpp_worst:.2e} (tol 1e-3)"
        ),
    );
}
