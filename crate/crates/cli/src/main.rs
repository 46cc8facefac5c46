use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use ndarray::Array1;

use fas_core::config::{EnergyKind, RunConfig};
use fas_core::control::{load_checkpoint, save_checkpoint, CheckpointHeader, ControlParams, SpectralControl, PARAMS_VERSION};
use fas_core::dynamics::{simulate, Integrator, SimOptions};
use fas_core::energy::{MullerBrown, Potential};
use fas_core::io;
use fas_core::metrics::evaluate_paths;
use fas_core::pathinit::idpp_init;
use fas_core::spectral::Grid;
use fas_core::trainer::{train, Flow, Problem};
use fas_core::FasError;

#[derive(Parser)]
#[command(name = "fas", version, about = "Function-space adjoint sampler for transition paths")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Fasp,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a control from a JSON config.
    Train {
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long)]
        out: PathBuf,
    },
    /// Roll out paths from a checkpoint, optionally on a refined grid.
    Sample {
        #[arg(short = 'k', long)]
        checkpoint: PathBuf,
        #[arg(short = 'n', long, default_value_t = 64)]
        n_paths: usize,
        /// Grid refinement factor.
        #[arg(short = 'r', long, default_value_t = 1)]
        refine: usize,
        #[arg(short = 's', long, default_value_t = 0)]
        seed: u64,
        #[arg(short = 'o', long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Keep every n-th diffusion step in the trajectory files (the final state is always kept).
        #[arg(long, default_value_t = 10)]
        every: usize,
    },
    /// Metrics and plot data for a directory of trajectories.
    Eval {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(short = 'o', long)]
        out: PathBuf,
        /// Run config supplying the potential, physical constants and landscape box.
        #[arg(short = 'c', long)]
        config: Option<PathBuf>,
        /// Landscape CSV; defaults to `landscape.csv` next to the metrics file.
        #[arg(long)]
        landscape: Option<PathBuf>,
    },
    /// Build an initial path and write it as a trajectory CSV.
    InitPath {
        #[arg(long = "A", value_delimiter = ',', allow_hyphen_values = true, required = true)]
        a: Vec<f64>,
        #[arg(long = "B", value_delimiter = ',', allow_hyphen_values = true, required = true)]
        b: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        idpp_steps: usize,
        #[arg(long, default_value_t = 0.01)]
        step_size: f64,
        #[arg(long, default_value_t = 3)]
        atom_dim: usize,
        #[arg(short = 'k', long, default_value_t = 100)]
        n_points: usize,
        #[arg(short = 'o', long, default_value = "init_path.csv")]
        out: PathBuf,
    },
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }
}

impl From<FasError> for Failure {
    fn from(e: FasError) -> Self {
        let code = match e {
            FasError::NumericalAbort(_) => 3,
            FasError::External(_) => 1,
            _ => 2,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: 1, msg: e.to_string() }
    }
}

type Res<T> = std::result::Result<T, Failure>;

/// Worker threads: the configured count (0 = all cores) capped by `FAS_THREADS`.
fn worker_threads(configured: usize) -> usize {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    let want = if configured == 0 { avail } else { configured };
    match std::env::var("FAS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(cap) if cap > 0 => want.min(cap),
        _ => want,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Res<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(FasError::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_train(config: &Path, out: &Path) -> Res<()> {
    if !config.is_file() {
        return Err(Failure::config(format!("config file not found: {}", config.display())));
    }
    let mut cfg = RunConfig::load(config).map_err(|e| Failure::config(format!("{}: {e}", config.display())))?;
    let resolved = cfg.resolved();
    let setup = cfg.build().map_err(|e| Failure::config(format!("{}: {e}", config.display())))?;
    cfg.train.threads = worker_threads(cfg.train.threads);
    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), &resolved)?;
    let snapshot = serde_json::to_value(&resolved).map_err(FasError::from)?;

    let params = ControlParams::init(cfg.arch, cfg.train.seed)?;
    let control = SpectralControl::new(params, &setup.grid)?;
    let header = |epoch: usize, n_params: usize| CheckpointHeader {
        version: PARAMS_VERSION,
        arch: cfg.arch,
        n_params,
        seed: cfg.train.seed,
        epoch,
        config: snapshot.clone(),
    };
    let mut log = BufWriter::new(File::create(out.join("train_log.jsonl"))?);
    let prob = Problem {
        process: &setup.process,
        reference: &setup.reference,
        energy: setup.energy.as_ref(),
        potential: setup.potential.clone(),
    };
    let every = cfg.train.checkpoint_every;
    let result = train(&cfg.train, control, &prob, &mut |entry, ctl| {
        serde_json::to_writer(&mut log, entry)?;
        writeln!(log)?;
        log.flush()?;
        if every > 0 && (entry.epoch + 1) % every == 0 {
            let p = ctl.params();
            save_checkpoint(&out.join(format!("checkpoint_{:05}.bin", entry.epoch + 1)), &header(entry.epoch + 1, p.n_params()), p)?;
        }
        Ok(Flow::Continue)
    })?;
    let p = result.control.params();
    save_checkpoint(&out.join("checkpoint.bin"), &header(result.log.len(), p.n_params()), p)?;
    info!(
        "trained {} epochs; {} optimizer steps skipped",
        result.log.len(),
        result.optimizer.skipped()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(ckpt: &Path, n: usize, r: usize, seed: u64, out: &Path, format: Format, every: usize) -> Res<()> {
    let (header, params) = load_checkpoint(ckpt).map_err(|e| Failure::config(format!("{}: {e}", ckpt.display())))?;
    let base: RunConfig = serde_json::from_value(header.config.clone())
        .map_err(|e| Failure::config(format!("checkpoint config does not parse: {e}")))?;
    if ![1, 2, 4, 10, 100].contains(&r) {
        warn!("refine factor {r} is outside the tested set {{1, 2, 4, 10, 100}}");
    }
    let cfg = base.refined(r)?;
    let setup = cfg.build()?;
    if params.arch.channels != setup.reference.channels() {
        return Err(Failure::config(format!(
            "checkpoint has {} channels but the path has {}",
            params.arch.channels,
            setup.reference.channels()
        )));
    }
    let control = SpectralControl::new(params, &setup.grid)?;

    let dt = setup.process.horizon() / cfg.train.n_sde_steps as f64;
    let stiff = setup.process.eig().lambdas().iter().fold(0.0f64, |m, l| m.max(*l)) * dt;
    let mut integrator = cfg.train.integrator;
    if integrator == Integrator::EulerMaruyama && stiff >= 1.0 {
        warn!("explicit step is stiff on this grid (lambda_max * dt = {stiff:.2}); using the exponential integrator");
        integrator = Integrator::ExponentialEuler;
    }
    let opts = SimOptions {
        n_steps: cfg.train.n_sde_steps,
        integrator,
        seed,
        record_trajectory: true,
        threads: worker_threads(cfg.train.threads),
        first_sample: 0,
    };
    let roll = simulate(&control, &setup.process, &setup.reference, n, &opts)?;
    fs::create_dir_all(out)?;
    let pdir = out.join("paths");
    fs::create_dir_all(&pdir)?;
    let every = every.max(1);
    for j in 0..n {
        let frames = roll.sample_trajectory(j, &setup.reference).expect("recorded");
        let last = frames.len() - 1;
        let kept: Vec<_> = frames.into_iter().enumerate().filter(|(i, _)| i % every == 0 || *i == last).map(|(_, f)| f).collect();
        match format {
            Format::Csv => io::save_csv(&pdir.join(format!("path_{j:05}.csv")), &kept)?,
            Format::Fasp => io::save_fasp(&pdir.join(format!("path_{j:05}.fasp")), &kept)?,
        }
    }
    write_json(&out.join("config.json"), &cfg)?;
    let text = serde_json::to_string(&cfg).map_err(FasError::from)?;
    let target = Array1::from(cfg.path.b.clone());
    let rep = evaluate_paths(&roll.paths, setup.potential, &setup.phys, &target, cfg.eval.thp_eps, &text)?;
    write_json(&out.join("metrics.json"), &rep)?;
    info!(
        "sampled {n} paths on K = {}: THP {:.1}% ETS {}",
        setup.grid.n_points(),
        rep.thp,
        rep.ets_mean.map_or("n/a".into(), |v| format!("{v:.3}"))
    );
    Ok(())
}

fn cmd_eval(input: &Path, out: &Path, config: Option<&Path>, landscape: Option<&Path>) -> Res<()> {
    let paths = io::load_final_paths(input).map_err(|e| Failure::config(e.to_string()))?;
    let dims = (paths[0].n_points(), paths[0].channels());
    if paths.iter().any(|p| (p.n_points(), p.channels()) != dims) {
        return Err(Failure::config("trajectories disagree on grid size or dimension"));
    }
    let (cfg, text) = match config {
        Some(c) => {
            let cfg = RunConfig::load(c).map_err(|e| Failure::config(format!("{}: {e}", c.display())))?;
            let text = fs::read_to_string(c)?;
            (cfg, text)
        }
        None => {
            let mut cfg = RunConfig::default();
            cfg.grid.n_points = dims.0;
            cfg.path.b = paths[0].end.to_vec();
            (cfg.resolved(), String::new())
        }
    };
    let phys = cfg.resolved_phys();
    let mb = matches!(cfg.energy.kind, EnergyKind::MullerBrownTpd | EnergyKind::MullerBrownFk);
    let potential: Option<Arc<dyn Potential>> = (mb && dims.1 == 2).then(|| Arc::new(MullerBrown) as _);
    let target = Array1::from(cfg.path.b.clone());
    if target.len() != dims.1 {
        return Err(Failure::config("config endpoint dimension does not match the trajectories"));
    }
    let text = if text.is_empty() { serde_json::to_string(&cfg).map_err(FasError::from)? } else { text };
    let rep = evaluate_paths(&paths, potential.clone(), &phys, &target, cfg.eval.thp_eps, &text)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_json(out, &rep)?;

    if let Some(pot) = potential {
        let lpath = landscape.map(Path::to_path_buf).unwrap_or_else(|| out.with_file_name("landscape.csv"));
        let [x0, x1, y0, y1] = cfg.eval.bbox;
        let (nx, ny) = (cfg.eval.nx, cfg.eval.ny);
        let mut w = BufWriter::new(File::create(&lpath)?);
        writeln!(w, "x,y,v")?;
        let at = |lo: f64, hi: f64, i: usize, n: usize| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = (at(x0, x1, i, nx), at(y0, y1, j, ny));
                writeln!(w, "{x:e},{y:e},{:e}", pot.value(ndarray::array![x, y].view()))?;
            }
        }
        w.flush()?;
        let mut o = BufWriter::new(File::create(lpath.with_file_name("overlay.csv"))?);
        writeln!(o, "path,u_index,x,y,v")?;
        for (p, path) in paths.iter().enumerate() {
            for (u, row) in path.full().outer_iter().enumerate() {
                writeln!(o, "{p},{u},{:e},{:e},{:e}", row[0], row[1], pot.value(row))?;
            }
        }
        o.flush()?;
    }
    info!("evaluated {} paths: THP {:.1}%", rep.n_paths, rep.thp);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_init_path(a: &[f64], b: &[f64], steps: usize, step: f64, atom_dim: usize, k: usize, out: &Path) -> Res<()> {
    if a.len() != b.len() {
        return Err(Failure::config(format!("--A has {} values but --B has {}", a.len(), b.len())));
    }
    // a configuration that does not split into atoms is treated as a single point
    let atom_dim = if a.len() % atom_dim.max(1) == 0 { atom_dim } else { a.len() };
    let grid = Grid::new(k, 1.0)?;
    let (a, b) = (Array1::from(a.to_vec()), Array1::from(b.to_vec()));
    let path = idpp_init(a.view(), b.view(), &grid, atom_dim, steps, step)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    io::save_csv(out, &[(0.0, path.path().clone())])?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Train { config, out } => cmd_train(config, out),
        Cmd::Sample {
            checkpoint,
            n_paths,
            refine,
            seed,
            out,
            format,
            every,
        } => cmd_sample(checkpoint, *n_paths, *refine, *seed, out, *format, *every),
        Cmd::Eval {
            input,
            out,
            config,
            landscape,
        } => cmd_eval(input, out, config.as_deref(), landscape.as_deref()),
        Cmd::InitPath {
            a,
            b,
            idpp_steps,
            step_size,
            atom_dim,
            n_points,
            out,
        } => cmd_init_path(a, b, *idpp_steps, *step_size, *atom_dim, *n_points, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
