//! Path energies and the clipped terminal adjoint.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{PathSample, ReferencePath};
use crate::error::{FasError, Result};
use crate::measures::ReferenceProcess;
use crate::spectral::{SineBasis, SpectralCoeffs};

/// A scalar potential on configuration space.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: ArrayView1<'_, f64>) -> f64;
    fn gradient(&self, x: ArrayView1<'_, f64>) -> Array1<f64>;
    fn hessian(&self, x: ArrayView1<'_, f64>) -> Array2<f64>;
}

/// The four-term Müller-Brown surface.
#[derive(Debug, Clone, Copy, Default)]
pub struct MullerBrown;

const MB_A: [f64; 4] = [-200.0, -100.0, -170.0, 15.0];
const MB_SA: [f64; 4] = [-1.0, -1.0, -6.5, 0.7];
const MB_SB: [f64; 4] = [0.0, 0.0, 11.0, 0.6];
const MB_SC: [f64; 4] = [-10.0, -10.0, -6.5, 0.7];
const MB_X0: [f64; 4] = [1.0, 0.0, -0.5, -1.0];
const MB_Y0: [f64; 4] = [0.0, 0.5, 1.5, 1.0];

impl MullerBrown {
    /// Global minimum and the second minimum used as path endpoints.
    pub const STATE_A: [f64; 2] = [-0.558, 1.442];
    pub const STATE_B: [f64; 2] = [0.624, 0.028];

    fn terms(x: f64, y: f64) -> impl Iterator<Item = (usize, f64, f64, f64)> {
        (0..4).map(move |i| {
            let (dx, dy) = (x - MB_X0[i], y - MB_Y0[i]);
            let e = MB_A[i] * (MB_SA[i] * dx * dx + MB_SB[i] * dx * dy + MB_SC[i] * dy * dy).exp();
            (i, dx, dy, e)
        })
    }

    pub fn eval(x: f64, y: f64) -> f64 {
        Self::terms(x, y).map(|(_, _, _, e)| e).sum()
    }

    pub fn grad(x: f64, y: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (i, dx, dy, e) in Self::terms(x, y) {
            g[0] += e * (2.0 * MB_SA[i] * dx + MB_SB[i] * dy);
            g[1] += e * (MB_SB[i] * dx + 2.0 * MB_SC[i] * dy);
        }
        g
    }

    pub fn hess(x: f64, y: f64) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for (i, dx, dy, e) in Self::terms(x, y) {
            let px = 2.0 * MB_SA[i] * dx + MB_SB[i] * dy;
            let py = MB_SB[i] * dx + 2.0 * MB_SC[i] * dy;
            h[0][0] += e * (px * px + 2.0 * MB_SA[i]);
            h[0][1] += e * (px * py + MB_SB[i]);
            h[1][1] += e * (py * py + 2.0 * MB_SC[i]);
        }
        h[1][0] = h[0][1];
        h
    }
}

impl Potential for MullerBrown {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        Self::eval(x[0], x[1])
    }

    fn gradient(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        Array1::from(Self::grad(x[0], x[1]).to_vec())
    }

    fn hessian(&self, x: ArrayView1<'_, f64>) -> Array2<f64> {
        let h = Self::hess(x[0], x[1]);
        Array2::from_shape_fn((2, 2), |(i, j)| h[i][j])
    }
}

/// `V = c` in any dimension.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPotential {
    pub dim: usize,
    pub value: f64,
}

impl Potential for ConstantPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: ArrayView1<'_, f64>) -> f64 {
        self.value
    }

    fn gradient(&self, _x: ArrayView1<'_, f64>) -> Array1<f64> {
        Array1::zeros(self.dim)
    }

    fn hessian(&self, _x: ArrayView1<'_, f64>) -> Array2<f64> {
        Array2::zeros((self.dim, self.dim))
    }
}

/// `V = 0.5 |x|^2`.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicPotential {
    pub dim: usize,
}

impl Potential for HarmonicPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        0.5 * x.dot(&x)
    }

    fn gradient(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        x.to_owned()
    }

    fn hessian(&self, _x: ArrayView1<'_, f64>) -> Array2<f64> {
        Array2::eye(self.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    pub gamma_m: f64,
    pub kbt: f64,
    pub delta_u: f64,
}

impl PhysParams {
    pub fn for_grid(n_points: usize) -> Self {
        Self {
            gamma_m: 1.0,
            kbt: 5.0,
            delta_u: 1.0 / (n_points + 1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma_m", self.gamma_m), ("kbt", self.kbt), ("delta_u", self.delta_u)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FasError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Energy functional over whole paths.
pub trait EnergyModel: Send + Sync {
    fn energy(&self, path: &PathSample) -> Result<f64>;
    /// Derivative with respect to the interior grid values, `K x d`.
    fn gradient(&self, path: &PathSample) -> Result<Array2<f64>>;

    fn energy_and_gradient(&self, path: &PathSample) -> Result<(f64, Array2<f64>)> {
        Ok((self.energy(path)?, self.gradient(path)?))
    }

    /// Batched evaluation; backends with per-call overhead override this.
    fn evaluate_batch(&self, paths: &[PathSample]) -> Vec<Result<(f64, Array2<f64>)>> {
        paths.iter().map(|p| self.energy_and_gradient(p)).collect()
    }
}

fn check_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FasError::NonFinite(what.into()))
    }
}

/// Negative log of the overdamped Langevin transition chain, up to a constant.
#[derive(Debug, Clone)]
pub struct TpdSyntheticNll {
    pub phys: PhysParams,
    pub potential: Arc<dyn Potential>,
}

impl TpdSyntheticNll {
    pub fn new(phys: PhysParams, potential: Arc<dyn Potential>) -> Result<Self> {
        phys.validate()?;
        Ok(Self { phys, potential })
    }

    fn coupling(&self) -> f64 {
        self.phys.gamma_m / (4.0 * self.phys.kbt * self.phys.delta_u)
    }

    /// Transition residuals `X[j+1] - X[j] + (du / gm) grad V(X[j])`, one row per transition.
    pub fn residuals(&self, full: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let n = full.nrows() - 1;
        let step = self.phys.delta_u / self.phys.gamma_m;
        let mut r = Array2::zeros((n, full.ncols()));
        for j in 0..n {
            let g = self.potential.gradient(full.row(j));
            if g.iter().any(|v| !v.is_finite()) {
                return Err(FasError::NonFinite(format!("potential gradient at point {j}")));
            }
            let mut row = r.row_mut(j);
            row.assign(&(&full.row(j + 1) - &full.row(j) + &(g * step)));
        }
        Ok(r)
    }
}

impl EnergyModel for TpdSyntheticNll {
    fn energy(&self, path: &PathSample) -> Result<f64> {
        let r = self.residuals(path.full().view())?;
        check_finite(self.coupling() * r.iter().map(|v| v * v).sum::<f64>(), "transition energy")
    }

    fn gradient(&self, path: &PathSample) -> Result<Array2<f64>> {
        let full = path.full();
        let r = self.residuals(full.view())?;
        let c2 = 2.0 * self.coupling();
        let step = self.phys.delta_u / self.phys.gamma_m;
        let k = path.n_points();
        let mut g = Array2::zeros((k, path.channels()));
        for i in 0..k {
            let j = i + 1;
            let h = self.potential.hessian(full.row(j));
            let rj = r.row(j);
            let v = &r.row(j - 1) - &rj + &(h.dot(&rj) * step);
            g.row_mut(i).assign(&(v * c2));
        }
        Ok(g)
    }
}

/// Feynman-Kac reweighted free-diffusion chain.
#[derive(Debug, Clone)]
pub struct TpdFkNll {
    pub phys: PhysParams,
    pub potential: Arc<dyn Potential>,
}

impl TpdFkNll {
    pub fn new(phys: PhysParams, potential: Arc<dyn Potential>) -> Result<Self> {
        phys.validate()?;
        Ok(Self { phys, potential })
    }

    fn spring(&self) -> f64 {
        0.5 * self.phys.gamma_m / self.phys.delta_u
    }
}

impl EnergyModel for TpdFkNll {
    fn energy(&self, path: &PathSample) -> Result<f64> {
        let full = path.full();
        let mut total = 0.0;
        for j in 0..full.nrows() - 1 {
            let d = &full.row(j + 1) - &full.row(j);
            total += self.potential.value(full.row(j)) + 0.5 * self.spring() * d.dot(&d);
        }
        check_finite(total / self.phys.kbt, "path potential")
    }

    fn gradient(&self, path: &PathSample) -> Result<Array2<f64>> {
        let full = path.full();
        let k = path.n_points();
        let mut g = Array2::zeros((k, path.channels()));
        for i in 0..k {
            let j = i + 1;
            let lap = &full.row(j) * 2.0 - &full.row(j - 1) - &full.row(j + 1);
            let v = self.potential.gradient(full.row(j)) + lap * self.spring();
            g.row_mut(i).assign(&(v / self.phys.kbt));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(FasError::NonFinite("path potential gradient".into()));
        }
        Ok(g)
    }
}

/// Image-dependent pair potential toward distances interpolated between `A` and `B`.
#[derive(Debug, Clone)]
pub struct Idpp {
    atom_dim: usize,
    n_atoms: usize,
    dist_a: Vec<f64>,
    dist_b: Vec<f64>,
}

fn pair_distances(x: ArrayView1<'_, f64>, atom_dim: usize) -> Vec<f64> {
    let n = x.len() / atom_dim;
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let mut s = 0.0;
            for c in 0..atom_dim {
                let d = x[i * atom_dim + c] - x[j * atom_dim + c];
                s += d * d;
            }
            out.push(s.sqrt());
        }
    }
    out
}

impl Idpp {
    /// Configurations are flattened `n_atoms x atom_dim` vectors.
    pub fn new(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, atom_dim: usize) -> Result<Self> {
        if atom_dim == 0 || a.len() % atom_dim != 0 || a.len() != b.len() {
            return Err(FasError::InvalidParameter(format!(
                "configurations of length {} and {} do not split into atoms of dimension {atom_dim}",
                a.len(),
                b.len()
            )));
        }
        let dist_a = pair_distances(a, atom_dim);
        let dist_b = pair_distances(b, atom_dim);
        if dist_a.iter().chain(&dist_b).any(|&d| !(d > 0.0)) {
            return Err(FasError::InvalidParameter("coincident atoms in an endpoint configuration".into()));
        }
        Ok(Self {
            atom_dim,
            n_atoms: a.len() / atom_dim,
            dist_a,
            dist_b,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.dist_a.len()
    }

    fn target(&self, p: usize, u: f64) -> f64 {
        (1.0 - u) * self.dist_a[p] + u * self.dist_b[p]
    }

    /// Energy of one image at normalized path position `u`.
    pub fn image_energy(&self, x: ArrayView1<'_, f64>, u: f64) -> f64 {
        pair_distances(x, self.atom_dim)
            .iter()
            .enumerate()
            .map(|(p, &d)| {
                let t = self.target(p, u);
                (d - t).powi(2) / t.powi(4)
            })
            .sum()
    }

    pub fn image_gradient(&self, x: ArrayView1<'_, f64>, u: f64) -> Array1<f64> {
        let mut g = Array1::zeros(x.len());
        let ad = self.atom_dim;
        let mut p = 0;
        for i in 0..self.n_atoms {
            for j in i + 1..self.n_atoms {
                let mut diff = vec![0.0; ad];
                let mut s = 0.0;
                for c in 0..ad {
                    diff[c] = x[i * ad + c] - x[j * ad + c];
                    s += diff[c] * diff[c];
                }
                let d = s.sqrt();
                let t = self.target(p, u);
                if d > 0.0 {
                    let coef = 2.0 * (d - t) / t.powi(4) / d;
                    for c in 0..ad {
                        g[i * ad + c] += coef * diff[c];
                        g[j * ad + c] -= coef * diff[c];
                    }
                }
                p += 1;
            }
        }
        g
    }

    fn positions(path: &PathSample) -> Vec<f64> {
        let n1 = (path.n_points() + 1) as f64;
        (1..=path.n_points()).map(|i| i as f64 / n1).collect()
    }
}

impl EnergyModel for Idpp {
    fn energy(&self, path: &PathSample) -> Result<f64> {
        let total = Self::positions(path)
            .iter()
            .zip(path.interior.outer_iter())
            .map(|(&u, x)| self.image_energy(x, u))
            .sum();
        check_finite(total, "idpp energy")
    }

    fn gradient(&self, path: &PathSample) -> Result<Array2<f64>> {
        let mut g = Array2::zeros(path.interior.raw_dim());
        for ((&u, x), mut row) in Self::positions(path).iter().zip(path.interior.outer_iter()).zip(g.outer_iter_mut()) {
            row.assign(&self.image_gradient(x, u));
        }
        Ok(g)
    }
}

/// `U = 0.5 sum_k b_k r_k^2` on the residual sine coefficients; modes beyond `b` carry no energy.
#[derive(Debug, Clone)]
pub struct QuadraticModeEnergy {
    b: Vec<f64>,
    reference: ReferencePath,
    basis: SineBasis,
}

impl QuadraticModeEnergy {
    pub fn new(b: Vec<f64>, reference: ReferencePath) -> Result<Self> {
        if let Some(v) = b.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(FasError::InvalidParameter(format!("mode stiffness must be non-negative, got {v}")));
        }
        let grid = *reference.grid();
        if b.len() > grid.n_points() {
            return Err(FasError::shape(format!("at most {} stiffnesses", grid.n_points()), b.len()));
        }
        Ok(Self {
            b,
            basis: SineBasis::new(grid),
            reference,
        })
    }

    pub fn stiffness(&self) -> &[f64] {
        &self.b
    }

    /// Mode precision of the resulting target: `1 / q_inf + b_k`.
    pub fn target_variances(&self, process: &ReferenceProcess) -> Vec<f64> {
        process
            .invariant_variances()
            .iter()
            .enumerate()
            .map(|(k, qi)| 1.0 / (1.0 / qi + self.b.get(k).copied().unwrap_or(0.0)))
            .collect()
    }

    fn modes(&self, path: &PathSample) -> Result<SpectralCoeffs> {
        let r = &path.interior - &self.reference.path().interior;
        self.basis.dst(r.view())
    }
}

impl EnergyModel for QuadraticModeEnergy {
    fn energy(&self, path: &PathSample) -> Result<f64> {
        let c = self.modes(path)?;
        Ok(self
            .b
            .iter()
            .zip(c.0.outer_iter())
            .map(|(bk, row)| 0.5 * bk * row.dot(&row))
            .sum())
    }

    fn gradient(&self, path: &PathSample) -> Result<Array2<f64>> {
        let mut c = self.modes(path)?;
        for (k, mut row) in c.0.outer_iter_mut().enumerate() {
            let bk = self.b.get(k).copied().unwrap_or(0.0);
            row.mapv_inplace(|v| v * bk);
        }
        self.basis.idst(&c)
    }
}

/// Identically zero energy.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroEnergy;

impl EnergyModel for ZeroEnergy {
    fn energy(&self, _path: &PathSample) -> Result<f64> {
        Ok(0.0)
    }

    fn gradient(&self, path: &PathSample) -> Result<Array2<f64>> {
        Ok(Array2::zeros(path.interior.raw_dim()))
    }
}

/// Energy provided by an external program.
///
/// For each batch the program is run as `<command> <args..> request.csv response.csv`.
/// The request has header `path,u_index,channel,value` and lists every grid
/// point of every path, endpoints included (`u_index` 0 and `K + 1`). The
/// response must have header `record,path,u_index,channel,value`, with one
/// `energy` record per path (empty `u_index` and `channel`) and `grad` records
/// for each interior point `1..=K` and channel.
#[derive(Debug, Clone)]
pub struct ExternalEnergy {
    pub command: String,
    pub args: Vec<String>,
    pub work_dir: PathBuf,
}

impl ExternalEnergy {
    fn write_request(paths: &[PathSample]) -> String {
        let mut s = String::from("path,u_index,channel,value\n");
        for (p, path) in paths.iter().enumerate() {
            for (u, row) in path.full().outer_iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    s.push_str(&format!("{p},{u},{c},{v:e}\n"));
                }
            }
        }
        s
    }

    fn parse_response(text: &str, paths: &[PathSample]) -> Result<Vec<(Option<f64>, Array2<f64>)>> {
        let mut out: Vec<(Option<f64>, Array2<f64>)> =
            paths.iter().map(|p| (None, Array2::from_elem(p.interior.raw_dim(), f64::NAN))).collect();
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").trim();
        if header != "record,path,u_index,channel,value" {
            return Err(FasError::External(format!("unexpected response header '{header}'")));
        }
        for (n, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || FasError::External(format!("malformed response line {}: '{line}'", n + 2));
            if f.len() != 5 {
                return Err(bad());
            }
            let p: usize = f[1].parse().map_err(|_| bad())?;
            let v: f64 = f[4].parse().map_err(|_| bad())?;
            let slot = out.get_mut(p).ok_or_else(bad)?;
            match f[0] {
                "energy" => slot.0 = Some(v),
                "grad" => {
                    let u: usize = f[2].parse().map_err(|_| bad())?;
                    let c: usize = f[3].parse().map_err(|_| bad())?;
                    if u == 0 || u > slot.1.nrows() || c >= slot.1.ncols() {
                        return Err(bad());
                    }
                    slot.1[[u - 1, c]] = v;
                }
                _ => return Err(bad()),
            }
        }
        Ok(out)
    }

    fn run(&self, paths: &[PathSample]) -> Result<Vec<(Option<f64>, Array2<f64>)>> {
        fs::create_dir_all(&self.work_dir)?;
        let req = self.work_dir.join("request.csv");
        let resp = self.work_dir.join("response.csv");
        fs::write(&req, Self::write_request(paths))?;
        let _ = fs::remove_file(&resp);
        let status = Command::new(&self.command)
            .args(&self.args)
            .arg(&req)
            .arg(&resp)
            .status()
            .map_err(|e| FasError::External(format!("failed to run '{}': {e}", self.command)))?;
        if !status.success() {
            return Err(FasError::External(format!("'{}' exited with {status}", self.command)));
        }
        Self::parse_response(&fs::read_to_string(&resp)?, paths)
    }
}

impl EnergyModel for ExternalEnergy {
    fn energy(&self, path: &PathSample) -> Result<f64> {
        self.energy_and_gradient(path).map(|(e, _)| e)
    }

    fn gradient(&self, path: &PathSample) -> Result<Array2<f64>> {
        self.energy_and_gradient(path).map(|(_, g)| g)
    }

    fn energy_and_gradient(&self, path: &PathSample) -> Result<(f64, Array2<f64>)> {
        self.evaluate_batch(std::slice::from_ref(path)).pop().expect("one result")
    }

    fn evaluate_batch(&self, paths: &[PathSample]) -> Vec<Result<(f64, Array2<f64>)>> {
        match self.run(paths) {
            Ok(rows) => rows
                .into_iter()
                .enumerate()
                .map(|(p, (e, g))| {
                    let e = e.ok_or_else(|| FasError::External(format!("no energy returned for path {p}")))?;
                    if !e.is_finite() || g.iter().any(|v| !v.is_finite()) {
                        return Err(FasError::NonFinite(format!("external result for path {p}")));
                    }
                    Ok((e, g))
                })
                .collect(),
            Err(e) => {
                let msg = e.to_string();
                paths.iter().map(|_| Err(FasError::External(msg.clone()))).collect()
            }
        }
    }
}

/// Sum of weighted energies, e.g. a potential term plus IDPP regularization.
pub struct CompositeEnergy {
    pub terms: Vec<(f64, Box<dyn EnergyModel>)>,
}

impl EnergyModel for CompositeEnergy {
    fn energy(&self, path: &PathSample) -> Result<f64> {
        self.terms.iter().map(|(w, e)| e.energy(path).map(|v| w * v)).sum()
    }

    fn gradient(&self, path: &PathSample) -> Result<Array2<f64>> {
        let mut g = Array2::zeros(path.interior.raw_dim());
        for (w, e) in &self.terms {
            g.scaled_add(*w, &e.gradient(path)?);
        }
        Ok(g)
    }

    fn evaluate_batch(&self, paths: &[PathSample]) -> Vec<Result<(f64, Array2<f64>)>> {
        let mut acc: Vec<Result<(f64, Array2<f64>)>> =
            paths.iter().map(|p| Ok((0.0, Array2::zeros(p.interior.raw_dim())))).collect();
        for (w, e) in &self.terms {
            for (slot, r) in acc.iter_mut().zip(e.evaluate_batch(paths)) {
                if let Ok((v, g)) = slot {
                    match r {
                        Ok((ev, eg)) => {
                            *v += w * ev;
                            g.scaled_add(*w, &eg);
                        }
                        Err(err) => *slot = Err(err),
                    }
                }
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// Rescale the whole flattened gradient.
    #[default]
    Global,
    /// Rescale each grid point's gradient separately.
    PerPoint,
}

/// Rescale `v` so its norm does not exceed `max_norm`.
pub fn clip_gradient(v: &mut Array2<f64>, max_norm: f64, mode: ClipMode) {
    match mode {
        ClipMode::Global => {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > max_norm {
                v.mapv_inplace(|x| x * (max_norm / n));
            }
        }
        ClipMode::PerPoint => {
            for mut row in v.outer_iter_mut() {
                let n = row.dot(&row).sqrt();
                if n > max_norm {
                    row.mapv_inplace(|x| x * (max_norm / n));
                }
            }
        }
    }
}

/// Which part of `D_x g` the clip applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipScope {
    /// The full terminal gradient, log-RND term included.
    #[default]
    Total,
    /// Only the energy gradient; the log-RND gradient is added unclipped.
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clip {
    pub max_norm: f64,
    pub mode: ClipMode,
    pub scope: ClipScope,
}

impl Clip {
    pub fn total(max_norm: f64) -> Self {
        Self {
            max_norm,
            mode: ClipMode::Global,
            scope: ClipScope::Total,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TerminalAdjoint {
    /// `g = U + log (d nu_T / d nu_inf)` at the terminal path.
    pub value: f64,
    /// Clipped `D_x g`, `K x d`.
    pub grad: Array2<f64>,
}

/// Terminal cost and clipped adjoint for one path, given its precomputed energy and gradient.
pub fn terminal_adjoint_from(
    energy: f64,
    energy_grad: Array2<f64>,
    path: &PathSample,
    reference: &ReferencePath,
    process: &ReferenceProcess,
    basis: &SineBasis,
    clip: Clip,
) -> Result<TerminalAdjoint> {
    let resid = &path.interior - &reference.path().interior;
    let coeffs = basis.dst(resid.view())?;
    let lr = process.log_rnd(&coeffs)?;
    let rnd_grad = basis.idst(&process.grad_log_rnd(&coeffs)?)?;
    let value = energy + lr;
    if !value.is_finite() || energy_grad.iter().chain(rnd_grad.iter()).any(|v| !v.is_finite()) {
        return Err(FasError::NonFinite("terminal adjoint".into()));
    }
    let grad = match clip.scope {
        ClipScope::Total => {
            let mut g = energy_grad + &rnd_grad;
            clip_gradient(&mut g, clip.max_norm, clip.mode);
            g
        }
        ClipScope::Energy => {
            let mut g = energy_grad;
            clip_gradient(&mut g, clip.max_norm, clip.mode);
            g + &rnd_grad
        }
    };
    Ok(TerminalAdjoint { value, grad })
}

pub fn terminal_adjoint(
    energy: &dyn EnergyModel,
    path: &PathSample,
    reference: &ReferencePath,
    process: &ReferenceProcess,
    basis: &SineBasis,
    clip: Clip,
) -> Result<TerminalAdjoint> {
    let (u, g) = energy.energy_and_gradient(path)?;
    terminal_adjoint_from(u, g, path, reference, process, basis, clip)
}

/// Largest central finite-difference mismatch relative to the gradient norm.
pub fn gradient_gate(energy: &dyn EnergyModel, path: &PathSample, step: f64) -> Result<f64> {
    let g = energy.gradient(path)?;
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut err = 0.0f64;
    let mut probe = path.clone();
    for i in 0..path.n_points() {
        for c in 0..path.channels() {
            let x = path.interior[[i, c]];
            let h = step * x.abs().max(1.0);
            probe.interior[[i, c]] = x + h;
            let up = energy.energy(&probe)?;
            probe.interior[[i, c]] = x - h;
            let dn = energy.energy(&probe)?;
            probe.interior[[i, c]] = x;
            err = err.max(((up - dn) / (2.0 * h) - g[[i, c]]).abs());
        }
    }
    Ok(if norm > 0.0 { err / norm } else { err })
}

/// Potential values at every grid point, endpoints included.
pub fn potential_profile(potential: &dyn Potential, path: &PathSample) -> Vec<f64> {
    path.full().outer_iter().map(|x| potential.value(x)).collect()
}
