//! The learned control field `u(X, t)`.
//!
//! A flat spectral operator stack: a pointwise lift of path values plus
//! sinusoidal grid features, `n_layers` residual blocks that mix the lowest
//! `n_modes` sine modes alongside a pointwise affine path, and a zero
//! initialized pointwise projection back to `d` channels. Time enters only
//! through a feature-wise scale and shift produced by a small MLP on a
//! sinusoidal embedding of `t`.
//!
//! Batched tensors use the layout `(K, B, C)`: grid point major, then sample,
//! then channel. Flattened to `(K * B, C)` this feeds pointwise matrix
//! products; flattened to `(K, B * C)` it feeds the sine transform.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FasError, Result};
use crate::measures::ReferenceProcess;
use crate::spectral::{basis_rows, Grid, SineBasis};

pub const PARAMS_VERSION: u32 = 1;
const CHECKPOINT_MAGIC: &[u8; 4] = b"FASC";
/// Number of sinusoidal grid features appended to the path values.
const GRID_FEATURES: usize = 4;
/// Diffusion time is stretched by this factor before the sinusoidal embedding.
const TIME_SCALE: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlArch {
    pub n_layers: usize,
    pub n_modes: usize,
    pub width: usize,
    pub embed_dim: usize,
    /// Path dimension `d`.
    pub channels: usize,
}

impl Default for ControlArch {
    fn default() -> Self {
        Self {
            n_layers: 2,
            n_modes: 8,
            width: 32,
            embed_dim: 128,
            channels: 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Span {
    start: usize,
    rows: usize,
    cols: usize,
}

impl Span {
    fn len(&self) -> usize {
        self.rows * self.cols
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len()
    }
}

#[derive(Debug, Clone)]
struct Layout {
    w_in: Span,
    b_in: Span,
    t_w1: Span,
    t_b1: Span,
    t_w2: Span,
    t_b2: Span,
    // per layer: spectral weights (M * C rows of C), pointwise weight, bias
    blocks: Vec<(Span, Span, Span)>,
    w_out: Span,
    b_out: Span,
    total: usize,
}

impl Layout {
    fn new(a: &ControlArch) -> Self {
        let mut at = 0;
        let mut take = |rows: usize, cols: usize| {
            let sp = Span { start: at, rows, cols };
            at += rows * cols;
            sp
        };
        let (c, e, f) = (a.width, a.embed_dim, a.channels + GRID_FEATURES);
        let w_in = take(f, c);
        let b_in = take(1, c);
        let t_w1 = take(e, e);
        let t_b1 = take(1, e);
        let t_w2 = take(e, 2 * c * a.n_layers);
        let t_b2 = take(1, 2 * c * a.n_layers);
        let blocks = (0..a.n_layers).map(|_| (take(a.n_modes * c, c), take(c, c), take(1, c))).collect();
        let w_out = take(c, a.channels);
        let b_out = take(1, a.channels);
        Self {
            w_in,
            b_in,
            t_w1,
            t_b1,
            t_w2,
            t_b2,
            blocks,
            w_out,
            b_out,
            total: at,
        }
    }
}

impl ControlArch {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.n_modes == 0 || self.width == 0 || self.channels == 0 {
            return Err(FasError::InvalidParameter(format!("architecture sizes must be positive: {self:?}")));
        }
        if self.embed_dim < 2 || self.embed_dim % 2 != 0 {
            return Err(FasError::InvalidParameter(format!(
                "embed_dim must be even and at least 2, got {}",
                self.embed_dim
            )));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        Layout::new(self).total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub arch: ControlArch,
    pub theta: Vec<f64>,
    pub version: u32,
}

impl ControlParams {
    /// Fan-in uniform initialization, with the output projection set to zero so
    /// the initial control vanishes identically.
    pub fn init(arch: ControlArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::new(&arch);
        let mut theta = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |sp: Span, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in &mut theta[sp.range()] {
                *v = rng.random_range(-bound..bound);
            }
        };
        fill(layout.w_in, layout.w_in.rows);
        fill(layout.t_w1, arch.embed_dim);
        fill(layout.t_w2, arch.embed_dim);
        for &(r, w, _) in &layout.blocks {
            fill(r, arch.width);
            fill(w, arch.width);
        }
        Ok(Self {
            arch,
            theta,
            version: PARAMS_VERSION,
        })
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn check(&self) -> Result<()> {
        self.arch.validate()?;
        if self.theta.len() != self.arch.n_params() {
            return Err(FasError::shape(format!("{} parameters", self.arch.n_params()), self.theta.len()));
        }
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(FasError::NonFinite("control parameters".into()));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row-major copy when needed; degenerate shapes let `dot` return column-major output.
fn c_order<D: ndarray::Dimension>(a: ndarray::Array<f64, D>) -> ndarray::Array<f64, D> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_prime(x: f64) -> f64 {
    let sg = sigmoid(x);
    sg * (1.0 + x * (1.0 - sg))
}

/// Sinusoidal embedding of each time in `ts`, shape `(B, E)`.
pub fn time_embedding(ts: &[f64], embed_dim: usize) -> Array2<f64> {
    let half = embed_dim / 2;
    let mut out = Array2::zeros((ts.len(), embed_dim));
    for (b, &t) in ts.iter().enumerate() {
        for j in 0..half {
            let freq = (-(10000f64).ln() * j as f64 / half as f64).exp();
            let arg = TIME_SCALE * t * freq;
            out[[b, j]] = arg.sin();
            out[[b, half + j]] = arg.cos();
        }
    }
    out
}

/// Read-only evaluation of the control on anything that can act as a field.
pub trait ControlField: Sync {
    /// Path dimension `d` expected in the input.
    fn channels(&self) -> usize;
    /// `x` is `(K, B, d)`; returns `u` with the same shape.
    fn eval(&self, x: ArrayView3<'_, f64>, ts: &[f64]) -> Result<Array3<f64>>;
}

/// The identically zero control.
#[derive(Debug, Clone, Copy)]
pub struct ZeroControl {
    pub channels: usize,
}

impl ControlField for ZeroControl {
    fn channels(&self) -> usize {
        self.channels
    }

    fn eval(&self, x: ArrayView3<'_, f64>, _ts: &[f64]) -> Result<Array3<f64>> {
        Ok(Array3::zeros(x.raw_dim()))
    }
}

struct Tape {
    feats: Array2<f64>,
    emb: Array2<f64>,
    zpre: Array2<f64>,
    z: Array2<f64>,
    modv: Array2<f64>,
    hs: Vec<Array2<f64>>,
    coefs: Vec<Array3<f64>>,
    acts: Vec<Array2<f64>>,
    pres: Vec<Array2<f64>>,
}

/// Control parameters bound to a grid.
#[derive(Debug, Clone)]
pub struct SpectralControl {
    params: ControlParams,
    layout: Layout,
    grid: Grid,
    modes: Array2<f64>,
    grid_feats: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Plain grid residual `u + Y`.
    #[default]
    Unweighted,
    /// Residual mapped to modes and scaled by `sigma_t sqrt(w_k) e^{-(T-t) lambda_k}`.
    CtWeighted,
}

impl SpectralControl {
    pub fn new(params: ControlParams, grid: &Grid) -> Result<Self> {
        params.check()?;
        let k = grid.n_points();
        if params.arch.n_modes > k {
            return Err(FasError::InvalidParameter(format!(
                "n_modes {} exceeds grid size {k}",
                params.arch.n_modes
            )));
        }
        let unit = grid.unit_points();
        let grid_feats = Array2::from_shape_fn((k, GRID_FEATURES), |(i, j)| {
            let v = unit[i];
            match j {
                0 => (PI * v).sin(),
                1 => (PI * v).cos(),
                2 => (2.0 * PI * v).sin(),
                _ => (2.0 * PI * v).cos(),
            }
        });
        Ok(Self {
            layout: Layout::new(&params.arch),
            modes: basis_rows(k, params.arch.n_modes),
            params,
            grid: *grid,
            grid_feats,
        })
    }

    pub fn params(&self) -> &ControlParams {
        &self.params
    }

    pub fn into_params(self) -> ControlParams {
        self.params
    }

    pub fn arch(&self) -> &ControlArch {
        &self.params.arch
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Same parameters on another grid.
    pub fn rebind(&self, grid: &Grid) -> Result<Self> {
        Self::new(self.params.clone(), grid)
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.params.theta.len() {
            return Err(FasError::shape(self.params.theta.len(), theta.len()));
        }
        self.params.theta.copy_from_slice(theta);
        Ok(())
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.params.theta
    }

    fn mat(&self, sp: Span) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((sp.rows, sp.cols), &self.params.theta[sp.range()]).expect("layout")
    }

    fn row(&self, sp: Span) -> ndarray::ArrayView1<'_, f64> {
        ndarray::ArrayView1::from(&self.params.theta[sp.range()])
    }

    fn check_input(&self, x: &ArrayView3<'_, f64>, ts: &[f64]) -> Result<()> {
        let (k, b, d) = x.dim();
        if k != self.grid.n_points() || d != self.params.arch.channels {
            return Err(FasError::shape(
                format!("({}, B, {})", self.grid.n_points(), self.params.arch.channels),
                format!("({k}, {b}, {d})"),
            ));
        }
        if ts.len() != b {
            return Err(FasError::shape(format!("{b} times"), ts.len()));
        }
        if b == 0 {
            return Err(FasError::EmptyBatch);
        }
        if x.iter().any(|v| !v.is_finite()) || ts.iter().any(|v| !v.is_finite()) {
            return Err(FasError::NonFinite("control input".into()));
        }
        Ok(())
    }

    fn run(&self, x: ArrayView3<'_, f64>, ts: &[f64], keep: bool) -> (Array2<f64>, Option<Tape>) {
        let a = &self.params.arch;
        let (k, b, d) = x.dim();
        let (c, m) = (a.width, a.n_modes);
        let f = d + GRID_FEATURES;

        let mut feats = Array2::zeros((k * b, f));
        for i in 0..k {
            for j in 0..b {
                let mut r = feats.row_mut(i * b + j);
                for ch in 0..d {
                    r[ch] = x[[i, j, ch]];
                }
                for g in 0..GRID_FEATURES {
                    r[d + g] = self.grid_feats[[i, g]];
                }
            }
        }

        let emb = time_embedding(ts, a.embed_dim);
        let zpre = emb.dot(&self.mat(self.layout.t_w1)) + &self.row(self.layout.t_b1);
        let z = zpre.mapv(silu);
        let modv = z.dot(&self.mat(self.layout.t_w2)) + &self.row(self.layout.t_b2);

        let mut h = c_order(feats.dot(&self.mat(self.layout.w_in)) + &self.row(self.layout.b_in));
        let mut tape = keep.then(|| Tape {
            feats: Array2::zeros((0, 0)),
            emb: Array2::zeros((0, 0)),
            zpre: Array2::zeros((0, 0)),
            z: Array2::zeros((0, 0)),
            modv: Array2::zeros((0, 0)),
            hs: Vec::new(),
            coefs: Vec::new(),
            acts: Vec::new(),
            pres: Vec::new(),
        });

        for (l, &(r_sp, w_sp, b_sp)) in self.layout.blocks.iter().enumerate() {
            let h2 = h.view().into_shape_with_order((k, b * c)).expect("contiguous");
            let coef = c_order(self.modes.dot(&h2)).into_shape_with_order((m, b, c)).expect("contiguous");
            let rw = self.mat(r_sp);
            let mut mixed = Array3::<f64>::zeros((m, b, c));
            for mode in 0..m {
                let rm = rw.slice(s![mode * c..(mode + 1) * c, ..]);
                mixed.index_axis_mut(Axis(0), mode).assign(&coef.index_axis(Axis(0), mode).dot(&rm));
            }
            let mixed2 = mixed.into_shape_with_order((m, b * c)).expect("contiguous");
            let spectral = c_order(self.modes.t().dot(&mixed2)).into_shape_with_order((k * b, c)).expect("contiguous");
            let act = c_order(spectral + h.dot(&self.mat(w_sp)) + &self.row(b_sp));

            let scale = modv.slice(s![.., 2 * c * l..2 * c * l + c]);
            let shift = modv.slice(s![.., 2 * c * l + c..2 * c * (l + 1)]);
            let mut pre = act.clone();
            {
                let mut pre3 = pre.view_mut().into_shape_with_order((k, b, c)).expect("contiguous");
                for mut plane in pre3.outer_iter_mut() {
                    Zip::from(&mut plane).and(&scale).and(&shift).for_each(|p, &sc, &sh| {
                        *p = *p * (1.0 + sc) + sh;
                    });
                }
            }
            let next = c_order(&h + &pre.mapv(silu));
            if let Some(tp) = tape.as_mut() {
                tp.hs.push(h);
                tp.coefs.push(coef);
                tp.acts.push(act);
                tp.pres.push(pre);
            }
            h = next;
        }

        let y = c_order(h.dot(&self.mat(self.layout.w_out)) + &self.row(self.layout.b_out));
        if let Some(tp) = tape.as_mut() {
            tp.hs.push(h);
            tp.feats = feats;
            tp.emb = emb;
            tp.zpre = zpre;
            tp.z = z;
            tp.modv = modv;
        }
        (y, tape)
    }

    /// Evaluate on a batch laid out `(K, B, d)`.
    pub fn forward_batch(&self, x: ArrayView3<'_, f64>, ts: &[f64]) -> Result<Array3<f64>> {
        self.check_input(&x, ts)?;
        let (k, b, d) = x.dim();
        let (y, _) = self.run(x, ts, false);
        let out = y.into_shape_with_order((k, b, d)).expect("contiguous");
        if out.iter().any(|v| !v.is_finite()) {
            return Err(FasError::NonFinite("control output".into()));
        }
        Ok(out)
    }

    /// Evaluate on a single path interior (`K x d`).
    pub fn forward(&self, x: ArrayView2<'_, f64>, t: f64) -> Result<Array2<f64>> {
        let (k, d) = x.dim();
        let x3 = x.to_owned().into_shape_with_order((k, 1, d)).expect("contiguous");
        let y = self.forward_batch(x3.view(), &[t])?;
        Ok(y.into_shape_with_order((k, d)).expect("contiguous"))
    }

    /// Reverse pass: accumulates `dL/dtheta` given `dL/dy` with `y` laid out `(K * B, d)`.
    fn backward(&self, tape: &Tape, gy: ArrayView2<'_, f64>, b: usize) -> Vec<f64> {
        let a = &self.params.arch;
        let k = self.grid.n_points();
        let (c, m) = (a.width, a.n_modes);
        let mut grad = vec![0.0; self.layout.total];
        let put = |grad: &mut [f64], sp: Span, g: ArrayView2<'_, f64>| {
            for (dst, src) in grad[sp.range()].iter_mut().zip(g.iter()) {
                *dst += *src;
            }
        };
        let put_row = |grad: &mut [f64], sp: Span, g: Array1<f64>| {
            for (dst, src) in grad[sp.range()].iter_mut().zip(g.iter()) {
                *dst += *src;
            }
        };

        let h_last = tape.hs.last().expect("tape");
        put(&mut grad, self.layout.w_out, h_last.t().dot(&gy).view());
        put_row(&mut grad, self.layout.b_out, gy.sum_axis(Axis(0)));
        let mut gh = c_order(gy.dot(&self.mat(self.layout.w_out).t()));
        let mut gmod = Array2::<f64>::zeros(tape.modv.raw_dim());

        for l in (0..a.n_layers).rev() {
            let (r_sp, w_sp, b_sp) = self.layout.blocks[l];
            let pre = &tape.pres[l];
            let act = &tape.acts[l];
            let h = &tape.hs[l];
            let scale = tape.modv.slice(s![.., 2 * c * l..2 * c * l + c]);

            let mut gpre = c_order(gh.clone());
            Zip::from(&mut gpre).and(pre).for_each(|g, &p| *g *= silu_prime(p));

            let mut ga = gpre.clone();
            {
                let gpre3 = gpre.view().into_shape_with_order((k, b, c)).expect("contiguous");
                let act3 = act.view().into_shape_with_order((k, b, c)).expect("contiguous");
                let mut gs = gmod.slice_mut(s![.., 2 * c * l..2 * c * (l + 1)]);
                for i in 0..k {
                    let gp = gpre3.index_axis(Axis(0), i);
                    let ac = act3.index_axis(Axis(0), i);
                    Zip::from(gs.slice_mut(s![.., ..c])).and(&gp).and(&ac).for_each(|g, &p, &v| *g += p * v);
                    Zip::from(gs.slice_mut(s![.., c..])).and(&gp).for_each(|g, &p| *g += p);
                }
                let mut ga3 = ga.view_mut().into_shape_with_order((k, b, c)).expect("contiguous");
                for mut plane in ga3.outer_iter_mut() {
                    Zip::from(&mut plane).and(&scale).for_each(|g, &sc| *g *= 1.0 + sc);
                }
            }

            put_row(&mut grad, b_sp, ga.sum_axis(Axis(0)));
            put(&mut grad, w_sp, h.t().dot(&ga).view());
            let mut gh_next = c_order(gh + ga.dot(&self.mat(w_sp).t()));

            let ga2 = ga.view().into_shape_with_order((k, b * c)).expect("contiguous");
            let gmix = c_order(self.modes.dot(&ga2)).into_shape_with_order((m, b, c)).expect("contiguous");
            let coef = &tape.coefs[l];
            let rw = self.mat(r_sp);
            let mut gr = Array2::<f64>::zeros((m * c, c));
            let mut gcoef = Array3::<f64>::zeros((m, b, c));
            for mode in 0..m {
                let rm = rw.slice(s![mode * c..(mode + 1) * c, ..]);
                let gm = gmix.index_axis(Axis(0), mode);
                gr.slice_mut(s![mode * c..(mode + 1) * c, ..])
                    .assign(&coef.index_axis(Axis(0), mode).t().dot(&gm));
                gcoef.index_axis_mut(Axis(0), mode).assign(&gm.dot(&rm.t()));
            }
            put(&mut grad, r_sp, gr.view());
            let gcoef2 = gcoef.into_shape_with_order((m, b * c)).expect("contiguous");
            gh_next += &c_order(self.modes.t().dot(&gcoef2)).into_shape_with_order((k * b, c)).expect("contiguous");
            gh = gh_next;
        }

        put(&mut grad, self.layout.w_in, tape.feats.t().dot(&gh).view());
        put_row(&mut grad, self.layout.b_in, gh.sum_axis(Axis(0)));

        put(&mut grad, self.layout.t_w2, tape.z.t().dot(&gmod).view());
        put_row(&mut grad, self.layout.t_b2, gmod.sum_axis(Axis(0)));
        let mut gz = gmod.dot(&self.mat(self.layout.t_w2).t());
        Zip::from(&mut gz).and(&tape.zpre).for_each(|g, &p| *g *= silu_prime(p));
        put(&mut grad, self.layout.t_w1, tape.emb.t().dot(&gz).view());
        put_row(&mut grad, self.layout.t_b1, gz.sum_axis(Axis(0)));
        grad
    }

    /// Matching loss `mean_b 0.5 * sum_i |u(X_t, t) + Y|^2 du` and its exact gradient.
    ///
    /// `x` and `y_target` are `(K, B, d)`; `ts` has one time per sample.
    pub fn loss_and_grad(
        &self,
        x: ArrayView3<'_, f64>,
        ts: &[f64],
        y_target: ArrayView3<'_, f64>,
        weighting: Weighting,
        process: &ReferenceProcess,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_input(&x, ts)?;
        if y_target.dim() != x.dim() {
            return Err(FasError::shape(format!("{:?}", x.dim()), format!("{:?}", y_target.dim())));
        }
        let (k, b, d) = x.dim();
        let du = self.grid.spacing();
        let (y, tape) = self.run(x, ts, true);
        let tape = tape.expect("tape requested");
        let y3 = y.into_shape_with_order((k, b, d)).expect("contiguous");
        let resid = c_order(&y3 + &y_target);

        let (loss, gy) = match weighting {
            Weighting::Unweighted => {
                let loss = 0.5 * du * resid.iter().map(|v| v * v).sum::<f64>() / b as f64;
                (loss, resid.mapv(|v| v * du / b as f64))
            }
            Weighting::CtWeighted => {
                if process.n_modes() != k {
                    return Err(FasError::shape(format!("{k} modes"), process.n_modes()));
                }
                let basis = SineBasis::new(self.grid);
                let r2 = resid.view().into_shape_with_order((k, b * d)).expect("contiguous");
                let rho = basis.transform_columns(r2)?;
                let mut w2 = Array2::<f64>::zeros((k, b));
                let eig = process.eig();
                for (j, &t) in ts.iter().enumerate() {
                    let sig = process.sigma_at(t)?;
                    for mode in 0..k {
                        let cw = sig * eig.q_weight(mode).sqrt() * (-(process.horizon() - t) * eig.lambda(mode)).exp();
                        w2[[mode, j]] = cw * cw;
                    }
                }
                let mut loss = 0.0;
                let mut scaled = rho.clone();
                for mode in 0..k {
                    for j in 0..b {
                        for ch in 0..d {
                            let v = rho[[mode, j * d + ch]];
                            loss += 0.5 * du * w2[[mode, j]] * v * v;
                            scaled[[mode, j * d + ch]] = w2[[mode, j]] * v * du / b as f64;
                        }
                    }
                }
                let g = basis.transform_columns(scaled.view())?;
                (loss / b as f64, g.into_shape_with_order((k, b, d)).expect("contiguous"))
            }
        };
        if !loss.is_finite() {
            return Err(FasError::NonFinite("matching loss".into()));
        }
        let gy2 = c_order(gy).into_shape_with_order((k * b, d)).expect("contiguous");
        let grad = self.backward(&tape, gy2.view(), b);
        Ok((loss, grad))
    }
}

impl ControlField for SpectralControl {
    fn channels(&self) -> usize {
        self.params.arch.channels
    }

    fn eval(&self, x: ArrayView3<'_, f64>, ts: &[f64]) -> Result<Array3<f64>> {
        self.forward_batch(x, ts)
    }
}

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
    skipped: u64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            steps: 0,
            skipped: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Returns `Ok(false)` and leaves everything untouched when `grad` is not finite.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<bool> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(FasError::shape(self.m.len(), format!("{} / {}", params.len(), grad.len())));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            self.skipped += 1;
            return Ok(false);
        }
        self.steps += 1;
        let bc1 = 1.0 - self.beta1.powi(self.steps as i32);
        let bc2 = 1.0 - self.beta2.powi(self.steps as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub arch: ControlArch,
    pub n_params: usize,
    pub seed: u64,
    pub epoch: usize,
    /// Free-form run configuration (schedule, eigensystem, grid).
    pub config: serde_json::Value,
}

/// Binary checkpoint: magic, u32 version, u64 header length, JSON header, LE f64 parameters.
pub fn save_checkpoint(path: &Path, header: &CheckpointHeader, params: &ControlParams) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + params.theta.len() * 8);
    write_checkpoint(&mut buf, header, params)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_checkpoint<W: Write>(w: &mut W, header: &CheckpointHeader, params: &ControlParams) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for v in &params.theta {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, ControlParams)> {
    let bytes = fs::read(path)?;
    read_checkpoint(&mut bytes.as_slice())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<(CheckpointHeader, ControlParams)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(FasError::Format("not a checkpoint file".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != PARAMS_VERSION {
        return Err(FasError::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json)?;
    if header.arch.n_params() != header.n_params {
        return Err(FasError::Format("parameter count does not match architecture".into()));
    }
    let mut theta = vec![0.0; header.n_params];
    let mut cell = [0u8; 8];
    for v in theta.iter_mut() {
        r.read_exact(&mut cell)?;
        *v = f64::from_le_bytes(cell);
    }
    let params = ControlParams {
        arch: header.arch,
        theta,
        version,
    };
    params.check()?;
    Ok((header, params))
}
