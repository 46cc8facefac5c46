//! Path-ensemble metrics.

use nalgebra::{Matrix3, Vector3};
use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dynamics::PathSample;
use crate::energy::{EnergyModel, PhysParams, Potential, TpdSyntheticNll};
use crate::error::{FasError, Result};

/// Percentage of endpoints within `eps` of `target`.
pub fn thp(endpoints: &[Array1<f64>], target: &Array1<f64>, eps: f64) -> Result<f64> {
    if endpoints.is_empty() {
        return Err(FasError::EmptyBatch);
    }
    if !(eps > 0.0) {
        return Err(FasError::InvalidParameter(format!("threshold must be positive, got {eps}")));
    }
    let hits = endpoints
        .iter()
        .filter(|x| {
            let d = *x - target;
            d.dot(&d).sqrt() < eps
        })
        .count();
    Ok(100.0 * hits as f64 / endpoints.len() as f64)
}

/// Highest potential energy along the path, endpoints included.
pub fn ets(path: &PathSample, potential: &dyn Potential) -> Result<f64> {
    let mut top = f64::NEG_INFINITY;
    for x in path.full().outer_iter() {
        let v = potential.value(x);
        if !v.is_finite() {
            return Err(FasError::NonFinite("potential along path".into()));
        }
        top = top.max(v);
    }
    Ok(top)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Llk {
    pub total: f64,
    pub per_transition: f64,
}

/// Log-density of the path under the discrete Langevin transition chain.
pub fn llk(path: &PathSample, phys: &PhysParams, potential: std::sync::Arc<dyn Potential>) -> Result<Llk> {
    let nll = TpdSyntheticNll::new(*phys, potential)?;
    let quad = nll.energy(path)?;
    let transitions = path.n_points() + 1;
    let d = path.channels() as f64;
    let var = 2.0 * phys.kbt * phys.delta_u / phys.gamma_m;
    let norm = -0.5 * d * (2.0 * std::f64::consts::PI * var).ln();
    let total = norm * transitions as f64 - quad;
    Ok(Llk {
        total,
        per_transition: total / transitions as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kabsch {
    pub rmsd: f64,
    /// Set when the first configuration is (nearly) collinear and the rotation is not unique.
    pub degenerate: bool,
    pub rotation: Matrix3<f64>,
}

fn centered(x: ArrayView2<'_, f64>) -> Vec<Vector3<f64>> {
    let n = x.nrows() as f64;
    let mut c = Vector3::zeros();
    for r in x.outer_iter() {
        c += Vector3::new(r[0], r[1], r[2]);
    }
    c /= n;
    x.outer_iter().map(|r| Vector3::new(r[0], r[1], r[2]) - c).collect()
}

/// RMSD between `p` and `q` (both `N x 3`) after optimal rigid alignment of `p` onto `q`.
pub fn kabsch_rmsd(p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> Result<Kabsch> {
    if p.dim() != q.dim() || p.ncols() != 3 {
        return Err(FasError::shape("matching N x 3 configurations", format!("{:?} and {:?}", p.dim(), q.dim())));
    }
    if p.nrows() == 0 {
        return Err(FasError::EmptyBatch);
    }
    let pc = centered(p);
    let qc = centered(q);
    let mut h = Matrix3::zeros();
    for (a, b) in pc.iter().zip(&qc) {
        h += a * b.transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let v = vt.transpose();
    let sign = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if sign == 0.0 { 1.0 } else { sign }));
    let rotation = v * fix * u.transpose();

    let mut spread = Matrix3::zeros();
    for a in &pc {
        spread += a * a.transpose();
    }
    let mut ev: Vec<f64> = spread.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let degenerate = p.nrows() < 3 || ev[1] <= 1e-10 * ev[0].max(f64::MIN_POSITIVE);

    let sq: f64 = pc.iter().zip(&qc).map(|(a, b)| (rotation * a - b).norm_squared()).sum();
    Ok(Kabsch {
        rmsd: (sq / p.nrows() as f64).sqrt(),
        degenerate,
        rotation,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Summary of a path ensemble. Potential-based entries are absent when no potential applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub thp: f64,
    pub ets_mean: Option<f64>,
    pub ets_std: Option<f64>,
    pub llk_mean: Option<f64>,
    pub llk_std: Option<f64>,
    pub llk_per_transition_mean: Option<f64>,
    /// Mean Kabsch RMSD of each path's last interior image to the target, for 3-D atom configurations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmsd_mean: Option<f64>,
    pub n_paths: usize,
    pub config_hash: String,
}

/// 64-bit FNV-1a of a configuration string, hex encoded.
pub fn config_hash(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// THP, and ETS, LLK and RMSD where they apply, over paths meant to end at `target`.
pub fn evaluate_paths(
    paths: &[PathSample],
    potential: Option<std::sync::Arc<dyn Potential>>,
    phys: &PhysParams,
    target: &Array1<f64>,
    eps: f64,
    config_text: &str,
) -> Result<MetricsReport> {
    if paths.is_empty() {
        return Err(FasError::EmptyBatch);
    }
    let ends: Vec<Array1<f64>> = paths.iter().map(|p| p.end.clone()).collect();
    let mut rep = MetricsReport {
        thp: thp(&ends, target, eps)?,
        ets_mean: None,
        ets_std: None,
        llk_mean: None,
        llk_std: None,
        llk_per_transition_mean: None,
        rmsd_mean: None,
        n_paths: paths.len(),
        config_hash: config_hash(config_text),
    };
    if let Some(pot) = potential.filter(|p| p.dim() == target.len()) {
        let e: Vec<f64> = paths.iter().map(|p| ets(p, pot.as_ref())).collect::<Result<_>>()?;
        let l: Vec<Llk> = paths.iter().map(|p| llk(p, phys, pot.clone())).collect::<Result<_>>()?;
        let (m, s) = mean_std(&e);
        rep.ets_mean = Some(m);
        rep.ets_std = Some(s);
        let (m, s) = mean_std(&l.iter().map(|x| x.total).collect::<Vec<_>>());
        rep.llk_mean = Some(m);
        rep.llk_std = Some(s);
        rep.llk_per_transition_mean = Some(mean_std(&l.iter().map(|x| x.per_transition).collect::<Vec<_>>()).0);
    }
    let d = target.len();
    if d % 3 == 0 && d >= 9 {
        let n = d / 3;
        let goal = target.view().into_shape_with_order((n, 3)).expect("length checked");
        let r: Vec<f64> = paths
            .iter()
            .map(|p| {
                let last = p.interior.row(p.n_points() - 1).to_owned();
                let last = last.into_shape_with_order((n, 3)).expect("length checked");
                kabsch_rmsd(last.view(), goal).map(|k| k.rmsd)
            })
            .collect::<Result<_>>()?;
        rep.rmsd_mean = Some(mean_std(&r).0);
    }
    Ok(rep)
}
