use rayon::prelude::*;
use serde::Serialize;

use super::HolonomyError;
use crate::geometry::{ChartMetric, TangentVec};
use crate::transport::{parallel_transport, CurveSpec};

#[derive(Clone, Debug, Serialize)]
pub struct ParallelField {
    /// Field values at the grid nodes (first path ordering).
    pub nodes: Vec<TangentVec>,
    /// Max over nodes of `‖V₁ - V₂‖∞ / ‖w‖∞` for the two path orderings.
    pub path_independence_residual: f64,
    pub resolution: usize,
}

/// Axis-ordered polyline from `from` to `to`, moving one coordinate at a time.
fn staircase(from: &[f64], to: &[f64], order: impl Iterator<Item = usize>) -> CurveSpec {
    let mut pts = vec![from.to_vec()];
    let mut cur = from.to_vec();
    for i in order {
        if cur[i] != to[i] {
            cur[i] = to[i];
            pts.push(cur.clone());
        }
    }
    if pts.len() == 1 {
        pts.push(cur);
    }
    CurveSpec::Polyline(pts)
}

/// Transport `w` from its base point to every node of a `resolution`ⁿ grid on
/// the working box along two staircase paths (axes ascending, and
/// descending). Agreement of the two certifies a numerically parallel field.
pub fn parallel_field_extend(
    g: &ChartMetric,
    w: &TangentVec,
    resolution: usize,
) -> Result<ParallelField, HolonomyError> {
    let n = g.dim();
    let res = resolution.max(2);
    if !g.in_domain(&w.base) {
        return Err(HolonomyError::BaseOutsideDomain(w.base.clone()));
    }
    let bx = g.working_box();
    let total = res.pow(n as u32);
    let node = |mut idx: usize| -> Vec<f64> {
        let mut p = vec![0.0; n];
        for (i, x) in p.iter_mut().enumerate() {
            let k = idx % res;
            idx /= res;
            *x = bx[i].lo + bx[i].width() * k as f64 / (res - 1) as f64;
        }
        p
    };
    let wv = w.to_dvector();
    let scale = wv.amax().max(f64::MIN_POSITIVE);
    let results: Vec<Result<(TangentVec, f64), HolonomyError>> = (0..total)
        .into_par_iter()
        .map(|k| {
            let p = node(k);
            let a = parallel_transport(g, &staircase(&w.base, &p, 0..n))?;
            let b = parallel_transport(g, &staircase(&w.base, &p, (0..n).rev()))?;
            let va = &a.matrix * &wv;
            let vb = &b.matrix * &wv;
            Ok((TangentVec::from_dvector(&p, &va), (va - vb).amax() / scale))
        })
        .collect();
    let mut nodes = Vec::with_capacity(total);
    let mut residual: f64 = 0.0;
    for r in results {
        let (v, d) = r?;
        nodes.push(v);
        residual = residual.max(d);
    }
    Ok(ParallelField {
        nodes,
        path_independence_residual: residual,
        resolution: res,
    })
}
