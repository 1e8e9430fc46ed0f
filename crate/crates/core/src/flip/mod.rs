//! The flip Riemannian metric `g_R = g + 2 g(·,V) g(·,V)` of a unit timelike
//! parallel field, and null sectional curvature.

mod nullsec;

pub use nullsec::{
    null_sectional_curvature, null_sectional_normalized, pointwise_nullsec_check,
    random_degenerate_plane, DegeneratePlane, PointwiseReport,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::expr::Expr;
use crate::geometry::{inner, ChartMetric, Christoffel, GeometryError, MetricField, TangentVec};
use crate::holonomy::{parallel_field_extend, HolonomyError};
use crate::tolerances::{FLIP_FD_STEP, PARALLEL_RESIDUAL, UNIT_TIMELIKE};
use crate::transport::{parallel_transport, CurveSpec, TransportError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlipError {
    #[error("V is not unit timelike: g(V,V) = {norm}")]
    NotUnitTimelike { norm: f64 },
    #[error("V is not parallel: path-independence residual {residual:.3e}")]
    NotParallel { residual: f64 },
    #[error("field expressions: expected {expected} components, got {got}")]
    FieldDimension { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Holonomy(#[from] HolonomyError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("plane is not degenerate: {0}")]
    NotDegenerate(String),
    #[error("g(v,v) = {0:.3e} is too small")]
    DegenerateV(f64),
    #[error("U is not timelike: g(U,U) = {0}")]
    NotTimelike(f64),
}

/// Where the flip field's values come from.
#[derive(Clone, Debug)]
pub enum FlipField {
    /// Parallel transport of `w` from its base point along the ascending
    /// staircase path. Values at finite-difference stencil points next to `p`
    /// are transported from `p` along the short stencil segment.
    Parallel(TangentVec),
    /// Closed-form components (one expression per coordinate).
    Expressions(Vec<Expr>),
}

/// `g_R`, evaluated pointwise.
#[derive(Clone, Debug)]
pub struct FlipMetric {
    pub g: ChartMetric,
    pub field: FlipField,
    pub fd_step: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlipChecks {
    /// Smallest eigenvalue of `g_R` over the samples (positive ⇔ Riemannian).
    pub min_eigenvalue: f64,
    /// `max |g_R(V,V) - 1|`.
    pub unit_defect: f64,
    /// `max |g_R(X,Y) - g(X,Y)|` for `X, Y ⊥ V`.
    pub orthogonal_defect: f64,
    pub path_independence_residual: f64,
}

fn lorentz_to_flip(g: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let gv = g * v;
    g + (&gv * gv.transpose()) * 2.0
}

/// Build the flip metric of the parallel extension of `w`, after checking
/// that `w` is unit timelike and that its extension is path independent on a
/// `resolution`ⁿ grid.
pub fn flip_metric(g: &ChartMetric, w: &TangentVec, resolution: usize) -> Result<(FlipMetric, f64), FlipError> {
    let gm = g.metric_at(&w.base)?;
    let norm = inner(&gm, &w.comp, &w.comp);
    if (norm + 1.0).abs() > UNIT_TIMELIKE {
        return Err(FlipError::NotUnitTimelike { norm });
    }
    let field = parallel_field_extend(g, w, resolution)?;
    let residual = field.path_independence_residual;
    if !(residual < PARALLEL_RESIDUAL) {
        return Err(FlipError::NotParallel { residual });
    }
    Ok((
        FlipMetric {
            g: g.clone(),
            field: FlipField::Parallel(w.clone()),
            fd_step: FLIP_FD_STEP,
        },
        residual,
    ))
}

impl FlipMetric {
    /// Flip metric of an arbitrary field given in closed form; no parallelism
    /// check (used for negative controls).
    pub fn from_expressions(g: &ChartMetric, exprs: Vec<Expr>) -> Result<FlipMetric, FlipError> {
        if exprs.len() != g.dim() {
            return Err(FlipError::FieldDimension {
                expected: g.dim(),
                got: exprs.len(),
            });
        }
        Ok(FlipMetric {
            g: g.clone(),
            field: FlipField::Expressions(exprs),
            fd_step: FLIP_FD_STEP,
        })
    }

    pub fn field_at(&self, p: &[f64]) -> Result<DVector<f64>, FlipError> {
        match &self.field {
            FlipField::Parallel(w) => {
                let n = p.len();
                let mut pts = vec![w.base.clone()];
                let mut cur = w.base.clone();
                for i in 0..n {
                    if cur[i] != p[i] {
                        cur[i] = p[i];
                        pts.push(cur.clone());
                    }
                }
                if pts.len() == 1 {
                    return Ok(w.to_dvector());
                }
                let t = parallel_transport(&self.g, &CurveSpec::Polyline(pts))?;
                Ok(t.matrix * w.to_dvector())
            }
            FlipField::Expressions(exprs) => {
                let mut v = DVector::zeros(exprs.len());
                for (i, e) in exprs.iter().enumerate() {
                    v[i] = e
                        .eval(p)
                        .map_err(|source| GeometryError::Orientation { index: i, source })?;
                }
                Ok(v)
            }
        }
    }

    /// Field at `q` next to `p`, given the value `vp` at `p`.
    fn field_near(&self, p: &[f64], vp: &DVector<f64>, q: &[f64]) -> Result<DVector<f64>, FlipError> {
        match &self.field {
            FlipField::Parallel(_) => {
                let t = parallel_transport(&self.g, &CurveSpec::Polyline(vec![p.to_vec(), q.to_vec()]))?;
                Ok(t.matrix * vp)
            }
            FlipField::Expressions(_) => self.field_at(q),
        }
    }

    fn flip_near(&self, p: &[f64], vp: &DVector<f64>, q: &[f64]) -> Result<DMatrix<f64>, FlipError> {
        let v = self.field_near(p, vp, q)?;
        Ok(lorentz_to_flip(&self.g.metric_at(q)?, &v))
    }

    /// Christoffel symbols of `g_R` from Richardson-extrapolated central
    /// differences of `g_R`.
    pub fn flip_christoffel(&self, p: &[f64]) -> Result<Christoffel, FlipError> {
        let n = p.len();
        let vp = self.field_at(p)?;
        let gr = lorentz_to_flip(&self.g.metric_at(p)?, &vp);
        let h = self.fd_step;
        let mut dg = Vec::with_capacity(n);
        for m in 0..n {
            let central = |step: f64| -> Result<DMatrix<f64>, FlipError> {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[m] += step;
                b[m] -= step;
                Ok((self.flip_near(p, &vp, &a)? - self.flip_near(p, &vp, &b)?) / (2.0 * step))
            };
            let coarse = central(h)?;
            let fine = central(h / 2.0)?;
            dg.push((fine * 4.0 - coarse) / 3.0);
        }
        let ginv = gr
            .clone()
            .try_inverse()
            .ok_or(GeometryError::Singular {
                point: p.to_vec(),
                condition: f64::INFINITY,
            })?;
        Ok(Christoffel::from_metric_derivatives(&ginv, &dg))
    }

    /// Signature and algebraic identities of `g_R` at seeded box samples.
    pub fn check(&self, samples: usize, seed: u64, path_independence_residual: f64) -> Result<FlipChecks, FlipError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.g.dim();
        let mut out = FlipChecks {
            min_eigenvalue: f64::INFINITY,
            unit_defect: 0.0,
            orthogonal_defect: 0.0,
            path_independence_residual,
        };
        for _ in 0..samples {
            let p = self.g.random_box_point(&mut rng);
            let gm = self.g.metric_at(&p)?;
            let v = self.field_at(&p)?;
            let gr = lorentz_to_flip(&gm, &v);
            out.min_eigenvalue = out.min_eigenvalue.min(SymmetricEigen::new(gr.clone()).eigenvalues.min());
            out.unit_defect = out.unit_defect.max((inner(&gr, v.as_slice(), v.as_slice()) - 1.0).abs());
            // X, Y: coordinate vectors projected g-orthogonally to V
            let vv = inner(&gm, v.as_slice(), v.as_slice());
            let proj = |k: usize| {
                let mut e = DVector::zeros(n);
                e[k] = 1.0;
                let c = inner(&gm, e.as_slice(), v.as_slice()) / vv;
                e - &v * c
            };
            for a in 0..n {
                for b in 0..n {
                    let (x, y) = (proj(a), proj(b));
                    let d = inner(&gr, x.as_slice(), y.as_slice()) - inner(&gm, x.as_slice(), y.as_slice());
                    out.orthogonal_defect = out.orthogonal_defect.max(d.abs());
                }
            }
        }
        Ok(out)
    }
}

impl MetricField for FlipMetric {
    fn dim(&self) -> usize {
        self.g.dim()
    }

    fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let v = self.field_at(p).map_err(|e| match e {
            FlipError::Geometry(g) => g,
            other => GeometryError::Invalid(other.to_string()),
        })?;
        Ok(lorentz_to_flip(&self.g.metric_at(p)?, &v))
    }

    fn christoffel_at(&self, p: &[f64]) -> Result<Christoffel, GeometryError> {
        self.flip_christoffel(p).map_err(|e| match e {
            FlipError::Geometry(g) => g,
            other => GeometryError::Invalid(other.to_string()),
        })
    }
}

/// Max over a `resolution`ⁿ grid on `g`'s working box of `|Γ(g) - Γ(g_R)|`.
pub fn connection_coincidence<A: MetricField, B: MetricField>(
    g: &A,
    g_r: &B,
    working_box: &[crate::geometry::Interval],
    resolution: usize,
) -> Result<f64, GeometryError> {
    let n = g.dim();
    let res = resolution.max(2);
    let total = res.pow(n as u32);
    let devs: Vec<Result<f64, GeometryError>> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut p = vec![0.0; n];
            for (i, x) in p.iter_mut().enumerate() {
                let k = idx % res;
                idx /= res;
                *x = working_box[i].lo + working_box[i].width() * k as f64 / (res - 1) as f64;
            }
            Ok(g.christoffel_at(&p)?.max_abs_diff(&g_r.christoffel_at(&p)?))
        })
        .collect();
    devs.into_iter().try_fold(0.0, |m, d| Ok(f64::max(m, d?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::zoo;

    fn exprs(g: &ChartMetric, src: &[&str]) -> Vec<Expr> {
        src.iter().map(|s| parse_expr(s, g.coords()).unwrap()).collect()
    }

    #[test]
    fn minkowski_flip_is_euclidean() {
        let g = zoo::builtin("minkowski2").unwrap();
        let w = TangentVec::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let (f, _) = flip_metric(&g, &w, 3).unwrap();
        let gr = f.metric_at(&[1.0, -2.0]).unwrap();
        assert!((gr - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
        assert_eq!(connection_coincidence(&g, &f, g.working_box(), 4).unwrap(), 0.0);
    }

    #[test]
    fn sphere_product_flip() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let w = TangentVec::new(g.base_point().to_vec(), vec![1.0, 0.0, 0.0]);
        let (f, res) = flip_metric(&g, &w, 3).unwrap();
        let p = [0.5, 1.0, 0.3];
        let gr = f.metric_at(&p).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0f64.sin().powi(2)]));
        assert!((gr - want).amax() < 1e-10);
        let c = f.check(20, 1, res).unwrap();
        assert!(c.min_eigenvalue > 0.0 && c.unit_defect < 1e-10 && c.orthogonal_defect < 1e-10);
        assert!(connection_coincidence(&g, &f, g.working_box(), 4).unwrap() < 1e-8);
    }

    #[test]
    fn non_unit_or_non_parallel_fields_are_rejected() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let w = TangentVec::new(g.base_point().to_vec(), vec![2.0, 0.0, 0.0]);
        assert!(matches!(flip_metric(&g, &w, 3), Err(FlipError::NotUnitTimelike { .. })));
        let a: f64 = 0.4;
        let w = TangentVec::new(g.base_point().to_vec(), vec![a.cosh(), a.sinh(), 0.0]);
        assert!(matches!(flip_metric(&g, &w, 3), Err(FlipError::NotParallel { .. })));
    }

    #[test]
    fn non_parallel_field_breaks_the_connection() {
        let g = zoo::builtin("minkowski2").unwrap();
        let f = FlipMetric::from_expressions(&g, exprs(&g, &["cosh(x/2)", "sinh(x/2)"])).unwrap();
        assert!(connection_coincidence(&g, &f, g.working_box(), 5).unwrap() > 1e-3);
    }
}
