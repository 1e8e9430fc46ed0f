//! Lorentzian metrics on a single coordinate box and their pointwise tensors.
//!
//! Signature convention is `(-, +, ..., +)`. Curvature follows
//! `R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_[X,Y] Z`, which makes the round sphere's
//! sectional curvature `+1`.

mod causal;
mod chart;
mod tensors;

pub use causal::{causal_classify, CausalCharacter, Classification, TimeDirection};
pub use chart::{ChartMetric, Identification, IdentificationKind, Interval, TimeOrientation};
pub use tensors::{Christoffel, Riemann};

use nalgebra::{DMatrix, DVector};

use crate::expr::EvalError;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("metric component ({row},{col}): {source}")]
    Component {
        row: usize,
        col: usize,
        #[source]
        source: EvalError,
    },
    #[error("time orientation component {index}: {source}")]
    Orientation {
        index: usize,
        #[source]
        source: EvalError,
    },
    #[error("metric is degenerate at {point:?} (condition number {condition:.3e})")]
    Singular { point: Vec<f64>, condition: f64 },
    #[error("signature is not Lorentzian at {point:?} (eigenvalues {eigenvalues:?})")]
    Signature {
        point: Vec<f64>,
        eigenvalues: Vec<f64>,
    },
    #[error("time orientation is not timelike at {point:?} (g(T,T) = {norm})")]
    OrientationNotTimelike { point: Vec<f64>, norm: f64 },
    #[error("identification {index} is not an isometry (max deviation {deviation:.3e})")]
    NotIsometry { index: usize, deviation: f64 },
    #[error("invalid chart: {0}")]
    Invalid(String),
}

/// Anything that supplies a metric and its Levi-Civita connection pointwise.
///
/// Implemented by expression-backed [`ChartMetric`]s and by sampled metrics
/// such as the flip metric, so connection comparisons can treat both alike.
pub trait MetricField: Sync {
    fn dim(&self) -> usize;
    fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeometryError>;
    fn christoffel_at(&self, p: &[f64]) -> Result<Christoffel, GeometryError>;
}

/// Coordinate-basis vector at a chart point.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TangentVec {
    pub base: Vec<f64>,
    pub comp: Vec<f64>,
}

impl TangentVec {
    pub fn new(base: Vec<f64>, comp: Vec<f64>) -> Self {
        debug_assert_eq!(base.len(), comp.len());
        TangentVec { base, comp }
    }

    pub fn from_dvector(base: &[f64], v: &DVector<f64>) -> Self {
        TangentVec {
            base: base.to_vec(),
            comp: v.iter().copied().collect(),
        }
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.comp)
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.comp.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Vectors at a common base point, e.g. a (partial) Lorentzian orthonormal frame.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LorFrame {
    pub base: Vec<f64>,
    pub vectors: Vec<TangentVec>,
}

impl LorFrame {
    /// Largest deviation of the Gram matrix from `diag(-1, 1, ..., 1)`.
    pub fn orthonormality_residual(&self, gram: &DMatrix<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate() {
                let target = match (i == j, i == 0) {
                    (true, true) => -1.0,
                    (true, false) => 1.0,
                    _ => 0.0,
                };
                let val = inner(gram, &a.comp, &b.comp);
                worst = worst.max((val - target).abs());
            }
        }
        worst
    }
}

/// `g(a, b)` for a metric matrix and plain component slices.
pub fn inner(g: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            s += a[i] * g[(i, j)] * b[j];
        }
    }
    s
}

/// Inverse of a metric matrix together with its 1-norm condition number.
pub(crate) fn inverse_checked(
    g: &DMatrix<f64>,
    p: &[f64],
) -> Result<DMatrix<f64>, GeometryError> {
    let singular = |condition| GeometryError::Singular {
        point: p.to_vec(),
        condition,
    };
    let inv = g.clone().try_inverse().ok_or_else(|| singular(f64::INFINITY))?;
    let condition = one_norm(g) * one_norm(&inv);
    if !condition.is_finite() || condition > crate::tolerances::MAX_CONDITION {
        return Err(singular(condition));
    }
    Ok(inv)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Sectional curvature of the plane spanned by `x`, `y`.
pub fn sectional_curvature(
    g: &DMatrix<f64>,
    riemann: &Riemann,
    x: &[f64],
    y: &[f64],
) -> f64 {
    let ryy = riemann.apply(x, y, y);
    let num = inner(g, &ryy, x);
    let den = inner(g, x, x) * inner(g, y, y) - inner(g, x, y).powi(2);
    num / den
}
