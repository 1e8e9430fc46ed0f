use std::fmt;

use crate::expr::Expr;
use crate::geometry::Identification;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurveError {
    #[error("a curve needs at least two points")]
    TooShort,
    #[error("point {index} has {got} coordinates, expected {expected}")]
    Dimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("rectangle corner {corner:?} lies outside the chart domain")]
    RectangleOutsideDomain { corner: Vec<f64> },
    #[error("axes must be distinct and below the dimension")]
    BadAxes,
    #[error("parametric breakpoints must be strictly increasing")]
    Breakpoints,
}

/// A piecewise-smooth curve in a chart.
#[derive(Clone, Debug, PartialEq)]
pub enum CurveSpec {
    /// Straight segments through the given points.
    Polyline(Vec<Vec<f64>>),
    /// `s ↦ (x¹(s), …, xⁿ(s))` over `breakpoints[0]..breakpoints[last]`,
    /// smooth between consecutive breakpoints. The expressions use a single
    /// variable (index 0) for `s`.
    Parametric {
        exprs: Vec<Expr>,
        breakpoints: Vec<f64>,
    },
    /// A path from `p` to `φ(p)`; its transport is composed with `dφ⁻¹` so the
    /// result is an endomorphism of `T_p`.
    DeckClosed {
        path: Box<CurveSpec>,
        identification: Identification,
    },
}

/// One smooth piece, reparametrized over `τ ∈ [0, 1]`.
pub(crate) enum Segment<'a> {
    Line { a: &'a [f64], b: &'a [f64] },
    Param { exprs: &'a [Expr], s0: f64, s1: f64 },
}

impl Segment<'_> {
    /// Position and velocity (with respect to `τ`).
    pub(crate) fn eval(&self, tau: f64) -> Result<(Vec<f64>, Vec<f64>), crate::expr::EvalError> {
        match self {
            Segment::Line { a, b } => {
                let vel: Vec<f64> = a.iter().zip(*b).map(|(x, y)| y - x).collect();
                let pos = a.iter().zip(&vel).map(|(x, d)| x + tau * d).collect();
                Ok((pos, vel))
            }
            Segment::Param { exprs, s0, s1 } => {
                let ds = s1 - s0;
                let s = s0 + tau * ds;
                let mut pos = Vec::with_capacity(exprs.len());
                let mut vel = Vec::with_capacity(exprs.len());
                for e in exprs.iter() {
                    let j = e.eval_jet1(&[s])?;
                    pos.push(j.value);
                    vel.push(j.grad[0] * ds);
                }
                Ok((pos, vel))
            }
        }
    }
}

impl CurveSpec {
    pub fn polyline(points: Vec<Vec<f64>>) -> Result<Self, CurveError> {
        if points.len() < 2 {
            return Err(CurveError::TooShort);
        }
        let n = points[0].len();
        for (index, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(CurveError::Dimension {
                    index,
                    got: p.len(),
                    expected: n,
                });
            }
        }
        Ok(CurveSpec::Polyline(points))
    }

    pub fn parametric(exprs: Vec<Expr>, breakpoints: Vec<f64>) -> Result<Self, CurveError> {
        if breakpoints.len() < 2 {
            return Err(CurveError::TooShort);
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CurveError::Breakpoints);
        }
        Ok(CurveSpec::Parametric { exprs, breakpoints })
    }

    pub fn deck_closed(path: CurveSpec, identification: Identification) -> Self {
        CurveSpec::DeckClosed {
            path: Box::new(path),
            identification,
        }
    }

    pub(crate) fn segments(&self) -> Vec<Segment<'_>> {
        match self {
            CurveSpec::Polyline(pts) => pts
                .windows(2)
                .map(|w| Segment::Line { a: &w[0], b: &w[1] })
                .collect(),
            CurveSpec::Parametric { exprs, breakpoints } => breakpoints
                .windows(2)
                .map(|w| Segment::Param {
                    exprs,
                    s0: w[0],
                    s1: w[1],
                })
                .collect(),
            CurveSpec::DeckClosed { path, .. } => path.segments(),
        }
    }

    pub fn start(&self) -> Vec<f64> {
        match self {
            CurveSpec::Polyline(pts) => pts[0].clone(),
            CurveSpec::Parametric { exprs, breakpoints } => exprs
                .iter()
                .map(|e| e.eval(&[breakpoints[0]]).unwrap_or(f64::NAN))
                .collect(),
            CurveSpec::DeckClosed { path, .. } => path.start(),
        }
    }

    pub fn end(&self) -> Vec<f64> {
        match self {
            CurveSpec::Polyline(pts) => pts[pts.len() - 1].clone(),
            CurveSpec::Parametric { exprs, breakpoints } => exprs
                .iter()
                .map(|e| e.eval(&[breakpoints[breakpoints.len() - 1]]).unwrap_or(f64::NAN))
                .collect(),
            CurveSpec::DeckClosed { path, .. } => path.end(),
        }
    }

    /// The same polyline traversed backwards. Parametric and deck-closed
    /// curves are not reversible in this representation.
    pub fn reversed(&self) -> Option<CurveSpec> {
        match self {
            CurveSpec::Polyline(pts) => Some(CurveSpec::Polyline(pts.iter().rev().cloned().collect())),
            _ => None,
        }
    }

    /// Polyline `self` followed by polyline `other`; `other` must start where `self` ends.
    pub fn then(&self, other: &CurveSpec) -> Option<CurveSpec> {
        match (self, other) {
            (CurveSpec::Polyline(a), CurveSpec::Polyline(b)) if a.last() == b.first() => {
                let mut pts = a.clone();
                pts.extend(b[1..].iter().cloned());
                Some(CurveSpec::Polyline(pts))
            }
            _ => None,
        }
    }
}

impl fmt::Display for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveSpec::Polyline(pts) => write!(f, "polyline with {} vertices from {:?}", pts.len(), pts[0]),
            CurveSpec::Parametric { exprs, breakpoints } => {
                write!(f, "parametric (")?;
                for (i, e) in exprs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ") on [{}, {}]", breakpoints[0], breakpoints[breakpoints.len() - 1])
            }
            CurveSpec::DeckClosed { path, .. } => write!(f, "deck-closed {path}"),
        }
    }
}

/// Closed polyline `p → p + a·e_i → p + a·e_i + b·e_j → p + b·e_j → p`.
///
/// Only the corners are checked against `in_domain`; charts are coordinate
/// boxes, so the edges then stay inside too.
pub fn coordinate_rectangle_loop(
    i: usize,
    j: usize,
    p: &[f64],
    a: f64,
    b: f64,
    in_domain: impl Fn(&[f64]) -> bool,
) -> Result<CurveSpec, CurveError> {
    let n = p.len();
    if i == j || i >= n || j >= n {
        return Err(CurveError::BadAxes);
    }
    let corner = |da: f64, db: f64| {
        let mut q = p.to_vec();
        q[i] += da;
        q[j] += db;
        q
    };
    let pts = vec![corner(0.0, 0.0), corner(a, 0.0), corner(a, b), corner(0.0, b), corner(0.0, 0.0)];
    if let Some(bad) = pts.iter().find(|q| !in_domain(q)) {
        return Err(CurveError::RectangleOutsideDomain { corner: bad.clone() });
    }
    Ok(CurveSpec::Polyline(pts))
}
