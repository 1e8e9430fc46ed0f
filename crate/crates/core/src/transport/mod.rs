//! Parallel transport and geodesics along chart curves.
//!
//! Transport solves `Ṁ = -Γ(ċ) M` with classical RK4 on each smooth piece of
//! the curve, halving the step until two successive resolutions agree.

mod curve;
mod geodesic;

pub use curve::{coordinate_rectangle_loop, CurveError, CurveSpec};
pub use geodesic::{
    geodesic_refinement, integrate_geodesic, integrate_geodesic_with, GeodesicOptions, GeodesicOutcome, GeodesicRun,
    GeodesicSample, RefinementReport,
};

use nalgebra::DMatrix;

use crate::expr::EvalError;
use crate::geometry::{GeometryError, MetricField};
use crate::tolerances::{TRANSPORT_STEP_FLOOR, TRANSPORT_TOL};
use curve::Segment;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("curve leaves the chart domain near {point:?}")]
    LeftDomain { point: Vec<f64> },
    #[error("curve expression: {0}")]
    Curve(#[from] EvalError),
    #[error(transparent)]
    Geometry(GeometryError),
    #[error("curve has {got} coordinates but the chart has {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("identification is not invertible")]
    Singular,
}

#[derive(Clone, Debug)]
pub struct TransportResult {
    /// Coordinate-basis map from the start tangent space to the end one.
    pub matrix: DMatrix<f64>,
    /// Max-norm change of the transport under the last step halving.
    pub err_est: f64,
    pub converged: bool,
    /// Total RK4 steps in the accepted resolution.
    pub steps: usize,
    pub curve: CurveSpec,
}

#[derive(Clone, Copy, Debug)]
pub struct TransportOptions {
    pub tol: f64,
    pub step_floor: f64,
    pub initial_steps: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions {
            tol: TRANSPORT_TOL,
            step_floor: TRANSPORT_STEP_FLOOR,
            initial_steps: 4,
        }
    }
}

pub fn parallel_transport<F: MetricField + ?Sized>(
    g: &F,
    c: &CurveSpec,
) -> Result<TransportResult, TransportError> {
    parallel_transport_with(g, c, &TransportOptions::default())
}

pub fn parallel_transport_with<F: MetricField + ?Sized>(
    g: &F,
    c: &CurveSpec,
    opts: &TransportOptions,
) -> Result<TransportResult, TransportError> {
    let n = g.dim();
    let start = c.start();
    if start.len() != n {
        return Err(TransportError::Dimension {
            got: start.len(),
            expected: n,
        });
    }
    let segments = c.segments();
    let seg_tol = opts.tol / segments.len() as f64;
    let mut total = DMatrix::identity(n, n);
    let mut err_sum = 0.0;
    let mut converged = true;
    let mut steps = 0;
    for seg in &segments {
        let s = transport_segment(g, seg, seg_tol, opts)?;
        total = s.matrix * total;
        err_sum += s.err;
        converged &= s.converged;
        steps += s.steps;
    }
    let mut err_est = err_sum * total.amax().max(1.0);
    if let CurveSpec::DeckClosed { identification, .. } = c {
        let back = identification
            .inverse_differential()
            .ok_or(TransportError::Singular)?;
        err_est *= back.amax().max(1.0);
        total = back * total;
    }
    Ok(TransportResult {
        matrix: total,
        err_est,
        converged,
        steps,
        curve: c.clone(),
    })
}

struct SegmentTransport {
    matrix: DMatrix<f64>,
    err: f64,
    converged: bool,
    steps: usize,
}

/// `-Γ^k_{ij} ċ^i` at curve parameter `tau`.
fn generator<F: MetricField + ?Sized>(
    g: &F,
    seg: &Segment<'_>,
    tau: f64,
) -> Result<DMatrix<f64>, TransportError> {
    let (pos, vel) = seg.eval(tau)?;
    let gamma = g.christoffel_at(&pos).map_err(|e| match e {
        GeometryError::OutsideDomain { point } => TransportError::LeftDomain { point },
        other => TransportError::Geometry(other),
    })?;
    Ok(-gamma.contract(&vel))
}

/// RK4 over `n_steps` equal steps, reading generators from a grid of spacing
/// `h/2` (`grid.len() == 2 n_steps + 1`).
fn rk4(grid: &[DMatrix<f64>], n_steps: usize) -> DMatrix<f64> {
    let dim = grid[0].nrows();
    let h = 1.0 / n_steps as f64;
    let mut m = DMatrix::identity(dim, dim);
    for k in 0..n_steps {
        let (b0, bm, b1) = (&grid[2 * k], &grid[2 * k + 1], &grid[2 * k + 2]);
        let k1 = b0 * &m;
        let k2 = bm * (&m + &k1 * (h / 2.0));
        let k3 = bm * (&m + &k2 * (h / 2.0));
        let k4 = b1 * (&m + &k3 * h);
        m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    m
}

fn transport_segment<F: MetricField + ?Sized>(
    g: &F,
    seg: &Segment<'_>,
    tol: f64,
    opts: &TransportOptions,
) -> Result<SegmentTransport, TransportError> {
    let mut n_steps = opts.initial_steps.max(1);
    // generator samples at τ = k / (2 n_steps)
    let mut grid: Vec<DMatrix<f64>> = (0..=2 * n_steps)
        .map(|k| generator(g, seg, k as f64 / (2 * n_steps) as f64))
        .collect::<Result<_, _>>()?;
    let mut coarse = rk4(&grid, n_steps);
    loop {
        let fine_steps = 2 * n_steps;
        let mut refined = Vec::with_capacity(2 * grid.len() - 1);
        for (k, b) in grid.iter().enumerate() {
            if k > 0 {
                let tau = (2 * k - 1) as f64 / (2 * fine_steps) as f64;
                refined.push(generator(g, seg, tau)?);
            }
            refined.push(b.clone());
        }
        grid = refined;
        let fine = rk4(&grid, fine_steps);
        let err = (&fine - &coarse).amax();
        let step = 1.0 / fine_steps as f64;
        if err < tol || step / 2.0 < opts.step_floor {
            return Ok(SegmentTransport {
                matrix: fine,
                err,
                converged: err < tol,
                steps: fine_steps,
            });
        }
        coarse = fine;
        n_steps = fine_steps;
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::expr::parse_expr;
    use crate::geometry::{inner, ChartMetric};
    use crate::zoo;

    fn rect(g: &ChartMetric, i: usize, j: usize, p: &[f64], a: f64, b: f64) -> CurveSpec {
        coordinate_rectangle_loop(i, j, p, a, b, |q| g.in_domain(q)).unwrap()
    }

    #[test]
    fn flat_rectangle_is_identity() {
        let g = zoo::builtin("minkowski2").unwrap();
        let t = parallel_transport(&g, &rect(&g, 0, 1, &[0.0, 0.0], 1.0, 1.0)).unwrap();
        assert!((t.matrix - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(t.converged);
    }

    #[test]
    fn zero_area_loop_is_identity() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let t = parallel_transport(&g, &rect(&g, 1, 2, &[0.0, 1.0, 0.0], 0.0, 0.8)).unwrap();
        assert!((t.matrix - DMatrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn rectangle_rejects_corners_outside_domain() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let e = coordinate_rectangle_loop(1, 2, &[0.0, 2.5, 0.0], 1.0, 1.0, |q| g.in_domain(q));
        assert!(matches!(e, Err(CurveError::RectangleOutsideDomain { .. })));
        assert_eq!(
            coordinate_rectangle_loop(1, 1, &[0.0, 1.0, 0.0], 1.0, 1.0, |_| true),
            Err(CurveError::BadAxes)
        );
    }

    /// Spherical triangle: north-pole-free lune pieces are awkward in polar
    /// coordinates, so use the region `θ ∈ [θ0, π/2]`, `φ ∈ [0, Δφ]` bounded by
    /// two meridians, the equator and a latitude circle. Its area is
    /// `Δφ·cos θ0`, and the holonomy is a rotation by that angle.
    #[test]
    fn sphere_holonomy_angle_is_enclosed_area() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let (theta0, dphi) = (0.7, 1.1);
        let c = rect(&g, 1, 2, &[0.0, theta0, 0.0], FRAC_PI_2 - theta0, dphi);
        let t = parallel_transport(&g, &c).unwrap();
        let m = &t.matrix;
        // ∂t is untouched
        assert!((m[(0, 0)] - 1.0).abs() < 1e-12 && m[(1, 0)].abs() < 1e-12 && m[(0, 1)].abs() < 1e-12);
        // orthonormal frame at the start point: e_θ = ∂θ, e_φ = ∂φ / sin θ0
        let s = theta0.sin();
        let r = [[m[(1, 1)], m[(1, 2)] / s], [m[(2, 1)] * s, m[(2, 2)]]];
        let area = dphi * theta0.cos();
        let angle = r[1][0].atan2(r[0][0]);
        assert!((angle.abs() - area).abs() < 1e-8, "{angle} vs {area}");
        assert!((r[0][0] - r[1][1]).abs() < 1e-8 && (r[0][1] + r[1][0]).abs() < 1e-8);
        assert!(t.err_est < 1e-8);
    }

    #[test]
    fn sphere_latitude_circle_by_parametric_curve() {
        // full latitude circle at θ0: rotation by 2π(1 - cos θ0)
        let g = zoo::builtin("r_x_s2").unwrap();
        let s = vec!["s".to_string()];
        let theta0: f64 = 1.2;
        let exprs = vec![
            parse_expr("0", &s).unwrap(),
            parse_expr(&theta0.to_string(), &s).unwrap(),
            parse_expr("s", &s).unwrap(),
        ];
        let c = CurveSpec::parametric(exprs, vec![0.0, PI, 2.0 * PI]).unwrap();
        let m = parallel_transport(&g, &c).unwrap().matrix;
        let angle = (m[(2, 1)] * theta0.sin()).atan2(m[(1, 1)]);
        let want = 2.0 * PI * theta0.cos();
        let diff = (angle.abs() - want).rem_euclid(2.0 * PI);
        assert!(diff.min(2.0 * PI - diff) < 1e-8, "{angle} vs {want}");
    }

    #[test]
    fn transport_is_an_isometry_composes_and_inverts() {
        let g = zoo::builtin("clifton_pohl").unwrap();
        let a = CurveSpec::polyline(vec![vec![1.0, 0.5], vec![2.0, 0.7], vec![2.5, 2.0]]).unwrap();
        let b = CurveSpec::polyline(vec![vec![2.5, 2.0], vec![1.2, 3.0]]).unwrap();
        let ta = parallel_transport(&g, &a).unwrap();
        let tb = parallel_transport(&g, &b).unwrap();
        let tab = parallel_transport(&g, &a.then(&b).unwrap()).unwrap();
        assert!((&tb.matrix * &ta.matrix - &tab.matrix).amax() < 1e-7);
        let back = parallel_transport(&g, &a.reversed().unwrap()).unwrap();
        assert!((&back.matrix * &ta.matrix - DMatrix::identity(2, 2)).amax() < 1e-7);
        let g0 = g.metric_at(&[1.0, 0.5]).unwrap();
        let g1 = g.metric_at(&[2.5, 2.0]).unwrap();
        let pulled = ta.matrix.transpose() * g1 * &ta.matrix;
        assert!((pulled - &g0).amax() <= 10.0 * ta.err_est + 1e-12);
    }

    #[test]
    fn small_loops_recover_curvature() {
        // (P - I)/h² → -R(∂_i, ∂_j) at the loop centre, second order in h
        let g = zoo::builtin("clifton_pohl").unwrap();
        let p = [1.0, 0.5];
        let dev = |h: f64| {
            let m = parallel_transport(&g, &rect(&g, 0, 1, &p, h, h)).unwrap().matrix;
            let r = g.riemann_at(&[p[0] + h / 2.0, p[1] + h / 2.0]).unwrap().endomorphism(0, 1);
            ((m - DMatrix::identity(2, 2)) / (h * h) + &r).amax()
        };
        let (e1, e2) = (dev(1.0 / 32.0), dev(1.0 / 64.0));
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn deck_closed_clifton_pohl_is_a_boost() {
        let g = zoo::builtin("clifton_pohl").unwrap();
        let id = g.identifications()[0].clone();
        let p = vec![1.0, 0.5];
        let path = CurveSpec::polyline(vec![p.clone(), id.apply(&p)]).unwrap();
        let t = parallel_transport(&g, &CurveSpec::deck_closed(path, id)).unwrap();
        let gm = g.metric_at(&p).unwrap();
        // preserves g at the base point, and is hyperbolic
        assert!((t.matrix.transpose() * &gm * &t.matrix - &gm).amax() < 1e-8);
        let ev = t.matrix.clone().eigenvalues().unwrap();
        let (lo, hi) = (ev.min(), ev.max());
        assert!((lo * hi - 1.0).abs() < 1e-8 && hi > 1.01, "{ev}");
        // along the diagonal the same construction is trivial
        let q = vec![1.0, 1.0];
        let diag = CurveSpec::polyline(vec![q.clone(), vec![2.0, 2.0]]).unwrap();
        let t = parallel_transport(&g, &CurveSpec::deck_closed(diag, g.identifications()[0].clone())).unwrap();
        assert!((t.matrix - DMatrix::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn transport_preserves_inner_products_on_basis() {
        let g = zoo::builtin("r_x_s3").unwrap();
        let c = CurveSpec::polyline(vec![
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0.3, 1.4, 0.8, 1.0],
            vec![-0.2, 2.0, 1.5, -0.5],
        ])
        .unwrap();
        let t = parallel_transport(&g, &c).unwrap();
        let g0 = g.metric_at(&c.start()).unwrap();
        let g1 = g.metric_at(&c.end()).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let (va, vb) = (t.matrix.column(a), t.matrix.column(b));
                let lhs = inner(&g1, va.as_slice(), vb.as_slice());
                assert!((lhs - g0[(a, b)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn leaving_the_domain_is_an_error() {
        let g = zoo::builtin("clifton_pohl").unwrap();
        let c = CurveSpec::polyline(vec![vec![1.0, 1.0], vec![-1.0, 1.0]]).unwrap();
        assert!(matches!(parallel_transport(&g, &c), Err(TransportError::LeftDomain { .. })));
    }
}
