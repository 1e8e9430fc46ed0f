use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::FlipError;
use crate::geometry::{inner, ChartMetric, MetricField, Riemann, TangentVec};
use crate::tolerances::POINTWISE_REL;

/// `span{u, v}` with `u` null and `v` spacelike, `g(u, v) = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct DegeneratePlane {
    pub base: Vec<f64>,
    pub u: TangentVec,
    pub v: TangentVec,
}

impl DegeneratePlane {
    /// Checks nullity of `u`, `g(v,v) > 0` and the vanishing Gram determinant,
    /// each relative to the Euclidean sizes of the vectors.
    pub fn new(g: &ChartMetric, u: TangentVec, v: TangentVec) -> Result<Self, FlipError> {
        let gm = g.metric_at(&u.base)?;
        let (nu, nv) = (u.euclidean_norm(), v.euclidean_norm());
        let uu = inner(&gm, &u.comp, &u.comp);
        let vv = inner(&gm, &v.comp, &v.comp);
        let uv = inner(&gm, &u.comp, &v.comp);
        if uu.abs() > 1e-10 * nu * nu {
            return Err(FlipError::NotDegenerate(format!("g(u,u) = {uu:.3e}")));
        }
        if vv <= 1e-12 * nv * nv {
            return Err(FlipError::DegenerateV(vv));
        }
        let det = uu * vv - uv * uv;
        if det.abs() > 1e-10 * (nu * nv).powi(2) {
            return Err(FlipError::NotDegenerate(format!("Gram determinant {det:.3e}")));
        }
        Ok(DegeneratePlane {
            base: u.base.clone(),
            u,
            v,
        })
    }
}

fn k_of(gm: &nalgebra::DMatrix<f64>, r: &Riemann, u: &[f64], v: &[f64]) -> f64 {
    let ruvv = r.apply(u, v, v);
    inner(gm, &ruvv, u) / inner(gm, v, v)
}

/// `K_u(π) = g(R(u,v)v, u) / g(v,v)`.
pub fn null_sectional_curvature(g: &ChartMetric, plane: &DegeneratePlane) -> Result<f64, FlipError> {
    let gm = g.metric_at(&plane.base)?;
    let vv = inner(&gm, &plane.v.comp, &plane.v.comp);
    if vv < 1e-12 {
        return Err(FlipError::DegenerateV(vv));
    }
    let r = g.riemann_at(&plane.base)?;
    Ok(k_of(&gm, &r, &plane.u.comp, &plane.v.comp))
}

/// `K_U(π)`: the null sectional curvature with `u` rescaled so `g(u, U) = 1`.
pub fn null_sectional_normalized(
    g: &ChartMetric,
    plane: &DegeneratePlane,
    big_u: &[f64],
) -> Result<f64, FlipError> {
    let gm = g.metric_at(&plane.base)?;
    let s = inner(&gm, &plane.u.comp, big_u);
    let u: Vec<f64> = plane.u.comp.iter().map(|c| c / s).collect();
    let r = g.riemann_at(&plane.base)?;
    Ok(k_of(&gm, &r, &u, &plane.v.comp))
}

/// Random degenerate plane at `p`: `u = T + e` with `e` a random unit
/// spacelike vector orthogonal to `T = U/√(-g(U,U))`, and `v` a random unit
/// spacelike vector orthogonal to both.
pub fn random_degenerate_plane<R: Rng>(
    g: &ChartMetric,
    p: &[f64],
    big_u: &[f64],
    rng: &mut R,
) -> Result<DegeneratePlane, FlipError> {
    let gm = g.metric_at(p)?;
    let n = p.len();
    let uu = inner(&gm, big_u, big_u);
    if uu >= 0.0 {
        return Err(FlipError::NotTimelike(uu));
    }
    let t = DVector::from_column_slice(big_u) / (-uu).sqrt();
    // g-orthonormal spacelike vectors orthogonal to t and to `against`
    let spacelike = |rng: &mut R, against: &[DVector<f64>]| loop {
        let mut x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        x += &t * inner(&gm, x.as_slice(), t.as_slice());
        for a in against {
            x -= a * inner(&gm, x.as_slice(), a.as_slice());
        }
        let xx = inner(&gm, x.as_slice(), x.as_slice());
        if xx > 1e-6 {
            break x / xx.sqrt();
        }
    };
    let e = spacelike(rng, &[]);
    let v = spacelike(rng, &[e.clone()]);
    let u = &t + &e;
    DegeneratePlane::new(
        g,
        TangentVec::from_dvector(p, &u),
        TangentVec::from_dvector(p, &v),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct PointwiseReport {
    pub is_pointwise: bool,
    pub spread: f64,
    /// Mean over the sampled planes.
    pub value: f64,
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

/// Sample `samples` degenerate planes at `p`, normalize by `g(u, U) = 1`, and
/// report the spread of `K_U`.
pub fn pointwise_nullsec_check(
    g: &ChartMetric,
    p: &[f64],
    big_u: &[f64],
    samples: usize,
    seed: u64,
) -> Result<PointwiseReport, FlipError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gm = g.metric_at(p)?;
    let r = g.riemann_at(p)?;
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples.max(1) {
        let plane = random_degenerate_plane(g, p, big_u, &mut rng)?;
        let s = inner(&gm, &plane.u.comp, big_u);
        let u: Vec<f64> = plane.u.comp.iter().map(|c| c / s).collect();
        values.push(k_of(&gm, &r, &u, &plane.v.comp));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = max - min;
    Ok(PointwiseReport {
        is_pointwise: spread < POINTWISE_REL * (1.0 + mean.abs()),
        spread,
        value: mean,
        min,
        max,
        samples: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;
    use crate::expr::parse_expr;
    use crate::geometry::TimeOrientation;
    use crate::zoo;

    #[test]
    fn product_plane_has_unit_curvature() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let p = vec![0.0, FRAC_PI_2, 0.0];
        let u = TangentVec::new(p.clone(), vec![1.0, 1.0, 0.0]);
        let v = TangentVec::new(p.clone(), vec![0.0, 0.0, 1.0]);
        let plane = DegeneratePlane::new(&g, u.clone(), v).unwrap();
        assert!((null_sectional_curvature(&g, &plane).unwrap() - 1.0).abs() < 1e-12);
        let plane2 = DegeneratePlane::new(&g, u, TangentVec::new(p, vec![0.0, 0.0, 2.0])).unwrap();
        assert!((null_sectional_curvature(&g, &plane2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_space_is_pointwise_zero() {
        let g = zoo::builtin("minkowski4").unwrap();
        let r = pointwise_nullsec_check(&g, &[0.0; 4], &[1.0, 0.0, 0.0, 0.0], 50, 1).unwrap();
        assert!(r.is_pointwise && r.value == 0.0);
    }

    #[test]
    fn round_s3_product_is_pointwise_positive() {
        let g = zoo::builtin("r_x_s3").unwrap();
        let r = pointwise_nullsec_check(&g, &[0.0, 1.0, 1.0, 1.0], &[1.0, 0.0, 0.0, 0.0], 200, 1).unwrap();
        assert!(r.is_pointwise, "{r:?}");
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn perturbed_product_is_not_pointwise() {
        let base = zoo::builtin("r_x_s2").unwrap();
        let c = base.coords().to_vec();
        let e = |s: &str| parse_expr(s, &c).unwrap();
        let g = ChartMetric::new(
            "perturbed",
            c.clone(),
            vec![e("-1 + 0.1*sin(theta)"), e("0"), e("0"), e("1"), e("0"), e("sin(theta)^2")],
            base.domain().to_vec(),
            base.working_box().to_vec(),
            vec![],
            TimeOrientation::Field(vec![e("1"), e("0"), e("0")]),
            None,
        )
        .unwrap();
        let r = pointwise_nullsec_check(&g, &[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], 100, 1).unwrap();
        assert!(!r.is_pointwise, "{r:?}");
    }

    #[test]
    fn rescaling_law() {
        let g = zoo::builtin("r_x_s3").unwrap();
        let p = [0.0, 1.0, 1.2, 0.4];
        let gm = g.metric_at(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let plane = random_degenerate_plane(&g, &p, &[1.0, 0.0, 0.0, 0.0], &mut rng).unwrap();
            let u2 = [1.5, 0.3, -0.2, 0.1];
            let k1 = null_sectional_normalized(&g, &plane, &[1.0, 0.0, 0.0, 0.0]).unwrap();
            let k2 = null_sectional_normalized(&g, &plane, &u2).unwrap();
            let s = inner(&gm, &plane.u.comp, &[1.0, 0.0, 0.0, 0.0]);
            let u: Vec<f64> = plane.u.comp.iter().map(|c| c / s).collect();
            let factor = inner(&gm, &u, &u2).powi(2);
            assert!((k1 - factor * k2).abs() < 1e-8 * k1.abs());
        }
    }
}
