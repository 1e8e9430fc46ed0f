use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::fixed::{fixed_subspace, precompactness_verdict, HolonomyVerdict};
use super::{sample_with_axes, HolonomyError, HolonomySample};
use crate::geometry::{ChartMetric, MetricField, TangentVec};
use crate::tolerances::TOTALLY_GEODESIC;

#[derive(Clone, Debug, Serialize)]
pub struct RelativeHolonomy {
    #[serde(skip)]
    pub sample: HolonomySample,
    pub verdict: HolonomyVerdict,
    pub fixed_dim: usize,
    /// Normal parts of a basis of the invariant subspace (nonzero ones only).
    pub normal_sections: Vec<TangentVec>,
    /// Largest normal component of `∇_{∂i}∂j` over tangent pairs and samples.
    pub second_fundamental_max: f64,
}

/// Split `u` into its part along the columns of `tangent` and the
/// `g`-orthogonal remainder, returning the remainder.
fn normal_part(gm: &DMatrix<f64>, tangent: &DMatrix<f64>, u: &DVector<f64>) -> DVector<f64> {
    let gtt = tangent.transpose() * gm * tangent;
    let rhs = tangent.transpose() * gm * u;
    match gtt.lu().solve(&rhs) {
        Some(a) => u - tangent * a,
        None => u.clone(),
    }
}

fn tangent_frame(n: usize, free: &[usize]) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(n, free.len());
    for (c, &i) in free.iter().enumerate() {
        t[(i, c)] = 1.0;
    }
    t
}

/// Holonomy of loops inside the coordinate slice `{x^k = base^k, k ∈ fixed}`,
/// acting on the full tangent space.
pub fn relative_holonomy(
    g: &ChartMetric,
    fixed: &[usize],
    base: &[f64],
    budget: usize,
    seed: u64,
) -> Result<RelativeHolonomy, HolonomyError> {
    let n = g.dim();
    if fixed.is_empty() || fixed.len() >= n || fixed.iter().any(|&k| k >= n) {
        return Err(HolonomyError::BadSlice);
    }
    let free: Vec<usize> = (0..n).filter(|i| !fixed.contains(i)).collect();
    let tangent = tangent_frame(n, &free);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51ce);
    let mut worst_ii = 0.0_f64;
    for s in 0..=32 {
        let mut p = if s == 0 { base.to_vec() } else { g.random_box_point(&mut rng) };
        for &k in fixed {
            p[k] = base[k];
        }
        let gm = g.metric_at(&p)?;
        let gtt = tangent.transpose() * &gm * &tangent;
        if SymmetricEigen::new(gtt).eigenvalues.min() <= 0.0 {
            return Err(HolonomyError::SliceNotSpacelike { point: p });
        }
        let gamma = g.christoffel_at(&p)?;
        for &i in &free {
            for &j in &free {
                let u = DVector::from_fn(n, |k, _| gamma.get(k, i, j));
                let nu = normal_part(&gm, &tangent, &u);
                let k = nu.iamax();
                let value = nu[k].abs();
                worst_ii = worst_ii.max(value);
                if value > TOTALLY_GEODESIC {
                    return Err(HolonomyError::SliceNotTotallyGeodesic {
                        point: p,
                        k,
                        i,
                        j,
                        value,
                    });
                }
            }
        }
    }
    let sample = sample_with_axes(g, base, &free, false, budget, seed)?;
    let verdict = precompactness_verdict(Some(g), &sample);
    let f = fixed_subspace(&sample);
    let normal_sections = f
        .basis
        .column_iter()
        .map(|b| normal_part(&sample.gram, &tangent, &b.clone_owned()))
        .filter(|v| v.amax() > 1e-8)
        .map(|v| TangentVec::from_dvector(base, &v))
        .collect();
    Ok(RelativeHolonomy {
        fixed_dim: f.dim(),
        sample,
        verdict,
        normal_sections,
        second_fundamental_max: worst_ii,
    })
}

#[cfg(test)]
mod tests {
    use super::super::VerdictKind;
    use super::*;
    use crate::zoo;

    #[test]
    fn spatial_slice_of_r_x_s2() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let r = relative_holonomy(&g, &[0], g.base_point(), 30, 1).unwrap();
        assert_eq!(r.verdict.kind, VerdictKind::PrecompactTimelike);
        assert_eq!(r.normal_sections.len(), 1);
        let v = &r.normal_sections[0].comp;
        assert!(v[0].abs() > 0.99 && v[1].abs() < 1e-8 && v[2].abs() < 1e-8);
    }

    #[test]
    fn axis_line_in_minkowski_is_trivial() {
        let g = zoo::builtin("minkowski2").unwrap();
        let r = relative_holonomy(&g, &[0], &[0.0, 0.0], 10, 1).unwrap();
        for m in r.sample.matrices() {
            assert!((m - DMatrix::identity(2, 2)).amax() < 1e-12);
        }
        assert_eq!(r.fixed_dim, 2);
    }

    #[test]
    fn sphere_slice_in_double_product() {
        let g = zoo::builtin("rt_rx_s2").unwrap();
        let r = relative_holonomy(&g, &[0, 1], g.base_point(), 30, 1).unwrap();
        assert_eq!(r.fixed_dim, 2);
        // the normal sections span the (t, x) plane
        let m = DMatrix::from_columns(
            &r.normal_sections.iter().map(|v| v.to_dvector()).collect::<Vec<_>>(),
        );
        assert_eq!(m.ncols(), 2);
        assert!(m.rows(2, 2).amax() < 1e-8);
        assert!(m.rows(0, 2).determinant().abs() > 0.99);
    }

    #[test]
    fn slices_are_checked() {
        let g = zoo::builtin("r_x_s2").unwrap();
        // {t = 0, φ = 0} is a meridian: geodesic, but timelike slices are refused
        assert!(relative_holonomy(&g, &[0, 2], g.base_point(), 5, 1).is_ok());
        assert!(matches!(
            relative_holonomy(&g, &[1, 2], g.base_point(), 5, 1),
            Err(HolonomyError::SliceNotSpacelike { .. })
        ));
        // a latitude circle θ = 1 is not totally geodesic
        assert!(matches!(
            relative_holonomy(&g, &[0, 1], &[0.0, 1.0, 0.0], 5, 1),
            Err(HolonomyError::SliceNotTotallyGeodesic { .. })
        ));
        assert!(matches!(relative_holonomy(&g, &[], g.base_point(), 5, 1), Err(HolonomyError::BadSlice)));
    }
}
