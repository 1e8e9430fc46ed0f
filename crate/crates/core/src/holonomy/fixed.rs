use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::logm::principal_log;
use super::{HolonomyError, HolonomySample};
use crate::geometry::{inner, ChartMetric, LorFrame, TangentVec};
use crate::tolerances::{ALGEBRA_ABS, ALGEBRA_REL, FIXED_REL, GRAM_SIGN, LOG_RADIUS};

/// Common fixed vectors of a sample's generators.
#[derive(Clone, Debug)]
pub struct FixedSubspace {
    /// Euclidean-orthonormal basis as columns (`n × k`).
    pub basis: DMatrix<f64>,
    /// Singular values of the stacked `P_i - I`, descending.
    pub singular_values: Vec<f64>,
    /// Singular values at or below this count as zero.
    pub cut: f64,
    /// `Bᵀ g B`.
    pub gram_restricted: DMatrix<f64>,
    /// `max_i ‖(P_i - I) b‖ / ‖b‖` over basis vectors.
    pub max_residual: f64,
}

impl FixedSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Ascending eigenvalues of the restricted metric with eigenvectors in
    /// the ambient basis (columns), normalized Euclidean.
    pub fn restricted_eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let k = self.dim();
        if k == 0 {
            return (vec![], DMatrix::zeros(self.basis.nrows(), 0));
        }
        let eig = SymmetricEigen::new(self.gram_restricted.clone());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| &self.basis * eig.eigenvectors.column(i))
                .collect::<Vec<_>>(),
        );
        (values, vecs)
    }
}

/// Null space of the stacked `P_i - I`: right singular vectors with
/// `σ ≤ τ_F · max(σ_max, 1)`.
///
/// The floor of 1 in the cut keeps a sample of (numerically) identity
/// generators from having its noise promoted to structure.
pub fn fixed_subspace(s: &HolonomySample) -> FixedSubspace {
    let n = s.dim();
    let m = s.generators.len();
    let mut stacked = DMatrix::zeros(m.max(1) * n, n);
    for (k, p) in s.matrices().enumerate() {
        let d = p - DMatrix::<f64>::identity(n, n);
        stacked.view_mut((k * n, 0), (n, n)).copy_from(&d);
    }
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let cut = FIXED_REL * sigma_max.max(1.0);
    let cols: Vec<DVector<f64>> = order
        .iter()
        .filter(|&&i| svd.singular_values[i] <= cut)
        .map(|&i| v_t.row(i).transpose())
        .collect();
    let basis = if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    let gram_restricted = basis.transpose() * &s.gram * &basis;
    let max_residual = fixed_residual(s, &basis);
    FixedSubspace {
        basis,
        singular_values: sigma,
        cut,
        gram_restricted,
        max_residual,
    }
}

/// `max_i ‖(P_i - I) b‖ / ‖b‖` over the columns `b`.
pub(crate) fn fixed_residual(s: &HolonomySample, basis: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for b in basis.column_iter() {
        let norm = b.norm();
        if norm == 0.0 {
            continue;
        }
        for p in s.matrices() {
            worst = worst.max((p * b - b).norm() / norm);
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    PrecompactTimelike,
    CausalOnly,
    NotPrecompact,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictResiduals {
    pub fixed_dim: usize,
    pub restricted_eigenvalues: Vec<f64>,
    /// Invariance residual of the witness, `max_i ‖(P_i - I)w‖ / ‖w‖`.
    pub witness_residual: Option<f64>,
    pub fixed_basis_residual: f64,
    pub isometry_defect: f64,
    pub max_transport_err: f64,
    pub generators: usize,
    pub dropped: usize,
    pub budget: usize,
    /// Largest eigenvalue modulus over the generators.
    pub max_eigen_modulus: f64,
    /// Eigenvalue moduli of that generator, descending.
    pub extreme_generator_eigen_moduli: Vec<f64>,
    pub extreme_generator: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HolonomyVerdict {
    pub kind: VerdictKind,
    pub witness: Option<TangentVec>,
    pub residuals: VerdictResiduals,
}

/// Decide from the fixed subspace `F`: a negative direction of `g|F` gives a
/// timelike invariant vector; a positive semidefinite `g|F` with kernel gives
/// only a null one; otherwise no causal vector is fixed.
///
/// `g` supplies the time orientation; without it the witness keeps whatever
/// sign the linear algebra produced.
pub fn precompactness_verdict(g: Option<&ChartMetric>, s: &HolonomySample) -> HolonomyVerdict {
    let f = fixed_subspace(s);
    let (values, vecs) = f.restricted_eigen();
    let (kind, witness) = match values.first() {
        Some(&l) if l < -GRAM_SIGN => {
            let v = vecs.column(0).clone_owned();
            (VerdictKind::PrecompactTimelike, Some(v / (-l).sqrt()))
        }
        _ => match values.iter().position(|l| l.abs() <= GRAM_SIGN) {
            Some(i) => (VerdictKind::CausalOnly, Some(vecs.column(i).clone_owned())),
            None => (VerdictKind::NotPrecompact, None),
        },
    };
    let witness = witness.map(|v| {
        let mut v = v;
        if let Some(g) = g {
            if let Ok(t) = g.orientation_at(&s.base) {
                if inner(&s.gram, v.as_slice(), t.as_slice()) > 0.0 {
                    v = -v;
                }
            }
        }
        TangentVec::from_dvector(&s.base, &v)
    });
    let witness_residual = witness
        .as_ref()
        .map(|w| fixed_residual(s, &DMatrix::from_column_slice(w.comp.len(), 1, &w.comp)));
    let extreme = s.max_eigen_modulus();
    let extreme_moduli = extreme
        .map(|(i, _)| super::eigen_moduli(&s.generators[i].matrix))
        .unwrap_or_default();
    HolonomyVerdict {
        kind,
        witness,
        residuals: VerdictResiduals {
            fixed_dim: f.dim(),
            restricted_eigenvalues: values,
            witness_residual,
            fixed_basis_residual: f.max_residual,
            isometry_defect: s.isometry_defect(),
            max_transport_err: s.max_err_est(),
            generators: s.generators.len(),
            dropped: s.dropped.len(),
            budget: s.budget,
            max_eigen_modulus: extreme.map(|e| e.1).unwrap_or(0.0),
            extreme_generator_eigen_moduli: extreme_moduli,
            extreme_generator: extreme.map(|e| e.0),
        },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParallelSystem {
    pub frame: LorFrame,
    pub k: usize,
    pub orthonormality_residual: f64,
}

/// Maximal Lorentz-orthonormal system inside the fixed subspace, timelike
/// vector first.
///
/// Eigenvectors of the restricted metric are already `g`-orthogonal, so the
/// Gram–Schmidt step reduces to ordering them (most negative eigenvalue
/// first), dropping null directions and normalizing.
pub fn orthonormal_parallel_system(
    g: Option<&ChartMetric>,
    s: &HolonomySample,
) -> Result<ParallelSystem, HolonomyError> {
    let verdict = precompactness_verdict(g, s);
    if verdict.kind != VerdictKind::PrecompactTimelike {
        return Err(HolonomyError::NotPrecompact(verdict.kind));
    }
    let f = fixed_subspace(s);
    let (values, vecs) = f.restricted_eigen();
    let mut vectors = vec![verdict.witness.expect("timelike verdict has a witness")];
    for (i, &l) in values.iter().enumerate().skip(1) {
        if l > GRAM_SIGN {
            let v = vecs.column(i) / l.sqrt();
            vectors.push(TangentVec::from_dvector(&s.base, &v.clone_owned()));
        }
    }
    let frame = LorFrame {
        base: s.base.clone(),
        vectors,
    };
    Ok(ParallelSystem {
        k: frame.vectors.len(),
        orthonormality_residual: frame.orthonormality_residual(&s.gram),
        frame,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraReport {
    pub dim: usize,
    pub singular_values: Vec<f64>,
    /// Generators too far from the identity for a principal logarithm.
    pub skipped: Vec<usize>,
}

/// Rank of the span of principal logarithms, cut at
/// `max(τ_rel σ_max, τ_abs)`.
///
/// The absolute floor keeps the logarithms of numerically trivial
/// generators (size ~ transport tolerance) out of the count.
pub fn holonomy_algebra_dim(s: &HolonomySample) -> AlgebraReport {
    let n = s.dim();
    let mut logs = Vec::new();
    let mut skipped = Vec::new();
    for (i, p) in s.matrices().enumerate() {
        if (p - DMatrix::<f64>::identity(n, n)).amax() > LOG_RADIUS {
            skipped.push(i);
            continue;
        }
        match principal_log(p) {
            Some(l) => logs.push(DVector::from_column_slice(l.as_slice())),
            None => skipped.push(i),
        }
    }
    if logs.is_empty() {
        return AlgebraReport {
            dim: 0,
            singular_values: vec![],
            skipped,
        };
    }
    let stacked = DMatrix::from_columns(&logs);
    let mut sigma: Vec<f64> = stacked.singular_values().iter().copied().collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    let cut = (ALGEBRA_REL * sigma[0]).max(ALGEBRA_ABS);
    AlgebraReport {
        dim: sigma.iter().filter(|&&x| x > cut).count(),
        singular_values: sigma,
        skipped,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::super::test_groups::*;
    use super::super::{sample_holonomy, HolonomySample};
    use super::*;
    use crate::zoo;

    fn synthetic(n: usize, ms: Vec<DMatrix<f64>>) -> HolonomySample {
        HolonomySample::from_matrices(vec![0.0; n], minkowski(n), ms)
    }

    #[test]
    fn identity_fixes_everything() {
        let f = fixed_subspace(&synthetic(4, vec![DMatrix::identity(4, 4)]));
        assert_eq!(f.dim(), 4);
    }

    #[test]
    fn rotation_fixes_its_axis() {
        let s = synthetic(3, vec![rotation(3, 1, 2, PI / 3.0)]);
        let f = fixed_subspace(&s);
        assert_eq!(f.dim(), 1);
        assert!((f.basis[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((f.gram_restricted[(0, 0)] + 1.0).abs() < 1e-12);
        let v = precompactness_verdict(None, &s);
        assert_eq!(v.kind, VerdictKind::PrecompactTimelike);
    }

    #[test]
    fn boost_fixes_nothing_in_two_dimensions() {
        let s = synthetic(2, vec![boost(2, 1, 0.5)]);
        assert_eq!(fixed_subspace(&s).dim(), 0);
        let v = precompactness_verdict(None, &s);
        assert_eq!(v.kind, VerdictKind::NotPrecompact);
        assert!(v.witness.is_none());
    }

    #[test]
    fn null_rotation_gives_causal_only() {
        let s = synthetic(3, vec![null_rotation(0.7)]);
        let v = precompactness_verdict(None, &s);
        assert_eq!(v.kind, VerdictKind::CausalOnly);
        let w = v.witness.unwrap();
        assert!(inner(&s.gram, &w.comp, &w.comp).abs() < 1e-10);
        assert!((w.comp[0].abs() - w.comp[1].abs()).abs() < 1e-10 && w.comp[2].abs() < 1e-10);
    }

    #[test]
    fn zoo_verdicts() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let s = sample_holonomy(&g, g.base_point(), 50, 3).unwrap();
        let v = precompactness_verdict(Some(&g), &s);
        assert_eq!(v.kind, VerdictKind::PrecompactTimelike);
        let w = v.witness.unwrap();
        assert!((w.comp[0] - 1.0).abs() < 1e-8 && w.comp[1].abs() < 1e-8);

        let g = zoo::builtin("clifton_pohl").unwrap();
        let s = sample_holonomy(&g, g.base_point(), 50, 3).unwrap();
        assert_eq!(precompactness_verdict(Some(&g), &s).kind, VerdictKind::NotPrecompact);
    }

    #[test]
    fn parallel_systems() {
        for (name, k) in [("minkowski4", 4), ("r_x_s2", 1), ("rt_rx_s2", 2)] {
            let g = zoo::builtin(name).unwrap();
            let s = sample_holonomy(&g, g.base_point(), 30, 1).unwrap();
            let sys = orthonormal_parallel_system(Some(&g), &s).unwrap();
            assert_eq!(sys.k, k, "{name}");
            assert!(sys.orthonormality_residual < 1e-8);
        }
        let g = zoo::builtin("clifton_pohl").unwrap();
        let s = sample_holonomy(&g, g.base_point(), 10, 1).unwrap();
        assert!(orthonormal_parallel_system(Some(&g), &s).is_err());
    }

    #[test]
    fn algebra_dimensions() {
        for (name, dim) in [("minkowski2", 0), ("r_x_s2", 1), ("r_x_s3", 3)] {
            let g = zoo::builtin(name).unwrap();
            let s = sample_holonomy(&g, g.base_point(), 30, 2).unwrap();
            assert_eq!(holonomy_algebra_dim(&s).dim, dim, "{name}");
        }
        let s = synthetic(3, vec![rotation(3, 1, 2, 0.3), boost(3, 1, 0.2), boost(3, 2, 0.2)]);
        assert_eq!(holonomy_algebra_dim(&s).dim, 3);
    }
}
