use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::fixed::fixed_residual;
use super::HolonomySample;
use crate::geometry::TangentVec;
use crate::tolerances::FIXED_REL;

#[derive(Clone, Debug, Serialize)]
pub struct AverageReport {
    /// The averaged direction, present only on convergence.
    pub vector: Option<TangentVec>,
    /// `max_i ‖(P_i - I)v‖ / ‖v‖` at the end.
    pub residual: f64,
    pub converged: bool,
    /// The average collapsed to zero: no invariant direction in the orbit's hull.
    pub vanished: bool,
    pub words_used: usize,
}

fn alphabet(s: &HolonomySample) -> Vec<DMatrix<f64>> {
    let mut letters: Vec<DMatrix<f64>> = s.matrices().cloned().collect();
    letters.extend(s.matrices().filter_map(|m| m.clone().try_inverse()));
    letters
}

fn residual_of(s: &HolonomySample, v: &DVector<f64>) -> f64 {
    fixed_residual(s, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

/// Invariant vector from the orbit of `v0`, by repeated two-point averaging
/// `v ← (v + w v)/2` over random words `w` of length `1..=word_len` in the
/// generators and their inverses.
///
/// For a bounded group each step is an average over the group acting on a
/// compact orbit, and the iterates converge to the invariant part of `v0`
/// (the image of the Haar projection). For an unbounded orbit the direction
/// drifts toward an expanding eigenvector and the residual stays large. The
/// iterate is renormalized every step, so only its direction is meaningful.
pub fn haar_average_vector(
    s: &HolonomySample,
    v0: &TangentVec,
    word_len: usize,
    samples: usize,
    seed: u64,
) -> AverageReport {
    let letters = alphabet(s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = v0.to_dvector();
    v /= v.norm();
    let mut residual = residual_of(s, &v);
    let mut used = 0;
    while residual >= FIXED_REL && used < samples {
        let len = rng.gen_range(1..=word_len.max(1));
        let mut w = v.clone();
        for _ in 0..len {
            w = &letters[rng.gen_range(0..letters.len())] * w;
        }
        let next = (&v + w) * 0.5;
        used += 1;
        let norm = next.norm();
        if !(norm > 1e-12) {
            return AverageReport {
                vector: None,
                residual: f64::NAN,
                converged: false,
                vanished: true,
                words_used: used,
            };
        }
        v = next / norm;
        residual = residual_of(s, &v);
    }
    let converged = residual < FIXED_REL;
    AverageReport {
        vector: converged.then(|| TangentVec::from_dvector(&s.base, &v)),
        residual,
        converged,
        vanished: false,
        words_used: used,
    }
}

/// Exact average of `w(v0)` over all words of length `word_len`, for small
/// finite groups. Refuses more than a million words.
pub fn haar_average_exhaustive(
    s: &HolonomySample,
    v0: &TangentVec,
    word_len: usize,
) -> Option<AverageReport> {
    let letters = alphabet(s);
    let count = letters.len().checked_pow(word_len as u32)?;
    if count > 1_000_000 {
        return None;
    }
    // averaging over words of length L is L-fold averaging over letters
    let mean_letter = letters.iter().fold(DMatrix::zeros(s.dim(), s.dim()), |acc, m| acc + m)
        / letters.len() as f64;
    let mut v = v0.to_dvector();
    for _ in 0..word_len {
        v = &mean_letter * v;
    }
    let norm = v.norm();
    if !(norm > 1e-12 * v0.euclidean_norm()) {
        return Some(AverageReport {
            vector: None,
            residual: f64::NAN,
            converged: false,
            vanished: true,
            words_used: count,
        });
    }
    let residual = residual_of(s, &(&v / norm));
    let converged = residual < FIXED_REL;
    Some(AverageReport {
        vector: Some(TangentVec::from_dvector(&s.base, &v)),
        residual,
        converged,
        vanished: false,
        words_used: count,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::super::test_groups::*;
    use super::super::{sample_holonomy, HolonomySample};
    use super::*;
    use crate::zoo;

    #[test]
    fn finite_group_average_is_exact() {
        let s = HolonomySample::from_matrices(
            vec![0.0; 3],
            minkowski(3),
            vec![DMatrix::identity(3, 3), rotation(3, 1, 2, PI)],
        );
        let v0 = TangentVec::new(vec![0.0; 3], vec![1.0, 0.3, 0.0]);
        let r = haar_average_exhaustive(&s, &v0, 1).unwrap();
        let v = r.vector.unwrap();
        assert!((v.comp[0] - 1.0).abs() < 1e-15 && v.comp[1].abs() < 1e-15 && v.comp[2].abs() < 1e-15);
        assert!(r.converged);
    }

    #[test]
    fn sphere_orbit_average_finds_time_direction() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let s = sample_holonomy(&g, g.base_point(), 50, 1).unwrap();
        let v0 = TangentVec::new(s.base.clone(), vec![1.0, 0.3, 0.0]);
        let r = haar_average_vector(&s, &v0, 4, 10_000, 7);
        assert!(r.converged && r.residual < 1e-5, "{r:?}");
        let v = r.vector.unwrap();
        assert!(v.comp[1].abs() < 1e-5 && v.comp[2].abs() < 1e-5);
    }

    #[test]
    fn boost_orbit_does_not_converge() {
        let s = HolonomySample::from_matrices(vec![0.0; 2], minkowski(2), vec![boost(2, 1, 0.5)]);
        let v0 = TangentVec::new(vec![0.0; 2], vec![1.0, 0.0]);
        let r = haar_average_vector(&s, &v0, 3, 2_000, 1);
        assert!(!r.converged && r.vector.is_none());
        assert!(r.residual > 0.1);
    }
}
