//! Sampling the holonomy group at a point and reading off invariant data:
//! the common fixed subspace, the precompactness verdict, averaged invariant
//! vectors, parallel fields and systems, relative and covering comparisons.

mod average;
mod covering;
mod field;
mod fixed;
mod logm;
mod relative;

pub use average::{haar_average_exhaustive, haar_average_vector, AverageReport};
pub use covering::{covering_compare, CoveringReport, DeckReport};
pub use field::{parallel_field_extend, ParallelField};
pub use fixed::{
    fixed_subspace, holonomy_algebra_dim, orthonormal_parallel_system, precompactness_verdict,
    AlgebraReport, FixedSubspace, HolonomyVerdict, ParallelSystem, VerdictKind, VerdictResiduals,
};
pub use logm::principal_log;
pub use relative::{relative_holonomy, RelativeHolonomy};

use nalgebra::{DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{ChartMetric, GeometryError, MetricField};
use crate::transport::{parallel_transport, CurveSpec, TransportError};

/// Loop sizes as fractions of the working-box width along each axis.
pub const LOOP_SCALES: [f64; 3] = [0.2, 0.05, 0.01];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HolonomyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("base point {0:?} is outside the chart domain")]
    BaseOutsideDomain(Vec<f64>),
    #[error("no loop could be transported ({dropped} dropped)")]
    NoLoops { dropped: usize },
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("slice is not spacelike at {point:?}")]
    SliceNotSpacelike { point: Vec<f64> },
    #[error("slice is not totally geodesic: worst normal Christoffel component {value:.3e} (Γ^{k}_{{{i}{j}}}) at {point:?}")]
    SliceNotTotallyGeodesic {
        point: Vec<f64>,
        k: usize,
        i: usize,
        j: usize,
        value: f64,
    },
    #[error("slice must hold at least one coordinate fixed and leave one free")]
    BadSlice,
    #[error("verdict is {0:?}, a timelike parallel system needs precompact_timelike")]
    NotPrecompact(VerdictKind),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Where a generator came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoopDescriptor {
    /// Lasso: straight path base → corner, coordinate rectangle, and back.
    Rectangle {
        axes: (usize, usize),
        corner: Vec<f64>,
        sides: (f64, f64),
        scale: f64,
    },
    /// Out and back along a straight segment (used when fewer than two axes are free).
    Retrace { to: Vec<f64> },
    /// Straight path base → φ(base), closed by the identification.
    Deck { identification: usize },
    /// Supplied directly rather than transported.
    Given { index: usize },
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub matrix: DMatrix<f64>,
    pub err_est: f64,
    pub descriptor: LoopDescriptor,
    /// The transported loop, when there was one.
    pub curve: Option<CurveSpec>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DroppedLoop {
    pub descriptor: LoopDescriptor,
    pub reason: String,
}

/// Finitely many elements of `Hol_p`, in a fixed order.
#[derive(Clone, Debug)]
pub struct HolonomySample {
    pub base: Vec<f64>,
    /// Metric at the base point.
    pub gram: DMatrix<f64>,
    pub generators: Vec<Generator>,
    pub dropped: Vec<DroppedLoop>,
    pub budget: usize,
    pub seed: u64,
}

impl HolonomySample {
    /// A sample built from given matrices, e.g. for synthetic groups.
    pub fn from_matrices(base: Vec<f64>, gram: DMatrix<f64>, matrices: Vec<DMatrix<f64>>) -> Self {
        let generators = matrices
            .into_iter()
            .enumerate()
            .map(|(index, matrix)| Generator {
                matrix,
                err_est: 0.0,
                descriptor: LoopDescriptor::Given { index },
                curve: None,
            })
            .collect::<Vec<_>>();
        HolonomySample {
            base,
            gram,
            budget: generators.len(),
            generators,
            dropped: vec![],
            seed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn matrices(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.generators.iter().map(|g| &g.matrix)
    }

    /// Largest entry of `Gᵀ g G - g` over the generators.
    pub fn isometry_defect(&self) -> f64 {
        self.matrices()
            .map(|m| (m.transpose() * &self.gram * m - &self.gram).amax())
            .fold(0.0, f64::max)
    }

    /// Generator with the largest eigenvalue modulus, and that modulus.
    pub fn max_eigen_modulus(&self) -> Option<(usize, f64)> {
        self.matrices()
            .map(|m| spectral_radius(m))
            .enumerate()
            .fold(None, |best, (i, r)| match best {
                Some((_, b)) if b >= r => best,
                _ => Some((i, r)),
            })
    }

    pub fn max_err_est(&self) -> f64 {
        self.generators.iter().map(|g| g.err_est).fold(0.0, f64::max)
    }
}

pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigen_moduli(m).first().copied().unwrap_or(0.0)
}

/// Eigenvalue moduli, largest first.
///
/// nalgebra's unbounded Schur iteration can stall on near-identity
/// matrices, so the iteration count is capped and a stalled matrix is
/// retried after an orthogonal similarity (same spectrum). If every attempt
/// stalls the singular values are returned: they bound the moduli and agree
/// with them for the normal matrices that cause the stall.
pub fn eigen_moduli(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut moduli = None;
    for attempt in 0..8 {
        let a = if attempt == 0 {
            m.clone()
        } else {
            // Householder reflection H = I - 2uuᵀ, a fixed sequence of directions
            let u = DVector::from_fn(n, |i, _| ((i + 1) as f64 * (attempt as f64 + 0.37)).sin());
            let u = &u / u.norm();
            let h = DMatrix::identity(n, n) - &u * u.transpose() * 2.0;
            &h * m * &h
        };
        if let Some(schur) = Schur::try_new(a, f64::EPSILON, 10_000) {
            moduli = Some(schur.complex_eigenvalues().iter().map(|z| z.norm()).collect::<Vec<f64>>());
            break;
        }
    }
    let mut v = moduli.unwrap_or_else(|| m.clone().singular_values().iter().copied().collect());
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Contractible lassos over every pair of coordinate axes plus one deck loop
/// per identification.
pub fn sample_holonomy(
    g: &ChartMetric,
    base: &[f64],
    budget: usize,
    seed: u64,
) -> Result<HolonomySample, HolonomyError> {
    let axes: Vec<usize> = (0..g.dim()).collect();
    sample_with_axes(g, base, &axes, true, budget, seed)
}

/// Loop plan: `budget` lassos cycling through the scales and axis pairs, with
/// seeded corner positions. Axes outside `free` stay at the base value.
fn plan_loops(
    g: &ChartMetric,
    base: &[f64],
    free: &[usize],
    budget: usize,
    seed: u64,
) -> Vec<(LoopDescriptor, CurveSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bx = g.working_box();
    let pairs: Vec<(usize, usize)> = free
        .iter()
        .enumerate()
        .flat_map(|(k, &i)| free[k + 1..].iter().map(move |&j| (i, j)))
        .collect();
    let mut out = Vec::with_capacity(budget);
    for k in 0..budget {
        let scale = LOOP_SCALES[k % LOOP_SCALES.len()];
        let mut corner = base.to_vec();
        if pairs.is_empty() {
            for &i in free {
                corner[i] = bx[i].lo + rng.gen::<f64>() * bx[i].width();
            }
            let curve = CurveSpec::Polyline(vec![base.to_vec(), corner.clone(), base.to_vec()]);
            out.push((LoopDescriptor::Retrace { to: corner }, curve));
            continue;
        }
        let (i, j) = pairs[(k / LOOP_SCALES.len()) % pairs.len()];
        let (a, b) = (scale * bx[i].width(), scale * bx[j].width());
        for &m in free {
            let room = if m == i {
                bx[m].width() - a
            } else if m == j {
                bx[m].width() - b
            } else {
                bx[m].width()
            };
            corner[m] = bx[m].lo + rng.gen::<f64>() * room;
        }
        let mut pts = vec![base.to_vec(), corner.clone()];
        for (da, db) in [(a, 0.0), (a, b), (0.0, b), (0.0, 0.0)] {
            let mut q = corner.clone();
            q[i] += da;
            q[j] += db;
            pts.push(q);
        }
        pts.push(base.to_vec());
        out.push((
            LoopDescriptor::Rectangle {
                axes: (i, j),
                corner,
                sides: (a, b),
                scale,
            },
            CurveSpec::Polyline(pts),
        ));
    }
    out
}

pub(crate) fn sample_with_axes(
    g: &ChartMetric,
    base: &[f64],
    free: &[usize],
    with_deck: bool,
    budget: usize,
    seed: u64,
) -> Result<HolonomySample, HolonomyError> {
    if budget == 0 {
        return Err(HolonomyError::ZeroBudget);
    }
    if !g.in_domain(base) {
        return Err(HolonomyError::BaseOutsideDomain(base.to_vec()));
    }
    let gram = g.metric_at(base)?;
    let mut plan = plan_loops(g, base, free, budget, seed);
    if with_deck {
        for (index, id) in g.identifications().iter().enumerate() {
            let path = CurveSpec::Polyline(vec![base.to_vec(), id.apply(base)]);
            plan.push((
                LoopDescriptor::Deck {
                    identification: index,
                },
                CurveSpec::deck_closed(path, id.clone()),
            ));
        }
    }
    let results: Vec<_> = plan
        .par_iter()
        .map(|(_, curve)| parallel_transport(g, curve))
        .collect();
    let mut generators = Vec::new();
    let mut dropped = Vec::new();
    for ((descriptor, curve), res) in plan.into_iter().zip(results) {
        match res {
            Ok(t) if t.converged => generators.push(Generator {
                matrix: t.matrix,
                err_est: t.err_est,
                descriptor,
                curve: Some(curve),
            }),
            Ok(t) => dropped.push(DroppedLoop {
                descriptor,
                reason: format!("unconverged (err_est {:.3e})", t.err_est),
            }),
            Err(e) => dropped.push(DroppedLoop {
                descriptor,
                reason: e.to_string(),
            }),
        }
    }
    if generators.is_empty() {
        return Err(HolonomyError::NoLoops {
            dropped: dropped.len(),
        });
    }
    Ok(HolonomySample {
        base: base.to_vec(),
        gram,
        generators,
        dropped,
        budget,
        seed,
    })
}

#[cfg(test)]
pub(crate) mod test_groups {
    use nalgebra::DMatrix;

    /// Rotation by `angle` in the `(i, j)` coordinate plane.
    pub fn rotation(n: usize, i: usize, j: usize, angle: f64) -> DMatrix<f64> {
        let mut m = DMatrix::identity(n, n);
        let (s, c) = angle.sin_cos();
        m[(i, i)] = c;
        m[(j, j)] = c;
        m[(i, j)] = -s;
        m[(j, i)] = s;
        m
    }

    /// Boost with rapidity `eta` in the `(0, i)` plane.
    pub fn boost(n: usize, i: usize, eta: f64) -> DMatrix<f64> {
        let mut m = DMatrix::identity(n, n);
        let (s, c) = (eta.sinh(), eta.cosh());
        m[(0, 0)] = c;
        m[(i, i)] = c;
        m[(0, i)] = s;
        m[(i, 0)] = s;
        m
    }

    /// Null rotation of `diag(-1, 1, 1)` fixing the null vector `(1, 1, 0)`.
    pub fn null_rotation(a: f64) -> DMatrix<f64> {
        let h = a * a / 2.0;
        DMatrix::from_row_slice(3, 3, &[1.0 + h, -h, a, h, 1.0 - h, a, a, -a, 1.0])
    }

    pub fn minkowski(n: usize) -> DMatrix<f64> {
        let mut g = DMatrix::identity(n, n);
        g[(0, 0)] = -1.0;
        g
    }
}

#[cfg(test)]
mod tests {
    use super::test_groups::*;
    use super::*;

    #[test]
    fn eigen_moduli_terminate_on_near_identity_generators() {
        // a single small r_x_s3 loop used to stall the uncapped Schur iteration
        let g = crate::zoo::builtin("r_x_s3").unwrap();
        let s = sample_holonomy(&g, g.base_point(), 1, 0).unwrap();
        let m = eigen_moduli(&s.generators[0].matrix);
        assert!(m.iter().all(|x| (x - 1.0).abs() < 1e-6), "{m:?}");
        let b = test_groups::boost(2, 1, 0.5);
        let m = eigen_moduli(&b);
        assert!((m[0] - 0.5f64.exp()).abs() < 1e-12 && (m[1] - (-0.5f64).exp()).abs() < 1e-12);
    }
    use crate::zoo;

    #[test]
    fn minkowski_generators_are_identity() {
        let g = zoo::builtin("minkowski4").unwrap();
        let s = sample_holonomy(&g, g.base_point(), 50, 1).unwrap();
        assert_eq!(s.generators.len(), 50);
        for m in s.matrices() {
            assert!((m - DMatrix::identity(4, 4)).amax() < 1e-10);
        }
    }

    #[test]
    fn sphere_generators_fix_time_and_rotate_sphere() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let s = sample_holonomy(&g, g.base_point(), 50, 1).unwrap();
        assert!(s.isometry_defect() < 1e-7);
        let mut moved = 0.0_f64;
        for m in s.matrices() {
            assert!((m[(0, 0)] - 1.0).abs() < 1e-9);
            for k in 1..3 {
                assert!(m[(0, k)].abs() < 1e-9 && m[(k, 0)].abs() < 1e-9);
            }
            // at the equator the sphere block is a Euclidean rotation
            let det = m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
            assert!((det - 1.0).abs() < 1e-8);
            moved = moved.max((m - DMatrix::identity(3, 3)).amax());
        }
        assert!(moved > 0.05);
    }

    #[test]
    fn clifton_pohl_has_a_hyperbolic_generator() {
        let g = zoo::builtin("clifton_pohl").unwrap();
        let s = sample_holonomy(&g, g.base_point(), 50, 1).unwrap();
        let (_, r) = s.max_eigen_modulus().unwrap();
        assert!(r >= 1.01, "{r}");
        // the deck generator alone is already hyperbolic
        let deck = s.generators.last().unwrap();
        assert_eq!(deck.descriptor, LoopDescriptor::Deck { identification: 0 });
        assert!(spectral_radius(&deck.matrix) > 1.4);
        assert!(s.isometry_defect() < 1e-7);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = zoo::builtin("r_x_s3").unwrap();
        let a = sample_holonomy(&g, g.base_point(), 12, 9).unwrap();
        let b = sample_holonomy(&g, g.base_point(), 12, 9).unwrap();
        for (x, y) in a.matrices().zip(b.matrices()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn synthetic_helpers_are_lorentz() {
        let g = minkowski(3);
        for m in [rotation(3, 1, 2, 0.4), boost(3, 1, 0.7), null_rotation(0.8)] {
            assert!((m.transpose() * &g * &m - &g).amax() < 1e-14);
        }
        let v = nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.0]);
        assert!((null_rotation(0.8) * &v - &v).amax() < 1e-15);
    }
}
