use nalgebra::DMatrix;
use serde::Serialize;

use super::{sample_holonomy, HolonomyError, LoopDescriptor};
use crate::geometry::ChartMetric;
use crate::transport::{parallel_transport, CurveSpec};

#[derive(Clone, Debug, Serialize)]
pub struct DeckReport {
    pub identification: usize,
    pub matrix: Vec<Vec<f64>>,
    pub eigen_moduli: Vec<f64>,
    /// `‖P - I‖max`.
    pub identity_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoveringReport {
    pub cover_generators: usize,
    pub base_generators: usize,
    /// Worst distance from a cover generator (pushed down by the deck map) to
    /// the nearest base generator or product of two.
    pub embedding_error: f64,
    pub embedded: bool,
    /// Lifts compared: the identity lift plus one per identification whose
    /// image of every loop stays in the domain.
    pub lifts: Vec<String>,
    pub deck: Vec<DeckReport>,
}

const EMBED_TOL: f64 = 1e-6;

fn lift(curve: &CurveSpec, phi: &crate::geometry::Identification) -> Option<CurveSpec> {
    match curve {
        CurveSpec::Polyline(pts) => Some(CurveSpec::Polyline(pts.iter().map(|p| phi.apply(p)).collect())),
        _ => None,
    }
}

/// Compare holonomy on the universal-cover chart (identifications stripped)
/// with the quotient.
///
/// Each contractible base loop `γ` is lifted to `φ∘γ` in the cover for every
/// identification `φ` (and trivially), transported there, pushed back with
/// `dφ⁻¹ · P · dφ`, and matched against the base sample.
pub fn covering_compare(g: &ChartMetric, budget: usize, seed: u64) -> Result<CoveringReport, HolonomyError> {
    let base = sample_holonomy(g, g.base_point(), budget, seed)?;
    let cover = g.without_identifications();
    let mut candidates: Vec<DMatrix<f64>> = base.matrices().cloned().collect();
    for a in base.matrices() {
        for b in base.matrices() {
            candidates.push(a * b);
        }
    }
    let nearest = |m: &DMatrix<f64>| {
        candidates
            .iter()
            .map(|c| (c - m).amax())
            .fold(f64::INFINITY, f64::min)
    };
    let loops: Vec<&CurveSpec> = base
        .generators
        .iter()
        .filter(|gen| matches!(gen.descriptor, LoopDescriptor::Rectangle { .. } | LoopDescriptor::Retrace { .. }))
        .filter_map(|gen| gen.curve.as_ref())
        .collect();
    let n = g.dim();
    let mut lifts = vec![crate::geometry::Identification::linear(DMatrix::identity(n, n), &vec![0.0; n])];
    let mut names = vec!["identity".to_string()];
    for (k, id) in g.identifications().iter().enumerate() {
        let inside = loops.iter().all(|c| match lift(c, id) {
            Some(CurveSpec::Polyline(pts)) => pts.iter().all(|p| cover.in_domain(p)),
            _ => false,
        });
        if inside {
            lifts.push(id.clone());
            names.push(format!("identification {k}"));
        }
    }
    let mut worst: f64 = 0.0;
    let mut cover_generators = 0;
    for phi in &lifts {
        let dphi_inv = phi.inverse_differential().ok_or(HolonomyError::BadSlice)?;
        for c in &loops {
            let lifted = lift(c, phi).expect("polyline loops");
            let t = parallel_transport(&cover, &lifted)?;
            let pushed = &dphi_inv * t.matrix * &phi.matrix;
            worst = worst.max(nearest(&pushed));
            cover_generators += 1;
        }
    }
    let deck = base
        .generators
        .iter()
        .filter_map(|gen| match gen.descriptor {
            LoopDescriptor::Deck { identification } => {
                let m = &gen.matrix;
                let moduli = super::eigen_moduli(m);
                Some(DeckReport {
                    identification,
                    matrix: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    eigen_moduli: moduli,
                    identity_deviation: (m - DMatrix::<f64>::identity(n, n)).amax(),
                })
            }
            _ => None,
        })
        .collect();
    Ok(CoveringReport {
        cover_generators,
        base_generators: base.generators.len(),
        embedding_error: worst,
        embedded: worst <= EMBED_TOL,
        lifts: names,
        deck,
    })
}
