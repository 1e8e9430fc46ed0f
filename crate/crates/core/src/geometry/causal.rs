use serde::Serialize;

use super::{inner, ChartMetric, GeometryError, MetricField, TangentVec};
use crate::tolerances::CAUSAL_REL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalCharacter {
    Timelike,
    Null,
    Spacelike,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDirection {
    Future,
    Past,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub character: CausalCharacter,
    pub direction: TimeDirection,
}

/// Causal character of `v` with tolerance `1e-10 ‖v‖²`, and its time direction
/// relative to the chart's orientation field (future when `g(v, T) < 0`).
pub fn causal_classify(g: &ChartMetric, v: &TangentVec) -> Result<Classification, GeometryError> {
    let norm2: f64 = v.comp.iter().map(|c| c * c).sum();
    if norm2 == 0.0 {
        return Ok(Classification {
            character: CausalCharacter::Zero,
            direction: TimeDirection::None,
        });
    }
    let gm = g.metric_at(&v.base)?;
    let vv = inner(&gm, &v.comp, &v.comp);
    let tau = CAUSAL_REL * norm2;
    let character = if vv < -tau {
        CausalCharacter::Timelike
    } else if vv > tau {
        CausalCharacter::Spacelike
    } else {
        CausalCharacter::Null
    };
    let direction = if character == CausalCharacter::Spacelike {
        TimeDirection::None
    } else {
        let t = g.orientation_at(&v.base)?;
        let vt = inner(&gm, &v.comp, t.as_slice());
        if vt < 0.0 {
            TimeDirection::Future
        } else if vt > 0.0 {
            TimeDirection::Past
        } else {
            TimeDirection::None
        }
    };
    Ok(Classification {
        character,
        direction,
    })
}
