//! Metric spec files (TOML). See `docs/spec-format.md` for the grammar.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::deform::{build_deformation, DeformError, DeformationFamily};
use crate::expr::{parse_expr, Expr, ParseError};
use crate::geometry::{ChartMetric, GeometryError, Identification, Interval, TimeOrientation};

/// Sample count and seed for the validation run done on load.
pub const VALIDATION_SAMPLES: usize = 200;
pub const VALIDATION_SEED: u64 = 0;

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed spec file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{field}: {source} in `{text}`")]
    Expr {
        field: String,
        text: String,
        source: ParseError,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Deform(#[from] DeformError),
}

/// A number written either as a TOML number or as a constant expression
/// such as `"2*pi"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Num {
    Value(f64),
    Text(String),
}

impl Num {
    fn value(&self, field: &str) -> Result<f64, SpecError> {
        match self {
            Num::Value(v) => Ok(*v),
            Num::Text(s) => {
                let e = parse_expr(s, &[]).map_err(|source| SpecError::Expr {
                    field: field.into(),
                    text: s.clone(),
                    source,
                })?;
                e.eval(&[])
                    .map_err(|err| SpecError::Invalid(format!("{field}: {err}")))
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Range {
    Bounds([Num; 2]),
    Keyword(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIdentification {
    translation: Option<Vec<Num>>,
    matrix: Option<Vec<Vec<Num>>>,
    offset: Option<Vec<Num>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeformation {
    alpha: Vec<String>,
    s_metric: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: String,
    dim: Option<usize>,
    coords: Vec<String>,
    components: Option<Vec<String>>,
    #[serde(default)]
    domain: BTreeMap<String, Range>,
    #[serde(default)]
    working_box: BTreeMap<String, [Num; 2]>,
    #[serde(default)]
    identification: Vec<RawIdentification>,
    time_orientation: Option<Vec<String>>,
    time_function: Option<String>,
    base_point: Option<Vec<Num>>,
    deformation: Option<RawDeformation>,
}

/// Parsed and validated spec file.
#[derive(Clone, Debug)]
pub struct LoadedSpec {
    pub metric: ChartMetric,
    pub deformation: Option<DeformationFamily>,
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<LoadedSpec, SpecError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_spec(&text)
}

fn exprs(field: &str, list: &[String], coords: &[String]) -> Result<Vec<Expr>, SpecError> {
    list.iter()
        .enumerate()
        .map(|(i, s)| {
            parse_expr(s, coords).map_err(|source| SpecError::Expr {
                field: format!("{field}[{i}]"),
                text: s.clone(),
                source,
            })
        })
        .collect()
}

fn nums(field: &str, list: &[Num]) -> Result<Vec<f64>, SpecError> {
    list.iter().map(|n| n.value(field)).collect()
}

/// Parse spec text and validate the resulting metric.
pub fn parse_spec(text: &str) -> Result<LoadedSpec, SpecError> {
    let raw: RawSpec = toml::from_str(text)?;
    let n = raw.coords.len();
    if let Some(d) = raw.dim {
        if d != n {
            return Err(SpecError::Invalid(format!("dim = {d} but {n} coordinates are listed")));
        }
    }
    for key in raw.domain.keys().chain(raw.working_box.keys()) {
        if !raw.coords.contains(key) {
            return Err(SpecError::Invalid(format!("unknown coordinate `{key}` in domain/working_box")));
        }
    }

    let mut domain = Vec::with_capacity(n);
    let mut working_box = Vec::with_capacity(n);
    for c in &raw.coords {
        let d = match raw.domain.get(c) {
            None => Interval::UNBOUNDED,
            Some(Range::Keyword(k)) if k == "unbounded" => Interval::UNBOUNDED,
            Some(Range::Keyword(k)) => {
                return Err(SpecError::Invalid(format!("domain.{c}: expected [lo, hi] or \"unbounded\", got \"{k}\"")))
            }
            Some(Range::Bounds([lo, hi])) => {
                let field = format!("domain.{c}");
                Interval::new(lo.value(&field)?, hi.value(&field)?)
            }
        };
        let b = match raw.working_box.get(c) {
            Some([lo, hi]) => {
                let field = format!("working_box.{c}");
                Interval::new(lo.value(&field)?, hi.value(&field)?)
            }
            // finite domains default to their middle 98%
            None if d.is_finite() => {
                let m = 0.01 * d.width();
                Interval::new(d.lo + m, d.hi - m)
            }
            None => {
                return Err(SpecError::Invalid(format!(
                    "coordinate `{c}` has an unbounded domain and needs a working_box entry"
                )))
            }
        };
        domain.push(d);
        working_box.push(b);
    }

    let mut identifications = Vec::new();
    for (k, id) in raw.identification.iter().enumerate() {
        let field = format!("identification[{k}]");
        let parsed = match (&id.translation, &id.matrix) {
            (Some(t), None) if id.offset.is_none() => Identification::translation(&nums(&field, t)?),
            (None, Some(rows)) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(SpecError::Invalid(format!("{field}: matrix must be {n}×{n}")));
                }
                let mut a = DMatrix::zeros(n, n);
                for (i, row) in rows.iter().enumerate() {
                    for (j, x) in row.iter().enumerate() {
                        a[(i, j)] = x.value(&field)?;
                    }
                }
                let b = match &id.offset {
                    Some(o) => nums(&field, o)?,
                    None => vec![0.0; n],
                };
                Identification::linear(a, &b)
            }
            _ => {
                return Err(SpecError::Invalid(format!(
                    "{field}: give either `translation` or `matrix` (with optional `offset`)"
                )))
            }
        };
        if parsed.dim() != n {
            return Err(SpecError::Invalid(format!("{field}: expected {n} entries")));
        }
        identifications.push(parsed);
    }

    let orientation = match (&raw.time_orientation, &raw.time_function) {
        (Some(f), None) => TimeOrientation::Field(exprs("time_orientation", f, &raw.coords)?),
        (None, Some(c)) => TimeOrientation::TimeFunction(
            raw.coords
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| SpecError::Invalid(format!("time_function `{c}` is not a coordinate")))?,
        ),
        (None, None) if raw.deformation.is_some() => TimeOrientation::TimeFunction(0),
        _ => {
            return Err(SpecError::Invalid(
                "give exactly one of `time_orientation` and `time_function`".into(),
            ))
        }
    };
    let base = raw.base_point.as_deref().map(|b| nums("base_point", b)).transpose()?;

    let deformation = match &raw.deformation {
        None => None,
        Some(d) => Some(DeformationFamily::new(
            raw.name.clone(),
            raw.coords.clone(),
            exprs("deformation.s_metric", &d.s_metric, &raw.coords)?,
            exprs("deformation.alpha", &d.alpha, &raw.coords)?,
            domain.clone(),
            working_box.clone(),
        )?),
    };

    let metric = match (&raw.components, &deformation) {
        (Some(c), _) => ChartMetric::new(
            raw.name.clone(),
            raw.coords.clone(),
            exprs("components", c, &raw.coords)?,
            domain,
            working_box,
            identifications,
            orientation,
            base,
        )?,
        // a bare family stands for its r = 0 member
        (None, Some(fam)) => {
            if !identifications.is_empty() {
                return Err(SpecError::Invalid("identifications need explicit components".into()));
            }
            let mut g = build_deformation(fam, 0.0)?;
            g.name = raw.name.clone();
            g
        }
        (None, None) => return Err(SpecError::Invalid("missing `components`".into())),
    };
    metric.validate(VALIDATION_SAMPLES, VALIDATION_SEED)?;
    if let Some(fam) = &deformation {
        fam.verify(VALIDATION_SAMPLES, VALIDATION_SEED)?;
    }
    Ok(LoadedSpec { metric, deformation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricField;
    use crate::zoo;

    const MINKOWSKI: &str = r#"
name = "mink"
coords = ["t", "x"]
components = ["-1", "0", "1"]
time_orientation = ["1", "0"]
[working_box]
t = [-1, 1]
x = [-1, 1]
"#;

    #[test]
    fn minimal_minkowski_loads() {
        let s = parse_spec(MINKOWSKI).unwrap();
        assert_eq!(s.metric.dim(), 2);
        assert!(s.deformation.is_none());
    }

    #[test]
    fn wrong_signature_is_rejected_with_a_point() {
        let err = parse_spec(&MINKOWSKI.replace("\"-1\"", "\"+1\"")).unwrap_err();
        match err {
            SpecError::Geometry(GeometryError::Signature { point, .. }) => assert_eq!(point.len(), 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn expression_errors_carry_a_position() {
        let err = parse_spec(&MINKOWSKI.replace("\"0\", \"1\"", "\"0\", \"1 + q\"")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("components[2]") && msg.contains("position 4"), "{msg}");
    }

    #[test]
    fn missing_working_box_for_unbounded_coordinate() {
        let err = parse_spec(&MINKOWSKI.replace("x = [-1, 1]", "")).unwrap_err();
        assert!(err.to_string().contains("`x`"));
    }

    #[test]
    fn non_isometric_identification_reports_deviation() {
        let text = format!("{MINKOWSKI}\n[[identification]]\nmatrix = [[2, 0], [0, 1]]\n");
        match parse_spec(&text).unwrap_err() {
            SpecError::Geometry(GeometryError::NotIsometry { deviation, .. }) => assert!(deviation > 0.1),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn documented_clifton_pohl_equals_builtin() {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../specs/clifton_pohl.toml")).unwrap();
        let s = parse_spec(&text).unwrap();
        let b = zoo::builtin("clifton_pohl").unwrap();
        assert_eq!(s.metric.coords(), b.coords());
        assert_eq!(s.metric.upper_components(), b.upper_components());
        assert_eq!(s.metric.domain(), b.domain());
        assert_eq!(s.metric.working_box(), b.working_box());
        assert_eq!(s.metric.identifications(), b.identifications());
        assert_eq!(s.metric.time_orientation(), b.time_orientation());
        assert_eq!(s.metric.base_point(), b.base_point());
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        for _ in 0..50 {
            let p = b.random_box_point(&mut rng);
            assert_eq!((s.metric.metric_at(&p).unwrap() - b.metric_at(&p).unwrap()).amax(), 0.0);
        }
    }

    #[test]
    fn constant_expressions_in_numbers() {
        let text = r#"
name = "s1xs2"
coords = ["t", "theta", "phi"]
components = ["-1", "0", "0", "1", "0", "sin(theta)^2"]
time_function = "t"
[domain]
theta = [0, "pi"]
[working_box]
t = [-1, 1]
phi = ["-pi", "pi"]
[[identification]]
translation = ["2*pi", 0, 0]
"#;
        let s = parse_spec(text).unwrap();
        let b = s.metric.working_box();
        assert!((b[1].lo - 0.01 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(s.metric.identifications()[0].offset[0], 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn deformation_block() {
        let text = r#"
name = "flat-family"
coords = ["t", "x", "y"]
[working_box]
t = [-2, 2]
x = [-2, 2]
y = [-2, 2]
[deformation]
s_metric = ["1", "0", "1"]
alpha = ["0.3", "0"]
"#;
        let s = parse_spec(text).unwrap();
        let fam = s.deformation.unwrap();
        assert_eq!(s.metric.metric_at(&[0.0; 3]).unwrap()[(0, 0)], -1.0);
        assert_eq!(fam.alpha_at(&[0.0; 3]).unwrap()[0], 0.3);
        let bad = text.replace("\"0.3\"", "\"0.3*t\"");
        assert!(matches!(parse_spec(&bad), Err(SpecError::Deform(DeformError::TimeDependent { .. }))));
    }
}
