//! Built-in example metrics.
//!
//! | name           | metric                                   | identifications        |
//! |----------------|------------------------------------------|------------------------|
//! | `minkowski2`   | `-dt² + dx²`                             | none                   |
//! | `minkowski4`   | `-dt² + dx² + dy² + dz²`                 | none                   |
//! | `clifton_pohl` | `2 dx dy / (x² + y²)` on the open quadrant | `(x,y) ↦ (2x, 2y)`    |
//! | `r_x_s2`       | `-dt² + dθ² + sin²θ dφ²`                 | none                   |
//! | `r_x_s3`       | `-dt² + dχ² + sin²χ (dθ² + sin²θ dφ²)`   | none                   |
//! | `s1_x_s2`      | as `r_x_s2`                              | `t ↦ t + 2π`           |
//! | `flat_torus2`  | `-dt² + dx²`                             | `t ↦ t + 2`, `x ↦ x + 2` |
//! | `rt_rx_s2`     | `-dt² + dx² + dθ² + sin²θ dφ²`           | none                   |
//!
//! Sphere factors use polar coordinates; `φ` is left unwrapped, so those
//! charts cover the universal cover of the sphere minus its poles.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use crate::deform::DeformationFamily;
use crate::expr::parse_expr;
use crate::geometry::{ChartMetric, GeometryError, Identification, Interval, TimeOrientation};

pub const BUILTIN_NAMES: [&str; 8] = [
    "minkowski2",
    "minkowski4",
    "clifton_pohl",
    "r_x_s2",
    "r_x_s3",
    "s1_x_s2",
    "flat_torus2",
    "rt_rx_s2",
];

#[derive(Debug, thiserror::Error)]
pub enum ZooError {
    #[error("unknown builtin `{name}`; available: {}", BUILTIN_NAMES.join(", "))]
    Unknown { name: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

struct Recipe<'a> {
    coords: &'a [&'a str],
    upper: &'a [&'a str],
    domain: Vec<Interval>,
    working_box: Vec<Interval>,
    identifications: Vec<Identification>,
    orientation: &'a [&'a str],
    base: Vec<f64>,
}

fn assemble(name: &str, r: Recipe<'_>) -> Result<ChartMetric, ZooError> {
    let coords: Vec<String> = r.coords.iter().map(|s| s.to_string()).collect();
    let parse = |s: &str| parse_expr(s, &coords).expect("builtin expressions parse");
    let upper = r.upper.iter().map(|s| parse(s)).collect();
    let orientation = r.orientation.iter().map(|s| parse(s)).collect();
    Ok(ChartMetric::new(
        name,
        coords.clone(),
        upper,
        r.domain,
        r.working_box,
        r.identifications,
        TimeOrientation::Field(orientation),
        Some(r.base),
    )?)
}

fn sphere_box() -> Interval {
    Interval::new(FRAC_PI_2 - 1.2, FRAC_PI_2 + 1.2)
}

fn polar() -> Interval {
    Interval::new(0.0, PI)
}

fn r_x_s2(name: &str, identifications: Vec<Identification>) -> Result<ChartMetric, ZooError> {
    assemble(
        name,
        Recipe {
            coords: &["t", "theta", "phi"],
            upper: &["-1", "0", "0", "1", "0", "sin(theta)^2"],
            domain: vec![Interval::UNBOUNDED, polar(), Interval::UNBOUNDED],
            working_box: vec![Interval::new(-1.0, 1.0), sphere_box(), Interval::new(-PI, PI)],
            identifications,
            orientation: &["1", "0", "0"],
            base: vec![0.0, FRAC_PI_2, 0.0],
        },
    )
}

fn minkowski2(name: &str, identifications: Vec<Identification>) -> Result<ChartMetric, ZooError> {
    assemble(
        name,
        Recipe {
            coords: &["t", "x"],
            upper: &["-1", "0", "1"],
            domain: vec![Interval::UNBOUNDED; 2],
            working_box: vec![Interval::new(-5.0, 5.0); 2],
            identifications,
            orientation: &["1", "0"],
            base: vec![0.0, 0.0],
        },
    )
}

/// One of the [`BUILTIN_NAMES`] metrics.
pub fn builtin(name: &str) -> Result<ChartMetric, ZooError> {
    match name {
        "minkowski2" => minkowski2(name, vec![]),
        "flat_torus2" => minkowski2(
            name,
            vec![
                Identification::translation(&[2.0, 0.0]),
                Identification::translation(&[0.0, 2.0]),
            ],
        ),
        "minkowski4" => assemble(
            name,
            Recipe {
                coords: &["t", "x", "y", "z"],
                upper: &["-1", "0", "0", "0", "1", "0", "0", "1", "0", "1"],
                domain: vec![Interval::UNBOUNDED; 4],
                working_box: vec![Interval::new(-5.0, 5.0); 4],
                identifications: vec![],
                orientation: &["1", "0", "0", "0"],
                base: vec![0.0; 4],
            },
        ),
        "clifton_pohl" => assemble(
            name,
            Recipe {
                coords: &["x", "y"],
                upper: &["0", "1/(x^2+y^2)", "0"],
                domain: vec![Interval::new(0.0, f64::INFINITY); 2],
                working_box: vec![Interval::new(0.25, 4.25); 2],
                identifications: vec![Identification::linear(
                    DMatrix::from_diagonal_element(2, 2, 2.0),
                    &[0.0, 0.0],
                )],
                orientation: &["1", "-1"],
                base: vec![1.0, 0.5],
            },
        ),
        "r_x_s2" => r_x_s2(name, vec![]),
        "s1_x_s2" => r_x_s2(name, vec![Identification::translation(&[2.0 * PI, 0.0, 0.0])]),
        "r_x_s3" => assemble(
            name,
            Recipe {
                coords: &["t", "chi", "theta", "phi"],
                upper: &[
                    "-1",
                    "0",
                    "0",
                    "0",
                    "1",
                    "0",
                    "0",
                    "sin(chi)^2",
                    "0",
                    "sin(chi)^2*sin(theta)^2",
                ],
                domain: vec![Interval::UNBOUNDED, polar(), polar(), Interval::UNBOUNDED],
                working_box: vec![
                    Interval::new(-1.0, 1.0),
                    sphere_box(),
                    sphere_box(),
                    Interval::new(-PI, PI),
                ],
                identifications: vec![],
                orientation: &["1", "0", "0", "0"],
                base: vec![0.0, FRAC_PI_2, FRAC_PI_2, 0.0],
            },
        ),
        "rt_rx_s2" => assemble(
            name,
            Recipe {
                coords: &["t", "x", "theta", "phi"],
                upper: &["-1", "0", "0", "0", "1", "0", "0", "1", "0", "sin(theta)^2"],
                domain: vec![Interval::UNBOUNDED, Interval::UNBOUNDED, polar(), Interval::UNBOUNDED],
                working_box: vec![
                    Interval::new(-1.0, 1.0),
                    Interval::new(-1.0, 1.0),
                    sphere_box(),
                    Interval::new(-PI, PI),
                ],
                identifications: vec![],
                orientation: &["1", "0", "0", "0"],
                base: vec![0.0, 0.0, FRAC_PI_2, 0.0],
            },
        ),
        _ => Err(ZooError::Unknown {
            name: name.to_string(),
        }),
    }
}

/// Built-in deformation families `(ḡ, α)` on `ℝ_t × S`.
///
/// | name            | `S`                    | `α`          |
/// |-----------------|------------------------|--------------|
/// | `flat_family`   | flat `ℝ²`              | `0.3 dx`     |
/// | `twisted_family`| flat `ℝ²`              | `0.3 y dx`   |
pub const FAMILY_NAMES: [&str; 2] = ["flat_family", "twisted_family"];

pub fn family(name: &str) -> Option<DeformationFamily> {
    match name {
        "flat_family" => Some(DeformationFamily::flat(0.3)),
        "twisted_family" => Some(DeformationFamily::from_strings(
            name,
            &["t", "x", "y"],
            &["1", "0", "1"],
            &["0.3*y", "0"],
        )),
        _ => None,
    }
}

/// Every builtin, in [`BUILTIN_NAMES`] order.
pub fn all() -> Vec<ChartMetric> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n).expect("builtins are valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_validates() {
        for g in all() {
            g.validate(500, 7).unwrap_or_else(|e| panic!("{}: {e}", g.name));
        }
    }

    #[test]
    fn unknown_name_lists_available() {
        let msg = builtin("wilking5").unwrap_err().to_string();
        assert!(msg.contains("clifton_pohl") && msg.contains("rt_rx_s2"), "{msg}");
    }

    #[test]
    fn families_exist() {
        for n in FAMILY_NAMES {
            family(n).unwrap().verify(50, 1).unwrap();
        }
        assert!(family("minkowski2").is_none());
    }

    #[test]
    fn minkowski2_box() {
        let g = builtin("minkowski2").unwrap();
        assert_eq!(g.working_box(), &[Interval::new(-5.0, 5.0); 2]);
    }
}
