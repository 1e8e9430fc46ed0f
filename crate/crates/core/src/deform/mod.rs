//! The metric family `c(r) = -(1-r)dt² + r(dt⊗α + α⊗dt) + ḡ` on `ℝ_t × S`
//! and the diagnostics run on it, plus the compact-support comparison of two
//! metrics on a common chart.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::expr::{parse_expr, Expr};
use crate::geometry::{inner, ChartMetric, GeometryError, Interval, MetricField, TangentVec, TimeOrientation};
use crate::tolerances::SUPPORT_TOL;
use crate::transport::{integrate_geodesic_with, GeodesicOptions, GeodesicOutcome};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeformError {
    #[error("r = {0} is outside [0, 1]")]
    ParameterRange(f64),
    #[error("{what} must not depend on t")]
    TimeDependent { what: String },
    #[error("expected {expected} {what}, got {got}")]
    Count {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("spatial metric is not positive definite at {point:?}")]
    NotRiemannian { point: Vec<f64> },
    #[error("charts differ: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `ḡ` and `α` on `S`, with coordinate 0 of the full chart reserved for `t`.
/// All expressions are over the full coordinate list but may not use `t`.
#[derive(Clone, Debug)]
pub struct DeformationFamily {
    pub name: String,
    pub coords: Vec<String>,
    /// Upper triangle of `ḡ` in row-major order over the `n - 1` spatial coordinates.
    pub s_metric: Vec<Expr>,
    pub alpha: Vec<Expr>,
    pub domain: Vec<Interval>,
    pub working_box: Vec<Interval>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyChecks {
    /// `sup |α|_ḡ` over the samples.
    pub alpha_sup: f64,
    /// Smallest eigenvalue of `ḡ` over the samples.
    pub min_s_eigenvalue: f64,
}

impl DeformationFamily {
    pub fn new(
        name: impl Into<String>,
        coords: Vec<String>,
        s_metric: Vec<Expr>,
        alpha: Vec<Expr>,
        domain: Vec<Interval>,
        working_box: Vec<Interval>,
    ) -> Result<Self, DeformError> {
        let m = coords.len().saturating_sub(1);
        if s_metric.len() != m * (m + 1) / 2 {
            return Err(DeformError::Count {
                what: "spatial metric components",
                expected: m * (m + 1) / 2,
                got: s_metric.len(),
            });
        }
        if alpha.len() != m {
            return Err(DeformError::Count {
                what: "one-form components",
                expected: m,
                got: alpha.len(),
            });
        }
        if s_metric.iter().any(|e| e.depends_on(0)) {
            return Err(DeformError::TimeDependent {
                what: "the spatial metric".into(),
            });
        }
        if alpha.iter().any(|e| e.depends_on(0)) {
            return Err(DeformError::TimeDependent {
                what: "the one-form".into(),
            });
        }
        Ok(DeformationFamily {
            name: name.into(),
            coords,
            s_metric,
            alpha,
            domain,
            working_box,
        })
    }

    /// Flat `S = ℝ²` with `α = a·dx`, on the box `[-2, 2]³`.
    pub fn flat(a: f64) -> Self {
        Self::from_strings("flat_family", &["t", "x", "y"], &["1", "0", "1"], &[&a.to_string(), "0"])
    }

    /// Parse-from-strings convenience over an unbounded domain with box `[-2, 2]ⁿ`.
    pub fn from_strings(name: &str, coords: &[&str], s_metric: &[&str], alpha: &[&str]) -> Self {
        let coords: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let parse = |s: &&str| parse_expr(s, &coords).expect("family expressions parse");
        let n = coords.len();
        Self::new(
            name,
            coords.clone(),
            s_metric.iter().map(parse).collect(),
            alpha.iter().map(parse).collect(),
            vec![Interval::UNBOUNDED; n],
            vec![Interval::new(-2.0, 2.0); n],
        )
        .expect("well-formed family")
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn s_metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let m = self.dim() - 1;
        let mut g = DMatrix::zeros(m, m);
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                let v = self.s_metric[k]
                    .eval(p)
                    .map_err(|source| GeometryError::Component { row: i + 1, col: j + 1, source })?;
                g[(i, j)] = v;
                g[(j, i)] = v;
                k += 1;
            }
        }
        Ok(g)
    }

    pub fn alpha_at(&self, p: &[f64]) -> Result<DVector<f64>, GeometryError> {
        let mut a = DVector::zeros(self.dim() - 1);
        for (i, e) in self.alpha.iter().enumerate() {
            a[i] = e
                .eval(p)
                .map_err(|source| GeometryError::Component { row: 0, col: i + 1, source })?;
        }
        Ok(a)
    }

    /// `|α|_ḡ = √(α ḡ⁻¹ α)`.
    pub fn alpha_norm_at(&self, p: &[f64]) -> Result<f64, DeformError> {
        let g = self.s_metric_at(p)?;
        let a = self.alpha_at(p)?;
        let ginv = g
            .try_inverse()
            .ok_or_else(|| DeformError::NotRiemannian { point: p.to_vec() })?;
        Ok((a.transpose() * ginv * a)[(0, 0)].max(0.0).sqrt())
    }

    /// `ḡ` positive definite and `|α|_ḡ` at seeded box samples.
    pub fn verify(&self, samples: usize, seed: u64) -> Result<FamilyChecks, DeformError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = FamilyChecks {
            alpha_sup: 0.0,
            min_s_eigenvalue: f64::INFINITY,
        };
        for _ in 0..samples {
            let p = random_point(&self.working_box, &mut rng);
            let ev = SymmetricEigen::new(self.s_metric_at(&p)?).eigenvalues.min();
            if !(ev > 0.0) {
                return Err(DeformError::NotRiemannian { point: p });
            }
            out.min_s_eigenvalue = out.min_s_eigenvalue.min(ev);
            out.alpha_sup = out.alpha_sup.max(self.alpha_norm_at(&p)?);
        }
        Ok(out)
    }
}

fn random_point<R: Rng>(bx: &[Interval], rng: &mut R) -> Vec<f64> {
    bx.iter().map(|b| b.lo + rng.gen::<f64>() * b.width()).collect()
}

/// `c(r)` as a chart metric, time-oriented by `∂t - grad t`.
pub fn build_deformation(fam: &DeformationFamily, r: f64) -> Result<ChartMetric, DeformError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(DeformError::ParameterRange(r));
    }
    let n = fam.dim();
    let mut upper = Vec::with_capacity(n * (n + 1) / 2);
    upper.push(Expr::constant(r - 1.0));
    upper.extend(fam.alpha.iter().map(|a| a.clone().scaled(r)));
    upper.extend(fam.s_metric.iter().cloned());
    Ok(ChartMetric::new(
        format!("{}(r={r})", fam.name),
        fam.coords.clone(),
        upper,
        fam.domain.clone(),
        fam.working_box.clone(),
        vec![],
        TimeOrientation::TimeFunction(0),
        None,
    )?)
}

fn grid_points(bx: &[Interval], res: usize) -> Vec<Vec<f64>> {
    let n = bx.len();
    let res = res.max(2);
    (0..res.pow(n as u32))
        .map(|mut idx| {
            (0..n)
                .map(|i| {
                    let k = idx % res;
                    idx /= res;
                    bx[i].lo + bx[i].width() * k as f64 / (res - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// `max |∇ grad t|` (all components) over a `grid`ⁿ lattice of the box.
///
/// `∂_j (c⁻¹)^{k0} = -(c⁻¹ ∂_j c c⁻¹)^{k0}` comes from the exact metric
/// derivatives, so the residual carries no differencing error.
pub fn gradient_parallel_check(fam: &DeformationFamily, r: f64, grid: usize) -> Result<f64, DeformError> {
    let c = build_deformation(fam, r)?;
    let n = c.dim();
    let pts = grid_points(c.working_box(), grid);
    let res: Vec<Result<f64, DeformError>> = pts
        .par_iter()
        .map(|p| {
            let (g, dg) = c.metric_jet1(p)?;
            let ginv = g
                .try_inverse()
                .ok_or_else(|| GeometryError::Singular { point: p.clone(), condition: f64::INFINITY })?;
            let x = ginv.column(0).clone_owned();
            let gamma = c.christoffel_at(p)?;
            let mut worst: f64 = 0.0;
            for j in 0..n {
                let dx = -(&ginv * &dg[j] * &ginv).column(0).clone_owned();
                for k in 0..n {
                    let mut v = dx[k];
                    for i in 0..n {
                        v += gamma.get(k, j, i) * x[i];
                    }
                    worst = worst.max(v.abs());
                }
            }
            Ok(worst)
        })
        .collect();
    res.into_iter().try_fold(0.0, |m, r| Ok(f64::max(m, r?)))
}

#[derive(Clone, Debug, Serialize)]
pub struct SpeedBoundReport {
    pub r: f64,
    pub trials: usize,
    /// `max(|k̄′|_ḡ - bound, 0)` over the causal samples.
    pub max_violation: f64,
    /// Largest `|k̄′| / bound` seen (1 means a sample sat on the bound).
    pub max_ratio: f64,
    /// Smallest `c(grad t, k′)` over future causal samples.
    pub min_grad_pairing: f64,
    /// Samples that were future-directed according to the time orientation.
    pub future: usize,
    /// Draws discarded because the rounded vector tested spacelike.
    pub rejected: usize,
}

/// Random `c(r)`-causal vectors `k′ = ∂t + w` and the bound
/// `|w|_ḡ ≤ r|α| + √(r²|α|² + 1 - r)`.
///
/// Each sample picks a point, a random `ḡ`-unit direction `d`, and solves the
/// causality quadratic `s² + 2r α(d) s - (1-r) ≤ 0` directly for the largest
/// admissible `s`; the speed is drawn from `[0, s_max]`, with the endpoint
/// taken every fourth trial. Endpoint samples are pulled in by 4 ulps so the
/// floating-point vector is itself causal (`c(k′,k′) ≤ 0` exactly as
/// computed); no slack enters the comparison with the bound.
pub fn causal_speed_bound_check(
    fam: &DeformationFamily,
    r: f64,
    trials: usize,
    seed: u64,
) -> Result<SpeedBoundReport, DeformError> {
    let c = build_deformation(fam, r)?;
    let m = fam.dim() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SpeedBoundReport {
        r,
        trials: 0,
        max_violation: 0.0,
        max_ratio: 0.0,
        min_grad_pairing: f64::INFINITY,
        future: 0,
        rejected: 0,
    };
    while out.trials < trials {
        let p = random_point(fam.working_box.as_slice(), &mut rng);
        let gbar = fam.s_metric_at(&p)?;
        let alpha = fam.alpha_at(&p)?;
        let mut d = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let dd = (d.transpose() * &gbar * &d)[(0, 0)];
        if dd < 1e-12 {
            continue;
        }
        d /= dd.sqrt();
        let ad = alpha.dot(&d);
        // s² + 2 r α(d) s - (1 - r) = 0
        let s_max = -r * ad + ((r * ad).powi(2) + (1.0 - r)).sqrt();
        if !(s_max > 0.0) {
            continue; // only the zero spatial part is causal in this direction
        }
        let s = if out.trials % 4 == 0 {
            s_max * (1.0 - 4.0 * f64::EPSILON)
        } else {
            rng.gen::<f64>() * s_max
        };
        let w = &d * s;
        let k: Vec<f64> = std::iter::once(1.0).chain(w.iter().copied()).collect();
        let gm = c.metric_at(&p)?;
        if inner(&gm, &k, &k) > 0.0 {
            out.rejected += 1;
            continue;
        }
        out.trials += 1;
        let speed = (w.transpose() * &gbar * &w)[(0, 0)].sqrt();
        let a = fam.alpha_norm_at(&p)?;
        let bound = r * a + ((r * a).powi(2) + (1.0 - r)).sqrt();
        out.max_violation = out.max_violation.max(speed - bound);
        out.max_ratio = out.max_ratio.max(speed / bound);
        let t = c.orientation_at(&p)?;
        if inner(&gm, &k, t.as_slice()) < 0.0 {
            out.future += 1;
            let ginv = gm.clone().try_inverse().expect("Lorentzian");
            let grad: Vec<f64> = ginv.column(0).iter().copied().collect();
            out.min_grad_pairing = out.min_grad_pairing.min(inner(&gm, &grad, &k));
        }
    }
    out.max_violation = out.max_violation.max(0.0);
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConservationReport {
    pub r: f64,
    pub trials: usize,
    /// Max relative drift of `c(grad t, k′)` over all runs.
    pub max_drift: f64,
    /// Max relative drift of `c(k′, k′)`.
    pub max_energy_drift: f64,
    pub completed: usize,
    pub span: f64,
}

/// Integrate `trials` random future causal geodesics over `span` and track
/// `c(grad t, k′)`.
pub fn geodesic_conservation_check(
    fam: &DeformationFamily,
    r: f64,
    trials: usize,
    span: f64,
    seed: u64,
) -> Result<ConservationReport, DeformError> {
    let c = build_deformation(fam, r)?;
    let m = fam.dim() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(trials);
    while starts.len() < trials {
        let p = random_point(c.working_box(), &mut rng);
        let gbar = fam.s_metric_at(&p)?;
        let alpha = fam.alpha_at(&p)?;
        let mut d = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let dd = (d.transpose() * &gbar * &d)[(0, 0)];
        if dd < 1e-12 {
            continue;
        }
        d /= dd.sqrt();
        let ad = alpha.dot(&d);
        let s_max = -r * ad + ((r * ad).powi(2) + (1.0 - r)).sqrt();
        let s = 0.9 * rng.gen::<f64>() * s_max.max(0.0);
        let k: Vec<f64> = std::iter::once(1.0).chain(d.iter().map(|x| x * s)).collect();
        starts.push(TangentVec::new(p, k));
    }
    let opts = GeodesicOptions {
        sample_spacing: span / 200.0,
        ..GeodesicOptions::default()
    };
    let runs: Vec<Result<(f64, f64, bool), DeformError>> = starts
        .par_iter()
        .map(|v| {
            let run = integrate_geodesic_with(&c, v, span, &opts);
            let q = |x: &[f64], k: &[f64]| -> Result<f64, DeformError> {
                let gm = c.metric_at(x)?;
                let ginv = gm.clone().try_inverse().expect("Lorentzian");
                let grad: Vec<f64> = ginv.column(0).iter().copied().collect();
                Ok(inner(&gm, &grad, k))
            };
            let q0 = q(&v.base, &v.comp)?;
            let mut drift: f64 = 0.0;
            for smp in &run.samples {
                drift = drift.max((q(&smp.x, &smp.v)? - q0).abs() / q0.abs().max(1e-300));
            }
            Ok((drift, run.energy_drift, run.outcome == GeodesicOutcome::Completed))
        })
        .collect();
    let mut out = ConservationReport {
        r,
        trials,
        max_drift: 0.0,
        max_energy_drift: 0.0,
        completed: 0,
        span,
    };
    for res in runs {
        let (d, e, done) = res?;
        out.max_drift = out.max_drift.max(d);
        out.max_energy_drift = out.max_energy_drift.max(e);
        out.completed += done as usize;
    }
    Ok(out)
}

/// Causal characters of `∂t` and `grad t` for `c(r)` at one point.
#[derive(Clone, Debug, Serialize)]
pub struct TimeFieldNorms {
    pub r: f64,
    /// `c(∂t, ∂t) = -(1 - r)`.
    pub dt_norm: f64,
    /// `c(grad t, grad t) = c^{tt}`.
    pub grad_norm: f64,
}

pub fn time_field_norms(fam: &DeformationFamily, r: f64, p: &[f64]) -> Result<TimeFieldNorms, DeformError> {
    let c = build_deformation(fam, r)?;
    let gm = c.metric_at(p)?;
    let ginv = gm
        .clone()
        .try_inverse()
        .ok_or_else(|| GeometryError::Singular { point: p.to_vec(), condition: f64::INFINITY })?;
    Ok(TimeFieldNorms {
        r,
        dt_norm: gm[(0, 0)],
        grad_norm: ginv[(0, 0)],
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportReport {
    pub compact_support: bool,
    /// `sup |g₁ - g₂|` (max-norm) over grid nodes outside the core box.
    pub sup_outside: f64,
    pub nodes_outside: usize,
}

/// Whether `g₁ - g₂` vanishes outside `core_box`, on a `grid`ⁿ lattice of
/// `g₁`'s working box.
pub fn compact_support_diff(
    g1: &ChartMetric,
    g2: &ChartMetric,
    core_box: &[Interval],
    grid: usize,
) -> Result<SupportReport, DeformError> {
    if g1.dim() != g2.dim() || g1.coords() != g2.coords() {
        return Err(DeformError::Mismatch(format!(
            "coordinates {:?} vs {:?}",
            g1.coords(),
            g2.coords()
        )));
    }
    if core_box.len() != g1.dim() {
        return Err(DeformError::Mismatch("core box dimension".into()));
    }
    let mut sup: f64 = 0.0;
    let mut outside = 0;
    for p in grid_points(g1.working_box(), grid) {
        if p.iter().zip(core_box).all(|(x, b)| b.contains_closed(*x)) {
            continue;
        }
        outside += 1;
        sup = sup.max((g1.metric_at(&p)? - g2.metric_at(&p)?).amax());
    }
    Ok(SupportReport {
        compact_support: sup < SUPPORT_TOL,
        sup_outside: sup,
        nodes_outside: outside,
    })
}
