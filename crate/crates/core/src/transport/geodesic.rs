use serde::Serialize;

use crate::geometry::{inner, MetricField, TangentVec};
use crate::tolerances::{BLOWUP_SPEED, BLOWUP_STEP};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeodesicOutcome {
    Completed,
    LeftDomain { s: f64 },
    Blowup { s: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicSample {
    pub s: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `g(ẋ, ẋ)`.
    pub energy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicRun {
    pub outcome: GeodesicOutcome,
    pub samples: Vec<GeodesicSample>,
    /// `max |E - E₀| / max(|E₀|, ‖ẋ₀‖²)` over accepted steps.
    pub energy_drift: f64,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct GeodesicOptions {
    /// Local error tolerance per step, relative to `1 + ‖state‖∞`.
    pub tol: f64,
    pub blowup_speed: f64,
    pub max_step: f64,
    /// Samples are kept at parameter spacing at least this (0 keeps all).
    pub sample_spacing: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            tol: 1e-11,
            blowup_speed: BLOWUP_SPEED,
            max_step: 1.0,
            sample_spacing: 0.0,
        }
    }
}

pub fn integrate_geodesic<F: MetricField + ?Sized>(
    g: &F,
    v: &TangentVec,
    affine_span: f64,
    blowup_threshold: f64,
) -> GeodesicRun {
    let opts = GeodesicOptions {
        blowup_speed: blowup_threshold,
        sample_spacing: affine_span / 1000.0,
        ..GeodesicOptions::default()
    };
    integrate_geodesic_with(g, v, affine_span, &opts)
}

type State = Vec<f64>;

fn rhs<F: MetricField + ?Sized>(g: &F, y: &[f64]) -> Option<State> {
    let n = y.len() / 2;
    let gamma = g.christoffel_at(&y[..n]).ok()?;
    let acc = gamma.acceleration(&y[n..]);
    let mut out = Vec::with_capacity(2 * n);
    out.extend_from_slice(&y[n..]);
    out.extend(acc);
    out.iter().all(|x| x.is_finite()).then_some(out)
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> State {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn rk4_step<F: MetricField + ?Sized>(g: &F, y: &[f64], h: f64) -> Option<State> {
    let k1 = rhs(g, y)?;
    let k2 = rhs(g, &axpy(y, h / 2.0, &k1))?;
    let k3 = rhs(g, &axpy(y, h / 2.0, &k2))?;
    let k4 = rhs(g, &axpy(y, h, &k3))?;
    Some(
        (0..y.len())
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect(),
    )
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn speed(y: &[f64]) -> f64 {
    let n = y.len() / 2;
    y[n..].iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Adaptive RK4 with step doubling on `ẍ^k = -Γ^k_{ij} ẋ^i ẋ^j`.
///
/// A step that cannot be taken (the trial stage leaves the domain or hits a
/// degenerate metric) is halved; once the step collapses below
/// [`BLOWUP_STEP`] the run ends, as a blowup if the speed is huge and as
/// leaving the domain otherwise. Exceeding `blowup_speed` ends the run at once.
pub fn integrate_geodesic_with<F: MetricField + ?Sized>(
    g: &F,
    v: &TangentVec,
    affine_span: f64,
    opts: &GeodesicOptions,
) -> GeodesicRun {
    let n = v.base.len();
    let mut y: State = v.base.iter().chain(&v.comp).copied().collect();
    let energy = |y: &[f64]| g.metric_at(&y[..n]).map(|m| inner(&m, &y[n..], &y[n..])).ok();
    let e0 = match energy(&y) {
        Some(e) => e,
        None => {
            return GeodesicRun {
                outcome: GeodesicOutcome::LeftDomain { s: 0.0 },
                samples: vec![],
                energy_drift: 0.0,
                steps: 0,
            }
        }
    };
    let e_scale = e0.abs().max(v.comp.iter().map(|c| c * c).sum());
    let sample = |s: f64, y: &[f64], e: f64| GeodesicSample {
        s,
        x: y[..n].to_vec(),
        v: y[n..].to_vec(),
        energy: e,
    };
    let mut samples = vec![sample(0.0, &y, e0)];
    let mut last_sampled = 0.0;
    let mut s = 0.0;
    let mut h = opts.max_step.min(affine_span) / 16.0;
    let mut drift: f64 = 0.0;
    let mut steps = 0;
    let outcome = loop {
        if s >= affine_span {
            break GeodesicOutcome::Completed;
        }
        if speed(&y) > opts.blowup_speed {
            break GeodesicOutcome::Blowup { s };
        }
        if h < BLOWUP_STEP * s.abs().max(1.0) {
            break if speed(&y) > opts.blowup_speed.sqrt() {
                GeodesicOutcome::Blowup { s }
            } else {
                GeodesicOutcome::LeftDomain { s }
            };
        }
        let h_try = h.min(affine_span - s);
        let trial = rk4_step(g, &y, h_try).and_then(|big| {
            let half = rk4_step(g, &y, h_try / 2.0)?;
            let two = rk4_step(g, &half, h_try / 2.0)?;
            let e_new = energy(&two)?;
            Some((big, two, e_new))
        });
        let Some((big, two, e_new)) = trial else {
            h /= 4.0;
            continue;
        };
        let err = big.iter().zip(&two).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / 15.0;
        let scale = opts.tol * (1.0 + max_abs(&two));
        if err <= scale {
            s += h_try;
            y = two;
            steps += 1;
            drift = drift.max((e_new - e0).abs() / e_scale);
            if s - last_sampled >= opts.sample_spacing || s >= affine_span {
                samples.push(sample(s, &y, e_new));
                last_sampled = s;
            }
        }
        let factor = if err == 0.0 {
            2.0
        } else {
            (0.9 * (scale / err).powf(0.2)).clamp(0.2, 2.0)
        };
        h = (h_try * factor).min(opts.max_step);
    };
    GeodesicRun {
        outcome,
        samples,
        energy_drift: drift,
        steps,
    }
}

/// The same geodesic at the default tolerance and with the step halved
/// (tolerance divided by 2⁵, the RK4 error ratio, and half the step cap).
#[derive(Clone, Debug, Serialize)]
pub struct RefinementReport {
    pub coarse: GeodesicOutcome,
    pub fine: GeodesicOutcome,
    /// `|s_coarse - s_fine| / |s_fine|` when both runs end early, else 0.
    pub relative_difference: f64,
    /// Agreeing significant digits of the end parameters (capped at 16).
    pub significant_digits: f64,
    pub energy_drift: f64,
}

pub fn geodesic_refinement<F: MetricField + ?Sized>(g: &F, v: &TangentVec, affine_span: f64) -> RefinementReport {
    let base = GeodesicOptions::default();
    let fine_opts = GeodesicOptions {
        tol: base.tol / 32.0,
        max_step: base.max_step / 2.0,
        ..base
    };
    let coarse = integrate_geodesic_with(g, v, affine_span, &base);
    let fine = integrate_geodesic_with(g, v, affine_span, &fine_opts);
    let end = |o: &GeodesicOutcome| match *o {
        GeodesicOutcome::Completed => None,
        GeodesicOutcome::LeftDomain { s } | GeodesicOutcome::Blowup { s } => Some(s),
    };
    let relative_difference = match (end(&coarse.outcome), end(&fine.outcome)) {
        (Some(a), Some(b)) => (a - b).abs() / b.abs().max(f64::MIN_POSITIVE),
        (None, None) => 0.0,
        _ => 1.0,
    };
    RefinementReport {
        coarse: coarse.outcome,
        fine: fine.outcome,
        relative_difference,
        significant_digits: (-relative_difference.max(1e-16).log10()).min(16.0),
        energy_drift: coarse.energy_drift.max(fine.energy_drift),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::zoo;

    #[test]
    fn minkowski_geodesics_are_straight_lines() {
        let g = zoo::builtin("minkowski4").unwrap();
        let v = TangentVec::new(vec![0.1, 0.2, 0.3, 0.4], vec![1.0, 0.5, -0.2, 0.1]);
        let run = integrate_geodesic(&g, &v, 100.0, BLOWUP_SPEED);
        assert_eq!(run.outcome, GeodesicOutcome::Completed);
        let last = run.samples.last().unwrap();
        assert!((last.s - 100.0).abs() < 1e-9);
        for k in 0..4 {
            assert!((last.x[k] - (v.base[k] + 100.0 * v.comp[k])).abs() < 1e-9);
        }
        assert!(run.energy_drift < 1e-12);
    }

    #[test]
    fn time_lines_in_r_x_s2_complete() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let v = TangentVec::new(vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]);
        let run = integrate_geodesic(&g, &v, 1000.0, BLOWUP_SPEED);
        assert_eq!(run.outcome, GeodesicOutcome::Completed);
        let last = run.samples.last().unwrap();
        assert!((last.x[0] - 1000.0).abs() < 1e-8 && (last.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equator_is_a_great_circle() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let v = TangentVec::new(vec![0.0, FRAC_PI_2, 0.0], vec![1.0, 0.0, 0.5]);
        let run = integrate_geodesic(&g, &v, 2.0 * PI, BLOWUP_SPEED);
        let last = run.samples.last().unwrap();
        assert!((last.x[2] - PI).abs() < 1e-8 && (last.x[1] - FRAC_PI_2).abs() < 1e-10);
        assert!(run.energy_drift < 1e-9);
    }

    #[test]
    fn clifton_pohl_axis_geodesic_blows_up_at_quarter_period() {
        // y stays 1 and x = tan(s/2 + π/4), which escapes at s = π/2
        let g = zoo::builtin("clifton_pohl").unwrap();
        let v = TangentVec::new(vec![1.0, 1.0], vec![1.0, 0.0]);
        let run = integrate_geodesic(&g, &v, 10.0, BLOWUP_SPEED);
        let GeodesicOutcome::Blowup { s } = run.outcome else {
            panic!("{:?}", run.outcome)
        };
        assert!((s - FRAC_PI_2).abs() < 1e-3, "{s}");
        for smp in &run.samples {
            let want = (smp.s / 2.0 + PI / 4.0).tan();
            assert!((smp.x[0] - want).abs() < 1e-6 * (1.0 + want * want), "{} {}", smp.x[0], want);
            assert!((smp.x[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn blowup_is_stable_under_refinement() {
        let g = zoo::builtin("clifton_pohl").unwrap();
        let rep = geodesic_refinement(&g, &TangentVec::new(vec![1.0, 1.0], vec![1.0, 0.0]), 10.0);
        assert!(matches!(rep.fine, GeodesicOutcome::Blowup { .. }));
        assert!(rep.significant_digits >= 3.0, "{rep:?}");
    }

    #[test]
    fn geodesic_into_the_pole_leaves_the_domain() {
        let g = zoo::builtin("r_x_s2").unwrap();
        let v = TangentVec::new(vec![0.0, 1.0, 0.0], vec![0.0, -1.0, 0.0]);
        let run = integrate_geodesic(&g, &v, 5.0, BLOWUP_SPEED);
        let GeodesicOutcome::LeftDomain { s } = run.outcome else {
            panic!("{:?}", run.outcome)
        };
        assert!(s <= 1.0 + 1e-6 && s > 0.99, "{s}");
    }
}
