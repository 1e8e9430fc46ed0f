//! Pipelines behind the command-line subcommands and the JSON report they emit.

use serde::Serialize;
use serde_json::{json, Value};

use crate::deform::{
    causal_speed_bound_check, compact_support_diff, gradient_parallel_check, geodesic_conservation_check,
    time_field_norms, DeformError, DeformationFamily,
};
use crate::flip::{connection_coincidence, flip_metric, pointwise_nullsec_check, FlipError};
use crate::geometry::{inner, ChartMetric, GeometryError, Interval, MetricField, TangentVec};
use crate::holonomy::{
    covering_compare, eigen_moduli, fixed_subspace, haar_average_vector, holonomy_algebra_dim, orthonormal_parallel_system,
    parallel_field_extend, precompactness_verdict, relative_holonomy, sample_holonomy, HolonomyError,
    HolonomySample, HolonomyVerdict, VerdictKind,
};
use crate::tolerances::{ToleranceTable, PARALLEL_RESIDUAL};
use crate::transport::{geodesic_refinement, integrate_geodesic_with, GeodesicOptions};

pub const SCHEMA: &str = "holab-report/1";
pub const DEFAULT_SPAN: f64 = 1000.0;
/// Haar averaging: words of length up to this many letters.
pub const AVERAGE_WORD_LEN: usize = 8;
pub const AVERAGE_SAMPLES: usize = 10_000;
pub const NULLSEC_SAMPLES: usize = 200;
pub const SPEED_TRIALS: usize = 10_000;
pub const CONSERVATION_TRIALS: usize = 8;
pub const R_VALUES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Holonomy,
    ParallelVector,
    ParallelSystem,
    RelativeHolonomy,
    Covering,
    Flip,
    Nullsec,
    Geodesic,
    Deform,
    DiffSupport,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Holonomy => "holonomy",
            Command::ParallelVector => "parallel-vector",
            Command::ParallelSystem => "parallel-system",
            Command::RelativeHolonomy => "relative-holonomy",
            Command::Covering => "covering",
            Command::Flip => "flip",
            Command::Nullsec => "nullsec",
            Command::Geodesic => "geodesic",
            Command::Deform => "deform",
            Command::DiffSupport => "diff-support",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Holonomy(#[from] HolonomyError),
    #[error(transparent)]
    Flip(#[from] FlipError),
    #[error(transparent)]
    Deform(#[from] DeformError),
}

/// Everything a pipeline may need beyond the metric.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub budget: usize,
    pub point: Option<Vec<f64>>,
    pub vector: Option<Vec<f64>>,
    pub r: Option<f64>,
    pub grid: Option<usize>,
    pub span: f64,
    /// Coordinates held constant for `relative-holonomy`.
    pub slice: Option<Vec<usize>>,
    /// Second metric for `diff-support`.
    pub other: Option<ChartMetric>,
    pub core_box: Option<Vec<Interval>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            budget: 50,
            point: None,
            vector: None,
            r: None,
            grid: None,
            span: DEFAULT_SPAN,
            slice: None,
            other: None,
            core_box: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Unconverged,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    pub metric: String,
    pub coords: Vec<String>,
    pub seed: u64,
    pub budget: usize,
    /// The sampled region every verdict is qualified by.
    pub working_box: Vec<[f64; 2]>,
    pub notes: Vec<String>,
    pub tolerances: ToleranceTable,
    pub status: Status,
    /// Why the status is `unconverged`, if it is.
    pub unconverged: Vec<String>,
    pub results: Value,
}

impl Report {
    pub fn to_json(&self, indent: usize) -> String {
        if indent == 0 {
            return serde_json::to_string(self).expect("report serializes");
        }
        let pad = vec![b' '; indent];
        let mut out = Vec::new();
        let fmt = serde_json::ser::PrettyFormatter::with_indent(&pad);
        let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
        self.serialize(&mut ser).expect("report serializes");
        String::from_utf8(out).expect("utf-8")
    }
}

const CONVENTIONS: &str = "signature (-,+,...,+); R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_[X,Y] Z; \
sectional curvature of the round sphere is +1; a vector v is future iff g(v, T) < 0 for the time orientation T";
const REGION: &str = "all verdicts hold on the sampled region (the working box) and relative to the sampled loops";
const COMPACTNESS: &str = "compactness (as opposed to precompactness) of the holonomy group under finite fundamental \
group: not decidable numerically";
const COEFFICIENT: &str = "deformation family c(r) = -(1-r) dt² + r (dt⊗α + α⊗dt) + ḡ: the time coefficient is read as \
-(1-r); a printed -(1-t) would make c(r) depend on t and contradict the stated causal speed bound";
const GRAD_T: &str = "grad t = c(r)⁻¹ dt satisfies c(grad t, grad t) = 1/(-(1-r) - r²|α|²), which is -1/|α|² < 0 at r = 1: \
it stays timelike; the field that becomes null at r = 1 is ∂t (c(∂t, ∂t) = -(1-r)). Both are reported";

struct Ctx<'a> {
    g: &'a ChartMetric,
    opts: &'a RunOptions,
    unconverged: Vec<String>,
    notes: Vec<String>,
}

impl Ctx<'_> {
    fn point(&self) -> Result<Vec<f64>, RunError> {
        let p = self.opts.point.clone().unwrap_or_else(|| self.g.base_point().to_vec());
        if p.len() != self.g.dim() {
            return Err(RunError::Input(format!(
                "--point needs {} coordinates, got {}",
                self.g.dim(),
                p.len()
            )));
        }
        if !self.g.in_domain(&p) {
            return Err(RunError::Input(format!("point {p:?} lies outside the domain")));
        }
        Ok(p)
    }

    /// `--vector`, else the time orientation at `p`.
    fn vector_at(&self, p: &[f64]) -> Result<Vec<f64>, RunError> {
        match &self.opts.vector {
            Some(v) if v.len() != self.g.dim() => Err(RunError::Input(format!(
                "--vector needs {} components, got {}",
                self.g.dim(),
                v.len()
            ))),
            Some(v) => Ok(v.clone()),
            None => Ok(self.g.orientation_at(p)?.iter().copied().collect()),
        }
    }

    fn sample(&mut self, base: &[f64]) -> Result<HolonomySample, RunError> {
        let s = sample_holonomy(self.g, base, self.opts.budget, self.opts.seed)?;
        for d in &s.dropped {
            if d.reason.starts_with("unconverged") {
                self.unconverged.push(format!("holonomy loop dropped: {}", d.reason));
            }
        }
        Ok(s)
    }
}

fn sample_json(s: &HolonomySample) -> Value {
    let generators: Vec<Value> = s
        .generators
        .iter()
        .map(|gen| {
            let moduli = eigen_moduli(&gen.matrix);
            json!({ "loop": gen.descriptor, "err_est": gen.err_est, "eigen_moduli": moduli })
        })
        .collect();
    json!({ "base": s.base, "generators": generators, "dropped": s.dropped })
}

fn holonomy_json(ctx: &mut Ctx, s: &HolonomySample) -> (HolonomyVerdict, Value) {
    let verdict = precompactness_verdict(Some(ctx.g), s);
    let f = fixed_subspace(s);
    let k = orthonormal_parallel_system(Some(ctx.g), s).map(|p| p.k).unwrap_or(0);
    let algebra = holonomy_algebra_dim(s);
    let v = json!({
        "sample": sample_json(s),
        "fixed_subspace": { "dim": f.dim(), "singular_values": f.singular_values, "cut": f.cut },
        "verdict": verdict,
        "k": k,
        "algebra": algebra,
    });
    (verdict, v)
}

fn holonomy(ctx: &mut Ctx) -> Result<Value, RunError> {
    let p = ctx.point()?;
    let s = ctx.sample(&p)?;
    Ok(holonomy_json(ctx, &s).1)
}

fn parallel_vector(ctx: &mut Ctx) -> Result<Value, RunError> {
    let p = ctx.point()?;
    let s = ctx.sample(&p)?;
    let v0 = TangentVec::new(p.clone(), ctx.vector_at(&p)?);
    let avg = haar_average_vector(&s, &v0, AVERAGE_WORD_LEN, AVERAGE_SAMPLES, ctx.opts.seed);
    let mut out = json!({ "v0": v0, "average": avg });
    match &avg.vector {
        Some(w) => {
            let field = parallel_field_extend(ctx.g, w, ctx.opts.grid.unwrap_or(3))?;
            if !(field.path_independence_residual < PARALLEL_RESIDUAL) {
                ctx.unconverged.push(format!(
                    "parallel extension is path dependent (residual {:.3e})",
                    field.path_independence_residual
                ));
            }
            out["field"] = json!({
                "resolution": field.resolution,
                "nodes": field.nodes.len(),
                "path_independence_residual": field.path_independence_residual,
            });
        }
        None => ctx
            .unconverged
            .push(format!("averaging did not reach an invariant vector (residual {:.3e})", avg.residual)),
    }
    Ok(out)
}

fn parallel_system(ctx: &mut Ctx) -> Result<Value, RunError> {
    let p = ctx.point()?;
    let s = ctx.sample(&p)?;
    match orthonormal_parallel_system(Some(ctx.g), &s) {
        Ok(sys) => Ok(json!({ "k": sys.k, "frame": sys.frame, "orthonormality_residual": sys.orthonormality_residual })),
        Err(HolonomyError::NotPrecompact(kind)) => Ok(json!({ "k": 0, "verdict": kind })),
        Err(e) => Err(e.into()),
    }
}

fn relative(ctx: &mut Ctx) -> Result<Value, RunError> {
    let p = ctx.point()?;
    let slice = ctx
        .opts
        .slice
        .clone()
        .ok_or_else(|| RunError::Input("relative-holonomy needs --slice (coordinates held constant)".into()))?;
    let rel = relative_holonomy(ctx.g, &slice, &p, ctx.opts.budget, ctx.opts.seed)?;
    Ok(json!({ "slice": slice, "sample": sample_json(&rel.sample), "relative": rel }))
}

fn covering(ctx: &mut Ctx) -> Result<Value, RunError> {
    if ctx.g.identifications().is_empty() {
        return Err(RunError::Input(format!("{} declares no identifications", ctx.g.name)));
    }
    let rep = covering_compare(ctx.g, ctx.opts.budget, ctx.opts.seed)?;
    if !rep.embedded {
        ctx.notes
            .push(format!("cover generators did not embed (error {:.3e})", rep.embedding_error));
    }
    Ok(serde_json::to_value(rep).expect("serializes"))
}

fn flip_from(ctx: &mut Ctx, verdict: &HolonomyVerdict, grid: usize) -> Result<Value, RunError> {
    let w = match (&verdict.kind, &verdict.witness) {
        (VerdictKind::PrecompactTimelike, Some(w)) => w.clone(),
        _ => {
            return Err(RunError::Input(format!(
                "no parallel timelike vector: verdict {:?}",
                verdict.kind
            )))
        }
    };
    let (fm, residual) = flip_metric(ctx.g, &w, grid)?;
    let deviation = connection_coincidence(ctx.g, &fm, ctx.g.working_box(), grid)?;
    let checks = fm.check(NULLSEC_SAMPLES, ctx.opts.seed, residual)?;
    Ok(json!({ "field": w, "grid": grid, "flip_deviation": deviation, "checks": checks }))
}

fn flip(ctx: &mut Ctx) -> Result<Value, RunError> {
    let p = ctx.point()?;
    let s = ctx.sample(&p)?;
    let verdict = precompactness_verdict(Some(ctx.g), &s);
    flip_from(ctx, &verdict, ctx.opts.grid.unwrap_or(5))
}

fn unit_timelike(g: &ChartMetric, p: &[f64], u: &[f64]) -> Result<Vec<f64>, RunError> {
    let gm = g.metric_at(p)?;
    let n = inner(&gm, u, u);
    if !(n < 0.0) {
        return Err(RunError::Input(format!("U = {u:?} is not timelike (g(U,U) = {n})")));
    }
    Ok(u.iter().map(|c| c / (-n).sqrt()).collect())
}

fn nullsec_at(ctx: &Ctx, p: &[f64], u: &[f64]) -> Result<Value, RunError> {
    let u = unit_timelike(ctx.g, p, u)?;
    let rep = pointwise_nullsec_check(ctx.g, p, &u, NULLSEC_SAMPLES, ctx.opts.seed)?;
    Ok(json!({ "point": p, "U": u, "pointwise": rep }))
}

fn nullsec(ctx: &mut Ctx) -> Result<Value, RunError> {
    let p = ctx.point()?;
    let u = ctx.vector_at(&p)?;
    nullsec_at(ctx, &p, &u)
}

fn geodesic_at(ctx: &Ctx, p: &[f64], v: Vec<f64>) -> Value {
    let tv = TangentVec::new(p.to_vec(), v);
    let opts = GeodesicOptions {
        sample_spacing: ctx.opts.span / 100.0,
        ..GeodesicOptions::default()
    };
    let run = integrate_geodesic_with(ctx.g, &tv, ctx.opts.span, &opts);
    let refinement = geodesic_refinement(ctx.g, &tv, ctx.opts.span);
    json!({
        "initial": tv,
        "span": ctx.opts.span,
        "outcome": run.outcome,
        "energy_drift": run.energy_drift,
        "steps": run.steps,
        "samples": run.samples,
        "refinement": refinement,
    })
}

fn geodesic(ctx: &mut Ctx) -> Result<Value, RunError> {
    let p = ctx.point()?;
    let v = ctx.vector_at(&p)?;
    Ok(geodesic_at(ctx, &p, v))
}

fn deform_json(ctx: &mut Ctx, fam: &DeformationFamily) -> Result<Value, RunError> {
    ctx.notes.push(COEFFICIENT.into());
    ctx.notes.push(GRAD_T.into());
    ctx.notes
        .push("Cauchy-time property checked through its proxies only: gradient pairing and causal speed bound".into());
    let rs: Vec<f64> = match ctx.opts.r {
        Some(r) => vec![r],
        None => R_VALUES.to_vec(),
    };
    let grid = ctx.opts.grid.unwrap_or(4);
    let checks = fam.verify(NULLSEC_SAMPLES, ctx.opts.seed)?;
    let mid: Vec<f64> = fam.working_box.iter().map(Interval::mid).collect();
    let mut per_r = Vec::new();
    for r in rs {
        per_r.push(json!({
            "r": r,
            "gradient_parallel_residual": gradient_parallel_check(fam, r, grid)?,
            "norms_at_centre": time_field_norms(fam, r, &mid)?,
            "speed_bound": causal_speed_bound_check(fam, r, SPEED_TRIALS, ctx.opts.seed)?,
            "conservation": geodesic_conservation_check(fam, r, CONSERVATION_TRIALS, ctx.opts.span, ctx.opts.seed)?,
        }));
    }
    Ok(json!({ "family": fam.name, "checks": checks, "grid": grid, "r_values": per_r }))
}

fn diff_support(ctx: &mut Ctx) -> Result<Value, RunError> {
    let other = ctx
        .opts
        .other
        .as_ref()
        .ok_or_else(|| RunError::Input("diff-support needs a second metric".into()))?;
    let core = ctx.opts.core_box.clone().unwrap_or_else(|| {
        ctx.g
            .working_box()
            .iter()
            .map(|b| Interval::new(b.mid() - b.width() / 4.0, b.mid() + b.width() / 4.0))
            .collect()
    });
    let rep = compact_support_diff(ctx.g, other, &core, ctx.opts.grid.unwrap_or(21))?;
    let core: Vec<[f64; 2]> = core.iter().map(|b| [b.lo, b.hi]).collect();
    Ok(json!({ "other": other.name, "core_box": core, "support": rep }))
}

fn everything(ctx: &mut Ctx, fam: Option<&DeformationFamily>) -> Result<Value, RunError> {
    let p = ctx.point()?;
    let s = ctx.sample(&p)?;
    let (verdict, hol) = holonomy_json(ctx, &s);
    let mut out = json!({ "holonomy": hol });
    if let (VerdictKind::PrecompactTimelike, Some(w)) = (&verdict.kind, &verdict.witness) {
        out["flip"] = flip_from(ctx, &verdict, ctx.opts.grid.unwrap_or(3))?;
        out["nullsec"] = nullsec_at(ctx, &p, &w.comp)?;
    }
    let t: Vec<f64> = ctx.g.orientation_at(&p)?.iter().copied().collect();
    out["completeness_probe"] = geodesic_at(ctx, &p, unit_timelike(ctx.g, &p, &t)?);
    if !ctx.g.identifications().is_empty() {
        out["covering"] = covering(ctx)?;
    }
    if let Some(fam) = fam {
        out["deformation"] = deform_json(ctx, fam)?;
    }
    Ok(out)
}

/// Run one pipeline. Input problems are errors; numerical shortfalls are
/// reported through [`Report::status`].
pub fn run_report(
    g: &ChartMetric,
    family: Option<&DeformationFamily>,
    command: Command,
    opts: &RunOptions,
) -> Result<Report, RunError> {
    if let Some(r) = opts.r {
        if !(0.0..=1.0).contains(&r) {
            return Err(DeformError::ParameterRange(r).into());
        }
    }
    let mut ctx = Ctx {
        g,
        opts,
        unconverged: vec![],
        notes: vec![CONVENTIONS.into(), REGION.into()],
    };
    let results = match command {
        Command::Holonomy => {
            ctx.notes.push(COMPACTNESS.into());
            holonomy(&mut ctx)?
        }
        Command::ParallelVector => parallel_vector(&mut ctx)?,
        Command::ParallelSystem => parallel_system(&mut ctx)?,
        Command::RelativeHolonomy => relative(&mut ctx)?,
        Command::Covering => covering(&mut ctx)?,
        Command::Flip => flip(&mut ctx)?,
        Command::Nullsec => nullsec(&mut ctx)?,
        Command::Geodesic => geodesic(&mut ctx)?,
        Command::Deform => {
            let fam = family.ok_or_else(|| {
                RunError::Input(format!("{} carries no deformation family", g.name))
            })?;
            deform_json(&mut ctx, fam)?
        }
        Command::DiffSupport => diff_support(&mut ctx)?,
        Command::Report => {
            ctx.notes.push(COMPACTNESS.into());
            everything(&mut ctx, family)?
        }
    };
    Ok(Report {
        schema: SCHEMA,
        tool: "holab",
        version: env!("CARGO_PKG_VERSION"),
        command,
        metric: g.name.clone(),
        coords: g.coords().to_vec(),
        seed: opts.seed,
        budget: opts.budget,
        working_box: g.working_box().iter().map(|b| [b.lo, b.hi]).collect(),
        notes: ctx.notes,
        tolerances: ToleranceTable::default(),
        status: if ctx.unconverged.is_empty() { Status::Ok } else { Status::Unconverged },
        unconverged: ctx.unconverged,
        results,
    })
}
