use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{inner, inverse_checked, Christoffel, GeometryError, MetricField, Riemann};
use crate::expr::{packed, Expr, Func, Jet1, Jet2, NamedConst, MAX_DIM};

/// Open coordinate interval; either end may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains_open(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentificationKind {
    Translation,
    Linear,
}

/// Affine deck map `x ↦ A x + b` realizing a quotient of the chart.
#[derive(Clone, Debug, PartialEq)]
pub struct Identification {
    pub kind: IdentificationKind,
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl Identification {
    pub fn translation(offset: &[f64]) -> Self {
        let n = offset.len();
        Identification {
            kind: IdentificationKind::Translation,
            matrix: DMatrix::identity(n, n),
            offset: DVector::from_column_slice(offset),
        }
    }

    pub fn linear(matrix: DMatrix<f64>, offset: &[f64]) -> Self {
        Identification {
            kind: IdentificationKind::Linear,
            matrix,
            offset: DVector::from_column_slice(offset),
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y = &self.matrix * DVector::from_column_slice(x) + &self.offset;
        y.iter().copied().collect()
    }

    /// Inverse of the linear part (the inverse differential).
    pub fn inverse_differential(&self) -> Option<DMatrix<f64>> {
        self.matrix.clone().try_inverse()
    }

    /// Largest entry of `Aᵀ g(φ(x)) A - g(x)` over `samples` random box points
    /// whose image stays in the domain. Points with no in-domain image are skipped.
    pub fn isometry_defect(&self, g: &ChartMetric, samples: usize, seed: u64) -> Result<f64, GeometryError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = g.random_box_point(&mut rng);
            let y = self.apply(&x);
            if !g.in_domain(&y) {
                continue;
            }
            let gx = g.metric_at(&x)?;
            let gy = g.metric_at(&y)?;
            let pulled = self.matrix.transpose() * gy * &self.matrix;
            let scale = 1.0 + gx.amax();
            worst = worst.max((pulled - gx).amax() / scale);
        }
        Ok(worst)
    }
}

/// How "future" is decided.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeOrientation {
    /// A timelike vector field given by one expression per coordinate.
    Field(Vec<Expr>),
    /// Coordinate `i` is a time function; the orientation field is
    /// `∂_i - grad x^i`, future-directed and timelike whenever `∂_i` is causal
    /// and `grad x^i` is causal.
    TimeFunction(usize),
}

/// A Lorentzian metric on a coordinate box with optional affine identifications.
#[derive(Clone, Debug)]
pub struct ChartMetric {
    pub name: String,
    coords: Vec<String>,
    /// Packed upper triangle, so `(i,j)` and `(j,i)` share one tree.
    components: Vec<Expr>,
    domain: Vec<Interval>,
    working_box: Vec<Interval>,
    identifications: Vec<Identification>,
    time_orientation: TimeOrientation,
    base_point: Vec<f64>,
}

fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

impl ChartMetric {
    /// Assemble a chart metric. `upper` lists the upper triangle row by row.
    ///
    /// Only structural checks happen here; call [`ChartMetric::validate`] for
    /// the sampled signature, orientation and isometry checks.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        coords: Vec<String>,
        upper: Vec<Expr>,
        domain: Vec<Interval>,
        working_box: Vec<Interval>,
        identifications: Vec<Identification>,
        time_orientation: TimeOrientation,
        base_point: Option<Vec<f64>>,
    ) -> Result<Self, GeometryError> {
        let n = coords.len();
        let invalid = |msg: String| Err(GeometryError::Invalid(msg));
        if !(2..=MAX_DIM).contains(&n) {
            return invalid(format!("dimension {n} outside 2..={MAX_DIM}"));
        }
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].contains(c) {
                return invalid(format!("duplicate coordinate `{c}`"));
            }
            if NamedConst::from_name(c).is_some() || Func::from_name(c).is_some() {
                return invalid(format!("coordinate name `{c}` is reserved"));
            }
        }
        if upper.len() != tri_len(n) {
            return invalid(format!(
                "expected {} upper-triangle components, got {}",
                tri_len(n),
                upper.len()
            ));
        }
        if upper.iter().any(|e| e.max_var().is_some_and(|v| v >= n)) {
            return invalid("component refers to an unknown coordinate".into());
        }
        if domain.len() != n || working_box.len() != n {
            return invalid("domain and working box need one interval per coordinate".into());
        }
        for (k, (d, b)) in domain.iter().zip(&working_box).enumerate() {
            if !(d.lo < d.hi) {
                return invalid(format!("empty domain interval for `{}`", coords[k]));
            }
            if !b.is_finite() || !(b.lo < b.hi) {
                return invalid(format!("working box for `{}` must be finite and nonempty", coords[k]));
            }
            if !(b.lo > d.lo && b.hi < d.hi) {
                return invalid(format!("working box for `{}` must lie inside the open domain", coords[k]));
            }
        }
        for (k, id) in identifications.iter().enumerate() {
            if id.dim() != n || id.matrix.nrows() != n || id.matrix.ncols() != n {
                return invalid(format!("identification {k} has the wrong dimension"));
            }
            if id.inverse_differential().is_none() {
                return invalid(format!("identification {k} is not invertible"));
            }
        }
        match &time_orientation {
            TimeOrientation::Field(f) if f.len() != n => {
                return invalid("time orientation needs one component per coordinate".into())
            }
            TimeOrientation::TimeFunction(i) if *i >= n => {
                return invalid("time function index out of range".into())
            }
            _ => {}
        }
        let base_point = match base_point {
            Some(p) => {
                if p.len() != n || p.iter().zip(&working_box).any(|(x, b)| !b.contains_closed(*x)) {
                    return invalid("base point must lie in the working box".into());
                }
                p
            }
            None => working_box.iter().map(Interval::mid).collect(),
        };
        Ok(ChartMetric {
            name: name.into(),
            coords,
            components: upper,
            domain,
            working_box,
            identifications,
            time_orientation,
            base_point,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.components[upper_index(self.dim(), i, j)]
    }

    pub fn upper_components(&self) -> &[Expr] {
        &self.components
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn working_box(&self) -> &[Interval] {
        &self.working_box
    }

    pub fn identifications(&self) -> &[Identification] {
        &self.identifications
    }

    pub fn time_orientation(&self) -> &TimeOrientation {
        &self.time_orientation
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    /// Same metric with every identification removed (the covering chart).
    pub fn without_identifications(&self) -> ChartMetric {
        let mut out = self.clone();
        out.identifications.clear();
        out.name = format!("{} (cover)", self.name);
        out
    }

    pub fn with_working_box(&self, working_box: Vec<Interval>) -> Result<ChartMetric, GeometryError> {
        ChartMetric::new(
            self.name.clone(),
            self.coords.clone(),
            self.components.clone(),
            self.domain.clone(),
            working_box,
            self.identifications.clone(),
            self.time_orientation.clone(),
            None,
        )
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(&self.domain).all(|(x, d)| d.contains_open(*x))
    }

    pub fn in_box(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(&self.working_box).all(|(x, b)| b.contains_closed(*x))
    }

    fn check_domain(&self, p: &[f64]) -> Result<(), GeometryError> {
        if self.in_domain(p) {
            Ok(())
        } else {
            Err(GeometryError::OutsideDomain { point: p.to_vec() })
        }
    }

    pub fn random_box_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.working_box
            .iter()
            .map(|b| b.lo + rng.gen::<f64>() * b.width())
            .collect()
    }

    fn component_err(&self, k: usize, source: crate::expr::EvalError) -> GeometryError {
        let n = self.dim();
        let (mut row, mut col) = (0, 0);
        for i in 0..n {
            for j in i..n {
                if upper_index(n, i, j) == k {
                    (row, col) = (i, j);
                }
            }
        }
        GeometryError::Component { row, col, source }
    }

    /// Metric components at `p` and their first partial derivatives `dg[m][(a,b)]`.
    pub fn metric_jet1(&self, p: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>), GeometryError> {
        self.check_domain(p)?;
        let n = self.dim();
        let vars: Vec<Jet1> = p.iter().enumerate().map(|(i, &x)| Jet1::variable(x, i)).collect();
        let mut g = DMatrix::zeros(n, n);
        let mut dg = vec![DMatrix::zeros(n, n); n];
        for i in 0..n {
            for j in i..n {
                let k = upper_index(n, i, j);
                let e = &self.components[k];
                let jet = if let Expr::Const(c) = e {
                    Jet1 { value: *c, grad: [0.0; MAX_DIM] }
                } else {
                    e.eval_with(&vars).map_err(|s| self.component_err(k, s))?
                };
                g[(i, j)] = jet.value;
                g[(j, i)] = jet.value;
                for (m, d) in dg.iter_mut().enumerate() {
                    d[(i, j)] = jet.grad[m];
                    d[(j, i)] = jet.grad[m];
                }
            }
        }
        Ok((g, dg))
    }

    /// Metric with first and second partial derivatives.
    #[allow(clippy::type_complexity)]
    pub fn metric_jet2(
        &self,
        p: &[f64],
    ) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>, Vec<Vec<DMatrix<f64>>>), GeometryError> {
        self.check_domain(p)?;
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        let mut dg = vec![DMatrix::zeros(n, n); n];
        let mut ddg = vec![vec![DMatrix::zeros(n, n); n]; n];
        let vars: Vec<Jet2> = p.iter().enumerate().map(|(i, &x)| Jet2::variable(x, i)).collect();
        for i in 0..n {
            for j in i..n {
                let k = upper_index(n, i, j);
                let jet = self.components[k]
                    .eval_with(&vars)
                    .map_err(|s| self.component_err(k, s))?;
                g[(i, j)] = jet.value;
                g[(j, i)] = jet.value;
                for m in 0..n {
                    dg[m][(i, j)] = jet.grad[m];
                    dg[m][(j, i)] = jet.grad[m];
                    for l in 0..n {
                        let h = jet.hess[packed(m, l)];
                        ddg[m][l][(i, j)] = h;
                        ddg[m][l][(j, i)] = h;
                    }
                }
            }
        }
        Ok((g, dg, ddg))
    }

    /// Riemann tensor `R^l_{kij}` at `p`.
    pub fn riemann_at(&self, p: &[f64]) -> Result<Riemann, GeometryError> {
        let (g, dg, ddg) = self.metric_jet2(p)?;
        let ginv = inverse_checked(&g, p)?;
        Ok(Riemann::from_metric_derivatives(&ginv, &dg, &ddg))
    }

    /// Future-pointing timelike orientation vector at `p`.
    pub fn orientation_at(&self, p: &[f64]) -> Result<DVector<f64>, GeometryError> {
        self.check_domain(p)?;
        match &self.time_orientation {
            TimeOrientation::Field(exprs) => {
                let mut v = DVector::zeros(self.dim());
                for (i, e) in exprs.iter().enumerate() {
                    v[i] = e
                        .eval(p)
                        .map_err(|source| GeometryError::Orientation { index: i, source })?;
                }
                Ok(v)
            }
            TimeOrientation::TimeFunction(t) => {
                let g = self.metric_at(p)?;
                let ginv = inverse_checked(&g, p)?;
                let mut v = -ginv.column(*t).clone_owned();
                v[*t] += 1.0;
                Ok(v)
            }
        }
    }

    /// Signature and orientation check at `samples` random box points
    /// (plus the base point). Returns the smallest `|eigenvalue|` seen.
    pub fn signature_check(&self, samples: usize, seed: u64) -> Result<f64, GeometryError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_abs = f64::INFINITY;
        let mut points = vec![self.base_point.clone()];
        points.extend((0..samples).map(|_| self.random_box_point(&mut rng)));
        for p in points {
            let g = self.metric_at(&p)?;
            inverse_checked(&g, &p)?;
            let eig = SymmetricEigen::new(g.clone()).eigenvalues;
            let negatives = eig.iter().filter(|&&l| l < 0.0).count();
            if negatives != 1 {
                return Err(GeometryError::Signature {
                    point: p,
                    eigenvalues: eig.iter().copied().collect(),
                });
            }
            min_abs = min_abs.min(eig.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min));
            let t = self.orientation_at(&p)?;
            let tt = inner(&g, t.as_slice(), t.as_slice());
            let scale = t.norm_squared() * g.amax();
            if tt >= -crate::tolerances::CAUSAL_REL * scale {
                return Err(GeometryError::OrientationNotTimelike { point: p, norm: tt });
            }
        }
        Ok(min_abs)
    }

    /// Signature check plus the isometry check for every identification.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<(), GeometryError> {
        self.signature_check(samples, seed)?;
        for (index, id) in self.identifications.iter().enumerate() {
            let deviation = id.isometry_defect(self, samples, seed ^ 0x5eed)?;
            if deviation > crate::tolerances::ISOMETRY_TOL {
                return Err(GeometryError::NotIsometry { index, deviation });
            }
        }
        Ok(())
    }
}

impl MetricField for ChartMetric {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        self.check_domain(p)?;
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let k = upper_index(n, i, j);
                let v = self.components[k]
                    .eval(p)
                    .map_err(|s| self.component_err(k, s))?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    fn christoffel_at(&self, p: &[f64]) -> Result<Christoffel, GeometryError> {
        let (g, dg) = self.metric_jet1(p)?;
        let ginv = inverse_checked(&g, p)?;
        Ok(Christoffel::from_metric_derivatives(&ginv, &dg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn packed_indexing_matches_row_major_upper_triangle() {
        let n = 4;
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                assert_eq!(upper_index(n, i, j), k);
                assert_eq!(upper_index(n, j, i), k);
                k += 1;
            }
        }
    }

    #[test]
    fn rejects_malformed_charts() {
        let c = |s: &str| s.to_string();
        let e = |v: f64| Expr::Const(v);
        let ok_box = vec![Interval::new(-1.0, 1.0); 2];
        let orient = TimeOrientation::Field(vec![e(1.0), e(0.0)]);
        let build = |coords: Vec<String>, upper: Vec<Expr>, domain: Vec<Interval>| {
            ChartMetric::new("m", coords, upper, domain, ok_box.clone(), vec![], orient.clone(), None)
        };
        assert!(build(vec![c("t"), c("x")], vec![e(-1.0), e(0.0), e(1.0)], vec![Interval::UNBOUNDED; 2]).is_ok());
        assert!(build(vec![c("t"), c("t")], vec![e(-1.0), e(0.0), e(1.0)], vec![Interval::UNBOUNDED; 2]).is_err());
        assert!(build(vec![c("t"), c("pi")], vec![e(-1.0), e(0.0), e(1.0)], vec![Interval::UNBOUNDED; 2]).is_err());
        assert!(build(vec![c("t"), c("x")], vec![e(-1.0), e(1.0)], vec![Interval::UNBOUNDED; 2]).is_err());
        // box must sit inside the open domain
        assert!(build(vec![c("t"), c("x")], vec![e(-1.0), e(0.0), e(1.0)], vec![Interval::new(-1.0, 5.0); 2]).is_err());
    }

    #[test]
    fn clifton_pohl_deck_map_is_an_isometry() {
        let g = zoo::builtin("clifton_pohl").unwrap();
        let id = &g.identifications()[0];
        assert!(id.isometry_defect(&g, 1000, 3).unwrap() < 1e-12);
        // every homothety is an isometry here; an anisotropic scaling is not
        let bad = Identification::linear(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0])), &[0.0, 0.0]);
        assert!(bad.isometry_defect(&g, 200, 3).unwrap() > 1e-2);
    }

    #[test]
    fn time_function_orientation_is_future_timelike() {
        let g = zoo::builtin("minkowski2").unwrap();
        let chart = ChartMetric::new(
            "m",
            g.coords().to_vec(),
            g.upper_components().to_vec(),
            g.domain().to_vec(),
            g.working_box().to_vec(),
            vec![],
            TimeOrientation::TimeFunction(0),
            None,
        )
        .unwrap();
        let t = chart.orientation_at(&[0.0, 0.0]).unwrap();
        // ∂t - grad t = ∂t + ∂t for Minkowski
        assert_eq!(t.as_slice(), &[2.0, 0.0]);
        chart.signature_check(100, 1).unwrap();
    }

    #[test]
    fn wrong_signature_is_rejected_with_point() {
        let c = |s: &str| s.to_string();
        let g = ChartMetric::new(
            "riemannian",
            vec![c("t"), c("x")],
            vec![Expr::Const(1.0), Expr::Const(0.0), Expr::Const(1.0)],
            vec![Interval::UNBOUNDED; 2],
            vec![Interval::new(-1.0, 1.0); 2],
            vec![],
            TimeOrientation::Field(vec![Expr::Const(1.0), Expr::Const(0.0)]),
            None,
        )
        .unwrap();
        match g.signature_check(10, 0) {
            Err(GeometryError::Signature { point, eigenvalues }) => {
                assert_eq!(point.len(), 2);
                assert!(eigenvalues.iter().all(|&l| l > 0.0));
            }
            other => panic!("expected signature failure, got {other:?}"),
        }
    }
}
