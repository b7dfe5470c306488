//! Lie algebroids in coordinates.
//!
//! A spec holds the anchor `rho^i_a(q)` (n x m) and the structure functions
//! `C^d_ab(q)`. Only entries with `a < b` are stored; the other half is the
//! negated reflection, so antisymmetry holds by construction.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::expr::ScalarField;

/// A coefficient function whose gradient is known exactly.
pub trait DifferentiableCoefficient: Send + Sync + fmt::Debug {
    fn value(&self, q: &[f64]) -> Result<f64>;
    fn value_and_gradient(&self, q: &[f64]) -> Result<(f64, Vec<f64>)>;
}

type Callable = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One entry of the anchor or of the structure functions, as a function of `q`.
#[derive(Clone)]
pub enum Coefficient {
    Zero,
    Constant(f64),
    /// Expression over the base coordinates.
    Expr(ScalarField),
    Analytic(Arc<dyn DifferentiableCoefficient>),
    /// Plain callable; derivatives fall back to central differences.
    Opaque(Callable),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Zero => f.write_str("Zero"),
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Expr(e) => write!(f, "Expr({})", e.source()),
            Coefficient::Analytic(a) => write!(f, "Analytic({a:?})"),
            Coefficient::Opaque(_) => f.write_str("Opaque(..)"),
        }
    }
}

/// How validators obtain base derivatives of the coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    /// Forward-mode where available, central differences for opaque callables.
    #[default]
    Analytic,
    /// Central differences for every coefficient.
    FiniteDifference,
}

/// Central-difference step for coordinate `x`.
pub fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

impl Coefficient {
    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Zero) || matches!(self, Coefficient::Constant(c) if *c == 0.0)
    }

    pub fn eval(&self, q: &[f64]) -> Result<f64> {
        match self {
            Coefficient::Zero => Ok(0.0),
            Coefficient::Constant(c) => Ok(*c),
            Coefficient::Expr(e) => e.eval(q),
            Coefficient::Analytic(a) => a.value(q),
            Coefficient::Opaque(f) => Ok(f(q)),
        }
    }

    pub fn gradient(&self, q: &[f64], mode: DerivativeMode) -> Result<Vec<f64>> {
        let n = q.len();
        match (self, mode) {
            (Coefficient::Zero | Coefficient::Constant(_), _) => Ok(vec![0.0; n]),
            (Coefficient::Expr(e), DerivativeMode::Analytic) => Ok(e.eval_with_gradient(q)?.derivs),
            (Coefficient::Analytic(a), DerivativeMode::Analytic) => Ok(a.value_and_gradient(q)?.1),
            _ => self.central_difference(q),
        }
    }

    fn central_difference(&self, q: &[f64]) -> Result<Vec<f64>> {
        let mut x = q.to_vec();
        let mut grad = Vec::with_capacity(q.len());
        for i in 0..q.len() {
            let h = fd_step(q[i]);
            x[i] = q[i] + h;
            let plus = self.eval(&x)?;
            x[i] = q[i] - h;
            let minus = self.eval(&x)?;
            x[i] = q[i];
            grad.push((plus - minus) / (2.0 * h));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical {
                message: "non-finite finite-difference derivative".into(),
                point: q.to_vec(),
            });
        }
        Ok(grad)
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        if c == 0.0 {
            Coefficient::Zero
        } else {
            Coefficient::Constant(c)
        }
    }
}

impl From<ScalarField> for Coefficient {
    fn from(e: ScalarField) -> Self {
        Coefficient::Expr(e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasePoint(pub Vec<f64>);

impl BasePoint {
    pub fn new(q: Vec<f64>) -> Self {
        BasePoint(q)
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiberVector {
    pub q: BasePoint,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoVector {
    pub q: BasePoint,
    pub p: Vec<f64>,
}

impl CoVector {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        CoVector { q: BasePoint(q), p }
    }
}

/// `C^d_ab` at one base point, indexed `[d][a][b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTensor {
    m: usize,
    data: Vec<f64>,
}

impl StructureTensor {
    pub fn zeros(m: usize) -> Self {
        StructureTensor {
            m,
            data: vec![0.0; m * m * m],
        }
    }
    pub fn dim(&self) -> usize {
        self.m
    }
    pub fn get(&self, d: usize, a: usize, b: usize) -> f64 {
        self.data[(d * self.m + a) * self.m + b]
    }
    fn set(&mut self, d: usize, a: usize, b: usize, v: f64) {
        self.data[(d * self.m + a) * self.m + b] = v;
    }
}

#[derive(Clone, Debug)]
struct StructureEntry {
    d: usize,
    a: usize,
    b: usize,
    coefficient: Coefficient,
}

/// A Lie algebroid over one coordinate patch.
#[derive(Clone, Debug)]
pub struct AlgebroidSpec {
    name: String,
    base_dim: usize,
    fiber_dim: usize,
    anchor: Vec<Coefficient>,
    structure: Vec<StructureEntry>,
    coordinates: Vec<String>,
    sections: Vec<String>,
    sample_box: Vec<(f64, f64)>,
}

/// Incremental constructor for [`AlgebroidSpec`].
#[derive(Clone, Debug)]
pub struct AlgebroidBuilder {
    spec: AlgebroidSpec,
}

impl AlgebroidBuilder {
    pub fn new(name: &str, base_dim: usize, fiber_dim: usize) -> Self {
        AlgebroidBuilder {
            spec: AlgebroidSpec {
                name: name.to_string(),
                base_dim,
                fiber_dim,
                anchor: vec![Coefficient::Zero; base_dim * fiber_dim],
                structure: Vec::new(),
                coordinates: (1..=base_dim).map(|i| format!("q{i}")).collect(),
                sections: (1..=fiber_dim).map(|a| format!("e{a}")).collect(),
                sample_box: vec![(-1.0, 1.0); base_dim],
            },
        }
    }

    pub fn coordinates(mut self, names: Vec<String>) -> Result<Self> {
        check_len("coordinate names", self.spec.base_dim, names.len())?;
        self.spec.coordinates = names;
        Ok(self)
    }

    pub fn sections(mut self, names: Vec<String>) -> Result<Self> {
        check_len("section names", self.spec.fiber_dim, names.len())?;
        self.spec.sections = names;
        Ok(self)
    }

    pub fn sample_box(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        check_len("sample box", self.spec.base_dim, bounds.len())?;
        if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Input("sample box needs lo < hi on every axis".into()));
        }
        self.spec.sample_box = bounds;
        Ok(self)
    }

    /// Sets `rho^i_a`.
    pub fn anchor(mut self, i: usize, a: usize, c: impl Into<Coefficient>) -> Result<Self> {
        if i >= self.spec.base_dim || a >= self.spec.fiber_dim {
            return Err(Error::Input(format!("anchor index ({i},{a}) out of range")));
        }
        self.spec.anchor[i * self.spec.fiber_dim + a] = c.into();
        Ok(self)
    }

    /// Sets `C^d_ab` (and thereby `C^d_ba = -C^d_ab`). Requires `a != b`.
    pub fn structure(mut self, d: usize, a: usize, b: usize, c: impl Into<Coefficient>) -> Result<Self> {
        let m = self.spec.fiber_dim;
        if d >= m || a >= m || b >= m {
            return Err(Error::Input(format!("structure index ({d},{a},{b}) out of range")));
        }
        if a == b {
            return Err(Error::Input(format!(
                "C^{d}_{a}{b}: diagonal structure functions vanish by antisymmetry"
            )));
        }
        let c = c.into();
        let (a, b, c) = if a < b { (a, b, c) } else { (b, a, negate(c)) };
        self.spec.structure.retain(|e| (e.d, e.a, e.b) != (d, a, b));
        if !c.is_zero() {
            self.spec.structure.push(StructureEntry {
                d,
                a,
                b,
                coefficient: c,
            });
        }
        Ok(self)
    }

    pub fn build(self) -> Result<AlgebroidSpec> {
        for name in self.spec.coordinates.iter() {
            if self.spec.coordinates.iter().filter(|n| *n == name).count() > 1 {
                return Err(Error::Construction(format!("duplicate coordinate `{name}`")));
            }
        }
        Ok(self.spec)
    }
}

fn negate(c: Coefficient) -> Coefficient {
    match c {
        Coefficient::Zero => Coefficient::Zero,
        Coefficient::Constant(v) => Coefficient::Constant(-v),
        other => Coefficient::Analytic(Arc::new(Negated(other))),
    }
}

#[derive(Debug)]
struct Negated(Coefficient);

impl DifferentiableCoefficient for Negated {
    fn value(&self, q: &[f64]) -> Result<f64> {
        Ok(-self.0.eval(q)?)
    }
    fn value_and_gradient(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        let v = self.0.eval(q)?;
        let g = self.0.gradient(q, DerivativeMode::Analytic)?;
        Ok((-v, g.into_iter().map(|x| -x).collect()))
    }
}

impl AlgebroidSpec {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn base_dim(&self) -> usize {
        self.base_dim
    }
    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }
    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }
    pub fn sections(&self) -> &[String] {
        &self.sections
    }
    pub fn sample_box(&self) -> &[(f64, f64)] {
        &self.sample_box
    }

    /// Variable names on `A* x R`: coordinates, `p1..pm`, `z`.
    pub fn cotangent_variables(&self) -> Vec<String> {
        let mut v = self.coordinates.clone();
        v.extend((1..=self.fiber_dim).map(|a| format!("p{a}")));
        v.push("z".into());
        v
    }

    /// Variable names on `A x R`: coordinates, `y1..ym`, `z`.
    pub fn tangent_variables(&self) -> Vec<String> {
        let mut v = self.coordinates.clone();
        v.extend((1..=self.fiber_dim).map(|a| format!("y{a}")));
        v.push("z".into());
        v
    }

    /// Variable names on the base: the coordinates.
    pub fn base_variables(&self) -> &[String] {
        &self.coordinates
    }

    pub fn anchor_entry(&self, i: usize, a: usize) -> &Coefficient {
        &self.anchor[i * self.fiber_dim + a]
    }

    fn check_point(&self, q: &[f64]) -> Result<()> {
        check_len("base point", self.base_dim, q.len())?;
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input(format!("non-finite base point {q:?}")));
        }
        Ok(())
    }

    /// `rho^i_a(q)` as an n x m matrix.
    pub fn eval_anchor(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(q)?;
        let (n, m) = (self.base_dim, self.fiber_dim);
        let mut out = DMatrix::zeros(n, m);
        for i in 0..n {
            for a in 0..m {
                out[(i, a)] = self.anchor[i * m + a].eval(q)?;
            }
        }
        Ok(out)
    }

    /// `C^d_ab(q)`.
    pub fn eval_structure(&self, q: &[f64]) -> Result<StructureTensor> {
        self.check_point(q)?;
        let mut out = StructureTensor::zeros(self.fiber_dim);
        for e in &self.structure {
            let v = e.coefficient.eval(q)?;
            out.set(e.d, e.a, e.b, v);
            out.set(e.d, e.b, e.a, -v);
        }
        Ok(out)
    }

    /// `d rho^i_a / d q^j`, indexed `[i][a][j]` flattened as `(i*m + a)*n + j`.
    pub fn anchor_derivatives(&self, q: &[f64], mode: DerivativeMode) -> Result<Vec<f64>> {
        self.check_point(q)?;
        let n = self.base_dim;
        let mut out = Vec::with_capacity(self.anchor.len() * n);
        for c in &self.anchor {
            out.extend(c.gradient(q, mode)?);
        }
        Ok(out)
    }

    /// `d C^d_ab / d q^j` as one tensor per base direction `j`.
    pub fn structure_derivatives(&self, q: &[f64], mode: DerivativeMode) -> Result<Vec<StructureTensor>> {
        self.check_point(q)?;
        let mut out = vec![StructureTensor::zeros(self.fiber_dim); self.base_dim];
        for e in &self.structure {
            let g = e.coefficient.gradient(q, mode)?;
            for (j, gj) in g.into_iter().enumerate() {
                out[j].set(e.d, e.a, e.b, gj);
                out[j].set(e.d, e.b, e.a, -gj);
            }
        }
        Ok(out)
    }
}

/// Outcome of one numerical check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Vec<f64>>,
}

impl ValidationReport {
    pub(crate) fn from_residuals(
        check: &str,
        tolerance: f64,
        residuals: impl IntoIterator<Item = (f64, Vec<f64>)>,
    ) -> Self {
        // (ranking key, residual, point); NaN ranks above everything
        let mut worst: Option<(f64, f64, Vec<f64>)> = None;
        let mut samples = 0;
        for (r, point) in residuals {
            samples += 1;
            let key = if r.is_nan() { f64::INFINITY } else { r };
            if worst.as_ref().is_none_or(|(k, _, _)| key > *k) {
                worst = Some((key, r, point));
            }
        }
        let (residual, worst_point) = match worst {
            Some((_, r, p)) => (r, Some(p)),
            None => (0.0, None),
        };
        ValidationReport {
            check: check.to_string(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            samples,
            worst_point,
        }
    }
}

/// `n` uniform points in the spec's declared box, from a seeded generator.
pub fn sample_base_points(spec: &AlgebroidSpec, count: usize, seed: u64) -> Vec<BasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| BasePoint(spec.sample_box.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()))
        .collect()
}

fn numerical(e: Error, q: &[f64]) -> Error {
    match e {
        Error::Numerical { .. } => e,
        other => Error::Numerical {
            message: other.to_string(),
            point: q.to_vec(),
        },
    }
}

/// Max over samples and indices of
/// `|rho^j_a d_j rho^i_b - rho^j_b d_j rho^i_a - rho^i_d C^d_ab|`.
pub fn validate_anchor(
    spec: &AlgebroidSpec,
    samples: &[BasePoint],
    tol: f64,
    mode: DerivativeMode,
) -> Result<ValidationReport> {
    if samples.is_empty() {
        return Err(Error::Input("validate_anchor needs at least one sample".into()));
    }
    let (n, m) = (spec.base_dim, spec.fiber_dim);
    let mut residuals = Vec::with_capacity(samples.len());
    for q in samples {
        let q = q.as_slice();
        let rho = spec.eval_anchor(q)?;
        let c = spec.eval_structure(q)?;
        let drho = spec.anchor_derivatives(q, mode).map_err(|e| numerical(e, q))?;
        let d = |i: usize, a: usize, j: usize| drho[(i * m + a) * n + j];
        let mut worst = 0.0_f64;
        for i in 0..n {
            for a in 0..m {
                for b in (a + 1)..m {
                    let mut lhs = 0.0;
                    for j in 0..n {
                        lhs += rho[(j, a)] * d(i, b, j) - rho[(j, b)] * d(i, a, j);
                    }
                    let rhs: f64 = (0..m).map(|e| rho[(i, e)] * c.get(e, a, b)).sum();
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
        residuals.push((worst, q.to_vec()));
    }
    Ok(ValidationReport::from_residuals("anchor_compatibility", tol, residuals))
}

/// Max over samples, `(a,b,c)` and `nu` of the cyclic sum
/// `rho^i_a d_i C^nu_bc + C^nu_ad C^d_bc`.
pub fn validate_jacobi(
    spec: &AlgebroidSpec,
    samples: &[BasePoint],
    tol: f64,
    mode: DerivativeMode,
) -> Result<ValidationReport> {
    if samples.is_empty() {
        return Err(Error::Input("validate_jacobi needs at least one sample".into()));
    }
    let (n, m) = (spec.base_dim, spec.fiber_dim);
    let mut residuals = Vec::with_capacity(samples.len());
    for q in samples {
        let q = q.as_slice();
        let rho = spec.eval_anchor(q)?;
        let c = spec.eval_structure(q)?;
        let dc = spec.structure_derivatives(q, mode).map_err(|e| numerical(e, q))?;
        let term = |nu: usize, a: usize, b: usize, cc: usize| -> f64 {
            let transport: f64 = (0..n).map(|i| rho[(i, a)] * dc[i].get(nu, b, cc)).sum();
            let algebraic: f64 = (0..m).map(|d| c.get(nu, a, d) * c.get(d, b, cc)).sum();
            transport + algebraic
        };
        let mut worst = 0.0_f64;
        for a in 0..m {
            for b in (a + 1)..m {
                for cc in (b + 1)..m {
                    for nu in 0..m {
                        let s = term(nu, a, b, cc) + term(nu, b, cc, a) + term(nu, cc, a, b);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        residuals.push((worst, q.to_vec()));
    }
    Ok(ValidationReport::from_residuals("structure_jacobi", tol, residuals))
}
