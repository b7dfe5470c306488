use std::fmt;
use std::sync::Arc;

use crate::algebroid::{AlgebroidBuilder, AlgebroidSpec, Coefficient, DifferentiableCoefficient};
use crate::error::{check_len, Error, Result};
use crate::expr::{Node, Parameters, ScalarField};

use super::LieAlgebraData;

/// Sign of the quadratic term in `B^C_ij = d_i A_j^C - d_j A_i^C + s c^C_BD A_i^B A_j^D`.
/// With the structure functions `C^A_ij = -B^A_ij` only `s = -1` satisfies
/// the algebroid Jacobi identity for nonabelian algebras.
pub(crate) const QUADRATIC_SIGN: f64 = -1.0;

pub(crate) fn is_zero_literal(f: &ScalarField) -> bool {
    matches!(f.ast(), Node::Num(v) if *v == 0.0)
}

#[derive(Debug)]
struct Connection {
    algebra: LieAlgebraData,
    /// `[i][A]`.
    fields: Vec<Vec<ScalarField>>,
}

/// Principal connection data over a trivializing patch with coordinates `x^i`.
#[derive(Clone, Debug)]
pub struct AtiyahData {
    coordinates: Vec<String>,
    sample_box: Vec<(f64, f64)>,
    connection: Arc<Connection>,
}

impl AtiyahData {
    /// `connection[i][A]` is `A_i^A`, an expression over `coordinates`.
    pub fn new(algebra: LieAlgebraData, coordinates: Vec<String>, connection: Vec<Vec<ScalarField>>) -> Result<Self> {
        let n = coordinates.len();
        if n == 0 {
            return Err(Error::Construction(
                "Atiyah data needs at least one base coordinate".into(),
            ));
        }
        check_len("connection rows", n, connection.len())?;
        for row in &connection {
            check_len("connection columns", algebra.dim(), row.len())?;
            for f in row {
                if f.variables() != coordinates.as_slice() {
                    return Err(Error::Construction(format!(
                        "connection entry `{}` is not over the coordinates {:?}",
                        f.source(),
                        coordinates
                    )));
                }
            }
        }
        Ok(AtiyahData {
            sample_box: vec![(-1.0, 1.0); n],
            coordinates,
            connection: Arc::new(Connection {
                algebra,
                fields: connection,
            }),
        })
    }

    /// Parses `texts[i][A]`; empty strings mean zero.
    pub fn parse(
        algebra: LieAlgebraData,
        coordinates: Vec<String>,
        texts: &[Vec<&str>],
        parameters: &Parameters,
    ) -> Result<Self> {
        let fields = texts
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| {
                        if t.trim().is_empty() {
                            ScalarField::constant(0.0, &coordinates)
                        } else {
                            ScalarField::parse(t, &coordinates, parameters)
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(algebra, coordinates, fields)
    }

    /// Zero connection over `q1..qn`: the product bundle.
    pub fn flat(algebra: LieAlgebraData, n: usize) -> Result<Self> {
        let coords: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
        let zero = ScalarField::constant(0.0, &coords)?;
        let m = algebra.dim();
        Self::new(algebra, coords, vec![vec![zero; m]; n])
    }

    pub fn with_sample_box(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        check_len("sample box", self.base_dim(), bounds.len())?;
        self.sample_box = bounds;
        Ok(self)
    }

    pub fn base_dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn algebra(&self) -> &LieAlgebraData {
        &self.connection.algebra
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn sample_box(&self) -> &[(f64, f64)] {
        &self.sample_box
    }

    /// `A_i^A`.
    pub fn connection(&self, i: usize, a: usize) -> &ScalarField {
        &self.connection.fields[i][a]
    }

    /// `A_i^A(q)` as an `n x m` row-major array.
    pub fn eval_connection(&self, q: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.base_dim() * self.algebra().dim());
        for row in &self.connection.fields {
            for f in row {
                out.push(if is_zero_literal(f) { 0.0 } else { f.eval(q)? });
            }
        }
        Ok(out)
    }

    pub fn curvature(&self) -> Curvature {
        Curvature {
            connection: self.connection.clone(),
            sign: QUADRATIC_SIGN,
        }
    }

    /// Connection parameters, merged across entries.
    pub fn parameters(&self) -> Parameters {
        let mut p = Parameters::new();
        for row in &self.connection.fields {
            for f in row {
                p.extend(f.parameters());
            }
        }
        p
    }
}

/// Curvature of a connection, `B^C_ij(q)`, with exact first derivatives.
#[derive(Clone)]
pub struct Curvature {
    connection: Arc<Connection>,
    sign: f64,
}

impl fmt::Debug for Curvature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Curvature({})", self.connection.algebra.name())
    }
}

/// Value, gradient and Hessian of one connection entry.
struct Jet {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<Vec<f64>>,
}

impl Jet {
    /// Hessians only when `second` is set; value evaluation needs first derivatives alone.
    fn of(f: &ScalarField, q: &[f64], second: bool) -> Result<Jet> {
        let n = q.len();
        if is_zero_literal(f) {
            return Ok(Jet {
                value: 0.0,
                grad: vec![0.0; n],
                hess: Vec::new(),
            });
        }
        if !second {
            let d = f.eval_with_gradient(q)?;
            return Ok(Jet {
                value: d.value,
                grad: d.derivs,
                hess: Vec::new(),
            });
        }
        let d = f.eval_with_hessian(q)?;
        let s = d.second.expect("hessian evaluation");
        Ok(Jet {
            value: d.value,
            grad: d.derivs,
            hess: (0..n).map(|i| (0..n).map(|j| s.get(i, j)).collect()).collect(),
        })
    }

    fn hess(&self, i: usize, k: usize) -> f64 {
        self.hess.get(i).map_or(0.0, |row| row[k])
    }
}

/// Free-standing curvature of `connection[i][A]` over `algebra`.
pub fn curvature_from_connection(algebra: LieAlgebraData, connection: Vec<Vec<ScalarField>>) -> Result<Curvature> {
    let coords = connection
        .first()
        .and_then(|r| r.first())
        .map(|f| f.variables().to_vec())
        .ok_or_else(|| Error::Construction("empty connection".into()))?;
    Ok(AtiyahData::new(algebra, coords, connection)?.curvature())
}

impl Curvature {
    #[cfg(test)]
    pub(crate) fn with_sign(mut self, sign: f64) -> Self {
        self.sign = sign;
        self
    }

    fn rows(&self, q: &[f64], i: usize, j: usize, second: bool) -> Result<(Vec<Jet>, Vec<Jet>)> {
        let f = &self.connection.fields;
        let ri = f[i].iter().map(|a| Jet::of(a, q, second)).collect::<Result<Vec<_>>>()?;
        let rj = f[j].iter().map(|a| Jet::of(a, q, second)).collect::<Result<Vec<_>>>()?;
        Ok((ri, rj))
    }

    /// `B^c_ij(q)` and its gradient.
    pub fn component_with_gradient(&self, c: usize, i: usize, j: usize, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evaluate(c, i, j, q, true)
    }

    fn evaluate(&self, c: usize, i: usize, j: usize, q: &[f64], with_gradient: bool) -> Result<(f64, Vec<f64>)> {
        let n = q.len();
        check_len("curvature point", self.connection.fields.len(), n)?;
        let g = &self.connection.algebra;
        let m = g.dim();
        let (ai, aj) = self.rows(q, i, j, with_gradient)?;
        let mut value = aj[c].grad[i] - ai[c].grad[j];
        let mut grad: Vec<f64> = if with_gradient {
            (0..n).map(|k| aj[c].hess(i, k) - ai[c].hess(j, k)).collect()
        } else {
            Vec::new()
        };
        for b in 0..m {
            for d in 0..m {
                let k = self.sign * g.get(c, b, d);
                if k == 0.0 {
                    continue;
                }
                value += k * ai[b].value * aj[d].value;
                for (l, gl) in grad.iter_mut().enumerate() {
                    *gl += k * (ai[b].grad[l] * aj[d].value + ai[b].value * aj[d].grad[l]);
                }
            }
        }
        Ok((value, grad))
    }

    pub fn component(&self, c: usize, i: usize, j: usize, q: &[f64]) -> Result<f64> {
        Ok(self.evaluate(c, i, j, q, false)?.0)
    }

    /// All components, index `(c * n + i) * n + j`.
    pub fn eval(&self, q: &[f64]) -> Result<Vec<f64>> {
        let n = q.len();
        let m = self.connection.algebra.dim();
        let mut out = vec![0.0; m * n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                for c in 0..m {
                    let v = self.component(c, i, j, q)?;
                    out[(c * n + i) * n + j] = v;
                    out[(c * n + j) * n + i] = -v;
                }
            }
        }
        Ok(out)
    }

    fn coefficient(&self, c: usize, i: usize, j: usize, factor: f64) -> Coefficient {
        Coefficient::Analytic(Arc::new(CurvatureEntry {
            curvature: self.clone(),
            c,
            i,
            j,
            factor,
        }))
    }
}

#[derive(Debug)]
struct CurvatureEntry {
    curvature: Curvature,
    c: usize,
    i: usize,
    j: usize,
    factor: f64,
}

impl DifferentiableCoefficient for CurvatureEntry {
    fn value(&self, q: &[f64]) -> Result<f64> {
        Ok(self.factor * self.curvature.component(self.c, self.i, self.j, q)?)
    }
    fn value_and_gradient(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.curvature.component_with_gradient(self.c, self.i, self.j, q)?;
        Ok((self.factor * v, g.into_iter().map(|x| self.factor * x).collect()))
    }
}

/// `sum_k w_k f_k(q)` for connection entries `f_k`.
#[derive(Debug)]
struct LinearCombination(Vec<(f64, ScalarField)>);

impl DifferentiableCoefficient for LinearCombination {
    fn value(&self, q: &[f64]) -> Result<f64> {
        let mut v = 0.0;
        for (w, f) in &self.0 {
            v += w * f.eval(q)?;
        }
        Ok(v)
    }
    fn value_and_gradient(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut v = 0.0;
        let mut g = vec![0.0; q.len()];
        for (w, f) in &self.0 {
            let d = f.eval_with_gradient(q)?;
            v += w * d.value;
            for (gi, di) in g.iter_mut().zip(d.derivs) {
                *gi += w * di;
            }
        }
        Ok((v, g))
    }
}

/// The Atiyah algebroid in the basis `(e_i, e_A)`: base sections first,
/// then algebra sections. Anchor `rho^j_i = delta`, and
/// `C^A_ij = -B^A_ij`, `C^C_iA = -C^C_Ai = c^C_AB A_i^B`, `C^C_AB = c^C_AB`.
pub fn build_atiyah(data: &AtiyahData) -> Result<AlgebroidSpec> {
    build_atiyah_with(data, &data.curvature())
}

pub(crate) fn build_atiyah_with(data: &AtiyahData, curvature: &Curvature) -> Result<AlgebroidSpec> {
    let n = data.base_dim();
    let g = data.algebra();
    let m = g.dim();
    let mut sections: Vec<String> = data.coordinates.iter().map(|c| format!("d_{c}")).collect();
    sections.extend((1..=m).map(|a| format!("xi{a}")));
    let name = format!("atiyah:{}", g.name());
    let mut b = AlgebroidBuilder::new(&name, n, n + m)
        .coordinates(data.coordinates.clone())?
        .sections(sections)?
        .sample_box(data.sample_box.clone())?;
    for i in 0..n {
        b = b.anchor(i, i, 1.0)?;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for c in 0..m {
                b = b.structure(n + c, i, j, curvature.coefficient(c, i, j, -1.0))?;
            }
        }
    }
    for i in 0..n {
        for a in 0..m {
            for c in 0..m {
                let terms: Vec<(f64, ScalarField)> = (0..m)
                    .filter(|&bb| g.get(c, a, bb) != 0.0 && !is_zero_literal(data.connection(i, bb)))
                    .map(|bb| (g.get(c, a, bb), data.connection(i, bb).clone()))
                    .collect();
                if !terms.is_empty() {
                    let coef = Coefficient::Analytic(Arc::new(LinearCombination(terms)));
                    b = b.structure(n + c, i, n + a, coef)?;
                }
            }
        }
    }
    for a in 0..m {
        for bb in (a + 1)..m {
            for c in 0..m {
                if g.get(c, a, bb) != 0.0 {
                    b = b.structure(n + c, n + a, n + bb, g.get(c, a, bb))?;
                }
            }
        }
    }
    b.build()
}
