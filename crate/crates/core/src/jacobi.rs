//! Linear Poisson bracket on `A*`, Jacobi bracket on `A* x R`, and the
//! (contact) Hamiltonian vector fields they generate.
//!
//! Phase points on `A* x R` are laid out flat as `[q^1..q^n, p_1..p_m, z]`.
//! The Reeb field is `d/dz` and the Liouville field is `p_a d/dp_a`; both are
//! inlined in the bracket formulas below. The Jacobi pair is `(Lambda, E)`
//! with `E = -R`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::algebroid::{fd_step, AlgebroidSpec, CoVector, StructureTensor, ValidationReport};
use crate::error::{check_len, Error, Result};
use crate::expr::{Parameters, ScalarField};

/// A point `(q, p, z)` of `A* x R`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactCoState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub z: f64,
}

impl ContactCoState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, z: f64) -> Self {
        ContactCoState { q, p, z }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.q.len() + self.p.len() + 1);
        v.extend_from_slice(&self.q);
        v.extend_from_slice(&self.p);
        v.push(self.z);
        v
    }

    pub fn from_slice(spec: &AlgebroidSpec, x: &[f64]) -> Result<Self> {
        let (n, m) = (spec.base_dim(), spec.fiber_dim());
        check_len("A* x R state", n + m + 1, x.len())?;
        Ok(ContactCoState {
            q: x[..n].to_vec(),
            p: x[n..n + m].to_vec(),
            z: x[n + m],
        })
    }

    fn check(&self, spec: &AlgebroidSpec) -> Result<()> {
        check_len("state q", spec.base_dim(), self.q.len())?;
        check_len("state p", spec.fiber_dim(), self.p.len())?;
        if self.to_vec().iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite state".into()));
        }
        Ok(())
    }
}

/// Components of a vector field on `A* x R` at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseVelocity {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub dz: f64,
}

impl PhaseVelocity {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.dq.clone();
        v.extend_from_slice(&self.dp);
        v.push(self.dz);
        v
    }

    /// Sup-norm distance between two velocities.
    pub fn max_abs_diff(&self, other: &PhaseVelocity) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A function on `A* x R` with value and exact-or-numerical gradient.
pub trait PhaseFunction: Send + Sync {
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_and_gradient(x)?.0)
    }
}

/// Expression-defined function on `A* x R` over variables `(q.., p.., z)`.
#[derive(Clone, Debug)]
pub struct CotangentFunction {
    field: ScalarField,
}

impl CotangentFunction {
    pub fn new(spec: &AlgebroidSpec, field: ScalarField) -> Result<Self> {
        check_len(
            "cotangent function variables",
            spec.base_dim() + spec.fiber_dim() + 1,
            field.variables().len(),
        )?;
        Ok(CotangentFunction { field })
    }

    /// Parses `text` over the spec's `A* x R` variable names.
    pub fn parse(spec: &AlgebroidSpec, text: &str, parameters: &Parameters) -> Result<Self> {
        let field = ScalarField::parse(text, &spec.cotangent_variables(), parameters)?;
        Ok(CotangentFunction { field })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        Ok(CotangentFunction {
            field: self.field.with_parameter(name, value)?,
        })
    }
}

impl PhaseFunction for CotangentFunction {
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.field.eval_with_gradient(x)?;
        Ok((d.value, d.derivs))
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.field.eval(x)
    }
}

/// Anchor and structure functions frozen at one base point.
struct Frozen {
    n: usize,
    m: usize,
    rho: DMatrix<f64>,
    c: StructureTensor,
}

impl Frozen {
    fn at(spec: &AlgebroidSpec, q: &[f64]) -> Result<Self> {
        Ok(Frozen {
            n: spec.base_dim(),
            m: spec.fiber_dim(),
            rho: spec.eval_anchor(q)?,
            c: spec.eval_structure(q)?,
        })
    }

    /// `Lambda_{A*}(df, dg) = rho^i_a (f_pa g_qi - g_pa f_qi) + C^d_ab p_d f_pa g_pb`.
    fn poisson(&self, p: &[f64], df: &[f64], dg: &[f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let (fq, fp) = (&df[..n], &df[n..n + m]);
        let (gq, gp) = (&dg[..n], &dg[n..n + m]);
        let mut s = 0.0;
        for a in 0..m {
            for i in 0..n {
                s += self.rho[(i, a)] * (fp[a] * gq[i] - gp[a] * fq[i]);
            }
        }
        for a in 0..m {
            for b in 0..m {
                let cp: f64 = (0..m).map(|d| self.c.get(d, a, b) * p[d]).sum();
                s += cp * fp[a] * gp[b];
            }
        }
        s
    }

    /// `Lambda_{A* x R}(df, dg)`: the Poisson part plus `Delta* ^ R`.
    fn lambda(&self, p: &[f64], df: &[f64], dg: &[f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let (fz, gz) = (df[n + m], dg[n + m]);
        let liouville: f64 = (0..m).map(|a| p[a] * (df[n + a] * gz - dg[n + a] * fz)).sum();
        self.poisson(p, df, dg) + liouville
    }
}

fn split_dims(spec: &AlgebroidSpec) -> (usize, usize) {
    (spec.base_dim(), spec.fiber_dim())
}

/// `{f, g}_{A*}` at `x`. Both functions must be independent of `z` there.
pub fn poisson_bracket(
    spec: &AlgebroidSpec,
    f: &dyn PhaseFunction,
    g: &dyn PhaseFunction,
    x: &CoVector,
) -> Result<f64> {
    let state = ContactCoState::new(x.q.0.clone(), x.p.clone(), 0.0);
    state.check(spec)?;
    let point = state.to_vec();
    let (_, df) = f.value_and_gradient(&point)?;
    let (_, dg) = g.value_and_gradient(&point)?;
    let zi = point.len() - 1;
    if df[zi] != 0.0 || dg[zi] != 0.0 {
        return Err(Error::Contract(
            "poisson_bracket needs z-independent functions; use jacobi_bracket on A* x R".into(),
        ));
    }
    Ok(Frozen::at(spec, &state.q)?.poisson(&state.p, &df, &dg))
}

/// `{f, g}_{A* x R} = Lambda(df, dg) - f R(g) + g R(f)` at `x`.
pub fn jacobi_bracket(
    spec: &AlgebroidSpec,
    f: &dyn PhaseFunction,
    g: &dyn PhaseFunction,
    x: &ContactCoState,
) -> Result<f64> {
    x.check(spec)?;
    jacobi_bracket_flat(spec, f, g, &x.to_vec())
}

fn jacobi_bracket_flat(spec: &AlgebroidSpec, f: &dyn PhaseFunction, g: &dyn PhaseFunction, x: &[f64]) -> Result<f64> {
    let (n, m) = split_dims(spec);
    let (fv, df) = f.value_and_gradient(x)?;
    let (gv, dg) = g.value_and_gradient(x)?;
    let frozen = Frozen::at(spec, &x[..n])?;
    let p = &x[n..n + m];
    Ok(frozen.lambda(p, &df, &dg) - fv * dg[n + m] + gv * df[n + m])
}

/// Hamiltonian vector field of a `z`-independent `h` on `A*`.
pub fn hamiltonian_vector_field(spec: &AlgebroidSpec, h: &dyn PhaseFunction, x: &CoVector) -> Result<PhaseVelocity> {
    let state = ContactCoState::new(x.q.0.clone(), x.p.clone(), 0.0);
    state.check(spec)?;
    let (n, m) = split_dims(spec);
    let (_, dh) = h.value_and_gradient(&state.to_vec())?;
    if dh[n + m] != 0.0 {
        return Err(Error::Contract(
            "hamiltonian_vector_field needs a z-independent Hamiltonian; use the contact field".into(),
        ));
    }
    let frozen = Frozen::at(spec, &state.q)?;
    let (dq, dp) = base_and_fiber_velocity(&frozen, &state.p, &dh);
    Ok(PhaseVelocity { dq, dp, dz: 0.0 })
}

/// `dq^i = rho^i_a h_pa`, `dp_a = -(rho^i_a h_qi + C^d_ab p_d h_pb)`.
fn base_and_fiber_velocity(frozen: &Frozen, p: &[f64], dh: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (frozen.n, frozen.m);
    let (hq, hp) = (&dh[..n], &dh[n..n + m]);
    let dq = (0..n)
        .map(|i| (0..m).map(|a| frozen.rho[(i, a)] * hp[a]).sum())
        .collect();
    let dp = (0..m)
        .map(|a| {
            let anchor: f64 = (0..n).map(|i| frozen.rho[(i, a)] * hq[i]).sum();
            let mut bracket = 0.0;
            for b in 0..m {
                let cp: f64 = (0..m).map(|d| frozen.c.get(d, a, b) * p[d]).sum();
                bracket += cp * hp[b];
            }
            -(anchor + bracket)
        })
        .collect();
    (dq, dp)
}

/// Contact Hamiltonian vector field `X_h`, defined by `X_h(f) = {h, f} - f R(h)`.
pub fn contact_hamiltonian_vector_field(
    spec: &AlgebroidSpec,
    h: &dyn PhaseFunction,
    x: &ContactCoState,
) -> Result<PhaseVelocity> {
    x.check(spec)?;
    contact_field_flat(spec, h, &x.to_vec())
}

pub(crate) fn contact_field_flat(spec: &AlgebroidSpec, h: &dyn PhaseFunction, x: &[f64]) -> Result<PhaseVelocity> {
    let (n, m) = split_dims(spec);
    let (hv, dh) = h.value_and_gradient(x)?;
    let p = &x[n..n + m];
    let hz = dh[n + m];
    let frozen = Frozen::at(spec, &x[..n])?;
    let (dq, mut dp) = base_and_fiber_velocity(&frozen, p, &dh);
    for a in 0..m {
        dp[a] -= p[a] * hz;
    }
    let euler: f64 = (0..m).map(|a| p[a] * dh[n + a]).sum();
    Ok(PhaseVelocity { dq, dp, dz: euler - hv })
}

/// Directional derivative of `f` along `v` at `x`.
pub fn directional_derivative(f: &dyn PhaseFunction, v: &PhaseVelocity, x: &[f64]) -> Result<f64> {
    let (_, df) = f.value_and_gradient(x)?;
    Ok(df.iter().zip(v.to_vec()).map(|(a, b)| a * b).sum())
}

/// `{f, g}` as a function of the phase point; gradient by central differences.
pub struct BracketFunction<'a> {
    spec: &'a AlgebroidSpec,
    f: &'a dyn PhaseFunction,
    g: &'a dyn PhaseFunction,
}

impl<'a> BracketFunction<'a> {
    pub fn new(spec: &'a AlgebroidSpec, f: &'a dyn PhaseFunction, g: &'a dyn PhaseFunction) -> Self {
        BracketFunction { spec, f, g }
    }
}

impl PhaseFunction for BracketFunction<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        jacobi_bracket_flat(self.spec, self.f, self.g, x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let v = self.value(x)?;
        let mut y = x.to_vec();
        let mut grad = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let h = fd_step(x[i]);
            y[i] = x[i] + h;
            let plus = self.value(&y)?;
            y[i] = x[i] - h;
            let minus = self.value(&y)?;
            y[i] = x[i];
            grad.push((plus - minus) / (2.0 * h));
        }
        Ok((v, grad))
    }
}

/// Pointwise product `g * h` with the exact product-rule gradient.
pub struct ProductFunction<'a>(pub &'a dyn PhaseFunction, pub &'a dyn PhaseFunction);

impl PhaseFunction for ProductFunction<'_> {
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (gv, dg) = self.0.value_and_gradient(x)?;
        let (hv, dh) = self.1.value_and_gradient(x)?;
        let grad = dg.iter().zip(&dh).map(|(a, b)| a * hv + gv * b).collect();
        Ok((gv * hv, grad))
    }
}

impl<T: PhaseFunction + ?Sized> PhaseFunction for Arc<T> {
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        (**self).value_and_gradient(x)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
}

/// Results of the bracket axiom checks.
#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub antisymmetry: ValidationReport,
    pub jacobi_identity: ValidationReport,
    pub generalized_leibniz: ValidationReport,
}

impl AxiomReport {
    pub fn reports(&self) -> [&ValidationReport; 3] {
        [&self.antisymmetry, &self.jacobi_identity, &self.generalized_leibniz]
    }

    pub fn pass(&self) -> bool {
        self.reports().iter().all(|r| r.pass)
    }
}

/// Tolerances for [`bracket_axiom_suite`].
#[derive(Clone, Copy, Debug)]
pub struct AxiomTolerances {
    pub antisymmetry: f64,
    pub jacobi_identity: f64,
    pub leibniz: f64,
}

impl AxiomTolerances {
    pub fn uniform(tol: f64) -> Self {
        AxiomTolerances {
            antisymmetry: tol,
            jacobi_identity: tol,
            leibniz: tol,
        }
    }
}

impl Default for AxiomTolerances {
    fn default() -> Self {
        AxiomTolerances {
            antisymmetry: 1e-12,
            jacobi_identity: 1e-7,
            leibniz: 1e-8,
        }
    }
}

/// Checks antisymmetry, the Jacobi identity over all triples, and the
/// generalized Leibniz rule `{f, gh} = g{f,h} + h{f,g} + gh E(f)` with `E = -R`.
pub fn bracket_axiom_suite(
    spec: &AlgebroidSpec,
    functions: &[&dyn PhaseFunction],
    states: &[ContactCoState],
    tol: AxiomTolerances,
) -> Result<AxiomReport> {
    if functions.len() < 3 {
        return Err(Error::Input("bracket_axiom_suite needs at least 3 functions".into()));
    }
    if states.is_empty() {
        return Err(Error::Input("bracket_axiom_suite needs at least one state".into()));
    }
    let k = functions.len();
    let zi = spec.base_dim() + spec.fiber_dim();
    let mut anti = Vec::new();
    let mut jac = Vec::new();
    let mut leib = Vec::new();
    for state in states {
        state.check(spec)?;
        let x = state.to_vec();
        let mut worst_anti = 0.0_f64;
        let mut worst_jac = 0.0_f64;
        let mut worst_leib = 0.0_f64;
        for i in 0..k {
            for j in (i + 1)..k {
                let (f, g) = (functions[i], functions[j]);
                let fg = jacobi_bracket_flat(spec, f, g, &x)?;
                let gf = jacobi_bracket_flat(spec, g, f, &x)?;
                worst_anti = worst_anti.max((fg + gf).abs());
            }
        }
        for i in 0..k {
            for j in (i + 1)..k {
                for l in (j + 1)..k {
                    let (f, g, h) = (functions[i], functions[j], functions[l]);
                    let gh = BracketFunction::new(spec, g, h);
                    let hf = BracketFunction::new(spec, h, f);
                    let fg = BracketFunction::new(spec, f, g);
                    let s = jacobi_bracket_flat(spec, f, &gh, &x)?
                        + jacobi_bracket_flat(spec, g, &hf, &x)?
                        + jacobi_bracket_flat(spec, h, &fg, &x)?;
                    worst_jac = worst_jac.max(s.abs());
                }
            }
        }
        for f in functions {
            let (_, df) = f.value_and_gradient(&x)?;
            let e_f = -df[zi];
            for j in 0..k {
                for l in j..k {
                    let (g, h) = (functions[j], functions[l]);
                    let gh = ProductFunction(g, h);
                    let (gv, hv) = (g.value(&x)?, h.value(&x)?);
                    let lhs = jacobi_bracket_flat(spec, *f, &gh, &x)?;
                    let rhs = gv * jacobi_bracket_flat(spec, *f, h, &x)?
                        + hv * jacobi_bracket_flat(spec, *f, g, &x)?
                        + gv * hv * e_f;
                    worst_leib = worst_leib.max((lhs - rhs).abs());
                }
            }
        }
        anti.push((worst_anti, x.clone()));
        jac.push((worst_jac, x.clone()));
        leib.push((worst_leib, x));
    }
    Ok(AxiomReport {
        antisymmetry: ValidationReport::from_residuals("bracket_antisymmetry", tol.antisymmetry, anti),
        jacobi_identity: ValidationReport::from_residuals("bracket_jacobi_identity", tol.jacobi_identity, jac),
        generalized_leibniz: ValidationReport::from_residuals("bracket_generalized_leibniz", tol.leibniz, leib),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::AlgebroidBuilder;

    fn so3() -> AlgebroidSpec {
        AlgebroidBuilder::new("so3", 0, 3)
            .structure(2, 0, 1, 1.0)
            .unwrap()
            .structure(0, 1, 2, 1.0)
            .unwrap()
            .structure(1, 2, 0, 1.0)
            .unwrap()
            .build()
            .unwrap()
    }

    fn tq(n: usize) -> AlgebroidSpec {
        let mut b = AlgebroidBuilder::new("tq", n, n);
        for i in 0..n {
            b = b.anchor(i, i, 1.0).unwrap();
        }
        b.build().unwrap()
    }

    fn f(spec: &AlgebroidSpec, text: &str) -> CotangentFunction {
        CotangentFunction::parse(spec, text, &Parameters::new()).unwrap()
    }

    #[test]
    fn poisson_relations() {
        let s = so3();
        let x = CoVector::new(vec![], vec![1.0, 2.0, 3.0]);
        assert_eq!(poisson_bracket(&s, &f(&s, "p1"), &f(&s, "p2"), &x).unwrap(), 3.0);

        let t = tq(2);
        let x = CoVector::new(vec![0.4, -0.3], vec![0.1, 0.7]);
        assert_eq!(poisson_bracket(&t, &f(&t, "p1"), &f(&t, "q1"), &x).unwrap(), 1.0);
        assert_eq!(poisson_bracket(&t, &f(&t, "q1"), &f(&t, "q2"), &x).unwrap(), 0.0);
    }

    #[test]
    fn poisson_rejects_z_dependence() {
        let t = tq(1);
        let x = CoVector::new(vec![0.0], vec![1.0]);
        let err = poisson_bracket(&t, &f(&t, "p1*z + z"), &f(&t, "q1"), &x).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn jacobi_local_relations() {
        let t = tq(2);
        let x = ContactCoState::new(vec![2.0, -1.0], vec![0.5, 0.25], 3.0);
        assert_eq!(jacobi_bracket(&t, &f(&t, "p1"), &f(&t, "z"), &x).unwrap(), 0.0);
        assert_eq!(jacobi_bracket(&t, &f(&t, "q1"), &f(&t, "z"), &x).unwrap(), -2.0);
        assert_eq!(jacobi_bracket(&t, &f(&t, "p2"), &f(&t, "q2"), &x).unwrap(), 1.0);

        let s = so3();
        for z in [-4.0, 0.0, 1.5] {
            let x = ContactCoState::new(vec![], vec![1.0, 2.0, 3.0], z);
            assert_eq!(jacobi_bracket(&s, &f(&s, "p1"), &f(&s, "p2"), &x).unwrap(), 3.0);
        }
    }

    #[test]
    fn hamiltonian_field_examples() {
        let t = tq(1);
        let v = hamiltonian_vector_field(&t, &f(&t, "p1^2/2 + q1^2"), &CoVector::new(vec![1.0], vec![1.0])).unwrap();
        assert_eq!((v.dq[0], v.dp[0], v.dz), (1.0, -2.0, 0.0));

        let s = so3();
        let v = hamiltonian_vector_field(
            &s,
            &f(&s, "0.5*(p1^2+p2^2+p3^2)"),
            &CoVector::new(vec![], vec![0.3, -1.2, 2.0]),
        )
        .unwrap();
        assert_eq!(v.dp, vec![0.0, 0.0, 0.0]);

        let v = hamiltonian_vector_field(&t, &f(&t, "4.2"), &CoVector::new(vec![0.1], vec![0.7])).unwrap();
        assert_eq!(v.to_vec(), vec![0.0, 0.0, 0.0]);
        assert!(hamiltonian_vector_field(&t, &f(&t, "z"), &CoVector::new(vec![0.1], vec![0.7])).is_err());
    }

    #[test]
    fn contact_field_examples() {
        let s = so3();
        let h = f(&s, "0.5*(p1^2+p2^2+p3^2) + 0.5*z");
        let v =
            contact_hamiltonian_vector_field(&s, &h, &ContactCoState::new(vec![], vec![1.0, 2.0, 3.0], 0.0)).unwrap();
        assert_eq!(v.dp, vec![-0.5, -1.0, -1.5]);
        assert_eq!(v.dz, 7.0);

        let t = tq(1);
        let h = f(&t, "p1^2/2 + z");
        let v = contact_hamiltonian_vector_field(&t, &h, &ContactCoState::new(vec![0.0], vec![1.0], 0.0)).unwrap();
        assert_eq!((v.dq[0], v.dp[0], v.dz), (1.0, -1.0, 0.5));

        let t2 = tq(2);
        let x = ContactCoState::new(vec![0.3, 0.9], vec![1.5, -2.0], 0.75);
        let v = contact_hamiltonian_vector_field(&t2, &f(&t2, "z"), &x).unwrap();
        assert_eq!(v.dq, vec![0.0, 0.0]);
        assert_eq!(v.dp, vec![-1.5, 2.0]);
        assert_eq!(v.dz, -0.75);
    }

    #[test]
    fn suite_needs_three_functions() {
        let t = tq(1);
        let (a, b) = (f(&t, "q1"), f(&t, "p1"));
        let fs: Vec<&dyn PhaseFunction> = vec![&a, &b];
        let x = ContactCoState::new(vec![0.0], vec![0.0], 0.0);
        assert!(bracket_axiom_suite(&t, &fs, &[x], AxiomTolerances::default()).is_err());
    }
}
