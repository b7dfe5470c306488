//! Lagrangian side on `A x R`: energy, fiber derivative, its numerical
//! inverse, and the Herglotz equations as an explicit first-order system.
//!
//! Points are laid out flat as `[q^1..q^n, y^1..y^m, z]`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::algebroid::AlgebroidSpec;
use crate::error::{check_len, Error, Result};
use crate::expr::{DualValue, Parameters, ScalarField};
use crate::jacobi::{ContactCoState, PhaseFunction};
use crate::linalg::solve_regular;

/// A point `(q, y, z)` of `A x R`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactState {
    pub q: Vec<f64>,
    pub y: Vec<f64>,
    pub z: f64,
}

impl ContactState {
    pub fn new(q: Vec<f64>, y: Vec<f64>, z: f64) -> Self {
        ContactState { q, y, z }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&self.y);
        v.push(self.z);
        v
    }

    pub fn from_slice(spec: &AlgebroidSpec, s: &[f64]) -> Result<Self> {
        let (n, m) = (spec.base_dim(), spec.fiber_dim());
        check_len("A x R state", n + m + 1, s.len())?;
        Ok(ContactState {
            q: s[..n].to_vec(),
            y: s[n..n + m].to_vec(),
            z: s[n + m],
        })
    }
}

/// Expression-defined function on `A x R` over variables `(q.., y.., z)`.
#[derive(Clone, Debug)]
pub struct TangentFunction {
    field: ScalarField,
    base_dim: usize,
    fiber_dim: usize,
}

impl TangentFunction {
    pub fn new(spec: &AlgebroidSpec, field: ScalarField) -> Result<Self> {
        check_len(
            "tangent function variables",
            spec.base_dim() + spec.fiber_dim() + 1,
            field.variables().len(),
        )?;
        Ok(TangentFunction {
            field,
            base_dim: spec.base_dim(),
            fiber_dim: spec.fiber_dim(),
        })
    }

    /// Parses `text` over the spec's `A x R` variable names.
    pub fn parse(spec: &AlgebroidSpec, text: &str, parameters: &Parameters) -> Result<Self> {
        let field = ScalarField::parse(text, &spec.tangent_variables(), parameters)?;
        Self::new(spec, field)
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        Ok(TangentFunction {
            field: self.field.with_parameter(name, value)?,
            ..self.clone()
        })
    }

    fn check(&self, s: &ContactState) -> Result<()> {
        check_len("state q", self.base_dim, s.q.len())?;
        check_len("state y", self.fiber_dim, s.y.len())?;
        Ok(())
    }

    fn fiber_range(&self) -> std::ops::Range<usize> {
        self.base_dim..self.base_dim + self.fiber_dim
    }

    /// Fiber Hessian `W_ab = d^2 l / dy^a dy^b` out of a full second-derivative evaluation.
    fn fiber_hessian(&self, d: &DualValue) -> DMatrix<f64> {
        let second = d.second.as_ref().expect("hessian evaluation");
        let off = self.base_dim;
        DMatrix::from_fn(self.fiber_dim, self.fiber_dim, |a, b| second.get(off + a, off + b))
    }
}

/// `E_l = y^a dl/dy^a - l`.
pub fn lagrangian_energy(l: &TangentFunction, s: &ContactState) -> Result<f64> {
    l.check(s)?;
    let d = l.field.eval_with_gradient(&s.to_vec())?;
    let euler: f64 = s.y.iter().zip(&d.derivs[l.fiber_range()]).map(|(y, ly)| y * ly).sum();
    Ok(euler - d.value)
}

/// `Fl(q, y, z) = (q, dl/dy, z)`.
pub fn fiber_derivative(l: &TangentFunction, s: &ContactState) -> Result<ContactCoState> {
    l.check(s)?;
    let d = l.field.eval_with_gradient(&s.to_vec())?;
    Ok(ContactCoState::new(
        s.q.clone(),
        d.derivs[l.fiber_range()].to_vec(),
        s.z,
    ))
}

/// Newton controls for inverting the fiber derivative.
#[derive(Clone, Debug)]
pub struct InversionControls {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting fiber velocity; `None` starts from `y = p`.
    pub y_guess: Option<Vec<f64>>,
}

impl Default for InversionControls {
    fn default() -> Self {
        InversionControls {
            tol: 1e-12,
            max_iter: 50,
            y_guess: None,
        }
    }
}

/// Solves `dl/dy (q, y, z) = p` for `y` by damped Newton iteration.
pub fn legendre_invert(
    l: &TangentFunction,
    target: &ContactCoState,
    y_guess: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ContactState> {
    check_len("target q", l.base_dim, target.q.len())?;
    check_len("target p", l.fiber_dim, target.p.len())?;
    check_len("y guess", l.fiber_dim, y_guess.len())?;
    if y_guess.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite Legendre guess".into()));
    }
    let mut s = ContactState::new(target.q.clone(), y_guess.to_vec(), target.z);
    let residual_of = |s: &ContactState| -> Result<Vec<f64>> {
        let p = fiber_derivative(l, s)?.p;
        Ok(p.iter().zip(&target.p).map(|(a, b)| a - b).collect())
    };
    let norm = |r: &[f64]| r.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut r = residual_of(&s)?;
    for _ in 0..max_iter {
        if norm(&r) < tol {
            return Ok(s);
        }
        let d = l.field.eval_with_hessian(&s.to_vec())?;
        let step = solve_regular(&l.fiber_hessian(&d), &r)?;
        let mut lambda = 1.0;
        loop {
            let trial_y: Vec<f64> = s.y.iter().zip(&step).map(|(y, dy)| y - lambda * dy).collect();
            let trial = ContactState::new(s.q.clone(), trial_y, s.z);
            let trial_r = residual_of(&trial);
            match trial_r {
                Ok(tr) if norm(&tr) < norm(&r) || lambda < 1e-6 => {
                    s = trial;
                    r = tr;
                    break;
                }
                Err(e) if lambda < 1e-6 => return Err(e),
                _ => lambda *= 0.5,
            }
        }
    }
    if norm(&r) < tol {
        return Ok(s);
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: norm(&r),
    })
}

fn invert_with(l: &TangentFunction, x: &ContactCoState, controls: &InversionControls) -> Result<ContactState> {
    let guess = controls.y_guess.clone().unwrap_or_else(|| x.p.clone());
    legendre_invert(l, x, &guess, controls.tol, controls.max_iter)
}

/// `h(x) = E_l(Fl^{-1}(x))`.
pub fn hamiltonian_from_lagrangian(
    spec: &AlgebroidSpec,
    l: &TangentFunction,
    x: &ContactCoState,
    controls: &InversionControls,
) -> Result<f64> {
    check_len("state q", spec.base_dim(), x.q.len())?;
    lagrangian_energy(l, &invert_with(l, x, controls)?)
}

/// The Hamiltonian `E_l o Fl^{-1}` as a [`PhaseFunction`].
///
/// Its gradient is exact given the inverse: `dh/dq = -dl/dq`, `dh/dp = y`,
/// `dh/dz = -dl/dz`, all at `(q, y, z) = Fl^{-1}(q, p, z)`.
#[derive(Clone, Debug)]
pub struct LegendreHamiltonian {
    lagrangian: TangentFunction,
    controls: InversionControls,
}

impl LegendreHamiltonian {
    pub fn new(lagrangian: TangentFunction, controls: InversionControls) -> Self {
        LegendreHamiltonian { lagrangian, controls }
    }
}

impl PhaseFunction for LegendreHamiltonian {
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let l = &self.lagrangian;
        let (n, m) = (l.base_dim, l.fiber_dim);
        check_len("A* x R state", n + m + 1, x.len())?;
        let target = ContactCoState::new(x[..n].to_vec(), x[n..n + m].to_vec(), x[n + m]);
        let s = invert_with(l, &target, &self.controls)?;
        let d = l.field.eval_with_gradient(&s.to_vec())?;
        let euler: f64 = s.y.iter().zip(&d.derivs[n..n + m]).map(|(y, ly)| y * ly).sum();
        let mut grad: Vec<f64> = d.derivs[..n].iter().map(|v| -v).collect();
        grad.extend_from_slice(&s.y);
        grad.push(-d.derivs[n + m]);
        Ok((euler - d.value, grad))
    }
}

/// Velocities `(dq, dy, dz)` on `A x R`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HerglotzVelocity {
    pub dq: Vec<f64>,
    pub dy: Vec<f64>,
    pub dz: f64,
}

impl HerglotzVelocity {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.dq.clone();
        v.extend_from_slice(&self.dy);
        v.push(self.dz);
        v
    }

    pub fn max_abs_diff(&self, other: &HerglotzVelocity) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Herglotz equations on a Lie algebroid, solved for the velocities.
///
/// `dq^i = rho^i_a y^a`, `dz = l`, and `dy` solves
/// `W_ab dy^b = rho^i_a l_qi - C^d_ab y^b l_yd + l_z l_ya - l_{ya qi} dq^i - l_{ya z} dz`,
/// the total time derivative of `dl/dy^a` having been expanded by the chain rule.
pub fn herglotz_rhs(spec: &AlgebroidSpec, l: &TangentFunction, s: &ContactState) -> Result<HerglotzVelocity> {
    check_len("state q", spec.base_dim(), s.q.len())?;
    check_len("state y", spec.fiber_dim(), s.y.len())?;
    l.check(s)?;
    herglotz_flat(spec, l, &s.to_vec())
}

pub(crate) fn herglotz_flat(spec: &AlgebroidSpec, l: &TangentFunction, x: &[f64]) -> Result<HerglotzVelocity> {
    let (n, m) = (spec.base_dim(), spec.fiber_dim());
    let q = &x[..n];
    let y = &x[n..n + m];
    let zi = n + m;
    let d = l.field.eval_with_hessian(x)?;
    let second = d.second.as_ref().expect("hessian evaluation");
    let g = &d.derivs;
    let rho = spec.eval_anchor(q)?;
    let c = spec.eval_structure(q)?;

    let dq: Vec<f64> = (0..n).map(|i| (0..m).map(|a| rho[(i, a)] * y[a]).sum()).collect();
    let dz = d.value;
    let rhs: Vec<f64> = (0..m)
        .map(|a| {
            let anchor: f64 = (0..n).map(|i| rho[(i, a)] * g[i]).sum();
            let mut structure = 0.0;
            for b in 0..m {
                for dd in 0..m {
                    structure += c.get(dd, a, b) * y[b] * g[n + dd];
                }
            }
            let dissipation = g[zi] * g[n + a];
            let mixed_q: f64 = (0..n).map(|i| second.get(n + a, i) * dq[i]).sum();
            let mixed_z = second.get(n + a, zi) * dz;
            anchor - structure + dissipation - mixed_q - mixed_z
        })
        .collect();
    let dy = solve_regular(&l.fiber_hessian(&d), &rhs)?;
    Ok(HerglotzVelocity { dq, dy, dz })
}
