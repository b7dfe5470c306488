use std::collections::BTreeMap;

use contact_algebroid::algebroid::{
    sample_base_points, validate_anchor, validate_jacobi, AlgebroidSpec, CoVector, DerivativeMode, ValidationReport,
};
use contact_algebroid::catalog::{self, CatalogOptions, CATALOG_NAMES};
use contact_algebroid::config::parse_spec_text;
use contact_algebroid::dynamics::{herglotz_rhs, ContactState, TangentFunction};
use contact_algebroid::expr::{self, Parameters};
use contact_algebroid::integrate::{
    dissipation_diagnostics, energy_diagnostics, integrate as run_integrator, IntegratorConfig, StateKind,
};
use contact_algebroid::jacobi::{
    contact_hamiltonian_vector_field, hamiltonian_vector_field, jacobi_bracket as bracket, poisson_bracket as poisson,
    ContactCoState, CotangentFunction, PhaseFunction,
};
use contact_algebroid::Error;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pyalgebroid, AlgebroidError, PyValueError);
create_exception!(pyalgebroid, RegularityError, AlgebroidError);
create_exception!(pyalgebroid, IntegrationError, AlgebroidError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Regularity { .. } | Error::Convergence { .. } => RegularityError::new_err(e.to_string()),
        Error::StepUnderflow { .. } | Error::Divergence { .. } => IntegrationError::new_err(e.to_string()),
        _ => AlgebroidError::new_err(e.to_string()),
    }
}

fn params(p: Option<BTreeMap<String, f64>>) -> Parameters {
    p.unwrap_or_default().into_iter().collect()
}

/// Expression in named variables with exact first and second derivatives.
#[pyclass(frozen)]
struct ScalarField {
    inner: expr::ScalarField,
}

#[pymethods]
impl ScalarField {
    #[new]
    #[pyo3(signature = (text, variables, params=None))]
    fn new(text: &str, variables: Vec<String>, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let inner = expr::ScalarField::parse(text, &variables, &self::params(params)).map_err(to_py)?;
        Ok(ScalarField { inner })
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.inner.variables().to_vec()
    }

    fn render(&self) -> String {
        self.inner.render()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x).map_err(to_py)
    }

    /// `(value, gradient)`.
    fn gradient(&self, x: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        let d = self.inner.eval_with_gradient(&x).map_err(to_py)?;
        Ok((d.value, d.derivs))
    }

    fn hessian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let d = self.inner.eval_with_hessian(&x).map_err(to_py)?;
        Ok(d.second.map(|s| s.to_rows()).unwrap_or_default())
    }

    fn __repr__(&self) -> String {
        format!("ScalarField({:?})", self.inner.render())
    }
}

/// Local Lie algebroid data: anchor and structure functions.
#[pyclass(frozen)]
struct Algebroid {
    spec: AlgebroidSpec,
    parameters: Parameters,
}

impl Algebroid {
    fn cotangent(&self, text: &str) -> PyResult<CotangentFunction> {
        CotangentFunction::parse(&self.spec, text, &self.parameters).map_err(to_py)
    }

    fn tangent(&self, text: &str) -> PyResult<TangentFunction> {
        TangentFunction::parse(&self.spec, text, &self.parameters).map_err(to_py)
    }

    fn costate(&self, x: &[f64]) -> PyResult<ContactCoState> {
        ContactCoState::from_slice(&self.spec, x).map_err(to_py)
    }
}

#[pymethods]
impl Algebroid {
    /// `TQ` over `R^n`: identity anchor, zero structure.
    #[staticmethod]
    fn tangent_bundle(n: usize) -> PyResult<Self> {
        let spec = catalog::build_tangent_bundle(n).map_err(to_py)?;
        Ok(Algebroid {
            spec,
            parameters: Parameters::new(),
        })
    }

    /// Parses a TOML spec file body.
    #[staticmethod]
    #[pyo3(signature = (text, params=None))]
    fn from_config(text: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let sys = parse_spec_text(text, &self::params(params)).map_err(to_py)?;
        Ok(Algebroid {
            spec: sys.spec,
            parameters: sys.parameters,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.name().to_string()
    }

    #[getter]
    fn base_dim(&self) -> usize {
        self.spec.base_dim()
    }

    #[getter]
    fn fiber_dim(&self) -> usize {
        self.spec.fiber_dim()
    }

    #[getter]
    fn coordinates(&self) -> Vec<String> {
        self.spec.coordinates().to_vec()
    }

    /// `rho[i][a]` at `q`.
    fn anchor(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let rho = self.spec.eval_anchor(&q).map_err(to_py)?;
        Ok((0..rho.nrows()).map(|i| rho.row(i).iter().copied().collect()).collect())
    }

    /// `C[d][a][b]` at `q`.
    fn structure(&self, q: Vec<f64>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let c = self.spec.eval_structure(&q).map_err(to_py)?;
        let m = c.dim();
        Ok((0..m)
            .map(|d| (0..m).map(|a| (0..m).map(|b| c.get(d, a, b)).collect()).collect())
            .collect())
    }

    /// Anchor compatibility and structure Jacobi reports on random base points.
    #[pyo3(signature = (samples=100, seed=0, tol=1e-8))]
    fn validate<'py>(&self, py: Python<'py>, samples: usize, seed: u64, tol: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let pts = sample_base_points(&self.spec, samples, seed);
        let reports = [
            validate_anchor(&self.spec, &pts, tol, DerivativeMode::Analytic).map_err(to_py)?,
            validate_jacobi(&self.spec, &pts, tol, DerivativeMode::Analytic).map_err(to_py)?,
        ];
        reports.iter().map(|r| report_dict(py, r)).collect()
    }

    /// `{f, g}` on `A*` for `z`-free expressions in `(q, p)`.
    fn poisson_bracket(&self, f: &str, g: &str, q: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
        poisson(
            &self.spec,
            &self.cotangent(f)?,
            &self.cotangent(g)?,
            &CoVector::new(q, p),
        )
        .map_err(to_py)
    }

    /// Jacobi bracket on `A* x R` at the flat state `x = (q, p, z)`.
    fn jacobi_bracket(&self, f: &str, g: &str, x: Vec<f64>) -> PyResult<f64> {
        bracket(&self.spec, &self.cotangent(f)?, &self.cotangent(g)?, &self.costate(&x)?).map_err(to_py)
    }

    fn hamiltonian_field(&self, h: &str, q: Vec<f64>, p: Vec<f64>) -> PyResult<Vec<f64>> {
        let v = hamiltonian_vector_field(&self.spec, &self.cotangent(h)?, &CoVector::new(q, p)).map_err(to_py)?;
        let mut out = v.dq;
        out.extend(v.dp);
        Ok(out)
    }

    /// Contact Hamiltonian field `(dq, dp, dz)` at `x = (q, p, z)`.
    fn contact_field(&self, h: &str, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let v = contact_hamiltonian_vector_field(&self.spec, &self.cotangent(h)?, &self.costate(&x)?).map_err(to_py)?;
        Ok(v.to_vec())
    }

    /// Herglotz velocities `(dq, dy, dz)` at `s = (q, y, z)`.
    fn herglotz(&self, l: &str, s: Vec<f64>) -> PyResult<Vec<f64>> {
        let s = ContactState::from_slice(&self.spec, &s).map_err(to_py)?;
        Ok(herglotz_rhs(&self.spec, &self.tangent(l)?, &s).map_err(to_py)?.to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Algebroid({:?}, base_dim={}, fiber_dim={})",
            self.spec.name(),
            self.spec.base_dim(),
            self.spec.fiber_dim()
        )
    }
}

fn report_dict<'py>(py: Python<'py>, r: &ValidationReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("check", &r.check)?;
    d.set_item("residual", r.residual)?;
    d.set_item("tolerance", r.tolerance)?;
    d.set_item("pass", r.pass)?;
    d.set_item("samples", r.samples)?;
    Ok(d)
}

/// A catalog system: its algebroid and the default `h` and `l` texts.
#[pyclass(frozen)]
struct System {
    #[pyo3(get)]
    name: String,
    #[pyo3(get)]
    algebroid: Py<Algebroid>,
    #[pyo3(get)]
    hamiltonian: String,
    #[pyo3(get)]
    lagrangian: String,
}

#[pyfunction]
fn catalog_names() -> Vec<&'static str> {
    CATALOG_NAMES.to_vec()
}

#[pyfunction]
#[pyo3(signature = (name, dim=None, params=None))]
fn load(py: Python<'_>, name: &str, dim: Option<usize>, params: Option<BTreeMap<String, f64>>) -> PyResult<System> {
    let options = CatalogOptions {
        dim,
        parameters: self::params(params),
    };
    let sys = catalog::load(name, &options).map_err(to_py)?;
    let algebroid = Algebroid {
        spec: sys.spec,
        parameters: sys.parameters,
    };
    Ok(System {
        name: sys.name,
        algebroid: Py::new(py, algebroid)?,
        hamiltonian: sys.hamiltonian.field().source().to_string(),
        lagrangian: sys.lagrangian.field().source().to_string(),
    })
}

/// Integrates the contact flow of `hamiltonian` or the Herglotz flow of
/// `lagrangian` from `x0`. Returns times, states, the energy and the
/// dissipation-law residual per sample.
#[pyfunction]
#[pyo3(signature = (algebroid, x0, hamiltonian=None, lagrangian=None, t0=0.0, t1=1.0, method="rk4", step=1e-3, rtol=1e-8, atol=1e-10))]
#[allow(clippy::too_many_arguments)]
fn integrate<'py>(
    py: Python<'py>,
    algebroid: &Algebroid,
    x0: Vec<f64>,
    hamiltonian: Option<&str>,
    lagrangian: Option<&str>,
    t0: f64,
    t1: f64,
    method: &str,
    step: f64,
    rtol: f64,
    atol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = &algebroid.spec;
    let cfg = match method {
        "rk4" => IntegratorConfig::rk4(step, t0, t1),
        "rkf45" => IntegratorConfig::rkf45(rtol, atol, t0, t1),
        other => return Err(AlgebroidError::new_err(format!("unknown method `{other}`"))),
    };
    let dims = (spec.base_dim(), spec.fiber_dim());
    let (traj, series) = match (hamiltonian, lagrangian) {
        (Some(h), None) => {
            let h = algebroid.cotangent(h)?;
            let rhs = |x: &[f64]| {
                let c = ContactCoState::from_slice(spec, x)?;
                Ok(contact_hamiltonian_vector_field(spec, &h as &dyn PhaseFunction, &c)?.to_vec())
            };
            let traj = py
                .detach(|| run_integrator(rhs, &x0, StateKind::Cotangent, dims, &cfg))
                .map_err(|e| to_py(e.error))?;
            let series = (traj.len() >= 3)
                .then(|| dissipation_diagnostics(spec, &h, &traj))
                .transpose()
                .map_err(to_py)?;
            (traj, series)
        }
        (None, Some(l)) => {
            let l = algebroid.tangent(l)?;
            let rhs = |s: &[f64]| {
                let s = ContactState::from_slice(spec, s)?;
                Ok(herglotz_rhs(spec, &l, &s)?.to_vec())
            };
            let traj = py
                .detach(|| run_integrator(rhs, &x0, StateKind::Tangent, dims, &cfg))
                .map_err(|e| to_py(e.error))?;
            let series = (traj.len() >= 3)
                .then(|| energy_diagnostics(spec, &l, &traj))
                .transpose()
                .map_err(to_py)?;
            (traj, series)
        }
        _ => return Err(AlgebroidError::new_err("give exactly one of hamiltonian or lagrangian")),
    };
    let out = PyDict::new(py);
    out.set_item("times", &traj.times)?;
    out.set_item("states", &traj.states)?;
    out.set_item("energy", series.as_ref().map(|s| s.h_values.clone()))?;
    out.set_item("residual", series.as_ref().map(|s| s.residual.clone()))?;
    out.set_item("decay_fit_rate", series.as_ref().and_then(|s| s.decay_fit_rate()))?;
    Ok(out)
}

/// Registers the module contents; shared by the extension entry point and tests.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<ScalarField>()?;
    m.add_class::<Algebroid>()?;
    m.add_class::<System>()?;
    m.add_function(wrap_pyfunction!(catalog_names, m)?)?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add("AlgebroidError", py.get_type::<AlgebroidError>())?;
    m.add("RegularityError", py.get_type::<RegularityError>())?;
    m.add("IntegrationError", py.get_type::<IntegrationError>())?;
    Ok(())
}

#[pymodule]
fn pyalgebroid(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
