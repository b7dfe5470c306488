use contact_algebroid::algebroid::AlgebroidSpec;
use contact_algebroid::config::{resolve_system, RunConfig};
use contact_algebroid::dynamics::{
    fiber_derivative, legendre_invert, ContactState, InversionControls, LegendreHamiltonian, TangentFunction,
};
use contact_algebroid::expr::Parameters;
use contact_algebroid::integrate::{IntegratorConfig, Recording};
use contact_algebroid::jacobi::{ContactCoState, CotangentFunction, PhaseFunction};

use crate::failure::Failure;

/// A resolved system together with the run settings that act on it.
pub struct Session {
    pub cfg: RunConfig,
    pub name: String,
    pub spec: AlgebroidSpec,
    pub parameters: Parameters,
    pub hamiltonian: Option<Box<dyn PhaseFunction>>,
    pub lagrangian: Option<TangentFunction>,
}

impl Session {
    pub fn open(cfg: RunConfig) -> Result<Session, Failure> {
        let name = cfg
            .system
            .clone()
            .ok_or_else(|| Failure::Config("no system given (use --system or `system` in the config)".into()))?;
        let sys = resolve_system(&name, cfg.dim, &cfg.parameters())?;
        let spec = sys.spec;
        let params = sys.parameters;
        let lagrangian = match &cfg.lagrangian {
            Some(text) => Some(TangentFunction::parse(&spec, text, &params)?),
            None => sys.lagrangian,
        };
        // an explicit lagrangian replaces the system's hamiltonian by its Legendre dual
        let hamiltonian: Option<Box<dyn PhaseFunction>> = match (&cfg.hamiltonian, &cfg.lagrangian) {
            (Some(text), _) => Some(Box::new(CotangentFunction::parse(&spec, text, &params)?)),
            (None, Some(_)) => lagrangian.clone().map(legendre),
            (None, None) => match sys.hamiltonian {
                Some(h) => Some(Box::new(h)),
                None => lagrangian.clone().map(legendre),
            },
        };
        Ok(Session {
            cfg,
            name,
            spec,
            parameters: params,
            hamiltonian,
            lagrangian,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.spec.base_dim(), self.spec.fiber_dim())
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, Failure> {
        let cfg = &self.cfg;
        let (t0, t1) = (cfg.t0.unwrap_or(0.0), cfg.t1.unwrap_or(1.0));
        let mut ic = match cfg.method.as_deref().unwrap_or("rk4") {
            "rk4" => IntegratorConfig::rk4(cfg.step.unwrap_or(1e-3), t0, t1),
            "rkf45" => IntegratorConfig::rkf45(cfg.rtol.unwrap_or(1e-8), cfg.atol.unwrap_or(1e-10), t0, t1),
            other => return Err(Failure::Config(format!("unknown method `{other}` (rk4 or rkf45)"))),
        };
        ic = match (cfg.record_every, cfg.record_interval) {
            (Some(_), Some(_)) => return Err(Failure::Config("record_every and record_interval are exclusive".into())),
            (Some(k), None) => ic.recording(Recording::EveryStep(k)),
            (None, Some(dt)) => ic.recording(Recording::Interval(dt)),
            (None, None) => ic,
        };
        ic.validate()?;
        Ok(ic)
    }

    fn q0(&self) -> Result<Vec<f64>, Failure> {
        let n = self.spec.base_dim();
        let q = self.cfg.q0.clone().unwrap_or_else(|| vec![0.0; n]);
        check_len("q0", n, q.len())?;
        Ok(q)
    }

    /// Initial point on `A* x R`; a given `y0` is mapped through the fiber derivative.
    pub fn initial_costate(&self) -> Result<ContactCoState, Failure> {
        let q = self.q0()?;
        let z = self.cfg.z0.unwrap_or(0.0);
        let m = self.spec.fiber_dim();
        match (&self.cfg.p0, &self.cfg.y0, &self.lagrangian) {
            (Some(p), _, _) => {
                check_len("p0", m, p.len())?;
                Ok(ContactCoState::new(q, p.clone(), z))
            }
            (None, Some(y), Some(l)) => {
                check_len("y0", m, y.len())?;
                Ok(fiber_derivative(l, &ContactState::new(q, y.clone(), z))?)
            }
            (None, Some(_), None) => Err(Failure::Config("y0 needs a lagrangian to map it to momenta".into())),
            (None, None, _) => Ok(ContactCoState::new(q, vec![0.0; m], z)),
        }
    }

    /// Initial point on `A x R`; a given `p0` is pulled back by inverting the fiber derivative.
    pub fn initial_state(&self) -> Result<ContactState, Failure> {
        let l = self.require_lagrangian()?;
        let q = self.q0()?;
        let z = self.cfg.z0.unwrap_or(0.0);
        let m = self.spec.fiber_dim();
        match (&self.cfg.y0, &self.cfg.p0) {
            (Some(y), _) => {
                check_len("y0", m, y.len())?;
                Ok(ContactState::new(q, y.clone(), z))
            }
            (None, Some(p)) => {
                check_len("p0", m, p.len())?;
                let target = ContactCoState::new(q, p.clone(), z);
                Ok(legendre_invert(l, &target, p, 1e-12, 50)?)
            }
            (None, None) => Ok(ContactState::new(q, vec![0.0; m], z)),
        }
    }

    pub fn require_lagrangian(&self) -> Result<&TangentFunction, Failure> {
        self.lagrangian
            .as_ref()
            .ok_or_else(|| Failure::Config(format!("system `{}` has no lagrangian; pass --lagrangian", self.name)))
    }

    pub fn require_hamiltonian(&self) -> Result<&dyn PhaseFunction, Failure> {
        self.hamiltonian
            .as_deref()
            .ok_or_else(|| Failure::Config(format!("system `{}` has no hamiltonian; pass --hamiltonian", self.name)))
    }
}

fn legendre(l: TangentFunction) -> Box<dyn PhaseFunction> {
    Box::new(LegendreHamiltonian::new(l, InversionControls::default()))
}

fn check_len(what: &str, expected: usize, found: usize) -> Result<(), Failure> {
    if expected == found {
        Ok(())
    } else {
        Err(Failure::Config(format!(
            "{what} has {found} entries, system needs {expected}"
        )))
    }
}
