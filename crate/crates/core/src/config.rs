//! Text configuration: algebroid spec files and run configs, both TOML.
//!
//! A spec file describes one algebroid. Indices are 1-based; structure keys
//! are `"d,a,b"` for `C^d_ab` (the reflected entry `C^d_ba` is implied).
//!
//! ```toml
//! name = "heisenberg"
//! coordinates = ["x"]          # or base_dim = 1
//! fiber_dim = 2                # or sections = ["e1", "e2"]
//! box = [[-2.0, 2.0]]          # sampling box for validators, default [-1, 1]
//! hamiltonian = "0.5*(p1^2 + p2^2) + gamma*z"    # optional
//! lagrangian = "0.5*(y1^2 + y2^2) - gamma*z"     # optional
//!
//! [params]
//! gamma = 0.1
//!
//! [anchor]
//! "1,1" = "1"
//!
//! [structure]
//! "2,1,2" = "x"
//! ```
//!
//! A run config names a system (catalog name or spec-file path) and carries
//! the same fields as the command-line flags; see [`RunConfig`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebroid::{AlgebroidBuilder, AlgebroidSpec};
use crate::catalog::{self, AtiyahData, CatalogOptions, WongSystem, CATALOG_NAMES};
use crate::dynamics::TangentFunction;
use crate::error::{Error, Result};
use crate::expr::{Parameters, ScalarField};
use crate::jacobi::CotangentFunction;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    name: Option<String>,
    base_dim: Option<usize>,
    coordinates: Option<Vec<String>>,
    fiber_dim: Option<usize>,
    sections: Option<Vec<String>>,
    #[serde(rename = "box")]
    sample_box: Option<Vec<[f64; 2]>>,
    hamiltonian: Option<String>,
    lagrangian: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default)]
    anchor: BTreeMap<String, String>,
    #[serde(default)]
    structure: BTreeMap<String, String>,
}

/// A system ready for the engine, with whichever of `h`, `l` are known.
#[derive(Clone, Debug)]
pub struct ResolvedSystem {
    pub spec: AlgebroidSpec,
    pub hamiltonian: Option<CotangentFunction>,
    pub lagrangian: Option<TangentFunction>,
    pub wong: Option<(WongSystem, AtiyahData)>,
    pub parameters: Parameters,
}

fn parse_indices(key: &str, count: usize, bounds: &[usize], table: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    if parts.len() != count {
        return Err(Error::Input(format!(
            "[{table}] key `{key}` needs {count} comma-separated 1-based indices"
        )));
    }
    parts
        .iter()
        .zip(bounds)
        .map(|(p, &hi)| match p.parse::<usize>() {
            Ok(v) if (1..=hi).contains(&v) => Ok(v - 1),
            _ => Err(Error::Input(format!(
                "[{table}] key `{key}`: index `{p}` not in 1..={hi}"
            ))),
        })
        .collect()
}

fn coefficient(text: &str, coords: &[String], params: &Parameters) -> Result<crate::algebroid::Coefficient> {
    let f = ScalarField::parse(text, coords, params)?;
    Ok(match f.ast() {
        crate::expr::Node::Num(v) => (*v).into(),
        _ => f.into(),
    })
}

/// Parses a spec file. `overrides` rebind or add parameters.
pub fn parse_spec_text(text: &str, overrides: &Parameters) -> Result<ResolvedSystem> {
    let file: SpecFile = toml::from_str(text).map_err(|e| Error::Input(format!("spec file: {}", e.message())))?;
    let coords = match (&file.coordinates, file.base_dim) {
        (Some(c), Some(n)) if c.len() != n => {
            return Err(Error::Input(format!(
                "base_dim = {n} but {} coordinates given",
                c.len()
            )))
        }
        (Some(c), _) => c.clone(),
        (None, Some(n)) => (1..=n).map(|i| format!("q{i}")).collect(),
        (None, None) => Vec::new(),
    };
    let m = match (&file.sections, file.fiber_dim) {
        (Some(s), Some(m)) if s.len() != m => {
            return Err(Error::Input(format!("fiber_dim = {m} but {} sections given", s.len())))
        }
        (Some(s), _) => s.len(),
        (None, Some(m)) => m,
        (None, None) => return Err(Error::Input("spec file needs fiber_dim or sections".into())),
    };
    let n = coords.len();
    let mut params: Parameters = file.params.clone();
    params.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));

    let mut b = AlgebroidBuilder::new(file.name.as_deref().unwrap_or("custom"), n, m).coordinates(coords.clone())?;
    if let Some(s) = file.sections.clone() {
        b = b.sections(s)?;
    }
    if let Some(bx) = &file.sample_box {
        b = b.sample_box(bx.iter().map(|[lo, hi]| (*lo, *hi)).collect())?;
    }
    for (key, text) in &file.anchor {
        let idx = parse_indices(key, 2, &[n, m], "anchor")?;
        b = b.anchor(idx[0], idx[1], coefficient(text, &coords, &params)?)?;
    }
    for (key, text) in &file.structure {
        let idx = parse_indices(key, 3, &[m, m, m], "structure")?;
        b = b.structure(idx[0], idx[1], idx[2], coefficient(text, &coords, &params)?)?;
    }
    let spec = b.build()?;
    let hamiltonian = file
        .hamiltonian
        .as_deref()
        .map(|t| CotangentFunction::parse(&spec, t, &params))
        .transpose()?;
    let lagrangian = file
        .lagrangian
        .as_deref()
        .map(|t| TangentFunction::parse(&spec, t, &params))
        .transpose()?;
    Ok(ResolvedSystem {
        spec,
        hamiltonian,
        lagrangian,
        wong: None,
        parameters: params,
    })
}

pub fn load_spec_file(path: &Path, overrides: &Parameters) -> Result<ResolvedSystem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read spec file {}: {e}", path.display())))?;
    parse_spec_text(&text, overrides)
}

/// Catalog name or spec-file path.
pub fn resolve_system(system: &str, dim: Option<usize>, parameters: &Parameters) -> Result<ResolvedSystem> {
    if CATALOG_NAMES.contains(&system) {
        let sys = catalog::load(
            system,
            &CatalogOptions {
                dim,
                parameters: parameters.clone(),
            },
        )?;
        return Ok(ResolvedSystem {
            spec: sys.spec,
            hamiltonian: Some(sys.hamiltonian),
            lagrangian: Some(sys.lagrangian),
            wong: sys.wong,
            parameters: sys.parameters,
        });
    }
    let path = Path::new(system);
    if !path.exists() {
        return Err(Error::Input(format!(
            "`{system}` is neither a catalog system ({}) nor an existing file",
            CATALOG_NAMES.join(", ")
        )));
    }
    if dim.is_some() {
        return Err(Error::Input("--dim only applies to catalog systems".into()));
    }
    load_spec_file(path, parameters)
}

/// Run settings; every field mirrors a command-line flag of the same name.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<String>,
    pub dim: Option<usize>,
    pub hamiltonian: Option<String>,
    pub lagrangian: Option<String>,
    /// `hamiltonian` or `lagrangian`: which side `simulate` integrates.
    pub side: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub gamma: Option<f64>,
    pub q0: Option<Vec<f64>>,
    pub p0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub z0: Option<f64>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub method: Option<String>,
    pub step: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub record_every: Option<usize>,
    pub record_interval: Option<f64>,
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub samples: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Input(format!("run config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fields set in `other` win.
    pub fn overlay(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            system,
            dim,
            hamiltonian,
            lagrangian,
            side,
            gamma,
            q0,
            p0,
            y0,
            z0,
            t0,
            t1,
            method,
            step,
            rtol,
            atol,
            record_every,
            record_interval,
            out,
            seed,
            tol,
            samples
        );
        self.params.extend(other.params);
        self
    }

    /// `params` with `gamma` folded in.
    pub fn parameters(&self) -> Parameters {
        let mut p = self.params.clone();
        if let Some(g) = self.gamma {
            p.insert("gamma".into(), g);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::{sample_base_points, validate_jacobi, DerivativeMode};

    const CORRUPTED: &str = r#"
name = "so3_corrupted"
fiber_dim = 3

[structure]
"3,1,2" = "1"
"1,2,3" = "1"
"2,3,1" = "1"
"1,1,2" = "1"
"#;

    #[test]
    fn corrupted_so3_fails_jacobi() {
        let sys = parse_spec_text(CORRUPTED, &Parameters::new()).unwrap();
        assert_eq!(sys.spec.base_dim(), 0);
        let c = sys.spec.eval_structure(&[]).unwrap();
        assert_eq!(c.get(1, 2, 0), 1.0);
        assert_eq!(c.get(1, 0, 2), -1.0);
        let r = validate_jacobi(
            &sys.spec,
            &sample_base_points(&sys.spec, 5, 0),
            1e-8,
            DerivativeMode::Analytic,
        )
        .unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn full_spec_file() {
        let text = r#"
name = "heisenberg"
coordinates = ["x"]
sections = ["a", "b"]
box = [[-2.0, 2.0]]
hamiltonian = "0.5*(p1^2 + p2^2) + gamma*z"

[params]
gamma = 0.1

[anchor]
"1,1" = "1"

[structure]
"2,1,2" = "x"
"#;
        let sys = parse_spec_text(text, &crate::expr::params([("gamma", 0.4)])).unwrap();
        assert_eq!(sys.spec.sample_box(), &[(-2.0, 2.0)]);
        assert_eq!(sys.spec.eval_structure(&[0.5]).unwrap().get(1, 0, 1), 0.5);
        assert_eq!(sys.hamiltonian.unwrap().field().parameters()["gamma"], 0.4);
        assert!(sys.lagrangian.is_none());
    }

    #[test]
    fn spec_file_errors() {
        assert!(parse_spec_text("fiber_dim = 2\n[structure]\n\"1,1,3\" = \"1\"", &Parameters::new()).is_err());
        assert!(parse_spec_text("fiber_dim = 2\n[anchor]\n\"1,1\" = \"1\"", &Parameters::new()).is_err());
        assert!(parse_spec_text("fiber_dim = 2\nbogus = 1", &Parameters::new()).is_err());
        assert!(parse_spec_text("coordinates = [\"x\"]", &Parameters::new()).is_err());
        assert!(resolve_system("no/such/file.cfg", None, &Parameters::new()).is_err());
    }

    #[test]
    fn run_config_overlay() {
        let base = RunConfig::parse("system = \"tq\"\nt1 = 2.0\nq0 = [1.0]\n[params]\nk = 2.0").unwrap();
        let cli = RunConfig {
            t1: Some(3.0),
            gamma: Some(0.5),
            ..Default::default()
        };
        let merged = base.overlay(cli);
        assert_eq!(merged.t1, Some(3.0));
        assert_eq!(merged.q0, Some(vec![1.0]));
        assert_eq!(merged.parameters(), crate::expr::params([("k", 2.0), ("gamma", 0.5)]));
        assert!(RunConfig::parse("unknown = 1").is_err());
    }
}
