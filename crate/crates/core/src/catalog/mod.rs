//! The tangent bundle, Lie algebras over a point, Atiyah algebroids and the
//! dissipative Wong system, plus a name registry for the command line.

mod atiyah;
mod lie;
mod wong;

pub use atiyah::{build_atiyah, curvature_from_connection, AtiyahData, Curvature};
pub use lie::LieAlgebraData;
pub use wong::{build_wong, lagrange_poincare_herglotz_rhs, wong_rhs_specialized, WongParts, WongSystem};

use crate::algebroid::{AlgebroidBuilder, AlgebroidSpec};
use crate::error::{Error, Result};

/// `TQ` over `R^n`: identity anchor, zero structure functions.
pub fn build_tangent_bundle(n: usize) -> Result<AlgebroidSpec> {
    if n == 0 {
        return Err(Error::Construction("tangent bundle needs n >= 1".into()));
    }
    let mut b = AlgebroidBuilder::new(&format!("tq{n}"), n, n);
    for i in 0..n {
        b = b.anchor(i, i, 1.0)?;
    }
    b.build()
}

/// A Lie algebra as an algebroid over a point.
pub fn build_lie_algebra(data: &LieAlgebraData) -> Result<AlgebroidSpec> {
    let m = data.dim();
    let mut b = AlgebroidBuilder::new(&format!("lie:{}", data.name()), 0, m);
    for a in 0..m {
        for bb in (a + 1)..m {
            for c in 0..m {
                if data.get(c, a, bb) != 0.0 {
                    b = b.structure(c, a, bb, data.get(c, a, bb))?;
                }
            }
        }
    }
    b.build()
}

use crate::dynamics::TangentFunction;
use crate::expr::Parameters;
use crate::jacobi::CotangentFunction;

/// Names accepted by [`load`].
pub const CATALOG_NAMES: &[&str] = &[
    "tq",
    "lie:so3",
    "lie:abelian",
    "atiyah",
    "atiyah:so3",
    "wong",
    "wong:so3",
];

/// One tunable parameter of a catalog entry.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ParameterInfo {
    pub name: &'static str,
    pub default: f64,
    pub description: &'static str,
}

const GAMMA: ParameterInfo = ParameterInfo {
    name: "gamma",
    default: 0.0,
    description: "dissipation rate",
};

/// Tunable parameters and defaults of a catalog entry.
pub fn parameter_schema(name: &str) -> Result<Vec<ParameterInfo>> {
    let strength = ParameterInfo {
        name: "s",
        default: 1.0,
        description: "connection strength",
    };
    match name {
        "tq" => Ok(vec![
            GAMMA,
            ParameterInfo {
                name: "k",
                default: 1.0,
                description: "spring constant",
            },
        ]),
        "lie:so3" | "lie:abelian" => Ok(vec![GAMMA]),
        "atiyah" | "atiyah:so3" | "wong" | "wong:so3" => Ok(vec![GAMMA, strength]),
        other => Err(Error::Input(format!(
            "unknown catalog system `{other}`; known: {}",
            CATALOG_NAMES.join(", ")
        ))),
    }
}

/// Selection options: `dim` for entries of variable size, parameter overrides.
#[derive(Clone, Debug, Default)]
pub struct CatalogOptions {
    pub dim: Option<usize>,
    pub parameters: Parameters,
}

/// A catalog entry with its default Hamiltonian and Lagrangian.
#[derive(Clone, Debug)]
pub struct CatalogSystem {
    pub name: String,
    pub spec: AlgebroidSpec,
    pub hamiltonian: CotangentFunction,
    pub lagrangian: TangentFunction,
    /// Metric and connection data for Atiyah and Wong entries.
    pub wong: Option<(WongSystem, AtiyahData)>,
    pub parameters: Parameters,
}

fn resolve_parameters(name: &str, options: &CatalogOptions) -> Result<Parameters> {
    let schema = parameter_schema(name)?;
    let mut out: Parameters = schema.iter().map(|p| (p.name.to_string(), p.default)).collect();
    for (k, v) in &options.parameters {
        if !out.contains_key(k) {
            let known: Vec<&str> = schema.iter().map(|p| p.name).collect();
            return Err(Error::Input(format!(
                "system `{name}` has no parameter `{k}`; known: {}",
                known.join(", ")
            )));
        }
        out.insert(k.clone(), *v);
    }
    Ok(out)
}

fn fixed_dim(name: &str, options: &CatalogOptions, dim: usize) -> Result<()> {
    match options.dim {
        Some(d) if d != dim => Err(Error::Input(format!(
            "system `{name}` has fixed dimension {dim}, got --dim {d}"
        ))),
        _ => Ok(()),
    }
}

fn sum_of_squares(prefix: &str, count: usize) -> String {
    if count == 0 {
        return "0".into();
    }
    (1..=count)
        .map(|i| format!("{prefix}{i}^2"))
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Builds a catalog entry by name.
///
/// - `tq`: `TR^n` (`--dim`, default 1), damped oscillator
///   `h = 1/2 |p|^2 + k/2 |q|^2 + gamma z`.
/// - `lie:so3`, `lie:abelian` (`--dim`, default 2): `h = 1/2 |p|^2 + gamma z`.
/// - `atiyah`, `wong`: abelian `R` over `R^2` with `A = s (-q2, q1)`, flat metrics.
/// - `atiyah:so3`, `wong:so3`: `so(3)` over `R^2` with `A_1^1 = -s q2`, `A_2^2 = s q1`.
pub fn load(name: &str, options: &CatalogOptions) -> Result<CatalogSystem> {
    let params = resolve_parameters(name, options)?;
    let gamma = params["gamma"];
    let (spec, h_text, l_text) = match name {
        "tq" => {
            let n = options.dim.unwrap_or(1);
            let spec = build_tangent_bundle(n)?;
            let h = format!(
                "0.5 * ({}) + 0.5 * k * ({}) + gamma * z",
                sum_of_squares("p", n),
                sum_of_squares("q", n)
            );
            let l = format!(
                "0.5 * ({}) - 0.5 * k * ({}) - gamma * z",
                sum_of_squares("y", n),
                sum_of_squares("q", n)
            );
            (spec, h, l)
        }
        "lie:so3" | "lie:abelian" => {
            let data = if name == "lie:so3" {
                fixed_dim(name, options, 3)?;
                LieAlgebraData::so3()
            } else {
                LieAlgebraData::abelian(options.dim.unwrap_or(2))?
            };
            let m = data.dim();
            let spec = build_lie_algebra(&data)?;
            let h = format!("0.5 * ({}) + gamma * z", sum_of_squares("p", m));
            let l = format!("0.5 * ({}) - gamma * z", sum_of_squares("y", m));
            (spec, h, l)
        }
        "atiyah" | "wong" | "atiyah:so3" | "wong:so3" => {
            fixed_dim(name, options, 2)?;
            let coords: Vec<String> = vec!["q1".into(), "q2".into()];
            let data = if name.ends_with("so3") {
                AtiyahData::parse(
                    LieAlgebraData::so3(),
                    coords.clone(),
                    &[vec!["-s * q2", "", ""], vec!["", "s * q1", ""]],
                    &params,
                )?
            } else {
                AtiyahData::parse(
                    LieAlgebraData::abelian(1)?,
                    coords.clone(),
                    &[vec!["-s * q2"], vec!["s * q1"]],
                    &params,
                )?
            };
            let sys = WongSystem::identity(&coords, data.algebra().dim(), gamma)?;
            let parts = build_wong(&sys, &data)?;
            return Ok(CatalogSystem {
                name: name.to_string(),
                spec: parts.spec,
                hamiltonian: parts.hamiltonian,
                lagrangian: parts.lagrangian,
                wong: Some((sys, data)),
                parameters: params,
            });
        }
        other => return Err(Error::Input(format!("unknown catalog system `{other}`"))),
    };
    let hamiltonian = CotangentFunction::parse(&spec, &h_text, &params)?;
    let lagrangian = TangentFunction::parse(&spec, &l_text, &params)?;
    Ok(CatalogSystem {
        name: name.to_string(),
        spec,
        hamiltonian,
        lagrangian,
        wong: None,
        parameters: params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::CoVector;
    use crate::algebroid::{sample_base_points, validate_anchor, validate_jacobi, DerivativeMode};
    use crate::expr::params;
    use crate::jacobi::{contact_hamiltonian_vector_field, hamiltonian_vector_field, ContactCoState};

    #[test]
    fn every_entry_passes_validators() {
        for name in CATALOG_NAMES {
            let sys = load(name, &CatalogOptions::default()).unwrap();
            let pts = sample_base_points(&sys.spec, 100, 11);
            for r in [
                validate_anchor(&sys.spec, &pts, 1e-8, DerivativeMode::Analytic).unwrap(),
                validate_jacobi(&sys.spec, &pts, 1e-8, DerivativeMode::Analytic).unwrap(),
            ] {
                assert!(r.pass, "{name}: {r:?}");
            }
        }
    }

    #[test]
    fn tq_one_gives_hamilton_equations() {
        let sys = load("tq", &CatalogOptions::default()).unwrap();
        let v = hamiltonian_vector_field(&sys.spec, &sys.hamiltonian, &CoVector::new(vec![0.7], vec![-0.2])).unwrap();
        assert_eq!(v.dq, vec![-0.2]);
        assert_eq!(v.dp, vec![-0.7]);
    }

    #[test]
    fn tq_two_matches_classical_contact_field() {
        let spec = build_tangent_bundle(2).unwrap();
        let h = CotangentFunction::parse(&spec, "0.5*(p1^2 + p2^2) + z", &Parameters::new()).unwrap();
        let x = ContactCoState::new(vec![0.3, -0.1], vec![1.5, -2.0], 0.4);
        let v = contact_hamiltonian_vector_field(&spec, &h, &x).unwrap();
        let hv = 0.5 * (1.5f64 * 1.5 + 4.0) + 0.4;
        assert_eq!(v.dq, vec![1.5, -2.0]);
        assert_eq!(v.dp, vec![-1.5, 2.0]);
        assert_eq!(v.dz, 1.5 * 1.5 + 4.0 - hv);
    }

    #[test]
    fn so3_gives_lie_poisson_equations() {
        let spec = build_lie_algebra(&LieAlgebraData::so3()).unwrap();
        let h = CotangentFunction::parse(&spec, "0.5*p1^2 + p2^2 + 1.5*p3^2", &Parameters::new()).unwrap();
        let p = vec![0.4, -1.0, 2.0];
        let v = hamiltonian_vector_field(&spec, &h, &CoVector::new(vec![], p.clone())).unwrap();
        let w = [p[0], 2.0 * p[1], 3.0 * p[2]];
        // dp_a = -p_c C^c_ab w_b = (p x w)_a
        let cross = [
            p[1] * w[2] - p[2] * w[1],
            p[2] * w[0] - p[0] * w[2],
            p[0] * w[1] - p[1] * w[0],
        ];
        for a in 0..3 {
            assert!((v.dp[a] - cross[a]).abs() < 1e-15);
        }
    }

    #[test]
    fn abelian_momenta_brackets_vanish() {
        let spec = build_lie_algebra(&LieAlgebraData::abelian(2).unwrap()).unwrap();
        assert_eq!(spec.eval_structure(&[]).unwrap().get(0, 0, 1), 0.0);
        assert_eq!(spec.eval_structure(&[]).unwrap().get(1, 0, 1), 0.0);
    }

    #[test]
    fn options_are_checked() {
        assert!(load("nope", &CatalogOptions::default()).is_err());
        let bad = CatalogOptions {
            dim: None,
            parameters: params([("omega", 1.0)]),
        };
        assert!(load("tq", &bad).is_err());
        let wrong_dim = CatalogOptions {
            dim: Some(4),
            parameters: Parameters::new(),
        };
        assert!(load("lie:so3", &wrong_dim).is_err());
        let tq3 = load(
            "tq",
            &CatalogOptions {
                dim: Some(3),
                parameters: params([("gamma", 0.2)]),
            },
        )
        .unwrap();
        assert_eq!(tq3.spec.base_dim(), 3);
        assert_eq!(tq3.hamiltonian.field().parameters()["gamma"], 0.2);
    }

    #[test]
    fn abelian_wong_spec_has_expected_curvature() {
        let sys = load("wong", &CatalogOptions::default()).unwrap();
        assert_eq!(sys.spec.eval_structure(&[0.2, 0.3]).unwrap().get(2, 0, 1), -2.0);
    }
}
