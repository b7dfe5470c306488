use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use contact_algebroid::algebroid::{
    sample_base_points, validate_anchor, validate_jacobi, AlgebroidSpec, DerivativeMode, ValidationReport,
};
use contact_algebroid::config::RunConfig;
use contact_algebroid::dynamics::{fiber_derivative, herglotz_rhs, ContactState, TangentFunction};
use contact_algebroid::expr::Parameters;
use contact_algebroid::integrate::{
    dissipation_diagnostics, energy_diagnostics, fmt17, integrate, IntegrationError, IntegratorConfig, Recording,
    StateKind, Trajectory,
};
use contact_algebroid::jacobi::{
    bracket_axiom_suite, contact_hamiltonian_vector_field, AxiomTolerances, ContactCoState, CotangentFunction,
    PhaseFunction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::parse_assignment;
use crate::failure::Failure;
use crate::session::Session;

const BRACKET_FUNCTIONS: usize = 5;
const BRACKET_STATES: usize = 20;

#[derive(Serialize)]
struct CheckReport<'a> {
    system: &'a str,
    pass: bool,
    checks: Vec<ValidationReport>,
}

fn emit_report(cfg: &RunConfig, report: &CheckReport) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report)?;
    println!("{text}");
    if let Some(out) = &cfg.out {
        std::fs::write(out, format!("{text}\n"))?;
    }
    if report.pass {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.check.as_str())
            .collect();
        Err(Failure::Validation(failed.join(", ")))
    }
}

/// Random functions of `(q, p, z)` mixing polynomial, trigonometric and exponential terms.
fn test_functions(spec: &AlgebroidSpec, rng: &mut ChaCha8Rng) -> Result<Vec<CotangentFunction>, Failure> {
    let vars = spec.cotangent_variables();
    let mut out = Vec::with_capacity(BRACKET_FUNCTIONS);
    for _ in 0..BRACKET_FUNCTIONS {
        let mut pick = || vars[rng.gen_range(0..vars.len())].clone();
        let (a, b, c, d, e) = (pick(), pick(), pick(), pick(), pick());
        let k: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let text = format!(
            "{:.4} * {a} * {b} + {:.4} * sin({c}) + {:.4} * {d} * z + {:.4} * exp(0.3 * {e}) + {:.4} * z^2",
            k[0], k[1], k[2], k[3], k[4]
        );
        out.push(CotangentFunction::parse(spec, &text, &Parameters::new())?);
    }
    Ok(out)
}

pub fn validate(cfg: RunConfig) -> Result<(), Failure> {
    let session = Session::open(cfg)?;
    let spec = &session.spec;
    let seed = session.cfg.seed.unwrap_or(0);
    let tol = session.cfg.tol.unwrap_or(1e-8);
    let samples = session.cfg.samples.unwrap_or(100);
    if samples == 0 {
        return Err(Failure::Config("samples must be positive".into()));
    }
    let points = sample_base_points(spec, samples, seed);
    let mut checks = vec![
        validate_anchor(spec, &points, tol, DerivativeMode::Analytic)?,
        validate_jacobi(spec, &points, tol, DerivativeMode::Analytic)?,
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let functions = test_functions(spec, &mut rng)?;
    let m = spec.fiber_dim();
    let states: Vec<ContactCoState> = sample_base_points(spec, BRACKET_STATES, seed.wrapping_add(1))
        .into_iter()
        .map(|q| {
            let p = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            ContactCoState::new(q.0, p, rng.gen_range(-1.0..1.0))
        })
        .collect();
    let refs: Vec<&dyn PhaseFunction> = functions.iter().map(|f| f as &dyn PhaseFunction).collect();
    let axioms = bracket_axiom_suite(spec, &refs, &states, AxiomTolerances::default())?;
    checks.extend(axioms.reports().into_iter().cloned());

    let pass = checks.iter().all(|c| c.pass);
    emit_report(
        &session.cfg,
        &CheckReport {
            system: &session.name,
            pass,
            checks,
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Side {
    Hamiltonian,
    Lagrangian,
}

fn choose_side(cfg: &RunConfig) -> Result<Side, Failure> {
    match (cfg.side.as_deref(), &cfg.hamiltonian, &cfg.lagrangian) {
        (Some("hamiltonian"), _, _) => Ok(Side::Hamiltonian),
        (Some("lagrangian"), _, _) => Ok(Side::Lagrangian),
        (Some(other), _, _) => Err(Failure::Config(format!("unknown side `{other}`"))),
        (None, Some(_), Some(_)) => Err(Failure::Config(
            "both a hamiltonian and a lagrangian were given; pick one with --side".into(),
        )),
        (None, None, Some(_)) => Ok(Side::Lagrangian),
        (None, _, None) => Ok(Side::Hamiltonian),
    }
}

#[derive(Serialize)]
struct Diagnostics {
    system: String,
    side: Side,
    parameters: BTreeMap<String, f64>,
    samples: usize,
    t_final: Option<f64>,
    final_state: Option<Vec<f64>>,
    initial_h: Option<f64>,
    final_h: Option<f64>,
    decay_fit_rate: Option<f64>,
    max_dissipation_residual: Option<f64>,
    accepted_steps: usize,
    rejected_steps: usize,
    partial: bool,
    error: Option<String>,
    csv: Option<String>,
}

fn contact_flow<'a>(
    spec: &'a AlgebroidSpec,
    h: &'a dyn PhaseFunction,
) -> impl Fn(&[f64]) -> contact_algebroid::Result<Vec<f64>> + 'a {
    move |x: &[f64]| {
        let c = ContactCoState::from_slice(spec, x)?;
        Ok(contact_hamiltonian_vector_field(spec, h, &c)?.to_vec())
    }
}

fn herglotz_flow<'a>(
    spec: &'a AlgebroidSpec,
    l: &'a TangentFunction,
) -> impl Fn(&[f64]) -> contact_algebroid::Result<Vec<f64>> + 'a {
    move |s: &[f64]| {
        let s = ContactState::from_slice(spec, s)?;
        Ok(herglotz_rhs(spec, l, &s)?.to_vec())
    }
}

fn split(result: Result<Trajectory, IntegrationError>) -> (Trajectory, Option<Failure>) {
    match result {
        Ok(t) => (t, None),
        Err(e) => (*e.partial, Some(Failure::during_integration(e.error))),
    }
}

/// `out.csv` -> `out`, the prefix for the sibling files.
fn stem(path: &Path) -> PathBuf {
    path.with_extension("")
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = stem(path).into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_plot_data(path: &Path, label: &str, times: &[f64], values: impl Iterator<Item = f64>) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# t {label}")?;
    for (t, v) in times.iter().zip(values) {
        writeln!(w, "{} {}", fmt17(*t), fmt17(v))?;
    }
    w.flush()?;
    Ok(())
}

fn write_outputs(out: &Path, spec: &AlgebroidSpec, traj: &Trajectory) -> Result<(), Failure> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(out)?);
    traj.write_csv(spec.coordinates(), &mut w)?;
    w.flush()?;

    let header = traj.csv_header(spec.coordinates());
    let columns: Vec<&str> = header.split(',').skip(1).collect();
    let width = traj.states.first().map_or(0, Vec::len);
    for (k, name) in columns.iter().enumerate() {
        let path = sibling(out, &format!(".{name}.dat"));
        if k < width {
            write_plot_data(&path, name, &traj.times, traj.states.iter().map(|s| s[k]))?;
        } else if k == width {
            let h = traj.diagnostics.iter().map(|d| d.h_value.unwrap_or(f64::NAN));
            write_plot_data(&path, name, &traj.times, h)?;
        } else {
            let r = traj
                .diagnostics
                .iter()
                .map(|d| d.dissipation_residual.unwrap_or(f64::NAN));
            write_plot_data(&path, name, &traj.times, r)?;
        }
    }
    Ok(())
}

/// One simulation; the returned failure, if any, comes after all outputs are written.
fn simulate_once(cfg: RunConfig) -> Result<(String, Option<Failure>), Failure> {
    let side = choose_side(&cfg)?;
    let session = Session::open(cfg)?;
    let spec = &session.spec;
    let ic = session.integrator()?;
    let dims = session.dims();

    let (mut traj, failure, series) = match side {
        Side::Hamiltonian => {
            let h = session.require_hamiltonian()?;
            let x0 = session.initial_costate()?.to_vec();
            let (traj, failure) = split(integrate(contact_flow(spec, h), &x0, StateKind::Cotangent, dims, &ic));
            let series = (traj.len() >= 3).then(|| dissipation_diagnostics(spec, h, &traj));
            (traj, failure, series)
        }
        Side::Lagrangian => {
            let l = session.require_lagrangian()?;
            let s0 = session.initial_state()?.to_vec();
            let (traj, failure) = split(integrate(herglotz_flow(spec, l), &s0, StateKind::Tangent, dims, &ic));
            let series = (traj.len() >= 3).then(|| energy_diagnostics(spec, l, &traj));
            (traj, failure, series)
        }
    };
    let series = match series.transpose() {
        Ok(s) => s,
        Err(e) if failure.is_some() => {
            eprintln!("diagnostics skipped: {e}");
            None
        }
        Err(e) => return Err(Failure::during_integration(e)),
    };
    if let Some(s) = &series {
        traj.attach(s)?;
    }

    let diagnostics = Diagnostics {
        system: session.name.clone(),
        side,
        parameters: session.parameters.clone(),
        samples: traj.len(),
        t_final: traj.times.last().copied(),
        final_state: traj.last_state().map(<[f64]>::to_vec),
        initial_h: series.as_ref().and_then(|s| s.h_values.first().copied()),
        final_h: series.as_ref().and_then(|s| s.h_values.last().copied()),
        decay_fit_rate: series.as_ref().and_then(|s| s.decay_fit_rate()),
        max_dissipation_residual: series.as_ref().map(|s| s.max_residual()),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        partial: failure.is_some(),
        error: failure.as_ref().map(|f| f.to_string()),
        csv: session.cfg.out.clone(),
    };
    let json = serde_json::to_string_pretty(&diagnostics)?;
    match &session.cfg.out {
        Some(out) => {
            let out = Path::new(out);
            write_outputs(out, spec, &traj)?;
            std::fs::write(sibling(out, ".json"), format!("{json}\n"))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            traj.write_csv(spec.coordinates(), &mut w)?;
            w.flush()?;
        }
    }
    Ok((json, failure))
}

pub fn simulate(cfg: RunConfig, sweep: Option<&str>) -> Result<(), Failure> {
    let Some(sweep) = sweep else {
        let printed_csv = cfg.out.is_none();
        let (json, failure) = simulate_once(cfg)?;
        if printed_csv {
            eprintln!("{json}");
        } else {
            println!("{json}");
        }
        return failure.map_or(Ok(()), Err);
    };

    let (name, values) = parse_sweep(sweep)?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Failure::Config("--sweep needs --out to name the per-run files".into()))?;
    let runs: Vec<RunConfig> = values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            if name == "gamma" {
                c.gamma = Some(v);
            }
            c.params.insert(name.clone(), v);
            c.out = Some(
                sibling(Path::new(&out), &format!(".{name}_{v}.csv"))
                    .to_string_lossy()
                    .into_owned(),
            );
            c
        })
        .collect();
    let results: Vec<Result<(String, Option<Failure>), Failure>> = runs.into_par_iter().map(simulate_once).collect();

    let mut first_failure = None;
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok((json, failure)) => {
                reports.push(json);
                if first_failure.is_none() {
                    first_failure = failure;
                }
            }
            Err(f) => {
                reports.push(serde_json::to_string_pretty(
                    &serde_json::json!({ "error": f.to_string() }),
                )?);
                if first_failure.is_none() {
                    first_failure = Some(f);
                }
            }
        }
    }
    println!("[\n{}\n]", reports.join(",\n"));
    first_failure.map_or(Ok(()), Err)
}

/// `name=a:b:step` -> values `a, a+step, ...` up to `b` inclusive.
fn parse_sweep(text: &str) -> Result<(String, Vec<f64>), Failure> {
    let (name, range) = parse_assignment(text)?;
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Config(format!("--sweep range `{range}` must be start:stop:step")))?;
    let [a, b, step] = parts[..] else {
        return Err(Failure::Config(format!(
            "--sweep range `{range}` must be start:stop:step"
        )));
    };
    if !(step > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
        return Err(Failure::Config(format!(
            "--sweep range `{range}` needs step > 0 and stop >= start"
        )));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    // rounding keeps labels like 0.3 instead of 0.30000000000000004
    let values = (0..count)
        .map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12)
        .collect();
    Ok((name, values))
}

pub fn compare(cfg: RunConfig) -> Result<(), Failure> {
    let session = Session::open(cfg)?;
    let spec = &session.spec;
    let l = session.require_lagrangian()?;
    let h = session.require_hamiltonian()?;
    let dims = session.dims();
    let s0 = session.initial_state()?;
    // a degenerate fiber Hessian shows up here before any integration
    herglotz_rhs(spec, l, &s0)?;

    let mut ic: IntegratorConfig = session.integrator()?;
    if session.cfg.method.as_deref() == Some("rkf45") && session.cfg.record_interval.is_none() {
        // adaptive runs only share a time grid when recording on one
        let dt = (ic.t1 - ic.t0) / 100.0;
        ic = ic.recording(Recording::Interval(dt));
    }
    let lag = integrate(herglotz_flow(spec, l), &s0.to_vec(), StateKind::Tangent, dims, &ic)
        .map_err(|e| Failure::during_integration(e.error))?;
    let x0 = fiber_derivative(l, &s0)?.to_vec();
    let ham = integrate(contact_flow(spec, h), &x0, StateKind::Cotangent, dims, &ic)
        .map_err(|e| Failure::during_integration(e.error))?;
    if lag.times != ham.times {
        return Err(Failure::Integration("the two runs did not share a time grid".into()));
    }

    let mut gap = 0.0_f64;
    let mut worst = None;
    for (sl, xh) in lag.states.iter().zip(&ham.states) {
        let image = fiber_derivative(l, &ContactState::from_slice(spec, sl)?)?.to_vec();
        let d = image.iter().zip(xh).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if d > gap || d.is_nan() {
            gap = d;
            worst = Some(xh.clone());
        }
    }
    let tolerance = session.cfg.tol.unwrap_or(1e-6);
    let check = ValidationReport {
        check: "legendre_equivalence".into(),
        residual: gap,
        tolerance,
        pass: gap <= tolerance,
        samples: lag.len(),
        worst_point: worst,
    };
    emit_report(
        &session.cfg,
        &CheckReport {
            system: &session.name,
            pass: check.pass,
            checks: vec![check],
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_ranges() {
        let (name, v) = parse_sweep("gamma=0:1:0.1").unwrap();
        assert_eq!(name, "gamma");
        assert_eq!(v.len(), 11);
        assert_eq!(v[3], 0.3);
        assert_eq!(v[10], 1.0);
        assert_eq!(parse_sweep("k=2:2:1").unwrap().1, vec![2.0]);
        assert!(parse_sweep("gamma=1:0:0.1").is_err());
        assert!(parse_sweep("gamma=0:1").is_err());
        assert!(parse_sweep("0:1:0.1").is_err());
    }

    #[test]
    fn side_selection() {
        let with = |h: Option<&str>, l: Option<&str>, side: Option<&str>| RunConfig {
            hamiltonian: h.map(String::from),
            lagrangian: l.map(String::from),
            side: side.map(String::from),
            ..Default::default()
        };
        assert_eq!(choose_side(&with(None, None, None)).unwrap(), Side::Hamiltonian);
        assert_eq!(choose_side(&with(None, Some("y1^2"), None)).unwrap(), Side::Lagrangian);
        assert_eq!(
            choose_side(&with(Some("p1"), Some("y1^2"), Some("lagrangian"))).unwrap(),
            Side::Lagrangian
        );
        assert!(choose_side(&with(Some("p1"), Some("y1^2"), None)).is_err());
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("runs/a.csv"), ".json"), PathBuf::from("runs/a.json"));
        assert_eq!(sibling(Path::new("a"), ".h.dat"), PathBuf::from("a.h.dat"));
    }
}
