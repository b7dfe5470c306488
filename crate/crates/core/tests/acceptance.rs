//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use contact_algebroid::algebroid::{
    sample_base_points, validate_anchor, validate_jacobi, AlgebroidSpec, DerivativeMode,
};
use contact_algebroid::catalog::{
    self, build_lie_algebra, build_tangent_bundle, build_wong, lagrange_poincare_herglotz_rhs, wong_rhs_specialized,
    AtiyahData, CatalogOptions, CatalogSystem, LieAlgebraData, WongSystem, CATALOG_NAMES,
};
use contact_algebroid::config::parse_spec_text;
use contact_algebroid::dynamics::{
    fiber_derivative, herglotz_rhs, ContactState, InversionControls, LegendreHamiltonian, TangentFunction,
};
use contact_algebroid::expr::{params, Parameters, ScalarField};
use contact_algebroid::integrate::{
    dissipation_diagnostics, integrate, IntegratorConfig, Method, StateKind, Trajectory,
};
use contact_algebroid::jacobi::{
    bracket_axiom_suite, contact_hamiltonian_vector_field, directional_derivative, AxiomTolerances, ContactCoState,
    CotangentFunction, PhaseFunction,
};
use contact_algebroid::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gamma_options(dim: Option<usize>, gamma: f64) -> CatalogOptions {
    CatalogOptions {
        dim,
        parameters: params([("gamma", gamma)]),
    }
}

fn all_catalog(gamma: f64) -> Vec<CatalogSystem> {
    let mut out = Vec::new();
    for name in CATALOG_NAMES {
        let dims: &[Option<usize>] = if *name == "tq" { &[Some(1), Some(2)] } else { &[None] };
        for dim in dims {
            out.push(catalog::load(name, &gamma_options(*dim, gamma)).expect("catalog entry"));
        }
    }
    out
}

fn random_costate(rng: &mut ChaCha8Rng, spec: &AlgebroidSpec, p_scale: f64) -> ContactCoState {
    let q = spec
        .sample_box()
        .iter()
        .map(|(lo, hi)| rng.gen_range(*lo..*hi))
        .collect();
    let p = (0..spec.fiber_dim())
        .map(|_| rng.gen_range(-p_scale..p_scale))
        .collect();
    ContactCoState::new(q, p, rng.gen_range(-1.0..1.0))
}

fn contact_rhs<'a>(
    spec: &'a AlgebroidSpec,
    h: &'a dyn PhaseFunction,
) -> impl Fn(&[f64]) -> contact_algebroid::Result<Vec<f64>> + 'a {
    move |x: &[f64]| {
        let s = ContactCoState::from_slice(spec, x)?;
        Ok(contact_hamiltonian_vector_field(spec, h, &s)?.to_vec())
    }
}

fn herglotz_flow<'a>(
    spec: &'a AlgebroidSpec,
    l: &'a TangentFunction,
) -> impl Fn(&[f64]) -> contact_algebroid::Result<Vec<f64>> + 'a {
    move |x: &[f64]| {
        let s = ContactState::from_slice(spec, x)?;
        Ok(herglotz_rhs(spec, l, &s)?.to_vec())
    }
}

fn run_contact(spec: &AlgebroidSpec, h: &dyn PhaseFunction, x0: &[f64], cfg: &IntegratorConfig) -> Trajectory {
    integrate(
        contact_rhs(spec, h),
        x0,
        StateKind::Cotangent,
        (spec.base_dim(), spec.fiber_dim()),
        cfg,
    )
    .expect("integration")
}

/// Random test functions over `(q, p, z)` mixing every variable class.
fn test_functions(spec: &AlgebroidSpec, rng: &mut ChaCha8Rng, count: usize) -> Vec<CotangentFunction> {
    let vars = spec.cotangent_variables();
    let k = vars.len();
    (0..count)
        .map(|_| {
            let mut pick = || vars[rng.gen_range(0..k)].clone();
            let (a, b, c, d, e) = (pick(), pick(), pick(), pick(), pick());
            let mut coef = || rng.gen_range(-1.0..1.0f64);
            let text = format!(
                "{:.4} * {a} * {b} + {:.4} * sin({c}) + {:.4} * {d} * z + {:.4} * exp(0.3 * {e}) + {:.4} * z^2",
                coef(),
                coef(),
                coef(),
                coef(),
                coef()
            );
            CotangentFunction::parse(spec, &text, &Parameters::new()).expect("test function")
        })
        .collect()
}

fn curved_so3(gamma: f64) -> (WongSystem, AtiyahData) {
    let coords: Vec<String> = vec!["q1".into(), "q2".into()];
    let data = AtiyahData::parse(
        LieAlgebraData::so3(),
        coords.clone(),
        &[vec!["-q2", "0.3*q1*q2", "0.1"], vec!["0.2*q2^2", "q1", "sin(q1)"]],
        &Parameters::new(),
    )
    .unwrap();
    let sys = WongSystem::parse(
        &coords,
        &[vec!["1 + 0.5*q1^2", "0.2*q2"], vec!["0.2*q2", "2 + 0.3*sin(q1)"]],
        DMatrix::identity(3, 3) * 1.5,
        gamma,
        &Parameters::new(),
    )
    .unwrap();
    (sys, data)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut systems = vec![
        catalog::load("tq", &gamma_options(Some(2), 0.3)).unwrap(),
        catalog::load("lie:so3", &gamma_options(None, 0.5)).unwrap(),
        catalog::load("wong", &gamma_options(None, 0.3)).unwrap(),
        catalog::load("wong:so3", &gamma_options(None, 0.3)).unwrap(),
    ];
    let (sys, data) = curved_so3(0.3);
    let curved = build_wong(&sys, &data).unwrap();
    systems.push(CatalogSystem {
        name: "wong:so3 curved".into(),
        spec: curved.spec,
        hamiltonian: curved.hamiltonian,
        lagrangian: curved.lagrangian,
        wong: None,
        parameters: Parameters::new(),
    });
    let tol = AxiomTolerances::default();
    let mut pass = true;
    let mut worst = [0.0_f64; 3];
    for s in &systems {
        let funcs = test_functions(&s.spec, &mut rng, 5);
        let mut refs: Vec<&dyn PhaseFunction> = funcs.iter().map(|f| f as &dyn PhaseFunction).collect();
        refs.push(&s.hamiltonian);
        let states: Vec<ContactCoState> = (0..20).map(|_| random_costate(&mut rng, &s.spec, 1.5)).collect();
        let report = bracket_axiom_suite(&s.spec, &refs, &states, tol).expect("axiom suite");
        pass &= report.pass();
        for (w, r) in worst.iter_mut().zip(report.reports()) {
            *w = w.max(r.residual);
        }
    }
    outcome(
        pass,
        format!(
            "{} specs, 6 functions, 20 states: antisymmetry {:.2e} (tol {:.0e}), Jacobi {:.2e} (tol {:.0e}), Leibniz {:.2e} (tol {:.0e})",
            systems.len(),
            worst[0],
            tol.antisymmetry,
            worst[1],
            tol.jacobi_identity,
            worst[2],
            tol.leibniz
        ),
    )
}

const CORRUPTED_SO3: &str = r#"
name = "so3_corrupted"
fiber_dim = 3

[structure]
"3,1,2" = "1"
"1,2,3" = "1"
"2,3,1" = "1"
"1,1,2" = "1"
"#;

fn criterion_2() -> Outcome {
    let mut pass = true;
    let mut worst = 0.0_f64;
    let mut count = 0;
    let mut specs: Vec<AlgebroidSpec> = all_catalog(0.3).into_iter().map(|s| s.spec).collect();
    specs.push(build_tangent_bundle(3).unwrap());
    specs.push(build_lie_algebra(&LieAlgebraData::abelian(4).unwrap()).unwrap());
    let (sys, data) = curved_so3(0.0);
    specs.push(build_wong(&sys, &data).unwrap().spec);
    for spec in &specs {
        let pts = sample_base_points(spec, 100, 202);
        for r in [
            validate_anchor(spec, &pts, 1e-8, DerivativeMode::Analytic).unwrap(),
            validate_jacobi(spec, &pts, 1e-8, DerivativeMode::Analytic).unwrap(),
        ] {
            pass &= r.pass;
            worst = worst.max(r.residual);
            count += 1;
        }
    }
    let bad = parse_spec_text(CORRUPTED_SO3, &Parameters::new()).unwrap().spec;
    let bad_report = validate_jacobi(
        &bad,
        &sample_base_points(&bad, 100, 202),
        1e-8,
        DerivativeMode::Analytic,
    )
    .unwrap();
    pass &= !bad_report.pass;
    outcome(
        pass,
        format!(
            "{count} checks on {} specs, worst residual {worst:.2e} (tol 1e-8); corrupted so(3) structure_jacobi residual {:.2e} -> {}",
            specs.len(),
            bad_report.residual,
            if bad_report.pass { "pass (wrong)" } else { "fail (expected)" }
        ),
    )
}

/// RK4 on `u' = -u * hz(t)` with `hz` read off the trajectory at the step ends and midpoint.
fn reintegrate_h(times: &[f64], hz: &[f64], u0: f64) -> Vec<(usize, f64)> {
    let mut out = vec![(0, u0)];
    let mut u = u0;
    let mut k = 0;
    while k + 2 < times.len() {
        let dt = times[k + 2] - times[k];
        let f = |u: f64, rate: f64| -u * rate;
        let k1 = f(u, hz[k]);
        let k2 = f(u + 0.5 * dt * k1, hz[k + 1]);
        let k3 = f(u + 0.5 * dt * k2, hz[k + 1]);
        let k4 = f(u + dt * k3, hz[k + 2]);
        u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        k += 2;
        out.push((k, u));
    }
    out
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut systems: Vec<(String, AlgebroidSpec, CotangentFunction)> = all_catalog(0.3)
        .into_iter()
        .map(|s| (s.name.clone(), s.spec, s.hamiltonian))
        .collect();
    // a Hamiltonian whose dh/dz varies along the flow
    let tq2 = build_tangent_bundle(2).unwrap();
    let h = CotangentFunction::parse(
        &tq2,
        "0.5*(p1^2 + p2^2) + 0.5*(q1^2 + q2^2) + 0.3*z + 0.2*z^2",
        &Parameters::new(),
    )
    .unwrap();
    systems.push(("tq2 nonlinear z".into(), tq2, h));

    let cfg = IntegratorConfig::rk4(1e-3, 0.0, 1.0);
    let mut pass = true;
    let mut worst_point = 0.0_f64;
    let mut worst_rel = 0.0_f64;
    for (name, spec, h) in &systems {
        let x0 = random_costate(&mut rng, spec, 1.0).to_vec();
        let traj = run_contact(spec, h, &x0, &cfg);
        let zi = spec.base_dim() + spec.fiber_dim();
        let mut hv = Vec::with_capacity(traj.len());
        let mut hz = Vec::with_capacity(traj.len());
        for x in &traj.states {
            let c = ContactCoState::from_slice(spec, x).unwrap();
            let v = contact_hamiltonian_vector_field(spec, h, &c).unwrap();
            let (val, grad) = h.value_and_gradient(x).unwrap();
            let lhs = directional_derivative(h, &v, x).unwrap();
            worst_point = worst_point.max((lhs + val * grad[zi]).abs());
            hv.push(val);
            hz.push(grad[zi]);
        }
        for (k, u) in reintegrate_h(&traj.times, &hz, hv[0]) {
            let rel = (hv[k] - u).abs() / u.abs().max(1e-300);
            if !rel.is_finite() {
                eprintln!("non-finite h comparison on {name}");
                pass = false;
            }
            worst_rel = worst_rel.max(rel);
        }
        // the sample-based diagnostic series must be available on every trajectory
        pass &= dissipation_diagnostics(spec, h, &traj).is_ok();
    }
    pass &= worst_point < 1e-9 && worst_rel < 1e-6;
    outcome(
        pass,
        format!(
            "{} Hamiltonians, RK4 dt=1e-3 on [0,1]: max |X_h(h) + h h_z| = {worst_point:.2e} (tol 1e-9), max relative h vs re-integrated ODE = {worst_rel:.2e} (tol 1e-6)",
            systems.len()
        ),
    )
}

fn so3(gamma: f64) -> CatalogSystem {
    catalog::load("lie:so3", &gamma_options(None, gamma)).unwrap()
}

fn so3_closed_form(gamma: f64, p0: [f64; 3], z0: f64, t: f64) -> Vec<f64> {
    let decay = (-gamma * t).exp();
    let k = 0.5 * p0.iter().map(|v| v * v).sum::<f64>();
    let z = decay * (z0 + k * (1.0 - decay) / gamma);
    vec![p0[0] * decay, p0[1] * decay, p0[2] * decay, z]
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let s = so3(0.5);
    let cfg = IntegratorConfig::rk4(1e-3, 0.0, 1.0);
    let traj = run_contact(&s.spec, &s.hamiltonian, &[1.0, 2.0, 3.0, 0.0], &cfg);
    let elapsed = start.elapsed();
    let last = traj.last_state().unwrap();
    let expected = so3_closed_form(0.5, [1.0, 2.0, 3.0], 0.0, 1.0);
    let err = (0..3).map(|a| (last[a] - expected[a]).abs()).fold(0.0, f64::max);
    let pass = err < 1e-6 && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "so(3), gamma=0.5, RK4 dt=1e-3: max |p(1) - e^-0.5 p0| = {err:.2e} (tol 1e-6), {elapsed:.2?} (limit 1s)"
        ),
    )
}

fn criterion_5() -> Outcome {
    let cfg = IntegratorConfig {
        method: Method::rkf45(1e-10, 1e-12),
        t0: 0.0,
        t1: 10.0,
        record: contact_algebroid::integrate::Recording::EveryStep(1),
    };
    let s = so3(0.0);
    let spec = &s.spec;
    let rigid = CotangentFunction::parse(spec, "0.5*(p1^2 + p2^2/2 + p3^2/3)", &Parameters::new()).unwrap();
    let mut worst = 0.0_f64;
    for h in [&s.hamiltonian, &rigid] {
        let traj = run_contact(spec, h, &[1.0, 2.0, 3.0, 0.0], &cfg);
        let h0 = h.value(&traj.states[0]).unwrap();
        for x in &traj.states {
            worst = worst.max((h.value(x).unwrap() - h0).abs() / h0.abs());
        }
    }
    outcome(
        worst < 1e-8,
        format!("so(3), gamma=0, rkf45 rtol=1e-10 on [0,10], isotropic and rigid-body h: max relative drift {worst:.2e} (tol 1e-8)"),
    )
}

/// Sup-norm distance between the Legendre image of a Herglotz trajectory and a contact trajectory.
fn equivalence_gap(spec: &AlgebroidSpec, l: &TangentFunction, h: &dyn PhaseFunction, s0: &ContactState) -> f64 {
    let cfg = IntegratorConfig::rk4(1e-3, 0.0, 1.0);
    let dims = (spec.base_dim(), spec.fiber_dim());
    let lag = integrate(herglotz_flow(spec, l), &s0.to_vec(), StateKind::Tangent, dims, &cfg).expect("herglotz");
    let x0 = fiber_derivative(l, s0).unwrap().to_vec();
    let ham = run_contact(spec, h, &x0, &cfg);
    assert_eq!(lag.times, ham.times);
    let mut gap = 0.0_f64;
    for (sl, xh) in lag.states.iter().zip(&ham.states) {
        let image = fiber_derivative(l, &ContactState::from_slice(spec, sl).unwrap())
            .unwrap()
            .to_vec();
        for (a, b) in image.iter().zip(xh) {
            gap = gap.max((a - b).abs());
        }
    }
    gap
}

fn criterion_6() -> Outcome {
    let tq = catalog::load("tq", &gamma_options(Some(1), 0.3)).unwrap();
    let legendre = LegendreHamiltonian::new(tq.lagrangian.clone(), InversionControls::default());
    let gap_osc = equivalence_gap(
        &tq.spec,
        &tq.lagrangian,
        &legendre,
        &ContactState::new(vec![1.0], vec![0.5], 0.0),
    );
    let s = so3(0.5);
    let gap_so3 = equivalence_gap(
        &s.spec,
        &s.lagrangian,
        &s.hamiltonian,
        &ContactState::new(vec![], vec![1.0, 2.0, 3.0], 0.2),
    );
    // non-identity Legendre maps: anisotropic rigid body and a curved nonabelian Wong system
    let rigid = TangentFunction::parse(&s.spec, "0.5*(y1^2 + 2*y2^2 + 3*y3^2) - 0.5*z", &Parameters::new()).unwrap();
    let rigid_h = LegendreHamiltonian::new(rigid.clone(), InversionControls::default());
    let gap_rigid = equivalence_gap(
        &s.spec,
        &rigid,
        &rigid_h,
        &ContactState::new(vec![], vec![1.0, -0.5, 0.3], 0.0),
    );
    let (sys, data) = curved_so3(0.3);
    let wong = build_wong(&sys, &data).unwrap();
    let gap_wong = equivalence_gap(
        &wong.spec,
        &wong.lagrangian,
        &wong.hamiltonian,
        &ContactState::new(vec![0.2, -0.3], vec![0.5, 0.4, 1.0, -0.5, 0.3], 0.1),
    );
    let worst = gap_osc.max(gap_so3).max(gap_rigid).max(gap_wong);
    outcome(
        worst < 1e-6,
        format!(
            "sup-norm |Fl(Herglotz) - contact| on [0,1]: damped oscillator {gap_osc:.2e}, so(3) {gap_so3:.2e}, rigid body {gap_rigid:.2e}, curved so(3) Wong {gap_wong:.2e} (tol 1e-6)"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst_h = 0.0_f64;
    let mut worst_l = 0.0_f64;
    let mut configs: Vec<(WongSystem, AtiyahData)> = ["wong", "wong:so3"]
        .iter()
        .map(|n| catalog::load(n, &gamma_options(None, 0.3)).unwrap().wong.unwrap())
        .collect();
    configs.push(curved_so3(0.3));
    for (sys, data) in &configs {
        let parts = build_wong(sys, data).unwrap();
        for _ in 0..1000 {
            let x = random_costate(&mut rng, &parts.spec, 2.0);
            let generic = contact_hamiltonian_vector_field(&parts.spec, &parts.hamiltonian, &x).unwrap();
            let special = wong_rhs_specialized(sys, data, &x).unwrap();
            worst_h = worst_h.max(generic.max_abs_diff(&special));
            let s = ContactState::new(x.q, x.p, x.z);
            let generic = herglotz_rhs(&parts.spec, &parts.lagrangian, &s).unwrap();
            let special = lagrange_poincare_herglotz_rhs(sys, data, &s).unwrap();
            worst_l = worst_l.max(generic.max_abs_diff(&special));
        }
    }

    let gamma: f64 = 0.3;
    let decay = (-gamma).exp();
    let cfg = IntegratorConfig::rk4(1e-3, 0.0, 1.0);
    let x0 = [0.3, -0.2, 1.0, -0.5, 0.8, 0.1];
    // zero connection: every momentum decays exactly
    let flat = catalog::load(
        "wong",
        &CatalogOptions {
            dim: None,
            parameters: params([("gamma", gamma), ("s", 0.0)]),
        },
    )
    .unwrap();
    let last = run_contact(&flat.spec, &flat.hamiltonian, &x0, &cfg)
        .last_state()
        .unwrap()
        .to_vec();
    let flat_err = (2..5).map(|k| (last[k] - x0[k] * decay).abs()).fold(0.0, f64::max);
    // magnetic field: momenta rotate, their norm and the charge decay
    let magnetic = catalog::load("wong", &gamma_options(None, gamma)).unwrap();
    let traj = run_contact(&magnetic.spec, &magnetic.hamiltonian, &x0, &cfg);
    let last = traj.last_state().unwrap();
    let norm = |x: &[f64]| (x[2] * x[2] + x[3] * x[3]).sqrt();
    let mag_err = (norm(last) - norm(&x0) * decay)
        .abs()
        .max((last[4] - x0[4] * decay).abs());
    let h_ratio = magnetic.hamiltonian.value(last).unwrap() / magnetic.hamiltonian.value(&x0).unwrap();
    let h_err = (h_ratio - decay).abs() / decay;

    let pass = worst_h < 1e-12 && worst_l < 1e-10 && flat_err < 1e-6 && mag_err < 1e-6 && h_err < 1e-6;
    outcome(
        pass,
        format!(
            "3 Wong configs x 1000 states: Hamiltonian side {worst_h:.2e} (tol 1e-12), Lagrangian side {worst_l:.2e} (tol 1e-10); abelian decay at t=1: flat {flat_err:.2e}, magnetic {mag_err:.2e}, h(1)/h(0) rel {h_err:.2e} (tol 1e-6)"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let tq = build_tangent_bundle(3).unwrap();
    let h_tq = CotangentFunction::parse(
        &tq,
        "0.5*(p1^2 + 2*p2^2 + p3^2) + q1*q2*p3 + sin(q3)*z + 0.2*z^2*p1",
        &Parameters::new(),
    )
    .unwrap();
    let mut worst_tq = 0.0_f64;
    for _ in 0..100 {
        let x = random_costate(&mut rng, &tq, 2.0);
        let flat = x.to_vec();
        let (hv, g) = h_tq.value_and_gradient(&flat).unwrap();
        let hz = g[6];
        let v = contact_hamiltonian_vector_field(&tq, &h_tq, &x).unwrap().to_vec();
        let mut hand = Vec::new();
        hand.extend((0..3).map(|i| g[3 + i]));
        hand.extend((0..3).map(|i| -g[i] - x.p[i] * hz));
        hand.push((0..3).map(|i| x.p[i] * g[3 + i]).sum::<f64>() - hv);
        for (a, b) in v.iter().zip(&hand) {
            worst_tq = worst_tq.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    let so3 = build_lie_algebra(&LieAlgebraData::so3()).unwrap();
    let h_so3 = CotangentFunction::parse(
        &so3,
        "0.5*(p1^2 + 2*p2^2 + 3*p3^2) + 0.4*z*p1 + 0.1*z^2",
        &Parameters::new(),
    )
    .unwrap();
    let mut worst_lp = 0.0_f64;
    for _ in 0..100 {
        let x = random_costate(&mut rng, &so3, 2.0);
        let flat = x.to_vec();
        let (hv, g) = h_so3.value_and_gradient(&flat).unwrap();
        let (p, w, hz) = (&x.p, &g[..3], g[3]);
        let v = contact_hamiltonian_vector_field(&so3, &h_so3, &x).unwrap().to_vec();
        // dp = p x grad_p h - p h_z, dz = p . grad_p h - h
        let hand = [
            p[1] * w[2] - p[2] * w[1] - p[0] * hz,
            p[2] * w[0] - p[0] * w[2] - p[1] * hz,
            p[0] * w[1] - p[1] * w[0] - p[2] * hz,
            p[0] * w[0] + p[1] * w[1] + p[2] * w[2] - hv,
        ];
        for (a, b) in v.iter().zip(&hand) {
            worst_lp = worst_lp.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    let eps = 4.0 * f64::EPSILON;
    outcome(
        worst_tq <= eps && worst_lp <= eps,
        format!(
            "100 states each: classical contact max rel diff {worst_tq:.2e}, Lie-Poisson-Jacobi max rel diff {worst_lp:.2e} (tol {eps:.1e})"
        ),
    )
}

fn random_expression(rng: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.6) {
            format!("x{}", rng.gen_range(1..=3))
        } else {
            format!("({:.3})", rng.gen_range(-2.0..2.0))
        };
    }
    let a = random_expression(rng, depth - 1);
    match rng.gen_range(0..10) {
        0 => format!("({a} + {})", random_expression(rng, depth - 1)),
        1 => format!("({a} - {})", random_expression(rng, depth - 1)),
        2 | 3 => format!("({a} * {})", random_expression(rng, depth - 1)),
        4 => format!("({a} / (2 + cos({})))", random_expression(rng, depth - 1)),
        5 => format!("sin({a})"),
        6 => format!("exp(0.4 * cos({a}))"),
        7 => format!("sqrt(1.5 + sin({a}))"),
        8 => format!("log(1 + ({a})^2)"),
        _ => format!("({a})^2"),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let vars = ["x1", "x2", "x3"];
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let text = random_expression(&mut rng, 5);
        let f = ScalarField::parse(&text, &vars, &Parameters::new()).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = f.eval_with_gradient(&x).unwrap();
        for i in 0..3 {
            let h = 1e-6 * x[i].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.eval(&xp).unwrap() - f.eval(&xm).unwrap()) / (2.0 * h);
            worst = worst.max((fd - d.derivs[i]).abs() / d.derivs[i].abs().max(1.0));
        }
    }

    let parse_ok = matches!(
        ScalarField::parse("q1 + * p1", &["q1", "p1"], &Parameters::new()),
        Err(Error::Syntax { position: 5, .. })
    ) && matches!(
        ScalarField::parse("q1 + foo(p1)", &["q1", "p1"], &Parameters::new()),
        Err(Error::UnknownIdentifier { position: 5, .. })
    );

    let s = so3(0.5);
    let p0 = [1.0, 2.0, 3.0];
    let errors: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| {
            let traj = run_contact(
                &s.spec,
                &s.hamiltonian,
                &[1.0, 2.0, 3.0, 0.0],
                &IntegratorConfig::rk4(dt, 0.0, 1.0),
            );
            let mut e = 0.0_f64;
            for (t, x) in traj.times.iter().zip(&traj.states) {
                let exact = so3_closed_form(0.5, p0, 0.0, *t);
                for (a, b) in x.iter().zip(&exact) {
                    e = e.max((a - b).abs());
                }
            }
            e
        })
        .collect();
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    let pass = worst < 1e-5 && parse_ok && ratios.iter().all(|r| *r >= 12.0);
    outcome(
        pass,
        format!(
            "100 random expressions: max rel gradient error {worst:.2e} (tol 1e-5); parse positions {}; RK4 errors {:.2e}/{:.2e}/{:.2e}, ratios {:.1}, {:.1} (need >= 12)",
            if parse_ok { "ok" } else { "wrong" },
            errors[0],
            errors[1],
            errors[2],
            ratios[0],
            ratios[1]
        ),
    )
}

/// Name, check, and runtime limit.
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("bracket axioms", criterion_1, Some(Duration::from_secs(10))),
        ("structure equations", criterion_2, Some(Duration::from_secs(5))),
        ("dissipation identity", criterion_3, None),
        ("closed-form decay", criterion_4, Some(Duration::from_secs(1))),
        ("conservative limit", criterion_5, None),
        ("Herglotz/contact equivalence", criterion_6, None),
        ("Wong cross-check", criterion_7, None),
        ("reduction regression", criterion_8, None),
        ("expressions and RK4 order", criterion_9, None),
    ];
    let mut failures = 0;
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut out = run();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > *limit {
                out.pass = false;
                out.detail.push_str(&format!("; runtime {elapsed:.2?} over {limit:?}"));
            }
        }
        if !out.pass {
            failures += 1;
        }
        println!(
            "{} criterion {}: {name}: {} [{elapsed:.2?}]",
            if out.pass { "PASS" } else { "FAIL" },
            k + 1,
            out.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
