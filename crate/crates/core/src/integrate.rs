//! Explicit time integration with per-sample diagnostics.
//!
//! Two methods: classical fixed-step RK4 and the adaptive Dormand-Prince
//! 5(4) pair. Both run sequentially with a fixed evaluation order, so the
//! same inputs give bit-identical trajectories.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::algebroid::AlgebroidSpec;
use crate::dynamics::TangentFunction;
use crate::error::{Error, Result};
use crate::jacobi::PhaseFunction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Method {
    Rk4 {
        step: f64,
    },
    Rkf45 {
        rel_tol: f64,
        abs_tol: f64,
        min_step: f64,
        max_step: f64,
    },
}

impl Method {
    pub fn rkf45(rel_tol: f64, abs_tol: f64) -> Self {
        Method::Rkf45 {
            rel_tol,
            abs_tol,
            min_step: 1e-12,
            max_step: f64::INFINITY,
        }
    }
}

/// Which samples end up in the trajectory. The final time is always kept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Recording {
    /// Every `k`-th accepted step.
    EveryStep(usize),
    /// On a fixed time grid; adaptive steps are clipped to land on it.
    Interval(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t0: f64,
    pub t1: f64,
    pub record: Recording,
}

impl IntegratorConfig {
    pub fn rk4(step: f64, t0: f64, t1: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4 { step },
            t0,
            t1,
            record: Recording::EveryStep(1),
        }
    }

    pub fn rkf45(rel_tol: f64, abs_tol: f64, t0: f64, t1: f64) -> Self {
        IntegratorConfig {
            method: Method::rkf45(rel_tol, abs_tol),
            t0,
            t1,
            record: Recording::EveryStep(1),
        }
    }

    pub fn recording(mut self, record: Recording) -> Self {
        self.record = record;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > self.t0) || !self.t0.is_finite() || !self.t1.is_finite() {
            return Err(Error::Input(format!("need t1 > t0, got [{}, {}]", self.t0, self.t1)));
        }
        match self.method {
            Method::Rk4 { step } if !(step > 0.0) => return Err(Error::Input("rk4 step must be positive".into())),
            Method::Rkf45 {
                rel_tol,
                abs_tol,
                min_step,
                max_step,
            } => {
                if !(rel_tol >= 0.0 && abs_tol >= 0.0 && rel_tol + abs_tol > 0.0) {
                    return Err(Error::Input(
                        "rkf45 tolerances must be non-negative and not both zero".into(),
                    ));
                }
                if !(min_step > 0.0 && max_step >= min_step) {
                    return Err(Error::Input("rkf45 needs 0 < min_step <= max_step".into()));
                }
            }
            _ => {}
        }
        match self.record {
            Recording::EveryStep(0) => Err(Error::Input("record_every must be at least 1".into())),
            Recording::Interval(dt) if !(dt > 0.0) => Err(Error::Input("record interval must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// Which phase space a trajectory lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StateKind {
    /// `(q, p, z)` on `A* x R`.
    Cotangent,
    /// `(q, y, z)` on `A x R`.
    Tangent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleDiagnostics {
    /// Hamiltonian (or Lagrangian energy) at the sample, once attached.
    pub h_value: Option<f64>,
    pub dissipation_residual: Option<f64>,
    /// Step that produced this sample; zero for the initial state.
    pub step_size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub kind: StateKind,
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub diagnostics: Vec<SampleDiagnostics>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest embedded error ratio over accepted steps (rkf45 only; <= 1).
    pub max_error_ratio: f64,
}

impl Trajectory {
    fn new(kind: StateKind, base_dim: usize, fiber_dim: usize) -> Self {
        Trajectory {
            kind,
            base_dim,
            fiber_dim,
            times: Vec::new(),
            states: Vec::new(),
            diagnostics: Vec::new(),
            accepted_steps: 0,
            rejected_steps: 0,
            max_error_ratio: 0.0,
        }
    }

    fn push(&mut self, t: f64, state: &[f64], step_size: f64) {
        self.times.push(t);
        self.states.push(state.to_vec());
        self.diagnostics.push(SampleDiagnostics {
            h_value: None,
            dissipation_residual: None,
            step_size,
        });
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    pub fn attach(&mut self, series: &DissipationSeries) -> Result<()> {
        if series.h_values.len() != self.len() {
            return Err(Error::Dimension {
                context: "dissipation series".into(),
                expected: self.len(),
                found: series.h_values.len(),
            });
        }
        for (k, d) in self.diagnostics.iter_mut().enumerate() {
            d.h_value = Some(series.h_values[k]);
            d.dissipation_residual = Some(series.residual[k]);
        }
        Ok(())
    }

    /// CSV header: `t,q1..qn,p1..pm|y1..ym,z,h,residual`.
    pub fn csv_header(&self, coordinates: &[String]) -> String {
        let fiber = match self.kind {
            StateKind::Cotangent => "p",
            StateKind::Tangent => "y",
        };
        let mut cols = vec!["t".to_string()];
        cols.extend(coordinates.iter().cloned());
        cols.extend((1..=self.fiber_dim).map(|a| format!("{fiber}{a}")));
        cols.extend(["z", "h", "residual"].map(String::from));
        cols.join(",")
    }

    /// Writes the trajectory as CSV, every float with 17 significant digits.
    pub fn write_csv<W: Write>(&self, coordinates: &[String], out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", self.csv_header(coordinates))?;
        for k in 0..self.len() {
            let mut row = vec![fmt17(self.times[k])];
            row.extend(self.states[k].iter().map(|v| fmt17(*v)));
            let d = &self.diagnostics[k];
            row.push(fmt17(d.h_value.unwrap_or(f64::NAN)));
            row.push(fmt17(d.dissipation_residual.unwrap_or(f64::NAN)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Integration failure together with everything computed before it.
#[derive(Clone, Debug)]
pub struct IntegrationError {
    pub error: Error,
    pub partial: Box<Trajectory>,
}

impl fmt::Display for IntegrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} samples recorded)", self.error, self.partial.len())
    }
}

impl std::error::Error for IntegrationError {}

impl From<IntegrationError> for Error {
    fn from(e: IntegrationError) -> Self {
        e.error
    }
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for &(c, k) in terms {
        if c != 0.0 {
            for (o, ki) in out.iter_mut().zip(k) {
                *o += h * c * ki;
            }
        }
    }
    out
}

/// Integrates `dx/dt = rhs(x)` from `s0` under `cfg`.
pub fn integrate<F>(
    rhs: F,
    s0: &[f64],
    kind: StateKind,
    dims: (usize, usize),
    cfg: &IntegratorConfig,
) -> std::result::Result<Trajectory, IntegrationError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut traj = Trajectory::new(kind, dims.0, dims.1);
    let fail = |error: Error, traj: Trajectory| IntegrationError {
        error,
        partial: Box::new(traj),
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, traj));
    }
    if dims.0 + dims.1 + 1 != s0.len() {
        let e = Error::Dimension {
            context: "initial state".into(),
            expected: dims.0 + dims.1 + 1,
            found: s0.len(),
        };
        return Err(fail(e, traj));
    }
    if s0.iter().any(|v| !v.is_finite()) {
        return Err(fail(Error::Input("non-finite initial state".into()), traj));
    }
    traj.push(cfg.t0, s0, 0.0);
    let result = match cfg.method {
        Method::Rk4 { step } => run_rk4(&rhs, s0, step, cfg, &mut traj),
        Method::Rkf45 {
            rel_tol,
            abs_tol,
            min_step,
            max_step,
        } => run_dopri(&rhs, s0, (rel_tol, abs_tol, min_step, max_step), cfg, &mut traj),
    };
    match result {
        Ok(()) => Ok(traj),
        Err(e) => Err(fail(e, traj)),
    }
}

fn check_finite(t: f64, x: &[f64], last: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            t,
            last_state: last.to_vec(),
        })
    }
}

/// Slopes at an intermediate stage; a non-finite stage state gives NaN
/// slopes so the step is rejected or reported as divergence.
fn stage<F>(rhs: &F, y: Vec<f64>) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if y.iter().all(|v| v.is_finite()) {
        rhs(&y)
    } else {
        Ok(vec![f64::NAN; y.len()])
    }
}

struct Recorder {
    record: Recording,
    since_last: usize,
    next_time: f64,
    t0: f64,
    index: usize,
}

impl Recorder {
    fn new(cfg: &IntegratorConfig) -> Self {
        let next_time = match cfg.record {
            Recording::Interval(dt) => cfg.t0 + dt,
            Recording::EveryStep(_) => f64::INFINITY,
        };
        Recorder {
            record: cfg.record,
            since_last: 0,
            next_time,
            t0: cfg.t0,
            index: 1,
        }
    }

    /// Upper bound on the next step so grid times are hit exactly.
    fn stop_before(&self, t1: f64) -> f64 {
        self.next_time.min(t1)
    }

    fn should_record(&mut self, t: f64, is_last: bool) -> bool {
        match self.record {
            Recording::EveryStep(k) => {
                self.since_last += 1;
                if self.since_last >= k || is_last {
                    self.since_last = 0;
                    true
                } else {
                    false
                }
            }
            Recording::Interval(dt) => {
                if t >= self.next_time || is_last {
                    while self.next_time <= t {
                        self.index += 1;
                        self.next_time = self.t0 + self.index as f64 * dt;
                    }
                    true
                } else {
                    false
                }
            }
        }
    }
}

fn run_rk4<F>(rhs: &F, s0: &[f64], step: f64, cfg: &IntegratorConfig, traj: &mut Trajectory) -> Result<()>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let span = cfg.t1 - cfg.t0;
    let ratio = span / step;
    // steps that divide the span up to rounding are taken uniformly
    let steps = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    }
    .max(1);
    let mut recorder = Recorder::new(cfg);
    let mut x = s0.to_vec();
    let mut t = cfg.t0;
    for k in 1..=steps {
        let t_next = if k == steps { cfg.t1 } else { cfg.t0 + k as f64 * step };
        let h = t_next - t;
        let k1 = rhs(&x)?;
        let k2 = stage(rhs, axpy(&x, h, &[(0.5, &k1)]))?;
        let k3 = stage(rhs, axpy(&x, h, &[(0.5, &k2)]))?;
        let k4 = stage(rhs, axpy(&x, h, &[(1.0, &k3)]))?;
        let next = axpy(
            &x,
            h,
            &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
        );
        check_finite(t_next, &next, &x)?;
        x = next;
        t = t_next;
        traj.accepted_steps += 1;
        let record = match cfg.record {
            Recording::Interval(_) => recorder.should_record(t + 1e-12 * step, k == steps),
            Recording::EveryStep(_) => recorder.should_record(t, k == steps),
        };
        if record {
            traj.push(t, &x, h);
        }
    }
    Ok(())
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn run_dopri<F>(
    rhs: &F,
    s0: &[f64],
    (rel_tol, abs_tol, min_step, max_step): (f64, f64, f64, f64),
    cfg: &IntegratorConfig,
    traj: &mut Trajectory,
) -> Result<()>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let _ = C;
    let mut recorder = Recorder::new(cfg);
    let mut x = s0.to_vec();
    let mut t = cfg.t0;
    let mut k1 = rhs(&x)?;
    let scale0: f64 = x
        .iter()
        .map(|v| abs_tol + rel_tol * v.abs())
        .fold(f64::INFINITY, f64::min);
    let slope: f64 = k1.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut h = if slope > 0.0 {
        0.01 * scale0.max(1e-300) / slope
    } else {
        1e-3
    };
    h = h
        .clamp(min_step, max_step)
        .min(cfg.t1 - cfg.t0)
        .max(min_step.min(cfg.t1 - cfg.t0));
    if !h.is_finite() || h <= 0.0 {
        h = (cfg.t1 - cfg.t0) * 1e-3;
    }
    loop {
        let stop = recorder.stop_before(cfg.t1);
        let remaining = stop - t;
        let clipped = h >= remaining;
        let step = if clipped { remaining } else { h };
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(k1.clone());
        for s in 1..7 {
            let terms: Vec<(f64, &[f64])> = (0..s).map(|j| (A[s][j], k[j].as_slice())).collect();
            k.push(stage(rhs, axpy(&x, step, &terms))?);
        }
        let terms5: Vec<(f64, &[f64])> = (0..7).map(|j| (B5[j], k[j].as_slice())).collect();
        let next = axpy(&x, step, &terms5);
        let mut err_ratio = 0.0_f64;
        for i in 0..x.len() {
            let e: f64 = step * (0..7).map(|j| (B5[j] - B4[j]) * k[j][i]).sum::<f64>();
            let sc = abs_tol + rel_tol * x[i].abs().max(next[i].abs());
            err_ratio = err_ratio.max(e.abs() / sc);
        }
        if !err_ratio.is_finite() || next.iter().any(|v| !v.is_finite()) {
            if step <= min_step {
                return Err(Error::Divergence {
                    t,
                    last_state: x.clone(),
                });
            }
            h = (step * 0.1).max(min_step);
            traj.rejected_steps += 1;
            continue;
        }
        if err_ratio <= 1.0 {
            let t_next = if clipped { stop } else { t + step };
            x = next;
            t = t_next;
            k1 = k.swap_remove(6);
            traj.accepted_steps += 1;
            traj.max_error_ratio = traj.max_error_ratio.max(err_ratio);
            let is_last = clipped && stop == cfg.t1;
            if recorder.should_record(t, is_last) {
                traj.push(t, &x, step);
            }
            if is_last {
                return Ok(());
            }
            let factor = if err_ratio == 0.0 {
                5.0
            } else {
                (0.9 * err_ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            // a clipped step says nothing about the natural step size
            let base = if clipped { h.max(step) } else { step };
            h = (base * factor).min(max_step);
        } else {
            traj.rejected_steps += 1;
            if step <= min_step {
                return Err(Error::StepUnderflow { t, step });
            }
            let factor = (0.9 * err_ratio.powf(-0.2)).clamp(0.1, 1.0);
            h = (step * factor).max(min_step);
        }
    }
}

/// Per-sample dissipation data along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationSeries {
    pub times: Vec<f64>,
    pub h_values: Vec<f64>,
    /// Rate predicted by the dissipation law at each sample.
    pub expected_rate: Vec<f64>,
    /// Finite-difference `dh/dt` on the recorded grid.
    pub numeric_rate: Vec<f64>,
    pub residual: Vec<f64>,
}

impl DissipationSeries {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().fold(0.0_f64, |m, r| m.max(*r))
    }

    /// Least-squares slope of `ln|h|` against `t`, negated: the fitted decay rate.
    pub fn decay_fit_rate(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.h_values)
            .filter(|(_, h)| **h != 0.0)
            .map(|(t, h)| (*t, h.abs().ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
        (sxx > 0.0).then(|| -sxy / sxx)
    }
}

/// Second-order derivative estimate on a possibly non-uniform grid.
fn grid_derivative(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|k| {
            let (a, b, c) = if k == 0 {
                (0, 1, 2)
            } else if k == n - 1 {
                (n - 3, n - 2, n - 1)
            } else {
                (k - 1, k, k + 1)
            };
            // derivative of the quadratic through three samples, evaluated at t[k]
            let (ta, tb, tc) = (t[a], t[b], t[c]);
            let x = t[k];
            let la = (2.0 * x - tb - tc) / ((ta - tb) * (ta - tc));
            let lb = (2.0 * x - ta - tc) / ((tb - ta) * (tb - tc));
            let lc = (2.0 * x - ta - tb) / ((tc - ta) * (tc - tb));
            la * v[a] + lb * v[b] + lc * v[c]
        })
        .collect()
}

fn series_from(times: &[f64], h_values: Vec<f64>, expected_rate: Vec<f64>) -> DissipationSeries {
    let numeric_rate = grid_derivative(times, &h_values);
    let residual = numeric_rate
        .iter()
        .zip(&expected_rate)
        .map(|(n, e)| (n - e).abs())
        .collect();
    DissipationSeries {
        times: times.to_vec(),
        h_values,
        expected_rate,
        numeric_rate,
        residual,
    }
}

/// Along an integral curve of `X_h`, `dh/dt = -h dh/dz`. Reports `h`, that
/// rate, and `|dh/dt(numeric) + h dh/dz|` at each sample.
pub fn dissipation_diagnostics(
    spec: &AlgebroidSpec,
    h: &dyn PhaseFunction,
    traj: &Trajectory,
) -> Result<DissipationSeries> {
    if traj.kind != StateKind::Cotangent {
        return Err(Error::Input(
            "dissipation_diagnostics needs an A* x R trajectory".into(),
        ));
    }
    if traj.len() < 3 {
        return Err(Error::Input(format!(
            "dissipation diagnostics need at least 3 samples, got {}",
            traj.len()
        )));
    }
    let zi = spec.base_dim() + spec.fiber_dim();
    let mut hv = Vec::with_capacity(traj.len());
    let mut rate = Vec::with_capacity(traj.len());
    for x in &traj.states {
        let (v, g) = h.value_and_gradient(x)?;
        hv.push(v);
        rate.push(-v * g[zi]);
    }
    Ok(series_from(&traj.times, hv, rate))
}

/// Lagrangian counterpart: along Herglotz curves `dE_l/dt = (dl/dz) E_l`.
pub fn energy_diagnostics(spec: &AlgebroidSpec, l: &TangentFunction, traj: &Trajectory) -> Result<DissipationSeries> {
    if traj.kind != StateKind::Tangent {
        return Err(Error::Input("energy_diagnostics needs an A x R trajectory".into()));
    }
    if traj.len() < 3 {
        return Err(Error::Input(format!(
            "energy diagnostics need at least 3 samples, got {}",
            traj.len()
        )));
    }
    let (n, m) = (spec.base_dim(), spec.fiber_dim());
    let mut ev = Vec::with_capacity(traj.len());
    let mut rate = Vec::with_capacity(traj.len());
    for s in &traj.states {
        let d = l.field().eval_with_gradient(s)?;
        let e: f64 = s[n..n + m]
            .iter()
            .zip(&d.derivs[n..n + m])
            .map(|(y, ly)| y * ly)
            .sum::<f64>()
            - d.value;
        ev.push(e);
        rate.push(d.derivs[n + m] * e);
    }
    Ok(series_from(&traj.times, ev, rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| -v).collect())
    }

    #[test]
    fn zero_field_is_constant() {
        let cfg = IntegratorConfig::rk4(0.1, 0.0, 1.0);
        let tr = integrate(
            |x: &[f64]| Ok(vec![0.0; x.len()]),
            &[1.0, 2.0, 3.0],
            StateKind::Cotangent,
            (1, 1),
            &cfg,
        )
        .unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr.states.iter().all(|s| s == &vec![1.0, 2.0, 3.0]));
        assert_eq!(*tr.times.last().unwrap(), 1.0);
    }

    #[test]
    fn rk4_matches_exponential() {
        let cfg = IntegratorConfig::rk4(1e-3, 0.0, 1.0);
        let tr = integrate(decay, &[1.0, 0.0, 2.0], StateKind::Cotangent, (1, 1), &cfg).unwrap();
        let last = tr.last_state().unwrap();
        assert!((last[0] - (-1.0f64).exp()).abs() < 1e-12);
        assert!((last[2] - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn rk4_uneven_span_ends_exactly() {
        let cfg = IntegratorConfig::rk4(0.3, 0.0, 1.0);
        let tr = integrate(decay, &[1.0, 0.0, 0.0], StateKind::Cotangent, (1, 1), &cfg).unwrap();
        assert_eq!(tr.times, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
    }

    #[test]
    fn dopri_respects_tolerance_and_hits_grid() {
        let cfg = IntegratorConfig::rkf45(1e-10, 1e-12, 0.0, 2.0).recording(Recording::Interval(0.25));
        let tr = integrate(decay, &[1.0, -1.0, 0.5], StateKind::Cotangent, (1, 1), &cfg).unwrap();
        assert_eq!(tr.len(), 9);
        for (k, t) in tr.times.iter().enumerate() {
            assert!((t - 0.25 * k as f64).abs() < 1e-12);
        }
        assert!(tr.max_error_ratio <= 1.0);
        let last = tr.last_state().unwrap();
        assert!((last[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rk4_interval_recording() {
        let cfg = IntegratorConfig::rk4(0.01, 0.0, 1.0).recording(Recording::Interval(0.1));
        let tr = integrate(decay, &[1.0, 0.0, 0.0], StateKind::Cotangent, (1, 1), &cfg).unwrap();
        assert_eq!(tr.len(), 11);
    }

    #[test]
    fn divergence_reports_last_good_state() {
        let cfg = IntegratorConfig::rk4(0.1, 0.0, 10.0);
        let blowup = |x: &[f64]| Ok(x.iter().map(|v| v * v * 1e3).collect());
        let err = integrate(blowup, &[1.0, 1.0, 1.0], StateKind::Cotangent, (1, 1), &cfg).unwrap_err();
        assert!(matches!(err.error, Error::Divergence { .. }));
        assert!(!err.partial.is_empty());
    }

    #[test]
    fn non_finite_stage_is_divergence() {
        // an rhs that refuses non-finite input, as the phase-space fields do
        let strict = |x: &[f64]| {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input("non-finite state".into()));
            }
            Ok(x.iter().map(|v| v * v).collect())
        };
        for cfg in [
            IntegratorConfig::rk4(1e-3, 0.0, 3.0),
            IntegratorConfig::rkf45(1e-8, 1e-10, 0.0, 3.0),
        ] {
            let err = integrate(strict, &[1.0, 1.0, 1.0], StateKind::Cotangent, (1, 1), &cfg).unwrap_err();
            assert!(
                matches!(err.error, Error::Divergence { .. } | Error::StepUnderflow { .. }),
                "{:?}",
                err.error
            );
        }
    }

    #[test]
    fn step_underflow_is_reported() {
        let mut cfg = IntegratorConfig::rkf45(1e-14, 1e-14, 0.0, 1.0);
        cfg.method = Method::Rkf45 {
            rel_tol: 1e-14,
            abs_tol: 1e-14,
            min_step: 0.05,
            max_step: 1.0,
        };
        let stiff = |x: &[f64]| Ok(x.iter().map(|v| -1e4 * v).collect());
        let err = integrate(stiff, &[1.0, 0.0, 0.0], StateKind::Cotangent, (1, 1), &cfg).unwrap_err();
        assert!(matches!(
            err.error,
            Error::StepUnderflow { .. } | Error::Divergence { .. }
        ));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::rk4(0.1, 1.0, 0.0).validate().is_err());
        assert!(IntegratorConfig::rk4(-0.1, 0.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::rk4(0.1, 0.0, 1.0)
            .recording(Recording::EveryStep(0))
            .validate()
            .is_err());
        assert!(IntegratorConfig::rkf45(0.0, 0.0, 0.0, 1.0).validate().is_err());
    }

    #[test]
    fn grid_derivative_exact_for_quadratics() {
        let t = [0.0, 0.1, 0.3, 0.35, 0.9];
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        let d = grid_derivative(&t, &v);
        for (x, dv) in t.iter().zip(d) {
            assert!((dv - (6.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_format() {
        let cfg = IntegratorConfig::rk4(0.5, 0.0, 1.0);
        let tr = integrate(decay, &[1.0, 0.0, 0.0], StateKind::Cotangent, (1, 1), &cfg).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&["q1".to_string()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,q1,p1,z,h,residual");
        assert_eq!(
            lines.next().unwrap(),
            "0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0,NaN,NaN"
        );
    }
}
