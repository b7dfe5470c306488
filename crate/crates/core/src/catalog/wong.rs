use nalgebra::DMatrix;

use crate::algebroid::{sample_base_points, AlgebroidSpec};
use crate::dynamics::{ContactState, HerglotzVelocity, TangentFunction};
use crate::error::{check_len, Error, Result};
use crate::expr::{Parameters, ScalarField};
use crate::jacobi::{ContactCoState, CotangentFunction, PhaseVelocity};
use crate::linalg::{condition_number, inverse_regular, solve_regular, CONDITION_LIMIT};

use super::atiyah::is_zero_literal;
use super::{build_atiyah, AtiyahData};

/// Metric data of a charged particle in a Yang-Mills field with linear damping.
#[derive(Clone, Debug)]
pub struct WongSystem {
    /// `g_ij(x)` over the base coordinates.
    metric_base: Vec<Vec<ScalarField>>,
    /// `k_AB`, constant.
    metric_algebra: DMatrix<f64>,
    gamma: f64,
}

impl WongSystem {
    pub fn new(metric_base: Vec<Vec<ScalarField>>, metric_algebra: DMatrix<f64>, gamma: f64) -> Result<Self> {
        let n = metric_base.len();
        for row in &metric_base {
            check_len("base metric row", n, row.len())?;
        }
        for i in 0..n {
            for j in 0..i {
                if metric_base[i][j].render() != metric_base[j][i].render() {
                    return Err(Error::Construction(format!(
                        "base metric is not symmetric: g_{}{} = `{}` but g_{}{} = `{}`",
                        i + 1,
                        j + 1,
                        metric_base[i][j].source(),
                        j + 1,
                        i + 1,
                        metric_base[j][i].source()
                    )));
                }
            }
        }
        if !metric_algebra.is_square() || metric_algebra != metric_algebra.transpose() {
            return Err(Error::Construction(
                "algebra metric must be square and exactly symmetric".into(),
            ));
        }
        if metric_algebra.clone().cholesky().is_none() {
            return Err(Error::Construction("algebra metric is not positive definite".into()));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Construction(format!(
                "gamma must be finite and >= 0, got {gamma}"
            )));
        }
        Ok(WongSystem {
            metric_base,
            metric_algebra,
            gamma,
        })
    }

    /// Parses `g_ij` texts over `coordinates`.
    pub fn parse(
        coordinates: &[String],
        metric_base: &[Vec<&str>],
        metric_algebra: DMatrix<f64>,
        gamma: f64,
        parameters: &Parameters,
    ) -> Result<Self> {
        let g = metric_base
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| ScalarField::parse(t, coordinates, parameters))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(g, metric_algebra, gamma)
    }

    /// Flat metrics `g = I_n`, `k = I_m`.
    pub fn identity(coordinates: &[String], algebra_dim: usize, gamma: f64) -> Result<Self> {
        let n = coordinates.len();
        let one = ScalarField::constant(1.0, coordinates)?;
        let zero = ScalarField::constant(0.0, coordinates)?;
        let g = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { one.clone() } else { zero.clone() })
                    .collect()
            })
            .collect();
        Self::new(g, DMatrix::identity(algebra_dim, algebra_dim), gamma)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.metric_base.clone(), self.metric_algebra.clone(), gamma)
    }

    pub fn metric_algebra(&self) -> &DMatrix<f64> {
        &self.metric_algebra
    }

    pub fn metric_base_entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.metric_base[i][j]
    }

    pub fn eval_metric_base(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.metric_base.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = self.metric_base[i][j].eval(q)?;
            }
        }
        Ok(g)
    }

    /// `g(q)` and `d_k g(q)` for every `k`.
    fn metric_jet(&self, q: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        let n = self.metric_base.len();
        let mut g = DMatrix::zeros(n, n);
        let mut dg = vec![DMatrix::zeros(n, n); n];
        for i in 0..n {
            for j in 0..n {
                let d = self.metric_base[i][j].eval_with_gradient(q)?;
                g[(i, j)] = d.value;
                for k in 0..n {
                    dg[k][(i, j)] = d.derivs[k];
                }
            }
        }
        Ok((g, dg))
    }

    fn parameters(&self) -> Parameters {
        let mut p = Parameters::new();
        for row in &self.metric_base {
            for f in row {
                p.extend(f.parameters());
            }
        }
        p
    }
}

/// Spec, reduced Lagrangian and reduced Hamiltonian of a Wong system.
#[derive(Clone, Debug)]
pub struct WongParts {
    pub spec: AlgebroidSpec,
    pub lagrangian: TangentFunction,
    pub hamiltonian: CotangentFunction,
}

fn check_compatible(sys: &WongSystem, data: &AtiyahData) -> Result<()> {
    let n = data.base_dim();
    let m = data.algebra().dim();
    check_len("base metric", n, sys.metric_base.len())?;
    check_len("algebra metric", m, sys.metric_algebra.nrows())?;
    for row in &sys.metric_base {
        for f in row {
            if f.variables() != data.coordinates() {
                return Err(Error::Construction(format!(
                    "metric entry `{}` is not over the coordinates {:?}",
                    f.source(),
                    data.coordinates()
                )));
            }
        }
    }
    let scale = sys.metric_algebra.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
    let residual = data.algebra().ad_invariance_residual(&sys.metric_algebra);
    if residual > 1e-12 * scale {
        return Err(Error::Construction(format!(
            "algebra metric is not bi-invariant (residual {residual:e})"
        )));
    }
    Ok(())
}

/// Text of a determinant by cofactor expansion along the first row.
fn det_text(rows: &[Vec<String>]) -> String {
    match rows.len() {
        0 => "1".into(),
        1 => rows[0][0].clone(),
        k => {
            let terms: Vec<String> = (0..k)
                .map(|j| {
                    let minor: Vec<Vec<String>> = rows[1..]
                        .iter()
                        .map(|r| {
                            r.iter()
                                .enumerate()
                                .filter(|(c, _)| *c != j)
                                .map(|(_, v)| v.clone())
                                .collect()
                        })
                        .collect();
                    let sign = if j % 2 == 0 { "" } else { "-" };
                    format!("{sign}({}) * ({})", rows[0][j], det_text(&minor))
                })
                .collect();
            terms.join(" + ")
        }
    }
}

/// `g^ij` as expression texts: reciprocals for a diagonal metric, adjugate over determinant otherwise.
fn inverse_texts(g: &[Vec<ScalarField>]) -> Vec<Vec<Option<String>>> {
    let n = g.len();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || is_zero_literal(&g[i][j])));
    if diagonal {
        return (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (i == j).then(|| format!("(1 / {})", g[i][i].render())))
                    .collect()
            })
            .collect();
    }
    let rows: Vec<Vec<String>> = g.iter().map(|r| r.iter().map(ScalarField::render).collect()).collect();
    let det = det_text(&rows);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    // (g^-1)_ij = cofactor_ji / det
                    let minor: Vec<Vec<String>> = rows
                        .iter()
                        .enumerate()
                        .filter(|(r, _)| *r != j)
                        .map(|(_, row)| {
                            row.iter()
                                .enumerate()
                                .filter(|(c, _)| *c != i)
                                .map(|(_, v)| v.clone())
                                .collect()
                        })
                        .collect();
                    let sign = if (i + j) % 2 == 0 { "" } else { "-" };
                    Some(format!("({sign}({}) / ({det}))", det_text(&minor)))
                })
                .collect()
        })
        .collect()
}

fn quadratic_text(terms: Vec<String>) -> String {
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// Builds the Atiyah spec together with
/// `l = 1/2 (k_AB v^A v^B + g_ij y^i y^j) - gamma z` and
/// `h = 1/2 (k^AB pb_A pb_B + g^ij p_i p_j) + gamma z`.
/// Fiber coordinates are ordered base first: `y1..yn` are `dx^i`, then `v^A`.
pub fn build_wong(sys: &WongSystem, data: &AtiyahData) -> Result<WongParts> {
    check_compatible(sys, data)?;
    let spec = build_atiyah(data)?;
    let n = data.base_dim();
    let m = data.algebra().dim();

    let center: Vec<f64> = spec.sample_box().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let mut probes = vec![center];
    probes.extend(sample_base_points(&spec, 16, 0).into_iter().map(|p| p.0));
    for q in &probes {
        let g = sys.eval_metric_base(q)?;
        let condition = condition_number(&g);
        if g.clone().cholesky().is_none() || !(condition <= CONDITION_LIMIT) {
            return Err(Error::Regularity { condition });
        }
    }

    let mut params = sys.parameters();
    params.extend(data.parameters());
    params.insert("gamma".into(), sys.gamma);

    let kappa = &sys.metric_algebra;
    let kinv = inverse_regular(kappa)?;

    let mut l_terms = Vec::new();
    let mut h_terms = Vec::new();
    for a in 0..m {
        for b in 0..m {
            if kappa[(a, b)] != 0.0 {
                l_terms.push(format!("{:?} * y{} * y{}", kappa[(a, b)], n + a + 1, n + b + 1));
            }
            if kinv[(a, b)] != 0.0 {
                h_terms.push(format!("{:?} * p{} * p{}", kinv[(a, b)], n + a + 1, n + b + 1));
            }
        }
    }
    let ginv = inverse_texts(&sys.metric_base);
    for i in 0..n {
        for j in 0..n {
            if !is_zero_literal(&sys.metric_base[i][j]) {
                l_terms.push(format!("{} * y{} * y{}", sys.metric_base[i][j].render(), i + 1, j + 1));
            }
            if let Some(t) = &ginv[i][j] {
                h_terms.push(format!("{t} * p{} * p{}", i + 1, j + 1));
            }
        }
    }
    let l_text = format!("0.5 * ({}) - gamma * z", quadratic_text(l_terms));
    let h_text = format!("0.5 * ({}) + gamma * z", quadratic_text(h_terms));
    let lagrangian = TangentFunction::parse(&spec, &l_text, &params)?;
    let hamiltonian = CotangentFunction::parse(&spec, &h_text, &params)?;
    Ok(WongParts {
        spec,
        lagrangian,
        hamiltonian,
    })
}

/// Contact Hamilton equations of the Wong Hamiltonian written out by hand:
///
/// ```text
/// dq^i  = g^ij p_j
/// dp_i  = -1/2 d_i g^jk p_j p_k + B^A_ij pb_A g^jk p_k - c^C_AB A_i^B pb_C k^AD pb_D - gamma p_i
/// dpb_A = c^C_AB A_i^B pb_C g^ij p_j - c^C_AB pb_C k^BD pb_D - gamma pb_A
/// dz    = 1/2 (k^AB pb_A pb_B + g^ij p_i p_j) - gamma z
/// ```
pub fn wong_rhs_specialized(sys: &WongSystem, data: &AtiyahData, x: &ContactCoState) -> Result<PhaseVelocity> {
    check_compatible(sys, data)?;
    let n = data.base_dim();
    let m = data.algebra().dim();
    check_len("state q", n, x.q.len())?;
    check_len("state p", n + m, x.p.len())?;
    let c = data.algebra();
    let q = &x.q;
    let p = &x.p[..n];
    let pb = &x.p[n..];

    let (g, dg) = sys.metric_jet(q)?;
    let ginv = inverse_regular(&g)?;
    let kinv = inverse_regular(&sys.metric_algebra)?;
    let conn = data.eval_connection(q)?;
    let a_of = |i: usize, b: usize| conn[i * m + b];
    let curv = data.curvature().eval(q)?;
    let b_of = |a: usize, i: usize, j: usize| curv[(a * n + i) * n + j];

    let pv = nalgebra::DVector::from_column_slice(p);
    let pbv = nalgebra::DVector::from_column_slice(pb);
    let gp = &ginv * &pv;
    let kp = &kinv * &pbv;

    let dq: Vec<f64> = gp.iter().copied().collect();
    let mut dp = vec![0.0; n + m];
    for i in 0..n {
        // d_i g^-1 = -g^-1 (d_i g) g^-1, so p.(d_i g^-1).p = -(g^-1 p).(d_i g).(g^-1 p)
        let kinetic = -(gp.transpose() * &dg[i] * &gp)[(0, 0)];
        let mut v = -0.5 * kinetic;
        for a in 0..m {
            for j in 0..n {
                v += b_of(a, i, j) * pb[a] * gp[j];
            }
        }
        for a in 0..m {
            for b in 0..m {
                for cc in 0..m {
                    v -= c.get(cc, a, b) * a_of(i, b) * pb[cc] * kp[a];
                }
            }
        }
        dp[i] = v - sys.gamma * p[i];
    }
    for a in 0..m {
        let mut v = 0.0;
        for b in 0..m {
            for cc in 0..m {
                let k = c.get(cc, a, b);
                if k == 0.0 {
                    continue;
                }
                for i in 0..n {
                    v += k * a_of(i, b) * pb[cc] * gp[i];
                }
                v -= k * pb[cc] * kp[b];
            }
        }
        dp[n + a] = v - sys.gamma * pb[a];
    }
    let kinetic = 0.5 * (pbv.dot(&kp) + pv.dot(&gp));
    Ok(PhaseVelocity {
        dq,
        dp,
        dz: kinetic - sys.gamma * x.z,
    })
}

/// Lagrange-Poincare-Herglotz equations of the Wong Lagrangian written out by hand:
///
/// ```text
/// g_jk ddx^k = 1/2 d_j g_ik dx^i dx^k - d_i g_jk dx^i dx^k
///              + k_AE v^E (B^A_ji dx^i - c^A_BD A_j^D v^B) - gamma g_jk dx^k
/// k_AB dv^B  = -k_CE v^E (c^C_AB v^B - c^C_AB A_i^B dx^i) - gamma k_AB v^B
/// ```
pub fn lagrange_poincare_herglotz_rhs(
    sys: &WongSystem,
    data: &AtiyahData,
    s: &ContactState,
) -> Result<HerglotzVelocity> {
    check_compatible(sys, data)?;
    let n = data.base_dim();
    let m = data.algebra().dim();
    check_len("state q", n, s.q.len())?;
    check_len("state y", n + m, s.y.len())?;
    let c = data.algebra();
    let q = &s.q;
    let xd = nalgebra::DVector::from_column_slice(&s.y[..n]);
    let v = nalgebra::DVector::from_column_slice(&s.y[n..]);

    let (g, dg) = sys.metric_jet(q)?;
    let kappa = &sys.metric_algebra;
    let conn = data.eval_connection(q)?;
    let a_of = |i: usize, b: usize| conn[i * m + b];
    let curv = data.curvature().eval(q)?;
    let b_of = |a: usize, i: usize, j: usize| curv[(a * n + i) * n + j];
    let kv = kappa * &v;

    let mut rhs_x = vec![0.0; n];
    for j in 0..n {
        let mut r = 0.5 * (xd.transpose() * &dg[j] * &xd)[(0, 0)];
        for i in 0..n {
            for k in 0..n {
                r -= dg[i][(j, k)] * xd[i] * xd[k];
            }
        }
        for a in 0..m {
            let mut inner: f64 = (0..n).map(|i| b_of(a, j, i) * xd[i]).sum();
            for b in 0..m {
                for d in 0..m {
                    inner -= c.get(a, b, d) * a_of(j, d) * v[b];
                }
            }
            r += kv[a] * inner;
        }
        r -= sys.gamma * (&g * &xd)[j];
        rhs_x[j] = r;
    }
    let mut rhs_v = vec![0.0; m];
    for a in 0..m {
        let mut r = 0.0;
        for cc in 0..m {
            let mut inner = 0.0;
            for b in 0..m {
                let k = c.get(cc, a, b);
                if k == 0.0 {
                    continue;
                }
                inner += k * v[b];
                for i in 0..n {
                    inner -= k * a_of(i, b) * xd[i];
                }
            }
            r -= kv[cc] * inner;
        }
        rhs_v[a] = r - sys.gamma * kv[a];
    }
    let mut dy = solve_regular(&g, &rhs_x)?;
    dy.extend(solve_regular(kappa, &rhs_v)?);
    let lagrangian = 0.5 * (v.dot(&kv) + xd.dot(&(&g * &xd))) - sys.gamma * s.z;
    Ok(HerglotzVelocity {
        dq: xd.iter().copied().collect(),
        dy,
        dz: lagrangian,
    })
}
