use serde::Serialize;

use crate::error::{Error, Result};

/// Structure constants `c^C_AB` of a finite-dimensional Lie algebra.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LieAlgebraData {
    name: String,
    dim: usize,
    /// Index `(c * dim + a) * dim + b`.
    constants: Vec<f64>,
}

impl LieAlgebraData {
    /// Full array of constants; antisymmetry must hold exactly and the
    /// Jacobi identity to rounding.
    pub fn new(name: &str, dim: usize, constants: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Construction("a Lie algebra needs dim >= 1".into()));
        }
        if constants.len() != dim * dim * dim {
            return Err(Error::Dimension {
                context: "structure constants".into(),
                expected: dim * dim * dim,
                found: constants.len(),
            });
        }
        if constants.iter().any(|c| !c.is_finite()) {
            return Err(Error::Construction("non-finite structure constant".into()));
        }
        let data = LieAlgebraData {
            name: name.to_string(),
            dim,
            constants,
        };
        for c in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    if data.get(c, a, b) != -data.get(c, b, a) {
                        return Err(Error::Construction(format!(
                            "c^{}_{}{} is not antisymmetric in its lower indices",
                            c + 1,
                            a + 1,
                            b + 1
                        )));
                    }
                }
            }
        }
        let scale = data.constants.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
        let residual = data.jacobi_residual();
        if residual > 1e-12 * scale * scale {
            return Err(Error::Construction(format!(
                "structure constants of `{name}` violate the Jacobi identity (residual {residual:e})"
            )));
        }
        Ok(data)
    }

    /// Constants from `(c, a, b, value)` entries (0-based); `c^C_BA = -c^C_AB` is implied.
    pub fn from_brackets(name: &str, dim: usize, entries: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut constants = vec![0.0; dim * dim * dim];
        for &(c, a, b, v) in entries {
            if c >= dim || a >= dim || b >= dim || a == b {
                return Err(Error::Construction(format!(
                    "bad structure-constant index ({c},{a},{b})"
                )));
            }
            constants[(c * dim + a) * dim + b] = v;
            constants[(c * dim + b) * dim + a] = -v;
        }
        Self::new(name, dim, constants)
    }

    /// `[e1,e2]=e3`, `[e2,e3]=e1`, `[e3,e1]=e2`.
    pub fn so3() -> Self {
        Self::from_brackets("so3", 3, &[(2, 0, 1, 1.0), (0, 1, 2, 1.0), (1, 2, 0, 1.0)]).expect("so(3) constants")
    }

    pub fn abelian(dim: usize) -> Result<Self> {
        Self::new(&format!("abelian{dim}"), dim, vec![0.0; dim * dim * dim])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `c^c_ab`.
    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.constants[(c * self.dim + a) * self.dim + b]
    }

    pub fn is_abelian(&self) -> bool {
        self.constants.iter().all(|c| *c == 0.0)
    }

    /// Max over `(a,b,c,e)` of `|sum_d c^d_bc c^e_ad + c^d_ca c^e_bd + c^d_ab c^e_cd|`.
    pub fn jacobi_residual(&self) -> f64 {
        let m = self.dim;
        let mut worst = 0.0_f64;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for e in 0..m {
                        let s: f64 = (0..m)
                            .map(|d| {
                                self.get(d, b, c) * self.get(e, a, d)
                                    + self.get(d, c, a) * self.get(e, b, d)
                                    + self.get(d, a, b) * self.get(e, c, d)
                            })
                            .sum();
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Max of `|c^D_AB k_DE + c^D_AE k_DB|`: zero iff `k` is ad-invariant.
    pub fn ad_invariance_residual(&self, kappa: &nalgebra::DMatrix<f64>) -> f64 {
        let m = self.dim;
        let mut worst = 0.0_f64;
        for a in 0..m {
            for b in 0..m {
                for e in 0..m {
                    let s: f64 = (0..m)
                        .map(|d| self.get(d, a, b) * kappa[(d, e)] + self.get(d, a, e) * kappa[(d, b)])
                        .sum();
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }
}
