//! Scalar expressions over named variables, with forward-mode derivatives.
//!
//! Every physical input (Hamiltonians, Lagrangians, anchor and structure
//! entries, metrics, connections) enters the engine through this grammar.
//! Parameters are bound at parse time and can be rebound without reparsing.

mod parser;
pub mod scalar;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
pub use parser::{BinOp, Func, Node};
pub use scalar::{Dual, Scalar};

/// Named parameter values, e.g. `gamma -> 0.5`.
pub type Parameters = BTreeMap<String, f64>;

/// A parsed, differentiable scalar expression.
#[derive(Clone, Debug)]
pub struct ScalarField {
    source: String,
    ast: Arc<Node>,
    variables: Arc<[String]>,
    parameter_names: Arc<[String]>,
    parameter_values: Vec<f64>,
}

/// Symmetric matrix stored as its lower triangle, so `get(i, j) == get(j, i)`
/// holds bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    lower: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix {
            dim,
            lower: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index(i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        r * (r + 1) / 2 + c
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[Self::index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.lower[Self::index(i, j)] = value;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// Value plus first (and optionally second) partial derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub derivs: Vec<f64>,
    pub second: Option<SymmetricMatrix>,
}

impl ScalarField {
    /// Parses `text` over the ordered `variables`, binding `parameters`.
    pub fn parse<S: AsRef<str>>(text: &str, variables: &[S], parameters: &Parameters) -> Result<Self> {
        let variables: Vec<String> = variables.iter().map(|v| v.as_ref().to_string()).collect();
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(Error::Input(format!("duplicate variable name `{v}`")));
            }
            if parameters.contains_key(v) {
                return Err(Error::Input(format!("`{v}` is both a variable and a parameter")));
            }
            if Func::from_name(v).is_some() {
                return Err(Error::Input(format!("`{v}` is a reserved function name")));
            }
        }
        let parameter_names: Vec<String> = parameters.keys().cloned().collect();
        let parameter_values: Vec<f64> = parameters.values().copied().collect();
        let ast = parser::Parser::parse(text, &variables, &parameter_names)?;
        Ok(ScalarField {
            source: text.to_string(),
            ast: Arc::new(ast),
            variables: variables.into(),
            parameter_names: parameter_names.into(),
            parameter_values,
        })
    }

    /// A constant field over the given variables.
    pub fn constant<S: AsRef<str>>(value: f64, variables: &[S]) -> Result<Self> {
        Self::parse(&format!("{value:?}"), variables, &Parameters::new())
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Node {
        &self.ast
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn parameters(&self) -> Parameters {
        self.parameter_names
            .iter()
            .cloned()
            .zip(self.parameter_values.iter().copied())
            .collect()
    }

    /// Returns a copy with parameter `name` rebound to `value`; the parse tree is shared.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        let Some(i) = self.parameter_names.iter().position(|p| p == name) else {
            return Err(Error::Input(format!("no parameter named `{name}`")));
        };
        let mut out = self.clone();
        out.parameter_values[i] = value;
        Ok(out)
    }

    /// Fully parenthesized text of the parse tree.
    pub fn render(&self) -> String {
        self.ast.render(&self.variables, &self.parameter_names)
    }

    /// Whether the tree mentions variable `index` at all.
    pub fn mentions(&self, index: usize) -> bool {
        fn walk(node: &Node, index: usize) -> bool {
            match node {
                Node::Var(i) => *i == index,
                Node::Num(_) | Node::Param(_) => false,
                Node::Neg(inner) | Node::Call(_, inner) => walk(inner, index),
                Node::Binary(_, l, r) => walk(l, index) || walk(r, index),
            }
        }
        walk(&self.ast, index)
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        self.eval_generic(point)
    }

    pub fn eval_with_gradient(&self, point: &[f64]) -> Result<DualValue> {
        check_len("expression point", self.variables.len(), point.len())?;
        let out = self.eval_generic(&scalar::seed_all(point))?;
        let derivs = (0..point.len()).map(|i| out.tangent(i)).collect();
        Ok(DualValue {
            value: out.re,
            derivs,
            second: None,
        })
    }

    pub fn eval_with_hessian(&self, point: &[f64]) -> Result<DualValue> {
        check_len("expression point", self.variables.len(), point.len())?;
        let n = point.len();
        let out = self.eval_generic(&scalar::seed_all_nested(point))?;
        let derivs = (0..n).map(|i| out.re.tangent(i)).collect();
        let mut second = SymmetricMatrix::zeros(n);
        for i in 0..n {
            let row = out.tangent(i);
            for j in 0..=i {
                second.set(i, j, row.tangent(j));
            }
        }
        Ok(DualValue {
            value: out.re.re,
            derivs,
            second: Some(second),
        })
    }

    /// Evaluates over any [`Scalar`] type; domain checks use the real part.
    pub fn eval_generic<T: Scalar>(&self, point: &[T]) -> Result<T> {
        check_len("expression point", self.variables.len(), point.len())?;
        self.eval_node(&self.ast, point).map_err(|message| Error::Domain {
            message,
            assignment: self
                .variables
                .iter()
                .cloned()
                .zip(point.iter().map(Scalar::value))
                .collect(),
        })
    }

    fn eval_node<T: Scalar>(&self, node: &Node, point: &[T]) -> std::result::Result<T, String> {
        Ok(match node {
            Node::Num(v) => T::constant(*v),
            Node::Var(i) => point[*i].clone(),
            Node::Param(i) => T::constant(self.parameter_values[*i]),
            Node::Neg(inner) => -self.eval_node(inner, point)?,
            Node::Binary(op, l, r) => {
                if *op == BinOp::Pow {
                    let base = self.eval_node(l, point)?;
                    let exponent = self.eval_node::<f64>(r, &[])?;
                    return power(base, exponent);
                }
                let a = self.eval_node(l, point)?;
                let b = self.eval_node(r, point)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.value() == 0.0 {
                            return Err("division by zero".into());
                        }
                        a / b
                    }
                    BinOp::Pow => unreachable!(),
                }
            }
            Node::Call(func, arg) => {
                let x = self.eval_node(arg, point)?;
                match func {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x.value() <= 0.0 {
                            return Err(format!("log of non-positive value {}", x.value()));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x.value() < 0.0 {
                            return Err(format!("sqrt of negative value {}", x.value()));
                        }
                        x.sqrt()
                    }
                }
            }
        })
    }
}

fn power<T: Scalar>(base: T, exponent: f64) -> std::result::Result<T, String> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        let n = exponent as i32;
        if n < 0 && base.value() == 0.0 {
            return Err("division by zero (zero base, negative exponent)".into());
        }
        return Ok(base.powi(n));
    }
    if base.value() <= 0.0 {
        return Err(format!(
            "real exponent {exponent} needs a positive base, got {}",
            base.value()
        ));
    }
    Ok(base.powf(exponent))
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Convenience: `[("gamma", 0.5)]` into [`Parameters`].
pub fn params<const N: usize>(pairs: [(&str, f64); N]) -> Parameters {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
