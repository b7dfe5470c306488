use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{name}` at {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("function `{name}` at {position} takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        position: usize,
        expected: usize,
        found: usize,
    },

    #[error("domain error: {message} at {}", format_assignment(.assignment))]
    Domain {
        message: String,
        assignment: Vec<(String, f64)>,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("numerical failure at q = {point:?}: {message}")]
    Numerical { message: String, point: Vec<f64> },

    #[error("singular fiber Hessian (condition estimate {condition:e})")]
    Regularity { condition: f64 },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("step size underflow at t = {t} (step {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("non-finite state at t = {t}")]
    Divergence { t: f64, last_state: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_assignment(assignment: &[(String, f64)]) -> String {
    let parts: Vec<String> = assignment
        .iter()
        .map(|(name, value)| format!("{name}={value}"))
        .collect();
    format!("[{}]", parts.join(", "))
}

pub(crate) fn check_len(context: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context: context.to_string(),
            expected,
            found,
        })
    }
}
