use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lexical error at byte {offset}: {message}")]
    Lex { offset: usize, message: String },

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("expression uses more than one variable (`{first}` and `{second}`)")]
    MultipleVariables { first: String, second: String },

    #[error("domain error in `{subexpr}` at {at}: {message}")]
    Domain {
        subexpr: String,
        at: f64,
        message: String,
    },

    #[error("density is not C1 at {at}: one-sided slopes {left} and {right} disagree")]
    NonSmooth { at: f64, left: f64, right: f64 },

    #[error("non-finite value while evaluating at {at}")]
    NonFinite { at: f64 },

    #[error("quadrature did not reach tolerance {requested:e}: achieved error estimate {estimate:e}")]
    Quadrature { requested: f64, estimate: f64 },

    #[error("volume {volume} lies beyond the coordinate transform (cap reached at x = {position_cap})")]
    UnboundedInverse { volume: f64, position_cap: f64 },

    #[error("model violates the standing hypotheses: {0}")]
    ModelViolation(String),

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("indeterminate extended-real operation: {0}")]
    Indeterminate(String),

    #[error("invalid density definition: {0}")]
    Definition(String),

    #[error("inconclusive asymptotics: {0}")]
    Inconclusive(String),

    #[error("no tie at V1 = {v1}: V1 is not below the blowup time {v0}")]
    NoTie { v1: f64, v0: String },

    #[error("no tie curve: V0={v0}")]
    NoTieCurve { v0: String },

    #[error("search exceeded its cap: {0}")]
    CapExceeded(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
