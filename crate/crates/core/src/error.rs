use crate::ehrenfest::Microstate;
use crate::ensemble::MomentField;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:e})")]
    NotHermitian { max_asymmetry: f64 },

    #[error("two-body coefficients are not exchange-symmetric (max asymmetry {max_asymmetry:e})")]
    NotExchangeSymmetric { max_asymmetry: f64 },

    #[error("Bloch vector is not a unit vector (|n| = {norm})")]
    NotUnitBloch { norm: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("matrix trace is {trace}, expected 1")]
    NotNormalized { trace: f64 },

    #[error("unsupported matrix dimension {0}; expected 2 or 4")]
    UnsupportedDimension(usize),

    #[error("purity {purity} exceeds the pure-state bound 1/2")]
    PurityExceeded { purity: f64 },

    #[error("state is pure; the decomposition is unique and has no free angle")]
    PureState,

    #[error("degenerate decomposition ray: Bloch vector coincides with the chosen projector")]
    DegenerateRay,

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("classical density is not normalizable (integral {integral})")]
    Unnormalizable { integral: f64 },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("moment field of order {have} given where order {need} is required")]
    MissingMoment { have: usize, need: usize },

    #[error("node {node} (R = {r}, P = {p}) carries an indefinite operator (min eigenvalue {min_eigenvalue:e})")]
    IndefiniteNode {
        node: usize,
        r: f64,
        p: f64,
        min_eigenvalue: f64,
    },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64, last_good: Microstate },

    #[error("effective evolution produced non-finite values at t = {t}")]
    EvolutionAborted { t: f64, last_good: Box<MomentField> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
