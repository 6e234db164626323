use phasereserve::distributions::DistError;
use phasereserve::matrix::MatrixError;
use phasereserve::mittag_leffler::MlError;
use phasereserve::reserve::ReserveError;
use phasereserve::simulation::McError;
use thiserror::Error;

/// Failure of a command, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed files, flags or conditioning values (exit 2).
    #[error("{0}")]
    Input(String),
    /// A well-posed request the numerics could not complete (exit 3).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn matrix(e: MatrixError) -> CliError {
    match e {
        MatrixError::FallbackRequired => CliError::Numerical(format!("{e} (--method quadrature)")),
        MatrixError::NonSquare { .. }
        | MatrixError::SignPattern { .. }
        | MatrixError::RowSumViolation { .. }
        | MatrixError::NotTransient(_) => CliError::Input(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

fn ml(e: MlError) -> CliError {
    match e {
        MlError::Matrix(m) => matrix(m),
        MlError::InvalidParameters { .. } | MlError::InvalidScale(_) => CliError::Input(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

impl From<DistError> for CliError {
    fn from(e: DistError) -> Self {
        match e {
            DistError::Matrix(m) => matrix(m),
            DistError::Ml(m) => ml(m),
            DistError::TailExhausted(_) | DistError::Diverged(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ReserveError> for CliError {
    fn from(e: ReserveError) -> Self {
        match e {
            ReserveError::Dist(d) => d.into(),
            ReserveError::Ml(m) => ml(m),
            ReserveError::Matrix(m) => matrix(m),
            ReserveError::QuadratureUnconverged { .. } | ReserveError::Unfundable => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Reserve(r) => r.into(),
            McError::AllAbsorbed { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
