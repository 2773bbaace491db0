pub mod approx;
pub mod linalg;
pub mod par;
pub mod sets;
pub mod discretize;
pub mod oracle;
pub mod reach;

use thiserror::Error as ThisError;

/// Any error raised by the library, tagged with the module it came from.
#[derive(Debug, ThisError, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Set(#[from] sets::SetError),
    #[error(transparent)]
    Approx(#[from] approx::ApproxError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error(transparent)]
    Discretize(#[from] discretize::DiscretizeError),
    #[error(transparent)]
    Reach(#[from] reach::ReachError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
}

impl Error {
    /// Flattens wrapped errors so that the variant names the module where the
    /// error was raised.
    pub fn origin(self) -> Error {
        use approx::ApproxError as A;
        use discretize::DiscretizeError as D;
        use oracle::OracleError as O;
        use reach::ReachError as R;
        use sets::SetError as S;
        match self {
            Error::Set(S::Linalg(e)) => Error::Linalg(e),
            Error::Approx(A::Set(e)) => Error::Set(e).origin(),
            Error::Discretize(D::Linalg(e)) => Error::Linalg(e),
            Error::Discretize(D::Set(e)) => Error::Set(e).origin(),
            Error::Reach(R::Approx(e)) => Error::Approx(e).origin(),
            Error::Reach(R::Set(e)) => Error::Set(e).origin(),
            Error::Reach(R::Linalg(e)) => Error::Linalg(e),
            Error::Reach(R::Discretize(e)) => Error::Discretize(e).origin(),
            Error::Oracle(O::Set(e)) => Error::Set(e).origin(),
            Error::Oracle(O::Linalg(e)) => Error::Linalg(e),
            Error::Oracle(O::Discretize(e)) => Error::Discretize(e).origin(),
            Error::Oracle(O::Reach(e)) => Error::Reach(e).origin(),
            e => e,
        }
    }

    /// Module where the error was raised.
    pub fn module(&self) -> &'static str {
        match self.clone().origin() {
            Error::Set(_) => "sets",
            Error::Approx(_) => "approx",
            Error::Linalg(_) => "linalg",
            Error::Discretize(_) => "discretize",
            Error::Reach(_) => "reach",
            Error::Oracle(_) => "oracle",
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Set(e) => e.kind(),
            Error::Approx(e) => e.kind(),
            Error::Linalg(e) => e.kind(),
            Error::Discretize(e) => e.kind(),
            Error::Reach(e) => e.kind(),
            Error::Oracle(e) => e.kind(),
        }
    }

    /// Whether the error is an arithmetic failure on valid input (overflow,
    /// a singular solve, an exhausted iteration budget) rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self.clone().origin() {
            Error::Linalg(e) => !e.is_input_error(),
            Error::Approx(approx::ApproxError::BudgetExceeded { .. }) => true,
            Error::Oracle(oracle::OracleError::Integration(_))
            | Error::Oracle(oracle::OracleError::ContainmentViolation { .. }) => true,
            _ => false,
        }
    }
}
