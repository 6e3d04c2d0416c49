use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("direction {direction} is not an allowed jump of face {face}")]
    DirectionNotOnFace { direction: String, face: String },

    #[error("point is on a facet (coordinate {index} vanishes)")]
    OnFacet { index: usize },

    #[error("resource limit: {what} needs {needed} but the budget is {budget}")]
    ResourceLimit {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("bound inapplicable: C*eta = {product} >= 1")]
    BoundInapplicable { product: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_)
            | Error::DirectionNotOnFace { .. }
            | Error::OnFacet { .. }
            | Error::Json(_) => 2,
            Error::ResourceLimit { .. } => 3,
            Error::NoConvergence { .. } => 4,
            Error::BoundInapplicable { .. } => 2,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
