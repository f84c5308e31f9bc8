use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("singular Hessian matrix")]
    SingularMatrix,
    #[error("point is not on the manifold")]
    NotOnManifold,
    #[error("step norm {norm} is not below the retraction radius {radius}")]
    StepTooLarge { norm: f64, radius: f64 },
    #[error("vector is not tangent at the base point (|<v,x>| = {0:e})")]
    NotTangent(f64),
    #[error("retraction left the domain")]
    LeftDomain,
    #[error("Armijo line search exhausted after {0} backtracking steps")]
    LineSearchExhausted(usize),
    #[error("guaranteed decrease {0:e} is below the floating-point resolution of f")]
    Stalled(f64),
    #[error("objective has no Lipschitz bound for Local Backtracking GD")]
    MissingLipschitz,
    #[error("no regularizer made the Hessian invertible")]
    NoInvertibleRegularizer,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("method `{method}` does not apply to scenario `{scenario}`")]
    UnsupportedMethod { scenario: String, method: String },
}
