use thiserror::Error;

/// Errors raised by the laboratory. Each variant names the module-level
/// precondition or numerical failure that produced it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("supercriticality out of admissible range: {0}")]
    ExponentRange(String),

    #[error("nonconvergent I_m^alpha: m = {m}, alpha = {alpha} (need alpha + 1 < 2m and alpha >= 0)")]
    NonconvergentIntegral { m: f64, alpha: f64 },

    #[error("quadrature did not reach tolerance: estimate {value}, error {error:e}")]
    Quadrature { value: f64, error: f64 },

    #[error("invalid form: {0}")]
    InvalidForm(String),

    #[error("corrector solve failed: {0}")]
    CorrectorSolve(String),

    #[error("outside truncation domain: r = {r}, t = {t}")]
    OutsideDomain { r: f64, t: f64 },

    #[error("fit rejected: {0}")]
    Fit(String),

    #[error("umbilic-degenerate point: no interior maximum (phi = {0})")]
    UmbilicDegenerate(f64),

    #[error("insufficient samples: standard error {stderr:e} above budget {budget:e}")]
    InsufficientSamples { stderr: f64, budget: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing payload: {0}")]
    MissingPayload(String),

    #[error("{module} [config {hash}]: {source}")]
    Module {
        module: &'static str,
        hash: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
