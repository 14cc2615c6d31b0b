use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("window error: site n={n} outside [{lo}, {hi}] and no boundary policy applies")]
    Window { n: i64, lo: i64, hi: i64 },

    #[error("{stage}: no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("eigenvalue branch lost at omega={omega}: overlap with seed {overlap:.3}")]
    BranchLoss { omega: f64, overlap: f64 },

    #[error("no pinning threshold in ({lo}, {hi}): |c| - c_tol does not change sign")]
    ThresholdNotFound { lo: f64, hi: f64 },

    #[error("melnikov consistency: integral {integral} vs finite difference {fd} (relative gap {gap:.2e})")]
    Consistency { integral: f64, fd: f64, gap: f64 },

    #[error("state left the tubular neighbourhood at l = {0:?}")]
    OutOfTube(Vec<usize>),

    #[error("non-finite value at n={n}, l={l} (t={t})")]
    BlowUp { n: i64, l: usize, t: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Window { .. } => 2,
            Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
