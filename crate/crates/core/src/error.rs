use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("pole of the Gamma function at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integral diverges: {0}")]
    Divergence(String),

    #[error("{what} did not converge (error estimate {error:e})")]
    NonConvergence { what: String, error: f64 },

    #[error("Monte Carlo batch means disagree by {spread:.2} standard errors")]
    VarianceExplosion { spread: f64 },

    #[error("contour Re z = {0} passes through a pole")]
    PoleOnContour(f64),

    #[error("stability guard violated: dt = {dt:e} exceeds {limit:e}")]
    StabilityGuard { dt: f64, limit: f64 },

    /// `line == 0` when the offending value came from a flag or a default.
    #[error("config error{}: {msg}", at_line(*.line))]
    Config { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by numerics rather than by input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::VarianceExplosion { .. }
                | Error::Divergence(_)
                | Error::PoleOnContour(_)
        )
    }

    /// Process exit status: 1 for numerical failure, 2 for bad input or i/o.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            1
        } else {
            2
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" (line {line})")
    }
}

pub type Result<T> = std::result::Result<T, Error>;
