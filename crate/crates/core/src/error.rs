use thiserror::Error;

pub type Result<T> = std::result::Result<T, DnlsError>;

#[derive(Debug, Error)]
pub enum DnlsError {
    #[error("{function}: argument {value} outside domain ({reason})")]
    Domain { function: &'static str, value: f64, reason: &'static str },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Γ_α evaluated at (or numerically on top of) its pole.
    #[error("Γ_α has a pole at λ = {lambda_b}; requested λ = {lambda}")]
    Pole { lambda: f64, lambda_b: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(
        "exponent q = {q} outside admissible range {range} for n = {n} \
         (wave-operator bounds are known to fail for q >= 3 in three dimensions)"
    )]
    Range { q: f64, n: u8, range: &'static str },

    #[error("test-function construction failed: Re<F(v+#), phi#> = {achieved:e}; increase resolution")]
    Resolution { achieved: f64 },

    #[error("mass drift {drift:e} exceeds tolerance {tolerance:e} at t = {t}")]
    MassDrift { t: f64, drift: f64, tolerance: f64 },

    #[error("malformed snapshot or cache file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
