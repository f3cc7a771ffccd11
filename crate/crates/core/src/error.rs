use thiserror::Error;

/// Errors raised by the detector model, its oracles and the CLI layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QjsError {
    #[error("domain error: {0}")]
    Domain(String),

    /// `b = 0` switches the amplification stage off; the spectral phases
    /// `2 Re(B_n)/b` and `2 Im(B_n)/b` are undefined.
    #[error("bias is off (b = 0): spectral phases are undefined")]
    BiasOff,

    /// Both the dark rate and the additive dark constant vanish.
    #[error("noiseless detector: dark counting rate is zero, signal-to-noise undefined")]
    Noiseless,

    #[error("no click possible: Tr[J rho] = 0")]
    NoClickPossible,

    #[error("time resolution too coarse: click probability {0} exceeds 1")]
    ResolutionTooCoarse(f64),

    #[error("quadrature did not converge: estimated error {achieved:e} > requested {requested:e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("ODE stepper failed at t = {t}: {reason}")]
    StepperFailure { t: f64, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The emission channel would populate `|n_max + 1>`.
    #[error("emission from n = {n_max} leaves the truncated Fock space (leakage {leakage:e})")]
    TruncationOverflow { n_max: usize, leakage: f64 },

    #[error("no plateau: signal-to-noise varies by {spread:.3} over the lowest quartile of the grid")]
    NoPlateau { spread: f64 },

    #[error("numerical residue: {0}")]
    Residue(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for QjsError {
    fn from(e: std::io::Error) -> Self {
        QjsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QjsError>;
