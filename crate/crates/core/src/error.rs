use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Channel-potential root could not be bracketed.
    #[error("electrostatics solver failed: no sign change in [{lo} V, {hi} V] ({context})")]
    SolverFailure { lo: f64, hi: f64, context: String },

    /// No constant-current crossing inside the curve.
    #[error(
        "V_TH extraction failed: target {target:.3e} A not crossed on [{v_min} V, {v_max} V] \
         (current range {i_min:.3e} A .. {i_max:.3e} A)"
    )]
    ExtractionFailure {
        target: f64,
        v_min: f64,
        v_max: f64,
        i_min: f64,
        i_max: f64,
    },

    #[error("index {index} out of range for {len} cells")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid stack: {0}")]
    InvalidStack(String),

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    /// A failure inside a transient run, tagged with where it happened.
    #[error("at t = {t:.6e} s (segment {segment}): {source}")]
    Transient {
        t: f64,
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unit error: {0}")]
    Unit(#[from] crate::units::UnitError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
