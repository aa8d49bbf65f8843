use thiserror::Error;

/// Errors raised across the encoder/decoder pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("superquadric fit failed: {0}")]
    Fit(String),

    #[error("no dominant plane: best inlier ratio {ratio:.3}")]
    NoDominantPlane { ratio: f64 },

    #[error("infeasible grasp: {0}")]
    InfeasibleGrasp(String),

    #[error("unregistered task {0}")]
    UnregisteredTask(String),

    #[error("slot `{slot}` could not be filled: {reason}")]
    SlotFill { slot: String, reason: String },

    #[error("unrecognized instruction `{0}`")]
    UnrecognizedInstruction(String),

    #[error("segmentation mismatch: {pauses} pauses but {instructions} instructions")]
    Segmentation { pauses: usize, instructions: usize },

    #[error("segment {segment}: {source}")]
    AtSegment {
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grammar violations: {}", .0.join("; "))]
    Grammar(Vec<String>),

    #[error("inverse kinematics failed: closest approach {closest:.4} m")]
    IkFailure { closest: f64 },

    #[error("skill timed out after {steps} steps")]
    Timeout { steps: usize },

    #[error("semantic constraint violated at t={time:.3}s: {reason}")]
    SemanticViolation { time: f64, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("localization failed: {0}")]
    Localization(String),

    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn at_segment(self, segment: usize) -> Self {
        Error::AtSegment { segment, source: Box::new(self) }
    }

    pub fn at_frame(self, frame: usize) -> Self {
        Error::AtFrame { frame, source: Box::new(self) }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::Fit(_) => "fit",
            Error::NoDominantPlane { .. } => "no_dominant_plane",
            Error::InfeasibleGrasp(_) => "infeasible_grasp",
            Error::UnregisteredTask(_) => "unregistered_task",
            Error::SlotFill { .. } => "slot_fill",
            Error::UnrecognizedInstruction(_) => "unrecognized_instruction",
            Error::Segmentation { .. } => "segmentation",
            Error::AtSegment { source, .. } | Error::AtFrame { source, .. } => source.kind(),
            Error::Grammar(_) => "grammar",
            Error::IkFailure { .. } => "ik_failure",
            Error::Timeout { .. } => "timeout",
            Error::SemanticViolation { .. } => "semantic_violation",
            Error::Precondition(_) => "precondition",
            Error::Localization(_) => "localization",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
