use crate::expr::ExprError;

/// Every failure the library reports, named after the condition that caused it.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("BranchingTooSmall: n_{level} = {value} < 2")]
    BranchingTooSmall { level: usize, value: String },
    #[error("RatioInfimumZero: {0}")]
    RatioInfimumZero(String),
    #[error("Overpacked: n_k c_k^d = {value} > 1 at level k = {level}")]
    Overpacked { level: usize, value: String },
    #[error("ScaleTooLarge: r = {r} exceeds the seed diameter {diameter}")]
    ScaleTooLarge { r: String, diameter: String },
    #[error("ScaleOrder: expected 0 < r' < r, got r = {r}, r' = {r_prime}")]
    ScaleOrder { r: String, r_prime: String },
    #[error("NonPositiveScale: {0}")]
    NonPositiveScale(String),
    #[error("WordOutOfRange: {0}")]
    WordOutOfRange(String),
    #[error("PlacementInfeasible: {0}")]
    PlacementInfeasible(String),
    #[error("InexactGeometry: {0}")]
    InexactGeometry(String),
    #[error("DimensionMismatch: {0} vs {1}")]
    DimensionMismatch(u8, u8),
    #[error("NotOneDimensional: {0}")]
    NotOneDimensional(String),
    #[error("ScaleBelowResolution: {0}")]
    ScaleBelowResolution(String),
    #[error("PreconditionViolated: {0}")]
    PreconditionViolated(String),
    #[error("NotUniformlyDisconnectedAtScale: level {level}: {detail}")]
    NotUniformlyDisconnectedAtScale { level: usize, detail: String },
    #[error("InvalidCount: {0}")]
    InvalidCount(String),
    #[error("EtaTooLarge: level {level}: {detail}")]
    EtaTooLarge { level: usize, detail: String },
    #[error("DepthExhausted: {0}")]
    DepthExhausted(String),
    #[error("CapacityExhausted: level {level}, node {node}: {detail}")]
    CapacityExhausted { level: usize, node: String, detail: String },
    #[error("TooLarge: {0}")]
    TooLarge(String),
    #[error("ParseError: {0}")]
    Parse(String),
    #[error("UnknownExample: {0}")]
    UnknownExample(String),
    #[error("Io: {0}")]
    Io(String),
}

impl Error {
    /// Short variant name, used in reports and by the Python bindings.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Expr(_) => "ExpressionError",
            Error::InvalidRule(_) => "InvalidRule",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::BranchingTooSmall { .. } => "BranchingTooSmall",
            Error::RatioInfimumZero(_) => "RatioInfimumZero",
            Error::Overpacked { .. } => "Overpacked",
            Error::ScaleTooLarge { .. } => "ScaleTooLarge",
            Error::ScaleOrder { .. } => "ScaleOrder",
            Error::NonPositiveScale(_) => "NonPositiveScale",
            Error::WordOutOfRange(_) => "WordOutOfRange",
            Error::PlacementInfeasible(_) => "PlacementInfeasible",
            Error::InexactGeometry(_) => "InexactGeometry",
            Error::DimensionMismatch(..) => "DimensionMismatch",
            Error::NotOneDimensional(_) => "NotOneDimensional",
            Error::ScaleBelowResolution(_) => "ScaleBelowResolution",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::NotUniformlyDisconnectedAtScale { .. } => "NotUniformlyDisconnectedAtScale",
            Error::InvalidCount(_) => "InvalidCount",
            Error::EtaTooLarge { .. } => "EtaTooLarge",
            Error::DepthExhausted(_) => "DepthExhausted",
            Error::CapacityExhausted { .. } => "CapacityExhausted",
            Error::TooLarge(_) => "TooLarge",
            Error::Parse(_) => "ParseError",
            Error::UnknownExample(_) => "UnknownExample",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
