use thiserror::Error;

/// Errors raised by model construction, generator evaluation and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} species, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("duplicate species name `{0}`")]
    DuplicateSpecies(String),

    #[error("unknown species `{0}`")]
    UnknownSpecies(String),

    #[error("species index {index} out of range for {species} species")]
    InvalidSpeciesIndex { index: usize, species: usize },

    #[error("reaction {index}: {reason}")]
    InvalidReaction { index: usize, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid inflow distribution: {0}")]
    InvalidInflow(String),

    #[error("invalid fragmentation kernel: {0}")]
    InvalidKernel(String),

    #[error("fragmentation table has no entry for content {0:?}")]
    MissingKernelEntry(Vec<u64>),

    #[error("molecule or compartment count overflow")]
    CountOverflow,

    #[error(
        "inflow distribution is truncated (tail mass {tail_mass:e}) and the function is \
         unbounded; an increment bound is required"
    )]
    MissingIncrementBound { tail_mass: f64 },

    #[error("mean inflow mass is not finite")]
    InfiniteInflowMass,

    #[error("model is not the one-species birth-death model: {0}")]
    NotModel4(String),

    #[error("function `{0}` cannot be evaluated on this domain")]
    UnsupportedFunction(&'static str),

    #[error("stop condition has no bound")]
    UnboundedStop,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
