//! Error taxonomy shared by every stage.

use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Pipeline stage an error originated in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Stage {
    Sample,
    Noise,
    Kernel,
    Fps,
    Charts,
    Pou,
    Volume,
    Density,
    Fallback,
    Reference,
    Wasserstein,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Sample => "sample",
            Stage::Noise => "noise",
            Stage::Kernel => "kernel",
            Stage::Fps => "fps",
            Stage::Charts => "charts",
            Stage::Pou => "pou",
            Stage::Volume => "volume",
            Stage::Density => "density",
            Stage::Fallback => "fallback",
            Stage::Reference => "reference",
            Stage::Wasserstein => "wasserstein",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("rejection sampler exceeded {cap} proposals with {accepted} accepted; density is likely mis-normalized")]
    RejectionCap { cap: usize, accepted: usize },

    #[error("ground-truth annotations are required")]
    MissingTruth,

    #[error("unsupported discretization: {0}")]
    Unsupported(String),

    #[error("singular moment system of size {size}")]
    SingularMomentSystem { size: usize },

    #[error("correction radius search exhausted at step {step} (r0 = {r0}); beta is too small for double precision")]
    RadiusSearchExhausted { step: usize, r0: f64 },

    #[error("certification of {what} failed: value {value:e} exceeds tolerance {tol:e}")]
    Certification { what: String, value: f64, tol: f64 },

    #[error("degenerate neighborhood at center {center}: {found} neighbors within epsilon, need at least {required}")]
    DegenerateNeighborhood { center: usize, found: usize, required: usize },

    #[error("chart coordinate norm {norm} exceeds the regime limit {limit}")]
    OutOfRegime { norm: f64, limit: f64 },

    #[error("point is not covered by the partition of unity (denominator {denominator:e})")]
    Uncovered { denominator: f64 },

    #[error("corrupt chart {patch}: jacobian {jacobian}")]
    CorruptChart { patch: usize, jacobian: f64 },

    #[error("measure has zero total mass")]
    ZeroMass,

    #[error("smoothed volume density vanishes at sample {index} (value {value:e})")]
    VanishingNormalizer { index: usize, value: f64 },

    #[error("mass mismatch: source {source_mass}, target {target_mass}")]
    MassMismatch { source_mass: f64, target_mass: f64 },

    #[error("negative weight {value:e} at support point {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("transport problem has {entries} cost entries, above the cap {cap}; subsample or coarsen the measures")]
    ProblemTooLarge { entries: usize, cap: usize },

    #[error("support points are not collinear (residual {residual:e})")]
    NotCollinear { residual: f64 },

    #[error("assignment requires uniform weights on equal-size supports")]
    NonUniformWeights,

    #[error("network simplex did not converge within {pivots} pivots")]
    SolverStalled { pivots: usize },

    #[error("{stage}: {source}")]
    Stage { stage: Stage, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Tags the error with the stage it came from. Already-tagged errors keep
    /// their innermost stage.
    pub fn at(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// The underlying error with any stage tag removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Stable machine-readable identifier of the error kind.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::RejectionCap { .. } => "rejection_cap",
            Error::MissingTruth => "missing_truth",
            Error::Unsupported(_) => "unsupported",
            Error::SingularMomentSystem { .. } => "singular_moment_system",
            Error::RadiusSearchExhausted { .. } => "radius_search_exhausted",
            Error::Certification { .. } => "certification",
            Error::DegenerateNeighborhood { .. } => "degenerate_neighborhood",
            Error::OutOfRegime { .. } => "out_of_regime",
            Error::Uncovered { .. } => "uncovered",
            Error::CorruptChart { .. } => "corrupt_chart",
            Error::ZeroMass => "zero_mass",
            Error::VanishingNormalizer { .. } => "vanishing_normalizer",
            Error::MassMismatch { .. } => "mass_mismatch",
            Error::NegativeWeight { .. } => "negative_weight",
            Error::ProblemTooLarge { .. } => "problem_too_large",
            Error::NotCollinear { .. } => "not_collinear",
            Error::NonUniformWeights => "non_uniform_weights",
            Error::SolverStalled { .. } => "solver_stalled",
            Error::Stage { .. } => unreachable!(),
        }
    }
}

/// Extension for tagging results with a stage.
pub trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
