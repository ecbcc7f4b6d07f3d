use thiserror::Error;

/// Errors produced by the library.
///
/// Most variants describe violated input invariants; `CostIdentityViolated`
/// is the one internal-consistency failure and signals a bug rather than bad
/// input (see [`Error::is_internal`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),

    #[error("multiplicity {value} is not above the floor {floor}")]
    NonPositiveMultiplicity { value: f64, floor: f64 },

    #[error("RK4 step {step} exceeds segment length {segment}")]
    StepTooLarge { step: f64, segment: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("parent links do not form a tree (cycle through branch {0})")]
    CycleDetected(u64),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("leaf branch {0} carries no tip mass")]
    ZeroTipMass(u64),

    #[error("flow conservation violated at tip of branch {id}: multiplicity {tip} vs children + node mass {inflow}")]
    ConservationViolated { id: u64, tip: f64, inflow: f64 },

    #[error("no weight profile for branch {0}")]
    MissingWeightProfile(u64),

    #[error("closed-form quadrature unavailable: {0}")]
    ClosedFormUnavailable(String),

    #[error("t = {t} outside [0, {max}]")]
    OutOfRange { t: f64, max: f64 },

    #[error("unknown group {0}")]
    UnknownGroup(usize),

    #[error("inconsistent prefixes between maximal paths {0} and {1}")]
    InconsistentPrefix(usize, usize),

    #[error("maximal path {0} duplicates or is a prefix of path {1}")]
    NotMaximal(usize, usize),

    #[error("cost identity violated: branch sum {branch_sum} vs particle integral {particle_integral}")]
    CostIdentityViolated {
        branch_sum: f64,
        particle_integral: f64,
    },

    #[error("too many atoms: {0} (at most {max})", max = crate::optimizer::MAX_ATOMS)]
    TooManyAtoms(usize),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("sequence is not converging: {0}")]
    SequenceNotConverging(String),

    #[error("unknown sequence generator {0:?}")]
    UnknownSequence(String),
}

impl Error {
    /// True for failures of internal self-checks, as opposed to invalid input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::CostIdentityViolated { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
