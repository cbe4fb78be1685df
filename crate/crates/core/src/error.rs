use thiserror::Error;

use crate::allocation::KeyViolation;
use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-integer resample ratio ({source_step} h -> {target_step} h)")]
    ResampleRatio { source_step: f64, target_step: f64 },

    #[error("order is not a permutation of 0..{0}")]
    NotPermutation(usize),

    #[error("fixed-ratio weights must be nonnegative with a positive sum")]
    ZeroWeights,

    #[error("infeasible repartition key ({} violations)", .0.len())]
    InfeasibleKey(Vec<KeyViolation>),

    #[error("invalid tariff schedule: {0}")]
    Tariff(String),

    #[error("period {period} outside time grid of {period_count} periods")]
    PeriodOutOfRange { period: usize, period_count: usize },

    #[error("invalid storage parameters: {0}")]
    Storage(String),

    #[error("non-convex tariff in period {period}: export price {export} exceeds local-sharing saving {saving}")]
    NonConvexTariff { period: usize, export: f64, saving: f64 },

    #[error("unbounded dispatch")]
    UnboundedDispatch,

    #[error("dispatch LP failed: {0}")]
    Lp(#[from] LpError),

    #[error("candidate (pv #{pv}, storage #{storage}) day {day}: {source}")]
    Candidate {
        pv: usize,
        storage: usize,
        day: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid sizing catalog: {0}")]
    Catalog(String),

    #[error("member {member} lacks the attribute required by the {method} proximity method")]
    MissingAttribute { member: String, method: &'static str },

    #[error("invalid feeder graph: {0}")]
    FeederGraph(String),

    #[error("voting shares sum {0} != 1")]
    VotingShares(f64),

    #[error("invalid investment pool: {0}")]
    Pool(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}
