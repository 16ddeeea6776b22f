//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by world construction, the choice models, the detector,
/// the calibration loop, and report rendering.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field violated an invariant. `path` is the JSON path
    /// of the offending field, e.g. `venues.mayorship_prob`.
    #[error("invalid config at {path}: {message}")]
    InvalidConfig { path: String, message: String },

    /// Config requested a world with no venues at all.
    #[error("empty world: lambda and phi are both zero")]
    EmptyWorld,

    /// A choice operation received an empty candidate list.
    #[error("empty candidate list")]
    EmptyCandidates,

    /// Not enough real venues to fill a presentation list.
    #[error("insufficient real venues: need {needed}, world has {available}")]
    InsufficientRealVenues { needed: usize, available: usize },

    /// A presentation contained no real venue for an honest pick.
    #[error("no real venues presented")]
    NoRealVenues,

    /// The cheater choice model was asked to pick for an honest user.
    #[error("honest users choose via honest_pick, not the cheater model")]
    HonestModel,

    /// More fake check-ins than a deal's redemption cycle can absorb.
    #[error("fake check-ins {fakes} >= required check-ins {required}")]
    FakesExceedRequired { fakes: u32, required: u32 },

    /// Behavioral weights violated their invariants.
    #[error("invalid behavior weights: {0}")]
    InvalidWeights(String),

    /// Suspicion counts out of order (distinct honeypots exceed total hits).
    #[error("invalid suspicion counts: r={r} > q={q}")]
    SuspicionCounts { q: u64, r: u64 },

    /// Challenge issued at a venue without a deal or challenge spec.
    #[error("venue {0} has no challenge to issue")]
    MissingChallenge(u64),

    /// Honeypot design with an all-zero model estimate (and the config says
    /// to treat that as an error rather than randomize).
    #[error("honeypot design is degenerate: model estimate is all zero")]
    DegenerateDesign,

    /// Calibration dataset cannot distinguish any weight vector.
    #[error("calibration is non-identifiable: likelihood is flat over the grid")]
    NonIdentifiable,

    /// Calibration requested but no user has been flagged.
    #[error("no flagged users")]
    NoFlaggedUsers,

    /// An operation over an event log received an empty log.
    #[error("empty event log")]
    EmptyLog,

    /// A threshold sweep received an empty grid.
    #[error("empty threshold grid")]
    EmptyGrid,

    /// Containment ratio against a baseline with zero fake check-ins.
    #[error("containment baseline has zero fake check-ins")]
    EmptyBaseline,

    /// Unknown output format name.
    #[error("unknown format: {0}")]
    UnknownFormat(String),

    /// Requested grid is too large to enumerate.
    #[error("weight grid too large: {points} points (limit {limit})")]
    GridTooLarge { points: u128, limit: u128 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
