//! Adaptive physical-layer network coding for two-way accumulate-compute-forward
//! (ACF) relaying.
//!
//! Two users A and B each send two PSK symbols to a relay R over two
//! multiple-access channel uses; R broadcasts a single network-coded symbol.
//! The relay's network-coding map is a Latin square of order `M²` whose rows
//! are indexed by A's symbol pair and columns by B's. This crate enumerates the
//! singular fade states of the MA phase, builds maps that remove them (by
//! Cartesian product of two-stage clusterings or by direct constraint
//! completion), quantizes the fade plane, and simulates the end-to-end link.

pub mod constellation;
pub mod direct;
pub mod fadestates;
pub mod latin;
pub mod mapfile;
pub mod mapgen;
pub mod metrics;
pub mod simulator;

pub use constellation::{Labeling, SignalSet, Symbol, SymbolPair, TOLERANCE};
pub use direct::{Constraint, ConstraintKind, ConstraintSet};
pub use fadestates::{FadeClass, FadeState, SingularFadeSet};
pub use latin::{BlockView, ClusterPartition, LatinSquare, PartialSquare, Quadruple};
pub use mapgen::{BaseClustering, LibraryEntry, MapLibrary, MapMethod};
pub use metrics::{DecisionMethod, DecisionOutcome, GridSpec, RegionMap};
pub use simulator::{Scheme, SimConfig, SimPoint, SimResult};

/// Errors raised by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("lambda must be in 2..=8, got {0}")]
    InvalidLambda(u32),
    #[error("unknown labeling {0:?}")]
    UnknownLabeling(String),
    #[error("symbol {symbol} out of range for a {size}-point signal set")]
    SymbolOutOfRange { symbol: usize, size: usize },
    #[error("fade state {re}{im:+}j is not singular")]
    NonSingularFade { re: f64, im: f64 },
    #[error("square of order {order} cannot be split into blocks of size {block}")]
    OrderNotDivisible { order: usize, block: usize },
    #[error("malformed square: {0}")]
    MalformedSquare(String),
    #[error("quadruples {first} and {second} share a cluster but violate the exclusive law")]
    PartitionConflict { first: Quadruple, second: Quadruple },
    #[error("decision metric is undefined for identical symbol pairs")]
    IdenticalPairs,
    #[error("direct clustering is only available for 4-PSK (lambda = 2), got lambda = {0}")]
    DirectUnsupported(u32),
    #[error("constraints force two labels into cell ({row}, {col})")]
    SeedContradiction { row: usize, col: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid map file: {0}")]
    MapFile(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
