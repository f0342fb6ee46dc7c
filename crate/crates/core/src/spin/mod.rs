//! Battery-state representations, rotations, energetics and entropy measures.

mod energetics;
mod entropy;
mod state;

pub use energetics::{
    antiergotropy, capacity_exact, coherent_capacity, ergotropy, incoherent_capacity,
    internal_energy, CapacityReport,
};
pub use entropy::{
    binary_entropy, linear_entropy, relation_report, tsallis_entropy, von_neumann_entropy,
    RelationReport, TsallisSlack,
};
pub use state::{
    density_from_bloch, rotate, BlochState, EnsembleConfig, Rotation, TwoLevelDensity,
};

/// Numerical slack on the Bloch-length bound `S ≤ 1`.
pub const BLOCH_SLACK: f64 = 1e-12;
