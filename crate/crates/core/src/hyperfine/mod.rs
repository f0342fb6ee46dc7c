//! Dissipative dynamics of the ⁸⁷Rb ground manifold.
//!
//! States live on the 8-dimensional `|F, m_F⟩` space, ordered
//! `|1,−1⟩, |1,0⟩, |1,1⟩, |2,−2⟩, …, |2,2⟩`. The battery is the effective
//! two-level subspace `{|2,2⟩, |2,1⟩}`.

mod density;
mod master;
mod operators;

pub use density::{project_battery_subspace, BatteryProjection, GroundStateDensity};
pub use master::{
    master_rhs, EvolveOptions, Frame, MasterEquation, RateParams, RelaxationTerms, Trajectory,
    TrajectorySample,
};
pub use operators::{
    build_operators, ground_hamiltonian, nuclear_part, HyperfineParams, SpinOperators,
};

use nalgebra::SMatrix;
use num_complex::Complex64;

/// Dimension of the ground manifold, `(2I + 1)(2S + 1)`.
pub const DIM: usize = 8;

pub type Matrix8 = SMatrix<Complex64, DIM, DIM>;

/// Index of `|F, m⟩` in the coupled basis.
pub const fn basis_index(f: u8, m: i8) -> usize {
    if f == 1 {
        (m + 1) as usize
    } else {
        (3 + m + 2) as usize
    }
}

/// Index of the fully charged state `|2,2⟩`.
pub const STRETCHED: usize = basis_index(2, 2);
/// Index of `|2,1⟩`, the lower battery level.
pub const BATTERY_LOWER: usize = basis_index(2, 1);

/// True when `i` and `j` belong to different hyperfine multiplets.
pub(crate) fn crosses_multiplets(i: usize, j: usize) -> bool {
    (i < 3) != (j < 3)
}
