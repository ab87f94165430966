//! Mode-by-mode analysis of the indefinite Laplacian `-div(h_mu grad)` on
//! concentric circles.
//!
//! The coefficient is `+1` on the annulus `r_i < r < r_e` and `-mu` on the
//! inner disk and on the outer annulus `r_e < r < R`. Everything separates
//! in angular Fourier modes, so each operator reduces to a 2x2 block on the
//! pair of interface circles and each field to closed-form radial pieces.

pub mod critical;
pub mod dtn;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod poisson;
mod quad;
pub mod regularized;
pub mod scaled;
pub mod schedule;
pub mod source;
pub mod spectral;

pub use critical::{
    dirichlet_annulus_solve_mode, neumann_trace_re, range_check, solve_critical, solve_critical_mode,
    CriticalMode, CriticalSolution, MembershipReport, PartialSum, RangePolicy, Verdict,
};
pub use dtn::{
    critical_inverse_closed_form, difference_mode, exterior_dtn_mode, interior_dtn_mode,
    invert_difference_mode, psi_mode, symmetrized_theta, theta_mode, LambdaBlock, MatrixKind,
    ModeBlocks, ModeMatrix, ModeTable,
};
pub use error::{Error, Result};
pub use geometry::{critical_radius, AnnularGeometry, Contrast, ModeIndex, DEFAULT_M_MAX};
pub use poisson::{
    evaluate_radial, exterior_poisson_mode, interior_poisson_mode, reference_radius, ModeSolution,
    RadialPiece, SourceTerm, TraceModeVector,
};
pub use regularized::{
    default_delta_grid, delta_sweep, h1_norms, piece_energy, solve_regularized_mode, DeltaSweepReport,
    PieceEnergy, Region, RegionFit, RegionNorms, RegularizedModeSystem, SweepEntry, SweepFailure,
};
pub use scaled::{scaled_ratio_pow, ScaledComplex, ScaledValue};
pub use schedule::Schedule;
pub use oracle::{fd_residual, fd_transmission_solve, self_convergence_orders, RadialGrid, SampledField};
pub use spectral::{
    classify_contrast, theta_eigenvalues, theta_eigenvalues_scaled, ContrastClassification, Regime,
};
pub use source::{AngularSpectrum, SourceSpec};
