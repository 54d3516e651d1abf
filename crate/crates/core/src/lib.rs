//! Coupled-channel one-dimensional Schrödinger solvers.
//!
//! The crate works in natural units with `ħ²/2m = 1`, so every channel obeys
//!
//! ```text
//! -Ψ_α''(x) + Σ_β V_αβ(x) Ψ_β(x) = (E - ε_α) Ψ_α(x)
//! ```
//!
//! Modules, bottom-up:
//!
//! * [`model`]: grids, channel sets, potential matrix fields, wavefunctions, scenarios.
//! * [`reduction`]: projection of a two-variable potential `V(x, ξ)` onto a box basis.
//! * [`propagate`]: matrix Numerov integration.
//! * [`spectra`]: bound states from a two-sided matching determinant.
//! * [`scattering`]: reflection and transmission for asymptotically flat potentials.
//! * [`diagnostics`]: effective kinetic energy and the sign rule for coupling terms.
//! * [`oracle2d`]: brute-force finite-difference solver for the full 2D problem.
//! * [`scenario`]: JSON scenario files, builtin potentials, tabulated CSV potentials.

pub mod diagnostics;
pub mod error;
pub mod model;
pub mod oracle2d;
pub mod propagate;
pub mod reduction;
pub mod scattering;
pub mod scenario;
pub mod spectra;

pub use error::{Error, Result};
pub use model::{
    build_grid, flatten_channel_index, unflatten_channel_index, validate_scenario, BoundaryKind,
    ChannelSet, ChannelWavefunction, Grid, PotentialMatrixField, Scenario, SolverSettings,
};
