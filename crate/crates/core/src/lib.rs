//! Simulation library for driven-dissipative dynamics and entanglement
//! generation in subwavelength arrays of multilevel atoms coupled by
//! photon-mediated dipole-dipole interactions.
//!
//! Five mutually cross-validating solver tiers are provided:
//!
//! - full multilevel Lindblad master equation ([`master`]),
//! - effective ground-state-manifold master equation ([`effective`]),
//! - large-detuning anisotropic XY model with single-body dissipation
//!   ([`xymodel`]),
//! - analytic spin-wave theory ([`spinwave`]),
//! - discrete truncated Wigner Monte Carlo ([`dtwa`]) and a second-order
//!   cumulant closure ([`cumulant`]).
//!
//! Units throughout: `Γ = 1`, `ħ = 1`, lengths in units of the transition
//! wavelength `λ` (so `k₀·r = 2π r`). Times are in units of `1/Γ`.

pub mod cumulant;
pub mod drive;
pub mod dtwa;
pub mod effective;
pub mod error;
pub mod geometry;
pub mod green;
pub mod hilbert;
pub mod integrate;
pub mod levels;
pub mod master;
pub mod observables;
pub mod spinwave;
pub mod xymodel;

pub use error::{Error, Result};

pub(crate) use num_complex::Complex64 as C64;
