//! Single-atom transport in an optical conveyor belt (OCB).
//!
//! Designs trap-minimum trajectories (STA, eSTA, sine, triangle) for moving a
//! single trapped atom over a fixed distance, and verifies each trajectory by
//! propagating the atomic wavefunction through the full anharmonic 3D lattice
//! potential with a comoving-frame Fourier split-operator solver.
//!
//! Internal unit convention: recoil units with `hbar = 1`, `m = 1/2`, `k = 1`,
//! so the recoil energy `E_R = hbar^2 k^2 / (2m) = 1`. I/O quantities are
//! expressed in the reporting units `E_R` (energies), `l_z` (lengths) and
//! `tau_z` (times).

pub mod error;
pub mod esta;
pub mod harness;
pub mod mathkit;
pub mod potential;
pub mod scales;
pub mod tdse;
pub mod trajectory;

pub use error::{Error, Result};

/// Reduced Planck constant in internal units.
pub const HBAR: f64 = 1.0;
/// Atom mass in internal units.
pub const MASS: f64 = 0.5;
/// Laser wave number in internal units.
pub const WAVE_K: f64 = 1.0;
/// Recoil energy `hbar^2 k^2 / (2m)` in internal units.
pub const RECOIL_ENERGY: f64 = 1.0;
