//! Periodic equilibria, Floquet normal modes and amplitude-modulated
//! two-ion gate design for ion crystals in RF traps with micromotion.
//!
//! The pipeline is
//! [`equilibrium::solve_equilibrium`] → [`modes::solve_modes`] →
//! [`gate::GateContext::build`] → [`gate::optimize_pulse`] or
//! [`gate::design_robust`]. Everything runs in the dimensionless units of
//! [`units::UnitSystem`].

pub mod artifact;
pub mod config;
pub mod coulomb;
pub mod equilibrium;
pub mod gate;
pub mod md;
pub mod error;
pub mod modes;
pub mod oscint;
pub mod snapshot;
pub mod units;

pub use config::{Config, LaserConfig, ThermalSpectrum, TruncationSettings};
pub use error::{Error, ErrorClass, Result};
pub use units::{build_units, Dimension, IonSpecies, PhysicalConstants, TrapDrive, UnitSystem, CODATA};
