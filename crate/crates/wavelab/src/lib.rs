//! Pseudo-spectral laboratory for the dimensionless gravity-capillary water
//! waves equations over large bathymetry.
//!
//! The crate provides:
//! - the Dirichlet-Neumann operator computed from a sigma-coordinate elliptic
//!   solve on the flattened strip ([`dno`]),
//! - surface tension operators ([`tension`]),
//! - time integration of the surface system with height / Rayleigh-Taylor /
//!   energy monitors ([`evolution`]),
//! - the energy machinery used for long-time diagnostics: twisted energies,
//!   good unknowns and cancellation checks ([`energy`]),
//! - a shallow-water reference solver and the mu -> 0 limit study
//!   ([`swlimit`]),
//! - experiment drivers, configuration and record I/O ([`config`],
//!   [`records`], [`driver`]).

pub mod config;
pub mod dno;
pub mod driver;
pub mod energy;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod params;
pub mod records;
pub mod spectral;
pub mod swlimit;
pub mod tension;

pub use error::{Error, Result};
pub use params::{nondimensionalize, DimensionlessParams, PhysicalScales};
pub use spectral::{FieldR, Grid};
