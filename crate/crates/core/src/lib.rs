//! Ground-state preparation and time-of-flight correlation analysis for bosons
//! in a bichromatic optical lattice.
//!
//! The crate is split along the physics pipeline:
//!
//! - [`model`]: lattice parameters, Fock and coherent-like states, overlaps.
//! - [`annealer`]: fixed-N energy minimisation over Fock configurations.
//! - [`expansion`]: ballistically expanded Wannier functions and density
//!   profiles under the trace and coherent-state POVM prescriptions.
//! - [`correlations`]: integrated density-density correlation functions and
//!   the brute-force / Monte Carlo oracles that check them.
//! - [`experiment`]: peak detection, parameter sweeps, configuration files,
//!   CSV output and the self-verification suite behind the CLI.

pub mod annealer;
pub mod correlations;
pub mod error;
pub mod expansion;
pub mod experiment;
pub mod model;
pub mod numeric;

pub use error::{Error, Result};
