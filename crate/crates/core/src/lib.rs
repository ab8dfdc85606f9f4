//! Langevin simulation of two evanescently coupled semiconductor nanolasers.
//!
//! The crate integrates the coupled field/carrier rate equations with
//! spontaneous-emission noise, runs trajectory ensembles in parallel with
//! reproducible per-trajectory random streams, and reduces them to the
//! limit-cycle order parameter, zero-delay photon correlations, imbalance
//! histograms and equilibrium fits.

pub mod cli;
pub mod ensemble;
pub mod experiments;
pub mod model;
pub mod params_file;
pub mod sde;
pub mod stats;

pub use model::{CavityState, ModalFrame, PhysicalParams, PumpSchedule};
pub use sde::{IntegratorConfig, Scheme, TrajectoryRecord};
