//! Simulation and inference engine for a resonantly driven, damped
//! two-level atom observed by photon counting.
//!
//! The crate covers four layers:
//!
//! * [`dynamics`]: the atom's (possibly unnormalized) Bloch state, the
//!   master-equation generator and an RK4 integrator.
//! * [`supersystem`]: linear quantum trajectories for ideal detectors and
//!   for the atom ⊗ avalanche-photodiode supersystem, with ostensible
//!   probabilities.
//! * [`record`]: stochastic measurement records (ideal detections, thinned
//!   absorptions, avalanche records from the detector automaton).
//! * [`estimator`] and [`wtd`]: Bayesian posteriors over the Rabi
//!   frequency, best conditional states, information gain, and waiting-time
//!   distributions.
//!
//! Everything here is `no_std` + `alloc`; IO and parallel orchestration live
//! in the companion `rabi` crate.
#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod record;
pub mod seed;
pub mod supersystem;
pub mod wtd;

pub use dynamics::{AtomState, SystemParams};
pub use error::{Error, Result};
pub use estimator::{build_grid, BankConfig, DetectorModel, OmegaGrid, PosteriorSnapshot, TrajectoryBank};
pub use record::{EventKind, MeasurementRecord};
pub use supersystem::{DetectorParams, OstensibleRate, StepScheme, SupersystemState};
pub use wtd::WaitingTimeCurve;
