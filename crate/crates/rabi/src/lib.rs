//! File formats, configuration, parallel ensembles and the `rabi`
//! command-line driver built on [`rabi_core`].

pub mod config;
pub mod ensemble;
pub mod error;
pub mod format;
pub mod run;

pub use config::{DetectorKind, ExperimentConfig, Mode};
pub use error::{ConfigError, FormatError, RunError};
pub use run::run;
