//! Spectral certification of sharp variance bounds, f-sum rules and
//! rigidity estimates for confining quantum traps.
//!
//! The pipeline is: describe a trap ([`potential`]), solve it on refined
//! grids ([`solver1d`], [`magnetic2d`]), compute transition elements and sum
//! rules ([`observables`]), then evaluate every bound with an explicit
//! tolerance ([`certify`]). [`oracle`] holds independent reference results and
//! [`report`] the config/CSV/JSON surface used by the command-line tool.
//!
//! ```
//! use trapcert::{certify::certify_1d, potential::PotentialSpec, SolverOptions};
//!
//! let cert = certify_1d(&PotentialSpec::harmonic(1.0), &SolverOptions::default()).unwrap();
//! assert!((cert.var_x - 0.5).abs() < 1e-6);
//! assert!(cert.epsilon.abs() < 1e-6);
//! assert!(cert.all_pass());
//! ```

pub mod certify;
pub mod error;
pub mod magnetic2d;
pub mod numerics;
pub mod observables;
pub mod oracle;
pub mod potential;
pub mod report;
pub mod solver1d;

pub use error::{Error, Result};
pub use solver1d::SolverOptions;
