//! Simulation and analysis toolkit for entanglement storage in Raman quantum
//! memories: synthetic coincidence data from parametric source, memory and
//! detector models, and the analyses used to characterize them
//! (concurrence, visibility, tomography, fidelity, CHSH, g², pulse fits,
//! Poisson Monte-Carlo error bars).

pub mod error;
pub mod qstate;

pub use error::{Error, Result};
pub mod counts;
pub mod linalg;
pub mod metrics;
pub mod tomography;
pub mod memsim;
pub mod rng;
pub mod timetags;
pub mod mcstats;
pub mod scenarios;
