//! Intensity measurement by random-phase homodyne detection (the "quantum
//! roulette"), compared with direct photodetection and heterodyne detection.
//!
//! The crate covers photon statistics of common states, the outcome densities
//! of each scheme at quantum efficiency η, unbiased intensity estimators,
//! closed-form noise comparisons, seeded Monte Carlo sampling and the
//! finite-dimensional Naimark constructions.
//!
//! Quadratures follow x̂ = (a + a†)/2, so the vacuum quadrature variance is ¼.

pub mod error;
pub mod estimators;
pub mod exec;
pub mod montecarlo;
pub mod naimark;
pub mod noise;
pub mod numerics;
pub mod pom;
pub mod states;

pub use error::{Error, Result};
pub use exec::Execution;
pub use montecarlo::{ExperimentConfig, SampleSummary};
pub use noise::NoiseReport;
pub use pom::{DetectorConfig, Efficiency, Scheme};
pub use states::{PhotonStatistics, StateSpec};
