//! Simulator and verification toolkit for federated optimization with
//! server-side stepsizes, random reshuffling of local data and partial
//! client participation.
//!
//! The crate is organised bottom-up:
//!
//! * [`problems`] – finite-sum federated objectives (quadratic, logistic,
//!   bounded nonconvex) and their exact value/gradient oracles.
//! * [`sampling`] – reproducible random streams, permutations, cohorts and the
//!   sampling-without-replacement moment formula with its enumeration oracle.
//! * [`engine`] – the two-stepsize method and its baselines.
//! * [`theory`] – heterogeneity statistics and convergence-bound evaluators.
//! * [`harness`] – experiment specs, seed ensembles, CSV output and `verify`.

pub mod engine;
pub mod error;
pub mod harness;
pub mod problems;
pub mod sampling;
pub mod theory;

pub use engine::{RoundTrace, RunConfig, RunResult, ShuffleMode};
pub use error::{Error, Result};
pub use problems::{ClientDataset, ConvexityClass, FederatedProblem, SampleLoss, Vector};
pub use sampling::{CohortSample, Permutation, RngStream, StreamPurpose};
pub use theory::{BoundCurve, HeterogeneityStats, Theorem};
