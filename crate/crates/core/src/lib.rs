//! Count-regression inference and a Monte Carlo harness for studying the
//! type-1 error of data-driven model selection among Poisson, negative
//! binomial (NB2), zero-inflated Poisson (ZIP) and zero-inflated negative
//! binomial (ZINB) regressions.
//!
//! The crate is organized bottom-up:
//!
//! - [`dist`]: PMFs, moments and samplers for the four count families.
//! - [`fit`]: maximum-likelihood fitting with a log link for the count mean
//!   and a logit link for the structural-zero probability, plus Wald, LRT and
//!   AIC.
//! - [`diagnostics`]: the Dean–Lawless overdispersion score test and the
//!   Vuong non-nested test for zero-inflation.
//! - [`selection`]: the sequential seven-step test procedure and lowest-AIC
//!   selection.
//! - [`sim`]: scenario grid, deterministic per-replication streams, and
//!   aggregation into selection/rejection rates.
//! - [`report`]: CSV writers, Table-1 style summaries, decision-tree counts
//!   and plot-data panels.

pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod fit;
pub mod io;
pub mod report;
pub mod rng;
pub mod selection;
pub mod sim;
pub mod special;
pub mod stats;

pub use dist::{Dispersion, DistParams, FamilyKind, Moments};
pub use error::{Error, Result};
pub use fit::{fit, CountDataset, FitResult, ModelParams, WaldForm};
pub use diagnostics::{dean_lawless, vuong, VuongOutcome};
pub use selection::{ModelSuite, PolicyKind, SelectionPolicy, SelectionTrace};
pub use sim::{AggregateRates, GridLevels, ScenarioConfig, SimSettings};
pub use stats::{Reference, TestFlag, TestOutcome};
