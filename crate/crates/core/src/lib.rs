//! Analysis toolkit for social learning in crowd predictions.
//!
//! The pipeline estimates how far each predictor moved toward the crowd
//! (the social weight), measures how aggregate accuracy changes when the
//! crowd is restricted to predictors within a social-weight band, and
//! checks whether the crowd sample a predictor saw was unimodal using
//! Hartigan's dip test.
//!
//! Modules map one-to-one onto the stages:
//!
//! - [`dataset`]: data model, CSV parsing/serialization and reconstruction
//!   of the crowd snapshot shown at each prediction.
//! - [`social_weight`]: per-record social weight and direction of movement.
//! - [`alpha_sweep`]: threshold subsets, per-round improvement and the
//!   bootstrap distribution of the cross-round mean improvement.
//! - [`dip`]: dip statistic and Monte-Carlo p-values under the uniform null.
//! - [`unimodality`]: per-user improvements split by unimodality of the
//!   shown crowd, proportions test and sorted improvement curves.
//! - [`sim`]: synthetic crowds with known social weights.
//! - [`report`]: end-to-end orchestration and report files.

pub mod alpha_sweep;
pub mod dataset;
pub mod dip;
pub mod report;
pub mod rng;
pub mod sim;
pub mod social_weight;
pub mod unimodality;

pub use alpha_sweep::{AlphaSweepPoint, BootstrapConfig, FilteredSubset, PointFlag, ResampleMode, RoundImprovement};
pub use dataset::{Dataset, PredictionRecord, Round, ShownCrowd};
pub use dip::{DipFlag, DipResult};
pub use report::{Command, Input, Report, ReportError, RunConfig};
pub use sim::{Scenario, ScenarioSpec};
pub use social_weight::{Direction, ErrorMode, Exclusion, SocialWeightResult};
pub use unimodality::{ProportionTestResult, UnimodalityClass, UserSubsetImprovement};
