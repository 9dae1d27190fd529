//! Simulation and testing toolkit for interference in networked experiments.
//!
//! Outcomes are modelled through *exposure mappings* — functions that say
//! which part of the intervention vector a unit's outcome can depend on.
//! The crate provides:
//!
//! - exposure mappings, designs and bounded outcome models
//!   ([`exposure`], [`design`], [`model`]);
//! - refinement checks between nested mappings and the separation
//!   functionals measuring how far a model is from the coarser hypothesis
//!   ([`refinement`], [`separation`]);
//! - the two-point mixture construction showing that nested hypotheses
//!   cannot be told apart without further structure ([`impossibility`]);
//! - the linear-in-means separation estimator and threshold test ([`lim`]);
//! - Monte Carlo and exact risk evaluation for arbitrary test procedures
//!   ([`risk`]).

pub mod cli;
pub mod design;
pub mod error;
pub mod exposure;
pub mod impossibility;
pub mod intervention;
pub mod lim;
pub mod model;
pub mod network;
pub mod refinement;
pub mod risk;
pub mod rng;
pub mod separation;

pub use design::Design;
pub use error::{Error, Result};
pub use exposure::{ExposureKind, ExposureSpec, TabulatedSpec};
pub use intervention::Intervention;
pub use lim::{run_lim_test, LimTestResult, SeparationEstimator, ThresholdVariant};
pub use model::{ExposureOutcomeModel, LimModel, OutcomeModel};
pub use network::Network;
pub use refinement::{check_refinement, RefinementReport};
pub use risk::{Estimate, Evaluation, TestProcedure};
pub use separation::{SeparationFunctional, SeparationValue};
