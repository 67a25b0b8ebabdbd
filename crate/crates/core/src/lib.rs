//! Bias analysis for binary exposure/outcome count tables.
//!
//! Nonidentified bias parameters (misclassification, unmeasured
//! confounding, selection) are given priors that act as penalties on the
//! likelihood. The crate fits penalized loglinear models, draws from the
//! resulting posterior of the target odds ratio, and bounds the target over
//! a box of bias parameters.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod fit;
pub mod math;
pub mod mc;
pub mod model;
mod newton;
pub mod priors;
pub mod tables;
pub mod workflows;

pub use fit::{FitError, FitOptions, FitProblem, FitResult, Functional, SamplingFrame};
pub use mc::{AnalysisKind, DrawSet, DrawSummary, IdentifiedMode, McError, SamplerConfig};
pub use model::{Coef, CoefVector};
pub use priors::{Design, PriorKind, PriorPanel, PriorSpec};
pub use tables::{Axis, StratifiedCountTable, TwoByTwo};
pub use workflows::{AnalysisReport, ErrorCategory, RunOptions, WorkflowError};
