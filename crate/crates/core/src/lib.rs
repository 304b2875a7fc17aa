//! Sparse regression for learning closed-form models from data: exhaustive
//! subset search ranked by R², exact Bayesian model evidence, stepwise
//! selection and the usual baselines, plus the dynamical-system plumbing to
//! benchmark them.

pub mod baselines;
pub mod bsr;
pub mod cs;
pub mod dictionary;
pub mod dynsys;
pub mod error;
pub mod evidence;
pub mod experiments;
pub mod model;
pub mod projection;
pub mod regression;
pub mod rng;
pub mod search;

pub use bsr::{bsr_fit, bsr_fit_traced, BsrOutput};
pub use cs::{cs_search, CsOutput, CsParams};
pub use dictionary::{build_dictionary, evaluate_dictionary, Dictionary, TermExponents};
pub use error::{Error, Result};
pub use evidence::{empirical_prior, evidence_of_mask, log_evidence, EvidenceResult, PriorHyperparams};
pub use model::{FitResult, ModelMask};
pub use regression::{DesignMatrix, ResponseVector};
