//! Estimation of causal effects for longitudinal modified treatment policies
//! whose rules may depend on the *history* of the natural value of treatment.
//!
//! The crate implements three estimators of the policy mean `E[Y(d)]` on
//! longitudinal panels with discrete exposures:
//!
//! - a plug-in sequential-regression (g-computation) estimator on a pooled,
//!   augmented dataset ([`gcomp::plugin_estimate`]),
//! - a targeted minimum loss-based estimator ([`tmle::tmle_estimate`]), and
//! - a sequentially doubly robust estimator ([`sdr::sdr_estimate`]),
//!
//! together with exact and Monte Carlo oracles for verification
//! ([`oracle`]) and a simulation-study harness ([`sim`]).
//!
//! Rules are deterministic maps over the natural treatment history, the
//! intervened history, and covariates ([`policy::Policy`]). Each rule
//! declares the set of natural-history lags it reads (its *footprint*),
//! which bounds the size of the augmented datasets carried by the
//! sequential recursion.

pub mod eif;
pub mod error;
pub mod gcomp;
pub mod learners;
pub mod oracle;
pub mod panel;
pub mod policy;
pub mod sdr;
pub mod sim;
pub mod tmle;

pub use error::{Error, Result};
pub use panel::{assign_folds, build_augmented, collapse_frame, AugmentedFrame, FoldAssignment, Panel};
pub use policy::Policy;
