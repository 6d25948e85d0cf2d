//! Discrete choice models with directional knowledge.
//!
//! The crate estimates multinomial logit, fully connected DNN and
//! alternative-specific-utility DNN choice models. Monotonicity of choice
//! probabilities in travel time and cost is encouraged during training by
//! unlabeled pseudo sample pairs and a hinge penalty on wrong-signed
//! finite-difference derivatives, added to the negative log-likelihood.
//!
//! Modules, bottom up:
//!
//! * [`diffcore`]: reverse-mode differentiation over dense matrices.
//! * [`dataio`]: Swissmetro ingestion, filters, 60/20/20 split, scaling,
//!   synthetic MNL data.
//! * [`models`]: MNL, DNN and ASU-DNN behind one probability interface.
//! * [`knowledge`]: monotonicity constraints, pseudo pairs, violation loss,
//!   audits.
//! * [`training`]: losses and the minibatch trainer with early stopping.
//! * [`evaluation`]: market shares, probability sweeps, values of time.
//! * [`cli`]: run configs and the `prepare`/`train`/`experiment`/`analyze`/
//!   `audit`/`synth` commands.

pub mod cli;
pub mod dataio;
pub mod diffcore;
pub mod error;
pub mod evaluation;
pub mod knowledge;
pub mod models;
pub mod training;
mod util;

pub use error::{Error, Result};

#[cfg(test)]
mod testutil;
