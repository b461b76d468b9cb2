//! Gaze-based perceived-privacy analysis and personalized differential
//! privacy.
//!
//! The pipeline runs end to end on synthetic data: generate or parse
//! rated gaze recordings ([`synth`], [`table`]), detect fixations and
//! saccades and extract per-trial features ([`events`]), train and
//! evaluate perceived-privacy predictors ([`predict`], [`models`],
//! [`cluster`], [`stats`]), map privacy levels to budgets ([`dpmap`]),
//! run personalized DP mechanisms and audits ([`mechanisms`],
//! [`regression`], [`audit`]), and benchmark the whole chain
//! ([`bench`](mod@bench)).

pub mod audit;
pub mod bench;
pub mod cluster;
pub mod dataset;
pub mod dpmap;
pub mod error;
pub mod events;
pub mod geometry;
pub mod mechanisms;
pub mod models;
pub mod predict;
pub mod regression;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod table;

pub use error::{Error, Result};
