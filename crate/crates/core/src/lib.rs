//! Handwriting-based Parkinson's disease screening: tablet ink parsing,
//! kinematic and EMD-derived features, rank-sum filtering, RBF-SVM
//! evaluation and cohort-stratified feature selection.

pub mod cohorts;
pub mod emd;
pub mod error;
pub mod features;
pub mod ink;
pub mod io;
pub mod kinematics;
pub mod measures;
pub mod pipeline;
pub mod ranksum;
pub mod selection;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
