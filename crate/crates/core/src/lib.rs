//! Bayesian experimental design for model discrimination, with the expected
//! loss estimated by classification trees and random forests.

pub mod abc;
pub mod classify;
pub mod dataset;
pub mod design;
pub mod error;
pub mod likelihood;
pub mod linalg;
pub mod loss;
pub mod models;
pub mod optimize;
pub mod rng;
pub mod scalar;

pub use dataset::LabeledDataset;
pub use design::{Design, DesignSpace, PriorModelProbabilities};
pub use error::{Error, Result};
pub use rng::RngStream;
pub use scalar::Scalar;

pub type Dataset = LabeledDataset<f64>;
pub type Dataset32 = LabeledDataset<f32>;
pub type Tree64 = classify::tree::Tree<f64>;
pub type Forest64 = classify::forest::Forest<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
