//! Kolmogorov–Arnold networks with B-spline branches, sequential-task
//! training, and the activation-support measurements used to study
//! forgetting.

pub mod forgetting;
pub mod matrix;
pub mod montecarlo;
pub mod network;
pub mod spline;
pub mod tasks;
pub mod training;

pub use matrix::Matrix;
