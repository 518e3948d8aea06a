//! Physics-informed body schema learning for a simulated musculoskeletal arm.
//!
//! The crate covers the whole pipeline: an analytic two-link, four-muscle arm
//! ([`arm`]), exact tension distribution by quadratic programming ([`qp`]),
//! dataset generation and CSV I/O ([`dataset`]), a three-layer tanh network
//! with closed-form first- and second-order derivatives ([`mlp`], [`adam`]),
//! and the training and ablation harness ([`trainer`], [`experiment`]).
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which the finite-difference
//! tolerances assume.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod arm;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mlp;
pub mod qp;
pub mod scalar;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ArmModel = arm::ArmModel<f64>;
pub type JointState = arm::JointState<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type QpSpec = qp::QpSpec<f64>;
pub type QpSolution = qp::QpSolution<f64>;
pub type Sample = dataset::Sample<f64>;
pub type Dataset = dataset::Dataset<f64>;
pub type MlpParams = mlp::MlpParams<f64>;
pub type LossConfig = mlp::LossConfig<f64>;
pub type GradBundle = mlp::GradBundle<f64>;
pub type Batch = mlp::Batch<f64>;
pub type AdamHyper = adam::AdamHyper<f64>;
pub type AdamState = adam::AdamState<f64>;
pub type TrainConfig = trainer::TrainConfig<f64>;
pub type RunMetrics = trainer::RunMetrics<f64>;
pub type TrainOutcome = trainer::TrainOutcome<f64>;
pub type DataSource = trainer::DataSource<f64>;
pub type AblationPlan = experiment::AblationPlan<f64>;
pub type AblationReport = experiment::AblationReport<f64>;

/// Single-precision variants.
pub mod f32 {
    pub type ArmModel = crate::arm::ArmModel<f32>;
    pub type JointState = crate::arm::JointState<f32>;
    pub type QpSpec = crate::qp::QpSpec<f32>;
    pub type Dataset = crate::dataset::Dataset<f32>;
    pub type MlpParams = crate::mlp::MlpParams<f32>;
    pub type LossConfig = crate::mlp::LossConfig<f32>;
    pub type TrainConfig = crate::trainer::TrainConfig<f32>;
}
