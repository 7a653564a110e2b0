//! Tactile grasp-state perception for a four-finger soft gripper.
//!
//! Each finger carries six 4×4 piezoresistive arrays, so one sensor frame is
//! a 24×16 pressure image. This crate provides:
//!
//! * frame, recording and calibration types plus the TGD v1 dataset format
//!   ([`frame`], [`recording`], [`dataset`]);
//! * a streaming moving-variance pipeline ([`pipeline`]);
//! * the threshold classifier that maps its features to a [`GraspState`]
//!   ([`estimator`]);
//! * a seeded simulator of the four grasp scenarios built on an Ogden model
//!   of the finger skin ([`simulator`], [`material`]);
//! * the gripper reaction state machine ([`controller`]);
//! * Table-style evaluation against labels or external predictions
//!   ([`evaluation`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI uses.

pub mod controller;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod frame;
pub mod grasp;
pub mod layout;
pub mod material;
pub mod pipeline;
pub mod recording;
pub mod scalar;
pub mod simulator;

pub use controller::{Action, ControllerConfig, ControllerState, Event, Mode};
pub use error::{Error, Result};
pub use evaluation::{EvaluationReport, Prediction};
pub use grasp::{GraspClass, GraspState};
pub use layout::{Finger, FingerLayout};
pub use recording::{Phase, PhaseMarks};
pub use scalar::Scalar;

pub type TaxelFrame = frame::TaxelFrame<f64>;
pub type TaxelFrame32 = frame::TaxelFrame<f32>;
pub type GraspRecording = recording::GraspRecording<f64>;
pub type GraspRecording32 = recording::GraspRecording<f32>;
pub type CalibrationProfile = frame::CalibrationProfile<f64>;
pub type PipelineConfig = pipeline::PipelineConfig<f64>;
pub type PipelineFeatures = pipeline::PipelineFeatures<f64>;
pub type TactilePipeline = pipeline::TactilePipeline<f64>;
pub type EstimatorConfig = estimator::EstimatorConfig<f64>;
pub type OgdenParams = material::OgdenParams<f64>;
