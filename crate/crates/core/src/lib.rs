//! Sparse device-activity detection from the sample covariance of a
//! massive-MIMO uplink pilot block.
//!
//! * [`model`]: pilots, activity, fading, power control, received signal.
//! * [`detector`]: covariance-learning matching pursuit (CL-MP).
//! * [`baselines`]: CWO, SOMP and M-SBL reference detectors.
//! * [`metrics`]: misdetection probability and exact recovery rate.
//! * [`harness`]: seeded Monte-Carlo campaigns, CSV output, runtime scaling.
//! * `oracle` (feature `oracle`): dense brute-force evaluators for testing.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod detector;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
#[cfg(feature = "oracle")]
pub mod oracle;

pub use detector::{clmp_detect, DetectionResult, StoppingRule};
pub use error::{Error, Result};
pub use model::{PilotKind, PilotMatrix, SampleCovariance};
