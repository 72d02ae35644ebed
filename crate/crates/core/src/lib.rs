//! Android malware-detection toolkit: static and dynamic feature extraction,
//! matrix encodings, feature selection, classical classifiers, evaluation
//! and majority-vote ensembles.
//!
//! Numeric code is generic over [`num::Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.

mod bytes;

pub mod apk;
pub mod encoding;
pub mod ensemble;
pub mod eval;
pub mod featsel;
pub mod fixtures;
pub mod label;
pub mod models;
pub mod num;
pub mod report;
pub mod trace;

pub use label::Label;
pub use num::Scalar;
pub use report::{AppId, FeatureKind, FeatureRecord, FeatureReport, Source};

pub type FeatureMatrix = encoding::FeatureMatrix<f64>;
pub type SelectionScores = featsel::SelectionScores<f64>;
pub type TrainedModel = models::TrainedModel<f64>;
