//! Detection-based warning baseline: HoG features, a linear window
//! classifier, sliding-window detection over an image pyramid and a
//! region-of-interest rule turning detections into a warning score.

mod classifier;
mod descriptor;
mod detect;
pub mod pipeline;

pub use classifier::{
    accuracy, train_linear_classifier, ClassifierTraining, LinearClassifier, BIAS_NAME, WEIGHT_NAME,
};
pub use descriptor::{gradient, hog_descriptor, orientation, GrayImage, HogMap, HogParams};
pub use detect::{
    detect, detections_csv, nms, pyramid, score_windows, warning_decision, DetectParams, Detection,
    PyramidLevel, RoiRule, DETECTIONS_HEADER,
};
