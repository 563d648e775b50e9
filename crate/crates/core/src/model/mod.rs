//! The dual-branch warning network.
//!
//! ```text
//!            ┌─ CONV3 ─ CONV4 ─ POOL3 ─ FC1 ─┐
//! image ─ CONV1 ─ POOL1 ─ CONV2 ─ POOL2 ─┤                              ├─ concat ─ FC2 ─ CLS ─ softmax
//!            └─ FC3 ─────────────────────────┘
//!                └─ FC4 (one value per input pixel)
//! ```
//!
//! CONV1/CONV2 (with their pools) are shared by both branches. FC2 consumes
//! the FC1 features followed by the FC3 features; FC4's per-pixel output is
//! only used by the segmentation loss.

mod graph;
mod topology;
mod train;

pub use graph::{ForwardOutput, NetworkGraph};
pub use topology::{
    is_segmentation_only, is_shared, ArchitectureConfig, ConvLayer, FcLayer, PoolLayer, Topology,
};
pub use train::{
    smoothed, train, LogRecord, NoCallbacks, TrainCallbacks, TrainData, TrainOptions, TrainingLog,
};
