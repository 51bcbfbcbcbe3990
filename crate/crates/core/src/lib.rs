//! Detection evaluation toolkit.
//!
//! * [`boxmath`]: axis-aligned box algebra, IoU, normalized encodings, resize remapping.
//! * [`annotate`]: darknet, COCO, native manifest and detection exchange formats.
//! * [`metrics`]: matching, PR curves, AP/mAP, operating points, stratified reports.
//! * [`collectplan`]: half-dome camera sampling and projected ground truth for synthetic scenes.
//! * [`recipe`]: the training hyperparameter bundle handed to an external trainer.
//! * [`report`]: markdown, CSV and SVG renderings of evaluation reports.

pub mod annotate;
pub mod boxmath;
pub mod collectplan;
mod fixed;
pub mod metrics;
pub mod recipe;
pub mod report;
