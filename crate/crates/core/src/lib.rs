//! Online multi-object tracking with a switcher-aware association
//! classifier, offline tracklet clustering, and CLEAR MOT / IDF1 evaluation.

pub mod assoc;
pub mod commands;
pub mod entity;
pub mod geometry;
pub mod io;
pub mod long_cues;
pub mod metrics;
pub mod pipeline;
pub mod postproc;
pub mod sac;
pub mod short_cues;
pub mod sim;
pub mod workflow;
