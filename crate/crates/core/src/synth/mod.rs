//! Seeded synthetic cameras and benchmark datasets with ground truth.
//!
//! A camera is a zero-mean Gaussian multiplicative pattern `K`; a capture is
//! `clamp(scene * (1 + K) + noise, 0, 255)` over a smooth procedural scene.
//! Every random stream is derived from the master seed and the identifiers
//! of what it generates, so output does not depend on thread scheduling.

mod camera;
mod dataset;

pub use camera::{capture, derive_seed, make_camera, render_scene, SyntheticCamera};
pub use dataset::{
    build_offline_dataset, build_online_dataset, write_dataset, AccountEntry, CameraEntry,
    DatasetManifest, ImageEntry, OfflineParams, OnlineParams, PairStats,
    ProtocolParams, Renderer, SensorParams,
};
pub use crate::metrics::PairLabel;
