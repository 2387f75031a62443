//! Range-image semantic segmentation of rotating-LiDAR point clouds, with
//! instance extraction and synthetic-data tooling.
//!
//! The pipeline runs in five stages:
//!
//! 1. **Projection** ([`projection`]): spherical projection of a point cloud
//!    onto an H x W range image (intensity / normalized range / occupancy
//!    channels) with per-cell point provenance.
//! 2. **Network** ([`net`]): a range-aware encoder/decoder that spends a
//!    heavy decoder on the top rows of the image (where distant objects
//!    shrink to a handful of cells) and a light decoder everywhere, fusing
//!    the two into full-resolution class logits. Built on the small
//!    differentiable engine in [`nn`]; no horizontal striding anywhere.
//! 3. **Training** ([`train`], [`loss`], [`schedule`], [`synth`]):
//!    cross-entropy plus Lovasz-softmax losses on all three heads, a
//!    one-cycle learning-rate schedule, and a procedural scene generator
//!    that ray-casts labeled clouds so the whole stack can be exercised
//!    without external data.
//! 4. **Clustering** ([`cluster`]): DBSCAN over the predicted foreground
//!    points under a range-weighted distance, yielding instance ids and a
//!    noise-cleaned semantic raster.
//! 5. **Evaluation** ([`eval`]): confusion matrices, per-class and per-band
//!    IoU, row/range distribution analysis, and stage benchmarks.
//!
//! All file formats (point clouds, rasters, range images, checkpoints) are
//! little-endian and round-trip byte-exactly; see the module docs.

pub mod cluster;
pub mod config;
pub mod eval;
pub mod fog;
pub mod loss;
pub mod net;
pub mod nn;
pub mod pointcloud;
pub mod projection;
pub mod pgm;
pub mod raster;
pub mod schedule;
pub mod synth;
pub mod train;

pub use cluster::{DbscanParams, InstanceLabeling};
pub use net::{NetConfig, RangeAwareNet, Variant};
pub use pointcloud::{BoxLabel, Point, PointCloud};
pub use projection::{ProjectionConfig, RangeImage};
pub use raster::LabelRaster;
