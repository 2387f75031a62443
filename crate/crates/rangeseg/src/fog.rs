//! Synthetic fog and its inverse filter. Fog truncates the sensor's reach
//! to half the optical visibility, turns a fraction of beams into near
//! false returns, and damps every intensity; defogging simply discards the
//! near band where false returns concentrate. Includes the intensity-free
//! 2-channel encoding used to train through fog.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::pointcloud::{Point, PointCloud};
use crate::projection::{encode_frame_with, ChannelMode, ProjectionConfig, RangeImage};
use crate::raster::LabelRaster;

/// Range below which fog retains points during defogging is rejected; all
/// false returns land inside it.
pub const DEFOG_MIN_RANGE: f32 = 2.0;
const FALSE_ALARM_RANGE: (f32, f32) = (0.5, 2.0);

#[derive(Debug, Clone, Copy)]
pub struct FogParams {
    /// Optical visibility, meters; the sensor sees to half of it.
    pub visibility: f32,
    /// Fraction of beams that return a near false point instead.
    pub false_alarm_rate: f64,
    /// Multiplier applied to every intensity, result clamped to [0,1].
    pub attenuation: f32,
    pub seed: u64,
}

impl Default for FogParams {
    fn default() -> Self {
        FogParams { visibility: 70.0, false_alarm_rate: 0.05, attenuation: 0.4, seed: 0 }
    }
}

impl FogParams {
    pub fn validate(&self) -> bool {
        self.visibility > 0.0
            && (0.0..=1.0).contains(&self.false_alarm_rate)
            && (0.0..=1.0).contains(&self.attenuation)
    }
}

/// Applies fog to a clear-weather cloud together with per-point labels;
/// false returns are labeled background. Output order follows input order
/// and never exceeds the original beam count.
pub fn fog_simulate_labeled(
    cloud: &PointCloud,
    labels: Option<&[u8]>,
    params: &FogParams,
) -> (PointCloud, Option<Vec<u8>>) {
    assert!(params.validate(), "degenerate fog parameters");
    if let Some(l) = labels {
        assert_eq!(l.len(), cloud.len(), "one label per point");
    }
    let cutoff = params.visibility / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut points = Vec::new();
    let mut out_labels = labels.map(|_| Vec::new());
    for (i, p) in cloud.points.iter().enumerate() {
        let range = (p.x * p.x + p.y * p.y + p.z * p.z).sqrt();
        let fake = rng.gen::<f64>() < params.false_alarm_rate && range > 0.0;
        let (point, label) = if fake {
            // The beam scatters early: a return along the same direction,
            // well inside the defog band.
            let r = rng.gen_range(FALSE_ALARM_RANGE.0..FALSE_ALARM_RANGE.1);
            let s = r / range;
            (Point::new(p.x * s, p.y * s, p.z * s, p.intensity), 0u8)
        } else if range <= cutoff {
            (*p, labels.map_or(0, |l| l[i]))
        } else {
            continue; // beyond the fogged sensor's reach
        };
        let mut point = point;
        point.intensity = (point.intensity * params.attenuation).clamp(0.0, 1.0);
        points.push(point);
        if let Some(out) = out_labels.as_mut() {
            out.push(label);
        }
    }
    (PointCloud::new(points), out_labels)
}

pub fn fog_simulate(cloud: &PointCloud, params: &FogParams) -> PointCloud {
    fog_simulate_labeled(cloud, None, params).0
}

/// Drops every point closer than 2 m; keeps everything else untouched.
/// Idempotent by construction.
pub fn defog(cloud: &PointCloud) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .filter(|p| (p.x * p.x + p.y * p.y + p.z * p.z).sqrt() >= DEFOG_MIN_RANGE)
        .copied()
        .collect();
    PointCloud::new(points)
}

/// Intensity-free projection: normalized range and occupancy only.
pub fn encode_2ch(
    cloud: &PointCloud,
    labels: Option<&[u8]>,
    cfg: &ProjectionConfig,
) -> (RangeImage, Option<LabelRaster>) {
    encode_frame_with(cloud, labels, cfg, ChannelMode::RangeOccupancy)
}
