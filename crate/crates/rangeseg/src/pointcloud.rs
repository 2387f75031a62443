//! Point-cloud input/output and box-label handling.
//!
//! Clouds use the velodyne binary layout: consecutive little-endian f32
//! quadruples `(x, y, z, intensity)`, sensor frame, x forward, y left,
//! z up. Box labels are one JSON object per line.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{CLASS_CAR, CLASS_CYCLIST};

/// Bytes per point record in the binary cloud format.
pub const POINT_RECORD_BYTES: usize = 16;

#[derive(Debug, Error)]
pub enum PointCloudError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("truncated file: {len} bytes is not a multiple of {POINT_RECORD_BYTES}")]
    TruncatedFile { len: usize },
    #[error("non-finite value in point record {index}")]
    NonFiniteValue { index: usize },
    #[error("intensity {value} outside [0, 1] in point record {index}")]
    IntensityOutOfRange { index: usize, value: f32 },
    #[error("bad box label on line {line}: {msg}")]
    BadBoxLabel { line: usize, msg: String },
}

/// One LiDAR return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Surface reflectance, already normalized to [0, 1].
    pub intensity: f32,
}

impl Point {
    pub fn new(x: f32, y: f32, z: f32, intensity: f32) -> Self {
        Point { x, y, z, intensity }
    }

    /// Euclidean distance from the sensor origin.
    pub fn range(&self) -> f32 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// A frame of points, in file order.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub frame_id: Option<u32>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud { points, frame_id: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// An oriented 3D bounding box in the sensor frame.
///
/// `(cx, cy, cz)` is the box center, `(l, w, h)` the full extents along the
/// box's local x/y/z axes, and `yaw` the rotation of the local x axis around
/// +z, counter-clockwise from the sensor x axis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BoxLabel {
    pub class: u8,
    pub cx: f32,
    pub cy: f32,
    pub cz: f32,
    pub l: f32,
    pub w: f32,
    pub h: f32,
    pub yaw: f32,
}

impl BoxLabel {
    /// Whether `p` lies inside the box. Faces count as inside.
    pub fn contains(&self, p: &Point) -> bool {
        let dx = p.x - self.cx;
        let dy = p.y - self.cy;
        let dz = p.z - self.cz;
        // Rotate the offset by -yaw into the box frame.
        let (s, c) = self.yaw.sin_cos();
        let lx = c * dx + s * dy;
        let ly = -s * dx + c * dy;
        lx.abs() <= self.l * 0.5 && ly.abs() <= self.w * 0.5 && dz.abs() <= self.h * 0.5
    }
}

/// Parses a binary cloud from raw bytes, rejecting malformed records.
pub fn parse_kitti_bin(bytes: &[u8]) -> Result<PointCloud, PointCloudError> {
    if bytes.len() % POINT_RECORD_BYTES != 0 {
        return Err(PointCloudError::TruncatedFile { len: bytes.len() });
    }
    let mut points = Vec::with_capacity(bytes.len() / POINT_RECORD_BYTES);
    for (index, rec) in bytes.chunks_exact(POINT_RECORD_BYTES).enumerate() {
        let f = |off: usize| f32::from_le_bytes([rec[off], rec[off + 1], rec[off + 2], rec[off + 3]]);
        let p = Point::new(f(0), f(4), f(8), f(12));
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite() && p.intensity.is_finite()) {
            return Err(PointCloudError::NonFiniteValue { index });
        }
        if !(0.0..=1.0).contains(&p.intensity) {
            return Err(PointCloudError::IntensityOutOfRange { index, value: p.intensity });
        }
        points.push(p);
    }
    Ok(PointCloud::new(points))
}

/// Serializes a cloud to the binary record layout.
pub fn kitti_bin_bytes(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * POINT_RECORD_BYTES);
    for p in &cloud.points {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.extend_from_slice(&p.z.to_le_bytes());
        out.extend_from_slice(&p.intensity.to_le_bytes());
    }
    out
}

pub fn load_kitti_bin(path: &Path) -> Result<PointCloud, PointCloudError> {
    parse_kitti_bin(&std::fs::read(path)?)
}

pub fn save_kitti_bin(cloud: &PointCloud, path: &Path) -> Result<(), PointCloudError> {
    std::fs::write(path, kitti_bin_bytes(cloud))?;
    Ok(())
}

/// Parses box labels from JSON-lines text. Blank lines are allowed.
pub fn parse_box_labels(text: &str) -> Result<Vec<BoxLabel>, PointCloudError> {
    let mut boxes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let b: BoxLabel = serde_json::from_str(line).map_err(|e| PointCloudError::BadBoxLabel {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if !(CLASS_CAR..=CLASS_CYCLIST).contains(&b.class) {
            return Err(PointCloudError::BadBoxLabel {
                line: i + 1,
                msg: format!("class id {} outside 1..=3", b.class),
            });
        }
        boxes.push(b);
    }
    Ok(boxes)
}

pub fn box_labels_jsonl(boxes: &[BoxLabel]) -> String {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&serde_json::to_string(b).expect("box label serializes"));
        out.push('\n');
    }
    out
}

pub fn load_box_labels(path: &Path) -> Result<Vec<BoxLabel>, PointCloudError> {
    parse_box_labels(&std::fs::read_to_string(path)?)
}

pub fn save_box_labels(boxes: &[BoxLabel], path: &Path) -> Result<(), PointCloudError> {
    std::fs::write(path, box_labels_jsonl(boxes))?;
    Ok(())
}

/// Assigns each point the class of the first box containing it, 0 otherwise.
pub fn label_points(cloud: &PointCloud, boxes: &[BoxLabel]) -> Vec<u8> {
    cloud
        .points
        .iter()
        .map(|p| boxes.iter().find(|b| b.contains(p)).map_or(0, |b| b.class))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn bin_round_trip_is_byte_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let points = (0..100_000)
            .map(|_| {
                Point::new(
                    rng.gen_range(-80.0..80.0),
                    rng.gen_range(-80.0..80.0),
                    rng.gen_range(-3.0..5.0),
                    rng.gen_range(0.0..=1.0),
                )
            })
            .collect();
        let bytes = kitti_bin_bytes(&PointCloud::new(points));
        let reread = parse_kitti_bin(&bytes).unwrap();
        assert_eq!(kitti_bin_bytes(&reread), bytes);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let err = parse_kitti_bin(&[0u8; 17]).unwrap_err();
        assert!(matches!(err, PointCloudError::TruncatedFile { len: 17 }));
    }

    #[test]
    fn non_finite_record_is_rejected() {
        let mut bytes = kitti_bin_bytes(&PointCloud::new(vec![Point::new(1.0, 2.0, 3.0, 0.5)]));
        bytes[4..8].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            parse_kitti_bin(&bytes),
            Err(PointCloudError::NonFiniteValue { index: 0 })
        ));
    }

    #[test]
    fn out_of_range_intensity_is_rejected() {
        let mut cloud = PointCloud::new(vec![Point::new(1.0, 2.0, 3.0, 0.5)]);
        cloud.points[0].intensity = 1.5;
        let bytes = kitti_bin_bytes(&cloud);
        assert!(matches!(
            parse_kitti_bin(&bytes),
            Err(PointCloudError::IntensityOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn rotated_box_containment() {
        // Box rotated a quarter turn: local length axis points along sensor y.
        let b = BoxLabel {
            class: 1,
            cx: 0.0,
            cy: 0.0,
            cz: 0.0,
            l: 4.0,
            w: 2.0,
            h: 2.0,
            yaw: std::f32::consts::FRAC_PI_2,
        };
        // (0.9, 1.9, 0.0) maps to local (1.9, -0.9): inside.
        assert!(b.contains(&Point::new(0.9, 1.9, 0.0, 0.0)));
        // Past the half-width on the local y axis: outside.
        assert!(!b.contains(&Point::new(1.1, 0.0, 0.0, 0.0)));
        // Bounds are closed: an exact corner of an unrotated box is inside.
        let axis_aligned = BoxLabel { yaw: 0.0, ..b };
        assert!(axis_aligned.contains(&Point::new(2.0, 1.0, 1.0, 0.0)));
        assert!(!axis_aligned.contains(&Point::new(2.0 + 1e-3, 1.0, 1.0, 0.0)));
    }

    #[test]
    fn first_box_wins_on_overlap() {
        let mk = |class, cx| BoxLabel { class, cx, cy: 0.0, cz: 0.0, l: 4.0, w: 4.0, h: 4.0, yaw: 0.0 };
        let cloud = PointCloud::new(vec![Point::new(0.0, 0.0, 0.0, 0.0), Point::new(10.0, 0.0, 0.0, 0.0)]);
        let labels = label_points(&cloud, &[mk(2, 1.0), mk(1, -1.0)]);
        assert_eq!(labels, vec![2, 0]);
    }

    #[test]
    fn box_labels_round_trip() {
        let boxes = vec![
            BoxLabel { class: 1, cx: 5.0, cy: -2.0, cz: -0.8, l: 4.2, w: 1.8, h: 1.5, yaw: 0.3 },
            BoxLabel { class: 3, cx: 12.0, cy: 4.0, cz: -0.9, l: 1.8, w: 0.6, h: 1.7, yaw: -1.2 },
        ];
        let text = box_labels_jsonl(&boxes);
        assert_eq!(parse_box_labels(&text).unwrap(), boxes);
    }

    #[test]
    fn unknown_class_id_is_rejected() {
        let text = r#"{"class":7,"cx":0,"cy":0,"cz":0,"l":1,"w":1,"h":1,"yaw":0}"#;
        assert!(matches!(parse_box_labels(text), Err(PointCloudError::BadBoxLabel { line: 1, .. })));
    }
}
