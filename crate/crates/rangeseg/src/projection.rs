//! Spherical projection of point clouds onto range images.
//!
//! A cloud is binned by elevation theta = atan(z / sqrt(x^2 + y^2)) and
//! azimuth phi = atan2(y, x) into an H x W grid; row 0 holds the largest
//! elevations. Both field-of-view intervals are half-open on the upper
//! side. Each occupied cell remembers which cloud index filled it so later
//! stages can walk back from raster cells to 3D points.

use std::path::Path;

use thiserror::Error;

use crate::pointcloud::{Point, PointCloud};
use crate::raster::LabelRaster;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("point ({x}, {y}, z) lies on the sensor axis; elevation is undefined")]
    DegenerateOrigin { x: f32, y: f32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad range image: {0}")]
    BadImage(String),
}

/// Which channel planes an encoded image carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    /// intensity, normalized range, occupancy
    IntensityRangeOccupancy,
    /// normalized range, occupancy
    RangeOccupancy,
}

impl ChannelMode {
    pub fn k(&self) -> usize {
        match self {
            ChannelMode::IntensityRangeOccupancy => 3,
            ChannelMode::RangeOccupancy => 2,
        }
    }
}

/// Image geometry and field of view. Angles are radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub h: usize,
    pub w: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    /// Ranges are clipped here before normalization.
    pub r_max: f32,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig::from_degrees(64, 512, -24.8, 2.0, -45.0, 45.0, 80.0)
    }
}

impl ProjectionConfig {
    pub fn from_degrees(
        h: usize,
        w: usize,
        theta_min_deg: f64,
        theta_max_deg: f64,
        phi_min_deg: f64,
        phi_max_deg: f64,
        r_max: f32,
    ) -> Self {
        ProjectionConfig {
            h,
            w,
            theta_min: theta_min_deg.to_radians(),
            theta_max: theta_max_deg.to_radians(),
            phi_min: phi_min_deg.to_radians(),
            phi_max: phi_max_deg.to_radians(),
            r_max,
        }
    }

    /// Same FOV at a different image size.
    pub fn with_size(&self, h: usize, w: usize) -> Self {
        ProjectionConfig { h, w, ..*self }
    }

    pub fn delta_theta(&self) -> f64 {
        (self.theta_max - self.theta_min) / self.h as f64
    }

    pub fn delta_phi(&self) -> f64 {
        (self.phi_max - self.phi_min) / self.w as f64
    }

    /// Elevation at the center of an image row.
    pub fn row_theta(&self, row: usize) -> f64 {
        self.theta_min + (self.h - 1 - row) as f64 * self.delta_theta() + 0.5 * self.delta_theta()
    }

    /// Azimuth at the center of an image column.
    pub fn col_phi(&self, col: usize) -> f64 {
        self.phi_min + (col as f64 + 0.5) * self.delta_phi()
    }
}

/// Where a point lands on the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellHit {
    pub row: usize,
    pub col: usize,
    pub range: f32,
}

/// Projects one point. `Ok(None)` means the point falls outside the FOV.
pub fn project_point(p: &Point, cfg: &ProjectionConfig) -> Result<Option<CellHit>, ProjectionError> {
    if p.x == 0.0 && p.y == 0.0 {
        return Err(ProjectionError::DegenerateOrigin { x: p.x, y: p.y });
    }
    let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
    let horiz = (x * x + y * y).sqrt();
    let theta = (z / horiz).atan();
    let phi = y.atan2(x);
    if theta < cfg.theta_min || theta >= cfg.theta_max || phi < cfg.phi_min || phi >= cfg.phi_max {
        return Ok(None);
    }
    let col = (((phi - cfg.phi_min) / cfg.delta_phi()).floor() as usize).min(cfg.w - 1);
    let bin = (((theta - cfg.theta_min) / cfg.delta_theta()).floor() as usize).min(cfg.h - 1);
    let row = cfg.h - 1 - bin;
    let range = (x * x + y * y + z * z).sqrt() as f32;
    Ok(Some(CellHit { row, col, range }))
}

/// A projected frame: channel planes plus per-cell point provenance.
///
/// Planes are stored channel-major, each row-major. The last plane is always
/// occupancy and the one before it normalized range; a 3-channel image puts
/// intensity first.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub planes: Vec<f32>,
    /// Cloud index that filled each cell, -1 when empty.
    pub cell_point: Vec<i64>,
}

impl RangeImage {
    pub fn zeros(h: usize, w: usize, k: usize) -> Self {
        RangeImage { h, w, k, planes: vec![0.0; k * h * w], cell_point: vec![-1; h * w] }
    }

    pub fn plane(&self, k: usize) -> &[f32] {
        &self.planes[k * self.h * self.w..(k + 1) * self.h * self.w]
    }

    pub fn occupancy(&self) -> &[f32] {
        self.plane(self.k - 1)
    }

    pub fn range_norm(&self) -> &[f32] {
        self.plane(self.k - 2)
    }

    pub fn intensity(&self) -> Option<&[f32]> {
        (self.k == 3).then(|| self.plane(0))
    }

    pub fn occupied(&self, row: usize, col: usize) -> bool {
        self.occupancy()[row * self.w + col] > 0.0
    }

    /// Mirrors all planes and the provenance plane left-to-right.
    pub fn hflip(&self) -> Self {
        let mut out = self.clone();
        for row in out.planes.chunks_exact_mut(self.w) {
            row.reverse();
        }
        for row in out.cell_point.chunks_exact_mut(self.w) {
            row.reverse();
        }
        out
    }
}

/// Projects a cloud into a range image, keeping the nearest return per cell.
///
/// With per-point `labels`, also rasterizes the label of each kept point.
/// Points outside the FOV or on the sensor axis are skipped; an empty cloud
/// yields an all-zero image.
pub fn encode_frame_with(
    cloud: &PointCloud,
    labels: Option<&[u8]>,
    cfg: &ProjectionConfig,
    mode: ChannelMode,
) -> (RangeImage, Option<LabelRaster>) {
    if let Some(l) = labels {
        assert_eq!(l.len(), cloud.len(), "one label per point");
    }
    let (h, w) = (cfg.h, cfg.w);
    let mut img = RangeImage::zeros(h, w, mode.k());
    let mut raster = labels.map(|_| LabelRaster::zeros(h, w));
    let mut best = vec![f32::INFINITY; h * w];
    let plane = h * w;
    let (int_off, range_off, occ_off) = match mode {
        ChannelMode::IntensityRangeOccupancy => (Some(0), plane, 2 * plane),
        ChannelMode::RangeOccupancy => (None, 0, plane),
    };
    for (i, p) in cloud.points.iter().enumerate() {
        let hit = match project_point(p, cfg) {
            Ok(Some(hit)) => hit,
            Ok(None) | Err(_) => continue,
        };
        let cell = hit.row * w + hit.col;
        if hit.range < best[cell] {
            best[cell] = hit.range;
            if let Some(off) = int_off {
                img.planes[off + cell] = p.intensity;
            }
            img.planes[range_off + cell] = hit.range.min(cfg.r_max) / cfg.r_max;
            img.planes[occ_off + cell] = 1.0;
            img.cell_point[cell] = i as i64;
            if let Some(r) = raster.as_mut() {
                r.classes[cell] = labels.unwrap()[i];
            }
        }
    }
    (img, raster)
}

/// Standard 3-channel encoding (intensity, normalized range, occupancy).
pub fn encode_frame(
    cloud: &PointCloud,
    labels: Option<&[u8]>,
    cfg: &ProjectionConfig,
) -> (RangeImage, Option<LabelRaster>) {
    encode_frame_with(cloud, labels, cfg, ChannelMode::IntensityRangeOccupancy)
}

const IMAGE_MAGIC: &[u8; 4] = b"RIMG";

pub fn range_image_bytes(img: &RangeImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + img.planes.len() * 4 + img.cell_point.len() * 8);
    out.extend_from_slice(IMAGE_MAGIC);
    out.extend_from_slice(&(img.h as u32).to_le_bytes());
    out.extend_from_slice(&(img.w as u32).to_le_bytes());
    out.extend_from_slice(&(img.k as u32).to_le_bytes());
    for v in &img.planes {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &img.cell_point {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_range_image(bytes: &[u8]) -> Result<RangeImage, ProjectionError> {
    if bytes.len() < 16 || &bytes[..4] != IMAGE_MAGIC {
        return Err(ProjectionError::BadImage("missing RIMG header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (h, w, k) = (word(4), word(8), word(12));
    let cells = h * w;
    let expect = 16 + k * cells * 4 + cells * 8;
    if bytes.len() != expect {
        return Err(ProjectionError::BadImage(format!(
            "payload is {} bytes, {}x{}x{} needs {}",
            bytes.len(),
            h,
            w,
            k,
            expect
        )));
    }
    let mut planes = Vec::with_capacity(k * cells);
    let mut off = 16;
    for _ in 0..k * cells {
        planes.push(f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()));
        off += 4;
    }
    let mut cell_point = Vec::with_capacity(cells);
    for _ in 0..cells {
        cell_point.push(i64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
        off += 8;
    }
    Ok(RangeImage { h, w, k, planes, cell_point })
}

pub fn load_range_image(path: &Path) -> Result<RangeImage, ProjectionError> {
    parse_range_image(&std::fs::read(path)?)
}

pub fn save_range_image(img: &RangeImage, path: &Path) -> Result<(), ProjectionError> {
    std::fs::write(path, range_image_bytes(img))?;
    Ok(())
}
