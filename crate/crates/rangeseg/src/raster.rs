//! Per-cell label rasters aligned with a range image.
//!
//! Two on-disk flavors, both little-endian and row-major:
//! `RSEG` (magic, u32 height, u32 width, one u8 class id per cell) and
//! `RSG2` (same header, one u16 instance id per cell, 0 = no instance).

use std::path::Path;

use thiserror::Error;

pub const CLASS_BACKGROUND: u8 = 0;
pub const CLASS_CAR: u8 = 1;
pub const CLASS_PEDESTRIAN: u8 = 2;
pub const CLASS_CYCLIST: u8 = 3;
pub const NUM_CLASSES: usize = 4;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = ["background", "car", "pedestrian", "cyclist"];

const SEG_MAGIC: &[u8; 4] = b"RSEG";
const INSTANCE_MAGIC: &[u8; 4] = b"RSG2";

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: [u8; 4] },
    #[error("size mismatch: header says {h}x{w} but payload holds {cells} cells")]
    SizeMismatch { h: usize, w: usize, cells: usize },
}

/// One class id per range-image cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRaster {
    pub h: usize,
    pub w: usize,
    pub classes: Vec<u8>,
}

impl LabelRaster {
    pub fn zeros(h: usize, w: usize) -> Self {
        LabelRaster { h, w, classes: vec![CLASS_BACKGROUND; h * w] }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.classes[row * self.w + col]
    }

    pub fn set(&mut self, row: usize, col: usize, class: u8) {
        self.classes[row * self.w + col] = class;
    }

    /// Mirrors every row, matching a horizontal flip of the range image.
    pub fn hflip(&self) -> Self {
        let mut out = self.clone();
        for row in out.classes.chunks_exact_mut(self.w) {
            row.reverse();
        }
        out
    }
}

/// One instance id per cell; 0 marks background, noise, and empty cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceRaster {
    pub h: usize,
    pub w: usize,
    pub ids: Vec<u16>,
}

impl InstanceRaster {
    pub fn zeros(h: usize, w: usize) -> Self {
        InstanceRaster { h, w, ids: vec![0; h * w] }
    }
}

fn header(magic: &[u8; 4], h: usize, w: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(12);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out
}

fn parse_header<'a>(
    bytes: &'a [u8],
    magic: &[u8; 4],
) -> Result<(usize, usize, &'a [u8]), RasterError> {
    if bytes.len() < 12 || &bytes[..4] != magic {
        return Err(RasterError::BadMagic { expected: *magic });
    }
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    Ok((h, w, &bytes[12..]))
}

pub fn raster_bytes(raster: &LabelRaster) -> Vec<u8> {
    let mut out = header(SEG_MAGIC, raster.h, raster.w);
    out.extend_from_slice(&raster.classes);
    out
}

pub fn parse_raster(bytes: &[u8]) -> Result<LabelRaster, RasterError> {
    let (h, w, body) = parse_header(bytes, SEG_MAGIC)?;
    if body.len() != h * w {
        return Err(RasterError::SizeMismatch { h, w, cells: body.len() });
    }
    Ok(LabelRaster { h, w, classes: body.to_vec() })
}

pub fn instance_raster_bytes(raster: &InstanceRaster) -> Vec<u8> {
    let mut out = header(INSTANCE_MAGIC, raster.h, raster.w);
    for id in &raster.ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out
}

pub fn parse_instance_raster(bytes: &[u8]) -> Result<InstanceRaster, RasterError> {
    let (h, w, body) = parse_header(bytes, INSTANCE_MAGIC)?;
    if body.len() != h * w * 2 {
        return Err(RasterError::SizeMismatch { h, w, cells: body.len() / 2 });
    }
    let ids = body
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(InstanceRaster { h, w, ids })
}

pub fn load_raster(path: &Path) -> Result<LabelRaster, RasterError> {
    parse_raster(&std::fs::read(path)?)
}

pub fn save_raster(raster: &LabelRaster, path: &Path) -> Result<(), RasterError> {
    std::fs::write(path, raster_bytes(raster))?;
    Ok(())
}

pub fn load_instance_raster(path: &Path) -> Result<InstanceRaster, RasterError> {
    parse_instance_raster(&std::fs::read(path)?)
}

pub fn save_instance_raster(raster: &InstanceRaster, path: &Path) -> Result<(), RasterError> {
    std::fs::write(path, instance_raster_bytes(raster))?;
    Ok(())
}
