//! Zero-dependency image emission: binary PGM (P5) for grayscale and PPM
//! (P6) for the class palette, plus the standard visualizations (class
//! raster, range channel, bird's-eye occupancy, row/range heatmap).

use crate::eval::RangeHistogram;
use crate::pointcloud::PointCloud;
use crate::projection::RangeImage;
use crate::raster::{InstanceRaster, LabelRaster};

pub fn pgm_bytes(w: usize, h: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), w * h, "pixel count");
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn ppm_bytes(w: usize, h: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), 3 * w * h, "pixel count");
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Background near-black; car blue, pedestrian red, cyclist green.
pub fn class_color(class: u8) -> [u8; 3] {
    match class {
        0 => [30, 30, 30],
        1 => [60, 120, 240],
        2 => [230, 60, 60],
        _ => [70, 200, 90],
    }
}

pub fn raster_ppm(raster: &LabelRaster) -> Vec<u8> {
    let mut rgb = Vec::with_capacity(3 * raster.h * raster.w);
    for &c in &raster.classes {
        rgb.extend_from_slice(&class_color(c));
    }
    ppm_bytes(raster.w, raster.h, &rgb)
}

/// Distinct instances get rotating hues; 0 stays near-black.
pub fn instances_ppm(raster: &InstanceRaster) -> Vec<u8> {
    const WHEEL: [[u8; 3]; 6] = [
        [230, 80, 80],
        [80, 200, 120],
        [90, 120, 230],
        [220, 190, 70],
        [190, 90, 210],
        [80, 200, 200],
    ];
    let mut rgb = Vec::with_capacity(3 * raster.h * raster.w);
    for &id in &raster.ids {
        let color = if id == 0 { [25, 25, 25] } else { WHEEL[(id as usize - 1) % WHEEL.len()] };
        rgb.extend_from_slice(&color);
    }
    ppm_bytes(raster.w, raster.h, &rgb)
}

/// Normalized range as grayscale; empty cells black.
pub fn range_pgm(img: &RangeImage) -> Vec<u8> {
    let pixels: Vec<u8> = img
        .range_norm()
        .iter()
        .zip(img.occupancy())
        .map(|(&r, &occ)| if occ > 0.0 { (r.clamp(0.0, 1.0) * 255.0).round() as u8 } else { 0 })
        .collect();
    pgm_bytes(img.w, img.h, &pixels)
}

/// Top-down occupancy of a cloud over [-extent, extent]^2 meters.
pub fn bev_pgm(cloud: &PointCloud, extent: f32, cells: usize) -> Vec<u8> {
    assert!(extent > 0.0 && cells >= 1, "degenerate grid");
    let mut pixels = vec![0u8; cells * cells];
    let scale = cells as f32 / (2.0 * extent);
    for p in &cloud.points {
        let col = ((p.x + extent) * scale) as usize;
        let row = ((extent - p.y) * scale) as usize;
        if p.x.abs() < extent && p.y.abs() < extent {
            pixels[row.min(cells - 1) * cells + col.min(cells - 1)] = 255;
        }
    }
    pgm_bytes(cells, cells, &pixels)
}

/// Count heatmap scaled so the densest bin is white.
pub fn histogram_pgm(hist: &RangeHistogram) -> Vec<u8> {
    let peak = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let pixels: Vec<u8> =
        hist.counts.iter().map(|&c| ((c as f64 / peak) * 255.0).round() as u8).collect();
    pgm_bytes(hist.bins, hist.h.max(1), &pixels)
}
