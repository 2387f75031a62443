//! Segmentation metrics over occupied cells: confusion matrices, per-class
//! and foreground-mean IoU, row-band splits, per-row range statistics, and
//! a small wall-clock benchmark harness.

use std::ops::Range;
use std::time::Instant;

use thiserror::Error;

use crate::projection::RangeImage;
use crate::raster::LabelRaster;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("IoU undefined for class {class}: no cells predicted or labeled")]
    UndefinedIoU { class: usize },
    #[error("benchmark needs at least one timed repetition")]
    EmptyBenchmark,
}

/// Class-by-class cell counts, predicted index against ground-truth index.
/// Only occupied cells are ever recorded; padding has no ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub c: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(c: usize) -> Self {
        assert!(c >= 2, "need background plus at least one class");
        ConfusionMatrix { c, counts: vec![0; c * c] }
    }

    pub fn record(&mut self, pred: u8, gt: u8) {
        assert!((pred as usize) < self.c && (gt as usize) < self.c, "class out of range");
        self.counts[pred as usize * self.c + gt as usize] += 1;
    }

    /// Adds every occupied cell of the given rows.
    pub fn accumulate(
        &mut self,
        pred: &LabelRaster,
        gt: &LabelRaster,
        img: &RangeImage,
        rows: Range<usize>,
    ) {
        assert_eq!((pred.h, pred.w), (gt.h, gt.w), "raster sizes differ");
        assert_eq!((pred.h, pred.w), (img.h, img.w), "raster and image sizes differ");
        assert!(rows.end <= pred.h, "row band out of range");
        for row in rows {
            for col in 0..pred.w {
                if img.occupied(row, col) {
                    let cell = row * pred.w + col;
                    self.record(pred.classes[cell], gt.classes[cell]);
                }
            }
        }
    }

    /// Entrywise sum; frame order never matters.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.c, other.c, "matrix sizes differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn count(&self, pred: usize, gt: usize) -> u64 {
        self.counts[pred * self.c + gt]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Intersection over union for one class: TP / (TP + FP + FN).
    pub fn iou(&self, class: usize) -> Result<f64, EvalError> {
        assert!(class < self.c, "class out of range");
        let tp = self.count(class, class);
        let pred: u64 = (0..self.c).map(|gt| self.count(class, gt)).sum();
        let gt: u64 = (0..self.c).map(|p| self.count(p, class)).sum();
        let union = pred + gt - tp;
        if union == 0 {
            return Err(EvalError::UndefinedIoU { class });
        }
        Ok(tp as f64 / union as f64)
    }

    /// Mean IoU over the foreground classes (background excluded); classes
    /// absent from both prediction and truth are left out of the mean.
    /// `None` when every foreground class is absent.
    pub fn foreground_miou(&self) -> Option<f64> {
        let defined: Vec<f64> = (1..self.c).filter_map(|c| self.iou(c).ok()).collect();
        if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    }
}

/// Full-image, top-band, and bottom-band matrices in one pass. The split
/// is exhaustive: top + bottom == full, entrywise.
pub fn banded_confusion(
    pred: &LabelRaster,
    gt: &LabelRaster,
    img: &RangeImage,
    top_rows: usize,
) -> (ConfusionMatrix, ConfusionMatrix, ConfusionMatrix) {
    assert!(top_rows <= pred.h, "band larger than image");
    let c = crate::raster::NUM_CLASSES;
    let mut top = ConfusionMatrix::new(c);
    let mut bottom = ConfusionMatrix::new(c);
    top.accumulate(pred, gt, img, 0..top_rows);
    bottom.accumulate(pred, gt, img, top_rows..pred.h);
    let mut full = top.clone();
    full.merge(&bottom);
    (full, top, bottom)
}

fn iou_cell(cm: &ConfusionMatrix, class: usize) -> String {
    match cm.iou(class) {
        Ok(v) => format!("{v:.6}"),
        Err(_) => "undefined".to_string(),
    }
}

fn mean_cell(cm: &ConfusionMatrix) -> String {
    match cm.foreground_miou() {
        Some(v) => format!("{v:.6}"),
        None => "undefined".to_string(),
    }
}

/// Per-class IoU rows followed by full/top-band/bottom-band foreground
/// means; band labels carry the actual row counts.
pub fn metrics_csv(
    full: &ConfusionMatrix,
    top: &ConfusionMatrix,
    bottom: &ConfusionMatrix,
    top_rows: usize,
    h: usize,
) -> String {
    let mut out = String::from("class,iou\n");
    for class in 1..full.c {
        out.push_str(&format!("{class},{}\n", iou_cell(full, class)));
    }
    out.push_str(&format!("mean,{}\n", mean_cell(full)));
    out.push_str(&format!("top{top_rows}_mean,{}\n", mean_cell(top)));
    out.push_str(&format!("lower{}_mean,{}\n", h - top_rows, mean_cell(bottom)));
    out
}

/// Range distribution of one class's returns in a single image row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRangeStats {
    pub row: usize,
    pub count: u64,
    pub min: f32,
    pub q25: f32,
    pub median: f32,
    pub q75: f32,
    pub max: f32,
}

fn quantile(sorted: &[f32], p: f64) -> f32 {
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

/// Per-row range statistics (meters) for cells labeled `class`, over all
/// frames; rows with no such cells are omitted.
pub fn analyze_row_ranges(
    frames: &[(&RangeImage, &LabelRaster)],
    class: u8,
    r_max: f32,
) -> Vec<RowRangeStats> {
    let Some(&(first, _)) = frames.first() else { return Vec::new() };
    let (h, w) = (first.h, first.w);
    let mut per_row: Vec<Vec<f32>> = vec![Vec::new(); h];
    for &(img, raster) in frames {
        assert_eq!((img.h, img.w), (h, w), "frame sizes differ");
        assert_eq!((raster.h, raster.w), (h, w), "raster and image sizes differ");
        for row in 0..h {
            for col in 0..w {
                let cell = row * w + col;
                if img.occupied(row, col) && raster.classes[cell] == class {
                    per_row[row].push(img.range_norm()[cell] * r_max);
                }
            }
        }
    }
    per_row
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(row, mut v)| {
            v.sort_by(f32::total_cmp);
            RowRangeStats {
                row,
                count: v.len() as u64,
                min: v[0],
                q25: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q75: quantile(&v, 0.75),
                max: *v.last().unwrap(),
            }
        })
        .collect()
}

pub fn row_ranges_csv(stats: &[RowRangeStats]) -> String {
    let mut out = String::from("row,count,min,q25,median,q75,max\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
            s.row, s.count, s.min, s.q25, s.median, s.q75, s.max
        ));
    }
    out
}

/// Row-by-range-bin occupancy counts for one class, for heatmap emission.
pub struct RangeHistogram {
    pub h: usize,
    pub bins: usize,
    pub counts: Vec<u64>,
}

pub fn row_range_histogram(
    frames: &[(&RangeImage, &LabelRaster)],
    class: u8,
    bins: usize,
    r_max: f32,
) -> RangeHistogram {
    assert!(bins >= 1, "need at least one bin");
    let h = frames.first().map_or(0, |&(img, _)| img.h);
    let mut counts = vec![0u64; h * bins];
    for &(img, raster) in frames {
        for row in 0..img.h {
            for col in 0..img.w {
                let cell = row * img.w + col;
                if img.occupied(row, col) && raster.classes[cell] == class {
                    let r = img.range_norm()[cell] * r_max;
                    let bin = ((r / r_max * bins as f32) as usize).min(bins - 1);
                    counts[row * bins + bin] += 1;
                }
            }
        }
    }
    RangeHistogram { h, bins, counts }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub label: String,
    pub avg_ms: f64,
    pub std_ms: f64,
    pub reps: usize,
}

/// Times `work` for `reps` repetitions after `warmup` untimed runs.
/// Population standard deviation, so a single repetition reports 0.
pub fn benchmark(
    label: &str,
    reps: usize,
    warmup: usize,
    mut work: impl FnMut(),
) -> Result<BenchResult, EvalError> {
    if reps == 0 {
        return Err(EvalError::EmptyBenchmark);
    }
    for _ in 0..warmup {
        work();
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        work();
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let avg = samples.iter().sum::<f64>() / reps as f64;
    let var = samples.iter().map(|s| (s - avg) * (s - avg)).sum::<f64>() / reps as f64;
    Ok(BenchResult { label: label.to_string(), avg_ms: avg, std_ms: var.sqrt(), reps })
}

pub fn bench_csv(results: &[BenchResult]) -> String {
    let mut out = String::from("stage,avg_ms,std_ms\n");
    for r in results {
        out.push_str(&format!("{},{:.3},{:.3}\n", r.label, r.avg_ms, r.std_ms));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::encode_frame;
    use crate::projection::ProjectionConfig;
    use crate::raster::NUM_CLASSES;
    use crate::synth::{generate_scene, SceneConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn full_image(h: usize, w: usize) -> RangeImage {
        let mut img = RangeImage::zeros(h, w, 3);
        for cell in 0..h * w {
            img.planes[2 * h * w + cell] = 1.0;
            img.planes[h * w + cell] = 0.5;
        }
        img
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let (h, w) = (4, 8);
        let img = full_image(h, w);
        let mut gt = LabelRaster::zeros(h, w);
        for i in 0..8 {
            gt.classes[i] = 1 + (i % 3) as u8;
        }
        let mut cm = ConfusionMatrix::new(NUM_CLASSES);
        cm.accumulate(&gt, &gt, &img, 0..h);
        for class in 1..4 {
            assert_eq!(cm.iou(class).unwrap(), 1.0);
        }
        assert_eq!(cm.foreground_miou(), Some(1.0));
        assert_eq!(cm.total(), (h * w) as u64);
    }

    #[test]
    fn disjoint_prediction_scores_zero() {
        let (h, w) = (2, 8);
        let img = full_image(h, w);
        let mut gt = LabelRaster::zeros(h, w);
        let mut pred = LabelRaster::zeros(h, w);
        for i in 0..4 {
            gt.classes[i] = 1;
            pred.classes[i + 4] = 1;
        }
        let mut cm = ConfusionMatrix::new(NUM_CLASSES);
        cm.accumulate(&pred, &gt, &img, 0..h);
        assert_eq!(cm.iou(1).unwrap(), 0.0);
    }

    #[test]
    fn half_covered_class_with_spillover_scores_one_third() {
        let (h, w) = (10, 20);
        let img = full_image(h, w);
        let mut gt = LabelRaster::zeros(h, w);
        let mut pred = LabelRaster::zeros(h, w);
        for i in 0..100 {
            gt.classes[i] = 1;
        }
        for i in 50..150 {
            pred.classes[i] = 1; // 50 true cells + 50 background cells
        }
        let mut cm = ConfusionMatrix::new(NUM_CLASSES);
        cm.accumulate(&pred, &gt, &img, 0..h);
        assert!((cm.iou(1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absent_class_is_undefined_and_skipped_by_the_mean() {
        let (h, w) = (2, 4);
        let img = full_image(h, w);
        let mut gt = LabelRaster::zeros(h, w);
        gt.classes[0] = 1;
        let mut cm = ConfusionMatrix::new(NUM_CLASSES);
        cm.accumulate(&gt, &gt, &img, 0..h);
        assert!(matches!(cm.iou(2), Err(EvalError::UndefinedIoU { class: 2 })));
        assert_eq!(cm.foreground_miou(), Some(1.0));

        let empty = ConfusionMatrix::new(NUM_CLASSES);
        assert_eq!(empty.foreground_miou(), None);
    }

    #[test]
    fn unoccupied_cells_are_ignored() {
        let (h, w) = (2, 4);
        let mut img = full_image(h, w);
        img.planes[2 * h * w] = 0.0; // cell 0 empty
        let mut gt = LabelRaster::zeros(h, w);
        gt.classes[0] = 1;
        gt.classes[1] = 1;
        let mut cm = ConfusionMatrix::new(NUM_CLASSES);
        cm.accumulate(&gt, &gt, &img, 0..h);
        assert_eq!(cm.total(), (h * w - 1) as u64);
        assert_eq!(cm.count(1, 1), 1);
    }

    #[test]
    fn bands_isolate_errors_and_sum_to_the_full_matrix() {
        let (h, w) = (8, 8);
        let top_rows = 2;
        let img = full_image(h, w);
        let mut gt = LabelRaster::zeros(h, w);
        for i in 0..h * w {
            gt.classes[i] = 1 + (i % 2) as u8;
        }
        let mut pred = gt.clone();
        for i in top_rows * w..h * w {
            pred.classes[i] = if gt.classes[i] == 1 { 2 } else { 1 };
        }
        let (full, top, bottom) = banded_confusion(&pred, &gt, &img, top_rows);
        assert_eq!(top.foreground_miou(), Some(1.0));
        assert!(bottom.foreground_miou().unwrap() < 1.0);
        for p in 0..NUM_CLASSES {
            for g in 0..NUM_CLASSES {
                assert_eq!(full.count(p, g), top.count(p, g) + bottom.count(p, g));
            }
        }
    }

    #[test]
    fn band_iou_matches_a_naive_cell_loop() {
        let proj = ProjectionConfig::default().with_size(16, 64);
        let cfg = SceneConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let scene = generate_scene(&cfg, &proj, &mut rng);
        let (img, gt) = encode_frame(&scene.cloud, Some(&scene.labels), &proj);
        let gt = gt.unwrap();
        // A prediction with mistakes: shift every foreground class up by one.
        let mut pred = gt.clone();
        for c in pred.classes.iter_mut() {
            if *c != 0 {
                *c = (*c % 3) + 1;
            }
        }
        let top_rows = 4;
        let (_, top, bottom) = banded_confusion(&pred, &gt, &img, top_rows);
        for (band, rows) in [(&top, 0..top_rows), (&bottom, top_rows..img.h)] {
            for class in 1..NUM_CLASSES {
                let (mut tp, mut fp, mut fnn) = (0u64, 0u64, 0u64);
                for row in rows.clone() {
                    for col in 0..img.w {
                        if !img.occupied(row, col) {
                            continue;
                        }
                        let cell = row * img.w + col;
                        let (p, g) = (pred.classes[cell] as usize, gt.classes[cell] as usize);
                        match (p == class, g == class) {
                            (true, true) => tp += 1,
                            (true, false) => fp += 1,
                            (false, true) => fnn += 1,
                            _ => {}
                        }
                    }
                }
                match band.iou(class) {
                    Ok(v) => {
                        let oracle = tp as f64 / (tp + fp + fnn) as f64;
                        assert!((v - oracle).abs() < 1e-12);
                    }
                    Err(_) => assert_eq!(tp + fp + fnn, 0),
                }
            }
        }
    }

    #[test]
    fn merge_order_does_not_change_counts() {
        let mut frames = Vec::new();
        for seed in 0..3 {
            let mut cm = ConfusionMatrix::new(NUM_CLASSES);
            for i in 0..20 {
                cm.record(((seed + i) % 4) as u8, (i % 4) as u8);
            }
            frames.push(cm);
        }
        let mut forward = ConfusionMatrix::new(NUM_CLASSES);
        let mut backward = ConfusionMatrix::new(NUM_CLASSES);
        for cm in &frames {
            forward.merge(cm);
        }
        for cm in frames.iter().rev() {
            backward.merge(cm);
        }
        assert_eq!(forward, backward);
    }

    #[test]
    fn empty_frames_give_empty_row_stats() {
        assert!(analyze_row_ranges(&[], 1, 80.0).is_empty());
    }

    #[test]
    fn far_car_registers_only_in_the_top_rows() {
        let proj = ProjectionConfig::default(); // 64 x 512
        let cfg = SceneConfig {
            cars: (1, 1),
            pedestrians: (0, 0),
            cyclists: (0, 0),
            far_range: (58.0, 62.0),
            ..SceneConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let scene = generate_scene(&cfg, &proj, &mut rng);
        let (img, gt) = encode_frame(&scene.cloud, Some(&scene.labels), &proj);
        let gt = gt.unwrap();
        let stats = analyze_row_ranges(&[(&img, &gt)], crate::raster::CLASS_CAR, proj.r_max);
        assert!(!stats.is_empty());
        for s in &stats {
            assert!(s.row < 16, "car at 60 m seen in row {}", s.row);
            assert!(s.min > 50.0 && s.max < 70.0);
        }
    }

    #[test]
    fn ground_max_range_never_grows_downward() {
        let proj = ProjectionConfig::default().with_size(32, 128);
        let cfg =
            SceneConfig { cars: (0, 0), pedestrians: (0, 0), cyclists: (0, 0), ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let scene = generate_scene(&cfg, &proj, &mut rng);
        let (img, gt) = encode_frame(&scene.cloud, Some(&scene.labels), &proj);
        let stats = analyze_row_ranges(&[(&img, &gt.unwrap())], 0, proj.r_max);
        for pair in stats.windows(2) {
            assert!(pair[1].max <= pair[0].max + 0.05, "rows {} -> {}", pair[0].row, pair[1].row);
        }
    }

    #[test]
    fn histogram_counts_every_labeled_cell_once() {
        let proj = ProjectionConfig::default().with_size(16, 64);
        let cfg = SceneConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scene = generate_scene(&cfg, &proj, &mut rng);
        let (img, gt) = encode_frame(&scene.cloud, Some(&scene.labels), &proj);
        let gt = gt.unwrap();
        let hist = row_range_histogram(&[(&img, &gt)], 1, 32, proj.r_max);
        let labeled = gt.classes.iter().filter(|&&c| c == 1).count() as u64;
        assert_eq!(hist.counts.iter().sum::<u64>(), labeled);
    }

    #[test]
    fn benchmark_reports_zero_std_for_one_rep() {
        let r = benchmark("noop", 1, 0, || {}).unwrap();
        assert_eq!(r.std_ms, 0.0);
        assert_eq!(r.reps, 1);
        assert!(matches!(benchmark("noop", 0, 0, || {}), Err(EvalError::EmptyBenchmark)));
    }

    #[test]
    fn csv_shapes_follow_the_band_sizes() {
        let (h, w) = (8, 8);
        let img = full_image(h, w);
        let mut gt = LabelRaster::zeros(h, w);
        for i in 0..h * w {
            gt.classes[i] = 1 + (i % 3) as u8;
        }
        let (full, top, bottom) = banded_confusion(&gt, &gt, &img, 2);
        let csv = metrics_csv(&full, &top, &bottom, 2, h);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "class,iou");
        assert_eq!(lines.len(), 1 + 3 + 3);
        assert!(lines[4].starts_with("mean,"));
        assert!(lines[5].starts_with("top2_mean,"));
        assert!(lines[6].starts_with("lower6_mean,"));

        let results = [BenchResult {
            label: "encode".into(),
            avg_ms: 1.25,
            std_ms: 0.5,
            reps: 10,
        }];
        let bench = bench_csv(&results);
        assert!(bench.starts_with("stage,avg_ms,std_ms\n"));
        assert!(bench.contains("encode,1.250,0.500"));
    }
}
