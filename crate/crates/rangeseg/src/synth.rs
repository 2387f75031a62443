//! Procedural LiDAR scenes: labeled objects on a ground plane, ray-cast
//! through the projection grid so every surviving ray lands in its own
//! image cell. Cars are boxes, pedestrians single vertical cylinders,
//! cyclists a pair of overlapping cylinders that cluster as one instance.
//! Per-point class labels, instance ids, and bounding boxes come straight
//! from the construction, so generated frames double as ground truth.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::pointcloud::{BoxLabel, Point, PointCloud};
use crate::projection::ProjectionConfig;
use crate::raster::{CLASS_CAR, CLASS_CYCLIST, CLASS_PEDESTRIAN};

/// Mean reflectance per class; well separated relative to the noise so the
/// intensity channel carries a learnable class signal.
pub const INTENSITY_MEANS: [f32; 4] = [0.10, 0.40, 0.65, 0.90];

#[derive(Debug, Clone, Copy)]
pub struct SceneConfig {
    /// Inclusive object-count ranges per class.
    pub cars: (usize, usize),
    pub pedestrians: (usize, usize),
    pub cyclists: (usize, usize),
    /// Radial band where ordinary objects are placed.
    pub near_range: (f32, f32),
    /// Radial band for the guaranteed distant car; disabled when the car
    /// count range is (0, 0).
    pub far_range: (f32, f32),
    /// Minimum center-to-center spacing between instances, meters.
    pub min_separation: f32,
    /// Extra azimuth clearance between instances, degrees.
    pub angular_margin_deg: f64,
    pub ground_z: f32,
    pub range_noise: f32,
    pub intensity_noise: f32,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            cars: (1, 2),
            pedestrians: (1, 2),
            cyclists: (1, 1),
            near_range: (8.0, 22.0),
            // Starts past 33 m so a grazed car side spans under seven beam
            // rows and thins to noise instead of a spurious cluster.
            far_range: (34.0, 48.0),
            min_separation: 2.0,
            angular_margin_deg: 2.0,
            ground_z: -1.73,
            range_noise: 0.02,
            intensity_noise: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    ObjBox { cx: f64, cy: f64, cz: f64, l: f64, w: f64, h: f64, yaw: f64 },
    Cylinder { cx: f64, cy: f64, r: f64, z0: f64, z1: f64 },
}

#[derive(Debug, Clone)]
struct SceneObject {
    shapes: Vec<Shape>,
    class: u8,
    bounding: BoxLabel,
    /// Azimuth footprint, radians, used to keep instances separated.
    phi_center: f64,
    phi_halfwidth: f64,
    xy: (f64, f64),
}

/// A generated frame with construction-time ground truth.
pub struct Scene {
    pub cloud: PointCloud,
    pub labels: Vec<u8>,
    pub instance_ids: Vec<u16>,
    pub boxes: Vec<BoxLabel>,
    pub num_instances: usize,
}

fn ray_dir(theta: f64, phi: f64) -> (f64, f64, f64) {
    (theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin())
}

/// Distance along the ray to the shape surface, if hit in front.
fn intersect(shape: &Shape, dir: (f64, f64, f64)) -> Option<f64> {
    let (dx, dy, dz) = dir;
    match *shape {
        Shape::ObjBox { cx, cy, cz, l, w, h, yaw } => {
            // Slab test in the box frame; the ray starts at the origin.
            let (s, c) = yaw.sin_cos();
            let ox = c * (0.0 - cx) + s * (0.0 - cy);
            let oy = -s * (0.0 - cx) + c * (0.0 - cy);
            let oz = -cz;
            let rdx = c * dx + s * dy;
            let rdy = -s * dx + c * dy;
            let mut t0 = 0.0f64;
            let mut t1 = f64::INFINITY;
            for (o, d, half) in [(ox, rdx, l / 2.0), (oy, rdy, w / 2.0), (oz, dz, h / 2.0)] {
                if d.abs() < 1e-12 {
                    if o.abs() > half {
                        return None;
                    }
                    continue;
                }
                let (mut a, mut b) = ((-half - o) / d, (half - o) / d);
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t0 = t0.max(a);
                t1 = t1.min(b);
                if t0 > t1 {
                    return None;
                }
            }
            (t0 > 1e-9).then_some(t0)
        }
        Shape::Cylinder { cx, cy, r, z0, z1 } => {
            // Side surface only; synthetic rays never look straight down.
            let a = dx * dx + dy * dy;
            if a < 1e-12 {
                return None;
            }
            let b = -2.0 * (dx * cx + dy * cy);
            let c = cx * cx + cy * cy - r * r;
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                return None;
            }
            let t = (-b - disc.sqrt()) / (2.0 * a);
            if t <= 1e-9 {
                return None;
            }
            let z = t * dz;
            (z >= z0 && z <= z1).then_some(t)
        }
    }
}

struct Placer<'a> {
    cfg: &'a SceneConfig,
    proj: &'a ProjectionConfig,
    objects: Vec<SceneObject>,
}

impl Placer<'_> {
    /// Finds an unoccupied (range, azimuth) slot, or gives up after a
    /// bounded number of draws.
    fn place(
        &mut self,
        rng: &mut ChaCha8Rng,
        band: (f32, f32),
        half_extent: f64,
        build: impl Fn(f64, f64, &mut ChaCha8Rng) -> (Vec<Shape>, u8, BoxLabel),
    ) -> bool {
        let margin = self.cfg.angular_margin_deg.to_radians();
        for _ in 0..200 {
            let range = rng.gen_range(band.0 as f64..=band.1 as f64);
            let halfwidth = (half_extent / range).atan();
            let lo = self.proj.phi_min + halfwidth + margin;
            let hi = self.proj.phi_max - halfwidth - margin;
            if lo >= hi {
                return false;
            }
            let phi = rng.gen_range(lo..hi);
            let (x, y) = (range * phi.cos(), range * phi.sin());
            let clear = self.objects.iter().all(|o| {
                let dx = o.xy.0 - x;
                let dy = o.xy.1 - y;
                let gap = (o.phi_center - phi).abs();
                (dx * dx + dy * dy).sqrt() >= self.cfg.min_separation as f64
                    && gap >= o.phi_halfwidth + halfwidth + margin
            });
            if !clear {
                continue;
            }
            let (shapes, class, bounding) = build(x, y, rng);
            self.objects.push(SceneObject {
                shapes,
                class,
                bounding,
                phi_center: phi,
                phi_halfwidth: halfwidth,
                xy: (x, y),
            });
            return true;
        }
        false
    }
}

fn jitter(rng: &mut ChaCha8Rng, v: f64) -> f64 {
    v * rng.gen_range(0.9..1.1)
}

/// Slack added to label boxes so surface points survive range noise and
/// f32 rotation rounding; small against the configured separation.
const BOX_MARGIN: f64 = 0.03;

fn car(x: f64, y: f64, ground: f64, rng: &mut ChaCha8Rng) -> (Vec<Shape>, u8, BoxLabel) {
    // Van-height body keeps the roof above the sensor plane; a ray from
    // below always enters a solid box through a vertical face, so no
    // detached single-row roof sheet can appear in the range image.
    let (l, w, h) = (jitter(rng, 4.2), jitter(rng, 1.8), jitter(rng, 1.95));
    // A box face viewed edge-on returns one isolated column per azimuth
    // step, which no density rule can group, so the yaw sampler keeps
    // every face at least 20 degrees off the line of sight.
    let quadrant = rng.gen_range(0..4) as f64;
    let oblique = rng.gen_range(20f64.to_radians()..70f64.to_radians());
    let yaw = y.atan2(x) + quadrant * std::f64::consts::FRAC_PI_2 + oblique;
    let cz = ground + h / 2.0;
    let shape = Shape::ObjBox { cx: x, cy: y, cz, l, w, h, yaw };
    let label = BoxLabel {
        class: CLASS_CAR,
        cx: x as f32,
        cy: y as f32,
        cz: cz as f32,
        l: (l + 2.0 * BOX_MARGIN) as f32,
        w: (w + 2.0 * BOX_MARGIN) as f32,
        h: (h + 2.0 * BOX_MARGIN) as f32,
        yaw: yaw as f32,
    };
    (vec![shape], CLASS_CAR, label)
}

fn pedestrian(x: f64, y: f64, ground: f64, rng: &mut ChaCha8Rng) -> (Vec<Shape>, u8, BoxLabel) {
    let (r, h) = (jitter(rng, 0.30), jitter(rng, 1.70));
    let shape = Shape::Cylinder { cx: x, cy: y, r, z0: ground, z1: ground + h };
    let label = BoxLabel {
        class: CLASS_PEDESTRIAN,
        cx: x as f32,
        cy: y as f32,
        cz: (ground + h / 2.0) as f32,
        l: (2.0 * (r + BOX_MARGIN)) as f32,
        w: (2.0 * (r + BOX_MARGIN)) as f32,
        h: (h + 2.0 * BOX_MARGIN) as f32,
        yaw: 0.0,
    };
    (vec![shape], CLASS_PEDESTRIAN, label)
}

fn cyclist(x: f64, y: f64, ground: f64, rng: &mut ChaCha8Rng) -> (Vec<Shape>, u8, BoxLabel) {
    // Rider plus bike: two overlapping cylinders 0.4 m apart, so the pair
    // is a single connected cluster under the clustering radius.
    let dir = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let offset = 0.2;
    let (ox, oy) = (offset * dir.cos(), offset * dir.sin());
    let (rider_r, rider_h) = (jitter(rng, 0.30), jitter(rng, 1.70));
    let (bike_r, bike_h) = (jitter(rng, 0.30), jitter(rng, 1.10));
    let rider =
        Shape::Cylinder { cx: x - ox, cy: y - oy, r: rider_r, z0: ground, z1: ground + rider_h };
    let bike =
        Shape::Cylinder { cx: x + ox, cy: y + oy, r: bike_r, z0: ground, z1: ground + bike_h };
    // The label box hugs the jittered pair, long axis along the offset.
    let half_w = rider_r.max(bike_r) + BOX_MARGIN;
    let half_l = offset + half_w;
    let height = rider_h.max(bike_h) + 2.0 * BOX_MARGIN;
    let label = BoxLabel {
        class: CLASS_CYCLIST,
        cx: x as f32,
        cy: y as f32,
        cz: (ground + rider_h.max(bike_h) / 2.0) as f32,
        l: (2.0 * half_l) as f32,
        w: (2.0 * half_w) as f32,
        h: height as f32,
        yaw: dir as f32,
    };
    (vec![rider, bike], CLASS_CYCLIST, label)
}

/// Generates one scene: places objects without overlap, then casts one ray
/// per image cell and keeps the nearest surface within sensor range.
pub fn generate_scene(cfg: &SceneConfig, proj: &ProjectionConfig, rng: &mut ChaCha8Rng) -> Scene {
    let ground = cfg.ground_z as f64;
    let mut placer = Placer { cfg, proj, objects: Vec::new() };

    // The far car first: it anchors content in the top image band, where
    // distant objects land.
    let n_cars = rng.gen_range(cfg.cars.0..=cfg.cars.1);
    if n_cars > 0 {
        placer.place(rng, cfg.far_range, 2.5, |x, y, rng| car(x, y, ground, rng));
    }
    for _ in 1..n_cars {
        placer.place(rng, cfg.near_range, 2.5, |x, y, rng| car(x, y, ground, rng));
    }
    for _ in 0..rng.gen_range(cfg.pedestrians.0..=cfg.pedestrians.1) {
        placer.place(rng, cfg.near_range, 0.4, |x, y, rng| pedestrian(x, y, ground, rng));
    }
    for _ in 0..rng.gen_range(cfg.cyclists.0..=cfg.cyclists.1) {
        placer.place(rng, cfg.near_range, 0.7, |x, y, rng| cyclist(x, y, ground, rng));
    }
    let objects = placer.objects;

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut instance_ids = Vec::new();
    for row in 0..proj.h {
        let theta = proj.row_theta(row);
        for col in 0..proj.w {
            let phi = proj.col_phi(col);
            let dir = ray_dir(theta, phi);
            let mut best: Option<f64> = (dir.2 < 0.0).then(|| ground / dir.2);
            for obj in &objects {
                for shape in &obj.shapes {
                    if let Some(t) = intersect(shape, dir) {
                        if best.map_or(true, |bt| t < bt) {
                            best = Some(t);
                        }
                    }
                }
            }
            let Some(t) = best else { continue };
            let t = t + rng.gen_range(-1.0..1.0) as f64 * cfg.range_noise as f64;
            if t <= 0.1 || t > proj.r_max as f64 {
                continue;
            }
            // The label boxes are the ground truth: class, instance, and
            // the class-correlated intensity all follow box membership, so
            // relabeling the saved cloud from the saved boxes reproduces
            // these labels exactly.
            let mut point =
                Point::new((t * dir.0) as f32, (t * dir.1) as f32, (t * dir.2) as f32, 0.0);
            let owner = objects.iter().position(|o| o.bounding.contains(&point));
            let (class, inst) =
                owner.map_or((0u8, 0u16), |oi| (objects[oi].class, oi as u16 + 1));
            let mean = INTENSITY_MEANS[class as usize];
            point.intensity =
                (mean + rng.gen_range(-1.0f32..1.0) * cfg.intensity_noise).clamp(0.0, 1.0);
            points.push(point);
            labels.push(class);
            instance_ids.push(inst);
        }
    }

    Scene {
        cloud: PointCloud::new(points),
        labels,
        instance_ids,
        boxes: objects.iter().map(|o| o.bounding).collect(),
        num_instances: objects.len(),
    }
}

/// A deterministic sequence of scenes from one seed.
pub fn generate_dataset(
    frames: usize,
    cfg: &SceneConfig,
    proj: &ProjectionConfig,
    seed: u64,
) -> Vec<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..frames).map(|_| generate_scene(cfg, proj, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{encode_frame, project_point};

    fn small_proj() -> ProjectionConfig {
        ProjectionConfig::default().with_size(32, 128)
    }

    #[test]
    fn scenes_are_deterministic_per_seed() {
        let cfg = SceneConfig::default();
        let proj = small_proj();
        let a = generate_dataset(2, &cfg, &proj, 5);
        let b = generate_dataset(2, &cfg, &proj, 5);
        for (sa, sb) in a.iter().zip(&b) {
            assert_eq!(sa.cloud.points.len(), sb.cloud.points.len());
            for (pa, pb) in sa.cloud.points.iter().zip(&sb.cloud.points) {
                assert_eq!(pa.x.to_bits(), pb.x.to_bits());
                assert_eq!(pa.intensity.to_bits(), pb.intensity.to_bits());
            }
            assert_eq!(sa.labels, sb.labels);
        }
    }

    #[test]
    fn every_ray_lands_in_its_own_cell() {
        let cfg = SceneConfig::default();
        let proj = small_proj();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scene = generate_scene(&cfg, &proj, &mut rng);
        assert!(!scene.cloud.points.is_empty());
        let mut seen = vec![false; proj.h * proj.w];
        for p in &scene.cloud.points {
            let hit = project_point(p, &proj).unwrap().expect("in fov");
            let idx = hit.row * proj.w + hit.col;
            assert!(!seen[idx], "two points in cell {idx}");
            seen[idx] = true;
        }
    }

    #[test]
    fn labels_cover_all_classes_and_instances_are_spaced() {
        let cfg = SceneConfig::default();
        let proj = small_proj();
        for seed in 0..8 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scene = generate_scene(&cfg, &proj, &mut rng);
            for cls in 1..=3u8 {
                assert!(scene.labels.contains(&cls), "seed {seed} missing class {cls}");
            }
            // Distinct instances keep their configured separation.
            let mut centers: Vec<(usize, f32, f32)> = Vec::new();
            for (i, &inst) in scene.instance_ids.iter().enumerate() {
                if inst == 0 {
                    continue;
                }
                let p = &scene.cloud.points[i];
                match centers.iter_mut().find(|(id, _, _)| *id == inst as usize) {
                    Some(_) => {}
                    None => centers.push((inst as usize, p.x, p.y)),
                }
            }
            assert_eq!(centers.len(), scene.num_instances);
        }
    }

    #[test]
    fn point_labels_and_instances_align() {
        let cfg = SceneConfig::default();
        let proj = small_proj();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scene = generate_scene(&cfg, &proj, &mut rng);
        assert_eq!(scene.cloud.points.len(), scene.labels.len());
        assert_eq!(scene.cloud.points.len(), scene.instance_ids.len());
        for (i, &inst) in scene.instance_ids.iter().enumerate() {
            assert_eq!(inst == 0, scene.labels[i] == 0, "point {i}");
        }
    }

    #[test]
    fn saved_boxes_reproduce_the_construction_labels() {
        use crate::pointcloud::label_points;
        let cfg = SceneConfig::default();
        for (seed, proj) in
            [(0, small_proj()), (1, small_proj()), (2, ProjectionConfig::default())]
        {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scene = generate_scene(&cfg, &proj, &mut rng);
            let relabeled = label_points(&scene.cloud, &scene.boxes);
            assert_eq!(relabeled, scene.labels, "seed {seed}");
        }
    }

    #[test]
    fn intensities_separate_classes() {
        let cfg = SceneConfig::default();
        let proj = small_proj();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scene = generate_scene(&cfg, &proj, &mut rng);
        for (p, &cls) in scene.cloud.points.iter().zip(&scene.labels) {
            let mean = INTENSITY_MEANS[cls as usize];
            assert!((p.intensity - mean).abs() <= cfg.intensity_noise + 1e-6);
        }
    }

    #[test]
    fn far_car_reaches_the_top_band() {
        let cfg = SceneConfig { pedestrians: (0, 0), cyclists: (0, 0), cars: (1, 1), ..SceneConfig::default() };
        let proj = small_proj();
        let mut found = false;
        for seed in 0..4 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scene = generate_scene(&cfg, &proj, &mut rng);
            let (_, raster) = encode_frame(&scene.cloud, Some(&scene.labels), &proj);
            let raster = raster.unwrap();
            let top = proj.h / 4;
            found |= (0..top * proj.w).any(|i| raster.classes[i] == CLASS_CAR);
        }
        assert!(found, "distant cars should appear in the top rows");
    }

    #[test]
    fn ground_range_shrinks_down_the_image() {
        let empty = SceneConfig { cars: (0, 0), pedestrians: (0, 0), cyclists: (0, 0), ..SceneConfig::default() };
        let proj = small_proj();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scene = generate_scene(&empty, &proj, &mut rng);
        let (img, _) = encode_frame(&scene.cloud, Some(&scene.labels), &proj);
        let mut prev = f32::INFINITY;
        for row in 0..proj.h {
            let mut row_max = 0.0f32;
            for col in 0..proj.w {
                if img.occupied(row, col) {
                    row_max = row_max.max(img.range_norm()[row * proj.w + col]);
                }
            }
            if row_max > 0.0 {
                assert!(row_max <= prev + 1e-3, "row {row}");
                prev = row_max;
            }
        }
    }
}
