//! Command line front end for the range image segmentation pipeline:
//! encode point clouds, synthesize labeled scenes, train and run the
//! segmentation net, cluster instances, and score or benchmark results.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rangeseg::cluster::{apply_instances, cluster_frame, instances_jsonl, DbscanParams};
use rangeseg::eval::{
    analyze_row_ranges, banded_confusion, bench_csv, benchmark, metrics_csv,
    row_range_histogram, row_ranges_csv,
};
use rangeseg::fog::{defog, fog_simulate, FogParams};
use rangeseg::net::{NetConfig, RangeAwareNet, Variant};
use rangeseg::nn::checkpoint::checkpoint_bytes;
use rangeseg::pgm::{bev_pgm, histogram_pgm, instances_ppm, range_pgm, raster_ppm};
use rangeseg::pointcloud::{
    box_labels_jsonl, kitti_bin_bytes, label_points, parse_box_labels, parse_kitti_bin, Point,
    PointCloud,
};
use rangeseg::projection::{
    encode_frame_with, parse_range_image, range_image_bytes, ChannelMode, ProjectionConfig,
    RangeImage,
};
use rangeseg::raster::{instance_raster_bytes, parse_raster, raster_bytes, LabelRaster};
use rangeseg::synth::{generate_dataset, SceneConfig};
use rangeseg::train::{scene_samples, train, TrainConfig};

#[derive(Parser)]
#[command(
    name = "rangeseg",
    version,
    about = "Range image segmentation pipeline for LiDAR point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project a point cloud into a range image, optionally with labels.
    Encode(EncodeArgs),
    /// Generate labeled synthetic frames.
    Synth(SynthArgs),
    /// Train the segmentation net on encoded frames.
    Train(TrainArgs),
    /// Run a trained net on one range image.
    Infer(InferArgs),
    /// Group foreground cells of a prediction into instances.
    Cluster(ClusterArgs),
    /// Score a prediction against ground truth.
    Eval(EvalArgs),
    /// Per-row range statistics for one class over a frame directory.
    Analyze(AnalyzeArgs),
    /// Degrade a point cloud with simulated fog.
    Fogsim(FogsimArgs),
    /// Drop near returns that fog tends to fabricate.
    Defog(DefogArgs),
    /// Time the pipeline stages.
    Bench(BenchArgs),
}

#[derive(Args, Clone, Copy)]
struct ProjArgs {
    /// Image rows.
    #[arg(long, default_value_t = 64)]
    h: usize,
    /// Image columns.
    #[arg(long, default_value_t = 512)]
    w: usize,
    /// Range cutoff, meters.
    #[arg(long, default_value_t = 80.0)]
    r_max: f32,
}

impl ProjArgs {
    fn config(&self) -> ProjectionConfig {
        let mut p = ProjectionConfig::default().with_size(self.h, self.w);
        p.r_max = self.r_max;
        p
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    #[value(name = "mini_resnet")]
    MiniResnet,
    #[value(name = "mini_lasernet")]
    MiniLasernet,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::MiniResnet => Variant::MiniResNet,
            VariantArg::MiniLasernet => Variant::MiniLaserNet,
        }
    }
}

#[derive(Args)]
struct EncodeArgs {
    /// Input point cloud, x y z intensity as little-endian f32.
    #[arg(long = "in")]
    input: PathBuf,
    /// Box labels (JSON lines); required when writing ground truth.
    #[arg(long)]
    boxes: Option<PathBuf>,
    /// Output range image.
    #[arg(long)]
    out: PathBuf,
    /// Output label raster derived from the boxes.
    #[arg(long, requires = "boxes")]
    gt: Option<PathBuf>,
    /// Channel planes: 3 = intensity+range+occupancy, 2 = range+occupancy.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
    channels: u8,
    /// Write PREFIX.range.pgm (and PREFIX.labels.ppm when --gt is set).
    #[arg(long)]
    preview: Option<PathBuf>,
    #[command(flatten)]
    proj: ProjArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of frames to generate.
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving NNNN.rimg / NNNN.rseg pairs.
    #[arg(long)]
    out_dir: PathBuf,
    /// Channel planes, as for encode.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
    channels: u8,
    /// Also write NNNN.bin point clouds and NNNN.boxes.jsonl labels.
    #[arg(long)]
    clouds: bool,
    #[command(flatten)]
    proj: ProjArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of NNNN.rimg / NNNN.rseg pairs.
    #[arg(long, conflicts_with_all = ["frames", "scene_seed"])]
    data_dir: Option<PathBuf>,
    /// Generate this many synthetic frames instead of reading a directory.
    #[arg(long)]
    frames: Option<usize>,
    /// Seed for on-the-fly scene generation.
    #[arg(long, default_value_t = 0)]
    scene_seed: u64,
    /// Channel planes for on-the-fly frames.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
    channels: u8,
    #[arg(long, value_enum, default_value_t = VariantArg::MiniResnet)]
    variant: VariantArg,
    /// key=value file overriding the network preset.
    #[arg(long)]
    net_config: Option<PathBuf>,
    /// key=value file with training settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr_max: Option<f64>,
    #[arg(long)]
    lambda_lovasz: Option<f64>,
    #[arg(long)]
    lambda_range: Option<f64>,
    /// Seed for shuffling and augmentation.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    flip_prob: Option<f64>,
    /// Seed for weight initialization.
    #[arg(long, default_value_t = 0)]
    init_seed: u64,
    /// Output weight checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-step loss CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[command(flatten)]
    proj: ProjArgs,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Input range image.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output label raster.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::MiniResnet)]
    variant: VariantArg,
    #[arg(long)]
    net_config: Option<PathBuf>,
    /// Write the predicted classes as a color map.
    #[arg(long)]
    preview: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Predicted (or ground truth) label raster.
    #[arg(long)]
    pred: PathBuf,
    /// Range image the raster was predicted from.
    #[arg(long)]
    img: PathBuf,
    /// Point cloud the image was encoded from.
    #[arg(long)]
    cloud: PathBuf,
    /// Output instance raster.
    #[arg(long)]
    out_instances: Option<PathBuf>,
    /// Output label raster with unclustered foreground cleared.
    #[arg(long)]
    out_cleaned: Option<PathBuf>,
    /// Instance summary, one JSON object per line.
    #[arg(long)]
    jsonl: Option<PathBuf>,
    /// Write PREFIX.instances.ppm and PREFIX.cleaned.ppm.
    #[arg(long)]
    preview: Option<PathBuf>,
    #[arg(long, default_value_t = 0.7)]
    eps: f64,
    #[arg(long, default_value_t = 7)]
    min_pts: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Range image, for masking empty cells.
    #[arg(long)]
    img: PathBuf,
    /// Rows counted as the distant band; defaults to a quarter of the image.
    #[arg(long)]
    top_rows: Option<usize>,
    /// Also write the CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory of NNNN.rimg / NNNN.rseg pairs.
    #[arg(long)]
    dir: PathBuf,
    /// Class whose returns are analyzed.
    #[arg(long, default_value_t = 1)]
    class: u8,
    /// Also write the CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a row-by-range density map here.
    #[arg(long)]
    hist: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    bins: usize,
    #[arg(long, default_value_t = 80.0)]
    r_max: f32,
}

#[derive(Args)]
struct FogsimArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 70.0)]
    visibility: f32,
    #[arg(long, default_value_t = 0.05)]
    false_alarm_rate: f64,
    #[arg(long, default_value_t = 0.4)]
    attenuation: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a top-down occupancy map of the result.
    #[arg(long)]
    bev: Option<PathBuf>,
}

#[derive(Args)]
struct DefogArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write a top-down occupancy map of the result.
    #[arg(long)]
    bev: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    /// Cloud size for the encode stage.
    #[arg(long, default_value_t = 100_000)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    proj: ProjArgs,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(2);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Fogsim(a) => cmd_fogsim(a),
        Command::Defog(a) => cmd_defog(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

/// Writes via a hidden temp file in the target directory so readers never
/// observe a half-written output.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_cloud(path: &Path) -> Result<PointCloud> {
    Ok(parse_kitti_bin(&read_bytes(path)?)?)
}

fn load_image(path: &Path) -> Result<RangeImage> {
    Ok(parse_range_image(&read_bytes(path)?)?)
}

fn load_label_raster(path: &Path) -> Result<LabelRaster> {
    Ok(parse_raster(&read_bytes(path)?)?)
}

fn channel_mode(channels: u8) -> ChannelMode {
    if channels == 2 {
        ChannelMode::RangeOccupancy
    } else {
        ChannelMode::IntensityRangeOccupancy
    }
}

fn pick_net_config(
    net_config: Option<&Path>,
    variant: VariantArg,
    h: usize,
    w: usize,
    k: usize,
) -> Result<NetConfig> {
    match net_config {
        Some(path) => Ok(NetConfig::from_kv_text(&read_text(path)?, h, w, k)?),
        None => Ok(NetConfig::with_variant(variant.into(), h, w, k)),
    }
}

fn save_net(net: &RangeAwareNet<f32>, path: &Path) -> Result<()> {
    write_atomic(path, &checkpoint_bytes(&net.named_tensors()))
}

fn cmd_encode(a: EncodeArgs) -> Result<()> {
    let proj = a.proj.config();
    let cloud = load_cloud(&a.input)?;
    let boxes = match &a.boxes {
        Some(p) => Some(parse_box_labels(&read_text(p)?)?),
        None => None,
    };
    let labels = boxes.as_deref().map(|b| label_points(&cloud, b));
    let (img, gt) = encode_frame_with(&cloud, labels.as_deref(), &proj, channel_mode(a.channels));
    write_atomic(&a.out, &range_image_bytes(&img))?;
    if let Some(path) = &a.gt {
        let gt = gt.expect("labels were supplied");
        write_atomic(path, &raster_bytes(&gt))?;
        if let Some(prefix) = &a.preview {
            write_atomic(&suffixed(prefix, ".labels.ppm"), &raster_ppm(&gt))?;
        }
    }
    if let Some(prefix) = &a.preview {
        write_atomic(&suffixed(prefix, ".range.pgm"), &range_pgm(&img))?;
    }
    let occupied = img.occupancy().iter().filter(|&&v| v > 0.0).count();
    println!(
        "encoded {} points into {}x{}x{} image, {} cells occupied -> {}",
        cloud.len(),
        img.h,
        img.w,
        img.k,
        occupied,
        a.out.display()
    );
    Ok(())
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let proj = a.proj.config();
    let mode = channel_mode(a.channels);
    let scenes = generate_dataset(a.frames, &SceneConfig::default(), &proj, a.seed);
    for (i, scene) in scenes.iter().enumerate() {
        let (img, gt) = encode_frame_with(&scene.cloud, Some(&scene.labels), &proj, mode);
        let gt = gt.expect("labels were supplied");
        let stem = a.out_dir.join(format!("{i:04}"));
        write_atomic(&suffixed(&stem, ".rimg"), &range_image_bytes(&img))?;
        write_atomic(&suffixed(&stem, ".rseg"), &raster_bytes(&gt))?;
        if a.clouds {
            write_atomic(&suffixed(&stem, ".bin"), &kitti_bin_bytes(&scene.cloud))?;
            write_atomic(
                &suffixed(&stem, ".boxes.jsonl"),
                box_labels_jsonl(&scene.boxes).as_bytes(),
            )?;
        }
    }
    println!("wrote {} frames to {}", scenes.len(), a.out_dir.display());
    Ok(())
}

/// NNNN.rimg / NNNN.rseg pairs from one directory, sorted by file name.
fn load_pairs(dir: &Path) -> Result<Vec<(RangeImage, LabelRaster)>> {
    let mut stems: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "rimg"))
        .collect();
    stems.sort();
    if stems.is_empty() {
        bail!("no .rimg files in {}", dir.display());
    }
    let mut pairs = Vec::with_capacity(stems.len());
    for img_path in stems {
        let img = load_image(&img_path)?;
        let gt = load_label_raster(&img_path.with_extension("rseg"))?;
        if gt.h != img.h || gt.w != img.w {
            bail!("{}: raster size differs from image", img_path.display());
        }
        pairs.push((img, gt));
    }
    let (h, w, k) = {
        let first = &pairs[0].0;
        (first.h, first.w, first.k)
    };
    if pairs.iter().any(|(i, _)| i.h != h || i.w != w || i.k != k) {
        bail!("frames in {} disagree in shape", dir.display());
    }
    Ok(pairs)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let data = match (&a.data_dir, a.frames) {
        (Some(dir), _) => load_pairs(dir)?,
        (None, Some(frames)) => {
            let proj = a.proj.config();
            let scenes = generate_dataset(frames, &SceneConfig::default(), &proj, a.scene_seed);
            scene_samples(&scenes, &proj, channel_mode(a.channels))
        }
        (None, None) => bail!("either --data-dir or --frames is required"),
    };
    let (h, w, k) = {
        let first = &data[0].0;
        (first.h, first.w, first.k)
    };
    let mut cfg = match &a.config {
        Some(path) => TrainConfig::from_kv_text(&read_text(path)?)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.lr_max {
        cfg.lr_max = v;
    }
    if let Some(v) = a.lambda_lovasz {
        cfg.lambda_lovasz = v;
    }
    if let Some(v) = a.lambda_range {
        cfg.lambda_range = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.flip_prob {
        cfg.flip_prob = v;
    }
    let net_cfg = pick_net_config(a.net_config.as_deref(), a.variant, h, w, k)?;
    let mut net = RangeAwareNet::<f32>::new(net_cfg, a.init_seed)?;
    println!(
        "training {} ({} params) on {} frames of {}x{}x{}",
        net.cfg().variant.name(),
        net.num_parameters(),
        data.len(),
        h,
        w,
        k
    );
    let started = Instant::now();
    let report = train(&mut net, &data, &cfg)?;
    let elapsed = started.elapsed().as_secs_f64();
    save_net(&net, &a.out)?;
    if let Some(path) = &a.metrics {
        write_atomic(path, report.csv().as_bytes())?;
    }
    if let Some(last) = report.metrics.last() {
        println!(
            "{} steps in {:.1}s, final loss {:.4} -> {}",
            report.metrics.len(),
            elapsed,
            last.total,
            a.out.display()
        );
    } else {
        println!("0 steps, wrote initial weights -> {}", a.out.display());
    }
    Ok(())
}

fn cmd_infer(a: InferArgs) -> Result<()> {
    let img = load_image(&a.input)?;
    let cfg = pick_net_config(a.net_config.as_deref(), a.variant, img.h, img.w, img.k)?;
    let mut net = RangeAwareNet::<f32>::new(cfg, 0)?;
    net.load_weights(&a.weights)
        .with_context(|| format!("loading {}", a.weights.display()))?;
    let pred = net.predict(&img)?;
    write_atomic(&a.out, &raster_bytes(&pred))?;
    if let Some(path) = &a.preview {
        write_atomic(path, &raster_ppm(&pred))?;
    }
    let foreground = pred.classes.iter().filter(|&&c| c != 0).count();
    println!("{} foreground cells -> {}", foreground, a.out.display());
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> Result<()> {
    let pred = load_label_raster(&a.pred)?;
    let img = load_image(&a.img)?;
    let cloud = load_cloud(&a.cloud)?;
    let params = DbscanParams { eps: a.eps, min_pts: a.min_pts };
    let frame = cluster_frame(&pred, &img, &cloud, &params)?;
    let (instances, cleaned) = apply_instances(&pred, &img, &frame)?;
    if let Some(path) = &a.out_instances {
        write_atomic(path, &instance_raster_bytes(&instances))?;
    }
    if let Some(path) = &a.out_cleaned {
        write_atomic(path, &raster_bytes(&cleaned))?;
    }
    if let Some(path) = &a.jsonl {
        write_atomic(path, instances_jsonl(&frame.labeling).as_bytes())?;
    }
    if let Some(prefix) = &a.preview {
        write_atomic(&suffixed(prefix, ".instances.ppm"), &instances_ppm(&instances))?;
        write_atomic(&suffixed(prefix, ".cleaned.ppm"), &raster_ppm(&cleaned))?;
    }
    println!(
        "{} instances from {} foreground points",
        frame.labeling.num_instances(),
        frame.point_ids.len()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let pred = load_label_raster(&a.pred)?;
    let gt = load_label_raster(&a.gt)?;
    let img = load_image(&a.img)?;
    if pred.h != gt.h || pred.w != gt.w || pred.h != img.h || pred.w != img.w {
        bail!("prediction, ground truth, and image sizes differ");
    }
    let top_rows = a.top_rows.unwrap_or(img.h / 4);
    if top_rows > img.h {
        bail!("--top-rows exceeds image height");
    }
    let (full, top, bottom) = banded_confusion(&pred, &gt, &img, top_rows);
    let csv = metrics_csv(&full, &top, &bottom, top_rows, img.h);
    if let Some(path) = &a.out {
        write_atomic(path, csv.as_bytes())?;
    }
    print!("{csv}");
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let pairs = load_pairs(&a.dir)?;
    let refs: Vec<(&RangeImage, &LabelRaster)> = pairs.iter().map(|(i, g)| (i, g)).collect();
    let stats = analyze_row_ranges(&refs, a.class, a.r_max);
    let csv = row_ranges_csv(&stats);
    if let Some(path) = &a.out {
        write_atomic(path, csv.as_bytes())?;
    }
    if let Some(path) = &a.hist {
        let hist = row_range_histogram(&refs, a.class, a.bins, a.r_max);
        write_atomic(path, &histogram_pgm(&hist))?;
    }
    print!("{csv}");
    Ok(())
}

fn cmd_fogsim(a: FogsimArgs) -> Result<()> {
    let params = FogParams {
        visibility: a.visibility,
        false_alarm_rate: a.false_alarm_rate,
        attenuation: a.attenuation,
        seed: a.seed,
    };
    if !params.validate() {
        bail!("invalid fog parameters");
    }
    let cloud = load_cloud(&a.input)?;
    let fogged = fog_simulate(&cloud, &params);
    write_atomic(&a.out, &kitti_bin_bytes(&fogged))?;
    if let Some(path) = &a.bev {
        write_atomic(path, &bev_pgm(&fogged, 50.0, 256))?;
    }
    println!("kept {} of {} points -> {}", fogged.len(), cloud.len(), a.out.display());
    Ok(())
}

fn cmd_defog(a: DefogArgs) -> Result<()> {
    let cloud = load_cloud(&a.input)?;
    let cleaned = defog(&cloud);
    write_atomic(&a.out, &kitti_bin_bytes(&cleaned))?;
    if let Some(path) = &a.bev {
        write_atomic(path, &bev_pgm(&cleaned, 50.0, 256))?;
    }
    println!("kept {} of {} points -> {}", cleaned.len(), cloud.len(), a.out.display());
    Ok(())
}

/// Uniform cloud inside the sensor's field of view, every point projectable.
fn random_cloud(n: usize, proj: &ProjectionConfig, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = rng.gen_range(proj.theta_min..proj.theta_max);
        let phi = rng.gen_range(proj.phi_min..proj.phi_max);
        let r = rng.gen_range(2.0..proj.r_max as f64 * 0.9);
        points.push(Point::new(
            (r * theta.cos() * phi.cos()) as f32,
            (r * theta.cos() * phi.sin()) as f32,
            (r * theta.sin()) as f32,
            rng.gen_range(0.0..1.0),
        ));
    }
    PointCloud::new(points)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let proj = a.proj.config();
    let cloud = random_cloud(a.points, &proj, a.seed);
    let mode = ChannelMode::IntensityRangeOccupancy;
    let mut results = Vec::new();

    results.push(benchmark("encode", a.reps, a.warmup, || {
        let (img, _) = encode_frame_with(&cloud, None, &proj, mode);
        std::hint::black_box(img);
    })?);

    let scene = {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        rangeseg::synth::generate_scene(&SceneConfig::default(), &proj, &mut rng)
    };
    let (scene_img, scene_gt) = encode_frame_with(&scene.cloud, Some(&scene.labels), &proj, mode);
    let scene_gt = scene_gt.expect("labels were supplied");

    let cfg = NetConfig::with_variant(Variant::MiniLaserNet, proj.h, proj.w, mode.k());
    let mut net = RangeAwareNet::<f32>::new(cfg, a.seed)?;
    results.push(benchmark("forward", a.reps, a.warmup, || {
        let pred = net.predict(&scene_img).expect("sized to the image");
        std::hint::black_box(pred);
    })?);

    let params = DbscanParams::default();
    results.push(benchmark("cluster", a.reps, a.warmup, || {
        let frame = cluster_frame(&scene_gt, &scene_img, &scene.cloud, &params)
            .expect("ground truth cells all carry provenance");
        std::hint::black_box(frame);
    })?);

    let csv = bench_csv(&results);
    if let Some(path) = &a.out {
        write_atomic(path, csv.as_bytes())?;
    }
    print!("{csv}");
    Ok(())
}
