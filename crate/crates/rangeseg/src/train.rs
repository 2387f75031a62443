//! Deterministic single-threaded training: shuffled frame order, mirror
//! augmentation, three-head loss, SGD with the one-cycle schedule. Every
//! random draw comes from one seeded generator, so a seed pins the entire
//! run down to the final weights.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{parse_kv, parse_value, ConfigError};
use crate::eval::{banded_confusion, ConfusionMatrix};
use crate::loss::{total_loss, LossConfig, LossError};
use crate::net::{NetError, RangeAwareNet};
use crate::nn::{Mode, NnError, Scalar, SgdMomentum};
use crate::projection::{encode_frame_with, ChannelMode, ProjectionConfig, RangeImage};
use crate::raster::LabelRaster;
use crate::schedule::{lr_at, momentum_at, ScheduleConfig, ScheduleError};
use crate::synth::Scene;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("loss became non-finite at step {step}: pred {pred}, range {range}")]
    NonFiniteLoss { step: usize, pred: f64, range: f64 },
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lambda_lovasz: f64,
    pub lambda_range: f64,
    pub lr_max: f64,
    pub steps: usize,
    pub seed: u64,
    /// Probability of mirroring a frame left-to-right.
    pub flip_prob: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_lovasz: 1.0,
            lambda_range: 1.0,
            lr_max: 0.05,
            steps: 500,
            seed: 0,
            flip_prob: 0.5,
        }
    }
}

impl TrainConfig {
    /// key=value text with keys lambda_lovasz, lambda_range, lr_max,
    /// steps, seed; anything else is rejected.
    pub fn from_kv_text(text: &str) -> Result<Self, TrainError> {
        let mut cfg = TrainConfig::default();
        for (key, value) in parse_kv(text)? {
            match key.as_str() {
                "lambda_lovasz" => cfg.lambda_lovasz = parse_value(&key, &value)?,
                "lambda_range" => cfg.lambda_range = parse_value(&key, &value)?,
                "lr_max" => cfg.lr_max = parse_value(&key, &value)?,
                "steps" => cfg.steps = parse_value(&key, &value)?,
                "seed" => cfg.seed = parse_value(&key, &value)?,
                _ => return Err(ConfigError::UnknownKey(key).into()),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::BadConfig(msg.to_string()));
        if !(self.lr_max.is_finite() && self.lr_max > 0.0) {
            return bad("lr_max must be positive and finite");
        }
        if !(self.lambda_lovasz.is_finite() && self.lambda_lovasz >= 0.0) {
            return bad("lambda_lovasz must be nonnegative");
        }
        if !(self.lambda_range.is_finite() && self.lambda_range >= 0.0) {
            return bad("lambda_range must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad("flip_prob must lie in [0,1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub lr: f64,
    pub pred: f64,
    pub range: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub metrics: Vec<StepMetrics>,
}

impl TrainReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("step,lr,loss_pred,loss_range,loss_total\n");
        for m in &self.metrics {
            out.push_str(&format!(
                "{},{:.6e},{:.6e},{:.6e},{:.6e}\n",
                m.step, m.lr, m.pred, m.range, m.total
            ));
        }
        out
    }

    pub fn totals(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.total).collect()
    }
}

/// Mean of the up-to-`window` values ending at index `end` inclusive.
pub fn moving_average(values: &[f64], window: usize, end: usize) -> f64 {
    assert!(window >= 1 && end < values.len(), "window out of range");
    let start = (end + 1).saturating_sub(window);
    let slice = &values[start..=end];
    slice.iter().sum::<f64>() / slice.len() as f64
}

fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
}

/// Runs the loop for `cfg.steps` updates, one frame per step. The net is
/// left in train mode with batch-norm running stats advanced; callers
/// switch to eval mode via `predict` or `set_mode`.
pub fn train<S: Scalar>(
    net: &mut RangeAwareNet<S>,
    dataset: &[(RangeImage, LabelRaster)],
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    if cfg.steps == 0 {
        return Ok(TrainReport::default());
    }
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let sched = ScheduleConfig::new(cfg.lr_max, cfg.steps.max(2));
    sched.validate()?;
    let loss_cfg = LossConfig {
        lambda_lovasz: cfg.lambda_lovasz,
        lambda_range: cfg.lambda_range,
        num_classes: net.cfg().num_classes,
    };
    let top_rows = net.cfg().top_rows;
    let params = net.param_ids();
    let mut opt = SgdMomentum::new(lr_at(0, &sched)?, momentum_at(0, &sched)?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut cursor = order.len();
    let mut report = TrainReport::default();

    net.set_mode(Mode::Train);
    for step in 0..cfg.steps {
        if cursor == order.len() {
            shuffle(&mut order, &mut rng);
            cursor = 0;
        }
        let (img, y) = &dataset[order[cursor]];
        cursor += 1;
        let flipped;
        let (img, y) = if rng.gen::<f64>() < cfg.flip_prob {
            flipped = (img.hflip(), y.hflip());
            (&flipped.0, &flipped.1)
        } else {
            (img, y)
        };

        let out = net.forward(img)?;
        let g = net.graph_mut();
        let sf = g.softmax(out.fused)?;
        let sh = g.softmax(out.heavy)?;
        let sl = g.softmax(out.light)?;
        let loss = total_loss(
            &g.tensor(sf).data,
            &g.tensor(sh).data,
            &g.tensor(sl).data,
            y,
            top_rows,
            &loss_cfg,
        )?;
        if !loss.value.is_finite() {
            return Err(TrainError::NonFiniteLoss { step, pred: loss.pred, range: loss.range });
        }
        g.seed_grad(sf, &loss.grad_fused);
        g.seed_grad(sh, &loss.grad_heavy);
        g.seed_grad(sl, &loss.grad_light);
        g.backprop();

        let lr = lr_at(step, &sched)?;
        opt.set_lr(lr);
        opt.set_momentum(momentum_at(step, &sched)?);
        opt.step(net.graph_mut(), &params);
        report.metrics.push(StepMetrics {
            step: step + 1,
            lr,
            pred: loss.pred,
            range: loss.range,
            total: loss.value,
        });
    }
    Ok(report)
}

/// Projects generated scenes into training pairs.
pub fn scene_samples(
    scenes: &[Scene],
    proj: &ProjectionConfig,
    mode: ChannelMode,
) -> Vec<(RangeImage, LabelRaster)> {
    scenes
        .iter()
        .map(|s| {
            let (img, raster) = encode_frame_with(&s.cloud, Some(&s.labels), proj, mode);
            (img, raster.expect("labels were supplied"))
        })
        .collect()
}

/// Held-out evaluation: full, top-band, and bottom-band confusion over
/// all frames, predictions in eval mode.
pub fn evaluate_net<S: Scalar>(
    net: &mut RangeAwareNet<S>,
    samples: &[(RangeImage, LabelRaster)],
) -> Result<(ConfusionMatrix, ConfusionMatrix, ConfusionMatrix), NetError> {
    let c = crate::raster::NUM_CLASSES;
    let top_rows = net.cfg().top_rows;
    let mut full = ConfusionMatrix::new(c);
    let mut top = ConfusionMatrix::new(c);
    let mut bottom = ConfusionMatrix::new(c);
    for (img, gt) in samples {
        let pred = net.predict(img)?;
        let (f, t, b) = banded_confusion(&pred, gt, img, top_rows);
        full.merge(&f);
        top.merge(&t);
        bottom.merge(&b);
    }
    Ok((full, top, bottom))
}
