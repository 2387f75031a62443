//! Range-aware segmentation network.
//!
//! A shared residual encoder downsamples vertically only (azimuth
//! resolution is preserved end to end). Two decoders read its features: a
//! heavy decoder that densely aggregates every encoder scale, applied only
//! to the top image band where distant objects occupy a handful of cells,
//! and a light single-skip decoder over the full image. A fusion layer
//! blends the heavy output into the light decoder's top band and a final
//! transpose convolution restores full height. Three heads emit logits:
//! fused (the prediction), heavy (top band), light (full image), the
//! latter two for training-time supervision.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{self, ConfigError};
use crate::nn::checkpoint::{self, CheckpointError};
use crate::nn::graph::{Graph, LayerSpec, Mode, NnError, NodeId, NodeKind};
use crate::nn::tensor::{Scalar, Tensor};
use crate::projection::RangeImage;
use crate::raster::LabelRaster;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    MiniResNet,
    MiniLaserNet,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self, NetError> {
        match s {
            "mini_resnet" => Ok(Variant::MiniResNet),
            "mini_lasernet" => Ok(Variant::MiniLaserNet),
            other => Err(NetError::ConfigMismatch(format!(
                "unknown variant {other:?}, expected mini_resnet or mini_lasernet"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::MiniResNet => "mini_resnet",
            Variant::MiniLaserNet => "mini_lasernet",
        }
    }
}

/// Architecture hyperparameters. The two variants contrast a wider,
/// shallower encoder with a deeper, narrower one at matched stage count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetConfig {
    pub variant: Variant,
    pub h: usize,
    pub w: usize,
    pub in_channels: usize,
    pub num_classes: usize,
    pub stage_channels: Vec<usize>,
    pub blocks_per_stage: Vec<usize>,
    pub vertical_strides: Vec<usize>,
    pub top_rows: usize,
    pub heavy_channels: usize,
    pub light_channels: usize,
}

impl NetConfig {
    pub fn mini_resnet(h: usize, w: usize, in_channels: usize) -> Self {
        NetConfig {
            variant: Variant::MiniResNet,
            h,
            w,
            in_channels,
            num_classes: 4,
            stage_channels: vec![16, 32, 64, 128],
            blocks_per_stage: vec![2, 2, 2, 2],
            vertical_strides: vec![1, 2, 2, 2],
            top_rows: h / 4,
            heavy_channels: 32,
            light_channels: 32,
        }
    }

    pub fn mini_lasernet(h: usize, w: usize, in_channels: usize) -> Self {
        NetConfig {
            variant: Variant::MiniLaserNet,
            stage_channels: vec![8, 16, 32, 64],
            blocks_per_stage: vec![2, 3, 5, 3],
            ..NetConfig::mini_resnet(h, w, in_channels)
        }
    }

    pub fn with_variant(variant: Variant, h: usize, w: usize, in_channels: usize) -> Self {
        match variant {
            Variant::MiniResNet => NetConfig::mini_resnet(h, w, in_channels),
            Variant::MiniLaserNet => NetConfig::mini_lasernet(h, w, in_channels),
        }
    }

    /// Builds a config from key=value text. `variant` selects the preset;
    /// the remaining keys override individual fields.
    pub fn from_kv_text(text: &str, h: usize, w: usize, in_channels: usize) -> Result<Self, NetError> {
        let pairs = config::parse_kv(text)?;
        let variant = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "variant")
            .map(|(_, v)| Variant::parse(v))
            .transpose()?
            .unwrap_or(Variant::MiniResNet);
        let mut cfg = NetConfig::with_variant(variant, h, w, in_channels);
        for (key, value) in &pairs {
            match key.as_str() {
                "variant" => {}
                "channels" => cfg.stage_channels = config::parse_list(key, value)?,
                "blocks" => cfg.blocks_per_stage = config::parse_list(key, value)?,
                "strides" => cfg.vertical_strides = config::parse_list(key, value)?,
                "top_rows" => cfg.top_rows = config::parse_value(key, value)?,
                "classes" => cfg.num_classes = config::parse_value(key, value)?,
                "heavy_channels" => cfg.heavy_channels = config::parse_value(key, value)?,
                "light_channels" => cfg.light_channels = config::parse_value(key, value)?,
                _ => return Err(ConfigError::UnknownKey(key.clone()).into()),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let err = |msg: String| Err(NetError::ConfigMismatch(msg));
        let stages = self.stage_channels.len();
        if stages == 0 {
            return err("at least one encoder stage required".into());
        }
        if self.blocks_per_stage.len() != stages || self.vertical_strides.len() != stages {
            return err(format!(
                "stage lists disagree: {} channels, {} blocks, {} strides",
                stages,
                self.blocks_per_stage.len(),
                self.vertical_strides.len()
            ));
        }
        if self.stage_channels.iter().any(|&c| c == 0) || self.blocks_per_stage.iter().any(|&b| b == 0) {
            return err("stage channels and block counts must be positive".into());
        }
        if self.vertical_strides.iter().any(|&s| s != 1 && s != 2) {
            return err(format!("vertical strides must be 1 or 2, got {:?}", self.vertical_strides));
        }
        let total: usize = self.vertical_strides.iter().product();
        if total < 4 {
            return err(format!("total vertical stride {total} too small, decoders need at least 4"));
        }
        if self.h == 0 || self.h % total != 0 {
            return err(format!("height {} is not a positive multiple of total stride {total}", self.h));
        }
        if self.w == 0 {
            return err("width must be positive".into());
        }
        if self.top_rows < 2 || self.top_rows % 2 != 0 {
            return err(format!("top band {} rows must be even and at least 2", self.top_rows));
        }
        if self.top_rows >= self.h {
            return err(format!("top band {} rows must leave a bottom band in height {}", self.top_rows, self.h));
        }
        if self.in_channels == 0 {
            return err("input channels must be positive".into());
        }
        if self.num_classes < 2 {
            return err("need at least two classes".into());
        }
        if self.heavy_channels == 0 || self.light_channels == 0 {
            return err("decoder channel counts must be positive".into());
        }
        Ok(())
    }

    /// Cumulative vertical stride at each stage output.
    fn cumulative_strides(&self) -> Vec<usize> {
        let mut acc = 1;
        self.vertical_strides
            .iter()
            .map(|&s| {
                acc *= s;
                acc
            })
            .collect()
    }

    /// Deepest-stage index producing features at `scale`.
    fn stage_at_scale(&self, scale: usize) -> Result<usize, NetError> {
        self.cumulative_strides()
            .iter()
            .rposition(|&c| c == scale)
            .ok_or_else(|| NetError::ConfigMismatch(format!("no encoder stage at vertical scale {scale}")))
    }
}

/// Rows kept when a feature map at the given cumulative vertical stride is
/// restricted to the top image band; at least one row always survives.
pub fn top_band_rows(top_rows: usize, cumulative_stride: usize, feature_rows: usize) -> usize {
    (top_rows / cumulative_stride).max(1).min(feature_rows)
}

/// Crops a feature map to the top band at its scale.
pub fn crop_top_band<S: Scalar>(
    g: &mut Graph<S>,
    feature: NodeId,
    top_rows: usize,
    cumulative_stride: usize,
) -> Result<NodeId, NnError> {
    let rows = top_band_rows(top_rows, cumulative_stride, g.tensor(feature).h());
    if rows == g.tensor(feature).h() {
        return Ok(feature);
    }
    g.crop_top(feature, rows)
}

#[derive(Clone, Copy)]
struct ConvParams {
    w: NodeId,
    b: NodeId,
    spec: LayerSpec,
}

impl ConvParams {
    fn apply<S: Scalar>(&self, g: &mut Graph<S>, x: NodeId) -> Result<NodeId, NnError> {
        g.conv2d(x, self.w, self.b, &self.spec)
    }
}

#[derive(Clone, Copy)]
struct TconvParams {
    w: NodeId,
    spec: LayerSpec,
}

impl TconvParams {
    fn apply<S: Scalar>(&self, g: &mut Graph<S>, x: NodeId) -> Result<NodeId, NnError> {
        g.tconv2d(x, self.w, &self.spec)
    }
}

#[derive(Clone, Copy)]
struct BnParams {
    gamma: NodeId,
    beta: NodeId,
    mean: NodeId,
    var: NodeId,
}

impl BnParams {
    fn apply<S: Scalar>(&self, g: &mut Graph<S>, x: NodeId) -> Result<NodeId, NnError> {
        g.batch_norm(x, self.gamma, self.beta, self.mean, self.var, BN_EPS, BN_MOMENTUM)
    }
}

#[derive(Clone, Copy)]
struct ConvBnRelu {
    conv: ConvParams,
    bn: BnParams,
}

impl ConvBnRelu {
    fn apply<S: Scalar>(&self, g: &mut Graph<S>, x: NodeId) -> Result<NodeId, NnError> {
        let y = self.conv.apply(g, x)?;
        let y = self.bn.apply(g, y)?;
        Ok(g.relu(y))
    }
}

/// Two 3x3 convolutions with a residual shortcut; the shortcut is a
/// projection when the block changes shape.
#[derive(Clone, Copy)]
struct BasicBlock {
    conv1: ConvParams,
    bn1: BnParams,
    conv2: ConvParams,
    bn2: BnParams,
    proj: Option<(ConvParams, BnParams)>,
}

impl BasicBlock {
    fn apply<S: Scalar>(&self, g: &mut Graph<S>, x: NodeId) -> Result<NodeId, NnError> {
        let y = self.conv1.apply(g, x)?;
        let y = self.bn1.apply(g, y)?;
        let y = g.relu(y);
        let y = self.conv2.apply(g, y)?;
        let y = self.bn2.apply(g, y)?;
        let short = match &self.proj {
            Some((conv, bn)) => {
                let s = conv.apply(g, x)?;
                bn.apply(g, s)?
            }
            None => x,
        };
        let sum = g.add(y, short)?;
        Ok(g.relu(sum))
    }
}

struct LightLevel {
    skip_stage: usize,
    up: TconvParams,
    conv: ConvBnRelu,
}

struct HeavyLevel {
    target_scale: usize,
    skip_stage: usize,
    ups: Vec<TconvParams>,
    conv: ConvBnRelu,
}

struct Heads {
    fusion_mix: ConvParams,
    fused: TconvParams,
    heavy: TconvParams,
    light: TconvParams,
}

struct Builder<'g, S: Scalar> {
    g: &'g mut Graph<S>,
    named: &'g mut Vec<(String, NodeId)>,
    rng: ChaCha8Rng,
}

impl<S: Scalar> Builder<'_, S> {
    fn he_uniform(&mut self, shape: &[usize], fan_in: usize) -> Tensor<S> {
        let bound = (6.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| S::from_f64(self.rng.gen_range(-bound..bound))).collect();
        Tensor::from_vec(shape, data)
    }

    fn name(&mut self, name: String, id: NodeId) {
        self.named.push((name, id));
    }

    fn conv(
        &mut self,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: (usize, usize),
        stride_h: usize,
        padding: (usize, usize),
    ) -> Result<ConvParams, NnError> {
        let spec = LayerSpec::conv(cin, cout, kernel, stride_h, padding)?;
        let w = self.he_uniform(&[cout, cin, kernel.0, kernel.1], cin * kernel.0 * kernel.1);
        let w = self.g.param(w);
        let b = self.g.param(Tensor::zeros(&[cout]));
        self.name(format!("{name}.weight"), w);
        self.name(format!("{name}.bias"), b);
        Ok(ConvParams { w, b, spec })
    }

    fn tconv(&mut self, name: &str, cin: usize, cout: usize) -> Result<TconvParams, NnError> {
        let spec = LayerSpec::tconv(cin, cout, (2, 1), 2, (0, 0))?;
        let w = self.he_uniform(&[cin, cout, 2, 1], cin * 2);
        let w = self.g.param(w);
        self.name(format!("{name}.weight"), w);
        Ok(TconvParams { w, spec })
    }

    fn bn(&mut self, name: &str, c: usize) -> BnParams {
        let gamma = self.g.param(Tensor::filled(&[c], S::ONE));
        let beta = self.g.param(Tensor::zeros(&[c]));
        let mean = self.g.buffer(Tensor::zeros(&[c]));
        let var = self.g.buffer(Tensor::filled(&[c], S::ONE));
        self.name(format!("{name}.gamma"), gamma);
        self.name(format!("{name}.beta"), beta);
        self.name(format!("{name}.running_mean"), mean);
        self.name(format!("{name}.running_var"), var);
        BnParams { gamma, beta, mean, var }
    }

    fn conv_bn(
        &mut self,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: (usize, usize),
        stride_h: usize,
        padding: (usize, usize),
    ) -> Result<ConvBnRelu, NnError> {
        let conv = self.conv(&format!("{name}.conv"), cin, cout, kernel, stride_h, padding)?;
        let bn = self.bn(&format!("{name}.bn"), cout);
        Ok(ConvBnRelu { conv, bn })
    }

    fn block(&mut self, name: &str, cin: usize, cout: usize, stride_h: usize) -> Result<BasicBlock, NnError> {
        let conv1 = self.conv(&format!("{name}.conv1"), cin, cout, (3, 3), stride_h, (1, 1))?;
        let bn1 = self.bn(&format!("{name}.bn1"), cout);
        let conv2 = self.conv(&format!("{name}.conv2"), cout, cout, (3, 3), 1, (1, 1))?;
        let bn2 = self.bn(&format!("{name}.bn2"), cout);
        let proj = if stride_h != 1 || cin != cout {
            let conv = self.conv(&format!("{name}.proj"), cin, cout, (1, 1), stride_h, (0, 0))?;
            let bn = self.bn(&format!("{name}.proj_bn"), cout);
            Some((conv, bn))
        } else {
            None
        };
        Ok(BasicBlock { conv1, bn1, conv2, bn2, proj })
    }
}

pub struct NetOutputs {
    pub fused: NodeId,
    pub heavy: NodeId,
    pub light: NodeId,
}

pub struct RangeAwareNet<S: Scalar> {
    cfg: NetConfig,
    g: Graph<S>,
    named: Vec<(String, NodeId)>,
    stem: ConvBnRelu,
    stages: Vec<Vec<BasicBlock>>,
    light_levels: Vec<LightLevel>,
    heavy_levels: Vec<HeavyLevel>,
    heads: Heads,
}

impl<S: Scalar> RangeAwareNet<S> {
    pub fn new(cfg: NetConfig, init_seed: u64) -> Result<Self, NetError> {
        cfg.validate()?;
        let mut g = Graph::new();
        let mut named = Vec::new();
        let mut b = Builder { g: &mut g, named: &mut named, rng: ChaCha8Rng::seed_from_u64(init_seed) };

        let stem = b.conv_bn("encoder.stem", cfg.in_channels, cfg.stage_channels[0], (3, 3), 1, (1, 1))?;
        let mut stages = Vec::new();
        let mut cin = cfg.stage_channels[0];
        for (si, (&cout, (&blocks, &stride))) in cfg
            .stage_channels
            .iter()
            .zip(cfg.blocks_per_stage.iter().zip(&cfg.vertical_strides))
            .enumerate()
        {
            let mut stage = Vec::new();
            for bi in 0..blocks {
                let s = if bi == 0 { stride } else { 1 };
                stage.push(b.block(&format!("encoder.s{si}.b{bi}"), cin, cout, s)?);
                cin = cout;
            }
            stages.push(stage);
        }

        let cum = cfg.cumulative_strides();
        let deepest = *cum.last().unwrap();
        let deep_ch = *cfg.stage_channels.last().unwrap();

        let mut light_levels = Vec::new();
        let mut light_cin = deep_ch;
        let mut scale = deepest;
        let mut li = 0;
        while scale > 2 {
            let target = scale / 2;
            let skip_stage = cfg.stage_at_scale(target)?;
            let skip_ch = cfg.stage_channels[skip_stage];
            let up = b.tconv(&format!("light.l{li}.up"), light_cin, cfg.light_channels)?;
            let conv = b.conv_bn(
                &format!("light.l{li}.post"),
                cfg.light_channels + skip_ch,
                cfg.light_channels,
                (3, 3),
                1,
                (1, 1),
            )?;
            light_levels.push(LightLevel { skip_stage, up, conv });
            light_cin = cfg.light_channels;
            scale = target;
            li += 1;
        }

        let mut heavy_levels = Vec::new();
        let mut carried_ch = vec![deep_ch];
        let mut scale = deepest;
        let mut hi = 0;
        while scale > 2 {
            let target = scale / 2;
            let skip_stage = cfg.stage_at_scale(target)?;
            let skip_ch = cfg.stage_channels[skip_stage];
            let mut ups = Vec::new();
            for (j, &c) in carried_ch.iter().enumerate() {
                ups.push(b.tconv(&format!("heavy.l{hi}.up{j}"), c, c)?);
            }
            let conv = b.conv_bn(
                &format!("heavy.l{hi}.post"),
                carried_ch.iter().sum::<usize>() + skip_ch,
                cfg.heavy_channels,
                (3, 3),
                1,
                (1, 1),
            )?;
            heavy_levels.push(HeavyLevel { target_scale: target, skip_stage, ups, conv });
            carried_ch.push(cfg.heavy_channels);
            scale = target;
            hi += 1;
        }

        let fusion_mix = b.conv(
            "fusion.mix",
            cfg.heavy_channels + cfg.light_channels,
            cfg.light_channels,
            (1, 1),
            1,
            (0, 0),
        )?;
        let fused = b.tconv("head.fused", cfg.light_channels, cfg.num_classes)?;
        let heavy = b.tconv("head.heavy", cfg.heavy_channels, cfg.num_classes)?;
        let light = b.tconv("head.light", cfg.light_channels, cfg.num_classes)?;
        let heads = Heads { fusion_mix, fused, heavy, light };

        Ok(RangeAwareNet { cfg, g, named, stem, stages, light_levels, heavy_levels, heads })
    }

    pub fn cfg(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &Graph<S> {
        &self.g
    }

    pub fn graph_mut(&mut self) -> &mut Graph<S> {
        &mut self.g
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.g.set_mode(mode);
    }

    pub fn mode(&self) -> Mode {
        self.g.mode()
    }

    /// Vertical reach of the final upsampling below the fused top band.
    pub fn delta(&self) -> usize {
        self.heads.fused.spec.kernel.0 - 1
    }

    pub fn param_ids(&self) -> Vec<NodeId> {
        self.named
            .iter()
            .filter(|(_, id)| self.g.kind(*id) == NodeKind::Param)
            .map(|(_, id)| *id)
            .collect()
    }

    /// Trainable parameters whose names start with `prefix`.
    pub fn param_ids_with_prefix(&self, prefix: &str) -> Vec<NodeId> {
        self.named
            .iter()
            .filter(|(n, id)| n.starts_with(prefix) && self.g.kind(*id) == NodeKind::Param)
            .map(|(_, id)| *id)
            .collect()
    }

    /// Everything the heavy path owns: decoder levels plus its head.
    pub fn heavy_param_ids(&self) -> Vec<NodeId> {
        let mut ids = self.param_ids_with_prefix("heavy.");
        ids.extend(self.param_ids_with_prefix("head.heavy."));
        ids
    }

    pub fn num_parameters(&self) -> usize {
        self.named
            .iter()
            .filter(|(_, id)| self.g.kind(*id) == NodeKind::Param)
            .map(|(_, id)| self.g.tensor(*id).numel())
            .sum()
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor<S>)> {
        self.named.iter().map(|(n, id)| (n.clone(), self.g.tensor(*id))).collect()
    }

    pub fn save_weights<P: AsRef<Path>>(&self, path: P) -> Result<(), NetError> {
        checkpoint::save_checkpoint(path, &self.named_tensors())?;
        Ok(())
    }

    pub fn load_weights<P: AsRef<Path>>(&mut self, path: P) -> Result<(), NetError> {
        let entries = checkpoint::load_checkpoint(path)?;
        self.apply_weights(&entries)
    }

    /// Installs a full set of named tensors. Names must match the
    /// architecture exactly in both directions.
    pub fn apply_weights(&mut self, entries: &[(String, Tensor<f32>)]) -> Result<(), NetError> {
        for (name, _) in entries {
            if !self.named.iter().any(|(n, _)| n == name) {
                return Err(NetError::ConfigMismatch(format!(
                    "checkpoint tensor {name:?} does not exist in this architecture"
                )));
            }
        }
        for (name, id) in &self.named {
            let entry = entries
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
            let t = self.g.tensor(*id);
            if t.shape() != entry.1.shape() {
                return Err(CheckpointError::ShapeMismatch {
                    name: name.clone(),
                    found: entry.1.shape().to_vec(),
                    expected: t.shape().to_vec(),
                }
                .into());
            }
            let dst = &mut self.g.tensor_mut(*id).data;
            for (d, v) in dst.iter_mut().zip(&entry.1.data) {
                *d = S::from_f64(*v as f64);
            }
        }
        Ok(())
    }

    fn check_image(&self, img: &RangeImage) -> Result<(), NetError> {
        if img.h != self.cfg.h || img.w != self.cfg.w || img.k != self.cfg.in_channels {
            return Err(NetError::ConfigMismatch(format!(
                "image {}x{}x{} does not match configured {}x{}x{}",
                img.k, img.h, img.w, self.cfg.in_channels, self.cfg.h, self.cfg.w
            )));
        }
        Ok(())
    }

    pub fn input_from_image(&mut self, img: &RangeImage) -> Result<NodeId, NetError> {
        self.check_image(img)?;
        let data = img.planes.iter().map(|&v| S::from_f64(v as f64)).collect();
        let t = Tensor::from_vec(&[img.k, img.h, img.w], data);
        Ok(self.g.input(t))
    }

    /// Runs the full network. Resets the tape first, so node ids from
    /// earlier passes are invalidated.
    pub fn forward(&mut self, img: &RangeImage) -> Result<NetOutputs, NetError> {
        self.check_image(img)?;
        self.g.reset();
        let x = self.input_from_image(img)?;
        self.forward_from(x)
    }

    /// Runs the network on an already-inserted input node.
    pub fn forward_from(&mut self, x: NodeId) -> Result<NetOutputs, NetError> {
        let g = &mut self.g;
        let t = self.cfg.top_rows;

        let mut feat = self.stem.apply(g, x)?;
        let mut stage_outputs = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            for block in stage {
                feat = block.apply(g, feat)?;
            }
            stage_outputs.push(feat);
        }

        // Light path: upsample, single skip concat, convolve, repeat.
        let mut light = *stage_outputs.last().unwrap();
        for level in &self.light_levels {
            let up = level.up.apply(g, light)?;
            let skip = stage_outputs[level.skip_stage];
            let cat = g.concat_c(&[up, skip])?;
            light = level.conv.apply(g, cat)?;
        }

        // Heavy path: every deeper aggregate is re-upsampled at each level
        // and concatenated with the encoder's top-band crop at that scale.
        let cum = self.cfg.cumulative_strides();
        let deepest_crop = crop_top_band(g, *stage_outputs.last().unwrap(), t, *cum.last().unwrap())?;
        let mut carried = vec![deepest_crop];
        for level in &self.heavy_levels {
            let rows_target = top_band_rows(t, level.target_scale, self.cfg.h / level.target_scale);
            let mut ups = Vec::with_capacity(carried.len());
            for (map, up) in carried.iter().zip(&level.ups) {
                let u = up.apply(g, *map)?;
                let u = if g.tensor(u).h() > rows_target { g.crop_top(u, rows_target)? } else { u };
                ups.push(u);
            }
            let enc = crop_top_band(g, stage_outputs[level.skip_stage], t, level.target_scale)?;
            let mut inputs = ups.clone();
            inputs.push(enc);
            let cat = g.concat_c(&inputs)?;
            let new = level.conv.apply(g, cat)?;
            carried = ups;
            carried.push(new);
        }
        let heavy = *carried.last().unwrap();

        // Fusion: blend the heavy output into the light top band, then
        // reattach the untouched bottom band.
        let rows2 = t / 2;
        let half = self.cfg.h / 2;
        let light_top = g.crop_top(light, rows2)?;
        let light_bottom = g.crop_rows(light, rows2, half - rows2)?;
        let cat = g.concat_c(&[heavy, light_top])?;
        let mixed = self.heads.fusion_mix.apply(g, cat)?;
        let mixed = g.relu(mixed);
        let fused_half = g.concat_h(&[mixed, light_bottom])?;

        let fused = self.heads.fused.apply(g, fused_half)?;
        let heavy_logits = self.heads.heavy.apply(g, heavy)?;
        let light_logits = self.heads.light.apply(g, light)?;
        debug_assert_eq!(g.tensor(fused).shape(), &[self.cfg.num_classes, self.cfg.h, self.cfg.w]);
        debug_assert_eq!(g.tensor(heavy_logits).shape(), &[self.cfg.num_classes, t, self.cfg.w]);
        Ok(NetOutputs { fused, heavy: heavy_logits, light: light_logits })
    }

    /// Argmax class per cell of the fused logits; unoccupied cells are
    /// forced to the background class. Ties resolve to the lowest class.
    pub fn predict(&mut self, img: &RangeImage) -> Result<LabelRaster, NetError> {
        let prior = self.mode();
        self.set_mode(Mode::Eval);
        let result = self.forward(img);
        self.set_mode(prior);
        let out = result?;
        Ok(self.raster_from_logits(out.fused, img))
    }

    /// Argmax + occupancy masking of an already-computed logits node.
    pub fn raster_from_logits(&self, logits: NodeId, img: &RangeImage) -> LabelRaster {
        let t = self.g.tensor(logits);
        let (c, h, w) = (t.c(), t.h(), t.w());
        let occ = img.occupancy();
        let mut raster = LabelRaster::zeros(h, w);
        for idx in 0..h * w {
            if occ[idx] == 0.0 {
                continue;
            }
            let mut best = 0usize;
            let mut best_v = t.data[idx];
            for ci in 1..c {
                let v = t.data[ci * h * w + idx];
                if v > best_v {
                    best_v = v;
                    best = ci;
                }
            }
            raster.classes[idx] = best as u8;
        }
        raster
    }
}
