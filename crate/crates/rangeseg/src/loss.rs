//! Segmentation losses over post-softmax probability maps.
//!
//! Every loss returns its scalar value together with the gradient with
//! respect to the probabilities, laid out like the input, so callers seed
//! the softmax node and let the tape handle the rest. Values are
//! accumulated in f64 regardless of the tensor scalar type.

use thiserror::Error;

use crate::nn::tensor::Scalar;
use crate::raster::LabelRaster;

/// Probabilities are clamped to this floor before the log.
pub const PROB_CLAMP_MIN: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: u8, num_classes: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub lambda_lovasz: f64,
    pub lambda_range: f64,
    pub num_classes: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { lambda_lovasz: 1.0, lambda_range: 1.0, num_classes: 4 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if self.lambda_lovasz < 0.0 || self.lambda_range < 0.0 {
            return Err(LossError::ShapeMismatch("loss weights must be nonnegative".into()));
        }
        if self.num_classes < 2 {
            return Err(LossError::ShapeMismatch("need at least two classes".into()));
        }
        Ok(())
    }
}

/// Scalar loss plus gradient with respect to the probability input.
pub struct LossValue<S> {
    pub value: f64,
    pub grad: Vec<S>,
}

fn check_dims<S>(p: &[S], cells: usize, dims: (usize, usize, usize)) -> Result<(), LossError> {
    let (c, h, w) = dims;
    if c == 0 || h == 0 || w == 0 {
        return Err(LossError::ShapeMismatch(format!("empty dims {dims:?}")));
    }
    if p.len() != c * h * w {
        return Err(LossError::ShapeMismatch(format!(
            "probabilities have {} entries, dims {dims:?} need {}",
            p.len(),
            c * h * w
        )));
    }
    if cells != h * w {
        return Err(LossError::ShapeMismatch(format!(
            "target has {cells} cells, dims {dims:?} need {}",
            h * w
        )));
    }
    Ok(())
}

fn check_classes(y: &[u8], num_classes: usize) -> Result<(), LossError> {
    for &cls in y {
        if cls as usize >= num_classes {
            return Err(LossError::ClassOutOfRange { class: cls, num_classes });
        }
    }
    Ok(())
}

/// One-hot expansion of a class raster, channel-major.
pub fn one_hot<S: Scalar>(y: &[u8], num_classes: usize) -> Vec<S> {
    let n = y.len();
    let mut out = vec![S::ZERO; num_classes * n];
    for (i, &cls) in y.iter().enumerate() {
        out[cls as usize * n + i] = S::ONE;
    }
    out
}

/// Mean negative log-likelihood, normalized by C*H*W.
pub fn cross_entropy<S: Scalar>(
    p: &[S],
    y: &[S],
    dims: (usize, usize, usize),
) -> Result<LossValue<S>, LossError> {
    let (c, h, w) = dims;
    check_dims(p, y.len() / c.max(1), dims)?;
    if y.len() != p.len() {
        return Err(LossError::ShapeMismatch(format!(
            "one-hot target has {} entries, expected {}",
            y.len(),
            p.len()
        )));
    }
    let norm = 1.0 / (c * h * w) as f64;
    let mut value = 0.0;
    let mut grad = vec![S::ZERO; p.len()];
    for i in 0..p.len() {
        let yi = y[i].to_f64();
        if yi == 0.0 {
            continue;
        }
        let pi = p[i].to_f64();
        let pc = pi.clamp(PROB_CLAMP_MIN, 1.0);
        value -= yi * pc.ln() * norm;
        // Clamped region contributes a constant, so its gradient is zero.
        if pi > PROB_CLAMP_MIN {
            grad[i] = S::from_f64(-yi * norm / pc);
        }
    }
    Ok(LossValue { value, grad })
}

/// Jaccard-loss gradient over a descending-sorted ground-truth indicator.
/// Entries are nonnegative and sum to the Jaccard loss of the full set.
fn lovasz_grad(gt_sorted: &[bool]) -> Vec<f64> {
    let n = gt_sorted.len();
    let p: f64 = gt_sorted.iter().filter(|&&b| b).count() as f64;
    let mut g = Vec::with_capacity(n);
    let mut inter = p;
    let mut union = p;
    let mut prev = 0.0;
    for &gt in gt_sorted {
        if gt {
            inter -= 1.0;
        } else {
            union += 1.0;
        }
        let jac = if union == 0.0 { 0.0 } else { 1.0 - inter / union };
        g.push(jac - prev);
        prev = jac;
    }
    g
}

/// Lovász extension of the Jaccard loss for one class: errors sorted
/// descending, dotted with the extension gradient. Exposed so the value
/// can be checked against a set-based oracle on hard inputs.
pub fn lovasz_extension(m: &[f64], gt: &[bool]) -> f64 {
    assert_eq!(m.len(), gt.len());
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)));
    let gt_sorted: Vec<bool> = order.iter().map(|&i| gt[i]).collect();
    let g = lovasz_grad(&gt_sorted);
    order.iter().zip(&g).map(|(&i, &gi)| m[i] * gi).sum()
}

/// Mean per-class Lovász-softmax loss. A class participates when it
/// appears in the target or receives any probability mass; fully absent
/// classes are skipped.
pub fn lovasz_softmax<S: Scalar>(
    p: &[S],
    y: &[u8],
    dims: (usize, usize, usize),
) -> Result<LossValue<S>, LossError> {
    let (c, h, w) = dims;
    check_dims(p, y.len(), dims)?;
    check_classes(y, c)?;
    let n = h * w;
    let mut grad = vec![0.0f64; p.len()];
    let mut total = 0.0;
    let mut included = 0usize;
    let mut m = vec![0.0f64; n];
    let mut gt = vec![false; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for ci in 0..c {
        let plane = &p[ci * n..(ci + 1) * n];
        let mut present = false;
        let mut predicted = false;
        for i in 0..n {
            gt[i] = y[i] as usize == ci;
            present |= gt[i];
            let pi = plane[i].to_f64();
            predicted |= pi > 0.0;
            m[i] = if gt[i] { 1.0 - pi } else { pi };
        }
        if !present && !predicted {
            continue;
        }
        included += 1;
        order.clear();
        order.extend(0..n);
        order.sort_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)));
        let gt_sorted: Vec<bool> = order.iter().map(|&i| gt[i]).collect();
        let g = lovasz_grad(&gt_sorted);
        for (rank, &i) in order.iter().enumerate() {
            total += m[i] * g[rank];
            // dm/dp flips sign on ground-truth cells.
            grad[ci * n + i] += if gt[i] { -g[rank] } else { g[rank] };
        }
    }
    if included == 0 {
        return Ok(LossValue { value: 0.0, grad: vec![S::ZERO; p.len()] });
    }
    let scale = 1.0 / included as f64;
    Ok(LossValue {
        value: total * scale,
        grad: grad.into_iter().map(|g| S::from_f64(g * scale)).collect(),
    })
}

/// Cross-entropy plus weighted Lovász-softmax against a class raster.
pub fn combined_loss<S: Scalar>(
    p: &[S],
    y: &[u8],
    dims: (usize, usize, usize),
    cfg: &LossConfig,
) -> Result<LossValue<S>, LossError> {
    cfg.validate()?;
    if dims.0 != cfg.num_classes {
        return Err(LossError::ShapeMismatch(format!(
            "probabilities have {} channels, config says {}",
            dims.0, cfg.num_classes
        )));
    }
    let onehot = one_hot::<S>(y, dims.0);
    let xent = cross_entropy(p, &onehot, dims)?;
    let lov = lovasz_softmax(p, y, dims)?;
    let lam = S::from_f64(cfg.lambda_lovasz);
    let grad = xent
        .grad
        .into_iter()
        .zip(lov.grad)
        .map(|(a, b)| a + lam * b)
        .collect();
    Ok(LossValue { value: xent.value + cfg.lambda_lovasz * lov.value, grad })
}

/// Supervision for all three heads: the fused prediction against the full
/// raster, plus range-weighted light (full raster) and heavy (top band)
/// terms. Gradients come back pre-weighted, ready to seed each softmax.
pub struct TotalLoss<S> {
    pub value: f64,
    pub pred: f64,
    pub range: f64,
    pub grad_fused: Vec<S>,
    pub grad_heavy: Vec<S>,
    pub grad_light: Vec<S>,
}

#[allow(clippy::too_many_arguments)]
pub fn total_loss<S: Scalar>(
    p_fused: &[S],
    p_heavy: &[S],
    p_light: &[S],
    y: &LabelRaster,
    top_rows: usize,
    cfg: &LossConfig,
) -> Result<TotalLoss<S>, LossError> {
    let (c, h, w) = (cfg.num_classes, y.h, y.w);
    if top_rows == 0 || top_rows > h {
        return Err(LossError::ShapeMismatch(format!("top band {top_rows} rows in height {h}")));
    }
    let fused = combined_loss(p_fused, &y.classes, (c, h, w), cfg)?;
    let light = combined_loss(p_light, &y.classes, (c, h, w), cfg)?;
    let y_top = &y.classes[..top_rows * w];
    let heavy = combined_loss(p_heavy, y_top, (c, top_rows, w), cfg)?;
    let lam = S::from_f64(cfg.lambda_range);
    let range = light.value + heavy.value;
    Ok(TotalLoss {
        value: fused.value + cfg.lambda_range * range,
        pred: fused.value,
        range,
        grad_fused: fused.grad,
        grad_heavy: heavy.grad.into_iter().map(|g| lam * g).collect(),
        grad_light: light.grad.into_iter().map(|g| lam * g).collect(),
    })
}
