//! A small eager tape for building and differentiating feature-map DAGs.
//!
//! Parameters and running-statistic buffers are created first and persist
//! across steps; activations are appended per forward pass and dropped by
//! [`Graph::reset`]. Every op computes its value at creation time, so the
//! node list is always topologically ordered and backpropagation is a
//! single reverse sweep with gradient accumulation at shared nodes.

use thiserror::Error;

use super::ops::{self, ConvGeom};
use super::tensor::{Scalar, Tensor};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("horizontal stride {0} is not supported: strides act on the vertical axis only")]
    HorizontalStride(usize),
    #[error("bad layer spec: {0}")]
    BadSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    TConv,
    BatchNorm,
    ReLU,
    Concat,
    Add,
    Softmax,
}

/// Validated layer geometry. Construction is the single choke point that
/// rejects horizontal striding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub channels_in: usize,
    pub channels_out: usize,
    pub padding: (usize, usize),
}

impl LayerSpec {
    pub fn new(
        kind: LayerKind,
        kernel: (usize, usize),
        stride: (usize, usize),
        channels_in: usize,
        channels_out: usize,
        padding: (usize, usize),
    ) -> Result<Self, NnError> {
        if stride.1 != 1 {
            return Err(NnError::HorizontalStride(stride.1));
        }
        if stride.0 == 0 {
            return Err(NnError::BadSpec("vertical stride must be at least 1".into()));
        }
        if matches!(kind, LayerKind::Conv | LayerKind::TConv) {
            if kernel.0 == 0 || kernel.1 == 0 {
                return Err(NnError::BadSpec("kernel must be at least 1x1".into()));
            }
            if channels_in == 0 || channels_out == 0 {
                return Err(NnError::BadSpec("channel counts must be positive".into()));
            }
        }
        if kind == LayerKind::TConv && stride.0 > 2 {
            return Err(NnError::BadSpec(format!(
                "transpose conv vertical stride {} outside 1..=2",
                stride.0
            )));
        }
        Ok(LayerSpec { kind, kernel, stride, channels_in, channels_out, padding })
    }

    pub fn conv(
        channels_in: usize,
        channels_out: usize,
        kernel: (usize, usize),
        stride_h: usize,
        padding: (usize, usize),
    ) -> Result<Self, NnError> {
        LayerSpec::new(LayerKind::Conv, kernel, (stride_h, 1), channels_in, channels_out, padding)
    }

    pub fn tconv(
        channels_in: usize,
        channels_out: usize,
        kernel: (usize, usize),
        stride_h: usize,
        padding: (usize, usize),
    ) -> Result<Self, NnError> {
        LayerSpec::new(LayerKind::TConv, kernel, (stride_h, 1), channels_in, channels_out, padding)
    }

    fn geom(&self) -> ConvGeom {
        ConvGeom {
            cin: self.channels_in,
            cout: self.channels_out,
            kh: self.kernel.0,
            kw: self.kernel.1,
            sh: self.stride.0,
            sw: self.stride.1,
            ph: self.padding.0,
            pw: self.padding.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Trainable, persists across steps.
    Param,
    /// Non-trainable persistent state (running statistics).
    Buffer,
    /// Rebuilt every forward pass; includes network inputs.
    Activation,
}

enum Op<S> {
    Leaf,
    Conv { x: NodeId, w: NodeId, b: NodeId, g: ConvGeom },
    /// `adj` is the geometry of the convolution this op is the adjoint of.
    TConv { x: NodeId, w: NodeId, adj: ConvGeom },
    BatchNorm { x: NodeId, gamma: NodeId, beta: NodeId, mean: Vec<S>, invstd: Vec<S>, frozen: bool },
    Relu { x: NodeId },
    Softmax { x: NodeId },
    Add { a: NodeId, b: NodeId },
    ConcatC { xs: Vec<NodeId> },
    ConcatH { xs: Vec<NodeId> },
    CropRows { x: NodeId, start: usize },
}

struct Node<S> {
    tensor: Tensor<S>,
    op: Op<S>,
    kind: NodeKind,
}

pub struct Graph<S: Scalar> {
    nodes: Vec<Node<S>>,
    persistent: usize,
    mode: Mode,
}

/// Disjoint mutable/shared access to two nodes of the same slice.
fn two<S>(nodes: &mut [Node<S>], m: usize, r: usize) -> (&mut Node<S>, &Node<S>) {
    assert_ne!(m, r);
    if m < r {
        let (a, b) = nodes.split_at_mut(r);
        (&mut a[m], &b[0])
    } else {
        let (a, b) = nodes.split_at_mut(m);
        (&mut b[0], &a[r])
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), persistent: 0, mode: Mode::Train }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Registers a trainable parameter. All persistent nodes must be
    /// created before the first activation.
    pub fn param(&mut self, t: Tensor<S>) -> NodeId {
        self.push_persistent(t, NodeKind::Param)
    }

    /// Registers persistent non-trainable state.
    pub fn buffer(&mut self, t: Tensor<S>) -> NodeId {
        self.push_persistent(t, NodeKind::Buffer)
    }

    fn push_persistent(&mut self, t: Tensor<S>, kind: NodeKind) -> NodeId {
        assert_eq!(
            self.nodes.len(),
            self.persistent,
            "persistent nodes must be created before activations"
        );
        self.nodes.push(Node { tensor: t, op: Op::Leaf, kind });
        self.persistent = self.nodes.len();
        NodeId(self.persistent - 1)
    }

    /// Feeds a value into the current pass.
    pub fn input(&mut self, t: Tensor<S>) -> NodeId {
        self.push(t, Op::Leaf)
    }

    fn push(&mut self, t: Tensor<S>, op: Op<S>) -> NodeId {
        self.nodes.push(Node { tensor: t, op, kind: NodeKind::Activation });
        NodeId(self.nodes.len() - 1)
    }

    /// Drops all activations and clears persistent gradients.
    pub fn reset(&mut self) {
        self.nodes.truncate(self.persistent);
        for n in &mut self.nodes {
            n.tensor.zero_grad();
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.0].kind
    }

    pub fn tensor(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].tensor
    }

    pub fn tensor_mut(&mut self, id: NodeId) -> &mut Tensor<S> {
        &mut self.nodes[id.0].tensor
    }

    /// Copies `values` into the node's gradient buffer.
    pub fn seed_grad(&mut self, id: NodeId, values: &[S]) {
        let g = &mut self.nodes[id.0].tensor.grad;
        assert_eq!(g.len(), values.len(), "seed gradient length mismatch");
        g.copy_from_slice(values);
    }

    fn chw(&self, id: NodeId, what: &str) -> Result<(usize, usize, usize), NnError> {
        let t = &self.nodes[id.0].tensor;
        if !t.is_chw() {
            return Err(NnError::ShapeMismatch(format!("{what} must be rank 3, got {:?}", t.shape())));
        }
        Ok((t.c(), t.h(), t.w()))
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, spec: &LayerSpec) -> Result<NodeId, NnError> {
        if spec.kind != LayerKind::Conv {
            return Err(NnError::BadSpec("conv2d needs a Conv spec".into()));
        }
        let g = spec.geom();
        let (c, h, wd) = self.chw(x, "conv input")?;
        if c != g.cin {
            return Err(NnError::ShapeMismatch(format!("conv expects {} input channels, got {c}", g.cin)));
        }
        let wshape = self.nodes[w.0].tensor.shape().to_vec();
        if wshape != [g.cout, g.cin, g.kh, g.kw] {
            return Err(NnError::ShapeMismatch(format!("conv weight shape {wshape:?}")));
        }
        if self.nodes[b.0].tensor.shape() != [g.cout] {
            return Err(NnError::ShapeMismatch("conv bias shape".into()));
        }
        if h + 2 * g.ph < g.kh || wd + 2 * g.pw < g.kw {
            return Err(NnError::ShapeMismatch(format!(
                "conv kernel {}x{} too large for {h}x{wd} input",
                g.kh, g.kw
            )));
        }
        let (oh, ow) = g.conv_out(h, wd);
        let mut out = Tensor::zeros(&[g.cout, oh, ow]);
        ops::conv_forward(
            &mut out.data,
            &self.nodes[x.0].tensor.data,
            h,
            wd,
            &self.nodes[w.0].tensor.data,
            Some(&self.nodes[b.0].tensor.data),
            &g,
        );
        Ok(self.push(out, Op::Conv { x, w, b, g }))
    }

    pub fn tconv2d(&mut self, x: NodeId, w: NodeId, spec: &LayerSpec) -> Result<NodeId, NnError> {
        if spec.kind != LayerKind::TConv {
            return Err(NnError::BadSpec("tconv2d needs a TConv spec".into()));
        }
        let g = spec.geom();
        let (c, h, wd) = self.chw(x, "tconv input")?;
        if c != g.cin {
            return Err(NnError::ShapeMismatch(format!("tconv expects {} input channels, got {c}", g.cin)));
        }
        let wshape = self.nodes[w.0].tensor.shape().to_vec();
        if wshape != [g.cin, g.cout, g.kh, g.kw] {
            return Err(NnError::ShapeMismatch(format!("tconv weight shape {wshape:?}")));
        }
        let (oh, ow) = g.tconv_out(h, wd);
        if oh == 0 || ow == 0 {
            return Err(NnError::ShapeMismatch("tconv output collapses to zero size".into()));
        }
        // The adjoint convolution maps the tconv *output* back to its input.
        let adj = ConvGeom { cin: g.cout, cout: g.cin, ..g };
        debug_assert_eq!(adj.conv_out(oh, ow), (h, wd));
        let mut out = Tensor::zeros(&[g.cout, oh, ow]);
        ops::conv_backward_input(
            &mut out.data,
            &self.nodes[w.0].tensor.data,
            &self.nodes[x.0].tensor.data,
            oh,
            ow,
            &adj,
        );
        Ok(self.push(out, Op::TConv { x, w, adj }))
    }

    /// Batch normalization over each channel of a single frame. Training
    /// mode normalizes by the frame's own statistics and folds them into
    /// the running buffers; eval mode normalizes by the buffers.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        running_mean: NodeId,
        running_var: NodeId,
        eps: f64,
        momentum: f64,
    ) -> Result<NodeId, NnError> {
        let (c, h, w) = self.chw(x, "batch norm input")?;
        for (id, name) in [(gamma, "gamma"), (beta, "beta"), (running_mean, "running mean"), (running_var, "running var")] {
            if self.nodes[id.0].tensor.shape() != [c] {
                return Err(NnError::ShapeMismatch(format!("batch norm {name} must have {c} entries")));
            }
        }
        let plane = h * w;
        let (mean, invstd, frozen) = match self.mode {
            Mode::Train => {
                let (mean, var, invstd) =
                    ops::batchnorm_stats(&self.nodes[x.0].tensor.data, c, plane, eps);
                let m = S::from_f64(momentum);
                let one_m = S::from_f64(1.0 - momentum);
                for (r, v) in self.nodes[running_mean.0].tensor.data.iter_mut().zip(&mean) {
                    *r = m * *r + one_m * *v;
                }
                for (r, v) in self.nodes[running_var.0].tensor.data.iter_mut().zip(&var) {
                    *r = m * *r + one_m * *v;
                }
                (mean, invstd, false)
            }
            Mode::Eval => {
                let mean = self.nodes[running_mean.0].tensor.data.clone();
                let invstd = self.nodes[running_var.0]
                    .tensor
                    .data
                    .iter()
                    .map(|v| S::ONE / (*v + S::from_f64(eps)).sqrt())
                    .collect();
                (mean, invstd, true)
            }
        };
        let mut out = Tensor::zeros(&[c, h, w]);
        ops::batchnorm_apply(
            &mut out.data,
            &self.nodes[x.0].tensor.data,
            &self.nodes[gamma.0].tensor.data,
            &self.nodes[beta.0].tensor.data,
            &mean,
            &invstd,
            plane,
        );
        Ok(self.push(out, Op::BatchNorm { x, gamma, beta, mean, invstd, frozen }))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let t = &self.nodes[x.0].tensor;
        let mut out = Tensor::zeros(t.shape());
        ops::relu_forward(&mut out.data, &t.data);
        self.push(out, Op::Relu { x })
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let (c, h, w) = self.chw(x, "softmax input")?;
        let mut out = Tensor::zeros(&[c, h, w]);
        ops::softmax_forward(&mut out.data, &self.nodes[x.0].tensor.data, c, h * w);
        Ok(self.push(out, Op::Softmax { x }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        if self.nodes[a.0].tensor.shape() != self.nodes[b.0].tensor.shape() {
            return Err(NnError::ShapeMismatch(format!(
                "add of {:?} and {:?}",
                self.nodes[a.0].tensor.shape(),
                self.nodes[b.0].tensor.shape()
            )));
        }
        let mut out = self.nodes[a.0].tensor.clone();
        out.zero_grad();
        for (o, v) in out.data.iter_mut().zip(&self.nodes[b.0].tensor.data) {
            *o += *v;
        }
        Ok(self.push(out, Op::Add { a, b }))
    }

    /// Stacks inputs along the channel axis.
    pub fn concat_c(&mut self, xs: &[NodeId]) -> Result<NodeId, NnError> {
        if xs.is_empty() {
            return Err(NnError::BadSpec("concat of zero inputs".into()));
        }
        let (_, h, w) = self.chw(xs[0], "concat input")?;
        let mut c_total = 0;
        for &x in xs {
            let (c, xh, xw) = self.chw(x, "concat input")?;
            if (xh, xw) != (h, w) {
                return Err(NnError::ShapeMismatch(format!(
                    "channel concat needs equal spatial sizes, got {h}x{w} and {xh}x{xw}"
                )));
            }
            c_total += c;
        }
        let mut data = Vec::with_capacity(c_total * h * w);
        for &x in xs {
            data.extend_from_slice(&self.nodes[x.0].tensor.data);
        }
        let out = Tensor::from_vec(&[c_total, h, w], data);
        Ok(self.push(out, Op::ConcatC { xs: xs.to_vec() }))
    }

    /// Stacks inputs top-to-bottom along the height axis.
    pub fn concat_h(&mut self, xs: &[NodeId]) -> Result<NodeId, NnError> {
        if xs.is_empty() {
            return Err(NnError::BadSpec("concat of zero inputs".into()));
        }
        let (c, _, w) = self.chw(xs[0], "concat input")?;
        let mut h_total = 0;
        for &x in xs {
            let (xc, xh, xw) = self.chw(x, "concat input")?;
            if (xc, xw) != (c, w) {
                return Err(NnError::ShapeMismatch(format!(
                    "height concat needs equal channels and width, got {c}x{w} and {xc}x{xw}"
                )));
            }
            h_total += xh;
        }
        let mut out = Tensor::zeros(&[c, h_total, w]);
        for ci in 0..c {
            let mut row = 0;
            for &x in xs {
                let t = &self.nodes[x.0].tensor;
                let xh = t.h();
                let src = &t.data[ci * xh * w..(ci + 1) * xh * w];
                out.data[(ci * h_total + row) * w..(ci * h_total + row) * w + xh * w]
                    .copy_from_slice(src);
                row += xh;
            }
        }
        Ok(self.push(out, Op::ConcatH { xs: xs.to_vec() }))
    }

    /// Keeps rows `[0, rows)` of every channel.
    pub fn crop_top(&mut self, x: NodeId, rows: usize) -> Result<NodeId, NnError> {
        self.crop_rows(x, 0, rows)
    }

    /// Keeps rows `[start, start + rows)` of every channel.
    pub fn crop_rows(&mut self, x: NodeId, start: usize, rows: usize) -> Result<NodeId, NnError> {
        let (c, h, w) = self.chw(x, "crop input")?;
        if rows == 0 || start + rows > h {
            return Err(NnError::ShapeMismatch(format!(
                "crop rows [{start}, {}) from height {h}",
                start + rows
            )));
        }
        let mut out = Tensor::zeros(&[c, rows, w]);
        for ci in 0..c {
            out.data[ci * rows * w..(ci + 1) * rows * w].copy_from_slice(
                &self.nodes[x.0].tensor.data[(ci * h + start) * w..(ci * h + start + rows) * w],
            );
        }
        Ok(self.push(out, Op::CropRows { x, start }))
    }

    /// Reverse sweep over all activations, accumulating into parent
    /// gradients. Seed output gradients first via [`Graph::seed_grad`].
    pub fn backprop(&mut self) {
        for i in (self.persistent..self.nodes.len()).rev() {
            let (left, right) = self.nodes.split_at_mut(i);
            let node = &right[0];
            let dy = &node.tensor.grad;
            match &node.op {
                Op::Leaf => {}
                Op::Conv { x, w, b, g } => {
                    let (hi, wi) = (left[x.0].tensor.h(), left[x.0].tensor.w());
                    {
                        let (xn, wn) = two(left, x.0, w.0);
                        ops::conv_backward_input(&mut xn.tensor.grad, &wn.tensor.data, dy, hi, wi, g);
                    }
                    {
                        let (wn, xn) = two(left, w.0, x.0);
                        ops::conv_backward_weight(&mut wn.tensor.grad, &xn.tensor.data, dy, hi, wi, g);
                    }
                    let plane = node.tensor.h() * node.tensor.w();
                    ops::conv_backward_bias(&mut left[b.0].tensor.grad, dy, plane);
                }
                Op::TConv { x, w, adj } => {
                    let (oh, ow) = (node.tensor.h(), node.tensor.w());
                    {
                        let (xn, wn) = two(left, x.0, w.0);
                        ops::conv_forward(&mut xn.tensor.grad, dy, oh, ow, &wn.tensor.data, None, adj);
                    }
                    {
                        let (wn, xn) = two(left, w.0, x.0);
                        ops::conv_backward_weight(&mut wn.tensor.grad, dy, &xn.tensor.data, oh, ow, adj);
                    }
                }
                Op::BatchNorm { x, gamma, beta, mean, invstd, frozen } => {
                    let plane = node.tensor.h() * node.tensor.w();
                    let gdata = left[gamma.0].tensor.data.clone();
                    let c = gdata.len();
                    let mut dgamma = vec![S::ZERO; c];
                    let mut dbeta = vec![S::ZERO; c];
                    {
                        let (xd, xg) = left[x.0].tensor.data_and_grad_mut();
                        if *frozen {
                            ops::batchnorm_backward_frozen(
                                xg, &mut dgamma, &mut dbeta, xd, &gdata, mean, invstd, dy, plane,
                            );
                        } else {
                            ops::batchnorm_backward(
                                xg, &mut dgamma, &mut dbeta, xd, &gdata, mean, invstd, dy, plane,
                            );
                        }
                    }
                    for (g, d) in left[gamma.0].tensor.grad.iter_mut().zip(&dgamma) {
                        *g += *d;
                    }
                    for (g, d) in left[beta.0].tensor.grad.iter_mut().zip(&dbeta) {
                        *g += *d;
                    }
                }
                Op::Relu { x } => {
                    let (xd, xg) = left[x.0].tensor.data_and_grad_mut();
                    ops::relu_backward(xg, xd, dy);
                }
                Op::Softmax { x } => {
                    let plane = node.tensor.h() * node.tensor.w();
                    ops::softmax_backward(
                        &mut left[x.0].tensor.grad,
                        &node.tensor.data,
                        dy,
                        node.tensor.c(),
                        plane,
                    );
                }
                Op::Add { a, b } => {
                    if a == b {
                        for (g, d) in left[a.0].tensor.grad.iter_mut().zip(dy) {
                            *g += *d + *d;
                        }
                    } else {
                        for (g, d) in left[a.0].tensor.grad.iter_mut().zip(dy) {
                            *g += *d;
                        }
                        for (g, d) in left[b.0].tensor.grad.iter_mut().zip(dy) {
                            *g += *d;
                        }
                    }
                }
                Op::ConcatC { xs } => {
                    let mut off = 0;
                    for &x in xs {
                        let xg = &mut left[x.0].tensor.grad;
                        let n = xg.len();
                        for (g, d) in xg.iter_mut().zip(&dy[off..off + n]) {
                            *g += *d;
                        }
                        off += n;
                    }
                }
                Op::ConcatH { xs } => {
                    let (c, h_total, w) = (node.tensor.c(), node.tensor.h(), node.tensor.w());
                    let mut row = 0;
                    for &x in xs {
                        let xt = &mut left[x.0].tensor;
                        let xh = xt.h();
                        for ci in 0..c {
                            let src = &dy[(ci * h_total + row) * w..(ci * h_total + row) * w + xh * w];
                            for (g, d) in xt.grad[ci * xh * w..(ci + 1) * xh * w].iter_mut().zip(src) {
                                *g += *d;
                            }
                        }
                        row += xh;
                    }
                }
                Op::CropRows { x, start } => {
                    let (c, rows, w) = (node.tensor.c(), node.tensor.h(), node.tensor.w());
                    let xt = &mut left[x.0].tensor;
                    let xh = xt.h();
                    for ci in 0..c {
                        let dst = &mut xt.grad[(ci * xh + start) * w..(ci * xh + start + rows) * w];
                        for (g, d) in dst.iter_mut().zip(&dy[ci * rows * w..(ci + 1) * rows * w]) {
                            *g += *d;
                        }
                    }
                }
            }
        }
    }
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Graph::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_stride_is_rejected_everywhere() {
        for kind in [
            LayerKind::Conv,
            LayerKind::TConv,
            LayerKind::BatchNorm,
            LayerKind::ReLU,
            LayerKind::Concat,
            LayerKind::Add,
            LayerKind::Softmax,
        ] {
            let err = LayerSpec::new(kind, (3, 3), (1, 2), 4, 4, (1, 1)).unwrap_err();
            assert!(matches!(err, NnError::HorizontalStride(2)), "{kind:?}");
        }
        assert!(LayerSpec::conv(4, 4, (3, 3), 2, (1, 1)).is_ok());
    }

    #[test]
    fn tconv_stride_limited_to_two() {
        assert!(LayerSpec::tconv(4, 4, (2, 1), 2, (0, 0)).is_ok());
        assert!(LayerSpec::tconv(4, 4, (3, 1), 3, (0, 0)).is_err());
    }

    #[test]
    fn residual_add_accumulates_both_paths() {
        let mut g = Graph::<f64>::new();
        let a = g.input(Tensor::from_vec(&[1, 1, 2], vec![1.0, 2.0]));
        let b = g.input(Tensor::from_vec(&[1, 1, 2], vec![10.0, 20.0]));
        let s = g.add(a, b).unwrap();
        assert_eq!(g.tensor(s).data, vec![11.0, 22.0]);
        g.seed_grad(s, &[1.0, 3.0]);
        g.backprop();
        assert_eq!(g.tensor(a).grad, vec![1.0, 3.0]);
        assert_eq!(g.tensor(b).grad, vec![1.0, 3.0]);
    }

    #[test]
    fn height_concat_stacks_and_routes_gradients() {
        let mut g = Graph::<f64>::new();
        let top = g.input(Tensor::from_vec(&[2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]));
        let bot = g.input(Tensor::from_vec(&[2, 2, 2], (10..18).map(f64::from).collect()));
        let cat = g.concat_h(&[top, bot]).unwrap();
        assert_eq!(g.tensor(cat).shape(), &[2, 3, 2]);
        assert_eq!(
            g.tensor(cat).data,
            vec![1.0, 2.0, 10.0, 11.0, 12.0, 13.0, 3.0, 4.0, 14.0, 15.0, 16.0, 17.0]
        );
        let seed: Vec<f64> = (0..12).map(f64::from).collect();
        g.seed_grad(cat, &seed);
        g.backprop();
        assert_eq!(g.tensor(top).grad, vec![0.0, 1.0, 6.0, 7.0]);
        assert_eq!(g.tensor(bot).grad, vec![2.0, 3.0, 4.0, 5.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn sixteen_plus_fortyeight_rows_concat_to_sixtyfour() {
        let mut g = Graph::<f32>::new();
        let a = g.input(Tensor::zeros(&[4, 16, 8]));
        let b = g.input(Tensor::zeros(&[4, 48, 8]));
        let cat = g.concat_h(&[a, b]).unwrap();
        assert_eq!(g.tensor(cat).shape(), &[4, 64, 8]);
    }

    #[test]
    fn reset_drops_activations_and_keeps_params() {
        let mut g = Graph::<f32>::new();
        let p = g.param(Tensor::filled(&[2], 5.0));
        let _ = g.input(Tensor::zeros(&[1, 1, 1]));
        assert_eq!(g.len(), 2);
        g.tensor_mut(p).grad[0] = 3.0;
        g.reset();
        assert_eq!(g.len(), 1);
        assert_eq!(g.tensor(p).data, vec![5.0, 5.0]);
        assert_eq!(g.tensor(p).grad, vec![0.0, 0.0]);
    }

    #[test]
    fn crop_keeps_top_rows() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::from_vec(&[1, 3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let c = g.crop_top(x, 2).unwrap();
        assert_eq!(g.tensor(c).data, vec![1.0, 2.0, 3.0, 4.0]);
        g.seed_grad(c, &[1.0, 1.0, 1.0, 1.0]);
        g.backprop();
        assert_eq!(g.tensor(x).grad, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn crop_band_takes_interior_rows() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::from_vec(&[2, 3, 1], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let c = g.crop_rows(x, 1, 2).unwrap();
        assert_eq!(g.tensor(c).data, vec![2.0, 3.0, 5.0, 6.0]);
        g.seed_grad(c, &[1.0, 2.0, 3.0, 4.0]);
        g.backprop();
        assert_eq!(g.tensor(x).grad, vec![0.0, 1.0, 2.0, 0.0, 3.0, 4.0]);
        assert!(g.crop_rows(x, 2, 2).is_err());
    }
}
