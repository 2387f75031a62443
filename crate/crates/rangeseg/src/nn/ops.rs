//! Raw forward/backward kernels over flat channel-major buffers.
//!
//! Backward kernels accumulate into their destination buffers, so a value
//! reused by several consumers collects all contributions. Transpose
//! convolution is implemented as the exact adjoint of convolution: its
//! forward pass is the convolution input-gradient scatter and vice versa,
//! which makes `<conv(x), y> == <x, tconv(y)>` hold by construction.

use super::tensor::Scalar;

/// Convolution geometry. `cin`/`cout` describe the op's own input/output;
/// for a transpose convolution the underlying kernel runs with the roles
/// swapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub cin: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
}

impl ConvGeom {
    /// Output size of a convolution over an `h` x `w` input.
    pub fn conv_out(&self, h: usize, w: usize) -> (usize, usize) {
        ((h + 2 * self.ph - self.kh) / self.sh + 1, (w + 2 * self.pw - self.kw) / self.sw + 1)
    }

    /// Output size of a transpose convolution over an `h` x `w` input.
    pub fn tconv_out(&self, h: usize, w: usize) -> (usize, usize) {
        ((h - 1) * self.sh + self.kh - 2 * self.ph, (w - 1) * self.sw + self.kw - 2 * self.pw)
    }
}

/// ys += a * xs, fixed evaluation order.
#[inline]
fn axpy<S: Scalar>(a: S, xs: &[S], ys: &mut [S]) {
    for (y, x) in ys.iter_mut().zip(xs) {
        *y += a * *x;
    }
}

/// Dot product with eight independent accumulators. The fixed summation
/// order keeps results bit-identical run to run.
#[inline]
fn dot<S: Scalar>(xs: &[S], ys: &[S]) -> S {
    debug_assert_eq!(xs.len(), ys.len());
    let mut acc = [S::ZERO; 8];
    let (xc, xr) = xs.split_at(xs.len() - xs.len() % 8);
    let (yc, yr) = ys.split_at(xc.len());
    for (xa, ya) in xc.chunks_exact(8).zip(yc.chunks_exact(8)) {
        for i in 0..8 {
            acc[i] += xa[i] * ya[i];
        }
    }
    let mut tail = S::ZERO;
    for (x, y) in xr.iter().zip(yr) {
        tail += *x * *y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[inline]
fn vsum<S: Scalar>(xs: &[S]) -> S {
    let mut acc = [S::ZERO; 8];
    let (xc, xr) = xs.split_at(xs.len() - xs.len() % 8);
    for xa in xc.chunks_exact(8) {
        for i in 0..8 {
            acc[i] += xa[i];
        }
    }
    let mut tail = S::ZERO;
    for x in xr {
        tail += *x;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// out += conv(x, weight) + bias. `out` is (cout, oh, ow).
pub fn conv_forward<S: Scalar>(
    out: &mut [S],
    x: &[S],
    h: usize,
    w: usize,
    weight: &[S],
    bias: Option<&[S]>,
    g: &ConvGeom,
) {
    let (oh, ow) = g.conv_out(h, w);
    debug_assert_eq!(x.len(), g.cin * h * w);
    debug_assert_eq!(out.len(), g.cout * oh * ow);
    debug_assert_eq!(weight.len(), g.cout * g.cin * g.kh * g.kw);
    if let Some(b) = bias {
        for co in 0..g.cout {
            let bv = b[co];
            for v in &mut out[co * oh * ow..(co + 1) * oh * ow] {
                *v += bv;
            }
        }
    }
    for co in 0..g.cout {
        for ci in 0..g.cin {
            let xc = ci * h * w;
            let wc = (co * g.cin + ci) * g.kh * g.kw;
            for ky in 0..g.kh {
                let ky_off = ky as isize - g.ph as isize;
                for oy in 0..oh {
                    let iy = oy as isize * g.sh as isize + ky_off;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let xrow = xc + iy as usize * w;
                    let orow = co * oh * ow + oy * ow;
                    for kx in 0..g.kw {
                        let wv = weight[wc + ky * g.kw + kx];
                        let kx_off = kx as isize - g.pw as isize;
                        if g.sw == 1 {
                            let o0 = (-kx_off).max(0) as usize;
                            let o1 = ((w as isize - kx_off).min(ow as isize)).max(0) as usize;
                            if o0 >= o1 {
                                continue;
                            }
                            let x0 = (o0 as isize + kx_off) as usize;
                            axpy(wv, &x[xrow + x0..xrow + x0 + (o1 - o0)], &mut out[orow + o0..orow + o1]);
                        } else {
                            for ox in 0..ow {
                                let ix = ox as isize * g.sw as isize + kx_off;
                                if ix >= 0 && ix < w as isize {
                                    out[orow + ox] += wv * x[xrow + ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// dx += the input gradient of `conv(x, weight)` given output gradient `dy`.
/// `h`/`w` are the shape of `x`; also the forward kernel of tconv.
pub fn conv_backward_input<S: Scalar>(
    dx: &mut [S],
    weight: &[S],
    dy: &[S],
    h: usize,
    w: usize,
    g: &ConvGeom,
) {
    let (oh, ow) = g.conv_out(h, w);
    debug_assert_eq!(dx.len(), g.cin * h * w);
    debug_assert_eq!(dy.len(), g.cout * oh * ow);
    for ci in 0..g.cin {
        for co in 0..g.cout {
            let wc = (co * g.cin + ci) * g.kh * g.kw;
            for ky in 0..g.kh {
                let ky_off = ky as isize - g.ph as isize;
                for oy in 0..oh {
                    let iy = oy as isize * g.sh as isize + ky_off;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let xrow = ci * h * w + iy as usize * w;
                    let yrow = co * oh * ow + oy * ow;
                    for kx in 0..g.kw {
                        let wv = weight[wc + ky * g.kw + kx];
                        let kx_off = kx as isize - g.pw as isize;
                        if g.sw == 1 {
                            let o0 = (-kx_off).max(0) as usize;
                            let o1 = ((w as isize - kx_off).min(ow as isize)).max(0) as usize;
                            if o0 >= o1 {
                                continue;
                            }
                            let x0 = (o0 as isize + kx_off) as usize;
                            axpy(wv, &dy[yrow + o0..yrow + o1], &mut dx[xrow + x0..xrow + x0 + (o1 - o0)]);
                        } else {
                            for ox in 0..ow {
                                let ix = ox as isize * g.sw as isize + kx_off;
                                if ix >= 0 && ix < w as isize {
                                    dx[xrow + ix as usize] += wv * dy[yrow + ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// dw += the weight gradient of `conv(x, weight)` given output gradient `dy`.
pub fn conv_backward_weight<S: Scalar>(
    dw: &mut [S],
    x: &[S],
    dy: &[S],
    h: usize,
    w: usize,
    g: &ConvGeom,
) {
    let (oh, ow) = g.conv_out(h, w);
    debug_assert_eq!(dw.len(), g.cout * g.cin * g.kh * g.kw);
    for co in 0..g.cout {
        for ci in 0..g.cin {
            let wc = (co * g.cin + ci) * g.kh * g.kw;
            for ky in 0..g.kh {
                let ky_off = ky as isize - g.ph as isize;
                for kx in 0..g.kw {
                    let kx_off = kx as isize - g.pw as isize;
                    let mut acc = S::ZERO;
                    for oy in 0..oh {
                        let iy = oy as isize * g.sh as isize + ky_off;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let xrow = ci * h * w + iy as usize * w;
                        let yrow = co * oh * ow + oy * ow;
                        if g.sw == 1 {
                            let o0 = (-kx_off).max(0) as usize;
                            let o1 = ((w as isize - kx_off).min(ow as isize)).max(0) as usize;
                            if o0 >= o1 {
                                continue;
                            }
                            let x0 = (o0 as isize + kx_off) as usize;
                            acc += dot(&dy[yrow + o0..yrow + o1], &x[xrow + x0..xrow + x0 + (o1 - o0)]);
                        } else {
                            for ox in 0..ow {
                                let ix = ox as isize * g.sw as isize + kx_off;
                                if ix >= 0 && ix < w as isize {
                                    acc += dy[yrow + ox] * x[xrow + ix as usize];
                                }
                            }
                        }
                    }
                    dw[wc + ky * g.kw + kx] += acc;
                }
            }
        }
    }
}

/// db += per-channel sums of `dy`.
pub fn conv_backward_bias<S: Scalar>(db: &mut [S], dy: &[S], plane: usize) {
    for (co, d) in db.iter_mut().enumerate() {
        *d += vsum(&dy[co * plane..(co + 1) * plane]);
    }
}

/// Per-channel statistics of the current frame, returned for the running
/// averages: (mean, biased variance, 1/sqrt(var + eps)) per channel.
pub fn batchnorm_stats<S: Scalar>(x: &[S], c: usize, plane: usize, eps: f64) -> (Vec<S>, Vec<S>, Vec<S>) {
    let n = S::from_f64(plane as f64);
    let mut means = Vec::with_capacity(c);
    let mut vars = Vec::with_capacity(c);
    let mut invstds = Vec::with_capacity(c);
    for ci in 0..c {
        let xs = &x[ci * plane..(ci + 1) * plane];
        let mean = vsum(xs) / n;
        let mut acc = [S::ZERO; 8];
        let (xc, xr) = xs.split_at(xs.len() - xs.len() % 8);
        for xa in xc.chunks_exact(8) {
            for i in 0..8 {
                let d = xa[i] - mean;
                acc[i] += d * d;
            }
        }
        let mut tail = S::ZERO;
        for v in xr {
            let d = *v - mean;
            tail += d * d;
        }
        let var =
            (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail) / n;
        means.push(mean);
        vars.push(var);
        invstds.push(S::ONE / (var + S::from_f64(eps)).sqrt());
    }
    (means, vars, invstds)
}

/// out = gamma * (x - mean) * invstd + beta, channel by channel.
pub fn batchnorm_apply<S: Scalar>(
    out: &mut [S],
    x: &[S],
    gamma: &[S],
    beta: &[S],
    mean: &[S],
    invstd: &[S],
    plane: usize,
) {
    for ci in 0..gamma.len() {
        let (g, b, m, s) = (gamma[ci], beta[ci], mean[ci], invstd[ci]);
        let xs = &x[ci * plane..(ci + 1) * plane];
        let os = &mut out[ci * plane..(ci + 1) * plane];
        for (o, v) in os.iter_mut().zip(xs) {
            *o = g * (*v - m) * s + b;
        }
    }
}

/// Backward through training-mode batch norm (statistics depend on x).
pub fn batchnorm_backward<S: Scalar>(
    dx: &mut [S],
    dgamma: &mut [S],
    dbeta: &mut [S],
    x: &[S],
    gamma: &[S],
    mean: &[S],
    invstd: &[S],
    dy: &[S],
    plane: usize,
) {
    let n = S::from_f64(plane as f64);
    for ci in 0..gamma.len() {
        let (m, s) = (mean[ci], invstd[ci]);
        let xs = &x[ci * plane..(ci + 1) * plane];
        let dys = &dy[ci * plane..(ci + 1) * plane];
        let sum_dy = vsum(dys);
        let mut dot_xhat = S::ZERO;
        for (v, d) in xs.iter().zip(dys) {
            dot_xhat += (*v - m) * s * *d;
        }
        dgamma[ci] += dot_xhat;
        dbeta[ci] += sum_dy;
        let mean_dy = sum_dy / n;
        let mean_dot = dot_xhat / n;
        let gs = gamma[ci] * s;
        let dxs = &mut dx[ci * plane..(ci + 1) * plane];
        for i in 0..plane {
            let xhat = (xs[i] - m) * s;
            dxs[i] += gs * (dys[i] - mean_dy - xhat * mean_dot);
        }
    }
}

/// Backward through inference-mode batch norm (statistics are constants).
pub fn batchnorm_backward_frozen<S: Scalar>(
    dx: &mut [S],
    dgamma: &mut [S],
    dbeta: &mut [S],
    x: &[S],
    gamma: &[S],
    mean: &[S],
    invstd: &[S],
    dy: &[S],
    plane: usize,
) {
    for ci in 0..gamma.len() {
        let (m, s) = (mean[ci], invstd[ci]);
        let xs = &x[ci * plane..(ci + 1) * plane];
        let dys = &dy[ci * plane..(ci + 1) * plane];
        let mut dot_xhat = S::ZERO;
        for (v, d) in xs.iter().zip(dys) {
            dot_xhat += (*v - m) * s * *d;
        }
        dgamma[ci] += dot_xhat;
        dbeta[ci] += vsum(dys);
        axpy(gamma[ci] * s, dys, &mut dx[ci * plane..(ci + 1) * plane]);
    }
}

pub fn relu_forward<S: Scalar>(out: &mut [S], x: &[S]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o = v.maxv(S::ZERO);
    }
}

pub fn relu_backward<S: Scalar>(dx: &mut [S], x: &[S], dy: &[S]) {
    for i in 0..x.len() {
        if x[i] > S::ZERO {
            dx[i] += dy[i];
        }
    }
}

/// Channel-axis softmax per spatial position.
pub fn softmax_forward<S: Scalar>(out: &mut [S], x: &[S], c: usize, plane: usize) {
    for p in 0..plane {
        let mut m = x[p];
        for ci in 1..c {
            m = m.maxv(x[ci * plane + p]);
        }
        let mut z = S::ZERO;
        for ci in 0..c {
            let e = (x[ci * plane + p] - m).exp();
            out[ci * plane + p] = e;
            z += e;
        }
        for ci in 0..c {
            out[ci * plane + p] = out[ci * plane + p] / z;
        }
    }
}

/// dx += softmax backward; `y` is the forward output.
pub fn softmax_backward<S: Scalar>(dx: &mut [S], y: &[S], dy: &[S], c: usize, plane: usize) {
    for p in 0..plane {
        let mut dotv = S::ZERO;
        for ci in 0..c {
            dotv += y[ci * plane + p] * dy[ci * plane + p];
        }
        for ci in 0..c {
            let i = ci * plane + p;
            dx[i] += y[i] * (dy[i] - dotv);
        }
    }
}
