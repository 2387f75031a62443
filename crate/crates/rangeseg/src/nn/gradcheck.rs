//! Finite-difference verification of analytic gradients.
//!
//! Graphs are rebuilt from scratch for every perturbed evaluation, so the
//! checked closure must construct the same topology whenever it is handed
//! the same tensors. All checking runs at f64; f32 rounding drowns the
//! central-difference signal.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient of a scalar function of a flat vector.
pub fn finite_diff<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let keep = probe[i];
        probe[i] = keep + h;
        let fp = f(&probe);
        probe[i] = keep - h;
        let fm = f(&probe);
        probe[i] = keep;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Worst relative disagreement between two gradient vectors. The
/// denominator is floored so near-zero entries compare absolutely.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Fixed pseudo-random cotangent so the check exercises the full Jacobian
/// rather than a uniform row sum.
fn seed_direction(n: usize, salt: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ salt);
    (0..n).map(|_| rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

/// Checks a graph builder's analytic gradients against central finite
/// differences and returns the worst relative error over all entries of
/// all checked tensors.
///
/// `build` is handed a fresh graph plus the current tensor values and must
/// return the output node together with one node per input tensor, in
/// order. The scalar objective is a fixed random weighting of the output.
pub fn check_builder<F>(tensors: &[Tensor<f64>], mut build: F, h: f64) -> f64
where
    F: FnMut(&mut Graph<f64>, &[Tensor<f64>]) -> (NodeId, Vec<NodeId>),
{
    let mut g = Graph::new();
    let (out, ids) = build(&mut g, tensors);
    assert_eq!(ids.len(), tensors.len(), "one checked node per tensor");
    let seed = seed_direction(g.tensor(out).numel(), tensors.iter().map(Tensor::numel).sum::<usize>() as u64);
    g.seed_grad(out, &seed);
    g.backprop();
    let analytic: Vec<Vec<f64>> = ids.iter().map(|&id| g.tensor(id).grad.clone()).collect();

    let mut eval = |ts: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let (out, _) = build(&mut g, ts);
        g.tensor(out).data.iter().zip(&seed).map(|(v, s)| v * s).sum()
    };

    let mut worst = 0.0f64;
    let mut scratch = tensors.to_vec();
    for ti in 0..tensors.len() {
        let mut numeric = vec![0.0; tensors[ti].numel()];
        for j in 0..numeric.len() {
            let keep = scratch[ti].data[j];
            scratch[ti].data[j] = keep + h;
            let fp = eval(&scratch);
            scratch[ti].data[j] = keep - h;
            let fm = eval(&scratch);
            scratch[ti].data[j] = keep;
            numeric[j] = (fp - fm) / (2.0 * h);
        }
        worst = worst.max(max_rel_err(&analytic[ti], &numeric));
    }
    worst
}

/// Uniform values in [-1, 1] for gradient-check inputs.
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::LayerSpec;

    #[test]
    fn finite_diff_matches_quadratic() {
        let x = vec![1.0, -2.0, 3.0];
        let g = finite_diff(|v| v.iter().map(|a| a * a).sum(), &x, 1e-5);
        assert!(max_rel_err(&[2.0, -4.0, 6.0], &g) < 1e-8);
    }

    #[test]
    fn conv_builder_gradients_agree() {
        let spec = LayerSpec::conv(2, 3, (3, 3), 1, (1, 1)).unwrap();
        let tensors = vec![
            random_tensor(&[2, 4, 5], 1),
            random_tensor(&[3, 2, 3, 3], 2),
            random_tensor(&[3], 3),
        ];
        let err = check_builder(
            &tensors,
            |g, ts| {
                let x = g.input(ts[0].clone());
                let w = g.input(ts[1].clone());
                let b = g.input(ts[2].clone());
                let y = g.conv2d(x, w, b, &spec).unwrap();
                (y, vec![x, w, b])
            },
            DEFAULT_STEP,
        );
        assert!(err < 1e-4, "conv gradient error {err}");
    }
}
