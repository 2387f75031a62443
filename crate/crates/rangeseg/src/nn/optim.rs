//! Stochastic gradient descent with classical momentum:
//! v <- momentum * v + g, w <- w - lr * v.

use super::graph::{Graph, NodeId};
use super::tensor::Scalar;

pub struct SgdMomentum<S> {
    lr: S,
    momentum: S,
    velocity: Vec<Vec<S>>,
}

impl<S: Scalar> SgdMomentum<S> {
    pub fn new(lr: f64, momentum: f64) -> Self {
        SgdMomentum { lr: S::from_f64(lr), momentum: S::from_f64(momentum), velocity: Vec::new() }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = S::from_f64(lr);
    }

    pub fn set_momentum(&mut self, momentum: f64) {
        self.momentum = S::from_f64(momentum);
    }

    /// Applies one update to every listed parameter. The parameter list
    /// must be identical across calls; velocity is tracked positionally.
    pub fn step(&mut self, graph: &mut Graph<S>, params: &[NodeId]) {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|&p| vec![S::ZERO; graph.tensor(p).numel()]).collect();
        }
        assert_eq!(self.velocity.len(), params.len(), "parameter list changed between steps");
        for (&p, vel) in params.iter().zip(&mut self.velocity) {
            let t = graph.tensor_mut(p);
            assert_eq!(vel.len(), t.numel(), "parameter size changed between steps");
            for ((v, g), w) in vel.iter_mut().zip(&t.grad).zip(&mut t.data) {
                *v = self.momentum * *v + *g;
                *w -= self.lr * *v;
            }
        }
    }
}
