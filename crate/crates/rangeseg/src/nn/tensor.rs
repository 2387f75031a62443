//! Dense tensors with a paired gradient buffer.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Element type of the engine. Training runs at `f32`; gradient checks
/// instantiate the same code at `f64`.
pub trait Scalar:
    Copy
    + PartialOrd
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn abs(self) -> Self;
    fn maxv(self, other: Self) -> Self;
    fn minv(self, other: Self) -> Self;
    fn is_finite(self) -> bool;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn sqrt(self) -> Self {
                self.sqrt()
            }
            fn exp(self) -> Self {
                self.exp()
            }
            fn ln(self) -> Self {
                self.ln()
            }
            fn abs(self) -> Self {
                self.abs()
            }
            fn maxv(self, other: Self) -> Self {
                self.max(other)
            }
            fn minv(self, other: Self) -> Self {
                self.min(other)
            }
            fn is_finite(self) -> bool {
                self.is_finite()
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// A dense value buffer plus a same-shape gradient buffer.
///
/// Feature maps are rank 3, `(channels, height, width)`, stored
/// channel-major with row-major planes. Conv weights are rank 4
/// `(c_out, c_in, kh, kw)`; biases and per-channel scales rank 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    pub data: Vec<S>,
    pub grad: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![S::ZERO; n], grad: vec![S::ZERO; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data length mismatch");
        let grad = vec![S::ZERO; data.len()];
        Tensor { shape: shape.to_vec(), data, grad }
    }

    pub fn filled(shape: &[usize], v: S) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![v; n], grad: vec![S::ZERO; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Channel count of a rank-3 tensor.
    pub fn c(&self) -> usize {
        self.shape[0]
    }

    pub fn h(&self) -> usize {
        self.shape[1]
    }

    pub fn w(&self) -> usize {
        self.shape[2]
    }

    pub fn is_chw(&self) -> bool {
        self.shape.len() == 3
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = S::ZERO);
    }

    /// Simultaneous read of the value and write of the gradient.
    pub fn data_and_grad_mut(&mut self) -> (&[S], &mut [S]) {
        (&self.data, &mut self.grad)
    }

    /// Lossy elementwise cast, gradients not carried over.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor::from_vec(&self.shape, self.data.iter().map(|v| T::from_f64(v.to_f64())).collect())
    }
}
