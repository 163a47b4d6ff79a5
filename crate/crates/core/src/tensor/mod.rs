//! Dense tensors and reverse-mode differentiation.

mod adam;
mod gradcheck;
mod matrix;
mod tape;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use matrix::Matrix;
pub(crate) use matrix::dot;
pub use tape::{Fault, Gradients, Tape, Var};

/// Floating-point element type usable on the tape (`f32` or `f64`).
pub trait Real:
    Float + AddAssign + SubAssign + MulAssign + Sum + Debug + Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_usize(v: usize) -> Self;
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_usize(v: usize) -> Self {
        v as f64
    }
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_usize(v: usize) -> Self {
        v as f32
    }
}
