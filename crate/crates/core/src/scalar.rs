use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the classifier and linear-algebra code.
///
/// Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 value representable in scalar type")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize value representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine tolerance used for "close enough" comparisons.
    fn tolerance() -> Self;
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }
}

/// Numerically stable `log(sum(exp(x)))`.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    if max == T::infinity() {
        return max;
    }
    let s = xs.iter().fold(T::zero(), |acc, &x| acc + (x - max).exp());
    max + s.ln()
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
