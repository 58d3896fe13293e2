//! Floating-point scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Real scalar type the forward pass, solvers and metrics are generic over.
///
/// Implemented for `f32` and `f64`. Traces on disk are always `f64`, so
/// conversions go through [`Scalar::of`] and [`Scalar::to_f64_lossy`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Logistic sigmoid evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// `ln(1 + exp(x))` without overflow.
#[inline]
pub fn softplus<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// In-place numerically stable softmax. Returns `ln(sum(exp(x)))`.
pub fn softmax_in_place<S: Scalar>(xs: &mut [S]) -> S {
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    let mut total = S::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
    max + total.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_matches_definition() {
        for &x in &[-30.0f64, -2.0, 0.0, 0.5, 40.0] {
            let direct = 1.0 / (1.0 + (-x).exp());
            assert!((sigmoid(x) - direct).abs() < 1e-15);
        }
        assert_eq!(sigmoid(3.0f64.ln()), 0.75);
    }

    #[test]
    fn softplus_is_log_one_plus_exp() {
        for &x in &[-20.0f64, -1.0, 0.0, 3.0, 50.0] {
            assert!((softplus(x) - (1.0 + x.exp()).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_sums_to_one_in_f32_and_f64() {
        let mut a = [1.0f32, 2.0, 3.0];
        softmax_in_place(&mut a);
        assert!((a.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        let mut b = [1000.0f64, 1000.0];
        let lse = softmax_in_place(&mut b);
        assert_eq!(b, [0.5, 0.5]);
        assert!((lse - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }
}
