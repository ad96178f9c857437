//! Floating-point scalar abstraction.
//!
//! All numeric kernels in this crate are generic over [`Real`], a trait alias
//! bundling the `num-traits` capabilities the algorithms actually use.  The
//! two inhabitants that matter are `f32` and `f64`; concrete aliases for the
//! common `f64` instantiations live at the crate root.
//!
//! The helpers below exist because constants and special functions are
//! evaluated in `f64` internally (`f64` carries enough precision for every
//! tolerance in this crate) and then converted into the working scalar once.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum<Self> + Debug + Display + Send + Sync + 'static
{
    /// Convert from `f64`, rounding to the nearest representable value.
    ///
    /// Infinities map to infinities; this only panics for values a float
    /// type genuinely cannot represent, which none of the call sites
    /// produce.
    fn of(x: f64) -> Self {
        if x.is_nan() {
            return Self::nan();
        }
        if x == f64::INFINITY {
            return Self::infinity();
        }
        if x == f64::NEG_INFINITY {
            return Self::neg_infinity();
        }
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 representable in scalar type")
    }

    /// Widen to `f64` (exact for `f32` and `f64`).
    fn wide(self) -> f64 {
        self.to_f64().expect("scalar widens to f64")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum<T> + Debug + Display + Send + Sync + 'static
{
}

/// Sum with pairwise reduction: error grows like `O(log n)` rather than
/// `O(n)`, which keeps 1e5-particle means trustworthy at `f32` too.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    if xs.len() <= 8 {
        return xs.iter().copied().fold(T::zero(), |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(<f64 as Real>::of(1.5), 1.5);
        assert_eq!(<f32 as Real>::of(1.5), 1.5f32);
        assert_eq!(1.25f32.wide(), 1.25f64);
        assert!(<f64 as Real>::of(f64::INFINITY).is_infinite());
        assert!(<f32 as Real>::of(f64::NAN).is_nan());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs = [0.1f64, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }
}
