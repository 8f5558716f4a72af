//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All model code is written against [`Scalar`] so that it can run in `f32`
//! (compact sweeps) or `f64` (reference runs, calibration). The crate root
//! exposes `f64` aliases for the common types.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant. Panics only for values the type cannot hold.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw in `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw in `[lo, hi]`; returns `lo` for an empty range.
    #[inline]
    fn sample_between<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * Self::sample_unit(rng)
    }
}

macro_rules! impl_scalar {
    ($($t:ty),*) => {
        $(
            impl Scalar for $t {
                #[inline]
                fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                    rng.sample(StandardNormal)
                }

                #[inline]
                fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                    rng.random::<$t>()
                }
            }
        )*
    };
}

impl_scalar!(f32, f64);

/// `min(max(x, lo), hi)` without the NaN-propagation surprises of `Float::clamp`.
#[inline]
pub fn clip<T: Scalar>(x: T, lo: T, hi: T) -> T {
    if x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_draws_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let u = f32::sample_unit(&mut rng);
            assert!((0.0..1.0).contains(&u));
            let v = f64::sample_between(&mut rng, 0.95, 1.03);
            assert!((0.95..=1.03).contains(&v));
        }
    }

    #[test]
    fn clip_bounds() {
        assert_eq!(clip(1.5_f64, 0.0, 1.0), 1.0);
        assert_eq!(clip(-0.5_f32, 0.0, 1.0), 0.0);
        assert_eq!(clip(0.25_f64, 0.0, 1.0), 0.25);
    }
}
