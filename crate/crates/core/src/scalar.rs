//! Scalar abstraction shared by the tree functionals.
//!
//! Functionals that only need field arithmetic (the measure `A_t`, toll
//! sums) are generic over [`Scalar`], which covers `f32`, `f64` and exact
//! rationals. Continuum quantities (excursions, contour integrals) need
//! transcendental functions and are generic over [`Real`] instead.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};

/// A field-like scalar that can represent the ratios `|t_v| / |t|`.
pub trait Scalar: Num + NumAssign + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// `num / den` in this scalar type.
    fn from_ratio(num: u64, den: u64) -> Self;

    /// `self^a`. Exact scalar types only support integral exponents.
    fn pow_real(&self, a: f64) -> Self;

    fn to_f64_lossy(&self) -> f64;
}

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Scalar + Float + FromPrimitive + ToPrimitive + NumAssign + Copy + Default {
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 representable")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        <Self as FromPrimitive>::from_usize(x).expect("usize representable")
    }
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn from_ratio(num: u64, den: u64) -> Self {
                num as $t / den as $t
            }

            #[inline]
            fn pow_real(&self, a: f64) -> Self {
                self.powf(a as $t)
            }

            #[inline]
            fn to_f64_lossy(&self) -> f64 {
                *self as f64
            }
        }

        impl Real for $t {}
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

impl Scalar for Ratio<i128> {
    fn from_ratio(num: u64, den: u64) -> Self {
        Ratio::new(num as i128, den as i128)
    }

    fn pow_real(&self, a: f64) -> Self {
        assert!(
            a.fract() == 0.0 && a.abs() <= i32::MAX as f64,
            "exact rationals only support integral exponents, got {a}"
        );
        num_traits::Pow::pow(*self, a as i32)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.numer().to_f64().unwrap_or(f64::NAN) / self.denom().to_f64().unwrap_or(f64::NAN)
    }
}

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how the values were produced.
pub fn pairwise_sum<F: Real>(xs: &[F]) -> F {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().fold(F::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
