//! Scalar abstraction: the numeric core is generic over the floating-point
//! type through [`Real`]; `f32` and `f64` are provided. Concrete `f64`
//! aliases for the main model types live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar usable throughout the numeric core.
///
/// Sampling helpers are part of the trait so that generic code does not have
/// to carry `rand_distr` distribution bounds around.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`; panics only for values outside the
    /// target type's range, which does not occur for the constants used here.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in Real type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in Real type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real value convertible to f64")
    }

    /// One draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from the open interval (0, 1).
    fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from Exp(1).
    fn exp1<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from Gamma(shape, scale).
    fn sample_gamma<R: Rng + ?Sized>(shape: Self, scale: Self, rng: &mut R) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }

            fn exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }

            fn sample_gamma<R: Rng + ?Sized>(shape: Self, scale: Self, rng: &mut R) -> Self {
                Gamma::new(shape, scale)
                    .expect("gamma parameters positive")
                    .sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Chi-square draw via Gamma(df/2, 2).
pub fn chi_squared<F: Real, R: Rng + ?Sized>(df: F, rng: &mut R) -> F {
    F::sample_gamma(df / F::of(2.0), F::of(2.0), rng)
}

/// Beta(a, b) draw via the two-gamma construction.
pub fn beta<F: Real, R: Rng + ?Sized>(a: F, b: F, rng: &mut R) -> F {
    let x = F::sample_gamma(a, F::one(), rng);
    let y = F::sample_gamma(b, F::one(), rng);
    x / (x + y)
}
