//! Floating-point abstraction shared by models, losses and samplers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type a model is parametrized over: `f32` or `f64`.
///
/// Statistics that end up in a certificate (confidence bounds, quantiles,
/// radii) are always evaluated in `f64`; this trait only governs the
/// network arithmetic and the noise vectors fed to it.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`; never fails for finite inputs.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to any float")
    }

    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
