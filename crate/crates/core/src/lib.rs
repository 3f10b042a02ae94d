//! Randomized-smoothing certification against simultaneous ℓ1 and ℓ2
//! perturbation bounds.
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! * [`noise`]: Gaussian, Uniform and Normal-Uniform noise with closed-form
//!   densities, distribution functions and kurtosis;
//! * [`classifier`]: base classifiers (a from-scratch MLP and analytic oracles);
//! * [`smoothing`]: Monte Carlo certification with Clopper-Pearson bounds and
//!   the hybrid Gaussian + Uniform certificate;
//! * [`training`]: noise-augmented SGD with KL similarity and consistency
//!   regularizers;
//! * [`eval`]: average certified radius, certified-accuracy curves and the
//!   fixed-clean-accuracy sweep.
//!
//! Models are generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! name the common instantiations.

pub mod classifier;
pub mod data;
pub mod error;
pub mod eval;
pub mod noise;
pub mod numerics;
pub mod rng;
pub mod scalar;
pub mod smoothing;
pub mod training;

pub use classifier::{BaseClassifier, ConstantClassifier, IntervalClassifier, LinearOracle, MlpModel};
pub use error::{Error, Result};
pub use noise::{NoiseKind, NoiseSpec};
pub use numerics::Probability;
pub use rng::SeededStream;
pub use scalar::Scalar;
pub use smoothing::{Certificate, CertifyParams, Status};

/// Double-precision MLP, the default model type.
pub type Mlp = MlpModel<f64>;
/// Single-precision MLP.
pub type Mlp32 = MlpModel<f32>;
pub type Linear = LinearOracle<f64>;
pub type Dataset = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
