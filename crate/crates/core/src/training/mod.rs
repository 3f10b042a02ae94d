//! Noise-augmented training with KL-based regularizers.

mod loss;
mod trainer;

pub use loss::{
    augmentations, backprop, cross_entropy, kl_divergence, kl_from_logits, loss_from_logits, loss_similarity, loss_total,
    LossBreakdown,
};
pub use trainer::{cosine_lr, train, EpochLog, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseSpec};

/// Penalty added to the cross-entropy of the noisy prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regularizer {
    /// Cross-entropy only.
    #[serde(rename = "none")]
    None,
    /// `KL(f(x+NU) || f(x+N)) + KL(f(x+NU) || f(x+U))`.
    #[serde(rename = "rs")]
    Similarity,
    /// `KL(f(x+NU) || f(x+N))`.
    #[serde(rename = "rn")]
    NormalOnly,
    /// `KL(f(x+NU) || f(x+U))`.
    #[serde(rename = "ru")]
    UniformOnly,
    /// Prediction consistency over `m` draws: `λ KL(F̂ || F_i) + η H(F̂)`.
    #[serde(rename = "consistency")]
    Consistency,
}

impl Regularizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::Similarity => "rs",
            Regularizer::NormalOnly => "rn",
            Regularizer::UniformOnly => "ru",
            Regularizer::Consistency => "consistency",
        }
    }
}

impl std::str::FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "none" => Regularizer::None,
            "rs" | "similarity" => Regularizer::Similarity,
            "rn" => Regularizer::NormalOnly,
            "ru" => Regularizer::UniformOnly,
            "consistency" | "cons" => Regularizer::Consistency,
            other => return Err(Error::Parse(format!("unknown regularizer {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    #[default]
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub noise: NoiseSpec,
    pub regularizer: Regularizer,
    /// Weight of the similarity-family regularizers.
    #[serde(default)]
    pub beta: f64,
    /// Consistency KL weight.
    #[serde(default = "default_lambda_c")]
    pub lambda_c: f64,
    /// Consistency entropy weight.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Consistency draws per example.
    #[serde(default = "default_m")]
    pub m: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    #[serde(default)]
    pub schedule: Schedule,
    pub seed: u64,
}

fn default_lambda_c() -> f64 {
    10.0
}

fn default_eta() -> f64 {
    0.5
}

fn default_m() -> usize {
    2
}

impl TrainConfig {
    /// Plain noise augmentation with the defaults used across the crate.
    pub fn new(noise: NoiseSpec, regularizer: Regularizer) -> Self {
        TrainConfig {
            noise,
            regularizer,
            beta: 0.0,
            lambda_c: default_lambda_c(),
            eta: default_eta(),
            m: default_m(),
            epochs: 30,
            batch_size: 32,
            lr_max: 0.1,
            schedule: Schedule::Cosine,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be >= 0, got {}", self.eta));
        }
        if !(self.lambda_c >= 0.0 && self.lambda_c.is_finite()) {
            return bad(format!("lambda_c must be >= 0, got {}", self.lambda_c));
        }
        if self.regularizer == Regularizer::Consistency && self.m < 2 {
            return bad(format!("consistency needs m >= 2, got {}", self.m));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.lr_max > 0.0 && self.lr_max.is_finite()) {
            return bad(format!("lr_max must be > 0, got {}", self.lr_max));
        }
        let needs_nu = matches!(self.regularizer, Regularizer::Similarity | Regularizer::NormalOnly | Regularizer::UniformOnly);
        if needs_nu && self.noise.kind() != NoiseKind::NormalUniform {
            return bad(format!("regularizer {} needs normal-uniform training noise", self.regularizer.as_str()));
        }
        Ok(())
    }

    /// Weight multiplying `reg` in the total loss.
    pub fn reg_weight(&self) -> f64 {
        match self.regularizer {
            Regularizer::None => 0.0,
            Regularizer::Similarity | Regularizer::NormalOnly | Regularizer::UniformOnly => self.beta,
            Regularizer::Consistency => 1.0,
        }
    }

    /// Label such as `NU(σ_N=0.50,σ_U=0.433)+R_S(β=3)`.
    pub fn label(&self) -> String {
        let base = self.noise.label();
        match self.regularizer {
            Regularizer::None => base,
            Regularizer::Similarity => format!("{base}+R_S(β={})", self.beta),
            Regularizer::NormalOnly => format!("{base}+R_N(β={})", self.beta),
            Regularizer::UniformOnly => format!("{base}+R_U(β={})", self.beta),
            Regularizer::Consistency => format!("{base}+Consistency(λ={},η={})", self.lambda_c, self.eta),
        }
    }

    pub(crate) fn nu_parts(&self) -> Result<(NoiseSpec, NoiseSpec)> {
        match (self.noise.gaussian_part(), self.noise.uniform_part()) {
            (Some(g), Some(u)) => Ok((g, u)),
            _ => Err(Error::InvalidConfig("regularizer needs normal-uniform training noise".into())),
        }
    }
}
