//! Comparing schemes at matched clean accuracy.
//!
//! A scalar training knob (the training noise level) is bisected until the
//! clean accuracy of the resulting certified report is within tolerance of
//! a target; each knob value is also certified at a list of certification
//! noise offsets. Among all qualifying (knob, offset) pairs, the one with
//! the largest average ACR wins.

use serde::{Deserialize, Serialize};

use super::{certify_dataset, CertReport};
use crate::classifier::MlpModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::scalar::Scalar;
use crate::smoothing::{CertifyMode, CertifyParams};
use crate::training::{train, Regularizer, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub target_acc: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub knob_lo: f64,
    pub knob_hi: f64,
    #[serde(default = "default_offsets")]
    pub cert_offsets: Vec<f64>,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
}

fn default_tolerance() -> f64 {
    0.01
}

fn default_offsets() -> Vec<f64> {
    vec![0.0]
}

fn default_max_evals() -> usize {
    20
}

impl SweepSettings {
    pub fn new(target_acc: f64, knob_lo: f64, knob_hi: f64) -> Self {
        SweepSettings {
            target_acc,
            tolerance: default_tolerance(),
            knob_lo,
            knob_hi,
            cert_offsets: default_offsets(),
            max_evals: default_max_evals(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.target_acc) {
            return bad(format!("target accuracy {} outside [0, 1]", self.target_acc));
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be >= 0".into());
        }
        if !(self.knob_lo.is_finite() && self.knob_hi.is_finite() && self.knob_lo <= self.knob_hi) {
            return bad(format!("knob range [{}, {}] is invalid", self.knob_lo, self.knob_hi));
        }
        if self.cert_offsets.is_empty() || self.cert_offsets.iter().any(|o| !o.is_finite()) {
            return bad("need at least one finite certification offset".into());
        }
        if self.max_evals == 0 {
            return bad("max_evals must be >= 1".into());
        }
        Ok(())
    }
}

/// One evaluated (knob, offset) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eval: usize,
    pub knob: f64,
    pub offset: f64,
    pub clean_acc: f64,
    pub acr_l1: f64,
    pub acr_l2: f64,
    pub acr_avg: f64,
    pub qualifies: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome<M> {
    pub knob: f64,
    pub offset: f64,
    pub model: M,
    pub report: CertReport,
    pub trace: Vec<SweepPoint>,
}

/// Bisection on `knob` assuming clean accuracy is monotone in it.
///
/// `train_recipe(knob)` builds a model, `certify_recipe(model, knob, offset)`
/// certifies it. The first offset steers the bisection; every offset is
/// scored. At most `max_evals` models are trained.
pub fn sweep_to_target_clean_accuracy<M, Tr, Ce>(
    mut train_recipe: Tr,
    mut certify_recipe: Ce,
    settings: &SweepSettings,
) -> Result<SweepOutcome<M>>
where
    M: Clone,
    Tr: FnMut(f64) -> Result<M>,
    Ce: FnMut(&M, f64, f64) -> Result<CertReport>,
{
    settings.validate()?;
    let target = settings.target_acc;
    let mut trace: Vec<SweepPoint> = Vec::new();
    let mut best: Option<SweepOutcome<M>> = None;

    // Returns the steering accuracy at `knob`.
    let mut evaluate = |knob: f64, trace: &mut Vec<SweepPoint>, best: &mut Option<SweepOutcome<M>>| -> Result<f64> {
        let eval = trace.last().map_or(0, |p| p.eval + 1);
        let model = train_recipe(knob)?;
        let mut steer = f64::NAN;
        for &offset in &settings.cert_offsets {
            let report = certify_recipe(&model, knob, offset)?;
            let a = report.aggregates;
            let qualifies = (a.clean_acc.value() - target).abs() <= settings.tolerance;
            if steer.is_nan() {
                steer = a.clean_acc.value();
            }
            trace.push(SweepPoint {
                eval,
                knob,
                offset,
                clean_acc: a.clean_acc.value(),
                acr_l1: a.acr_l1,
                acr_l2: a.acr_l2,
                acr_avg: a.acr_avg,
                qualifies,
            });
            if qualifies && best.as_ref().map_or(true, |b| a.acr_avg > b.report.aggregates.acr_avg) {
                *best = Some(SweepOutcome { knob, offset, model: model.clone(), report, trace: Vec::new() });
            }
        }
        Ok(steer)
    };

    let (mut lo, mut hi) = (settings.knob_lo, settings.knob_hi);
    let acc_lo = evaluate(lo, &mut trace, &mut best)?;
    let hit = |acc: f64| (acc - target).abs() <= settings.tolerance;
    if lo < hi && !hit(acc_lo) && settings.max_evals > 1 {
        let acc_hi = evaluate(hi, &mut trace, &mut best)?;
        let decreasing = acc_lo >= acc_hi;
        let (top, bottom) = if decreasing { (acc_lo, acc_hi) } else { (acc_hi, acc_lo) };
        let bracketed = target <= top + settings.tolerance && target >= bottom - settings.tolerance;
        let mut evals = 2;
        if bracketed && !hit(acc_hi) {
            while evals < settings.max_evals {
                let mid = 0.5 * (lo + hi);
                let acc = evaluate(mid, &mut trace, &mut best)?;
                evals += 1;
                if hit(acc) {
                    break;
                }
                if (acc > target) == decreasing {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }

    match best {
        Some(mut b) => {
            b.trace = trace;
            Ok(b)
        }
        None => {
            let closest = trace
                .iter()
                .map(|p| p.clean_acc)
                .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
                .unwrap_or(f64::NAN);
            Err(Error::UnreachableTarget { target, closest })
        }
    }
}

/// How the training noise depends on the knob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainScheme {
    /// `N(0, knob²)`.
    Gaussian,
    /// Uniform with standard deviation `knob`.
    Uniform,
    /// Normal-Uniform with `σ_N = knob` and `σ_U` fixed by the kurtosis.
    NormalUniform { kurtosis: f64 },
}

/// How certification noise depends on the knob and offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertScheme {
    /// `σ = σ_N + offset`.
    Gaussian,
    /// `σ_U = training σ_U + offset` (the knob itself for non-NU training).
    Uniform,
    /// Both of the above, combined per input.
    Hybrid,
}

impl std::str::FromStr for CertScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "g" => Ok(CertScheme::Gaussian),
            "uniform" | "u" => Ok(CertScheme::Uniform),
            "hybrid" | "h" => Ok(CertScheme::Hybrid),
            other => Err(Error::Parse(format!("unknown certification scheme {other:?}"))),
        }
    }
}

/// A complete train-then-certify protocol on small MLPs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub train_scheme: TrainScheme,
    pub cert_scheme: CertScheme,
    /// Noise, regularizer and weights of this template are overridden per knob
    /// where the scheme says so; epochs, batch size, lr and seed are kept.
    pub train: TrainConfig,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    pub init_seed: u64,
    pub certify: CertifyParams,
    pub cert_seed: u64,
}

impl Recipe {
    pub fn noise_for(&self, knob: f64) -> Result<NoiseSpec> {
        match self.train_scheme {
            TrainScheme::Gaussian => NoiseSpec::gaussian(knob),
            TrainScheme::Uniform => NoiseSpec::uniform(knob),
            TrainScheme::NormalUniform { kurtosis } => NoiseSpec::normal_uniform_with_kurtosis(knob, kurtosis),
        }
    }

    pub fn train_config(&self, knob: f64) -> Result<TrainConfig> {
        let cfg = TrainConfig { noise: self.noise_for(knob)?, ..self.train.clone() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mode_for(&self, knob: f64, offset: f64) -> Result<CertifyMode> {
        let noise = self.noise_for(knob)?;
        let sigma_g = if noise.sigma_n() > 0.0 { noise.sigma_n() } else { noise.total_std() } + offset;
        let sigma_u = if noise.sigma_u() > 0.0 { noise.sigma_u() } else { noise.total_std() } + offset;
        let mode = match self.cert_scheme {
            CertScheme::Gaussian => CertifyMode::Gaussian { sigma: sigma_g },
            CertScheme::Uniform => CertifyMode::Uniform { sigma_u },
            CertScheme::Hybrid => CertifyMode::Hybrid { sigma_g, sigma_u },
        };
        if !(sigma_g > 0.0 && sigma_u > 0.0) {
            return Err(Error::InvalidConfig(format!("offset {offset} makes a certification sigma non-positive")));
        }
        Ok(mode)
    }

    pub fn train_model<T: Scalar>(&self, data: &Dataset<T>, knob: f64) -> Result<MlpModel<T>> {
        let mut sizes = vec![data.dim()];
        sizes.extend(&self.hidden);
        sizes.push(data.num_classes);
        let model = MlpModel::init(&sizes, self.init_seed)?;
        Ok(train(model, data, &self.train_config(knob)?)?.model)
    }

    pub fn certify_model<T: Scalar>(&self, model: &MlpModel<T>, test: &Dataset<T>, knob: f64, offset: f64) -> Result<CertReport> {
        certify_dataset(model, test, &self.mode_for(knob, offset)?, &self.certify, self.cert_seed)
    }

    /// Training-scheme label at `knob`, e.g. `NU(σ_N=0.50,σ_U=0.433)+R_S(β=3)`.
    pub fn train_label(&self, knob: f64) -> Result<String> {
        Ok(self.train_config(knob)?.label())
    }

    pub fn regularizer(&self) -> Regularizer {
        self.train.regularizer
    }
}

/// [`sweep_to_target_clean_accuracy`] over a [`Recipe`].
pub fn sweep_recipe<T: Scalar>(
    recipe: &Recipe,
    train_data: &Dataset<T>,
    test_data: &Dataset<T>,
    settings: &SweepSettings,
) -> Result<SweepOutcome<MlpModel<T>>> {
    sweep_to_target_clean_accuracy(
        |knob| recipe.train_model(train_data, knob),
        |model, knob, offset| recipe.certify_model(model, test_data, knob, offset),
        settings,
    )
}
