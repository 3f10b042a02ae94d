//! Evaluation: ACR, clean accuracy, certified-accuracy curves, and the
//! fixed-clean-accuracy sweep.

mod report;
mod sweep;

pub use report::{comparison_csv, ComparisonRow};
pub use sweep::{
    sweep_recipe, sweep_to_target_clean_accuracy, CertScheme, Recipe, SweepOutcome, SweepPoint, SweepSettings, TrainScheme,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::BaseClassifier;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Probability;
use crate::rng::SeededStream;
use crate::scalar::Scalar;
use crate::smoothing::{certify, Certificate, CertifyMode, CertifyParams, Norm};

/// One certified test input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertRow {
    pub input_id: u64,
    pub label_true: usize,
    pub cert: Certificate,
}

impl CertRow {
    /// Certified with the true label.
    pub fn is_correct(&self) -> bool {
        self.cert.label() == Some(self.label_true)
    }

    /// Radius counted by ACR: zero unless certified and correct.
    pub fn credited_radius(&self, norm: Norm) -> f64 {
        if self.is_correct() {
            self.cert.radius(norm)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub count: usize,
    /// Fraction of inputs certified with the true label.
    pub clean_acc: Probability,
    pub acr_l1: f64,
    pub acr_l2: f64,
    pub acr_avg: f64,
    pub abstain_rate: Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub rows: Vec<CertRow>,
    pub aggregates: Aggregates,
}

impl CertReport {
    pub fn from_rows(rows: Vec<CertRow>) -> Result<Self> {
        let acr_l1 = acr(&rows, Norm::L1)?;
        let acr_l2 = acr(&rows, Norm::L2)?;
        let n = rows.len() as f64;
        let correct = rows.iter().filter(|r| r.is_correct()).count() as f64;
        let abstained = rows.iter().filter(|r| !r.cert.is_certified()).count() as f64;
        let aggregates = Aggregates {
            count: rows.len(),
            clean_acc: Probability::new(correct / n)?,
            acr_l1,
            acr_l2,
            acr_avg: avg_acr(acr_l1, acr_l2),
            abstain_rate: Probability::new(abstained / n)?,
        };
        Ok(CertReport { rows, aggregates })
    }
}

/// Mean over all rows of the radius of certified-correct rows; every other
/// row contributes zero.
pub fn acr(rows: &[CertRow], norm: Norm) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Empty("report has no rows"));
    }
    Ok(rows.iter().map(|r| r.credited_radius(norm)).sum::<f64>() / rows.len() as f64)
}

/// Arithmetic mean of the ℓ1 and ℓ2 ACR.
pub fn avg_acr(acr_l1: f64, acr_l2: f64) -> f64 {
    (acr_l1 + acr_l2) / 2.0
}

/// Noise-free accuracy of the base classifier.
pub fn clean_accuracy<T, C>(f: &C, data: &Dataset<T>) -> Result<Probability>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    if data.is_empty() {
        return Err(Error::Empty("dataset is empty"));
    }
    let mut hits = 0usize;
    for (x, &y) in data.x.iter().zip(&data.y) {
        hits += usize::from(f.predict(x)? == y);
    }
    Probability::new(hits as f64 / data.len() as f64)
}

/// `(r, fraction of rows certified-correct with radius >= r)` for each `r`.
pub fn certified_accuracy_curve(rows: &[CertRow], norm: Norm, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    if radii.windows(2).any(|w| !(w[0] <= w[1])) || radii.iter().any(|r| !r.is_finite()) {
        return Err(Error::domain("radii grid must be finite and sorted ascending"));
    }
    if rows.is_empty() {
        return Err(Error::Empty("report has no rows"));
    }
    let mut radii_ok: Vec<f64> = rows.iter().filter(|r| r.is_correct()).map(|r| r.cert.radius(norm)).collect();
    radii_ok.sort_by(f64::total_cmp);
    let n = rows.len() as f64;
    Ok(radii
        .iter()
        .map(|&r| {
            let below = radii_ok.partition_point(|&v| v < r);
            (r, (radii_ok.len() - below) as f64 / n)
        })
        .collect())
}

/// `points` evenly spaced radii over `[0, max radius]`.
pub fn default_radius_grid(rows: &[CertRow], norm: Norm, points: usize) -> Vec<f64> {
    let max = rows.iter().map(|r| r.cert.radius(norm)).fold(0.0, f64::max);
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| max * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Certifies every row of `data`. Input `i` uses its own stream derived
/// from `(seed, i)`, so results do not depend on the thread count.
pub fn certify_dataset<T, C>(f: &C, data: &Dataset<T>, mode: &CertifyMode, params: &CertifyParams, seed: u64) -> Result<CertReport>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    if data.is_empty() {
        return Err(Error::Empty("dataset is empty"));
    }
    let rows = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let stream = SeededStream::for_input(seed, i as u64, 0);
            let cert = certify(f, &data.x[i], mode, params, &stream)?.with_input_id(i as u64);
            Ok(CertRow { input_id: i as u64, label_true: data.y[i], cert })
        })
        .collect::<Result<Vec<_>>>()?;
    CertReport::from_rows(rows)
}
