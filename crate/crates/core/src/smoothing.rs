//! Monte Carlo certification of smoothed classifiers.
//!
//! For an input `x` the base classifier is evaluated on `n` noisy copies
//! `x + e`; the top class `c_A` and a one-sided Clopper-Pearson lower bound
//! `p_lower` on its probability yield a certificate when `p_lower > 1/2`:
//!
//! * Gaussian noise, std `sigma`: `r_l2 = sigma * Φ⁻¹(p_lower)`, and the same
//!   value bounds ℓ1 (since `‖δ‖₂ ≤ ‖δ‖₁`).
//! * Uniform noise on `[-λ, λ]^d`: `r_l1 = 2λ(p_lower - 1/2)`, and
//!   `r_l2 = r_l1 / sqrt(d)` (since `‖δ‖₁ ≤ sqrt(d)‖δ‖₂`).
//!
//! A hybrid certificate runs both and merges them with [`combine_hybrid`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, BaseClassifier};
use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::numerics::{clopper_pearson_lower, std_normal_quantile, Probability, P_LOWER_CLAMP};
use crate::rng::SeededStream;
use crate::scalar::Scalar;

pub const DEFAULT_N: u64 = 100_000;
pub const DEFAULT_ALPHA: f64 = 0.001;

const TAG_GAUSSIAN_PASS: u64 = 0x6761_7573;
const TAG_UNIFORM_PASS: u64 = 0x756e_6966;
const TAG_SELECTION: u64 = 0x7365_6c65;
const TAG_ESTIMATION: u64 = 0x6573_7469;

/// Draws per parallel work item when counting.
const COUNT_BLOCK: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Status {
    Certified { label: usize },
    Abstained,
}

/// The smoothing measure(s) behind a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    Single(NoiseSpec),
    Hybrid { gaussian: NoiseSpec, uniform: NoiseSpec },
}

impl Smoothing {
    pub fn kind_str(&self) -> &'static str {
        match self {
            Smoothing::Single(s) => match s.kind() {
                NoiseKind::Gaussian => "gaussian",
                NoiseKind::Uniform => "uniform",
                NoiseKind::NormalUniform => "normal_uniform",
            },
            Smoothing::Hybrid { .. } => "hybrid",
        }
    }

    /// `(sigma_n, sigma_u)` as reported in certificate rows.
    pub fn sigmas(&self) -> (f64, f64) {
        match self {
            Smoothing::Single(s) => (s.sigma_n(), s.sigma_u()),
            Smoothing::Hybrid { gaussian, uniform } => (gaussian.sigma_n(), uniform.sigma_u()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub input_id: Option<u64>,
    pub status: Status,
    pub r_l1: f64,
    pub r_l2: f64,
    pub p_lower: Probability,
    pub n: u64,
    pub alpha: f64,
    pub smoothing: Smoothing,
}

impl Certificate {
    fn abstained(p_lower: Probability, n: u64, alpha: f64, smoothing: Smoothing) -> Self {
        Certificate { input_id: None, status: Status::Abstained, r_l1: 0.0, r_l2: 0.0, p_lower, n, alpha, smoothing }
    }

    pub fn with_input_id(mut self, id: u64) -> Self {
        self.input_id = Some(id);
        self
    }

    pub fn label(&self) -> Option<usize> {
        match self.status {
            Status::Certified { label } => Some(label),
            Status::Abstained => None,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self.status, Status::Certified { .. })
    }

    pub fn radius(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L1 => self.r_l1,
            Norm::L2 => self.r_l2,
        }
    }
}

/// Sample size, confidence level and selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyParams {
    pub n: u64,
    pub alpha: f64,
    /// When set, the top class is chosen from a separate sample of this
    /// size before `n` fresh draws estimate its probability. When unset the
    /// same `n` draws serve both purposes.
    #[serde(default)]
    pub selection_n: Option<u64>,
}

impl Default for CertifyParams {
    fn default() -> Self {
        CertifyParams { n: DEFAULT_N, alpha: DEFAULT_ALPHA, selection_n: None }
    }
}

impl CertifyParams {
    pub fn new(n: u64, alpha: f64) -> Result<Self> {
        let p = CertifyParams { n, alpha, selection_n: None };
        p.validate()?;
        Ok(p)
    }

    pub fn two_stage(mut self, selection_n: u64) -> Result<Self> {
        self.selection_n = Some(selection_n);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("certification needs n >= 1"));
        }
        if self.selection_n == Some(0) {
            return Err(Error::domain("selection sample size must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// What to certify with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CertifyMode {
    Gaussian { sigma: f64 },
    Uniform { sigma_u: f64 },
    Hybrid { sigma_g: f64, sigma_u: f64 },
}

impl CertifyMode {
    pub fn label(&self) -> String {
        match *self {
            CertifyMode::Gaussian { sigma } => NoiseSpec::gaussian(sigma).map(|s| s.label()).unwrap_or_default(),
            CertifyMode::Uniform { sigma_u } => NoiseSpec::uniform(sigma_u).map(|s| s.label()).unwrap_or_default(),
            CertifyMode::Hybrid { sigma_g, sigma_u } => format!(
                "{}+{}",
                NoiseSpec::gaussian(sigma_g).map(|s| s.label()).unwrap_or_default(),
                NoiseSpec::uniform(sigma_u).map(|s| s.label()).unwrap_or_default()
            ),
        }
    }
}

/// Per-class counts of `f(x + e)` over draws `0..n` of `stream`.
///
/// Draw `j` uses noise coordinates `j*d .. (j+1)*d`, so the result does not
/// depend on how the draws are split across threads.
pub fn count_predictions<T, C>(f: &C, x: &[T], spec: &NoiseSpec, n: u64, stream: &SeededStream) -> Result<Vec<u64>>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    if n == 0 {
        return Err(Error::domain("count_predictions needs n >= 1"));
    }
    let d = f.input_dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    let k = f.num_classes();
    let blocks = n.div_ceil(COUNT_BLOCK);
    let partial: Result<Vec<Vec<u64>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut counts = vec![0u64; k];
            let mut noisy = vec![T::zero(); d];
            let end = ((b + 1) * COUNT_BLOCK).min(n);
            for j in b * COUNT_BLOCK..end {
                spec.fill(stream, j * d as u64, &mut noisy);
                for (v, &xi) in noisy.iter_mut().zip(x) {
                    *v = *v + xi;
                }
                let c = f.predict(&noisy)?;
                counts[c] += 1;
            }
            Ok(counts)
        })
        .collect();
    let mut total = vec![0u64; k];
    for counts in partial? {
        for (t, c) in total.iter_mut().zip(counts) {
            *t += c;
        }
    }
    Ok(total)
}

/// ℓ2 radius `sigma * Φ⁻¹(p_lower)`, with `p_lower` clamped below 1.
pub fn gaussian_radius(sigma: f64, p_lower: f64) -> Result<f64> {
    Ok(sigma * std_normal_quantile(p_lower.min(P_LOWER_CLAMP))?)
}

/// ℓ1 radius `2λ(rho - 1/2)` for uniform noise of half-width `lambda`.
pub fn uniform_l1_radius(lambda: f64, rho: f64) -> f64 {
    2.0 * lambda * (rho - 0.5)
}

/// Largest ℓ2 ball inside an ℓ1 ball of radius `r_l1` in `dim` dimensions.
pub fn l1_to_l2_radius(r_l1: f64, dim: usize) -> f64 {
    r_l1 / (dim as f64).sqrt()
}

/// Top class and its count, either from one sample or from a separate
/// selection sample followed by a fresh estimation sample.
fn top_class<T, C>(f: &C, x: &[T], spec: &NoiseSpec, params: &CertifyParams, stream: &SeededStream) -> Result<(usize, u64)>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    match params.selection_n {
        None => {
            let counts = count_predictions(f, x, spec, params.n, stream)?;
            let top = argmax(&counts);
            Ok((top, counts[top]))
        }
        Some(n0) => {
            let selection = count_predictions(f, x, spec, n0, &stream.substream(TAG_SELECTION))?;
            let top = argmax(&selection);
            let counts = count_predictions(f, x, spec, params.n, &stream.substream(TAG_ESTIMATION))?;
            Ok((top, counts[top]))
        }
    }
}

/// Turns a top class and its lower probability bound into a certificate.
/// Certifies only when `p_lower > 1/2` strictly.
pub fn certificate_from_bound(
    label: usize,
    p_lower: Probability,
    spec: NoiseSpec,
    dim: usize,
    n: u64,
    alpha: f64,
) -> Result<Certificate> {
    let smoothing = Smoothing::Single(spec);
    if p_lower.value() <= 0.5 {
        return Ok(Certificate::abstained(p_lower, n, alpha, smoothing));
    }
    let (r_l1, r_l2) = match spec.kind() {
        NoiseKind::Gaussian => {
            let r = gaussian_radius(spec.sigma_n(), p_lower.value())?;
            (r, r)
        }
        NoiseKind::Uniform => {
            let r = uniform_l1_radius(spec.lambda(), p_lower.value());
            (r, l1_to_l2_radius(r, dim))
        }
        NoiseKind::NormalUniform => {
            return Err(Error::InvalidConfig("no certified radius is defined for normal-uniform smoothing".into()))
        }
    };
    Ok(Certificate { input_id: None, status: Status::Certified { label }, r_l1, r_l2, p_lower, n, alpha, smoothing })
}

fn certify_single<T, C>(f: &C, x: &[T], spec: NoiseSpec, params: &CertifyParams, stream: &SeededStream) -> Result<Certificate>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    params.validate()?;
    let (top, n_a) = top_class(f, x, &spec, params, stream)?;
    let p_lower = clopper_pearson_lower(n_a, params.n, params.alpha)?;
    certificate_from_bound(top, p_lower, spec, f.input_dim(), params.n, params.alpha)
}

pub fn certify_gaussian<T, C>(f: &C, x: &[T], sigma: f64, params: &CertifyParams, stream: &SeededStream) -> Result<Certificate>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    certify_single(f, x, NoiseSpec::gaussian(sigma)?, params, stream)
}

pub fn certify_uniform<T, C>(f: &C, x: &[T], sigma_u: f64, params: &CertifyParams, stream: &SeededStream) -> Result<Certificate>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    certify_single(f, x, NoiseSpec::uniform(sigma_u)?, params, stream)
}

/// Merges a Uniform-smoothed and a Gaussian-smoothed certificate of the
/// same input:
///
/// | case                    | label   | ℓ1 radius        | ℓ2 radius        |
/// |-------------------------|---------|------------------|------------------|
/// | both agree              | common  | max of ℓ1 radii  | max of ℓ2 radii  |
/// | only uniform abstains   | y_G     | r_G              | r_G              |
/// | only gaussian abstains  | y_U     | r_U              | r_U              |
/// | both abstain            | abstain | 0                | 0                |
/// | labels disagree         | abstain | 0                | 0                |
pub fn combine_hybrid(cert_u: &Certificate, cert_g: &Certificate) -> Result<Certificate> {
    let (uniform, gaussian) = match (cert_u.smoothing, cert_g.smoothing) {
        (Smoothing::Single(u), Smoothing::Single(g)) if u.kind() == NoiseKind::Uniform && g.kind() == NoiseKind::Gaussian => {
            (u, g)
        }
        _ => {
            return Err(Error::InvalidConfig(
                "combine_hybrid expects a uniform certificate and a gaussian certificate".into(),
            ))
        }
    };
    let input_id = match (cert_u.input_id, cert_g.input_id) {
        (Some(a), Some(b)) if a != b => return Err(Error::MismatchedInput(a, b)),
        (a, b) => a.or(b),
    };
    let smoothing = Smoothing::Hybrid { gaussian, uniform };
    let p_max = if cert_u.p_lower >= cert_g.p_lower { cert_u.p_lower } else { cert_g.p_lower };
    let base = Certificate {
        input_id,
        status: Status::Abstained,
        r_l1: 0.0,
        r_l2: 0.0,
        p_lower: p_max,
        n: cert_g.n,
        alpha: cert_g.alpha,
        smoothing,
    };
    Ok(match (cert_u.status, cert_g.status) {
        (Status::Certified { label: yu }, Status::Certified { label: yg }) if yu == yg => Certificate {
            status: Status::Certified { label: yu },
            r_l1: cert_u.r_l1.max(cert_g.r_l1),
            r_l2: cert_u.r_l2.max(cert_g.r_l2),
            ..base
        },
        (Status::Abstained, Status::Certified { .. }) => {
            Certificate { status: cert_g.status, r_l1: cert_g.r_l1, r_l2: cert_g.r_l2, p_lower: cert_g.p_lower, ..base }
        }
        (Status::Certified { .. }, Status::Abstained) => {
            Certificate { status: cert_u.status, r_l1: cert_u.r_l1, r_l2: cert_u.r_l2, p_lower: cert_u.p_lower, ..base }
        }
        _ => base,
    })
}

/// Gaussian and Uniform passes on independent sub-streams, then
/// [`combine_hybrid`].
pub fn certify_hybrid<T, C>(
    f: &C,
    x: &[T],
    sigma_g: f64,
    sigma_u: f64,
    params: &CertifyParams,
    stream: &SeededStream,
) -> Result<Certificate>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    let cert_g = certify_gaussian(f, x, sigma_g, params, &stream.substream(TAG_GAUSSIAN_PASS))?;
    let cert_u = certify_uniform(f, x, sigma_u, params, &stream.substream(TAG_UNIFORM_PASS))?;
    combine_hybrid(&cert_u, &cert_g)
}

/// The Gaussian and Uniform constituents of a hybrid run, computed with the
/// same sub-streams [`certify_hybrid`] uses.
pub fn certify_hybrid_parts<T, C>(
    f: &C,
    x: &[T],
    sigma_g: f64,
    sigma_u: f64,
    params: &CertifyParams,
    stream: &SeededStream,
) -> Result<(Certificate, Certificate)>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    let cert_g = certify_gaussian(f, x, sigma_g, params, &stream.substream(TAG_GAUSSIAN_PASS))?;
    let cert_u = certify_uniform(f, x, sigma_u, params, &stream.substream(TAG_UNIFORM_PASS))?;
    Ok((cert_u, cert_g))
}

pub fn certify<T, C>(f: &C, x: &[T], mode: &CertifyMode, params: &CertifyParams, stream: &SeededStream) -> Result<Certificate>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    match *mode {
        CertifyMode::Gaussian { sigma } => certify_gaussian(f, x, sigma, params, stream),
        CertifyMode::Uniform { sigma_u } => certify_uniform(f, x, sigma_u, params, stream),
        CertifyMode::Hybrid { sigma_g, sigma_u } => certify_hybrid(f, x, sigma_g, sigma_u, params, stream),
    }
}
