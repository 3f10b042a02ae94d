//! Smoothing and training noise: Gaussian, Uniform and Normal-Uniform laws.
//!
//! A Normal-Uniform variable is `X + Y` with `X ~ N(0, sigma_n^2)` and
//! `Y ~ U(-lambda, lambda)` independent. Both parts are parametrized by
//! their standard deviation; the uniform half-width is
//! `lambda = sqrt(3) * sigma_u`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{std_normal_cdf, std_normal_pdf};
use crate::rng::SeededStream;
use crate::scalar::Scalar;

pub const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
    NormalUniform,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
            NoiseKind::NormalUniform => "normal_uniform",
        }
    }
}

#[derive(Deserialize)]
struct RawNoiseSpec {
    kind: NoiseKind,
    #[serde(default)]
    sigma_n: f64,
    #[serde(default)]
    sigma_u: f64,
}

/// A validated isotropic noise law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNoiseSpec")]
pub struct NoiseSpec {
    kind: NoiseKind,
    sigma_n: f64,
    sigma_u: f64,
}

impl TryFrom<RawNoiseSpec> for NoiseSpec {
    type Error = Error;

    fn try_from(raw: RawNoiseSpec) -> Result<Self> {
        NoiseSpec::new(raw.kind, raw.sigma_n, raw.sigma_u)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, sigma_n: f64, sigma_u: f64) -> Result<Self> {
        match kind {
            NoiseKind::Gaussian => {
                positive("sigma_n", sigma_n)?;
                if sigma_u != 0.0 {
                    return Err(Error::InvalidSpec("gaussian noise must have sigma_u = 0".into()));
                }
            }
            NoiseKind::Uniform => {
                positive("sigma_u", sigma_u)?;
                if sigma_n != 0.0 {
                    return Err(Error::InvalidSpec("uniform noise must have sigma_n = 0".into()));
                }
            }
            NoiseKind::NormalUniform => {
                positive("sigma_n", sigma_n)?;
                positive("sigma_u", sigma_u)?;
            }
        }
        Ok(NoiseSpec { kind, sigma_n, sigma_u })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        NoiseSpec::new(NoiseKind::Gaussian, sigma, 0.0)
    }

    pub fn uniform(sigma_u: f64) -> Result<Self> {
        NoiseSpec::new(NoiseKind::Uniform, 0.0, sigma_u)
    }

    pub fn normal_uniform(sigma_n: f64, sigma_u: f64) -> Result<Self> {
        NoiseSpec::new(NoiseKind::NormalUniform, sigma_n, sigma_u)
    }

    /// Normal-Uniform whose uniform part is chosen to hit `target_kurtosis`.
    pub fn normal_uniform_with_kurtosis(sigma_n: f64, target_kurtosis: f64) -> Result<Self> {
        let sigma_u = nu_sigma_u_for_target_kurtosis(sigma_n, target_kurtosis)?;
        NoiseSpec::normal_uniform(sigma_n, sigma_u)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma_n(&self) -> f64 {
        self.sigma_n
    }

    pub fn sigma_u(&self) -> f64 {
        self.sigma_u
    }

    /// Half-width of the uniform component.
    pub fn lambda(&self) -> f64 {
        SQRT_3 * self.sigma_u
    }

    pub fn total_std(&self) -> f64 {
        self.sigma_n.hypot(self.sigma_u)
    }

    /// The Gaussian part alone, if there is one.
    pub fn gaussian_part(&self) -> Option<NoiseSpec> {
        (self.sigma_n > 0.0).then(|| NoiseSpec { kind: NoiseKind::Gaussian, sigma_n: self.sigma_n, sigma_u: 0.0 })
    }

    /// The Uniform part alone, if there is one.
    pub fn uniform_part(&self) -> Option<NoiseSpec> {
        (self.sigma_u > 0.0).then(|| NoiseSpec { kind: NoiseKind::Uniform, sigma_n: 0.0, sigma_u: self.sigma_u })
    }

    /// Draws coordinate `index` of the stream. Each coordinate owns the
    /// counters `2 * index` (Gaussian part) and `2 * index + 1` (Uniform
    /// part), so any index range can be produced independently.
    #[inline]
    pub fn draw(&self, stream: &SeededStream, index: u64) -> f64 {
        let mut v = 0.0;
        if self.sigma_n > 0.0 {
            v += self.sigma_n * fast_normal_quantile(stream.open01_at(2 * index));
        }
        if self.sigma_u > 0.0 {
            v += self.lambda() * (2.0 * stream.open01_at(2 * index + 1) - 1.0);
        }
        v
    }

    /// Fills `out` with coordinates `start .. start + out.len()`.
    pub fn fill<T: Scalar>(&self, stream: &SeededStream, start: u64, out: &mut [T]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = T::of(self.draw(stream, start + i as u64));
        }
    }

    /// Short label in the style `NU(σ_N=0.50,σ_U=0.433)`.
    pub fn label(&self) -> String {
        match self.kind {
            NoiseKind::Gaussian => format!("Gaussian(σ={})", fmt_sigma(self.sigma_n)),
            NoiseKind::Uniform => format!("Uniform(σ={})", fmt_sigma(self.sigma_u)),
            NoiseKind::NormalUniform => {
                format!("NU(σ_N={},σ_U={})", fmt_sigma(self.sigma_n), fmt_sigma(self.sigma_u))
            }
        }
    }
}

fn fmt_sigma(v: f64) -> String {
    let s = format!("{v:.3}");
    let trimmed = s.trim_end_matches('0');
    if trimmed.ends_with('.') {
        format!("{trimmed}00")
    } else if trimmed.len() - trimmed.find('.').unwrap_or(0) == 2 {
        format!("{trimmed}0")
    } else {
        trimmed.to_string()
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NoiseKind::Gaussian => write!(f, "gaussian:{}", self.sigma_n),
            NoiseKind::Uniform => write!(f, "uniform:{}", self.sigma_u),
            NoiseKind::NormalUniform => write!(f, "nu:{}:{}", self.sigma_n, self.sigma_u),
        }
    }
}

/// Compact grammar: `gaussian:<σ_N>`, `uniform:<σ_U>`, `nu:<σ_N>:<σ_U>`, and
/// `nu-k:<σ_N>:<K>` which solves for σ_U from a target kurtosis.
impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| -> Result<f64> {
            t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {t:?} in noise spec {s:?}")))
        };
        match parts.as_slice() {
            ["gaussian" | "g", sigma] => NoiseSpec::gaussian(num(sigma)?),
            ["uniform" | "u", sigma] => NoiseSpec::uniform(num(sigma)?),
            ["nu", sn, su] => NoiseSpec::normal_uniform(num(sn)?, num(su)?),
            ["nu-k", sn, k] => NoiseSpec::normal_uniform_with_kurtosis(num(sn)?, num(k)?),
            _ => Err(Error::Parse(format!(
                "unrecognized noise spec {s:?}; expected gaussian:<s>, uniform:<s>, nu:<sn>:<su> or nu-k:<sn>:<k>"
            ))),
        }
    }
}

/// Φ⁻¹ for sampling: rational start plus one Halley step (about 1e-15
/// absolute), without the verification pass of the public quantile.
#[inline]
fn fast_normal_quantile(u: f64) -> f64 {
    let (p, sign) = if u > 0.5 { (1.0 - u, -1.0) } else { (u, 1.0) };
    let mut x = crate::numerics::quantile_initial_guess(p);
    let e = std_normal_cdf(x) - p;
    let w = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x -= w / (1.0 + 0.5 * x * w);
    sign * x
}

/// `dim` i.i.d. coordinates from `spec`, starting at the stream origin.
pub fn sample<T: Scalar>(spec: &NoiseSpec, dim: usize, stream: &SeededStream) -> Vec<T> {
    let mut out = vec![T::zero(); dim];
    spec.fill(stream, 0, &mut out);
    out
}

/// Univariate density of one coordinate.
pub fn pdf_1d(spec: &NoiseSpec, z: f64) -> f64 {
    let (s, l) = (spec.sigma_n, spec.lambda());
    match spec.kind {
        NoiseKind::Gaussian => std_normal_pdf(z / s) / s,
        NoiseKind::Uniform => {
            if z.abs() <= l {
                0.5 / l
            } else {
                0.0
            }
        }
        NoiseKind::NormalUniform => {
            // Upper tails difference avoids cancellation far right of zero.
            let (a, b) = ((z + l) / s, (z - l) / s);
            let mass = if z > 0.0 {
                std_normal_cdf(-b) - std_normal_cdf(-a)
            } else {
                std_normal_cdf(a) - std_normal_cdf(b)
            };
            (mass / (2.0 * l)).max(0.0)
        }
    }
}

/// Univariate distribution function of one coordinate.
pub fn cdf_1d(spec: &NoiseSpec, t: f64) -> f64 {
    let (s, l) = (spec.sigma_n, spec.lambda());
    match spec.kind {
        NoiseKind::Gaussian => std_normal_cdf(t / s),
        NoiseKind::Uniform => ((t + l) / (2.0 * l)).clamp(0.0, 1.0),
        NoiseKind::NormalUniform => {
            if t > 0.0 {
                return 1.0 - cdf_1d(spec, -t);
            }
            let primitive = |u: f64| u * std_normal_cdf(u) + std_normal_pdf(u);
            let v = s / (2.0 * l) * (primitive((t + l) / s) - primitive((t - l) / s));
            v.clamp(0.0, 1.0)
        }
    }
}

/// Closed-form excess kurtosis of one coordinate:
/// `(3 s^4 + 2 s^2 l^2 + l^4 / 5) / (s^2 + l^2 / 3)^2 - 3`.
pub fn kurtosis(spec: &NoiseSpec) -> Result<f64> {
    let s2 = spec.sigma_n * spec.sigma_n;
    let l2 = spec.lambda() * spec.lambda();
    let var = s2 + l2 / 3.0;
    if !(var > 0.0) {
        return Err(Error::InvalidSpec("kurtosis of a zero-variance law".into()));
    }
    Ok((3.0 * s2 * s2 + 2.0 * s2 * l2 + l2 * l2 / 5.0) / (var * var) - 3.0)
}

/// σ_U giving a Normal-Uniform law with `sigma_n` the requested excess
/// kurtosis, by bisection on the closed form.
pub fn nu_sigma_u_for_target_kurtosis(sigma_n: f64, target_k: f64) -> Result<f64> {
    positive("sigma_n", sigma_n)?;
    if !(target_k > -1.2 && target_k < 0.0) {
        return Err(Error::domain(format!("target kurtosis must lie in (-1.2, 0), got {target_k}")));
    }
    let k_at = |su: f64| {
        let spec = NoiseSpec { kind: NoiseKind::NormalUniform, sigma_n, sigma_u: su };
        kurtosis(&spec).expect("positive variance")
    };
    // Kurtosis decreases monotonically from 0 toward -1.2 as sigma_u grows.
    let mut hi = sigma_n;
    while k_at(hi) > target_k {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if k_at(mid) > target_k {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample_kurtosis;

    fn nu_lambda(sigma_n: f64, lambda: f64) -> NoiseSpec {
        NoiseSpec::normal_uniform(sigma_n, lambda / SQRT_3).unwrap()
    }

    fn moments(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn spec_invariants() {
        assert!(NoiseSpec::gaussian(0.0).is_err());
        assert!(NoiseSpec::new(NoiseKind::Gaussian, 1.0, 0.2).is_err());
        assert!(NoiseSpec::new(NoiseKind::Uniform, 0.1, 0.2).is_err());
        assert!(NoiseSpec::normal_uniform(0.5, 0.0).is_err());
        assert!(NoiseSpec::normal_uniform(f64::NAN, 1.0).is_err());
        let nu = NoiseSpec::normal_uniform(0.3, 0.4).unwrap();
        assert!((nu.total_std() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn json_shape() {
        let nu = NoiseSpec::normal_uniform(0.5, 0.433).unwrap();
        let js = serde_json::to_string(&nu).unwrap();
        assert_eq!(js, r#"{"kind":"normal_uniform","sigma_n":0.5,"sigma_u":0.433}"#);
        let back: NoiseSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, nu);
        assert!(serde_json::from_str::<NoiseSpec>(r#"{"kind":"gaussian","sigma_n":-1,"sigma_u":0}"#).is_err());
    }

    #[test]
    fn grammar() {
        assert_eq!("gaussian:0.25".parse::<NoiseSpec>().unwrap(), NoiseSpec::gaussian(0.25).unwrap());
        assert_eq!("uniform:0.65".parse::<NoiseSpec>().unwrap(), NoiseSpec::uniform(0.65).unwrap());
        assert_eq!("nu:0.5:0.433".parse::<NoiseSpec>().unwrap(), NoiseSpec::normal_uniform(0.5, 0.433).unwrap());
        let k = "nu-k:1.0:-0.22".parse::<NoiseSpec>().unwrap();
        assert!((k.sigma_u() - 0.866).abs() < 1e-3);
        assert!("laplace:1".parse::<NoiseSpec>().is_err());
        assert!("nu:0.5".parse::<NoiseSpec>().is_err());
        assert!("gaussian:abc".parse::<NoiseSpec>().is_err());
        let nu = NoiseSpec::normal_uniform(0.5, 0.433).unwrap();
        assert_eq!(nu.to_string().parse::<NoiseSpec>().unwrap(), nu);
    }

    #[test]
    fn labels() {
        assert_eq!(NoiseSpec::normal_uniform(0.5, 0.433).unwrap().label(), "NU(σ_N=0.50,σ_U=0.433)");
        assert_eq!(NoiseSpec::gaussian(0.6).unwrap().label(), "Gaussian(σ=0.60)");
        assert_eq!(NoiseSpec::uniform(1.16).unwrap().label(), "Uniform(σ=1.16)");
        assert_eq!(NoiseSpec::gaussian(1.0).unwrap().label(), "Gaussian(σ=1.00)");
    }

    #[test]
    fn sample_gaussian_moments() {
        let spec = NoiseSpec::gaussian(1.0).unwrap();
        let v: Vec<f64> = sample(&spec, 1_000_000, &SeededStream::new(1, 0));
        let (mean, std) = moments(&v);
        assert!(mean.abs() < 0.01);
        assert!((std - 1.0).abs() < 0.01);
        assert!(sample_kurtosis(&v).unwrap().abs() < 0.05);
    }

    #[test]
    fn sample_uniform_support_and_moments() {
        let spec = NoiseSpec::uniform(1.0).unwrap();
        let v: Vec<f64> = sample(&spec, 1_000_000, &SeededStream::new(2, 0));
        assert!(v.iter().all(|x| x.abs() <= SQRT_3));
        let (_, std) = moments(&v);
        assert!((std - 1.0).abs() < 0.01);
        assert!((sample_kurtosis(&v).unwrap() + 1.2).abs() < 0.05);
    }

    #[test]
    fn sample_normal_uniform_std() {
        let spec = NoiseSpec::normal_uniform(0.25, 0.217).unwrap();
        let v: Vec<f64> = sample(&spec, 1_000_000, &SeededStream::new(3, 0));
        let (_, std) = moments(&v);
        assert!((std - 0.331).abs() < 0.005, "std {std}");
    }

    #[test]
    fn sampling_is_deterministic_and_generic() {
        let spec = NoiseSpec::normal_uniform(0.4, 0.3).unwrap();
        let s = SeededStream::new(11, 5);
        let a: Vec<f64> = sample(&spec, 1000, &s);
        let b: Vec<f64> = sample(&spec, 1000, &s);
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        let c: Vec<f32> = sample(&spec, 1000, &s);
        for (x, y) in a.iter().zip(&c) {
            assert_eq!(*x as f32, *y);
        }
    }

    #[test]
    fn fast_quantile_is_accurate() {
        for i in 1..2000 {
            let u = i as f64 / 2000.0;
            let exact = crate::numerics::std_normal_quantile(u).unwrap();
            assert!((fast_normal_quantile(u) - exact).abs() < 1e-12);
        }
        for u in [1e-300, 1e-30, 1e-10, 1.0 - 1e-10] {
            let exact = crate::numerics::std_normal_quantile(u).unwrap();
            assert!((fast_normal_quantile(u) - exact).abs() < 1e-9 * exact.abs());
        }
    }

    #[test]
    fn pdf_examples() {
        let nu = nu_lambda(1.0, 1.0);
        assert!((pdf_1d(&nu, 0.0) - 0.5 * (std_normal_cdf(1.0) - std_normal_cdf(-1.0))).abs() < 1e-15);
        assert!((pdf_1d(&nu, 0.0) - 0.341345).abs() < 1e-6);
        assert_eq!(pdf_1d(&nu, -5.0), pdf_1d(&nu, 5.0));
        let g = NoiseSpec::gaussian(2.0).unwrap();
        assert!((pdf_1d(&g, 0.0) - 1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-15);
        assert!((pdf_1d(&g, 0.0) - 0.199471).abs() < 1e-6);
        let u = NoiseSpec::uniform(1.0 / SQRT_3).unwrap();
        assert!((pdf_1d(&u, 0.3) - 0.5).abs() < 1e-12);
        assert_eq!(pdf_1d(&u, 1.5), 0.0);
    }

    #[test]
    fn cdf_examples() {
        let nu = nu_lambda(1.0, 1.0);
        assert_eq!(cdf_1d(&nu, 0.0), 0.5);
        let far = nu_lambda(0.5, 0.75);
        assert!((cdf_1d(&far, 10.0) - 1.0).abs() < 1e-12);
        assert!(cdf_1d(&far, -10.0) < 1e-12);
        let u = NoiseSpec::uniform(1.0 / SQRT_3).unwrap();
        assert!((cdf_1d(&u, 0.5) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn kurtosis_examples() {
        assert_eq!(kurtosis(&NoiseSpec::gaussian(1.0).unwrap()).unwrap(), 0.0);
        assert!((kurtosis(&NoiseSpec::uniform(0.7).unwrap()).unwrap() + 1.2).abs() < 1e-12);
        let k1 = kurtosis(&NoiseSpec::normal_uniform(1.0, 0.866).unwrap()).unwrap();
        assert!((k1 + 0.22).abs() < 0.005, "{k1}");
        let k2 = kurtosis(&NoiseSpec::normal_uniform(1.0, 1.155).unwrap()).unwrap();
        assert!((k2 + 0.39).abs() < 0.005, "{k2}");
    }

    #[test]
    fn kurtosis_target_inverse() {
        // Independent route: K = -1.2 (r^2 / (1 + r^2))^2 with r = sigma_u / sigma_n.
        let closed = |sn: f64, k: f64| {
            let s = (-k / 1.2).sqrt();
            sn * (s / (1.0 - s)).sqrt()
        };
        for &(sn, k) in &[(1.0, -0.22), (0.5, -0.22), (0.25, -0.39), (2.0, -1.0), (1.0, -1e-6)] {
            let su = nu_sigma_u_for_target_kurtosis(sn, k).unwrap();
            assert!((su - closed(sn, k)).abs() < 1e-10 * (1.0 + su));
            let back = kurtosis(&NoiseSpec::normal_uniform(sn, su).unwrap()).unwrap();
            assert!((back - k).abs() < 1e-9);
        }
        assert!((nu_sigma_u_for_target_kurtosis(1.0, -0.22).unwrap() - 0.866).abs() < 0.001);
        assert!((nu_sigma_u_for_target_kurtosis(0.5, -0.22).unwrap() - 0.433).abs() < 0.001);
        assert!(nu_sigma_u_for_target_kurtosis(1.0, -1e-12).unwrap() < 1e-3);
        assert!(nu_sigma_u_for_target_kurtosis(1.0, 0.0).is_err());
        assert!(nu_sigma_u_for_target_kurtosis(1.0, -1.2).is_err());
    }
}
