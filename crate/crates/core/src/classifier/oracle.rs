//! Classifiers whose smoothed class probabilities are known in closed form.

use super::BaseClassifier;
use crate::error::{Error, Result};
use crate::noise::{cdf_1d, NoiseSpec, SQRT_3};
use crate::numerics::{std_normal_cdf, Probability};
use crate::scalar::Scalar;

/// Binary classifier `1[w·x + b > 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOracle<T> {
    w: Vec<T>,
    b: T,
}

impl<T: Scalar> LinearOracle<T> {
    pub fn new(w: Vec<T>, b: T) -> Result<Self> {
        let norm = w.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt();
        if w.is_empty() || !(norm > 0.0) || !norm.is_finite() || !b.is_finite() {
            return Err(Error::InvalidConfig("linear oracle needs a finite nonzero weight vector".into()));
        }
        Ok(LinearOracle { w, b })
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn bias(&self) -> T {
        self.b
    }

    pub fn w_norm(&self) -> f64 {
        self.w.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt()
    }

    /// `w·x + b` in double precision.
    pub fn margin(&self, x: &[T]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w.as_f64() * v.as_f64()).sum::<f64>() + self.b.as_f64()
    }

    /// Exact `P[w·(x + e) + b > 0]` for `e ~ N(0, sigma^2 I)`.
    pub fn gaussian_smoothed_prob(&self, x: &[T], sigma: f64) -> Result<Probability> {
        if !(sigma > 0.0) {
            return Err(Error::domain("sigma must be > 0"));
        }
        Ok(Probability::saturating(std_normal_cdf(self.margin(x) / (sigma * self.w_norm()))))
    }

    /// Exact class-1 probability under the boxcar `U(-λ, λ)`, λ = √3·sigma_u,
    /// for a one-dimensional oracle.
    pub fn uniform_smoothed_prob_1d(&self, x: T, sigma_u: f64) -> Result<Probability> {
        if self.w.len() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.w.len() });
        }
        if !(sigma_u > 0.0) {
            return Err(Error::domain("sigma_u must be > 0"));
        }
        let lambda = SQRT_3 * sigma_u;
        let offset = self.margin(&[x]) / self.w[0].as_f64().abs();
        Ok(Probability::saturating((lambda + offset) / (2.0 * lambda)))
    }

    /// Exact class-1 probability in one dimension under any noise law.
    pub fn smoothed_prob_1d(&self, x: T, spec: &NoiseSpec) -> Result<Probability> {
        if self.w.len() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.w.len() });
        }
        // P[w e > -m] = P[e < m / |w|] by symmetry of the noise.
        let m = self.margin(&[x]);
        Ok(Probability::saturating(cdf_1d(spec, m / self.w[0].as_f64().abs())))
    }
}

impl<T: Scalar> BaseClassifier<T> for LinearOracle<T> {
    fn input_dim(&self) -> usize {
        self.w.len()
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.w.len() {
            return Err(Error::DimensionMismatch { expected: self.w.len(), got: x.len() });
        }
        // A zero margin ties, and ties go to class 0.
        Ok(vec![T::zero(), T::of(self.margin(x))])
    }

    fn predict(&self, x: &[T]) -> Result<usize> {
        if x.len() != self.w.len() {
            return Err(Error::DimensionMismatch { expected: self.w.len(), got: x.len() });
        }
        Ok(usize::from(self.margin(x) > 0.0))
    }
}

/// Always predicts the same class.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantClassifier {
    pub label: usize,
    pub num_classes: usize,
    pub input_dim: usize,
}

impl ConstantClassifier {
    pub fn new(label: usize, num_classes: usize, input_dim: usize) -> Result<Self> {
        if num_classes < 2 || label >= num_classes {
            return Err(Error::InvalidClass { label, classes: num_classes });
        }
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be >= 1".into()));
        }
        Ok(ConstantClassifier { label, num_classes, input_dim })
    }
}

impl<T: Scalar> BaseClassifier<T> for ConstantClassifier {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        let mut out = vec![T::zero(); self.num_classes];
        out[self.label] = T::one();
        Ok(out)
    }
}

/// One-dimensional piecewise-constant classifier on a grid of breakpoints:
/// `labels[i]` applies on `[breaks[i-1], breaks[i])` with the outer
/// intervals unbounded. Smoothed class probabilities are exact sums of
/// noise CDF differences.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalClassifier {
    breaks: Vec<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl IntervalClassifier {
    pub fn new(breaks: Vec<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != breaks.len() + 1 {
            return Err(Error::InvalidConfig("need exactly one more label than breakpoints".into()));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidConfig("breakpoints must be finite and strictly increasing".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidClass { label: bad, classes: num_classes });
        }
        if num_classes < 2 {
            return Err(Error::InvalidConfig("need at least two classes".into()));
        }
        Ok(IntervalClassifier { breaks, labels, num_classes })
    }

    pub fn label_at(&self, x: f64) -> usize {
        self.labels[self.breaks.partition_point(|&b| b <= x)]
    }

    /// Exact `P[f(x + e) = c]` for every class `c`.
    pub fn smoothed_probs(&self, x: f64, spec: &NoiseSpec) -> Vec<f64> {
        let mut probs = vec![0.0; self.num_classes];
        let mut prev = 0.0;
        for (i, &label) in self.labels.iter().enumerate() {
            let upper = if i < self.breaks.len() { cdf_1d(spec, self.breaks[i] - x) } else { 1.0 };
            probs[label] += (upper - prev).max(0.0);
            prev = upper;
        }
        probs
    }
}

impl<T: Scalar> BaseClassifier<T> for IntervalClassifier {
    fn input_dim(&self) -> usize {
        1
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.num_classes];
        out[BaseClassifier::<T>::predict(self, x)?] = T::one();
        Ok(out)
    }

    fn predict(&self, x: &[T]) -> Result<usize> {
        if x.len() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: x.len() });
        }
        Ok(self.label_at(x[0].as_f64()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::std_normal_quantile;

    #[test]
    fn gaussian_smoothed_examples() {
        let o = LinearOracle::new(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(o.gaussian_smoothed_prob(&[0.0, 3.0], 0.7).unwrap().value(), 0.5);
        let sigma = 1.7;
        let x0 = std_normal_quantile(0.6).unwrap() * sigma;
        let p = o.gaussian_smoothed_prob(&[x0, -4.0], sigma).unwrap().value();
        assert!((p - 0.6).abs() < 1e-12);
        // 0.2533 is the 4-digit quantile; still 0.6 to 4 digits.
        let p4 = o.gaussian_smoothed_prob(&[0.2533 * sigma, 1.0], sigma).unwrap().value();
        assert!((p4 - 0.6).abs() < 1e-4);
    }

    #[test]
    fn uniform_smoothed_examples() {
        let o = LinearOracle::new(vec![1.0], 0.0).unwrap();
        let su = 0.4;
        let lambda = SQRT_3 * su;
        assert!((o.uniform_smoothed_prob_1d(0.0, su).unwrap().value() - 0.5).abs() < 1e-15);
        assert!((o.uniform_smoothed_prob_1d(lambda / 2.0, su).unwrap().value() - 0.75).abs() < 1e-12);
        assert_eq!(o.uniform_smoothed_prob_1d(2.0 * lambda, su).unwrap().value(), 1.0);
        let flipped = LinearOracle::new(vec![-2.0], 0.0).unwrap();
        assert!((flipped.uniform_smoothed_prob_1d(-lambda / 2.0, su).unwrap().value() - 0.75).abs() < 1e-12);
        let general = o.smoothed_prob_1d(lambda / 2.0, &NoiseSpec::uniform(su).unwrap()).unwrap().value();
        assert!((general - 0.75).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_margin() {
        let o = LinearOracle::new(vec![0.6, -0.8], 0.1).unwrap();
        let mut last = 0.0;
        for i in -50..=50 {
            let x = [i as f64 * 0.1, 0.0];
            let p = o.gaussian_smoothed_prob(&x, 0.5).unwrap().value();
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn linear_predict_and_ties() {
        let o = LinearOracle::new(vec![1.0], -1.0).unwrap();
        assert_eq!(o.predict(&[1.0]).unwrap(), 0);
        assert_eq!(o.predict(&[1.5]).unwrap(), 1);
        assert_eq!(BaseClassifier::<f64>::logits(&o, &[2.0]).unwrap(), vec![0.0, 1.0]);
        assert!(LinearOracle::new(vec![0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn interval_classifier_probabilities() {
        let c = IntervalClassifier::new(vec![-1.0, 1.0], vec![0, 2, 1], 3).unwrap();
        assert_eq!(c.label_at(-3.0), 0);
        assert_eq!(c.label_at(-1.0), 2);
        assert_eq!(c.label_at(0.99), 2);
        assert_eq!(c.label_at(1.0), 1);
        let spec = NoiseSpec::gaussian(0.5).unwrap();
        let p = c.smoothed_probs(0.0, &spec);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mid = std_normal_cdf(2.0) - std_normal_cdf(-2.0);
        assert!((p[2] - mid).abs() < 1e-12);
        assert!((p[0] - p[1]).abs() < 1e-12);
        assert!(IntervalClassifier::new(vec![1.0, 0.0], vec![0, 1, 0], 2).is_err());
        assert!(IntervalClassifier::new(vec![0.0], vec![0, 5], 2).is_err());
    }

    #[test]
    fn constant_classifier() {
        let c = ConstantClassifier::new(2, 4, 3).unwrap();
        assert_eq!(BaseClassifier::<f64>::predict(&c, &[0.0, 1.0, 2.0]).unwrap(), 2);
        assert!(ConstantClassifier::new(4, 4, 3).is_err());
    }
}
