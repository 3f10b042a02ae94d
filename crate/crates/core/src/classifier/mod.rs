//! Base classifiers behind a common logits interface.

mod mlp;
mod oracle;

pub use mlp::{Gradients, Layer, MlpModel, Trace};
pub use oracle::{ConstantClassifier, IntervalClassifier, LinearOracle};

use crate::error::Result;
use crate::scalar::Scalar;

/// A deterministic map from an input vector to `num_classes` logits.
pub trait BaseClassifier<T: Scalar>: Sync {
    fn input_dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    fn logits(&self, x: &[T]) -> Result<Vec<T>>;

    /// Hard label: argmax of the logits, ties going to the smaller index.
    fn predict(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

impl<T: Scalar, C: BaseClassifier<T> + ?Sized> BaseClassifier<T> for &C {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        (**self).logits(x)
    }

    fn predict(&self, x: &[T]) -> Result<usize> {
        (**self).predict(x)
    }
}

/// Index of the largest value; the first one wins on ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().copied().fold(T::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

/// Numerically stable log-softmax.
pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).fold(T::zero(), |a, b| a + b).ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
        assert_eq!(argmax(&[-1.0]), 0);
    }

    #[test]
    fn softmax_sums_to_one() {
        for logits in [vec![1000.0, -1000.0, 3.0], vec![0.1, 0.2], vec![-5.0, 7.0, 7.0, 1e-3]] {
            let p = softmax(&logits);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let lp = log_softmax(&logits);
            for (a, b) in p.iter().zip(&lp) {
                assert!((a.ln() - b).abs() < 1e-12 || *a == 0.0);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn argmax_invariant_under_positive_scaling_and_shift(
            logits in proptest::collection::vec(-50.0f64..50.0, 2..8),
            scale in 0.01f64..100.0,
            shift in -100.0f64..100.0,
        ) {
            let moved: Vec<f64> = logits.iter().map(|z| z * scale + shift).collect();
            let a = argmax(&logits);
            let b = argmax(&moved);
            // Rounding can only merge or split exact ties.
            proptest::prop_assert!(a == b || (logits[a] - logits[b]).abs() < 1e-9 * (1.0 + logits[a].abs()));
            let p = softmax(&logits);
            proptest::prop_assert_eq!(argmax(&p), a);
        }
    }
}
