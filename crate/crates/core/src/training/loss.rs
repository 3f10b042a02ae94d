//! Training losses and their exact gradients with respect to the logits.
//!
//! Every loss is a function of the logits of a fixed list of augmented
//! copies of one input. [`augmentations`] produces that list from a stream,
//! so evaluation ([`loss_total`]) and backpropagation ([`backprop`]) see the
//! same draws.

use super::{Regularizer, TrainConfig};
use crate::classifier::{log_softmax, BaseClassifier, Gradients, MlpModel};
use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::rng::SeededStream;
use crate::scalar::Scalar;

const TAG_NU: u64 = 1;
const TAG_N: u64 = 2;
const TAG_U: u64 = 3;
const TAG_CONSISTENCY: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub ce: f64,
    pub reg: f64,
}

impl LossBreakdown {
    pub fn new(ce: f64, reg: f64, weight: f64) -> Self {
        LossBreakdown { total: ce + weight * reg, ce, reg }
    }
}

fn perturbed<T: Scalar>(x: &[T], spec: &NoiseSpec, stream: &SeededStream) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    spec.fill(stream, 0, &mut out);
    for (o, &v) in out.iter_mut().zip(x) {
        *o = *o + v;
    }
    out
}

/// Noisy copies of `x` used by the configured loss, in loss order:
/// `[x+NU, x+N, x+U]` for R_S (subsets for R_N / R_U), `m` draws for
/// consistency, a single draw otherwise. Each copy has its own substream.
pub fn augmentations<T: Scalar>(x: &[T], config: &TrainConfig, stream: &SeededStream) -> Result<Vec<Vec<T>>> {
    let main = |tag| perturbed(x, &config.noise, &stream.substream(tag));
    Ok(match config.regularizer {
        Regularizer::None => vec![main(TAG_NU)],
        Regularizer::Similarity | Regularizer::NormalOnly | Regularizer::UniformOnly => {
            let (g, u) = config.nu_parts()?;
            let mut out = vec![main(TAG_NU)];
            if config.regularizer != Regularizer::UniformOnly {
                out.push(perturbed(x, &g, &stream.substream(TAG_N)));
            }
            if config.regularizer != Regularizer::NormalOnly {
                out.push(perturbed(x, &u, &stream.substream(TAG_U)));
            }
            out
        }
        Regularizer::Consistency => (0..config.m as u64).map(|i| main(TAG_CONSISTENCY + i)).collect(),
    })
}

/// `-log softmax(z)[y]` and its gradient `softmax(z) - e_y`.
pub fn cross_entropy<T: Scalar>(logits: &[T], y: usize) -> (T, Vec<T>) {
    let lp = log_softmax(logits);
    let mut grad: Vec<T> = lp.iter().map(|l| l.exp()).collect();
    grad[y] = grad[y] - T::one();
    (-lp[y], grad)
}

/// `KL(softmax(a) || softmax(b))` with gradients with respect to `a` and `b`.
pub fn kl_from_logits<T: Scalar>(a: &[T], b: &[T]) -> (T, Vec<T>, Vec<T>) {
    let la = log_softmax(a);
    let lb = log_softmax(b);
    let p: Vec<T> = la.iter().map(|l| l.exp()).collect();
    let diff: Vec<T> = la.iter().zip(&lb).map(|(&x, &y)| x - y).collect();
    let kl = p.iter().zip(&diff).fold(T::zero(), |acc, (&pi, &d)| acc + pi * d);
    let grad_a = p.iter().zip(&diff).map(|(&pi, &d)| pi * (d - kl)).collect();
    let grad_b = lb.iter().zip(&p).map(|(&l, &pi)| l.exp() - pi).collect();
    (kl.max(T::zero()), grad_a, grad_b)
}

/// `KL(p || q)` for explicit probability vectors, with `0 ln 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(&pi, _)| pi > 0.0).map(|(&pi, &qi)| pi * (pi / qi).ln()).sum::<f64>().max(0.0)
}

/// Mean cross-entropy over `m` draws plus `λ·mean_i KL(F̂ || F_i) + η·H(F̂)`
/// with `F̂` the mean of the draw softmaxes. `ln F̂` is evaluated as a
/// log-mean-exp of log-softmaxes, so it stays finite without a guard.
fn consistency<T: Scalar>(logits: &[Vec<T>], y: usize, lambda: T, eta: T) -> (T, T, Vec<Vec<T>>) {
    let m = T::of(logits.len() as f64);
    let k = logits[0].len();
    let ls: Vec<Vec<T>> = logits.iter().map(|z| log_softmax(z)).collect();
    let f: Vec<Vec<T>> = ls.iter().map(|l| l.iter().map(|v| v.exp()).collect()).collect();
    let mut ln_hat = vec![T::zero(); k];
    let mut mean_l = vec![T::zero(); k];
    for c in 0..k {
        let top = ls.iter().map(|l| l[c]).fold(T::neg_infinity(), T::max);
        let s = ls.iter().fold(T::zero(), |acc, l| acc + (l[c] - top).exp());
        ln_hat[c] = top + s.ln() - m.ln();
        mean_l[c] = ls.iter().fold(T::zero(), |acc, l| acc + l[c]) / m;
    }
    let hat: Vec<T> = ln_hat.iter().map(|v| v.exp()).collect();
    let hat_sum = hat.iter().fold(T::zero(), |a, &b| a + b);
    let mut kl = T::zero();
    let mut h = T::zero();
    for c in 0..k {
        kl = kl + hat[c] * (ln_hat[c] - mean_l[c]);
        h = h - hat[c] * ln_hat[c];
    }
    let kl = kl.max(T::zero());
    let h = h.max(T::zero()).min(T::of((k as f64).ln()));
    let ce = ls.iter().fold(T::zero(), |acc, l| acc - l[y]) / m;
    let reg = lambda * kl + eta * h;

    // dReg/dF̂_c; constant terms cancel against sum_c F_ic = 1 below.
    let g: Vec<T> = (0..k).map(|c| lambda * (ln_hat[c] - mean_l[c]) - eta * ln_hat[c]).collect();
    let grads = f
        .iter()
        .map(|fi| {
            let gf = (0..k).fold(T::zero(), |acc, c| acc + g[c] * fi[c]);
            (0..k)
                .map(|j| {
                    let onehot = if j == y { T::one() } else { T::zero() };
                    let ce_term = fi[j] - onehot;
                    let direct = -lambda * (hat[j] - fi[j] * hat_sum);
                    let via_hat = fi[j] * (g[j] - gf);
                    (ce_term + direct + via_hat) / m
                })
                .collect()
        })
        .collect();
    (ce, reg, grads)
}

/// Loss breakdown and per-copy logit gradients of the configured objective.
/// `logits` follows the order of [`augmentations`].
pub fn loss_from_logits<T: Scalar>(logits: &[Vec<T>], y: usize, config: &TrainConfig) -> Result<(LossBreakdown, Vec<Vec<T>>)> {
    let k = logits.first().map_or(0, Vec::len);
    if y >= k {
        return Err(Error::InvalidClass { label: y, classes: k });
    }
    let weight = config.reg_weight();
    match config.regularizer {
        Regularizer::None => {
            let (ce, g) = cross_entropy(&logits[0], y);
            Ok((LossBreakdown::new(ce.as_f64(), 0.0, weight), vec![g]))
        }
        Regularizer::Consistency => {
            let (ce, reg, grads) = consistency(logits, y, T::of(config.lambda_c), T::of(config.eta));
            Ok((LossBreakdown::new(ce.as_f64(), reg.as_f64(), weight), grads))
        }
        Regularizer::Similarity | Regularizer::NormalOnly | Regularizer::UniformOnly => {
            let (ce, mut g0) = cross_entropy(&logits[0], y);
            let w = T::of(weight);
            let mut reg = T::zero();
            let mut grads = Vec::with_capacity(logits.len());
            for other in &logits[1..] {
                let (kl, ga, gb) = kl_from_logits(&logits[0], other);
                reg = reg + kl;
                for (a, &d) in g0.iter_mut().zip(&ga) {
                    *a = *a + w * d;
                }
                grads.push(gb.into_iter().map(|d| w * d).collect());
            }
            grads.insert(0, g0);
            Ok((LossBreakdown::new(ce.as_f64(), reg.as_f64(), weight), grads))
        }
    }
}

/// `KL(f(x+NU) || f(x+N)) + KL(f(x+NU) || f(x+U))` on one draw of each.
pub fn loss_similarity<T, C>(f: &C, x: &[T], spec_nu: &NoiseSpec, stream: &SeededStream) -> Result<f64>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    if spec_nu.kind() != NoiseKind::NormalUniform {
        return Err(Error::InvalidSpec("similarity regularizer needs normal-uniform noise".into()));
    }
    let config = TrainConfig { beta: 1.0, ..TrainConfig::new(*spec_nu, Regularizer::Similarity) };
    let logits = augmentations(x, &config, stream)?.iter().map(|v| f.logits(v)).collect::<Result<Vec<_>>>()?;
    Ok(logits[1..].iter().map(|o| kl_from_logits(&logits[0], o).0.as_f64()).sum())
}

/// Configured loss of classifier `f` at `(x, y)`.
pub fn loss_total<T, C>(f: &C, x: &[T], y: usize, config: &TrainConfig, stream: &SeededStream) -> Result<LossBreakdown>
where
    T: Scalar,
    C: BaseClassifier<T> + ?Sized,
{
    if y >= f.num_classes() {
        return Err(Error::InvalidClass { label: y, classes: f.num_classes() });
    }
    let logits = augmentations(x, config, stream)?.iter().map(|v| f.logits(v)).collect::<Result<Vec<_>>>()?;
    Ok(loss_from_logits(&logits, y, config)?.0)
}

/// Adds the parameter gradient of the configured loss at `(x, y)` to `grads`
/// and returns the loss. Uses the same draws as [`loss_total`].
pub fn backprop<T: Scalar>(
    model: &MlpModel<T>,
    x: &[T],
    y: usize,
    config: &TrainConfig,
    stream: &SeededStream,
    grads: &mut Gradients<T>,
) -> Result<LossBreakdown> {
    if y >= model.num_classes() {
        return Err(Error::InvalidClass { label: y, classes: model.num_classes() });
    }
    let traces = augmentations(x, config, stream)?.iter().map(|v| model.forward_trace(v)).collect::<Result<Vec<_>>>()?;
    let logits: Vec<Vec<T>> = traces.iter().map(|t| t.logits.clone()).collect();
    let (loss, logit_grads) = loss_from_logits(&logits, y, config)?;
    for (trace, g) in traces.iter().zip(&logit_grads) {
        model.backward(trace, g, grads);
    }
    Ok(loss)
}
