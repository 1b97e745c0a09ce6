//! Training objectives: label-smoothed cross-entropy, the memory-bank
//! neighborhood entropy, prediction diversity, and the subsidiary/OOS
//! cross-entropies. Each loss has a value-only form and a form that also
//! returns the gradient w.r.t. its direct input.

mod bank;

pub use bank::{loss_self_training, neighbor_probs, self_training_grad, update_bank, MemoryBank, NeighborProbs};

use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, softmax, Scalar};

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        Err(Error::LabelOutOfRange { label, classes })
    } else {
        Ok(())
    }
}

fn smoothed_target<T: Scalar>(classes: usize, label: usize, smoothing: T) -> Vec<T> {
    if classes == 1 {
        return vec![T::one()];
    }
    let off = smoothing / T::c((classes - 1) as f64);
    (0..classes)
        .map(|k| if k == label { T::one() - smoothing } else { off })
        .collect()
}

/// Cross-entropy against the smoothed target (`1 - s` on the label,
/// `s / (K - 1)` elsewhere).
pub fn ce_label_smoothed<T: Scalar>(logits: &[T], label: usize, smoothing: T) -> Result<T> {
    Ok(ce_label_smoothed_grad(logits, label, smoothing)?.0)
}

/// Loss and `d loss / d logits`.
pub fn ce_label_smoothed_grad<T: Scalar>(logits: &[T], label: usize, smoothing: T) -> Result<(T, Vec<T>)> {
    let k = logits.len();
    check_label(label, k)?;
    if !(smoothing >= T::zero() && smoothing < T::one()) {
        return Err(Error::InvalidArgument(format!("label smoothing {smoothing} outside [0, 1)")));
    }
    let lse = log_sum_exp(logits);
    let target = smoothed_target(k, label, smoothing);
    let mut loss = T::zero();
    for (q, &z) in target.iter().zip(logits) {
        if *q > T::zero() {
            loss += *q * (lse - z);
        }
    }
    let p = softmax(logits);
    let grad = p.iter().zip(&target).map(|(&p, &q)| p - q).collect();
    Ok((loss, grad))
}

/// Mean smoothed cross-entropy over a batch; gradients are already divided
/// by the batch size.
pub fn batch_ce<T: Scalar>(logits: &[Vec<T>], labels: &[usize], smoothing: T) -> Result<(T, Vec<Vec<T>>)> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::Shape(format!("{} logit rows vs {} labels", logits.len(), labels.len())));
    }
    let n = T::c(logits.len() as f64);
    let mut total = T::zero();
    let mut grads = Vec::with_capacity(logits.len());
    for (row, &y) in logits.iter().zip(labels) {
        let (l, mut g) = ce_label_smoothed_grad(row, y, smoothing)?;
        total += l;
        g.iter_mut().for_each(|v| *v /= n);
        grads.push(g);
    }
    Ok((total / n, grads))
}

/// `L_{s,n}`: sticker cross-entropy over all `|C_n| + 1` outputs.
pub fn loss_subsidiary<T: Scalar>(logits: &[T], sticker_label: usize) -> Result<T> {
    ce_label_smoothed(logits, sticker_label, T::zero())
}

/// `L_s^(od)`: cross-entropy toward the out-of-source node (the last logit).
pub fn loss_oos<T: Scalar>(logits: &[T]) -> Result<T> {
    if logits.is_empty() {
        return Err(Error::Shape("empty logits".into()));
    }
    ce_label_smoothed(logits, logits.len() - 1, T::zero())
}

/// `L_{t,n}`: the same cross-entropy on stickered target samples. The OOS
/// logit stays in the softmax denominator, so lowering this loss also lowers
/// the OOS probability.
pub fn loss_subsidiary_target<T: Scalar>(logits: &[T], sticker_label: usize) -> Result<T> {
    loss_subsidiary(logits, sticker_label)
}

/// `KL(p_hat || uniform) - log K`, which equals `-H(p_hat)`.
pub fn loss_diversity<T: Scalar>(p_hat: &[T], classes: usize) -> Result<T> {
    if p_hat.len() != classes || classes == 0 {
        return Err(Error::Shape(format!("mean prediction has {} entries for {classes} classes", p_hat.len())));
    }
    let sum: T = p_hat.iter().copied().sum();
    if (sum - T::one()).abs() > T::c(1e-4) || p_hat.iter().any(|&p| p < T::zero()) {
        return Err(Error::InvalidArgument(format!("mean prediction is not a distribution (sum {sum})")));
    }
    let log_k = T::c(classes as f64).ln();
    let kl: T = p_hat
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| p * (p.ln() + log_k))
        .sum();
    Ok(kl - log_k)
}

/// Mean softmax over the batch.
pub fn mean_prediction<T: Scalar>(logits: &[Vec<T>]) -> Vec<T> {
    let k = logits[0].len();
    let n = T::c(logits.len() as f64);
    let mut p_hat = vec![T::zero(); k];
    for row in logits {
        for (acc, p) in p_hat.iter_mut().zip(softmax(row)) {
            *acc += p / n;
        }
    }
    p_hat
}

/// Diversity loss of a batch's mean prediction and its gradient w.r.t. every logit row.
pub fn diversity_grad<T: Scalar>(logits: &[Vec<T>]) -> Result<(T, Vec<Vec<T>>)> {
    if logits.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let k = logits[0].len();
    let p_hat = mean_prediction(logits);
    let loss = loss_diversity(&p_hat, k)?;
    let tiny = T::min_positive_value();
    let dphat: Vec<T> = p_hat.iter().map(|&p| p.max(tiny).ln() + T::one()).collect();
    let n = T::c(logits.len() as f64);
    let grads = logits
        .iter()
        .map(|row| {
            let p = softmax(row);
            let inner: T = p.iter().zip(&dphat).map(|(&a, &b)| a * b).sum();
            p.iter().zip(&dphat).map(|(&pj, &gj)| pj * (gj - inner) / n).collect()
        })
        .collect();
    Ok((loss, grads))
}

/// Shannon entropy in nats.
pub fn entropy<T: Scalar>(p: &[T]) -> T {
    -p.iter().filter(|&&x| x > T::zero()).map(|&x| x * x.ln()).sum::<T>()
}

/// L2 normalization and its backward pass.
pub fn l2_normalize<T: Scalar>(v: &[T]) -> (Vec<T>, T) {
    let norm = crate::scalar::l2_norm(v).max(T::c(1e-12));
    (v.iter().map(|&x| x / norm).collect(), norm)
}

pub fn l2_normalize_backward<T: Scalar>(unit: &[T], norm: T, grad: &[T]) -> Vec<T> {
    let proj = crate::scalar::dot(unit, grad);
    unit.iter().zip(grad).map(|(&u, &g)| (g - proj * u) / norm).collect()
}
