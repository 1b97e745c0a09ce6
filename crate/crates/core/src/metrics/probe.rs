use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState};
use crate::rng::{rng_for, stream};
use crate::scalar::{argmax, softmax_in_place};

/// Linear-probe training budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub iterations: usize,
    pub lr: f64,
    pub l2: f64,
    pub train_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            lr: 0.05,
            l2: 1e-4,
            train_fraction: 0.7,
        }
    }
}

/// Multinomial logistic regression on standardized features, trained by
/// full-batch Adam for a fixed number of iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProbe {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes x (d + 1)`, bias last.
    weights: Vec<Vec<f64>>,
}

impl LinearProbe {
    pub fn fit(x: &[Vec<f64>], y: &[usize], classes: usize, cfg: &ProbeConfig) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Shape(format!("{} feature rows vs {} labels", x.len(), y.len())));
        }
        if classes < 2 {
            return Err(Error::InvalidArgument("a probe needs at least two classes".into()));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label: bad, classes });
        }
        let d = x[0].len();
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 1e-12 { 1.0 / var.sqrt() } else { 0.0 }
            })
            .collect();
        let mut probe = Self {
            mean,
            scale,
            weights: vec![vec![0.0; d + 1]; classes],
        };
        let xs: Vec<Vec<f64>> = x.iter().map(|r| probe.standardize(r)).collect();
        let adam = AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        };
        let width = classes * (d + 1);
        let mut state = AdamState::new(width);
        let mut flat = vec![0.0; width];
        for t in 1..=cfg.iterations {
            let mut grad = vec![0.0; width];
            for (row, &label) in xs.iter().zip(y) {
                let mut p = probe.logits_std(row);
                softmax_in_place(&mut p);
                p[label] -= 1.0;
                for (k, pk) in p.iter().enumerate() {
                    let g = &mut grad[k * (d + 1)..(k + 1) * (d + 1)];
                    for j in 0..d {
                        g[j] += pk * row[j] / n;
                    }
                    g[d] += pk / n;
                }
            }
            for k in 0..classes {
                for j in 0..d {
                    grad[k * (d + 1) + j] += cfg.l2 * probe.weights[k][j];
                }
            }
            state.update(&adam, t as u64, &mut flat, &grad);
            for k in 0..classes {
                probe.weights[k].copy_from_slice(&flat[k * (d + 1)..(k + 1) * (d + 1)]);
            }
        }
        Ok(probe)
    }

    fn standardize(&self, r: &[f64]) -> Vec<f64> {
        r.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }

    fn logits_std(&self, row: &[f64]) -> Vec<f64> {
        let d = row.len();
        self.weights
            .iter()
            .map(|w| w[..d].iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + w[d])
            .collect()
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(&self.logits_std(&self.standardize(row)))
    }

    /// Fraction of rows misclassified.
    pub fn error(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let wrong = x.iter().zip(y).filter(|(r, &l)| self.predict(r) != l).count();
        wrong as f64 / x.len().max(1) as f64
    }
}

/// Per-class seeded split into `(train, test)` indices.
pub fn stratified_split(labels: &[usize], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = rng_for(seed, stream::PROBE, 0);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let mut k = ((idx.len() as f64) * train_fraction).round() as usize;
        if idx.len() >= 2 {
            k = k.clamp(1, idx.len() - 1);
        }
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Trains a probe on a stratified split and returns its held-out error.
pub fn probe_error(x: &[Vec<f64>], y: &[usize], classes: usize, seed: u64, cfg: &ProbeConfig) -> Result<f64> {
    let (train, test) = stratified_split(y, cfg.train_fraction, seed);
    if test.is_empty() {
        return Err(Error::InvalidArgument("too few samples for a held-out split".into()));
    }
    let sel = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
    };
    let (xtr, ytr) = sel(&train);
    let (xte, yte) = sel(&test);
    let probe = LinearProbe::fit(&xtr, &ytr, classes, cfg)?;
    Ok(probe.error(&xte, &yte))
}
