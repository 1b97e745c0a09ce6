//! Domain and task similarity (DSM, TSM), the suitability criterion,
//! accuracy, and feature-space A-distance reports.

mod probe;
mod suitability;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, Image};
use crate::error::{Error, Result};
use crate::model::ModelBundle;
use crate::rng::{derive_seed, rng_for, stream};
use crate::scalar::{argmax, softmax, Scalar};

pub use probe::{probe_error, stratified_split, LinearProbe, ProbeConfig};
pub use suitability::{
    suitability, suitability_with_features, SubsidiaryTask, SuitabilityConfig, SuitabilityReport, DEFAULT_ZETA,
    DEFAULT_ZETA_D, DEFAULT_ZETA_N,
};

/// Which A-distance formula to report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaVariant {
    /// `max(0, 2 (1 - 2 psi))`, range `[0, 2]`.
    #[default]
    Standard,
    /// `2 psi (1 - psi)`, range `[0, 0.5]`.
    PaperVerbatim,
}

impl FormulaVariant {
    pub fn d_a(self, psi: f64) -> f64 {
        match self {
            FormulaVariant::Standard => (2.0 * (1.0 - 2.0 * psi)).max(0.0),
            FormulaVariant::PaperVerbatim => 2.0 * psi * (1.0 - psi),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FormulaVariant::Standard => "standard",
            FormulaVariant::PaperVerbatim => "paper_verbatim",
        }
    }
}

impl fmt::Display for FormulaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormulaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(FormulaVariant::Standard),
            "paper_verbatim" | "paper-verbatim" => Ok(FormulaVariant::PaperVerbatim),
            other => Err(Error::Config(format!("unknown formula variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ADistance {
    /// Held-out error of the domain probe.
    pub psi: f64,
    pub d_a: f64,
    pub variant: FormulaVariant,
    pub warning: Option<String>,
}

/// Proxy A-distance: a linear probe separates A (label 0) from B (label 1)
/// and its held-out error `psi` is mapped through `variant`.
pub fn a_distance(
    features_a: &[Vec<f64>],
    features_b: &[Vec<f64>],
    seed: u64,
    variant: FormulaVariant,
    probe: &ProbeConfig,
) -> Result<ADistance> {
    if features_a.len() < 20 || features_b.len() < 20 {
        return Err(Error::InvalidArgument(format!(
            "A-distance needs at least 20 samples per side, got {} and {}",
            features_a.len(),
            features_b.len()
        )));
    }
    let first = &features_a[0];
    if features_a.iter().chain(features_b).all(|r| r == first) {
        log::warn!("A-distance on degenerate features (all rows identical); psi set to 0.5");
        return Ok(ADistance {
            psi: 0.5,
            d_a: variant.d_a(0.5),
            variant,
            warning: Some("degenerate features: all rows identical".into()),
        });
    }
    let x: Vec<Vec<f64>> = features_a.iter().chain(features_b).cloned().collect();
    let y: Vec<usize> = std::iter::repeat_n(0, features_a.len())
        .chain(std::iter::repeat_n(1, features_b.len()))
        .collect();
    let psi = probe_error(&x, &y, 2, seed, probe)?;
    Ok(ADistance {
        psi,
        d_a: variant.d_a(psi),
        variant,
        warning: None,
    })
}

/// `1 - d_A / 2`.
pub fn dsm_from(d: &ADistance) -> f64 {
    (1.0 - d.d_a / 2.0).clamp(0.0, 1.0)
}

fn widen<T: Scalar>(rows: Vec<Vec<T>>) -> Vec<Vec<f64>> {
    rows.into_iter().map(|r| r.into_iter().map(Scalar::f64).collect()).collect()
}

/// Frozen backbone features of a dataset, computed in chunks.
pub fn dataset_features<T: Scalar>(m: &ModelBundle<T>, ds: &Dataset<T>) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(ds.len());
    for chunk in ds.samples.chunks(64) {
        let imgs: Vec<&Image<T>> = chunk.iter().map(|s| &s.image).collect();
        out.extend(widen(m.features(&imgs)?));
    }
    Ok(out)
}

/// Subsidiary-domain similarity `1 - d_A(D_s, D_{s,n}) / 2` on features of a
/// frozen backbone.
pub fn dsm<T: Scalar>(
    d_s: &Dataset<T>,
    d_sn: &Dataset<T>,
    backbone: &ModelBundle<T>,
    seed: u64,
    variant: FormulaVariant,
    probe: &ProbeConfig,
) -> Result<(f64, ADistance)> {
    if d_s.is_empty() || d_sn.is_empty() {
        return Err(Error::InvalidArgument("DSM needs two non-empty datasets".into()));
    }
    let d = a_distance(
        &dataset_features(backbone, d_s)?,
        &dataset_features(backbone, d_sn)?,
        seed,
        variant,
        probe,
    )?;
    Ok((dsm_from(&d), d))
}

/// Keeps `k` seeded-random classes and remaps labels to `0..k`; returns the
/// kept rows and their new labels.
pub fn equalize_classes(labels: &[usize], classes: usize, k: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    if classes <= k {
        return ((0..labels.len()).collect(), labels.to_vec());
    }
    let mut all: Vec<usize> = (0..classes).collect();
    all.shuffle(&mut rng_for(seed, stream::PROBE, 1));
    let mut kept = all[..k].to_vec();
    kept.sort_unstable();
    let mut rows = Vec::new();
    let mut remapped = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(pos) = kept.iter().position(|c| c == l) {
            rows.push(i);
            remapped.push(pos);
        }
    }
    (rows, remapped)
}

/// Task similarity `1 - probe error` of the subsidiary labels of `d_sn`
/// read off frozen goal-pretrained features. With `equalize = Some(k)`, tasks
/// with more than `k` classes are cut down to `k` seeded classes.
pub fn tsm_from_features(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    equalize: Option<usize>,
    seed: u64,
    probe: &ProbeConfig,
) -> Result<f64> {
    if classes < 2 {
        return Err(Error::InvalidArgument("TSM needs at least 2 subsidiary classes".into()));
    }
    let k = equalize.map_or(classes, |k| k.min(classes));
    let (rows, y) = equalize_classes(labels, classes, k, seed);
    let x: Vec<Vec<f64>> = rows.iter().map(|&i| features[i].clone()).collect();
    let err = probe_error(&x, &y, k, derive_seed(seed, stream::PROBE, 2), probe)?;
    Ok((1.0 - err).clamp(0.0, 1.0))
}

pub fn tsm<T: Scalar>(
    d_sn: &Dataset<T>,
    backbone: &ModelBundle<T>,
    equalize: Option<usize>,
    seed: u64,
    probe: &ProbeConfig,
) -> Result<f64> {
    let labels = subsidiary_labels(d_sn)?;
    tsm_from_features(&dataset_features(backbone, d_sn)?, &labels, d_sn.subsidiary_classes, equalize, seed, probe)
}

fn subsidiary_labels<T>(ds: &Dataset<T>) -> Result<Vec<usize>> {
    ds.samples
        .iter()
        .map(|s| {
            s.subsidiary_label
                .ok_or_else(|| Error::InvalidArgument(format!("sample {} has no subsidiary label", s.id)))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Goal,
    Subsidiary,
}

/// Logits of `head` for every sample, in inference mode.
pub fn predict_logits<T: Scalar>(m: &ModelBundle<T>, ds: &Dataset<T>, head: Head) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(ds.len());
    for chunk in ds.samples.chunks(64) {
        let imgs: Vec<&Image<T>> = chunk.iter().map(|s| &s.image).collect();
        out.extend(match head {
            Head::Goal => m.forward_goal(&imgs)?,
            Head::Subsidiary => m.forward_subsidiary(&imgs)?,
        });
    }
    Ok(out)
}

/// Fraction of samples whose argmax matches the label of `head`.
pub fn accuracy<T: Scalar>(m: &ModelBundle<T>, ds: &Dataset<T>, head: Head) -> Result<f64> {
    let labels = ds
        .samples
        .iter()
        .map(|s| match head {
            Head::Goal => s.goal_label,
            Head::Subsidiary => s.subsidiary_label,
        })
        .collect::<Option<Vec<usize>>>()
        .ok_or_else(|| Error::InvalidArgument(format!("dataset `{}` is unlabeled for {head:?}", ds.domain_tag)))?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty dataset".into()));
    }
    let logits = predict_logits(m, ds, head)?;
    Ok(accuracy_of(&logits, &labels))
}

pub fn accuracy_of<T: Scalar>(logits: &[Vec<T>], labels: &[usize]) -> f64 {
    let hits = logits.iter().zip(labels).filter(|(l, &y)| argmax(l) == y).count();
    hits as f64 / labels.len() as f64
}

/// Mean softmax probability the subsidiary head assigns to output `index`.
pub fn mean_subsidiary_mass<T: Scalar>(m: &ModelBundle<T>, ds: &Dataset<T>, index: usize) -> Result<f64> {
    let logits = predict_logits(m, ds, Head::Subsidiary)?;
    if logits.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    Ok(logits.iter().map(|l| softmax(l)[index].f64()).sum::<f64>() / logits.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureADistanceReport {
    pub before: ADistance,
    pub after: ADistance,
}

/// Source-vs-target A-distance on backbone features before and after adaptation.
pub fn feature_a_distance_report<T: Scalar>(
    m_before: &ModelBundle<T>,
    m_after: &ModelBundle<T>,
    d_s: &Dataset<T>,
    d_t: &Dataset<T>,
    seed: u64,
    variant: FormulaVariant,
    probe: &ProbeConfig,
) -> Result<FeatureADistanceReport> {
    let run = |m: &ModelBundle<T>| -> Result<ADistance> {
        a_distance(&dataset_features(m, d_s)?, &dataset_features(m, d_t)?, seed, variant, probe)
    };
    Ok(FeatureADistanceReport {
        before: run(m_before)?,
        after: run(m_after)?,
    })
}

#[cfg(test)]
mod tests;
