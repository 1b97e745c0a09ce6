use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::image::Image;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stable sample identity. Derived datasets extend the parent id with a
/// suffix (`src/00012+stk`), so provenance survives transformations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleId(pub String);

impl SampleId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn derive(&self, suffix: &str) -> Self {
        Self(format!("{}+{}", self.0, suffix))
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T = f32> {
    pub id: SampleId,
    pub image: Image<T>,
    pub goal_label: Option<usize>,
    pub subsidiary_label: Option<usize>,
    pub is_oos: bool,
    pub is_stickered: bool,
}

impl<T: Scalar> Sample<T> {
    pub fn plain(id: SampleId, image: Image<T>, goal_label: Option<usize>) -> Self {
        Self {
            id,
            image,
            goal_label,
            subsidiary_label: None,
            is_oos: false,
            is_stickered: false,
        }
    }
}

/// Immutable ordered collection of samples with its label-space sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T = f32> {
    pub samples: Vec<Sample<T>>,
    pub goal_classes: usize,
    /// `|C_n|`; the out-of-source index is exactly this value.
    pub subsidiary_classes: usize,
    pub domain_tag: String,
    pub class_names: Vec<String>,
    /// Non-fatal findings recorded at construction (e.g. missing classes).
    pub warnings: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        samples: Vec<Sample<T>>,
        goal_classes: usize,
        subsidiary_classes: usize,
        domain_tag: impl Into<String>,
    ) -> Result<Self> {
        let mut ds = Self {
            samples,
            goal_classes,
            subsidiary_classes,
            domain_tag: domain_tag.into(),
            class_names: (0..goal_classes).map(|i| format!("class_{i:03}")).collect(),
            warnings: Vec::new(),
        };
        ds.validate()?;
        ds.record_coverage();
        Ok(ds)
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        self.class_names = names;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn oos_label(&self) -> usize {
        self.subsidiary_classes
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.samples.len());
        for s in &self.samples {
            if !seen.insert(&s.id) {
                return Err(Error::InvalidArgument(format!("duplicate sample id {}", s.id)));
            }
            if let Some(y) = s.goal_label {
                if y >= self.goal_classes {
                    return Err(Error::LabelOutOfRange {
                        label: y,
                        classes: self.goal_classes,
                    });
                }
            }
            if let Some(y) = s.subsidiary_label {
                if y > self.subsidiary_classes {
                    return Err(Error::LabelOutOfRange {
                        label: y,
                        classes: self.subsidiary_classes + 1,
                    });
                }
            }
            if s.is_oos && s.subsidiary_label != Some(self.subsidiary_classes) {
                return Err(Error::InvalidArgument(format!(
                    "OOS sample {} must carry subsidiary label {}",
                    s.id, self.subsidiary_classes
                )));
            }
            if s.is_stickered && s.subsidiary_label.is_none() {
                return Err(Error::InvalidArgument(format!(
                    "stickered sample {} has no subsidiary label",
                    s.id
                )));
            }
        }
        Ok(())
    }

    fn record_coverage(&mut self) {
        if !self.samples.iter().any(|s| s.goal_label.is_some()) {
            return;
        }
        let mut present = vec![false; self.goal_classes];
        for y in self.samples.iter().filter_map(|s| s.goal_label) {
            present[y] = true;
        }
        let missing: Vec<usize> = (0..self.goal_classes).filter(|&c| !present[c]).collect();
        if !missing.is_empty() {
            let msg = format!("goal classes without samples: {missing:?}");
            log::warn!("{}: {msg}", self.domain_tag);
            self.warnings.push(msg);
        }
    }

    pub fn is_labeled(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.goal_label.is_some())
    }

    /// Concatenation; both datasets must agree on label-space sizes. A side
    /// without any subsidiary labels adopts the other side's `|C_n|`.
    pub fn union(&self, other: &Self, tag: impl Into<String>) -> Result<Self> {
        let has_sub = |d: &Self| d.samples.iter().any(|s| s.subsidiary_label.is_some());
        let subsidiary_classes = match (has_sub(self), has_sub(other)) {
            (_, false) => self.subsidiary_classes,
            (false, true) => other.subsidiary_classes,
            (true, true) => self.subsidiary_classes,
        };
        if self.goal_classes != other.goal_classes
            || (has_sub(self) && has_sub(other) && self.subsidiary_classes != other.subsidiary_classes)
        {
            return Err(Error::InvalidArgument(format!(
                "label-space mismatch: ({}, {}) vs ({}, {})",
                self.goal_classes,
                self.subsidiary_classes,
                other.goal_classes,
                other.subsidiary_classes
            )));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Ok(Self::new(samples, self.goal_classes, subsidiary_classes, tag)?
            .with_class_names(self.class_names.clone()))
    }

    /// Same samples with goal labels removed (target-side view).
    pub fn without_goal_labels(&self) -> Self {
        let mut ds = self.clone();
        for s in &mut ds.samples {
            s.goal_label = None;
        }
        ds
    }

    pub fn map_samples(&self, tag: impl Into<String>, f: impl FnMut(&Sample<T>) -> Sample<T>) -> Result<Self> {
        let samples = self.samples.iter().map(f).collect();
        Ok(Self::new(samples, self.goal_classes, self.subsidiary_classes, tag)?
            .with_class_names(self.class_names.clone()))
    }

    pub fn subset(&self, indices: &[usize], tag: impl Into<String>) -> Result<Self> {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Ok(Self::new(samples, self.goal_classes, self.subsidiary_classes, tag)?
            .with_class_names(self.class_names.clone()))
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    id: s.id.clone(),
                    image: s.image.cast(),
                    goal_label: s.goal_label,
                    subsidiary_label: s.subsidiary_label,
                    is_oos: s.is_oos,
                    is_stickered: s.is_stickered,
                })
                .collect(),
            goal_classes: self.goal_classes,
            subsidiary_classes: self.subsidiary_classes,
            domain_tag: self.domain_tag.clone(),
            class_names: self.class_names.clone(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn goal_label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.goal_classes];
        for y in self.samples.iter().filter_map(|s| s.goal_label) {
            counts[y] += 1;
        }
        counts
    }
}
