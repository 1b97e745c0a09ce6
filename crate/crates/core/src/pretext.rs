//! Whole-image pretext tasks used as comparison points for the sticker
//! tasks: image rotation, patch location, and a 2x2 jigsaw.

use rand::Rng as _;

use crate::dataio::{Dataset, Image, Sample};
use crate::error::Result;
use crate::oos::permute_patches;
use crate::rng::{derive_seed, rng_for, stream};
use crate::scalar::Scalar;

/// The four jigsaw permutations; none is the identity.
pub const JIGSAW_PERMUTATIONS: [[usize; 4]; 4] = [[1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0], [1, 3, 0, 2]];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pretext {
    /// Rotate the whole image by `k * 90` degrees; label `k`.
    ImageRotation,
    /// Crop one quadrant and scale it back to full size; label the quadrant.
    PatchLocation,
    /// Shuffle 2x2 tiles with one of four fixed permutations; label the permutation.
    Jigsaw,
}

pub fn apply_pretext<T: Scalar>(x: &Image<T>, task: Pretext, label: usize) -> Result<Image<T>> {
    let (h, w, _) = x.dims();
    match task {
        Pretext::ImageRotation => Ok(x.rotate90(label)),
        Pretext::PatchLocation => {
            let (ph, pw) = (h / 2, w / 2);
            let (top, left) = ((label / 2) * ph, (label % 2) * pw);
            Ok(x.crop(top, left, ph, pw)?.resize(h, w))
        }
        Pretext::Jigsaw => permute_patches(x, 2, &JIGSAW_PERMUTATIONS[label]),
    }
}

/// One transformed copy per sample with a uniformly drawn 4-way label.
pub fn build_pretext_dataset<T: Scalar>(ds: &Dataset<T>, task: Pretext, seed: u64) -> Result<Dataset<T>> {
    let mut samples = Vec::with_capacity(ds.len());
    for (i, s) in ds.samples.iter().enumerate() {
        let label = rng_for(derive_seed(seed, stream::PRETEXT, i as u64), stream::PRETEXT, 0).random_range(0..4);
        samples.push(Sample {
            id: s.id.derive("ptx"),
            image: apply_pretext(&s.image, task, label)?,
            goal_label: s.goal_label,
            subsidiary_label: Some(label),
            is_oos: false,
            is_stickered: false,
        });
    }
    Ok(Dataset::new(samples, ds.goal_classes, 4, format!("{}+{task:?}", ds.domain_tag))?.with_class_names(ds.class_names.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img() -> Image<f32> {
        Image::from_fn(8, 8, 3, |y, x, c| ((y * 8 + x) * 3 + c) as f32 / 200.0)
    }

    #[test]
    fn rotation_label_zero_is_identity() {
        assert_eq!(apply_pretext(&img(), Pretext::ImageRotation, 0).unwrap(), img());
    }

    #[test]
    fn patch_location_zooms_quadrant() {
        let x = img();
        let out = apply_pretext(&x, Pretext::PatchLocation, 3).unwrap();
        assert_eq!(out, x.crop(4, 4, 4, 4).unwrap().resize(8, 8));
    }

    #[test]
    fn jigsaw_never_identity_and_preserves_pixels() {
        let x = img();
        for l in 0..4 {
            let out = apply_pretext(&x, Pretext::Jigsaw, l).unwrap();
            assert_ne!(out, x);
            let mut a: Vec<u32> = out.data().iter().map(|v| v.to_bits()).collect();
            let mut b: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dataset_labels_cover_four_classes() {
        let samples = (0..40)
            .map(|i| Sample::plain(crate::dataio::SampleId::new(format!("s{i}")), img(), Some(i % 2)))
            .collect();
        let ds = Dataset::new(samples, 2, 4, "toy").unwrap();
        let out = build_pretext_dataset(&ds, Pretext::ImageRotation, 1).unwrap();
        let mut seen = [0; 4];
        for s in &out.samples {
            seen[s.subsidiary_label.unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c > 0));
        assert_eq!(out, build_pretext_dataset(&ds, Pretext::ImageRotation, 1).unwrap());
    }
}
