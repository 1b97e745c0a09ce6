//! Pseudo out-of-source data: grid-patch shuffled source images.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::dataio::{Dataset, Image, Sample};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for, stream};
use crate::scalar::Scalar;
use crate::sticker::{sticker_one, StickerConfig, StickerTask};

pub const DEFAULT_GRID: usize = 6;
pub const DEFAULT_STICKER_PROB: f64 = 0.5;

/// Rearranges an explicit permutation of `grid x grid` patches: output patch
/// `i` is input patch `perm[i]`, patches in row-major order. Sizes that are not
/// multiples of `grid` are resized up to the next multiple and back.
pub fn permute_patches<T: Scalar>(x: &Image<T>, grid: usize, perm: &[usize]) -> Result<Image<T>> {
    let (h, w, c) = x.dims();
    if grid < 2 {
        return Err(Error::InvalidArgument(format!("grid must be at least 2, got {grid}")));
    }
    if grid > h.min(w) {
        return Err(Error::InvalidArgument(format!("grid {grid} larger than image {h}x{w}")));
    }
    if perm.len() != grid * grid {
        return Err(Error::InvalidArgument(format!(
            "permutation has {} entries, expected {}",
            perm.len(),
            grid * grid
        )));
    }
    let ph = h.div_ceil(grid);
    let pw = w.div_ceil(grid);
    let work = x.resize(ph * grid, pw * grid);
    let (wh, ww) = (ph * grid, pw * grid);
    let mut out = Image::zeros(wh, ww, c);
    for (dst, &src) in perm.iter().enumerate() {
        let (dy, dx) = (dst / grid * ph, dst % grid * pw);
        let (sy, sx) = (src / grid * ph, src % grid * pw);
        for y in 0..ph {
            for xx in 0..pw {
                for ch in 0..c {
                    out.set(dy + y, dx + xx, ch, work.get(sy + y, sx + xx, ch));
                }
            }
        }
    }
    Ok(out.resize(h, w))
}

/// Shuffles the grid patches of `x` with a seeded uniform permutation.
pub fn shuffle_patches<T: Scalar>(x: &Image<T>, grid: usize, seed: u64) -> Result<Image<T>> {
    let mut perm: Vec<usize> = (0..grid * grid).collect();
    perm.shuffle(&mut rng_for(seed, stream::OOS, 0));
    permute_patches(x, grid, &perm)
}

/// One shuffled copy per source sample, each stickered independently with
/// probability `sticker_prob`. Every sample is labeled with the OOS index
/// `|C_n|` of `subsidiary_classes`.
pub fn build_pseudo_oos_dataset<T: Scalar>(
    ds: &Dataset<T>,
    grid: usize,
    sticker_prob: f64,
    seed: u64,
    task: StickerTask,
    sticker: &StickerConfig,
) -> Result<Dataset<T>> {
    if !(0.0..=1.0).contains(&sticker_prob) {
        return Err(Error::InvalidArgument(format!("sticker_prob {sticker_prob} outside [0, 1]")));
    }
    let subsidiary_classes = task.classes(sticker.classes);
    let glyphs = sticker.glyphs();
    let mut samples = Vec::with_capacity(ds.len());
    for (i, s) in ds.samples.iter().enumerate() {
        let sample_seed = derive_seed(seed, stream::OOS, i as u64);
        let mut image = shuffle_patches(&s.image, grid, sample_seed)?;
        let stickered = rng_for(sample_seed, stream::OOS, 1).random::<f64>() < sticker_prob;
        if stickered {
            image = sticker_one(&image, task, sticker, &glyphs, sample_seed)?.0;
        }
        samples.push(Sample {
            id: s.id.derive("oos"),
            image,
            goal_label: None,
            subsidiary_label: Some(subsidiary_classes),
            is_oos: true,
            is_stickered: stickered,
        });
    }
    Ok(
        Dataset::new(samples, ds.goal_classes, subsidiary_classes, format!("{}+oos", ds.domain_tag))?
            .with_class_names(ds.class_names.clone()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{make_synthetic_domain_pair, ShiftSpec};

    fn sorted_bits(img: &Image<f32>) -> Vec<u32> {
        let mut v: Vec<u32> = img.data().iter().map(|x| x.to_bits()).collect();
        v.sort_unstable();
        v
    }

    fn quad_colors() -> Image<f32> {
        Image::from_fn(32, 32, 3, |y, x, c| {
            let q = 2 * (y / 16) + x / 16;
            [0.1, 0.3, 0.6, 0.9][q] * (c + 1) as f32 / 3.0
        })
    }

    #[test]
    fn identity_permutation_is_identity() {
        let img = quad_colors();
        assert_eq!(permute_patches(&img, 2, &[0, 1, 2, 3]).unwrap(), img);
        // Search seeds for one whose shuffle happens to be the identity.
        let seed = (0..1000u64)
            .find(|&s| {
                let mut p: Vec<usize> = (0..4).collect();
                p.shuffle(&mut rng_for(s, stream::OOS, 0));
                p == [0, 1, 2, 3]
            })
            .expect("some seed yields the identity on 4 elements");
        assert_eq!(shuffle_patches(&img, 2, seed).unwrap(), img);
    }

    #[test]
    fn two_by_two_patches_are_a_permutation() {
        let img = quad_colors();
        let out = shuffle_patches(&img, 2, 3).unwrap();
        let patch = |im: &Image<f32>, q: usize| im.crop(q / 2 * 16, q % 2 * 16, 16, 16).unwrap();
        let mut a: Vec<_> = (0..4).map(|q| patch(&img, q).data()[0].to_bits()).collect();
        let mut b: Vec<_> = (0..4).map(|q| patch(&out, q).data()[0].to_bits()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        for q in 0..4 {
            let p = patch(&out, q);
            assert!(p.data().chunks(3).all(|px| px == &p.data()[..3]));
        }
    }

    #[test]
    fn divisible_size_preserves_pixel_multiset() {
        let (src, _) = make_synthetic_domain_pair::<f32>(2, 1, &ShiftSpec::color(0.0), 0).unwrap();
        let img = src.samples[0].image.resize(216, 216);
        let out = shuffle_patches(&img, 6, 1).unwrap();
        assert_ne!(out, img);
        assert_eq!(sorted_bits(&out), sorted_bits(&img));
    }

    #[test]
    fn non_divisible_size_round_trips_shape() {
        let img = quad_colors();
        assert_eq!(shuffle_patches(&img, 6, 0).unwrap().dims(), (32, 32, 3));
    }

    #[test]
    fn grid_bounds() {
        let img = Image::<f32>::zeros(4, 4, 3);
        assert!(shuffle_patches(&img, 1, 0).is_err());
        assert!(shuffle_patches(&img, 5, 0).is_err());
        assert!(shuffle_patches(&img, 4, 0).is_ok());
    }

    #[test]
    fn oos_labels_and_sticker_rate() {
        let (src, _) = make_synthetic_domain_pair::<f32>(4, 5, &ShiftSpec::color(0.0), 0).unwrap();
        let cfg = StickerConfig::default();
        let none = build_pseudo_oos_dataset(&src, 6, 0.0, 1, StickerTask::Classification, &cfg).unwrap();
        assert!(none.samples.iter().all(|s| s.is_oos && !s.is_stickered));
        assert!(none.samples.iter().all(|s| s.subsidiary_label == Some(10)));
        for (i, (a, b)) in none.samples.iter().zip(&src.samples).enumerate() {
            let expected = shuffle_patches(&b.image, 6, derive_seed(1, stream::OOS, i as u64)).unwrap();
            assert_eq!(a.image, expected);
        }
        let loc = build_pseudo_oos_dataset(&src, 6, 1.0, 1, StickerTask::Location, &cfg).unwrap();
        assert!(loc.samples.iter().all(|s| s.is_stickered && s.subsidiary_label == Some(4)));
    }
}
