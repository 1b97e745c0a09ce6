//! Desk-scale domain pairs: rendered shape images (source) and the same
//! renders under a controlled corruption (target).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Sample, SampleId};
use super::clamp01;
use super::image::Image;
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::scalar::Scalar;

pub const DEFAULT_IMAGE_SIZE: usize = 32;

/// Shapes in class-index order. Most are upright-asymmetric so that
/// whole-image rotation is a visible distribution change.
pub const SHAPE_NAMES: &[&str] = &[
    "triangle", "tee", "ell", "dome", "arrow", "plus", "ring", "diamond",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    Color,
    Noise,
    Blur,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    pub magnitude: f64,
}

impl ShiftSpec {
    pub fn new(kind: ShiftKind, magnitude: f64) -> Self {
        Self { kind, magnitude }
    }

    pub fn color(magnitude: f64) -> Self {
        Self::new(ShiftKind::Color, magnitude)
    }
}

impl fmt::Display for ShiftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ShiftKind::Color => "color",
            ShiftKind::Noise => "noise",
            ShiftKind::Blur => "blur",
        };
        write!(f, "{kind}:{}", self.magnitude)
    }
}

impl FromStr for ShiftSpec {
    type Err = Error;

    /// Parses `name:magnitude`, e.g. `color:0.6`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, mag) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("shift `{s}` is not of the form name:magnitude")))?;
        let kind = match name.trim() {
            "color" => ShiftKind::Color,
            "noise" => ShiftKind::Noise,
            "blur" => ShiftKind::Blur,
            other => return Err(Error::Config(format!("unknown shift `{other}`"))),
        };
        let magnitude: f64 = mag
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad shift magnitude `{mag}`")))?;
        if !(0.0..=1.0).contains(&magnitude) {
            return Err(Error::Config(format!("shift magnitude {magnitude} outside [0, 1]")));
        }
        Ok(Self { kind, magnitude })
    }
}

fn inside_shape(class: usize, u: f64, v: f64) -> bool {
    // u to the right, v downward, both in [-1, 1].
    if u.abs() > 1.0 || v.abs() > 1.0 {
        return false;
    }
    match class {
        0 => u.abs() <= (v + 1.0) / 2.0,
        1 => v <= -0.45 || u.abs() <= 0.28,
        2 => u <= -0.42 || v >= 0.45,
        3 => v <= 0.55 && u * u + (v - 0.55).powi(2) / 2.4 <= 1.0,
        4 => (v <= 0.05 && u.abs() <= (v + 1.0)) || (v > 0.05 && u.abs() <= 0.3),
        5 => u.abs() <= 0.3 || v.abs() <= 0.3,
        6 => {
            let r = (u * u + v * v).sqrt();
            (0.55..=1.0).contains(&r)
        }
        7 => u.abs() + v.abs() <= 1.0,
        _ => unreachable!("class index checked by caller"),
    }
}

/// Renders one source image of `class`. All randomness is drawn from `rng`.
fn render_shape<T: Scalar>(class: usize, size: usize, rng: &mut impl rand::Rng) -> Image<T> {
    let s = size as f64;
    let horizon = rng.random_range(0.68..0.8) * s;
    let sky_top = [
        rng.random_range(0.55..0.8),
        rng.random_range(0.7..0.9),
        rng.random_range(0.85..1.0),
    ];
    let sky_low = [sky_top[0] + 0.15, sky_top[1] + 0.08, sky_top[2] - 0.05];
    let ground = [
        rng.random_range(0.35..0.55),
        rng.random_range(0.3..0.45),
        rng.random_range(0.15..0.3),
    ];
    let mut color = [
        rng.random_range(0.05..0.4),
        rng.random_range(0.05..0.4),
        rng.random_range(0.05..0.4),
    ];
    color[rng.random_range(0..3)] += 0.45;

    let cx = rng.random_range(0.38..0.62) * s;
    let cy = rng.random_range(0.38..0.55) * s;
    let half = rng.random_range(0.22..0.32) * s;
    let theta = rng.random_range(-15.0..15.0) * PI / 180.0;
    let (sin, cos) = theta.sin_cos();
    let noise = Normal::new(0.0, 0.03).unwrap();

    let mut img = Image::zeros(size, size, 3);
    for y in 0..size {
        for x in 0..size {
            let mut cover = 0.0;
            for (oy, ox) in [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)] {
                let dx = (x as f64 + ox - cx) / half;
                let dy = (y as f64 + oy - cy) / half;
                let u = cos * dx + sin * dy;
                let v = -sin * dx + cos * dy;
                if inside_shape(class, u, v) {
                    cover += 0.25;
                }
            }
            let yf = y as f64 + 0.5;
            let bg = if yf < horizon {
                let t = yf / horizon;
                [0, 1, 2].map(|c| sky_top[c] * (1.0 - t) + sky_low[c] * t)
            } else {
                ground
            };
            for c in 0..3 {
                let v = bg[c] * (1.0 - cover) + color[c] * cover + noise.sample(rng);
                img.set(y, x, c, clamp01(T::c(v)));
            }
        }
    }
    img
}

const COLOR_CAST: [f64; 3] = [0.12, -0.06, -0.14];

/// Applies the deterministic corruption named by `shift`, clamped to `[0, 1]`.
/// Magnitude 0 is the identity.
pub fn apply_shift<T: Scalar>(img: &Image<T>, shift: &ShiftSpec, rng: &mut impl rand::Rng) -> Image<T> {
    let m = shift.magnitude;
    if m == 0.0 {
        return img.clone();
    }
    let (h, w, c) = img.dims();
    match shift.kind {
        ShiftKind::Color => Image::from_fn(h, w, c, |y, x, ch| {
            let rotated = img.get(y, x, (ch + 1) % c).f64();
            let mixed = (1.0 - m) * img.get(y, x, ch).f64() + m * rotated;
            let contrast = 0.5 + (1.0 - 0.5 * m) * (mixed - 0.5);
            clamp01(T::c(contrast + m * COLOR_CAST[ch % 3]))
        }),
        ShiftKind::Noise => {
            let normal = Normal::new(0.0, 0.35 * m).unwrap();
            img.map(|v| clamp01(T::c(v.f64() + normal.sample(rng))))
        }
        ShiftKind::Blur => gaussian_blur(img, 2.0 * m),
    }
}

fn gaussian_blur<T: Scalar>(img: &Image<T>, sigma: f64) -> Image<T> {
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let (h, w, c) = img.dims();
    let pass = |src: &Image<T>, horizontal: bool| {
        Image::from_fn(h, w, c, |y, x, ch| {
            let mut acc = 0.0;
            for (k, wgt) in kernel.iter().enumerate() {
                let o = k as isize - radius;
                let (yy, xx) = if horizontal {
                    (y as isize, (x as isize + o).clamp(0, w as isize - 1))
                } else {
                    ((y as isize + o).clamp(0, h as isize - 1), x as isize)
                };
                acc += wgt * src.get(yy as usize, xx as usize, ch).f64();
            }
            T::c(acc / norm)
        })
    };
    pass(&pass(img, true), false)
}

/// Source and target datasets over the same rendered images; the target
/// copies pass through `shift`. Goal labels are kept on the target so it can
/// be scored, but nothing in the adaptation path reads them.
pub fn make_synthetic_domain_pair<T: Scalar>(
    n_classes: usize,
    n_per_class: usize,
    shift: &ShiftSpec,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    make_synthetic_domain_pair_sized(n_classes, n_per_class, shift, seed, DEFAULT_IMAGE_SIZE)
}

pub fn make_synthetic_domain_pair_sized<T: Scalar>(
    n_classes: usize,
    n_per_class: usize,
    shift: &ShiftSpec,
    seed: u64,
    image_size: usize,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if n_classes < 2 || n_classes > SHAPE_NAMES.len() {
        return Err(Error::Config(format!(
            "n_classes must be in [2, {}], got {n_classes}",
            SHAPE_NAMES.len()
        )));
    }
    if n_per_class == 0 {
        return Err(Error::Config("n_per_class must be positive".into()));
    }
    if !(0.0..=1.0).contains(&shift.magnitude) {
        return Err(Error::Config(format!("shift magnitude {} outside [0, 1]", shift.magnitude)));
    }
    let source = render_source(n_classes, n_per_class, seed, image_size)?;
    let target = shift_dataset(&source, shift, seed, "target")?;
    Ok((source, target))
}

/// Renders `n_per_class` images per class, interleaved by class.
pub fn render_source<T: Scalar>(
    n_classes: usize,
    n_per_class: usize,
    seed: u64,
    image_size: usize,
) -> Result<Dataset<T>> {
    let mut samples = Vec::with_capacity(n_classes * n_per_class);
    for i in 0..n_classes * n_per_class {
        let class = i % n_classes;
        let mut rng = rng_for(seed, stream::SYNTH_SOURCE, i as u64);
        samples.push(Sample::plain(
            SampleId::new(format!("src/{i:05}")),
            render_shape(class, image_size, &mut rng),
            Some(class),
        ));
    }
    let names = SHAPE_NAMES[..n_classes].iter().map(|s| s.to_string()).collect();
    Ok(Dataset::new(samples, n_classes, 10, "source")?.with_class_names(names))
}

/// Applies `shift` to every sample, renaming ids from `src/` to `<tag>/`.
pub fn shift_dataset<T: Scalar>(
    source: &Dataset<T>,
    shift: &ShiftSpec,
    seed: u64,
    tag: &str,
) -> Result<Dataset<T>> {
    let samples = source
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = rng_for(seed, stream::SYNTH_SHIFT, i as u64);
            let id = s.id.0.strip_prefix("src/").unwrap_or(&s.id.0);
            Sample::plain(
                SampleId::new(format!("{tag}/{id}")),
                apply_shift(&s.image, shift, &mut rng),
                s.goal_label,
            )
        })
        .collect();
    Ok(Dataset::new(samples, source.goal_classes, source.subsidiary_classes, tag)?
        .with_class_names(source.class_names.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_sizes_and_label_marginals() {
        let (s, t) = make_synthetic_domain_pair::<f32>(4, 25, &ShiftSpec::color(0.5), 0).unwrap();
        assert_eq!(s.len(), 100);
        assert_eq!(t.len(), 100);
        assert_eq!(s.goal_label_counts(), t.goal_label_counts());
        assert_eq!(s.goal_label_counts(), vec![25; 4]);
        assert_ne!(s.samples[0].image, t.samples[0].image);
    }

    #[test]
    fn zero_shift_is_pixel_identical() {
        for kind in [ShiftKind::Color, ShiftKind::Noise, ShiftKind::Blur] {
            let (s, t) = make_synthetic_domain_pair::<f32>(3, 4, &ShiftSpec::new(kind, 0.0), 1).unwrap();
            for (a, b) in s.samples.iter().zip(&t.samples) {
                assert_eq!(a.image, b.image);
            }
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let a = make_synthetic_domain_pair::<f32>(4, 5, &ShiftSpec::new(ShiftKind::Noise, 0.4), 9).unwrap();
        let b = make_synthetic_domain_pair::<f32>(4, 5, &ShiftSpec::new(ShiftKind::Noise, 0.4), 9).unwrap();
        assert_eq!(a, b);
        let c = make_synthetic_domain_pair::<f32>(4, 5, &ShiftSpec::new(ShiftKind::Noise, 0.4), 10).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn shift_parsing() {
        assert_eq!("color:0.6".parse::<ShiftSpec>().unwrap(), ShiftSpec::color(0.6));
        assert!(matches!("warp:0.2".parse::<ShiftSpec>(), Err(Error::Config(_))));
        assert!("color".parse::<ShiftSpec>().is_err());
        assert!("blur:1.5".parse::<ShiftSpec>().is_err());
    }

    #[test]
    fn class_count_bounds() {
        assert!(make_synthetic_domain_pair::<f32>(1, 5, &ShiftSpec::color(0.1), 0).is_err());
        assert!(make_synthetic_domain_pair::<f32>(9, 5, &ShiftSpec::color(0.1), 0).is_err());
    }

    #[test]
    fn every_shape_covers_some_pixels() {
        let mut rng = rng_for(0, 0, 0);
        for class in 0..SHAPE_NAMES.len() {
            let img: Image<f32> = render_shape(class, 32, &mut rng);
            assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let area = |c| {
            let mut n = 0;
            for i in 0..40 {
                for j in 0..40 {
                    if inside_shape(c, i as f64 / 20.0 - 1.0, j as f64 / 20.0 - 1.0) {
                        n += 1;
                    }
                }
            }
            n
        };
        for c in 0..SHAPE_NAMES.len() {
            assert!(area(c) > 200, "shape {c} too thin");
        }
    }
}
