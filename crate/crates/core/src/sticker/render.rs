use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::glyphs::{Bitmap, GlyphSet};
use crate::dataio::Image;
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::scalar::Scalar;

pub const TEXTURE_COUNT: usize = 7;

/// Everything needed to draw one sticker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StickerSpec {
    /// Index into the active [`GlyphSet`], i.e. the sticker class.
    pub glyph_index: usize,
    pub texture_index: usize,
    pub color: [f64; 3],
    /// Sticker side as a fraction of the shorter image side.
    pub scale: f64,
    /// Normalized sticker center; `cy` grows downward.
    pub center: (f64, f64),
    /// Clockwise rotation in quarter turns, `0..4`.
    pub rotation_class: u8,
}

/// Pixel rectangle a spec occupies on an `h x w` canvas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement {
    pub top: usize,
    pub left: usize,
    pub side: usize,
}

pub fn sticker_side(scale: f64, h: usize, w: usize) -> usize {
    ((scale * h.min(w) as f64).floor() as usize).max(2)
}

impl StickerSpec {
    pub fn placement(&self, h: usize, w: usize) -> Result<Placement> {
        if self.rotation_class > 3 {
            return Err(Error::InvalidSticker(format!(
                "rotation class {} not in 0..4",
                self.rotation_class
            )));
        }
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::InvalidSticker(format!("scale {} not in (0, 1]", self.scale)));
        }
        if self.texture_index >= TEXTURE_COUNT {
            return Err(Error::InvalidSticker(format!("texture {} unknown", self.texture_index)));
        }
        let side = sticker_side(self.scale, h, w);
        let top = (self.center.1 * h as f64 - side as f64 / 2.0).round();
        let left = (self.center.0 * w as f64 - side as f64 / 2.0).round();
        if top < 0.0 || left < 0.0 || top as usize + side > h || left as usize + side > w {
            return Err(Error::InvalidSticker(format!(
                "sticker of side {side} centered at ({:.3}, {:.3}) leaves the {h}x{w} canvas",
                self.center.0, self.center.1
            )));
        }
        Ok(Placement {
            top: top as usize,
            left: left as usize,
            side,
        })
    }
}

/// Draws uniform sticker attributes. `glyph_index`/`rotation_class` are
/// filled by the caller's task logic when they must be held fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecSampler {
    pub classes: usize,
    pub scale_range: (f64, f64),
}

impl SpecSampler {
    pub fn sample(&self, h: usize, w: usize, random_rotation: bool, rng: &mut impl rand::Rng) -> StickerSpec {
        let (lo, hi) = self.scale_range;
        let scale = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let side = sticker_side(scale, h, w);
        let top = rng.random_range(0..=h - side);
        let left = rng.random_range(0..=w - side);
        let mut color = [
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        ];
        // Keep the sticker visibly colored and never all-zero.
        let bright = rng.random_range(0..3);
        color[bright] = rng.random_range(0.6..1.0);
        StickerSpec {
            glyph_index: rng.random_range(0..self.classes),
            texture_index: rng.random_range(0..TEXTURE_COUNT),
            color,
            scale,
            center: (
                (left as f64 + side as f64 / 2.0) / w as f64,
                (top as f64 + side as f64 / 2.0) / h as f64,
            ),
            rotation_class: if random_rotation { rng.random_range(0..4) } else { 0 },
        }
    }
}

/// Texture intensity in `[0.35, 1]` at sticker-local pixel `(y, x)`.
fn texture_value(kind: usize, y: usize, x: usize, period: usize, phase: usize, noise: &[f64], side: usize) -> f64 {
    let p = period.max(2);
    match kind {
        0 => 1.0,
        1 => if (y + phase) % p < p / 2 { 1.0 } else { 0.45 },
        2 => if (x + phase) % p < p / 2 { 1.0 } else { 0.45 },
        3 => if (x + y + phase) % p < p / 2 { 1.0 } else { 0.45 },
        4 => if ((x + phase) / p + y / p) % 2 == 0 { 1.0 } else { 0.5 },
        5 => if (x + phase) % p == 0 && (y + phase) % p == 0 { 0.4 } else { 1.0 },
        _ => 0.35 + 0.65 * noise[y * side + x],
    }
}

/// Sticker canvas: black everywhere except the sticker footprint.
#[derive(Clone, Debug, PartialEq)]
pub struct StickerImage<T = f32> {
    pixels: Image<T>,
}

impl<T: Scalar> StickerImage<T> {
    /// Wraps an arbitrary canvas. The footprint must be non-empty.
    pub fn new(pixels: Image<T>) -> Result<Self> {
        if pixels.data().iter().all(|v| *v == T::zero()) {
            return Err(Error::InvalidSticker("sticker canvas has an empty footprint".into()));
        }
        Ok(Self { pixels })
    }

    pub fn pixels(&self) -> &Image<T> {
        &self.pixels
    }

    pub fn into_image(self) -> Image<T> {
        self.pixels
    }
}

/// Renders `spec` with its glyph taken from `glyphs`.
pub fn render_sticker<T: Scalar>(
    spec: &StickerSpec,
    glyphs: &GlyphSet,
    h: usize,
    w: usize,
    seed: u64,
) -> Result<StickerImage<T>> {
    if spec.glyph_index >= glyphs.len() {
        return Err(Error::InvalidSticker(format!(
            "glyph index {} outside the {}-glyph set",
            spec.glyph_index,
            glyphs.len()
        )));
    }
    let bitmap = glyphs.bitmap(spec.glyph_index).rotate90(spec.rotation_class as usize);
    render_bitmap(&bitmap, spec, h, w, seed)
}

/// Renders an already-oriented bitmap; `spec.rotation_class` only feeds validation.
pub fn render_bitmap<T: Scalar>(
    bitmap: &Bitmap,
    spec: &StickerSpec,
    h: usize,
    w: usize,
    seed: u64,
) -> Result<StickerImage<T>> {
    let Placement { top, left, side } = spec.placement(h, w)?;
    let mut rng = rng_for(seed, stream::STICKER_TEXTURE, 0);
    let period = rng.random_range(2..6usize);
    let phase = rng.random_range(0..6usize);
    let noise: Vec<f64> = if spec.texture_index == TEXTURE_COUNT - 1 {
        (0..side * side).map(|_| rng.random::<f64>()).collect()
    } else {
        Vec::new()
    };
    let mut canvas = Image::zeros(h, w, 3);
    for y in 0..side {
        let r = y * bitmap.rows / side;
        for x in 0..side {
            let c = x * bitmap.cols / side;
            if !bitmap.get(r, c) {
                continue;
            }
            let t = texture_value(spec.texture_index, y, x, period, phase, &noise, side);
            for ch in 0..3 {
                canvas.set(top + y, left + x, ch, T::c(spec.color[ch] * t));
            }
        }
    }
    StickerImage::new(canvas)
}
