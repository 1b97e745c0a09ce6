use crate::dataio::Image;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::render::StickerImage;

/// Per-pixel binary mask: set where any channel of the sticker canvas is nonzero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn union(&self, other: &Mask) -> Mask {
        assert_eq!((self.height, self.width), (other.height, other.width));
        Mask {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        }
    }
}

pub fn compute_mask<T: Scalar>(sticker: &Image<T>) -> Mask {
    let (h, w, _) = sticker.dims();
    let mut bits = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            bits.push(sticker.pixel(y, x).iter().any(|v| *v != T::zero()));
        }
    }
    Mask { height: h, width: w, bits }
}

/// Masked mixup: `m * (lambda * x + (1 - lambda) * x_n) + (1 - m) * x`.
///
/// Pixels outside the mask are copied, not recomputed, so they match the
/// input bit for bit.
pub fn apply_intervention<T: Scalar>(x: &Image<T>, sticker: &StickerImage<T>, lambda: T) -> Result<Image<T>> {
    let xn = sticker.pixels();
    if x.dims() != xn.dims() {
        return Err(Error::Shape(format!(
            "image {:?} vs sticker {:?}",
            x.dims(),
            xn.dims()
        )));
    }
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::InvalidArgument(format!("mixup ratio {lambda} outside [0, 1]")));
    }
    let mask = compute_mask(xn);
    let (h, w, c) = x.dims();
    let mut out = x.clone();
    let data = out.data_mut();
    for y in 0..h {
        for col in 0..w {
            if !mask.get(y, col) {
                continue;
            }
            for ch in 0..c {
                let i = (y * w + col) * c + ch;
                let v = lambda * x.data()[i] + (T::one() - lambda) * xn.data()[i];
                data[i] = crate::dataio::clamp01(v);
            }
        }
    }
    Ok(out)
}
