use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major `H x W x C` image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T = f32> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "expected {} values for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::InvalidArgument(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![T::zero(); height * width * channels],
        }
    }

    /// Builds an image from a per-pixel closure; values are clamped to `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(clamp01(f(y, x, c)));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: T) {
        let i = self.index(y, x, c);
        self.data[i] = clamp01(v);
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[T] {
        let i = self.index(y, x, 0);
        &self.data[i..i + self.channels]
    }

    /// Channel-major copy (`C x H x W`), the layout the network consumes.
    pub fn to_chw(&self) -> Vec<T> {
        let (h, w, c) = self.dims();
        let mut out = vec![T::zero(); h * w * c];
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    out[(ch * h + y) * w + x] = self.data[(y * w + x) * c + ch];
                }
            }
        }
        out
    }

    /// Bilinear resize with half-pixel centers.
    pub fn resize(&self, height: usize, width: usize) -> Self {
        if height == self.height && width == self.width {
            return self.clone();
        }
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        let c = self.channels;
        let mut out = Self::zeros(height, width, c);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = T::c(fy - y0 as f64);
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = T::c(fx - x0 as f64);
                for ch in 0..c {
                    let top = self.get(y0, x0, ch) * (T::one() - tx) + self.get(y0, x1, ch) * tx;
                    let bot = self.get(y1, x0, ch) * (T::one() - tx) + self.get(y1, x1, ch) * tx;
                    out.set(y, x, ch, top * (T::one() - ty) + bot * ty);
                }
            }
        }
        out
    }

    /// Rotates by `k * 90` degrees clockwise.
    pub fn rotate90(&self, k: usize) -> Self {
        let mut img = self.clone();
        for _ in 0..(k % 4) {
            let (h, w, c) = img.dims();
            let mut out = Self::zeros(w, h, c);
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..c {
                        // (y, x) -> (x, h - 1 - y)
                        out.data[(x * h + (h - 1 - y)) * c + ch] = img.get(y, x, ch);
                    }
                }
            }
            img = out;
        }
        img
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width || height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "crop {height}x{width} at ({top}, {left}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let c = self.channels;
        let mut out = Self::zeros(height, width, c);
        for y in 0..height {
            let src = self.index(top + y, left, 0);
            let dst = out.index(y, 0, 0);
            out.data[dst..dst + width * c].copy_from_slice(&self.data[src..src + width * c]);
        }
        Ok(out)
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| clamp01(f(v))).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| U::c(v.f64())).collect(),
        }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

#[inline]
pub(crate) fn clamp01<T: Scalar>(v: T) -> T {
    if v.is_nan() {
        T::zero()
    } else {
        v.max(T::zero()).min(T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image<f32> {
        Image::from_fn(h, w, 3, |y, x, c| ((y * w + x) * 3 + c) as f32 / (h * w * 3) as f32)
    }

    #[test]
    fn rejects_bad_shapes_and_ranges() {
        assert!(Image::<f32>::new(2, 2, 3, vec![0.0; 11]).is_err());
        assert!(Image::<f32>::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::<f32>::new(0, 1, 1, vec![]).is_err());
    }

    #[test]
    fn four_quarter_turns_is_identity() {
        let img = ramp(5, 7);
        assert_eq!(img.rotate90(4), img);
        assert_eq!(img.rotate90(1).dims(), (7, 5, 3));
        assert_eq!(img.rotate90(2), img.rotate90(1).rotate90(1));
    }

    #[test]
    fn quarter_turn_moves_top_left_to_top_right() {
        let mut img = Image::<f32>::zeros(4, 4, 1);
        img.set(0, 0, 0, 1.0);
        assert_eq!(img.rotate90(1).get(0, 3, 0), 1.0);
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = ramp(6, 6);
        assert_eq!(img.resize(6, 6), img);
        let flat = Image::<f32>::from_fn(5, 5, 3, |_, _, _| 0.25);
        assert!(flat.resize(9, 7).data().iter().all(|&v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn chw_layout() {
        let img = ramp(2, 3);
        let chw = img.to_chw();
        assert_eq!(chw[0], img.get(0, 0, 0));
        assert_eq!(chw[2 * 3 + 1], img.get(0, 1, 1));
    }
}
