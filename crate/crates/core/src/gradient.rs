//! Gaussian smoothing and the gradient-magnitude field that guides point
//! correction.

use crate::annotation::RasterImage;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Scalar;

/// Normalized 1-D Gaussian kernel of radius `ceil(3 sigma)`.
pub fn gaussian_kernel<T: Scalar>(sigma: T) -> Result<Vec<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::param(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let radius = (sigma * T::of(3.0)).ceil().to_usize().unwrap_or(0);
    let mut kernel: Vec<T> = (0..=2 * radius)
        .map(|i| {
            let d = T::of_usize(i) - T::of_usize(radius);
            (-(d * d) / (T::of(2.0) * sigma * sigma)).exp()
        })
        .collect();
    let total: T = kernel.iter().copied().sum();
    for w in &mut kernel {
        *w = *w / total;
    }
    Ok(kernel)
}

/// Separable Gaussian blur with edge-replicated borders.
pub fn gaussian_smooth<T: Scalar>(img: &RasterImage<T>, sigma: T) -> Result<RasterImage<T>> {
    let kernel = gaussian_kernel(sigma)?;
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let src = img.pixels();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut horizontal = vec![T::zero(); w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut horizontal[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (k, &kw) in kernel.iter().enumerate() {
                acc = acc + kw * row[clamp(x as isize + k as isize - radius, w)];
            }
            *o = acc;
        }
    }

    let mut vertical = vec![T::zero(); w * h];
    for y in 0..h {
        let out = &mut vertical[y * w..(y + 1) * w];
        for (k, &kw) in kernel.iter().enumerate() {
            let sy = clamp(y as isize + k as isize - radius, h);
            let row = &horizontal[sy * w..(sy + 1) * w];
            for (o, &v) in out.iter_mut().zip(row) {
                *o = *o + kw * v;
            }
        }
    }
    RasterImage::new(img.width(), img.height(), vertical)
}

/// Non-negative gradient magnitude per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T> {
    width: u32,
    height: u32,
    magnitude: Vec<T>,
    sigma: T,
}

impl<T: Scalar> GradientField<T> {
    /// Wraps precomputed magnitudes; all values must be finite and `>= 0`.
    pub fn from_magnitudes(width: u32, height: u32, magnitude: Vec<T>, sigma: T) -> Result<Self> {
        if width as usize * height as usize != magnitude.len() {
            return Err(Error::Dimensions(format!(
                "{width}x{height} field needs {} values, got {}",
                width as usize * height as usize,
                magnitude.len()
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::param("gradient field must be non-empty"));
        }
        if magnitude.iter().any(|&m| !(m >= T::zero()) || !m.is_finite()) {
            return Err(Error::param("gradient magnitudes must be finite and non-negative"));
        }
        Ok(Self {
            width,
            height,
            magnitude,
            sigma,
        })
    }

    /// Magnitudes computed from raw intensities: smooth with `sigma`, then
    /// differentiate.
    pub fn from_image(img: &RasterImage<T>, sigma: T) -> Result<Self> {
        let smoothed = gaussian_smooth(img, sigma)?;
        let mut field = gradient_magnitude(&smoothed)?;
        field.sigma = sigma;
        Ok(field)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn magnitudes(&self) -> &[T] {
        &self.magnitude
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> T {
        self.magnitude[y as usize * self.width as usize + x as usize]
    }

    pub fn max_magnitude(&self) -> T {
        self.magnitude.iter().copied().fold(T::zero(), T::max)
    }

    /// 16-bit grayscale rendering normalized to the field maximum.
    pub fn to_luma16(&self) -> image::ImageBuffer<image::Luma<u16>, Vec<u16>> {
        let max = self.max_magnitude();
        let scale = if max > T::zero() { T::of(65535.0) / max } else { T::zero() };
        let data = self
            .magnitude
            .iter()
            .map(|&m| (m * scale).round().to_u16().unwrap_or(u16::MAX))
            .collect();
        image::ImageBuffer::from_raw(self.width, self.height, data).expect("buffer matches dimensions")
    }
}

/// Central differences in the interior, one-sided differences on the border.
pub fn gradient_magnitude<T: Scalar>(img: &RasterImage<T>) -> Result<GradientField<T>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < 2 || h < 2 {
        return Err(Error::param(format!(
            "gradient needs an image of at least 2x2, got {w}x{h}"
        )));
    }
    let px = img.pixels();
    let at = |x: usize, y: usize| px[y * w + x];
    let half = T::of(0.5);
    // Clamped neighbours make the border difference one-sided; the interior
    // spans two pixels and is halved.
    let scale = |lo: usize, hi: usize| if hi - lo == 2 { half } else { T::one() };

    let mut magnitude = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            let gx = (at(xr, y) - at(xl, y)) * scale(xl, xr);
            let gy = (at(x, yd) - at(x, yu)) * scale(yu, yd);
            magnitude.push(gx.hypot(gy));
        }
    }
    GradientField::from_magnitudes(img.width(), img.height(), magnitude, T::zero())
}

/// Bilinear sample with coordinates clamped to `[0, w-1] x [0, h-1]`.
pub fn sample_field<T: Scalar>(field: &GradientField<T>, p: Point2<T>) -> T {
    let max_x = T::of_usize(field.width as usize - 1);
    let max_y = T::of_usize(field.height as usize - 1);
    let clamp = |v: T, hi: T| if v.is_nan() { T::zero() } else { v.max(T::zero()).min(hi) };
    let x = clamp(p.x, max_x);
    let y = clamp(p.y, max_y);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let ix = x0.to_u32().unwrap_or(0);
    let iy = y0.to_u32().unwrap_or(0);
    let ix1 = (ix + 1).min(field.width - 1);
    let iy1 = (iy + 1).min(field.height - 1);
    let top = field.get(ix, iy) * (T::one() - fx) + field.get(ix1, iy) * fx;
    let bottom = field.get(ix, iy1) * (T::one() - fx) + field.get(ix1, iy1) * fx;
    top * (T::one() - fy) + bottom * fy
}
