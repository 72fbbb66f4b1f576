use crate::error::{Error, Result};
use crate::image::{reflect_index, ModalImage};

use super::group::GroupElement;

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub col: usize,
    pub row: usize,
    pub width: usize,
    pub height: usize,
}

impl Region {
    pub fn new(col: usize, row: usize, width: usize, height: usize) -> Self {
        Self { col, row, width, height }
    }

    pub fn full(image: &ModalImage) -> Self {
        Self::new(0, 0, image.width(), image.height())
    }

    /// The region shrunk by `margin` pixels on every side.
    pub fn inset(image: &ModalImage, margin: usize) -> Result<Self> {
        if 2 * margin >= image.width() || 2 * margin >= image.height() {
            return Err(Error::TooSmall(format!("margin {margin} leaves no region")));
        }
        Ok(Self::new(margin, margin, image.width() - 2 * margin, image.height() - 2 * margin))
    }

    pub fn fits(&self, image: &ModalImage) -> bool {
        self.width > 0
            && self.height > 0
            && self.col + self.width <= image.width()
            && self.row + self.height <= image.height()
    }

    /// Pixel coordinates of the centre, the origin of the transform coordinates.
    pub fn centre(&self) -> (f64, f64) {
        (self.col as f64 + (self.width as f64 - 1.0) / 2.0, self.row as f64 + (self.height as f64 - 1.0) / 2.0)
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }
}

/// A warped crop and the mask of samples that fell inside the source image.
#[derive(Debug, Clone)]
pub struct Warped {
    pub image: ModalImage,
    pub valid: Vec<bool>,
}

/// Samples `image` at `τ x` for every pixel `x` of `region`, with coordinates
/// centred on `origin`. Samples outside the image take the nearest border value
/// and are flagged invalid.
pub fn warp_about(image: &ModalImage, tau: &GroupElement, region: &Region, origin: (f64, f64)) -> Warped {
    let m = tau.matrix();
    let mut valid = Vec::with_capacity(region.width * region.height);
    let max_x = (image.width() - 1) as f64;
    let max_y = (image.height() - 1) as f64;
    let warped = ModalImage::from_fn(region.width, region.height, image.modality(), |r, c| {
        let x = (region.col + c) as f64 - origin.0;
        let y = (region.row + r) as f64 - origin.1;
        let sx = m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)] + origin.0;
        let sy = m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)] + origin.1;
        match image.bilinear(sx, sy) {
            Some(v) => {
                valid.push(true);
                v
            }
            None => {
                valid.push(false);
                let cx = if sx.is_finite() { sx.clamp(0.0, max_x) } else { 0.0 };
                let cy = if sy.is_finite() { sy.clamp(0.0, max_y) } else { 0.0 };
                image.bilinear(cx, cy).unwrap_or(0.0)
            }
        }
    });
    Warped { image: warped, valid }
}

/// [`warp_about`] centred on the region.
pub fn warp(image: &ModalImage, tau: &GroupElement, region: &Region) -> Warped {
    warp_about(image, tau, region, region.centre())
}

/// Bilinear value and derivative. On grid lines the derivative across the line
/// is the average of both neighbouring cells.
pub(crate) fn sample_with_gradient(image: &ModalImage, x: f64, y: f64) -> Option<(f64, f64, f64)> {
    let (v, mut gx, mut gy) = image.bilinear_with_gradient(x, y)?;
    let (w, h) = (image.width(), image.height());
    if x.fract() == 0.0 && x > 0.0 && x < (w - 1) as f64 {
        gx = 0.5 * (gx + image.bilinear_with_gradient(x - 0.5, y)?.1);
    }
    if y.fract() == 0.0 && y > 0.0 && y < (h - 1) as f64 {
        gy = 0.5 * (gy + image.bilinear_with_gradient(x, y - 0.5)?.2);
    }
    Some((v, gx, gy))
}

/// Per-pixel `(∂/∂x, ∂/∂y, 0)`: central differences inside, one-sided at borders.
pub fn image_gradient(image: &ModalImage) -> Result<Vec<[f64; 3]>> {
    let (w, h) = (image.width(), image.height());
    if w < 3 || h < 3 {
        return Err(Error::TooSmall(format!("gradient needs 3x3, got {w}x{h}")));
    }
    let diff = |lo: f64, hi: f64, span: f64| (hi - lo) / span;
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let gx = match c {
                0 => diff(image.get(r, 0), image.get(r, 1), 1.0),
                _ if c == w - 1 => diff(image.get(r, c - 1), image.get(r, c), 1.0),
                _ => diff(image.get(r, c - 1), image.get(r, c + 1), 2.0),
            };
            let gy = match r {
                0 => diff(image.get(0, c), image.get(1, c), 1.0),
                _ if r == h - 1 => diff(image.get(r - 1, c), image.get(r, c), 1.0),
                _ => diff(image.get(r - 1, c), image.get(r + 1, c), 2.0),
            };
            out.push([gx, gy, 0.0]);
        }
    }
    Ok(out)
}

/// Separable 5-tap Gaussian with `σ = 1`.
fn pyramid_kernel() -> [f64; 5] {
    let mut k = [0.0; 5];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *v = (-d * d / 2.0).exp();
    }
    let total: f64 = k.iter().sum();
    k.map(|v| v / total)
}

/// Smooths with a mirrored 5x5 Gaussian (`σ = 1`) and keeps every second pixel.
pub fn pyramid_down(image: &ModalImage) -> Result<ModalImage> {
    let (w, h) = (image.width(), image.height());
    if w < 2 || h < 2 {
        return Err(Error::TooSmall(format!("cannot halve {w}x{h}")));
    }
    let k = pyramid_kernel();
    let rows = ModalImage::from_fn(w, h, image.modality(), |r, c| {
        (0..5).map(|i| k[i] * image.get(r, reflect_index(c as isize + i as isize - 2, w))).sum()
    });
    Ok(ModalImage::from_fn(w / 2, h / 2, image.modality(), |r, c| {
        (0..5).map(|i| k[i] * rows.get(reflect_index(2 * r as isize + i as isize - 2, h), 2 * c)).sum()
    }))
}

/// Level 0 is `image`; each further level halves the previous one.
pub fn gaussian_pyramid(image: &ModalImage, levels: usize) -> Result<Vec<ModalImage>> {
    if levels == 0 {
        return Err(Error::InvalidParameter("pyramid needs at least one level".into()));
    }
    let mut out = vec![image.clone()];
    for _ in 1..levels {
        let next = pyramid_down(out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}
