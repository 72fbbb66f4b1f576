//! Single-channel images tagged with the modality they were sensed in.

use std::fmt;
use std::str::FromStr;

use crate::error::{mismatch, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Intensity,
    Depth,
    NearInfrared,
    Unknown,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Modality::Intensity => "intensity",
            Modality::Depth => "depth",
            Modality::NearInfrared => "nir",
            Modality::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intensity" => Ok(Modality::Intensity),
            "depth" => Ok(Modality::Depth),
            "nir" => Ok(Modality::NearInfrared),
            "unknown" => Ok(Modality::Unknown),
            other => Err(Error::InvalidParameter(format!("unknown modality '{other}'"))),
        }
    }
}

/// Row-major single-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
    modality: Modality,
}

impl ModalImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>, modality: Modality) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        if values.len() != width * height {
            return Err(mismatch(width * height, values.len()));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at pixel {bad}")));
        }
        Ok(Self { width, height, values, modality })
    }

    pub fn constant(width: usize, height: usize, value: f64, modality: Modality) -> Self {
        Self { width, height, values: vec![value; width * height], modality }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        modality: Modality,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self { width, height, values, modality }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Pixel lookup with whole-sample symmetric reflection outside the image.
    #[inline]
    pub fn get_reflected(&self, row: isize, col: isize) -> f64 {
        let r = reflect_index(row, self.height);
        let c = reflect_index(col, self.width);
        self.values[r * self.width + c]
    }

    pub fn same_shape(&self, other: &ModalImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(mismatch(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Affinely maps the value range onto `[0, 1]`; constant images map to zero.
    pub fn scaled_to_unit(&self) -> ModalImage {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        let values = if span > 0.0 {
            self.values.iter().map(|v| (v - lo) / span).collect()
        } else {
            vec![0.0; self.values.len()]
        };
        ModalImage { values, ..self.clone() }
    }

    /// Crops the rectangle starting at (`row`, `col`).
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<ModalImage> {
        if row + height > self.height || col + width > self.width || width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "crop {width}x{height} at ({row},{col}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        Ok(ModalImage::from_fn(width, height, self.modality, |r, c| self.get(row + r, col + c)))
    }

    /// Bilinear interpolation at continuous pixel coordinates (x = column, y = row).
    /// Returns `None` when the point lies outside `[0, w-1] x [0, h-1]`.
    pub fn bilinear(&self, x: f64, y: f64) -> Option<f64> {
        self.bilinear_with_gradient(x, y).map(|(v, _, _)| v)
    }

    /// Bilinear interpolation together with the partial derivatives of the
    /// interpolant with respect to x and y.
    pub fn bilinear_with_gradient(&self, x: f64, y: f64) -> Option<(f64, f64, f64)> {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && x <= max_x && y <= max_y) {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = self.get(y0, x0);
        let v01 = self.get(y0, x1);
        let v10 = self.get(y1, x0);
        let v11 = self.get(y1, x1);
        let top = v00 + fx * (v01 - v00);
        let bottom = v10 + fx * (v11 - v10);
        let value = top + fy * (bottom - top);
        let dx = (1.0 - fy) * (v01 - v00) + fy * (v11 - v10);
        let dy = bottom - top;
        Some((value, dx, dy))
    }
}

/// Whole-sample symmetric reflection: index -1 maps to 1, `len` maps to `len - 2`.
#[inline]
pub fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= len as isize {
        m = period - m;
    }
    m as usize
}
