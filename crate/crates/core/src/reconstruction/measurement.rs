use std::collections::HashSet;

use crate::error::{mismatch, Error, Result};
use crate::image::reflect_index;

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementKind {
    Identity,
    /// Keeps the listed flat pixel indices, in the given order.
    Mask(Vec<usize>),
    /// Gaussian blur of size `(2d-1)²` with `σ = d/3`, then decimation by `d`.
    BlurDownsample { factor: usize },
}

/// A linear sampling operator `Φ` with an exact adjoint.
#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    kind: MeasurementKind,
    width: usize,
    height: usize,
    out_width: usize,
    out_height: usize,
    /// Blur/decimate taps: `taps_per_sample` `(pixel, weight)` entries per output.
    taps: Vec<(u32, f64)>,
    taps_per_sample: usize,
}

/// Normalized `(2d-1) x (2d-1)` Gaussian with `σ = d/3`, row-major.
pub fn gaussian_kernel(factor: usize) -> Vec<f64> {
    let size = 2 * factor - 1;
    let half = (factor - 1) as f64;
    let sigma = factor as f64 / 3.0;
    let mut k: Vec<f64> = (0..size * size)
        .map(|i| {
            let (dy, dx) = ((i / size) as f64 - half, (i % size) as f64 - half);
            (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// First sampled row/column of the decimation grid.
pub fn decimation_offset(factor: usize) -> usize {
    (factor - 1) / 2
}

impl MeasurementOperator {
    pub fn identity(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self::plain(MeasurementKind::Identity, width, height, width, height))
    }

    pub fn mask(width: usize, height: usize, kept: Vec<usize>) -> Result<Self> {
        check_dims(width, height)?;
        let mut seen = HashSet::with_capacity(kept.len());
        for &i in &kept {
            if i >= width * height {
                return Err(Error::InvalidParameter(format!("mask index {i} out of range")));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidParameter(format!("mask index {i} repeated")));
            }
        }
        let m = kept.len();
        Ok(Self::plain(MeasurementKind::Mask(kept), width, height, m, 1))
    }

    pub fn blur_downsample(width: usize, height: usize, factor: usize) -> Result<Self> {
        check_dims(width, height)?;
        if factor == 0 || factor > width || factor > height {
            return Err(Error::InvalidParameter(format!(
                "downsampling factor {factor} invalid for {width}x{height}"
            )));
        }
        let (out_width, out_height) = (width / factor, height / factor);
        let kernel = gaussian_kernel(factor);
        let size = 2 * factor - 1;
        let half = (factor - 1) as isize;
        let offset = decimation_offset(factor);
        let mut taps = Vec::with_capacity(out_width * out_height * kernel.len());
        for i in 0..out_height {
            let r = (offset + i * factor) as isize;
            for j in 0..out_width {
                let c = (offset + j * factor) as isize;
                for (t, &w) in kernel.iter().enumerate() {
                    let rr = reflect_index(r + (t / size) as isize - half, height);
                    let cc = reflect_index(c + (t % size) as isize - half, width);
                    taps.push(((rr * width + cc) as u32, w));
                }
            }
        }
        Ok(Self {
            kind: MeasurementKind::BlurDownsample { factor },
            width,
            height,
            out_width,
            out_height,
            taps,
            taps_per_sample: kernel.len(),
        })
    }

    fn plain(kind: MeasurementKind, width: usize, height: usize, ow: usize, oh: usize) -> Self {
        Self { kind, width, height, out_width: ow, out_height: oh, taps: Vec::new(), taps_per_sample: 0 }
    }

    pub fn kind(&self) -> &MeasurementKind {
        &self.kind
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// `(width, height)` of the measurement; masks report `(m, 1)`.
    pub fn output_dims(&self) -> (usize, usize) {
        (self.out_width, self.out_height)
    }

    pub fn input_len(&self) -> usize {
        self.width * self.height
    }

    pub fn output_len(&self) -> usize {
        self.out_width * self.out_height
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(mismatch(self.input_len(), x.len()));
        }
        Ok(match &self.kind {
            MeasurementKind::Identity => x.to_vec(),
            MeasurementKind::Mask(kept) => kept.iter().map(|&i| x[i]).collect(),
            MeasurementKind::BlurDownsample { .. } => self
                .taps
                .chunks_exact(self.taps_per_sample)
                .map(|taps| taps.iter().map(|&(i, w)| w * x[i as usize]).sum())
                .collect(),
        })
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.output_len() {
            return Err(mismatch(self.output_len(), y.len()));
        }
        Ok(match &self.kind {
            MeasurementKind::Identity => y.to_vec(),
            MeasurementKind::Mask(kept) => {
                let mut out = vec![0.0; self.input_len()];
                for (&i, &v) in kept.iter().zip(y) {
                    out[i] = v;
                }
                out
            }
            MeasurementKind::BlurDownsample { .. } => {
                let mut out = vec![0.0; self.input_len()];
                for (taps, &v) in self.taps.chunks_exact(self.taps_per_sample).zip(y) {
                    for &(i, w) in taps {
                        out[i as usize] += w * v;
                    }
                }
                out
            }
        })
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || (width * height) as u64 > u32::MAX as u64 {
        return Err(Error::InvalidParameter(format!("invalid image size {width}x{height}")));
    }
    Ok(())
}
