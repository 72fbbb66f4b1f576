use super::measurement::decimation_offset;
use crate::error::{Error, Result};
use crate::image::ModalImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    /// Percentage of pixels whose absolute error exceeds the threshold.
    pub bad_pixel_pct: f64,
}

/// Errors are measured on the raw values; pass images already on the 8-bit scale.
pub fn evaluate_metrics(result: &ModalImage, truth: &ModalImage, delta: f64) -> Result<Metrics> {
    result.same_shape(truth)?;
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("threshold {delta} must be non-negative")));
    }
    let n = result.len() as f64;
    let (mut sq, mut bad) = (0.0, 0usize);
    for (a, b) in result.values().iter().zip(truth.values()) {
        let e = a - b;
        sq += e * e;
        if e.abs() > delta {
            bad += 1;
        }
    }
    Ok(Metrics { rmse: (sq / n).sqrt(), bad_pixel_pct: 100.0 * bad as f64 / n })
}

/// Multiplies by 255, mapping `[0, 1]` images onto the 8-bit value range.
pub fn to_8bit_scale(image: &ModalImage) -> ModalImage {
    let values = image.values().iter().map(|v| v * 255.0).collect();
    ModalImage::new(image.width(), image.height(), values, image.modality())
        .expect("scaling keeps the shape")
}

/// Each output pixel copies the nearest decimation sample of `low`; ties go to the lower index.
pub fn nearest_neighbor_upsample(
    low: &ModalImage,
    factor: usize,
    width: usize,
    height: usize,
) -> Result<ModalImage> {
    if factor == 0 || width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!("invalid upsampling to {width}x{height} by {factor}")));
    }
    let off = decimation_offset(factor);
    let pick = |i: usize, len: usize| ((i + (factor - 1) / 2).saturating_sub(off) / factor).min(len - 1);
    Ok(ModalImage::from_fn(width, height, low.modality(), |r, c| {
        low.get(pick(r, low.height()), pick(c, low.width()))
    }))
}
