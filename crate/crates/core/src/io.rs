//! Image, operator and transform files.
//!
//! Graymaps store `round(255 v)` for `v` clamped to `[0, 1]`. Floatmaps store
//! single precision, so only values representable as `f32` survive exactly.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::image::{ModalImage, Modality};
use crate::model::{AnalysisOperator, LearningParams, OperatorPair};
use crate::registration::{Group, GroupElement};

const OPERATOR_MAGIC: &[u8] = b"COSP1\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary 8-bit portable graymap (`P5`).
    Graymap,
    /// Single-channel little-endian portable floatmap (`Pf`).
    Floatmap,
}

impl ImageFormat {
    /// `.pgm` selects the graymap; anything else the floatmap.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => ImageFormat::Graymap,
            _ => ImageFormat::Floatmap,
        }
    }
}

fn malformed(offset: usize, reason: impl Into<String>) -> Error {
    Error::MalformedFile { offset, reason: reason.into() }
}

/// Whitespace-separated header tokens with `#` comments, as in the netpbm family.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn token(&mut self) -> Result<(&'a str, usize)> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(malformed(start, "unexpected end of header"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| malformed(start, "non-ASCII header"))?;
        Ok((text, start))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (text, at) = self.token()?;
        text.parse().map_err(|_| malformed(at, format!("invalid {what} '{text}'")))
    }

    /// Skips the single whitespace byte that ends the header.
    fn finish(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(malformed(self.pos, "missing whitespace after header")),
        }
    }
}

pub fn decode_image(bytes: &[u8], modality: Modality) -> Result<ModalImage> {
    let mut header = Header { bytes, pos: 0 };
    let (magic, _) = header.token()?;
    match magic {
        "P5" => {
            let width: usize = header.number("width")?;
            let height: usize = header.number("height")?;
            let maxval: u32 = header.number("maximum value")?;
            if maxval == 0 || maxval > 255 {
                return Err(malformed(header.pos, format!("unsupported maximum value {maxval}")));
            }
            let start = header.finish()?;
            let data = pixel_data(bytes, start, width, height, 1)?;
            let values = data.iter().map(|&b| b as f64 / maxval as f64).collect();
            ModalImage::new(width, height, values, modality).map_err(|e| malformed(0, e.to_string()))
        }
        "Pf" => {
            let width: usize = header.number("width")?;
            let height: usize = header.number("height")?;
            let scale: f64 = header.number("scale")?;
            if scale == 0.0 || !scale.is_finite() {
                return Err(malformed(header.pos, "scale must be non-zero"));
            }
            let start = header.finish()?;
            let data = pixel_data(bytes, start, width, height, 4)?;
            let mut values = vec![0.0; width * height];
            for (i, chunk) in data.chunks_exact(4).enumerate() {
                let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
                let v = if scale < 0.0 { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
                if !v.is_finite() {
                    return Err(malformed(start + 4 * i, "non-finite sample"));
                }
                let (row, col) = (height - 1 - i / width, i % width);
                values[row * width + col] = v as f64;
            }
            ModalImage::new(width, height, values, modality).map_err(|e| malformed(0, e.to_string()))
        }
        _ => Err(malformed(0, format!("unknown magic '{magic}'"))),
    }
}

fn pixel_data(bytes: &[u8], start: usize, width: usize, height: usize, size: usize) -> Result<&[u8]> {
    if width == 0 || height == 0 {
        return Err(malformed(start, "empty image"));
    }
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(size))
        .ok_or_else(|| malformed(start, "image dimensions overflow"))?;
    bytes
        .get(start..start + len)
        .ok_or_else(|| malformed(bytes.len(), format!("expected {len} bytes of pixel data")))
}

pub fn encode_image(image: &ModalImage, format: ImageFormat) -> Vec<u8> {
    let (w, h) = (image.width(), image.height());
    match format {
        ImageFormat::Graymap => {
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            out.extend(image.values().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
            out
        }
        ImageFormat::Floatmap => {
            let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
            for row in (0..h).rev() {
                for col in 0..w {
                    out.extend_from_slice(&(image.get(row, col) as f32).to_le_bytes());
                }
            }
            out
        }
    }
}

pub fn read_image(path: &Path, modality: Modality) -> Result<ModalImage> {
    decode_image(&fs::read(path)?, modality)
}

/// The format follows the file extension.
pub fn write_image(path: &Path, image: &ModalImage) -> Result<()> {
    fs::write(path, encode_image(image, ImageFormat::from_path(path)))?;
    Ok(())
}

/// `COSP1` container: the magic line, a text header line, then both operators as
/// little-endian `f64` in row-major order, U first.
pub fn encode_operator_pair(pair: &OperatorPair) -> Vec<u8> {
    let p = pair.params();
    let mut out = OPERATOR_MAGIC.to_vec();
    let header = format!(
        "{} {} {} {} {} {} {} {} {}\n",
        pair.k(),
        pair.n(),
        pair.omega_u().modality(),
        pair.omega_v().modality(),
        p.nu,
        p.kappa_u,
        p.kappa_v,
        p.mu_u,
        p.mu_v
    );
    out.extend_from_slice(header.as_bytes());
    for op in [pair.omega_u(), pair.omega_v()] {
        let rows = op.rows();
        for r in 0..rows.nrows() {
            for c in 0..rows.ncols() {
                out.extend_from_slice(&rows[(r, c)].to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_operator_pair(bytes: &[u8]) -> Result<OperatorPair> {
    if !bytes.starts_with(OPERATOR_MAGIC) {
        return Err(malformed(0, "missing COSP1 magic"));
    }
    let start = OPERATOR_MAGIC.len();
    let end = bytes[start..]
        .iter()
        .position(|b| *b == b'\n')
        .map(|i| start + i)
        .ok_or_else(|| malformed(start, "unterminated header"))?;
    let mut header = Header { bytes: &bytes[..end + 1], pos: start };
    let k: usize = header.number("row count")?;
    let n: usize = header.number("patch dimension")?;
    let (mu_text, at_u) = header.token()?;
    let mod_u: Modality = mu_text.parse().map_err(|_| malformed(at_u, "unknown modality"))?;
    let (mv_text, at_v) = header.token()?;
    let mod_v: Modality = mv_text.parse().map_err(|_| malformed(at_v, "unknown modality"))?;
    let params = LearningParams {
        nu: header.number("nu")?,
        kappa_u: header.number("kappa_u")?,
        kappa_v: header.number("kappa_v")?,
        mu_u: header.number("mu_u")?,
        mu_v: header.number("mu_v")?,
    };
    let body = end + 1;
    let count = k.checked_mul(n).ok_or_else(|| malformed(start, "operator size overflows"))?;
    let expected = body + 16 * count;
    if bytes.len() != expected {
        return Err(malformed(bytes.len().min(expected), format!("expected {} bytes of coefficients", 16 * count)));
    }
    let read = |index: usize| {
        let at = body + 8 * index;
        f64::from_le_bytes(bytes[at..at + 8].try_into().expect("eight bytes"))
    };
    let u = DMatrix::from_fn(k, n, |r, c| read(r * n + c));
    let v = DMatrix::from_fn(k, n, |r, c| read(count + r * n + c));
    let invalid = |e: Error| malformed(body, e.to_string());
    let omega_u = AnalysisOperator::new(u, mod_u).map_err(invalid)?;
    let omega_v = AnalysisOperator::new(v, mod_v).map_err(invalid)?;
    params.validate().map_err(invalid)?;
    OperatorPair::new(omega_u, omega_v, params).map_err(invalid)
}

pub fn read_operator_pair(path: &Path) -> Result<OperatorPair> {
    decode_operator_pair(&fs::read(path)?)
}

pub fn write_operator_pair(path: &Path, pair: &OperatorPair) -> Result<()> {
    fs::write(path, encode_operator_pair(pair))?;
    Ok(())
}

/// One line: the group tag followed by the nine matrix entries in row-major order.
pub fn format_transform(tau: &GroupElement) -> String {
    let m = tau.matrix();
    let entries: Vec<String> = (0..9).map(|i| format!("{:e}", m[(i / 3, i % 3)])).collect();
    format!("{} {}\n", tau.group(), entries.join(" "))
}

pub fn parse_transform(text: &str) -> Result<GroupElement> {
    let mut fields = text.split_whitespace();
    let tag = fields.next().ok_or_else(|| malformed(0, "empty transform record"))?;
    let group: Group = tag.parse().map_err(|_| malformed(0, format!("unknown group '{tag}'")))?;
    let mut entries = [0.0; 9];
    for (i, e) in entries.iter_mut().enumerate() {
        let field = fields.next().ok_or_else(|| malformed(text.len(), format!("expected 9 entries, found {i}")))?;
        let at = field.as_ptr() as usize - text.as_ptr() as usize;
        *e = field.parse().map_err(|_| malformed(at, format!("invalid entry '{field}'")))?;
    }
    if let Some(extra) = fields.next() {
        let at = extra.as_ptr() as usize - text.as_ptr() as usize;
        return Err(malformed(at, "trailing data after transform"));
    }
    GroupElement::new(Matrix3::from_row_slice(&entries), group).map_err(|e| malformed(0, e.to_string()))
}
