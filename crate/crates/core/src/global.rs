//! Whole-image analysis operators assembled from a patch operator.
//!
//! Coefficients are laid out block by block: position `p` (row-major over the
//! anchor grid) owns entries `p*k .. (p+1)*k`. Patches are scaled by `1/√n`.

use nalgebra::DMatrix;

use crate::error::{mismatch, Error, Result};
use crate::image::{reflect_index, ModalImage};
use crate::model::AnalysisOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Every pixel anchors a patch; samples outside the image are mirrored.
    Reflective,
    /// Only patches lying entirely inside the image are used.
    Valid,
}

#[derive(Debug, Clone)]
pub struct GlobalAnalysis {
    /// Operator rows, row-major `k x n`, pre-multiplied by `1/√n`.
    filters: Vec<f64>,
    k: usize,
    n: usize,
    side: usize,
    width: usize,
    height: usize,
    boundary: Boundary,
    grid_width: usize,
    grid_height: usize,
    /// Source pixel of every patch entry, `positions x n`.
    gather: Vec<u32>,
}

impl GlobalAnalysis {
    pub fn new(op: &AnalysisOperator, width: usize, height: usize, boundary: Boundary) -> Result<Self> {
        let side = op.patch_side().ok_or_else(|| {
            Error::InvalidParameter(format!("patch dimension {} is not a square", op.n()))
        })?;
        Self::from_rows(op.rows(), side, width, height, boundary)
    }

    /// Builds from raw `k x side²` rows without the operator invariants.
    pub fn from_rows(
        rows: &DMatrix<f64>,
        side: usize,
        width: usize,
        height: usize,
        boundary: Boundary,
    ) -> Result<Self> {
        let n = side * side;
        if rows.ncols() != n {
            return Err(mismatch(n, rows.ncols()));
        }
        if width == 0 || height == 0 {
            return Err(Error::TooSmall(format!("{width}x{height} image")));
        }
        if (width * height) as u64 > u32::MAX as u64 {
            return Err(Error::InvalidParameter("image too large".into()));
        }
        let (grid_width, grid_height) = match boundary {
            Boundary::Reflective => (width, height),
            Boundary::Valid => {
                if side > width || side > height {
                    return Err(Error::PatchTooSmall(width.min(height)));
                }
                (width - side + 1, height - side + 1)
            }
        };
        let k = rows.nrows();
        let scale = 1.0 / (n as f64).sqrt();
        let mut filters = Vec::with_capacity(k * n);
        for r in 0..k {
            filters.extend((0..n).map(|j| rows[(r, j)] * scale));
        }

        let offset = ((side - 1) / 2) as isize;
        let mut gather = Vec::with_capacity(grid_width * grid_height * n);
        for gr in 0..grid_height {
            for gc in 0..grid_width {
                for i in 0..side {
                    for j in 0..side {
                        let (r, c) = match boundary {
                            Boundary::Reflective => (
                                reflect_index(gr as isize - offset + i as isize, height),
                                reflect_index(gc as isize - offset + j as isize, width),
                            ),
                            Boundary::Valid => (gr + i, gc + j),
                        };
                        gather.push((r * width + c) as u32);
                    }
                }
            }
        }
        Ok(Self { filters, k, n, side, width, height, boundary, grid_width, grid_height, gather })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn positions(&self) -> usize {
        self.grid_width * self.grid_height
    }

    /// Length of the coefficient vector.
    pub fn output_len(&self) -> usize {
        self.positions() * self.k
    }

    pub fn input_len(&self) -> usize {
        self.width * self.height
    }

    /// Anchor pixel `(row, col)` of a block. Valid blocks report the patch's top-left.
    pub fn position(&self, block: usize) -> (usize, usize) {
        (block / self.grid_width, block % self.grid_width)
    }

    /// Flat pixel indices read by the patch of `block`.
    pub fn patch_indices(&self, block: usize) -> &[u32] {
        &self.gather[block * self.n..(block + 1) * self.n]
    }

    pub fn apply(&self, image: &ModalImage) -> Result<Vec<f64>> {
        if image.width() != self.width || image.height() != self.height {
            return Err(mismatch(self.input_len(), image.len()));
        }
        self.apply_slice(image.values())
    }

    pub fn apply_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(mismatch(self.input_len(), x.len()));
        }
        let mut out = vec![0.0; self.output_len()];
        let mut patch = vec![0.0; self.n];
        for (block, coeffs) in out.chunks_exact_mut(self.k).enumerate() {
            for (p, &idx) in patch.iter_mut().zip(self.patch_indices(block)) {
                *p = x[idx as usize];
            }
            for (coef, filter) in coeffs.iter_mut().zip(self.filters.chunks_exact(self.n)) {
                *coef = dot(filter, &patch);
            }
        }
        Ok(out)
    }

    /// `(Ω^F)ᵀ y`, scattering in block order.
    pub fn apply_adjoint(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.output_len() {
            return Err(mismatch(self.output_len(), coeffs.len()));
        }
        let mut out = vec![0.0; self.input_len()];
        let mut patch = vec![0.0; self.n];
        for (block, y) in coeffs.chunks_exact(self.k).enumerate() {
            patch.iter_mut().for_each(|p| *p = 0.0);
            for (&w, filter) in y.iter().zip(self.filters.chunks_exact(self.n)) {
                if w != 0.0 {
                    for (p, f) in patch.iter_mut().zip(filter) {
                        *p += w * f;
                    }
                }
            }
            for (p, &idx) in patch.iter().zip(self.patch_indices(block)) {
                out[idx as usize] += p;
            }
        }
        Ok(out)
    }

    /// Materializes `Ω^F` as a dense `K x N` matrix. Only sensible for small images.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.output_len(), self.input_len());
        for block in 0..self.positions() {
            for (j, &idx) in self.patch_indices(block).iter().enumerate() {
                for r in 0..self.k {
                    m[(block * self.k + r, idx as usize)] += self.filters[r * self.n + j];
                }
            }
        }
        m
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
