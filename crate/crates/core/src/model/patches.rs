use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{mismatch, Error, Result};
use crate::image::{ModalImage, Modality};

/// Patches whose standard deviation (on `[0, 1]`-scaled values) falls below
/// this are discarded.
pub const DEFAULT_STD_THRESHOLD: f64 = 0.05;

/// Aligned training pairs stored as columns, each patch divided by its own
/// standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    std_u: Vec<f64>,
    std_v: Vec<f64>,
    modalities: (Modality, Modality),
}

impl PatchDataset {
    /// Builds a dataset from pairs taken as-is, without filtering or normalization.
    pub fn from_raw_pairs(pairs: &[(Vec<f64>, Vec<f64>)], modalities: (Modality, Modality)) -> Result<Self> {
        let first = pairs.first().ok_or(Error::InsufficientSamples { requested: 1, found: 0 })?;
        let n = first.0.len();
        for (a, b) in pairs {
            if a.len() != n || b.len() != n {
                return Err(mismatch(n, a.len().max(b.len())));
            }
        }
        let m = pairs.len();
        let u = DMatrix::from_fn(n, m, |r, c| pairs[c].0[r]);
        let v = DMatrix::from_fn(n, m, |r, c| pairs[c].1[r]);
        Ok(Self { u, v, std_u: vec![1.0; m], std_v: vec![1.0; m], modalities })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }

    /// Patches of modality U as columns (`n x M`).
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// The standard deviations each pair was divided by.
    pub fn normalization(&self) -> (&[f64], &[f64]) {
        (&self.std_u, &self.std_v)
    }

    pub fn modalities(&self) -> (Modality, Modality) {
        self.modalities
    }

    pub fn pair(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        (self.u.column(i).iter().copied().collect(), self.v.column(i).iter().copied().collect())
    }

    /// Keeps the U patches but pairs them with V patches in the given order.
    pub fn repaired(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(mismatch(self.len(), order.len()));
        }
        let v = DMatrix::from_fn(self.n(), self.len(), |r, c| self.v[(r, order[c])]);
        let std_v = order.iter().map(|&i| self.std_v[i]).collect();
        Ok(Self { v, std_v, ..self.clone() })
    }

    /// First `count` pairs and the remainder.
    pub fn split(&self, count: usize) -> Result<(Self, Self)> {
        if count == 0 || count >= self.len() {
            return Err(Error::InvalidParameter(format!(
                "split point {count} outside 1..{}",
                self.len()
            )));
        }
        let rest = self.len() - count;
        let take = |start: usize, len: usize| Self {
            u: self.u.columns(start, len).into_owned(),
            v: self.v.columns(start, len).into_owned(),
            std_u: self.std_u[start..start + len].to_vec(),
            std_v: self.std_v[start..start + len].to_vec(),
            modalities: self.modalities,
        };
        Ok((take(0, count), take(count, rest)))
    }

    /// Concatenates datasets of equal patch size.
    pub fn merge(parts: &[PatchDataset]) -> Result<Self> {
        let first = parts.first().ok_or(Error::InsufficientSamples { requested: 1, found: 0 })?;
        let n = first.n();
        if let Some(bad) = parts.iter().find(|p| p.n() != n) {
            return Err(mismatch(n, bad.n()));
        }
        let m: usize = parts.iter().map(|p| p.len()).sum();
        let mut u = DMatrix::zeros(n, m);
        let mut v = DMatrix::zeros(n, m);
        let mut std_u = Vec::with_capacity(m);
        let mut std_v = Vec::with_capacity(m);
        let mut offset = 0;
        for p in parts {
            u.columns_mut(offset, p.len()).copy_from(&p.u);
            v.columns_mut(offset, p.len()).copy_from(&p.v);
            std_u.extend_from_slice(&p.std_u);
            std_v.extend_from_slice(&p.std_v);
            offset += p.len();
        }
        Ok(Self { u, v, std_u, std_v, modalities: first.modalities })
    }
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn patch_at(img: &ModalImage, row: usize, col: usize, side: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(side * side);
    for r in row..row + side {
        for c in col..col + side {
            out.push(img.get(r, c));
        }
    }
    out
}

/// Samples `count` aligned patch pairs, without replacement, uniformly over all
/// top-left positions.
///
/// Both images are first scaled to `[0, 1]`. A pair survives only if both of
/// its patches have standard deviation at least `std_threshold` (and strictly
/// positive); survivors are divided by their own standard deviation.
pub fn extract_training_patches(
    image_u: &ModalImage,
    image_v: &ModalImage,
    patch_side: usize,
    count: usize,
    seed: u64,
    std_threshold: f64,
) -> Result<PatchDataset> {
    image_u.same_shape(image_v)?;
    if patch_side == 0 || patch_side > image_u.width() || patch_side > image_u.height() {
        return Err(Error::InvalidParameter(format!(
            "patch side {patch_side} does not fit a {}x{} image",
            image_u.width(),
            image_u.height()
        )));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("patch count must be positive".into()));
    }
    let su = image_u.scaled_to_unit();
    let sv = image_v.scaled_to_unit();

    let rows = image_u.height() - patch_side + 1;
    let cols = image_u.width() - patch_side + 1;
    let mut positions: Vec<(usize, usize)> =
        (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
    positions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n = patch_side * patch_side;
    let mut u = Vec::with_capacity(count * n);
    let mut v = Vec::with_capacity(count * n);
    let mut std_u = Vec::with_capacity(count);
    let mut std_v = Vec::with_capacity(count);
    for (r, c) in positions {
        if std_u.len() == count {
            break;
        }
        let pu = patch_at(&su, r, c, patch_side);
        let pv = patch_at(&sv, r, c, patch_side);
        let (du, dv) = (population_std(&pu), population_std(&pv));
        if du < std_threshold || dv < std_threshold || du <= 0.0 || dv <= 0.0 {
            continue;
        }
        u.extend(pu.iter().map(|x| x / du));
        v.extend(pv.iter().map(|x| x / dv));
        std_u.push(du);
        std_v.push(dv);
    }
    if std_u.len() < count {
        return Err(Error::InsufficientSamples { requested: count, found: std_u.len() });
    }
    Ok(PatchDataset {
        u: DMatrix::from_vec(n, count, u),
        v: DMatrix::from_vec(n, count, v),
        std_u,
        std_v,
        modalities: (image_u.modality(), image_v.modality()),
    })
}
