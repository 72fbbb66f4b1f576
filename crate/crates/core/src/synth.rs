//! Synthetic bimodal scenes: piecewise-constant regions shared by every layer.
//!
//! Shapes have integer parameters and are rasterized with 4x4 supersampling,
//! so rendering without a transform uses exact arithmetic only.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{ModalImage, Modality};
use crate::model::{extract_training_patches, PatchDataset, DEFAULT_STD_THRESHOLD};

const SUPERSAMPLE: usize = 4;
pub const MIN_SCENE_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModalityPair {
    IntensityDepth,
    IntensityNir,
}

impl ModalityPair {
    pub fn modalities(self) -> (Modality, Modality) {
        match self {
            ModalityPair::IntensityDepth => (Modality::Intensity, Modality::Depth),
            ModalityPair::IntensityNir => (Modality::Intensity, Modality::NearInfrared),
        }
    }
}

impl fmt::Display for ModalityPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModalityPair::IntensityDepth => "intensity-depth",
            ModalityPair::IntensityNir => "intensity-nir",
        })
    }
}

impl FromStr for ModalityPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "intensity-depth" => Ok(ModalityPair::IntensityDepth),
            "intensity-nir" => Ok(ModalityPair::IntensityNir),
            other => Err(Error::InvalidParameter(format!("unknown modality pair '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Axis-aligned ellipse, centre and semi-axes in pixels.
    Ellipse { cx: i64, cy: i64, a: i64, b: i64 },
    /// Convex polygon with counter-clockwise integer vertices `(x, y)`.
    Polygon(Vec<(i64, i64)>),
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Ellipse { cx, cy, a, b } => {
                let (dx, dy) = (x - *cx as f64, y - *cy as f64);
                let (a2, b2) = ((a * a) as f64, (b * b) as f64);
                b2 * dx * dx + a2 * dy * dy <= a2 * b2
            }
            Shape::Polygon(v) => (0..v.len()).all(|i| {
                let (x0, y0) = (v[i].0 as f64, v[i].1 as f64);
                let (x1, y1) = (v[(i + 1) % v.len()].0 as f64, v[(i + 1) % v.len()].1 as f64);
                (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) >= 0.0
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub shape: Shape,
    pub depth: f64,
    pub albedo: f64,
    /// Contrast-reversed in the near-infrared layer.
    pub vegetation: bool,
    pub texture: Texture,
}

/// Low-amplitude sinusoidal grating added to the intensity layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Texture {
    pub amplitude: f64,
    pub kx: f64,
    pub ky: f64,
    pub phase: f64,
}

impl Texture {
    fn at(&self, x: f64, y: f64) -> f64 {
        self.amplitude * (self.kx * x + self.ky * y + self.phase).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Depth,
    Intensity,
    NearInfrared,
}

impl Layer {
    pub fn modality(self) -> Modality {
        match self {
            Layer::Depth => Modality::Depth,
            Layer::Intensity => Modality::Intensity,
            Layer::NearInfrared => Modality::NearInfrared,
        }
    }

    pub fn of(modality: Modality) -> Layer {
        match modality {
            Modality::Depth => Layer::Depth,
            Modality::NearInfrared => Layer::NearInfrared,
            _ => Layer::Intensity,
        }
    }
}

/// Regions drawn in order over a background; later regions cover earlier ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub size: usize,
    pub background: Region,
    pub regions: Vec<Region>,
}

impl Scene {
    pub fn generate(seed: u64, size: usize) -> Result<Scene> {
        if size < MIN_SCENE_SIZE {
            return Err(Error::TooSmall(format!("scene size {size} below {MIN_SCENE_SIZE}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.gen_range(6..=9);
        let levels = |rng: &mut ChaCha8Rng| {
            let mut v: Vec<f64> =
                (0..=count).map(|i| 0.1 + 0.8 * i as f64 / count as f64).collect();
            v.shuffle(rng);
            v
        };
        let depths = levels(&mut rng);
        let albedos = levels(&mut rng);
        // Reversal is decided per mirrored level pair (i, count - i), so the
        // near-infrared values remain a permutation of the level grid.
        let reversed: Vec<bool> = (0..=count).map(|_| rng.gen_bool(0.4)).collect();
        let level_index = |v: f64| ((v - 0.1) * count as f64 / 0.8).round() as usize;
        let s = size as i64;
        let mut regions = Vec::with_capacity(count + 1);
        for i in 0..=count {
            let shape = if i == 0 {
                Shape::Polygon(vec![(-4 * s, -4 * s), (4 * s, -4 * s), (4 * s, 4 * s), (-4 * s, 4 * s)])
            } else {
                random_shape(&mut rng, s)
            };
            let texture = Texture {
                amplitude: rng.gen_range(0.01..0.025),
                kx: rng.gen_range(-0.5..0.5),
                ky: rng.gen_range(-0.5..0.5),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            };
            regions.push(Region {
                shape,
                depth: depths[i],
                albedo: albedos[i],
                vegetation: {
                    let li = level_index(albedos[i]);
                    reversed[li.min(count - li)]
                },
                texture,
            });
        }
        let background = regions.remove(0);
        Ok(Scene { size, background, regions })
    }

    fn region_at(&self, x: f64, y: f64) -> &Region {
        self.regions.iter().rev().find(|r| r.shape.contains(x, y)).unwrap_or(&self.background)
    }

    fn sample(&self, layer: Layer, x: f64, y: f64) -> f64 {
        let r = self.region_at(x, y);
        match layer {
            Layer::Depth => r.depth,
            Layer::Intensity => r.albedo + r.texture.at(x, y),
            Layer::NearInfrared => {
                let base = if r.vegetation { 1.0 - r.albedo } else { r.albedo };
                base + 0.5 * r.texture.at(x, y)
            }
        }
    }

    /// Renders `layer`; with a transform `T`, output pixel `p` shows the scene at
    /// `T p`, both in coordinates centred on the image centre.
    pub fn render(&self, layer: Layer, transform: Option<&Matrix3<f64>>) -> ModalImage {
        let n = self.size;
        let centre = (n as f64 - 1.0) / 2.0;
        let step = 1.0 / SUPERSAMPLE as f64;
        let first = -0.5 + step / 2.0;
        ModalImage::from_fn(n, n, layer.modality(), |row, col| {
            let mut acc = 0.0;
            for i in 0..SUPERSAMPLE {
                for j in 0..SUPERSAMPLE {
                    let x = col as f64 + first + j as f64 * step;
                    let y = row as f64 + first + i as f64 * step;
                    let (sx, sy) = match transform {
                        None => (x, y),
                        Some(t) => {
                            let p = t * Vector3::new(x - centre, y - centre, 1.0);
                            (p.x + centre, p.y + centre)
                        }
                    };
                    acc += self.sample(layer, sx, sy);
                }
            }
            acc / (SUPERSAMPLE * SUPERSAMPLE) as f64
        })
    }
}

fn random_shape(rng: &mut ChaCha8Rng, size: i64) -> Shape {
    let margin = size / 8;
    let cx = rng.gen_range(margin..size - margin);
    let cy = rng.gen_range(margin..size - margin);
    let max_r = (size / 4).max(4);
    let min_r = (size / 12).max(3);
    if rng.gen_bool(0.5) {
        Shape::Ellipse { cx, cy, a: rng.gen_range(min_r..=max_r), b: rng.gen_range(min_r..=max_r) }
    } else {
        let corners = rng.gen_range(3..=6);
        let radius = rng.gen_range(min_r..=max_r) as f64;
        let mut angles: Vec<f64> =
            (0..corners).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let pts: Vec<(i64, i64)> = angles
            .iter()
            .map(|a| (cx + (radius * a.cos()).round() as i64, cy + (radius * a.sin()).round() as i64))
            .collect();
        let hull = convex_hull(pts);
        if hull.len() < 3 {
            Shape::Ellipse { cx, cy, a: min_r, b: min_r }
        } else {
            Shape::Polygon(hull)
        }
    }
}

/// Andrew's monotone chain, counter-clockwise in the x-right, y-up sense that
/// `Shape::contains` expects.
fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Patch pairs drawn from one rendered scene per seed, `per_scene` from each.
pub fn synthetic_training_set(
    seeds: std::ops::Range<u64>,
    size: usize,
    pair: ModalityPair,
    patch_side: usize,
    per_scene: usize,
) -> Result<PatchDataset> {
    let parts = seeds
        .map(|seed| {
            let (u, v) = generate_scene(seed, size, pair)?;
            extract_training_patches(&u, &v, patch_side, per_scene, seed, DEFAULT_STD_THRESHOLD)
        })
        .collect::<Result<Vec<_>>>()?;
    PatchDataset::merge(&parts)
}

/// Renders both layers of a freshly generated scene.
pub fn generate_scene(seed: u64, size: usize, pair: ModalityPair) -> Result<(ModalImage, ModalImage)> {
    let scene = Scene::generate(seed, size)?;
    let (mu, mv) = pair.modalities();
    Ok((scene.render(Layer::of(mu), None), scene.render(Layer::of(mv), None)))
}

/// Pixels whose central-difference gradient magnitude exceeds `threshold`.
pub fn edge_map(image: &ModalImage, threshold: f64) -> Vec<bool> {
    let (w, h) = (image.width(), image.height());
    (0..w * h)
        .map(|i| {
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            let gx = (image.get_reflected(r, c + 1) - image.get_reflected(r, c - 1)) / 2.0;
            let gy = (image.get_reflected(r + 1, c) - image.get_reflected(r - 1, c)) / 2.0;
            gx.hypot(gy) > threshold
        })
        .collect()
}

pub fn jaccard(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scene(7, 64, ModalityPair::IntensityDepth).unwrap();
        let b = generate_scene(7, 64, ModalityPair::IntensityDepth).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(8, 64, ModalityPair::IntensityDepth).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn rejects_small_scenes() {
        assert!(Scene::generate(1, 31).is_err());
    }

    #[test]
    fn edge_sets_overlap() {
        for seed in 0..6 {
            for pair in [ModalityPair::IntensityDepth, ModalityPair::IntensityNir] {
                let (u, v) = generate_scene(seed, 64, pair).unwrap();
                let j = jaccard(&edge_map(&u, 0.03), &edge_map(&v, 0.03));
                assert!(j > 0.8, "seed {seed} {pair}: jaccard {j}");
            }
        }
    }

    #[test]
    fn permuting_albedos_keeps_edges() {
        let scene = Scene::generate(3, 64).unwrap();
        let mut shuffled = scene.clone();
        let mut albedos: Vec<f64> = shuffled.regions.iter().map(|r| r.albedo).collect();
        albedos.rotate_left(1);
        for (r, a) in shuffled.regions.iter_mut().zip(albedos) {
            r.albedo = a;
            r.texture.amplitude = 0.0;
        }
        let mut flat = scene.clone();
        flat.regions.iter_mut().for_each(|r| r.texture.amplitude = 0.0);
        flat.background.texture.amplitude = 0.0;
        shuffled.background.texture.amplitude = 0.0;
        let a = flat.render(Layer::Depth, None);
        let b = shuffled.render(Layer::Depth, None);
        assert_eq!(a, b);
        let ea = edge_map(&flat.render(Layer::Depth, None), 0.03);
        let eb = edge_map(&shuffled.render(Layer::Depth, None), 0.03);
        assert_eq!(ea, eb);
    }

    #[test]
    fn identity_transform_matches_plain_render() {
        let scene = Scene::generate(5, 48).unwrap();
        let plain = scene.render(Layer::Intensity, None);
        let ident = scene.render(Layer::Intensity, Some(&Matrix3::identity()));
        for (a, b) in plain.values().iter().zip(ident.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn integer_translation_shifts_content() {
        let scene = Scene::generate(9, 48).unwrap();
        let plain = scene.render(Layer::Depth, None);
        let t = Matrix3::new(1.0, 0.0, 3.0, 0.0, 1.0, -2.0, 0.0, 0.0, 1.0);
        let moved = scene.render(Layer::Depth, Some(&t));
        for r in 2..40 {
            for c in 0..40 {
                assert_eq!(moved.get(r, c), plain.get(r - 2, c + 3));
            }
        }
    }

    #[test]
    fn hull_is_counter_clockwise_convex() {
        let hull = convex_hull(vec![(0, 0), (4, 0), (4, 4), (0, 4), (2, 2), (1, 3)]);
        assert_eq!(hull.len(), 4);
        let shape = Shape::Polygon(hull);
        assert!(shape.contains(2.0, 2.0));
        assert!(!shape.contains(5.0, 2.0));
    }
}
