//! Color quantization with k-means palettes, using either the exact
//! Euclidean distance or a surrogate of the distance kernel, plus MSE and
//! SSIM image comparison.

mod image;
mod metrics;

pub use image::Image;
pub use metrics::{image_mse, image_ssim, SSIM_SIGMA, SSIM_WINDOW};

use thiserror::Error;

use crate::rng::Rng;
use crate::surrogate::SurrogateNet;

#[derive(Debug, Error)]
pub enum QuantizeError {
    #[error("image dimensions: {0}")]
    Dimensions(String),
    #[error(transparent)]
    Codec(#[from] ::image::ImageError),
    #[error("empty image")]
    EmptyImage,
    #[error("invalid k-means config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Distance used to assign pixels to centroids.
#[derive(Clone, Debug)]
pub enum Distance {
    Exact,
    /// A covering-architecture surrogate of the distance kernel, fed
    /// `(pixel, centroid)` zero-padded to its input width.
    Surrogate(SurrogateNet),
}

impl Distance {
    pub fn eval(&self, p: &[f64; 3], c: &[f64; 3]) -> f64 {
        match self {
            Distance::Exact => squared(p, c).sqrt(),
            Distance::Surrogate(net) => {
                let mut x = vec![0.0; net.inputs().max(6)];
                x[..3].copy_from_slice(p);
                x[3..6].copy_from_slice(c);
                x.truncate(net.inputs());
                net.forward(&x)[0]
            }
        }
    }

    /// Index of the nearest centroid, lowest index on ties.
    pub fn nearest(&self, p: &[f64; 3], centroids: &[[f64; 3]]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in centroids.iter().enumerate() {
            let d = self.eval(p, c);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

fn squared(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

#[derive(Clone, Debug)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub centroid_tolerance: f64,
    pub distance: Distance,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 10,
            max_iters: 40,
            centroid_tolerance: 1e-5,
            distance: Distance::Exact,
            seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Palette {
    /// Centroids in [0, 1]-scaled RGB.
    pub centroids: Vec<[f64; 3]>,
    pub iterations: usize,
    /// Within-cluster squared Euclidean distance after each assignment step.
    pub objective: Vec<f64>,
    pub converged: bool,
}

impl Palette {
    pub fn colors(&self) -> Vec<[u8; 3]> {
        self.centroids.iter().map(|&c| to_rgb8(c)).collect()
    }
}

fn scaled(p: [u8; 3]) -> [f64; 3] {
    [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]
}

fn to_rgb8(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
}

fn assign(pixels: &[[f64; 3]], centroids: &[[f64; 3]], distance: &Distance, jobs: usize) -> Vec<usize> {
    let jobs = jobs.max(1);
    if jobs == 1 || pixels.len() < 1024 {
        return pixels.iter().map(|p| distance.nearest(p, centroids)).collect();
    }
    let chunk = pixels.len().div_ceil(jobs);
    let mut out = vec![0usize; pixels.len()];
    std::thread::scope(|s| {
        for (src, dst) in pixels.chunks(chunk).zip(out.chunks_mut(chunk)) {
            s.spawn(move || {
                for (p, o) in src.iter().zip(dst.iter_mut()) {
                    *o = distance.nearest(p, centroids);
                }
            });
        }
    });
    out
}

/// Lloyd's algorithm over the image's RGB vectors.
pub fn kmeans_palette(img: &Image, cfg: &KMeansConfig) -> Result<Palette, QuantizeError> {
    if img.pixel_count() == 0 {
        return Err(QuantizeError::EmptyImage);
    }
    if cfg.k == 0 {
        return Err(QuantizeError::Config("k must be at least 1".into()));
    }
    let pixels: Vec<[f64; 3]> = img.pixels().map(scaled).collect();
    let mut distinct: Vec<[u8; 3]> = img.pixels().collect();
    distinct.sort_unstable();
    distinct.dedup();
    let k = if cfg.k > distinct.len() {
        log::warn!("k = {} exceeds the {} distinct colors; using {}", cfg.k, distinct.len(), distinct.len());
        distinct.len()
    } else {
        cfg.k
    };
    let mut rng = Rng::derive(cfg.seed, &[0xc01d]);
    let mut centroids: Vec<[f64; 3]> = rng.sample_indices(distinct.len(), k).into_iter().map(|i| scaled(distinct[i])).collect();
    let mut objective = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        let labels = assign(&pixels, &centroids, &cfg.distance, cfg.jobs);
        objective.push(pixels.iter().zip(&labels).map(|(p, &l)| squared(p, &centroids[l])).sum());
        let mut sums = vec![[0.0; 3]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in pixels.iter().zip(&labels) {
            for ch in 0..3 {
                sums[l][ch] += p[ch];
            }
            counts[l] += 1;
        }
        let mut movement = 0.0;
        for j in 0..k {
            let next = if counts[j] == 0 {
                pixels[rng.below(pixels.len())]
            } else {
                sums[j].map(|s| s / counts[j] as f64)
            };
            movement += squared(&next, &centroids[j]).sqrt();
            centroids[j] = next;
        }
        iterations += 1;
        if movement < cfg.centroid_tolerance {
            converged = true;
            break;
        }
    }
    Ok(Palette {
        centroids,
        iterations,
        objective,
        converged,
    })
}

/// Replaces each pixel with its nearest palette color.
pub fn remap(img: &Image, centroids: &[[f64; 3]], distance: &Distance) -> Result<Image, QuantizeError> {
    if centroids.is_empty() {
        return Err(QuantizeError::Config("empty palette".into()));
    }
    let colors: Vec<[u8; 3]> = centroids.iter().map(|&c| to_rgb8(c)).collect();
    let mut data = Vec::with_capacity(img.data().len());
    for p in img.pixels() {
        data.extend_from_slice(&colors[distance.nearest(&scaled(p), centroids)]);
    }
    Image::new(img.width(), img.height(), data)
}

/// Largest per-channel difference between two palettes after the best
/// matching of centroids (palettes of equal size, at most 8 entries).
pub fn palette_distance(a: &[[f64; 3]], b: &[[f64; 3]]) -> Option<f64> {
    if a.len() != b.len() || a.len() > 8 {
        return None;
    }
    fn search(a: &[[f64; 3]], b: &[[f64; 3]], used: &mut Vec<bool>, i: usize, worst: f64, best: &mut f64) {
        if worst >= *best {
            return;
        }
        if i == a.len() {
            *best = worst;
            return;
        }
        for j in 0..b.len() {
            if used[j] {
                continue;
            }
            let d = (0..3).map(|c| (a[i][c] - b[j][c]).abs()).fold(0.0, f64::max);
            used[j] = true;
            search(a, b, used, i + 1, worst.max(d), best);
            used[j] = false;
        }
    }
    let mut best = f64::INFINITY;
    search(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    Some(best)
}
