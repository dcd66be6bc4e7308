//! Datasets, the synthetic generator, augmentation and normalization.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{substream, Rng, Stream};
use crate::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Samples `[n, ...sample_shape]` with integer labels in `[0, num_classes)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Tensor<f32>,
    labels: Vec<usize>,
    num_classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(features: Tensor<f32>, labels: Vec<usize>, num_classes: usize, split: Split) -> Result<Self> {
        if features.shape().len() < 2 {
            return Err(Error::Data(format!("features need a batch axis, got {:?}", features.shape())));
        }
        if features.batch() != labels.len() {
            return Err(Error::Data(format!(
                "{} samples but {} labels",
                features.batch(),
                labels.len()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::Data(format!("label {y} of sample {i} is outside [0, {num_classes})")));
        }
        if !features.is_finite() {
            return Err(Error::Data("non-finite feature values".into()));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &Tensor<f32> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.features.shape()[1..]
    }

    /// Copies the selected samples into a batch tensor.
    pub fn gather(&self, indices: &[usize]) -> Tensor<f32> {
        let w = self.features.row_len();
        let mut data = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(self.sample_shape());
        Tensor::from_parts_unchecked(shape, data)
    }

    pub fn gather_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    /// Number of samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }
}

/// Train and test split of one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
}

/// Parameters of the synthetic Gaussian-cluster dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Fraction of samples pulled toward other classes, and strength of the
    /// nonlinear warp of the feature space. 0 gives well separated clusters.
    pub hardness: f64,
    pub seed: u64,
}

const CENTER_RADIUS: f64 = 4.0;
const NOISE_STD: f64 = 0.5;
const MODES_PER_CLASS: usize = 6;
const MODE_SPREAD: f64 = 3.0;
const WARP: f64 = 2.0;

/// Gaussian clusters whose difficulty grows with `hardness`.
///
/// Each class owns `MODES_PER_CLASS` sub-clusters placed around a class
/// center on a sphere of radius 4; their offsets scale with `hardness`, so at
/// 0 every class is one tight blob and at larger values the classes
/// interleave. A fraction `hardness` of the samples is pulled toward a random
/// other class by `lambda ~ U(0.2, 0.5)`, landing near a decision boundary.
/// Every point then passes through the fixed warp `x + 2 * hardness * sin(A x)`,
/// which bends the boundaries so that model capacity matters. Classes are
/// balanced in both splits.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<Splits> {
    let SyntheticConfig {
        classes: k,
        dim,
        n_train,
        n_test,
        hardness,
        seed,
    } = *cfg;
    if k < 2 || dim == 0 || n_train < k || n_test < k {
        return Err(Error::Config(format!(
            "synthetic data needs classes >= 2, dim >= 1 and at least one sample per class (k={k}, dim={dim}, train={n_train}, test={n_test})"
        )));
    }
    if !(0.0..=1.0).contains(&hardness) {
        return Err(Error::Config(format!("hardness must be in [0, 1], got {hardness}")));
    }
    let mut rng = substream(seed, Stream::Data, 0, 0);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(1e-12);
            v.iter().map(|x| x * CENTER_RADIUS / norm).collect()
        })
        .collect();
    let modes: Vec<Vec<f64>> = centers
        .iter()
        .flat_map(|c| {
            (0..MODES_PER_CLASS)
                .map(|_| c.iter().map(|&x| x + hardness * MODE_SPREAD * gaussian(&mut rng)).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        })
        .collect();
    let warp: Vec<f64> = (0..dim * dim)
        .map(|_| gaussian(&mut rng) / libm::sqrt(dim as f64))
        .collect();
    let make = |n: usize, split: Split, rng: &mut Rng| {
        let mut feats = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        let mut point = vec![0.0; dim];
        for i in 0..n {
            let c = i % k;
            point.copy_from_slice(&modes[c * MODES_PER_CLASS + rng.gen_range(0..MODES_PER_CLASS)]);
            if rng.gen::<f64>() < hardness {
                let other = (c + rng.gen_range(1..k)) % k;
                let target = &modes[other * MODES_PER_CLASS + rng.gen_range(0..MODES_PER_CLASS)];
                let lambda = rng.gen_range(0.2..0.5);
                for (p, o) in point.iter_mut().zip(target) {
                    *p += lambda * (o - *p);
                }
            }
            for p in point.iter_mut() {
                *p += NOISE_STD * gaussian(rng);
            }
            for r in 0..dim {
                let a: f64 = warp[r * dim..(r + 1) * dim].iter().zip(&point).map(|(w, x)| w * x).sum();
                feats.push((point[r] + WARP * hardness * libm::sin(a)) as f32);
            }
            labels.push(c);
        }
        Dataset::new(Tensor::from_parts_unchecked(vec![n, dim], feats), labels, k, split)
    };
    let train = make(n_train, Split::Train, &mut substream(seed, Stream::Data, 1, 0))?;
    let test = make(n_test, Split::Test, &mut substream(seed, Stream::Data, 2, 0))?;
    Ok(Splits { train, test })
}

/// Standard normal draw (Box-Muller).
fn gaussian(rng: &mut Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// Per-epoch input augmentation.
///
/// `pad` and `flip_prob` drive a random crop with reflect padding and a
/// horizontal flip, and only apply to `[n, c, h, w]` batches. `jitter` adds
/// zero-mean Gaussian noise of that standard deviation to every feature and
/// works for any shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentConfig {
    pub pad: usize,
    pub flip_prob: f64,
    pub jitter: f64,
}

impl AugmentConfig {
    /// Gaussian feature noise only, for non-image data.
    pub fn jitter(std: f64) -> Self {
        Self { pad: 0, flip_prob: 0.0, jitter: std }
    }

    fn crops(&self) -> bool {
        self.pad > 0 || self.flip_prob > 0.0
    }
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { pad: 4, flip_prob: 0.5, jitter: 0.0 }
    }
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r.clamp(0, n - 1) as usize
}

/// Crops one `[c, h, w]` image shifted by `(dy, dx)` from a reflect-padded
/// copy, optionally mirrored left to right. `(0, 0, false)` is the identity.
pub fn crop_flip(img: &[f32], shape: [usize; 3], dy: isize, dx: isize, flip: bool, out: &mut [f32]) {
    let [c, h, w] = shape;
    for ch in 0..c {
        for y in 0..h {
            let sy = reflect(y as isize + dy, h);
            for x in 0..w {
                let xx = if flip { w - 1 - x } else { x };
                let sx = reflect(xx as isize + dx, w);
                out[(ch * h + y) * w + x] = img[(ch * h + sy) * w + sx];
            }
        }
    }
}

/// Applies an independent random crop and flip to every image of a
/// `[n, c, h, w]` training batch.
pub fn augment(batch: &mut Tensor<f32>, cfg: &AugmentConfig, rng: &mut Rng) -> Result<()> {
    if !(cfg.jitter >= 0.0 && cfg.jitter.is_finite()) || !(0.0..=1.0).contains(&cfg.flip_prob) {
        return Err(Error::Config(format!("invalid augmentation {cfg:?}")));
    }
    if cfg.crops() {
        let &[_, c, h, w] = batch.shape() else {
            return Err(Error::Data(format!("crop and flip need [n, c, h, w], got {:?}", batch.shape())));
        };
        if cfg.pad >= h.min(w) {
            return Err(Error::Config(format!("padding {} too large for {h}x{w} images", cfg.pad)));
        }
        let len = c * h * w;
        let mut scratch = vec![0.0f32; len];
        let p = cfg.pad as isize;
        for img in batch.data_mut().chunks_exact_mut(len) {
            let dy = rng.gen_range(-p..=p);
            let dx = rng.gen_range(-p..=p);
            let flip = rng.gen::<f64>() < cfg.flip_prob;
            crop_flip(img, [c, h, w], dy, dx, flip, &mut scratch);
            img.copy_from_slice(&scratch);
        }
    }
    if cfg.jitter > 0.0 {
        for v in batch.data_mut() {
            *v += (cfg.jitter * gaussian(rng)) as f32;
        }
    }
    Ok(())
}

/// Per-channel mean and variance of a training split. For flat feature
/// vectors every feature is its own channel.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

fn channel_layout(ds: &Dataset) -> (usize, usize) {
    let s = ds.sample_shape();
    (s[0], s[1..].iter().product())
}

pub fn compute_stats(train: &Dataset) -> Result<NormalizationStats> {
    if train.split() != Split::Train {
        return Err(Error::Data("normalization statistics must come from the training split".into()));
    }
    let (c, spatial) = channel_layout(train);
    let count = (train.len() * spatial) as f64;
    let mut mean = vec![0.0; c];
    for row in train.features().rows() {
        for (ch, plane) in row.chunks_exact(spatial).enumerate() {
            mean[ch] += plane.iter().map(|&v| v as f64).sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; c];
    for row in train.features().rows() {
        for (ch, plane) in row.chunks_exact(spatial).enumerate() {
            var[ch] += plane.iter().map(|&v| { let d = v as f64 - mean[ch]; d * d }).sum::<f64>();
        }
    }
    var.iter_mut().for_each(|v| *v /= count);
    if let Some(ch) = var.iter().position(|&v| v <= 1e-12) {
        return Err(Error::Data(format!("channel {ch} has zero variance")));
    }
    Ok(NormalizationStats { mean, var })
}

/// `x -> (x - mean) / sqrt(var)` per channel.
pub fn normalize(ds: &mut Dataset, stats: &NormalizationStats) -> Result<()> {
    let (c, spatial) = channel_layout(ds);
    if stats.mean.len() != c || stats.var.len() != c {
        return Err(Error::Data(format!(
            "statistics cover {} channels, dataset has {c}",
            stats.mean.len()
        )));
    }
    let inv: Vec<f64> = stats.var.iter().map(|v| 1.0 / libm::sqrt(*v)).collect();
    let row_len = c * spatial;
    for row in ds.features.data_mut().chunks_exact_mut(row_len) {
        for (ch, plane) in row.chunks_exact_mut(spatial).enumerate() {
            for v in plane {
                *v = ((*v as f64 - stats.mean[ch]) * inv[ch]) as f32;
            }
        }
    }
    Ok(())
}
