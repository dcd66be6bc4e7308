//! Difficulty ranking, bucketing and expert assignment.
//!
//! A reference model scores every training sample by its loss. Samples are
//! ranked easy to hard, split into as many buckets as there are experts, and
//! each bucket is tied to one expert. During an epoch the buckets are visited
//! easiest first and every mini-batch is drawn from a single bucket, so exactly
//! one expert supervises each optimizer step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{hard_cross_entropy, one_hot};
use crate::nn::Model;
use crate::rng::{derive_seed, substream, Stream};
use crate::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredSample {
    pub index: usize,
    pub label: usize,
    pub score: f64,
}

const SCORE_BATCH: usize = 256;

/// Per-sample hard-label cross-entropy of `reference` on every sample of
/// `data`, without augmentation. The result is independent of batching.
pub fn score_dataset<F: Scalar>(reference: &Model<F>, data: &Dataset) -> Result<Vec<ScoredSample>> {
    let k = reference.num_classes();
    if let Some(&bad) = data.labels().iter().find(|&&y| y >= k) {
        return Err(Error::Data(format!("label {bad} out of range for a {k}-class scorer")));
    }
    let mut out = Vec::with_capacity(data.len());
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(SCORE_BATCH) {
        let x: Tensor<F> = data.gather(chunk).cast();
        let logits = reference.predict(&x)?;
        for (row, &i) in chunk.iter().enumerate() {
            let label = data.labels()[i];
            let z = Tensor::new(vec![1, k], logits.row(row).to_vec())?;
            let y = one_hot::<F>(&[label], k)?;
            let score = hard_cross_entropy(&z, &y)?.value.as_f64();
            out.push(ScoredSample { index: i, label, score });
        }
    }
    Ok(out)
}

/// Samples ordered from easiest to hardest.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedDataset {
    entries: Vec<ScoredSample>,
}

/// Stable ascending sort by score; ties keep ascending sample index.
pub fn rank(scored: &[ScoredSample]) -> RankedDataset {
    let mut entries = scored.to_vec();
    entries.sort_by_key(|s| s.index);
    entries.sort_by(|a, b| a.score.total_cmp(&b.score));
    RankedDataset { entries }
}

impl RankedDataset {
    /// Takes entries that are already in ranked order (e.g. read back from a
    /// curriculum file). Fails if they are not.
    pub fn from_ranked(entries: Vec<ScoredSample>) -> Result<Self> {
        for w in entries.windows(2) {
            let ordered = w[0].score < w[1].score || (w[0].score == w[1].score && w[0].index < w[1].index);
            if !ordered {
                return Err(Error::Data(format!(
                    "samples {} and {} are out of ranked order",
                    w[0].index, w[1].index
                )));
            }
        }
        let mut seen = vec![false; entries.len()];
        for e in &entries {
            if e.index >= entries.len() || core::mem::replace(&mut seen[e.index], true) {
                return Err(Error::Data(format!("sample index {} is out of range or repeated", e.index)));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ScoredSample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn order(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }
}

/// Partition of the training set into difficulty buckets, easiest first.
#[derive(Clone, Debug, PartialEq)]
pub struct BucketPlan {
    /// Sample indices per bucket, each listed in ranked order.
    buckets: Vec<Vec<usize>>,
    class_balanced: bool,
}

impl BucketPlan {
    /// A single bucket holding `indices`; used for non-curriculum training.
    pub fn single(indices: Vec<usize>) -> Self {
        Self {
            buckets: vec![indices],
            class_balanced: false,
        }
    }

    pub fn buckets(&self) -> &[Vec<usize>] {
        &self.buckets
    }

    /// Number of buckets (L).
    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn class_balanced(&self) -> bool {
        self.class_balanced
    }

    pub fn sample_count(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    /// Bucket of every sample, indexed by sample index.
    pub fn bucket_of(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (b, idx) in self.buckets.iter().enumerate() {
            for &i in idx {
                if i < n {
                    out[i] = Some(b);
                }
            }
        }
        out
    }
}

/// Run lengths for splitting `n` items into `l` near-equal contiguous runs,
/// with the `n % l` extra items going to the runs starting at `offset`.
fn run_lengths(n: usize, l: usize, offset: usize) -> Vec<usize> {
    let (base, rem) = (n / l, n % l);
    let mut sizes = vec![base; l];
    for i in 0..rem {
        sizes[(offset + i) % l] += 1;
    }
    sizes
}

/// Splits the ranked set into `l` buckets.
///
/// Unbalanced: contiguous slices of the ranking, the first `n % l` buckets one
/// larger. Balanced: each class is split into `l` contiguous runs of its own
/// ranking and bucket `j` takes every class's `j`-th run. The spare samples of
/// successive classes are dealt round-robin across buckets, so both per-class
/// counts and total bucket sizes differ by at most one.
pub fn bucketize(ranked: &RankedDataset, l: usize, class_balanced: bool) -> Result<BucketPlan> {
    let n = ranked.len();
    if l == 0 || l > n {
        return Err(Error::Config(format!("cannot split {n} samples into {l} buckets")));
    }
    let mut bucket_of_rank = vec![0usize; n];
    if class_balanced {
        let classes = ranked.entries.iter().map(|e| e.label).max().unwrap_or(0) + 1;
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
        for (r, e) in ranked.entries.iter().enumerate() {
            per_class[e.label].push(r);
        }
        let mut offset = 0;
        for members in &per_class {
            let sizes = run_lengths(members.len(), l, offset);
            offset = (offset + members.len() % l) % l;
            let mut it = members.iter();
            for (b, &s) in sizes.iter().enumerate() {
                for &r in it.by_ref().take(s) {
                    bucket_of_rank[r] = b;
                }
            }
        }
    } else {
        let mut r = 0;
        for (b, s) in run_lengths(n, l, 0).into_iter().enumerate() {
            bucket_of_rank[r..r + s].fill(b);
            r += s;
        }
    }
    let mut buckets = vec![Vec::new(); l];
    for (r, e) in ranked.entries.iter().enumerate() {
        buckets[bucket_of_rank[r]].push(e.index);
    }
    Ok(BucketPlan {
        buckets,
        class_balanced,
    })
}

/// How buckets are mapped onto experts ordered by ascending capacity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionPolicy {
    /// Easiest bucket to the smallest expert, hardest to the largest.
    Baseline,
    /// Easiest bucket to the largest expert.
    Anti,
    /// A fresh uniform bijection every epoch.
    Random { seed: u64 },
}

/// `expert_of_bucket[b]` is the pool index supervising bucket `b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub expert_of_bucket: Vec<usize>,
}

pub fn assign_experts(plan: &BucketPlan, pool_len: usize, policy: SelectionPolicy, epoch: usize) -> Result<Assignment> {
    let l = plan.len();
    if pool_len != l {
        return Err(Error::Config(format!("{pool_len} experts for {l} buckets")));
    }
    let expert_of_bucket = match policy {
        SelectionPolicy::Baseline => (0..l).collect(),
        SelectionPolicy::Anti => (0..l).rev().collect(),
        SelectionPolicy::Random { seed } => {
            let mut perm: Vec<usize> = (0..l).collect();
            perm.shuffle(&mut substream(seed, Stream::Policy, epoch as u64, 0));
            perm
        }
    };
    Ok(Assignment { expert_of_bucket })
}

/// One mini-batch together with the bucket it was drawn from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiniBatch {
    pub indices: Vec<usize>,
    pub bucket: usize,
}

/// Mini-batches of one epoch: buckets in order, each shuffled with its own
/// stream and cut into batches that never cross a bucket boundary.
pub struct EpochBatches<'a> {
    plan: &'a BucketPlan,
    batch_size: usize,
    seed: u64,
    epoch: usize,
    bucket: usize,
    shuffled: Vec<usize>,
    pos: usize,
}

pub fn epoch_iterator(plan: &BucketPlan, batch_size: usize, seed: u64, epoch: usize) -> EpochBatches<'_> {
    assert!(batch_size >= 1, "batch size must be positive");
    let mut it = EpochBatches {
        plan,
        batch_size,
        seed,
        epoch,
        bucket: 0,
        shuffled: Vec::new(),
        pos: 0,
    };
    it.load_bucket();
    it
}

impl EpochBatches<'_> {
    fn load_bucket(&mut self) {
        self.pos = 0;
        self.shuffled.clear();
        if let Some(b) = self.plan.buckets.get(self.bucket) {
            // Shuffle a sorted copy so the batch stream depends on the bucket's
            // membership, not on how its members happen to be listed.
            self.shuffled.extend_from_slice(b);
            self.shuffled.sort_unstable();
            let seed = derive_seed(self.seed, Stream::Shuffle, self.epoch as u64, self.bucket as u64);
            self.shuffled.shuffle(&mut substream(seed, Stream::Shuffle, 0, 0));
        }
    }
}

impl Iterator for EpochBatches<'_> {
    type Item = MiniBatch;

    fn next(&mut self) -> Option<MiniBatch> {
        while self.pos >= self.shuffled.len() {
            if self.bucket >= self.plan.buckets.len() {
                return None;
            }
            self.bucket += 1;
            self.load_bucket();
        }
        let end = (self.pos + self.batch_size).min(self.shuffled.len());
        let batch = MiniBatch {
            indices: self.shuffled[self.pos..end].to_vec(),
            bucket: self.bucket,
        };
        self.pos = end;
        Some(batch)
    }
}
