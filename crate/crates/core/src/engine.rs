//! Student training under the scratch, BLKD, TAKD, DGKD and CES-KD methods,
//! and multi-step distillation paths.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::curriculum::{assign_experts, bucketize, epoch_iterator, BucketPlan, RankedDataset, SelectionPolicy};
use crate::data::{augment, AugmentConfig, Dataset, Splits};
use crate::error::{Error, Result};
use crate::loss::{ceskd_total_loss, ensemble_kd_loss, hard_cross_entropy, one_hot, KdHyperparams};
use crate::nn::{init_weights, Model, ModelSpec, Tape};
use crate::optim::{OptimizerState, StepSchedule};
use crate::rng::{derive_seed, substream, Stream};
use crate::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Hard labels only.
    NoKd,
    /// Soft targets from the original teacher.
    Blkd,
    /// Soft targets from the immediately preceding model of the path.
    Takd,
    /// Mean distillation loss over every ancestor.
    Dgkd,
    /// One expert per mini-batch, chosen by the batch's difficulty bucket.
    Ceskd,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::NoKd, Method::Blkd, Method::Takd, Method::Dgkd, Method::Ceskd];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::NoKd => "noKD",
            Method::Blkd => "blkd",
            Method::Takd => "takd",
            Method::Dgkd => "dgkd",
            Method::Ceskd => "ceskd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (noKD, blkd, takd, dgkd, ceskd)")))
    }
}

/// Everything that controls one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub hp: KdHyperparams,
    pub momentum: f64,
    pub weight_decay: f64,
    pub nesterov: bool,
    pub schedule: StepSchedule,
    pub seed: u64,
    pub augment: Option<AugmentConfig>,
}

impl RunConfig {
    /// Full-scale budget: 150 epochs, batch 128, lr 0.1 divided by 10 at 30/90/120.
    pub fn full_scale(seed: u64) -> Self {
        Self {
            epochs: 150,
            batch_size: 128,
            hp: KdHyperparams::default(),
            momentum: 0.9,
            weight_decay: 1e-4,
            nesterov: true,
            schedule: StepSchedule {
                initial: 0.1,
                milestones: vec![30, 90, 120],
                factor: 0.1,
            },
            seed,
            augment: None,
        }
    }

    /// Desk-scale budget: 60 epochs with milestones scaled to 12/36/48.
    pub fn desk(seed: u64) -> Self {
        Self {
            epochs: 60,
            schedule: StepSchedule {
                initial: 0.1,
                milestones: vec![12, 36, 48],
                factor: 0.1,
            },
            ..Self::full_scale(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config(String::from("batch size must be positive")));
        }
        self.hp.validate()?;
        StepSchedule::new(self.schedule.initial, self.schedule.milestones.clone(), self.schedule.factor)?;
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "momentum {} / weight decay {} out of range",
                self.momentum, self.weight_decay
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub top1: f64,
    pub top5: f64,
    /// Seconds since the run started, as reported by the observer.
    pub wall_clock: f64,
}

/// Per-epoch trace of one run. A run that hit a non-finite loss or gradient
/// keeps the epochs it completed and records the cause in `failure`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub epochs: Vec<EpochRecord>,
    pub failure: Option<String>,
}

impl Metrics {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn final_top1(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.top1)
    }

    pub fn final_top5(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.top5)
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.top1).collect()
    }

    pub fn epochs_to_threshold(&self, threshold: f64) -> Option<usize> {
        epochs_to_threshold(&self.accuracies(), threshold)
    }

    /// Equality of everything except wall-clock time.
    pub fn same_trace(&self, other: &Metrics) -> bool {
        self.failure == other.failure
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.top1.to_bits() == b.top1.to_bits()
                    && a.top5.to_bits() == b.top5.to_bits()
            })
    }
}

/// First (0-based) epoch whose test accuracy reaches `threshold`.
pub fn epochs_to_threshold(accuracies: &[f64], threshold: f64) -> Option<usize> {
    accuracies.iter().position(|&a| a >= threshold)
}

/// One optimizer step as written to the run log.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub bucket: usize,
    /// Depth tags of the experts consulted for this batch (empty for scratch).
    pub experts: Vec<u32>,
    pub loss: f64,
}

/// Receives progress events from training. All methods have empty defaults.
pub trait Observer {
    fn stage(&mut self, _stage: usize, _depth_tag: u32, _method: Method) {}
    fn step(&mut self, _rec: &StepRecord) {}
    fn epoch(&mut self, _rec: &EpochRecord) {}
    /// Seconds elapsed; the core has no clock of its own.
    fn elapsed(&self) -> f64 {
        0.0
    }
}

pub struct NoopObserver;

impl Observer for NoopObserver {}

/// Observer that keeps every event in memory.
#[derive(Clone, Debug, Default)]
pub struct StepLog {
    pub stages: Vec<(usize, u32, Method)>,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl Observer for StepLog {
    fn stage(&mut self, stage: usize, depth_tag: u32, method: Method) {
        self.stages.push((stage, depth_tag, method));
    }
    fn step(&mut self, rec: &StepRecord) {
        self.steps.push(rec.clone());
    }
    fn epoch(&mut self, rec: &EpochRecord) {
        self.epochs.push(rec.clone());
    }
}

/// Trained experts available at one distillation step, ascending capacity.
#[derive(Clone, Debug)]
pub struct ExpertPool<'a> {
    experts: Vec<&'a Model<f32>>,
}

impl<'a> ExpertPool<'a> {
    pub fn new(experts: Vec<&'a Model<f32>>) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::Config(String::from("expert pool is empty")));
        }
        if experts.windows(2).any(|w| w[0].depth_tag() >= w[1].depth_tag()) {
            let tags: Vec<u32> = experts.iter().map(|e| e.depth_tag()).collect();
            return Err(Error::Config(format!("expert pool must be strictly ascending in depth, got {tags:?}")));
        }
        Ok(Self { experts })
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn get(&self, i: usize) -> &'a Model<f32> {
        self.experts[i]
    }

    pub fn experts(&self) -> &[&'a Model<f32>] {
        &self.experts
    }

    pub fn depth_tags(&self) -> Vec<u32> {
        self.experts.iter().map(|e| e.depth_tag()).collect()
    }
}

/// Bucketed curriculum and the policy mapping buckets to experts.
#[derive(Clone, Debug, PartialEq)]
pub struct Curriculum {
    pub plan: BucketPlan,
    pub policy: SelectionPolicy,
}

/// Source of supervision for a student.
#[derive(Clone, Copy, Debug)]
pub enum Guidance<'p, 'a> {
    Labels,
    Single(&'a Model<f32>),
    Ensemble(&'p ExpertPool<'a>),
    Curriculum {
        pool: &'p ExpertPool<'a>,
        policy: SelectionPolicy,
    },
}

/// Frozen expert logits for the whole training set, computed once when no
/// augmentation changes the inputs between epochs.
struct LogitCache {
    logits: Vec<Tensor<f32>>,
}

impl LogitCache {
    fn build(experts: &[&Model<f32>], train: &Dataset) -> Result<Self> {
        let all: Vec<usize> = (0..train.len()).collect();
        let mut logits = Vec::with_capacity(experts.len());
        for e in experts {
            let mut data = Vec::with_capacity(train.len() * e.num_classes());
            for chunk in all.chunks(512) {
                data.extend_from_slice(e.predict(&train.gather(chunk))?.data());
            }
            logits.push(Tensor::new(vec![train.len(), e.num_classes()], data)?);
        }
        Ok(Self { logits })
    }

    fn gather(&self, expert: usize, indices: &[usize]) -> Tensor<f32> {
        let src = &self.logits[expert];
        let mut data = Vec::with_capacity(indices.len() * src.row_len());
        for &i in indices {
            data.extend_from_slice(src.row(i));
        }
        Tensor::from_parts_unchecked(vec![indices.len(), src.row_len()], data)
    }
}

/// Top-1 and top-5 accuracy in percent. A sample counts toward top-5 when
/// fewer than five classes rank above its label (ties broken by lower index).
pub fn evaluate(model: &Model<f32>, test: &Dataset) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::Data(String::from("empty evaluation set")));
    }
    let all: Vec<usize> = (0..test.len()).collect();
    let (mut top1, mut top5) = (0usize, 0usize);
    for chunk in all.chunks(512) {
        let logits = model.predict(&test.gather(chunk))?;
        for (row, &i) in logits.rows().zip(chunk) {
            let y = test.labels()[i];
            let target = row[y];
            let above = row
                .iter()
                .enumerate()
                .filter(|&(j, &v)| v > target || (v == target && j < y))
                .count();
            top1 += usize::from(above == 0);
            top5 += usize::from(above < 5);
        }
    }
    let n = test.len() as f64;
    Ok((100.0 * top1 as f64 / n, 100.0 * top5 as f64 / n))
}

fn failure(metrics: &mut Metrics, msg: String) {
    metrics.failure = Some(msg);
}

/// Trains `student` on the samples of `plan` under `guidance`.
///
/// Every epoch walks the plan's buckets in order; for curriculum guidance the
/// batch's bucket selects exactly one expert through the policy's assignment
/// for that epoch. After each epoch the student is evaluated on the test split.
pub fn train_student(
    mut student: Model<f32>,
    guidance: Guidance<'_, '_>,
    plan: &BucketPlan,
    splits: &Splits,
    cfg: &RunConfig,
    obs: &mut dyn Observer,
) -> Result<(Model<f32>, Metrics)> {
    cfg.validate()?;
    let train = &splits.train;
    let k = train.num_classes();
    if student.num_classes() != k {
        return Err(Error::Config(format!(
            "student has {} outputs for {k} classes",
            student.num_classes()
        )));
    }
    let experts: Vec<&Model<f32>> = match guidance {
        Guidance::Labels => Vec::new(),
        Guidance::Single(m) => vec![m],
        Guidance::Ensemble(pool) => pool.experts().to_vec(),
        Guidance::Curriculum { pool, .. } => {
            if pool.len() != plan.len() {
                return Err(Error::Config(format!(
                    "curriculum has {} buckets but the pool holds {} experts",
                    plan.len(),
                    pool.len()
                )));
            }
            pool.experts().to_vec()
        }
    };
    if let Some(e) = experts.iter().find(|e| e.num_classes() != k) {
        return Err(Error::Config(format!("expert {} has {} outputs for {k} classes", e.depth_tag(), e.num_classes())));
    }
    let cache = match cfg.augment {
        None if !experts.is_empty() => Some(LogitCache::build(&experts, train)?),
        _ => None,
    };
    let expert_logits = |e: usize, idx: &[usize], x: &Tensor<f32>| -> Result<Tensor<f32>> {
        match &cache {
            Some(c) => Ok(c.gather(e, idx)),
            None => experts[e].predict(x),
        }
    };

    let tag = student.depth_tag() as u64;
    let shuffle_seed = derive_seed(cfg.seed, Stream::Shuffle, tag, 0);
    let hp = cfg.hp;
    let mut opt = OptimizerState::new(&student, cfg.momentum as f32, cfg.weight_decay as f32, cfg.nesterov);
    let mut tape = Tape::new();
    let mut metrics = Metrics::default();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.lr_at(epoch) as f32;
        let assignment = match guidance {
            Guidance::Curriculum { pool, policy } => Some(assign_experts(plan, pool.len(), policy, epoch)?),
            _ => None,
        };
        let mut aug_rng = substream(cfg.seed, Stream::Augment, tag, epoch as u64);
        let (mut loss_sum, mut seen) = (0.0f64, 0usize);
        for mb in epoch_iterator(plan, cfg.batch_size, shuffle_seed, epoch) {
            let mut x = train.gather(&mb.indices);
            if let Some(a) = &cfg.augment {
                augment(&mut x, a, &mut aug_rng)?;
            }
            let y = one_hot::<f32>(&train.gather_labels(&mb.indices), k)?;
            let z = student.forward(&x, &mut tape)?;
            let (loss, consulted) = match guidance {
                Guidance::Labels => (hard_cross_entropy(&z, &y)?, Vec::new()),
                Guidance::Single(m) => {
                    let ze = expert_logits(0, &mb.indices, &x)?;
                    (ceskd_total_loss(&z, &ze, &y, &hp)?, vec![m.depth_tag()])
                }
                Guidance::Ensemble(pool) => {
                    let zs = (0..pool.len())
                        .map(|e| expert_logits(e, &mb.indices, &x))
                        .collect::<Result<Vec<_>>>()?;
                    (ensemble_kd_loss(&z, &zs, &y, &hp)?, pool.depth_tags())
                }
                Guidance::Curriculum { pool, .. } => {
                    let e = assignment.as_ref().expect("assignment exists for curriculum runs").expert_of_bucket[mb.bucket];
                    let ze = expert_logits(e, &mb.indices, &x)?;
                    (ceskd_total_loss(&z, &ze, &y, &hp)?, vec![pool.get(e).depth_tag()])
                }
            };
            if !loss.value.is_finite() {
                failure(&mut metrics, format!("non-finite loss at epoch {epoch}, step {step}"));
                return Ok((student, metrics));
            }
            let grads = student.backward(&tape, &loss.grad)?;
            match opt.sgd_step(&mut student, &grads, lr) {
                Ok(()) => {}
                Err(Error::NonFinite(what)) => {
                    failure(&mut metrics, format!("non-finite {what} at epoch {epoch}, step {step}"));
                    return Ok((student, metrics));
                }
                Err(e) => return Err(e),
            }
            let value = loss.value as f64;
            obs.step(&StepRecord {
                epoch,
                step,
                bucket: mb.bucket,
                experts: consulted,
                loss: value,
            });
            loss_sum += value * mb.indices.len() as f64;
            seen += mb.indices.len();
            step += 1;
        }
        let (top1, top5) = evaluate(&student, &splits.test)?;
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            top1,
            top5,
            wall_clock: obs.elapsed(),
        };
        obs.epoch(&rec);
        metrics.epochs.push(rec);
    }
    Ok((student, metrics))
}

fn all_indices(ds: &Dataset) -> BucketPlan {
    BucketPlan::single((0..ds.len()).collect())
}

/// Trains a freshly initialised model on hard labels.
pub fn train_scratch(spec: &ModelSpec, splits: &Splits, cfg: &RunConfig, obs: &mut dyn Observer) -> Result<(Model<f32>, Metrics)> {
    let student = init_weights(spec, cfg.seed)?;
    train_student(student, Guidance::Labels, &all_indices(&splits.train), splits, cfg, obs)
}

/// Trains a new student of `student_spec` from the experts in `pool`.
///
/// `blkd` and `takd` expect exactly one expert, `dgkd` distils from the mean
/// over all of them and `ceskd` needs a curriculum with one bucket per expert.
pub fn distill_step(
    student_spec: &ModelSpec,
    pool: &ExpertPool<'_>,
    method: Method,
    curriculum: Option<&Curriculum>,
    splits: &Splits,
    cfg: &RunConfig,
    obs: &mut dyn Observer,
) -> Result<(Model<f32>, Metrics)> {
    let student = init_weights(student_spec, cfg.seed)?;
    let everything = all_indices(&splits.train);
    match method {
        Method::NoKd => train_student(student, Guidance::Labels, &everything, splits, cfg, obs),
        Method::Blkd | Method::Takd => {
            if pool.len() != 1 {
                return Err(Error::Config(format!("{method} distils from exactly one expert, got {}", pool.len())));
            }
            train_student(student, Guidance::Single(pool.get(0)), &everything, splits, cfg, obs)
        }
        Method::Dgkd => train_student(student, Guidance::Ensemble(pool), &everything, splits, cfg, obs),
        Method::Ceskd => {
            let cur = curriculum
                .ok_or_else(|| Error::Config(String::from("ceskd needs a curriculum (score the dataset first)")))?;
            if cur.plan.len() != pool.len() {
                return Err(Error::Config(format!(
                    "curriculum has {} buckets but the pool holds {} experts",
                    cur.plan.len(),
                    pool.len()
                )));
            }
            if cur.plan.sample_count() != splits.train.len() {
                return Err(Error::Config(format!(
                    "curriculum covers {} samples, training set has {}",
                    cur.plan.sample_count(),
                    splits.train.len()
                )));
            }
            let guidance = Guidance::Curriculum {
                pool,
                policy: cur.policy,
            };
            train_student(student, guidance, &cur.plan, splits, cfg, obs)
        }
    }
}

/// Teacher-to-student chain of architectures, strictly decreasing in depth.
#[derive(Clone, Debug, PartialEq)]
pub struct DistillationPath {
    specs: Vec<ModelSpec>,
    method: Method,
}

impl DistillationPath {
    pub fn new(specs: Vec<ModelSpec>, method: Method) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config(String::from("distillation path is empty")));
        }
        if specs.windows(2).any(|w| w[0].depth_tag <= w[1].depth_tag) {
            let tags: Vec<u32> = specs.iter().map(|s| s.depth_tag).collect();
            return Err(Error::Config(format!("path capacities must strictly decrease, got {tags:?}")));
        }
        Ok(Self { specs, method })
    }

    pub fn specs(&self) -> &[ModelSpec] {
        &self.specs
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn with_method(&self, method: Method) -> Self {
        Self {
            specs: self.specs.clone(),
            method,
        }
    }

    /// The path without its last model.
    pub fn prefix(&self) -> Option<Self> {
        (self.specs.len() > 1).then(|| Self {
            specs: self.specs[..self.specs.len() - 1].to_vec(),
            method: self.method,
        })
    }
}

/// Curriculum settings shared by every step of a path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathOptions<'r> {
    pub ranked: Option<&'r RankedDataset>,
    pub class_balanced: bool,
    pub policy: SelectionPolicy,
}

/// Outcome of one model along a path.
#[derive(Clone, Debug)]
pub struct StageResult {
    pub model: Model<f32>,
    pub metrics: Metrics,
    pub method: Method,
    /// Depth tags of the experts that supervised this stage, ascending.
    pub pool: Vec<u32>,
}

/// Method and expert pool used for stage `k >= 1` of a path.
fn stage_pool(method: Method, stage: usize, done: &[StageResult]) -> (Method, Vec<usize>) {
    if stage == 1 && method != Method::NoKd {
        // shared first step
        return (Method::Blkd, vec![0]);
    }
    match method {
        Method::NoKd => (Method::NoKd, Vec::new()),
        Method::Blkd => (Method::Blkd, vec![0]),
        Method::Takd => (Method::Takd, vec![stage - 1]),
        // ascending capacity: newest (smallest) ancestor first
        Method::Dgkd | Method::Ceskd => (method, (0..done.len()).rev().collect()),
    }
}

/// Runs every step of `path` in order.
///
/// Stage 0 is the teacher, either `teacher` (which must match the first
/// spec) or trained from scratch. The second model is always distilled with
/// BLKD from the teacher. For CES-KD every later stage uses the teacher and
/// all assistants produced so far as its pool, re-bucketing the same ranking
/// into as many buckets as there are experts.
pub fn run_path(
    path: &DistillationPath,
    splits: &Splits,
    opts: PathOptions<'_>,
    teacher: Option<Model<f32>>,
    cfg: &RunConfig,
    obs: &mut dyn Observer,
) -> Result<Vec<StageResult>> {
    let specs = path.specs();
    let mut done: Vec<StageResult> = Vec::with_capacity(specs.len());
    obs.stage(0, specs[0].depth_tag, Method::NoKd);
    let first = match teacher {
        Some(t) => {
            if t.spec() != &specs[0] {
                return Err(Error::Config(format!(
                    "pretrained teacher (depth {}) does not match the path's first model (depth {})",
                    t.depth_tag(),
                    specs[0].depth_tag
                )));
            }
            StageResult {
                model: t,
                metrics: Metrics::default(),
                method: Method::NoKd,
                pool: Vec::new(),
            }
        }
        None => {
            let (model, metrics) = train_scratch(&specs[0], splits, cfg, obs)?;
            StageResult {
                model,
                metrics,
                method: Method::NoKd,
                pool: Vec::new(),
            }
        }
    };
    done.push(first);
    for (stage, spec) in specs.iter().enumerate().skip(1) {
        let (method, members) = stage_pool(path.method(), stage, &done);
        obs.stage(stage, spec.depth_tag, method);
        let (model, metrics, tags) = {
            let pool_models: Vec<&Model<f32>> = members.iter().map(|&i| &done[i].model).collect();
            let curriculum = if method == Method::Ceskd {
                let ranked = opts
                    .ranked
                    .ok_or_else(|| Error::Config(String::from("ceskd needs a ranked dataset (score the dataset first)")))?;
                Some(Curriculum {
                    plan: bucketize(ranked, pool_models.len(), opts.class_balanced)?,
                    policy: opts.policy,
                })
            } else {
                None
            };
            let (model, metrics) = if method == Method::NoKd {
                train_scratch(spec, splits, cfg, obs)?
            } else {
                let pool = ExpertPool::new(pool_models)?;
                distill_step(spec, &pool, method, curriculum.as_ref(), splits, cfg, obs)?
            };
            let tags = members.iter().map(|&i| done[i].model.depth_tag()).collect();
            (model, metrics, tags)
        };
        done.push(StageResult {
            model,
            metrics,
            method,
            pool: tags,
        });
    }
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    #[test]
    fn threshold_fixture() {
        assert_eq!(epochs_to_threshold(&[50.0, 60.0, 70.0], 65.0), Some(2));
        assert_eq!(epochs_to_threshold(&[50.0, 60.0], 65.0), None);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("kd".parse::<Method>().is_err());
    }

    #[test]
    fn constant_predictor_accuracy() {
        // zero weights: every logit ties, so class 0 is predicted everywhere
        let spec = ModelSpec::mlp(2, &[], 10, 1).unwrap();
        let model = Model::from_params(spec, vec![Tensor::zeros(&[10, 2]), Tensor::zeros(&[10])], 0).unwrap();
        let labels: Vec<usize> = (0..100).map(|i| i % 10).collect();
        let test = Dataset::new(Tensor::zeros(&[100, 2]), labels, 10, Split::Test).unwrap();
        let (top1, top5) = evaluate(&model, &test).unwrap();
        assert_eq!(top1, 10.0);
        assert_eq!(top5, 50.0);
    }

    #[test]
    fn pool_must_be_ascending() {
        let a: Model<f32> = init_weights(&ModelSpec::mlp(2, &[4], 2, 4).unwrap(), 0).unwrap();
        let b: Model<f32> = init_weights(&ModelSpec::mlp(2, &[8], 2, 6).unwrap(), 0).unwrap();
        assert!(ExpertPool::new(vec![&a, &b]).is_ok());
        assert!(ExpertPool::new(vec![&b, &a]).is_err());
        assert!(ExpertPool::new(vec![&a, &a]).is_err());
    }

    #[test]
    fn path_rejects_non_decreasing_capacity() {
        let s = |d| ModelSpec::mlp(2, &[4], 2, d).unwrap();
        assert!(DistillationPath::new(vec![s(10), s(8), s(6)], Method::Ceskd).is_ok());
        assert!(DistillationPath::new(vec![s(10), s(10)], Method::Takd).is_err());
        assert!(DistillationPath::new(vec![s(6), s(8)], Method::Takd).is_err());
    }
}
