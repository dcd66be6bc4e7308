//! Seeded experiment grids: the teacher-size versus difficulty grid and the
//! expert selection ablation.

use alloc::string::String;
use alloc::vec::Vec;

use crate::curriculum::{bucketize, BucketPlan, RankedDataset, SelectionPolicy};
use crate::data::Splits;
use crate::engine::{
    distill_step, run_path, train_student, Curriculum, DistillationPath, ExpertPool, Guidance, Method, Metrics,
    NoopObserver, Observer, PathOptions, RunConfig,
};
use crate::error::{Error, Result};
use crate::nn::{init_weights, Model, ModelSpec};
use crate::rng::{derive_seed, Stream};
use crate::stats::{summarize, Summary};

pub const LEVELS: [&str; 3] = ["Easy", "Intermediate", "Difficult"];

/// Final top-1 accuracies of the runs that did not fail, plus the failure count.
pub fn final_accuracies(runs: &[Metrics]) -> (Vec<f64>, usize) {
    let ok: Vec<f64> = runs
        .iter()
        .filter(|m| !m.failed())
        .filter_map(Metrics::final_top1)
        .collect();
    let failed = runs.len() - ok.len();
    (ok, failed)
}

/// Easy, intermediate and difficult thirds of the ranking.
pub fn terciles(ranked: &RankedDataset, class_balanced: bool) -> Result<BucketPlan> {
    bucketize(ranked, 3, class_balanced)
}

/// Trains a student with BLKD from `expert` on `subset` of the training set.
pub fn hypothesis_cell(
    expert: &Model<f32>,
    student_spec: &ModelSpec,
    subset: &[usize],
    splits: &Splits,
    cfg: &RunConfig,
    obs: &mut dyn Observer,
) -> Result<(Model<f32>, Metrics)> {
    let student = init_weights(student_spec, cfg.seed)?;
    let plan = BucketPlan::single(subset.to_vec());
    train_student(student, Guidance::Single(expert), &plan, splits, cfg, obs)
}

/// Accuracy grid of experts (rows) by difficulty level (columns).
#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub expert_tags: Vec<u32>,
    pub seeds: Vec<u64>,
    /// `runs[expert][level][seed]`.
    pub runs: Vec<[Vec<Metrics>; 3]>,
}

impl HypothesisReport {
    pub fn cell(&self, expert: usize, level: usize) -> (Summary, usize) {
        let (acc, failed) = final_accuracies(&self.runs[expert][level]);
        (summarize(&acc), failed)
    }
}

pub fn check_hypothesis_experts(experts: &[&Model<f32>]) -> Result<()> {
    let mut tags: Vec<u32> = experts.iter().map(|e| e.depth_tag()).collect();
    tags.sort_unstable();
    tags.dedup();
    if tags.len() < 2 || tags.len() != experts.len() {
        return Err(Error::Config(String::from(
            "the hypothesis grid needs at least two experts of distinct capacity",
        )));
    }
    Ok(())
}

/// Runs the whole grid sequentially. Expert rows keep the order given.
pub fn hypothesis(
    experts: &[&Model<f32>],
    student_spec: &ModelSpec,
    splits: &Splits,
    ranked: &RankedDataset,
    class_balanced: bool,
    cfg: &RunConfig,
    seeds: &[u64],
) -> Result<HypothesisReport> {
    check_hypothesis_experts(experts)?;
    let levels = terciles(ranked, class_balanced)?;
    let mut runs = Vec::with_capacity(experts.len());
    for expert in experts {
        let mut row: [Vec<Metrics>; 3] = Default::default();
        for (level, subset) in levels.buckets().iter().enumerate() {
            for &seed in seeds {
                let (_, m) = hypothesis_cell(expert, student_spec, subset, splits, &cfg.with_seed(seed), &mut NoopObserver)?;
                row[level].push(m);
            }
        }
        runs.push(row);
    }
    Ok(HypothesisReport {
        expert_tags: experts.iter().map(|e| e.depth_tag()).collect(),
        seeds: seeds.to_vec(),
        runs,
    })
}

pub const POLICY_NAMES: [&str; 3] = ["baseline", "anti", "random"];

/// The three selection policies for one seed. The random policy draws its
/// permutations from the seed's policy stream.
pub fn ablation_policies(seed: u64) -> [SelectionPolicy; 3] {
    [
        SelectionPolicy::Baseline,
        SelectionPolicy::Anti,
        SelectionPolicy::Random {
            seed: derive_seed(seed, Stream::Policy, 0, 0),
        },
    ]
}

/// Trains the path up to its last model with CES-KD, then distils the final
/// student once per selection policy. Returns metrics in [`POLICY_NAMES`] order.
pub fn ablation_seed(
    path: &DistillationPath,
    splits: &Splits,
    ranked: &RankedDataset,
    class_balanced: bool,
    cfg: &RunConfig,
) -> Result<[Metrics; 3]> {
    let prefix = path
        .with_method(Method::Ceskd)
        .prefix()
        .ok_or_else(|| Error::Config(String::from("the ablation needs a path with at least two models")))?;
    let opts = PathOptions {
        ranked: Some(ranked),
        class_balanced,
        policy: SelectionPolicy::Baseline,
    };
    let stages = run_path(&prefix, splits, opts, None, cfg, &mut NoopObserver)?;
    let mut ancestors: Vec<&Model<f32>> = stages.iter().map(|s| &s.model).collect();
    ancestors.reverse();
    let pool = ExpertPool::new(ancestors)?;
    let plan = bucketize(ranked, pool.len(), class_balanced)?;
    let student_spec = path.specs().last().expect("path is non-empty");
    let mut out: [Metrics; 3] = Default::default();
    for (slot, policy) in out.iter_mut().zip(ablation_policies(cfg.seed)) {
        let cur = Curriculum {
            plan: plan.clone(),
            policy,
        };
        let (_, m) = distill_step(student_spec, &pool, Method::Ceskd, Some(&cur), splits, cfg, &mut NoopObserver)?;
        *slot = m;
    }
    Ok(out)
}

/// Per-policy final accuracies across seeds.
#[derive(Clone, Debug)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    /// `runs[policy][seed]`, policies in [`POLICY_NAMES`] order.
    pub runs: [Vec<Metrics>; 3],
}

impl AblationReport {
    pub fn from_seeds(seeds: Vec<u64>, per_seed: Vec<[Metrics; 3]>) -> Self {
        let mut runs: [Vec<Metrics>; 3] = Default::default();
        for r in per_seed {
            for (slot, m) in runs.iter_mut().zip(r) {
                slot.push(m);
            }
        }
        Self { seeds, runs }
    }

    pub fn summary(&self, policy: usize) -> (Summary, usize) {
        let (acc, failed) = final_accuracies(&self.runs[policy]);
        (summarize(&acc), failed)
    }
}

pub fn ablate_selection(
    path: &DistillationPath,
    splits: &Splits,
    ranked: &RankedDataset,
    class_balanced: bool,
    cfg: &RunConfig,
    seeds: &[u64],
) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(Error::Config("no seeds given".into()));
    }
    let per_seed = seeds
        .iter()
        .map(|&s| ablation_seed(path, splits, ranked, class_balanced, &cfg.with_seed(s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport::from_seeds(seeds.to_vec(), per_seed))
}
