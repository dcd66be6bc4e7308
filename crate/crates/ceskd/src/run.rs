//! Commands and the run directory they share.
//!
//! ```text
//! <out>/config.toml                      verbatim copy of the experiment file
//! <out>/scorer.ckpt, curriculum.tsv      written by `score`
//! <out>/models/<name>-seed<s>.ckpt       scratch models reused across commands
//! <out>/distill/<label>/seed-<s>/        metrics.tsv, runlog.tsv, timing.tsv, <model>.ckpt
//! <out>/distill/<label>/summary.tsv      report rows of that method
//! <out>/hypothesis/{cells,grid}.tsv      written by `hypothesis`
//! <out>/ablation/{seeds,ablation}.tsv    written by `ablate`
//! <out>/report.tsv, series.tsv           written by `report`
//! ```
//!
//! Training is deterministic, so a cached scratch model is the model the
//! command would have trained. Independent seeds run on up to
//! `CESKD_WORKERS` threads.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use ceskd_core::curriculum::{rank, score_dataset, SelectionPolicy};
use ceskd_core::data::{compute_stats, gen_synthetic, normalize, Split, Splits, SyntheticConfig};
use ceskd_core::engine::{
    epochs_to_threshold, run_path, train_scratch, Curriculum, DistillationPath, EpochRecord, ExpertPool, Method,
    Metrics, Observer, PathOptions, RunConfig, StepRecord,
};
use ceskd_core::experiments::{final_accuracies, hypothesis_cell, LEVELS};
use ceskd_core::nn::{Model, ModelSpec};

use crate::config::{parse_config, to_toml, DataConfig, ExperimentConfig, MethodName, PolicyName};
use crate::container::{load_checkpoint_for, load_dataset, save_checkpoint, sha256_hex};
use crate::curriculum_file::CurriculumFile;
use crate::error::{self, Error, Result};
use crate::loaders::{load_cifar10_bin, load_idx};
use crate::report::{
    format_summary, read_metrics, report_table, run_log, series_table, timing_table, write_metrics, ReportRow,
    StageMetrics,
};

pub const WORKERS_ENV: &str = "CESKD_WORKERS";

/// Worker threads for independent runs: `CESKD_WORKERS` if set, else the
/// number of available cores.
pub fn workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Maps `f` over `items` on up to [`workers`] threads; results keep input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let n = workers().min(items.len()).max(1);
    if n == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..n {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every item was processed"))
        .collect()
}

/// Step and epoch events tagged with their stage, plus wall-clock time.
struct Recorder {
    start: Instant,
    stage: usize,
    steps: Vec<(usize, StepRecord)>,
    epochs: Vec<(usize, Vec<EpochRecord>)>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            stage: 0,
            steps: Vec::new(),
            epochs: Vec::new(),
        }
    }
}

impl Observer for Recorder {
    fn stage(&mut self, stage: usize, _depth_tag: u32, _method: Method) {
        self.stage = stage;
        self.epochs.push((stage, Vec::new()));
    }
    fn step(&mut self, rec: &StepRecord) {
        self.steps.push((self.stage, rec.clone()));
    }
    fn epoch(&mut self, rec: &EpochRecord) {
        if self.epochs.is_empty() {
            self.epochs.push((self.stage, Vec::new()));
        }
        self.epochs.last_mut().expect("pushed above").1.push(rec.clone());
    }
    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// A loaded experiment: configuration, normalized data and output directory.
pub struct Workspace {
    pub config: ExperimentConfig,
    config_text: String,
    base: PathBuf,
    pub out: PathBuf,
    pub splits: Splits,
}

fn load_splits(data: &DataConfig, base: &Path) -> Result<Splits> {
    let at = |p: &PathBuf| base.join(p);
    let mut splits = match data {
        &DataConfig::Synthetic {
            classes,
            dim,
            n_train,
            n_test,
            hardness,
            seed,
        } => gen_synthetic(&SyntheticConfig {
            classes,
            dim,
            n_train,
            n_test,
            hardness,
            seed,
        })?,
        DataConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => Splits {
            train: load_idx(&at(train_images), &at(train_labels), Split::Train)?,
            test: load_idx(&at(test_images), &at(test_labels), Split::Test)?,
        },
        DataConfig::Cifar10 { train, test } => Splits {
            train: load_cifar10_bin(&train.iter().map(at).collect::<Vec<_>>(), Split::Train)?,
            test: load_cifar10_bin(&test.iter().map(at).collect::<Vec<_>>(), Split::Test)?,
        },
        DataConfig::Container { train, test } => Splits {
            train: load_dataset(&at(train))?,
            test: load_dataset(&at(test))?,
        },
    };
    if splits.train.num_classes() != splits.test.num_classes() || splits.train.sample_shape() != splits.test.sample_shape() {
        return Err(Error::config("train and test splits disagree on shape or class count"));
    }
    let stats = compute_stats(&splits.train)?;
    normalize(&mut splits.train, &stats)?;
    normalize(&mut splits.test, &stats)?;
    Ok(splits)
}

/// Command-line overrides of the experiment file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub method: Option<MethodName>,
    pub policy: Option<PolicyName>,
}

impl Workspace {
    pub fn open(config_path: &Path, ov: &Overrides) -> Result<Self> {
        let text = String::from_utf8(error::read(config_path)?)
            .map_err(|_| Error::config(format!("{} is not UTF-8", config_path.display())))?;
        let base = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_text(&text, &base, ov)
    }

    /// `base` resolves relative data paths.
    pub fn from_text(text: &str, base: &Path, ov: &Overrides) -> Result<Self> {
        let mut config = parse_config(text)?;
        if let Some(s) = &ov.seeds {
            if s.is_empty() {
                return Err(Error::config("--seed list is empty"));
            }
            config.seeds = s.clone();
        }
        if let Some(m) = ov.method {
            config.method = m;
        }
        if let Some(p) = ov.policy {
            config.curriculum.policy = p;
        }
        let out = ov
            .out
            .clone()
            .or_else(|| config.out.as_ref().map(|o| base.join(o)))
            .ok_or_else(|| Error::config("no output directory: set `out` in the config or pass --out"))?;
        config.run_config()?;
        let splits = load_splits(&config.data, base)?;
        let ws = Self {
            config,
            config_text: text.to_string(),
            base: base.to_path_buf(),
            out,
            splits,
        };
        ws.path()?;
        ws.claim()?;
        Ok(ws)
    }

    /// Writes the config copy, refusing a directory owned by another config.
    fn claim(&self) -> Result<()> {
        let copy = self.out.join("config.toml");
        match std::fs::read(&copy) {
            Ok(existing) if existing != self.config_text.as_bytes() => Err(Error::config(format!(
                "{} holds a different experiment's config.toml; choose another --out",
                copy.display()
            ))),
            Ok(_) => Ok(()),
            Err(_) => error::write(&copy, self.config_text.as_bytes()),
        }
    }

    pub fn base(&self) -> &Path {
        &self.base
    }

    fn input_shape(&self) -> &[usize] {
        self.splits.train.sample_shape()
    }

    fn classes(&self) -> usize {
        self.splits.train.num_classes()
    }

    pub fn spec(&self, name: &str) -> Result<ModelSpec> {
        self.config.spec(name, self.input_shape(), self.classes())
    }

    pub fn path(&self) -> Result<DistillationPath> {
        self.config.distillation_path(self.input_shape(), self.classes())
    }

    pub fn run_config(&self, seed: u64) -> RunConfig {
        self.config.run_config().expect("validated on open").with_seed(seed)
    }

    pub fn curriculum_path(&self) -> PathBuf {
        self.out.join("curriculum.tsv")
    }

    pub fn scorer_path(&self) -> PathBuf {
        self.out.join("scorer.ckpt")
    }

    /// Loads the curriculum written by `score`, checking it fits the data.
    pub fn curriculum(&self) -> Result<CurriculumFile> {
        let path = self.curriculum_path();
        if !path.exists() {
            return Err(Error::MissingArtifact {
                what: "curriculum file",
                path,
                command: "score",
            });
        }
        let cur = CurriculumFile::load(&path)?;
        if cur.ranked.len() != self.splits.train.len() {
            return Err(Error::config(format!(
                "{} ranks {} samples, the training set has {}; run `ceskd score` again",
                path.display(),
                cur.ranked.len(),
                self.splits.train.len()
            )));
        }
        Ok(cur)
    }

    /// A model trained from scratch on `seed`, cached under `models/`. A model
    /// entry with a `checkpoint` is loaded from there instead.
    fn scratch(&self, name: &str, cfg: &RunConfig) -> Result<(Model<f32>, Metrics)> {
        let spec = self.spec(name)?;
        if let Some(ckpt) = self.config.model(name).and_then(|m| m.checkpoint.as_ref()) {
            return Ok((load_checkpoint_for(&self.base.join(ckpt), &spec)?, Metrics::default()));
        }
        let stem = self.out.join("models").join(format!("{name}-seed{}", cfg.seed));
        let ckpt = stem.with_extension("ckpt");
        let metrics = stem.with_extension("metrics.tsv");
        if ckpt.exists() && metrics.exists() {
            let model = load_checkpoint_for(&ckpt, &spec)?;
            let m = read_metrics(&metrics)?.pop().map(|s| s.metrics).unwrap_or_default();
            return Ok((model, m));
        }
        let (model, m) = train_scratch(&spec, &self.splits, cfg, &mut Recorder::new())?;
        save_checkpoint(&model, &ckpt)?;
        write_metrics(
            &metrics,
            &[StageMetrics {
                stage: 0,
                model: name.to_string(),
                depth_tag: spec.depth_tag,
                method: Method::NoKd,
                metrics: m.clone(),
            }],
        )?;
        Ok((model, m))
    }
}

/// `score`: trains (or loads) the reference model, ranks the training set and
/// writes `scorer.ckpt` and `curriculum.tsv`.
pub fn score(ws: &Workspace) -> Result<CurriculumFile> {
    let cfg = ws.config.scorer_config()?;
    let (scorer, _) = ws.scratch(ws.config.scorer_name(), &cfg)?;
    save_checkpoint(&scorer, &ws.scorer_path())?;
    let identity = sha256_hex(&error::read(&ws.scorer_path())?);
    let ranked = rank(&score_dataset(&scorer, &ws.splits.train)?);
    let buckets = ws.config.path.len().saturating_sub(1).max(1);
    let c = &ws.config.curriculum;
    let file = CurriculumFile::new(ranked, buckets, c.class_balanced, c.policy, cfg.seed, identity)?;
    file.save(&ws.curriculum_path())?;
    Ok(file)
}

pub fn method_label(method: MethodName, policy: PolicyName) -> String {
    match method {
        MethodName::Ceskd => format!("ceskd-{}", policy.as_str()),
        m => m.method().to_string(),
    }
}

/// Per-seed outcome of one distillation path.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub stages: Vec<StageMetrics>,
    pub checksums: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct DistillOutcome {
    pub label: String,
    pub runs: Vec<SeedRun>,
    pub rows: Vec<ReportRow>,
}

fn stage_rows(ws: &Workspace, method: &str, policy: &str, runs: &[SeedRun]) -> Vec<ReportRow> {
    let stages = runs.first().map_or(0, |r| r.stages.len());
    (0..stages)
        .map(|k| {
            let metrics: Vec<Metrics> = runs.iter().map(|r| r.stages[k].metrics.clone()).collect();
            let (acc, failed) = final_accuracies(&metrics);
            ReportRow::new(&ws.config.name, method, policy, &runs[0].stages[k].model, &acc, failed)
        })
        .collect()
}

/// `distill`: runs the configured path with `method` for every seed.
pub fn distill(ws: &Workspace) -> Result<DistillOutcome> {
    let method = ws.config.method;
    let policy = ws.config.curriculum.policy;
    let path = ws.path()?;
    let curriculum = match method {
        MethodName::Ceskd if path.specs().len() > 2 => Some(ws.curriculum()?),
        _ => None,
    };
    let label = method_label(method, policy);
    let dir = ws.out.join("distill").join(&label);
    let names = &ws.config.path;
    let runs = par_map(&ws.config.seeds, |&seed| {
        let cfg = ws.run_config(seed);
        let (teacher, teacher_metrics) = ws.scratch(&names[0], &cfg)?;
        let opts = PathOptions {
            ranked: curriculum.as_ref().map(|c| &c.ranked),
            class_balanced: ws.config.curriculum.class_balanced,
            policy: policy.policy(seed),
        };
        let mut rec = Recorder::new();
        let mut results = run_path(&path, &ws.splits, opts, Some(teacher), &cfg, &mut rec)?;
        results[0].metrics = teacher_metrics;
        let seed_dir = dir.join(format!("seed-{seed}"));
        let mut stages = Vec::with_capacity(results.len());
        let mut checksums = Vec::with_capacity(results.len());
        for (k, (r, name)) in results.into_iter().zip(names).enumerate() {
            save_checkpoint(&r.model, &seed_dir.join(format!("{name}.ckpt")))?;
            checksums.push(r.model.checksum());
            stages.push(StageMetrics {
                stage: k,
                model: name.clone(),
                depth_tag: r.model.depth_tag(),
                method: r.method,
                metrics: r.metrics,
            });
        }
        write_metrics(&seed_dir.join("metrics.tsv"), &stages)?;
        error::write(&seed_dir.join("runlog.tsv"), run_log(&rec.steps).as_bytes())?;
        error::write(&seed_dir.join("timing.tsv"), timing_table(&rec.epochs).as_bytes())?;
        Ok(SeedRun { seed, stages, checksums })
    })?;
    let method_name = method.method().to_string();
    let policy_name = if method == MethodName::Ceskd { policy.as_str() } else { "-" };
    let rows = stage_rows(ws, &method_name, policy_name, &runs);
    error::write(&dir.join("summary.tsv"), report_table(&rows).as_bytes())?;
    let mut resolved = ws.config.clone();
    resolved.out = None;
    error::write(&dir.join("resolved.toml"), to_toml(&resolved).as_bytes())?;
    Ok(DistillOutcome { label, runs, rows })
}

#[derive(Clone, Debug)]
pub struct HypothesisOutcome {
    pub expert_tags: Vec<u32>,
    /// `final_top1[expert][level][seed]`, `None` for failed runs.
    pub final_top1: Vec<[Vec<Option<f64>>; 3]>,
    pub rows: Vec<ReportRow>,
}

/// `hypothesis`: every expert teaches a fresh student on each difficulty
/// tercile of the ranking, for every seed.
pub fn hypothesis(ws: &Workspace) -> Result<HypothesisOutcome> {
    let h = ws
        .config
        .hypothesis
        .as_ref()
        .ok_or_else(|| Error::config("the config has no [hypothesis] section"))?;
    let cur = ws.curriculum()?;
    let levels = cur.rebucket(3)?;
    let mut experts = par_map(&h.experts, |name| {
        let (model, _) = ws.scratch(name, &ws.run_config(h.expert_seed))?;
        Ok((name.clone(), model))
    })?;
    experts.sort_by_key(|(_, m)| m.depth_tag());
    let refs: Vec<&Model<f32>> = experts.iter().map(|(_, m)| m).collect();
    ceskd_core::experiments::check_hypothesis_experts(&refs)?;
    let student = ws.spec(&h.student)?;
    let mut cells = Vec::new();
    for e in 0..experts.len() {
        for level in 0..3 {
            for &seed in &ws.config.seeds {
                cells.push((e, level, seed));
            }
        }
    }
    let results = par_map(&cells, |&(e, level, seed)| {
        let cfg = ws.run_config(seed);
        let subset = &levels.buckets()[level];
        let (_, m) = hypothesis_cell(&experts[e].1, &student, subset, &ws.splits, &cfg, &mut Recorder::new())?;
        Ok(m)
    })?;
    let mut final_top1: Vec<[Vec<Option<f64>>; 3]> = vec![Default::default(); experts.len()];
    let mut table = String::from("expert\tdepth\tlevel\tseed\ttop1\n");
    for (&(e, level, seed), m) in cells.iter().zip(&results) {
        let acc = if m.failed() { None } else { m.final_top1() };
        final_top1[e][level].push(acc);
        let shown = acc.map_or_else(|| "failed".to_string(), |a| a.to_string());
        table.push_str(&format!("{}\t{}\t{}\t{seed}\t{shown}\n", experts[e].0, experts[e].1.depth_tag(), LEVELS[level]));
    }
    let dir = ws.out.join("hypothesis");
    error::write(&dir.join("cells.tsv"), table.as_bytes())?;
    let mut rows = Vec::new();
    let mut grid = format!("expert\t{}\n", LEVELS.join("\t"));
    for (e, (name, _)) in experts.iter().enumerate() {
        grid.push_str(name);
        for (level, accs) in final_top1[e].iter().enumerate() {
            let ok: Vec<f64> = accs.iter().flatten().copied().collect();
            let row = ReportRow::new(
                &ws.config.name,
                &format!("blkd:{name}"),
                LEVELS[level],
                &h.student,
                &ok,
                accs.len() - ok.len(),
            );
            grid.push_str(&format!("\t{}", format_summary(&row.accuracy)));
            rows.push(row);
        }
        grid.push('\n');
    }
    error::write(&dir.join("grid.tsv"), grid.as_bytes())?;
    error::write(&dir.join("rows.tsv"), report_table(&rows).as_bytes())?;
    Ok(HypothesisOutcome {
        expert_tags: experts.iter().map(|(_, m)| m.depth_tag()).collect(),
        final_top1,
        rows,
    })
}

#[derive(Clone, Debug)]
pub struct AblationOutcome {
    /// `runs[policy][seed]` in [`PolicyName::ALL`] order.
    pub runs: [Vec<Metrics>; 3],
    pub rows: Vec<ReportRow>,
}

/// Stages of the CES-KD path before the final student for `seed`: reused
/// from a baseline `distill` run when present, trained otherwise.
fn ceskd_prefix(ws: &Workspace, cur: &CurriculumFile, seed: u64) -> Result<Vec<Model<f32>>> {
    let path = ws.path()?.with_method(Method::Ceskd);
    let prefix = path
        .prefix()
        .ok_or_else(|| Error::config("the ablation needs a path with at least two models"))?;
    let names = &ws.config.path[..prefix.specs().len()];
    let done = ws
        .out
        .join("distill")
        .join(method_label(MethodName::Ceskd, PolicyName::Baseline))
        .join(format!("seed-{seed}"));
    let stored: Vec<PathBuf> = names.iter().map(|n| done.join(format!("{n}.ckpt"))).collect();
    if stored.iter().all(|p| p.exists()) {
        return stored
            .iter()
            .zip(prefix.specs())
            .map(|(p, spec)| load_checkpoint_for(p, spec))
            .collect();
    }
    let cfg = ws.run_config(seed);
    let (teacher, _) = ws.scratch(&names[0], &cfg)?;
    let opts = PathOptions {
        ranked: Some(&cur.ranked),
        class_balanced: cur.class_balanced,
        policy: SelectionPolicy::Baseline,
    };
    let stages = run_path(&prefix, &ws.splits, opts, Some(teacher), &cfg, &mut Recorder::new())?;
    Ok(stages.into_iter().map(|s| s.model).collect())
}

/// `ablate`: distils the final student of the CES-KD path under the
/// baseline, anti and random selection policies.
pub fn ablate(ws: &Workspace) -> Result<AblationOutcome> {
    let cur = ws.curriculum()?;
    let path = ws.path()?;
    let student = path.specs().last().expect("path is non-empty").clone();
    let per_seed = par_map(&ws.config.seeds, |&seed| {
        let mut prefix = ceskd_prefix(ws, &cur, seed)?;
        prefix.reverse();
        let pool = ExpertPool::new(prefix.iter().collect())?;
        let plan = cur.rebucket(pool.len())?;
        let cfg = ws.run_config(seed);
        let mut out: [Metrics; 3] = Default::default();
        for (slot, p) in out.iter_mut().zip(PolicyName::ALL) {
            let c = Curriculum {
                plan: plan.clone(),
                policy: p.policy(seed),
            };
            let (_, m) = ceskd_core::engine::distill_step(
                &student,
                &pool,
                Method::Ceskd,
                Some(&c),
                &ws.splits,
                &cfg,
                &mut Recorder::new(),
            )?;
            *slot = m;
        }
        Ok(out)
    })?;
    let mut runs: [Vec<Metrics>; 3] = Default::default();
    let mut table = String::from("seed\tpolicy\ttop1\n");
    for (&seed, r) in ws.config.seeds.iter().zip(per_seed) {
        for ((slot, m), p) in runs.iter_mut().zip(r).zip(PolicyName::ALL) {
            let shown = m
                .final_top1()
                .filter(|_| !m.failed())
                .map_or_else(|| "failed".to_string(), |a| a.to_string());
            table.push_str(&format!("{seed}\t{}\t{shown}\n", p.as_str()));
            slot.push(m);
        }
    }
    let student_name = ws.config.path.last().expect("path is non-empty");
    let rows: Vec<ReportRow> = PolicyName::ALL
        .iter()
        .zip(&runs)
        .map(|(p, ms)| {
            let (acc, failed) = final_accuracies(ms);
            ReportRow::new(&ws.config.name, "ceskd", p.as_str(), student_name, &acc, failed)
        })
        .collect();
    let dir = ws.out.join("ablation");
    error::write(&dir.join("seeds.tsv"), table.as_bytes())?;
    error::write(&dir.join("ablation.tsv"), report_table(&rows).as_bytes())?;
    Ok(AblationOutcome { runs, rows })
}

#[derive(Clone, Debug)]
pub struct ReportOutcome {
    pub rows: Vec<ReportRow>,
    pub series: String,
}

/// Metrics tables of one run label, per seed.
type SeedTables = Vec<(u64, Vec<StageMetrics>)>;

/// `report`: aggregates every `distill` run under the output directory.
///
/// The convergence threshold of a seed is the final accuracy of that seed's
/// `noKD` student; a run that never reaches it counts as its full budget.
pub fn report(ws: &Workspace) -> Result<ReportOutcome> {
    let root = ws.out.join("distill");
    let mut labels: Vec<String> = std::fs::read_dir(&root)
        .map_err(|_| Error::MissingArtifact {
            what: "distillation runs",
            path: root.clone(),
            command: "distill",
        })?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    labels.sort();
    let mut runs: Vec<(String, SeedTables)> = Vec::new();
    for label in &labels {
        let mut seeds = Vec::new();
        for &seed in &ws.config.seeds {
            let file = root.join(label).join(format!("seed-{seed}")).join("metrics.tsv");
            if file.exists() {
                seeds.push((seed, read_metrics(&file)?));
            }
        }
        if !seeds.is_empty() {
            runs.push((label.clone(), seeds));
        }
    }
    let threshold = |seed: u64| -> Option<f64> {
        let (_, scratch) = runs.iter().find(|(l, _)| l == "noKD")?;
        let (_, stages) = scratch.iter().find(|(s, _)| *s == seed)?;
        stages.last()?.metrics.final_top1()
    };
    let mut rows = Vec::new();
    let mut series: Vec<(String, Vec<&Metrics>)> = Vec::new();
    for (label, seeds) in &runs {
        let (method, policy) = label.split_once('-').unwrap_or((label.as_str(), "-"));
        let stages = seeds.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
        for k in 0..stages {
            let metrics: Vec<Metrics> = seeds.iter().map(|(_, s)| s[k].metrics.clone()).collect();
            let (acc, failed) = final_accuracies(&metrics);
            let mut row = ReportRow::new(&ws.config.name, method, policy, &seeds[0].1[k].model, &acc, failed);
            if k + 1 == stages {
                let reached: Vec<f64> = seeds
                    .iter()
                    .filter_map(|(seed, s)| {
                        let m = &s[k].metrics;
                        let theta = threshold(*seed)?;
                        let e = epochs_to_threshold(&m.accuracies(), theta).unwrap_or(m.epochs.len());
                        Some(e as f64)
                    })
                    .collect();
                if !reached.is_empty() {
                    row.epochs_to_threshold = Some(reached.iter().sum::<f64>() / reached.len() as f64);
                }
            }
            rows.push(row);
        }
        series.push((label.clone(), seeds.iter().filter_map(|(_, s)| s.last().map(|x| &x.metrics)).collect()));
    }
    let series = series_table(&series);
    error::write(&ws.out.join("report.tsv"), report_table(&rows).as_bytes())?;
    error::write(&ws.out.join("series.tsv"), series.as_bytes())?;
    Ok(ReportOutcome { rows, series })
}
