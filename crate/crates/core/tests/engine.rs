use ceskd_core::curriculum::{assign_experts, bucketize, epoch_iterator, rank, score_dataset, BucketPlan, SelectionPolicy};
use ceskd_core::data::{gen_synthetic, Dataset, Split, Splits, SyntheticConfig};
use ceskd_core::engine::{
    distill_step, evaluate, run_path, train_scratch, Curriculum, DistillationPath, ExpertPool, Method, NoopObserver,
    PathOptions, RunConfig, StepLog,
};
use ceskd_core::nn::{init_weights, Model, ModelSpec};
use ceskd_core::optim::StepSchedule;
use ceskd_core::{Error, Tensor};

fn small_splits() -> Splits {
    gen_synthetic(&SyntheticConfig {
        classes: 3,
        dim: 4,
        n_train: 150,
        n_test: 60,
        hardness: 0.5,
        seed: 3,
    })
    .unwrap()
}

fn cfg(epochs: usize) -> RunConfig {
    let mut c = RunConfig::desk(17);
    c.epochs = epochs;
    c.batch_size = 16;
    c.schedule = StepSchedule::new(0.05, vec![2], 0.1).unwrap();
    c
}

fn ladder() -> Vec<ModelSpec> {
    vec![
        ModelSpec::mlp(4, &[12, 12, 12], 3, 10).unwrap(),
        ModelSpec::mlp(4, &[10, 10], 3, 8).unwrap(),
        ModelSpec::mlp(4, &[8], 3, 6).unwrap(),
        ModelSpec::mlp(4, &[6], 3, 4).unwrap(),
    ]
}

fn trained_experts(splits: &Splits) -> Vec<Model<f32>> {
    // ascending capacity
    ladder()[..3]
        .iter()
        .rev()
        .map(|s| train_scratch(s, splits, &cfg(2), &mut NoopObserver).unwrap().0)
        .collect()
}

fn losses(log: &StepLog) -> Vec<u64> {
    log.steps.iter().map(|s| s.loss.to_bits()).collect()
}

#[test]
fn separable_toy_reaches_full_train_accuracy() {
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let c = i % 2;
        let s = if c == 0 { -1.0 } else { 1.0 };
        feats.extend([s * (1.0 + (i as f32) * 0.05), (i as f32 * 0.37).sin()]);
        labels.push(c);
    }
    let train = Dataset::new(Tensor::new(vec![40, 2], feats).unwrap(), labels, 2, Split::Train).unwrap();
    let test = Dataset::new(train.features().clone(), train.labels().to_vec(), 2, Split::Test).unwrap();
    let splits = Splits { train, test };
    let spec = ModelSpec::mlp(2, &[8], 2, 1).unwrap();
    let mut c = cfg(30);
    c.batch_size = 8;
    let (model, metrics) = train_scratch(&spec, &splits, &c, &mut NoopObserver).unwrap();
    assert_eq!(evaluate(&model, &splits.train).unwrap().0, 100.0);
    assert_eq!(metrics.epochs.len(), 30);
}

#[test]
fn zero_epochs_returns_the_initialised_model() {
    let splits = small_splits();
    let spec = &ladder()[3];
    let c = cfg(0);
    let (model, metrics) = train_scratch(spec, &splits, &c, &mut NoopObserver).unwrap();
    assert!(metrics.epochs.is_empty());
    assert_eq!(model.checksum(), init_weights::<f32>(spec, c.seed).unwrap().checksum());
}

#[test]
fn scratch_training_is_deterministic() {
    let splits = small_splits();
    let spec = &ladder()[2];
    let (m1, a) = train_scratch(spec, &splits, &cfg(3), &mut NoopObserver).unwrap();
    let (m2, b) = train_scratch(spec, &splits, &cfg(3), &mut NoopObserver).unwrap();
    assert!(a.same_trace(&b));
    assert_eq!(m1.checksum(), m2.checksum());
    let (m3, _) = train_scratch(spec, &splits, &cfg(3).with_seed(18), &mut NoopObserver).unwrap();
    assert_ne!(m1.checksum(), m3.checksum());
}

#[test]
fn degenerate_methods_match_blkd_exactly() {
    let splits = small_splits();
    let experts = trained_experts(&splits);
    let teacher = &experts[2];
    let pool = ExpertPool::new(vec![teacher]).unwrap();
    let student = &ladder()[3];
    let c = cfg(3);

    let mut blkd = StepLog::default();
    let (mb, _) = distill_step(student, &pool, Method::Blkd, None, &splits, &c, &mut blkd).unwrap();

    let mut dgkd = StepLog::default();
    let (md, _) = distill_step(student, &pool, Method::Dgkd, None, &splits, &c, &mut dgkd).unwrap();

    let ranked = rank(&score_dataset(teacher, &splits.train).unwrap());
    let cur = Curriculum {
        plan: bucketize(&ranked, 1, true).unwrap(),
        policy: SelectionPolicy::Baseline,
    };
    let mut ceskd = StepLog::default();
    let (mc, _) = distill_step(student, &pool, Method::Ceskd, Some(&cur), &splits, &c, &mut ceskd).unwrap();

    assert!(!blkd.steps.is_empty());
    assert_eq!(losses(&blkd), losses(&dgkd));
    assert_eq!(losses(&blkd), losses(&ceskd));
    assert_eq!(mb.checksum(), md.checksum());
    assert_eq!(mb.checksum(), mc.checksum());
}

#[test]
fn ceskd_consults_exactly_the_assigned_expert() {
    let splits = small_splits();
    let experts = trained_experts(&splits);
    let pool = ExpertPool::new(experts.iter().collect()).unwrap();
    let ranked = rank(&score_dataset(&experts[2], &splits.train).unwrap());
    let plan = bucketize(&ranked, 3, true).unwrap();
    let c = cfg(4);
    let shuffle = ceskd_core::rng::derive_seed(c.seed, ceskd_core::rng::Stream::Shuffle, 4, 0);
    for policy in [SelectionPolicy::Baseline, SelectionPolicy::Anti, SelectionPolicy::Random { seed: 5 }] {
        let cur = Curriculum { plan: plan.clone(), policy };
        let mut log = StepLog::default();
        distill_step(&ladder()[3], &pool, Method::Ceskd, Some(&cur), &splits, &c, &mut log).unwrap();
        let mut steps = log.steps.iter();
        for epoch in 0..c.epochs {
            let assignment = assign_experts(&plan, 3, policy, epoch).unwrap();
            for mb in epoch_iterator(&plan, c.batch_size, shuffle, epoch) {
                let rec = steps.next().expect("run log ended early");
                assert_eq!((rec.epoch, rec.bucket), (epoch, mb.bucket));
                let expected = pool.get(assignment.expert_of_bucket[mb.bucket]).depth_tag();
                assert_eq!(rec.experts, vec![expected], "{policy:?} epoch {epoch} step {}", rec.step);
            }
        }
        assert!(steps.next().is_none());
    }
}

#[test]
fn experts_stay_frozen() {
    let splits = small_splits();
    let experts = trained_experts(&splits);
    let before: Vec<u64> = experts.iter().map(Model::checksum).collect();
    let ranked = rank(&score_dataset(&experts[2], &splits.train).unwrap());
    let full = ExpertPool::new(experts.iter().collect()).unwrap();
    let one = ExpertPool::new(vec![&experts[2]]).unwrap();
    let cur = Curriculum {
        plan: bucketize(&ranked, 3, false).unwrap(),
        policy: SelectionPolicy::Baseline,
    };
    let c = cfg(2);
    let s = &ladder()[3];
    distill_step(s, &one, Method::Blkd, None, &splits, &c, &mut NoopObserver).unwrap();
    distill_step(s, &one, Method::Takd, None, &splits, &c, &mut NoopObserver).unwrap();
    distill_step(s, &full, Method::Dgkd, None, &splits, &c, &mut NoopObserver).unwrap();
    distill_step(s, &full, Method::Ceskd, Some(&cur), &splits, &c, &mut NoopObserver).unwrap();
    let after: Vec<u64> = experts.iter().map(Model::checksum).collect();
    assert_eq!(before, after);
}

#[test]
fn distill_step_validates_its_inputs() {
    let splits = small_splits();
    let experts = trained_experts(&splits);
    let full = ExpertPool::new(experts.iter().collect()).unwrap();
    let s = &ladder()[3];
    let c = cfg(1);
    let is_config = |r: Result<_, Error>| matches!(r, Err(Error::Config(_)));
    assert!(is_config(distill_step(s, &full, Method::Blkd, None, &splits, &c, &mut NoopObserver)));
    assert!(is_config(distill_step(s, &full, Method::Takd, None, &splits, &c, &mut NoopObserver)));
    let err = distill_step(s, &full, Method::Ceskd, None, &splits, &c, &mut NoopObserver).unwrap_err();
    assert!(err.to_string().contains("score"), "{err}");
    let ranked = rank(&score_dataset(&experts[2], &splits.train).unwrap());
    let two = Curriculum {
        plan: bucketize(&ranked, 2, false).unwrap(),
        policy: SelectionPolicy::Baseline,
    };
    assert!(is_config(distill_step(s, &full, Method::Ceskd, Some(&two), &splits, &c, &mut NoopObserver)));
    assert!(ExpertPool::new(vec![&experts[2], &experts[0]]).is_err());
    assert!(ExpertPool::new(vec![]).is_err());
}

#[test]
fn ceskd_path_grows_its_pool_and_buckets() {
    let splits = small_splits();
    let specs = ladder();
    let scorer = train_scratch(&specs[0], &splits, &cfg(1).with_seed(99), &mut NoopObserver).unwrap().0;
    let ranked = rank(&score_dataset(&scorer, &splits.train).unwrap());
    let path = DistillationPath::new(specs.clone(), Method::Ceskd).unwrap();
    let opts = PathOptions {
        ranked: Some(&ranked),
        class_balanced: true,
        policy: SelectionPolicy::Baseline,
    };
    let mut log = StepLog::default();
    let stages = run_path(&path, &splits, opts, None, &cfg(2), &mut log).unwrap();
    let methods: Vec<Method> = stages.iter().map(|s| s.method).collect();
    assert_eq!(methods, vec![Method::NoKd, Method::Blkd, Method::Ceskd, Method::Ceskd]);
    assert_eq!(stages[1].pool, vec![10]);
    assert_eq!(stages[2].pool, vec![8, 10]);
    assert_eq!(stages[3].pool, vec![6, 8, 10]);
    let tags: Vec<u32> = log.stages.iter().map(|s| s.1).collect();
    assert_eq!(tags, vec![10, 8, 6, 4]);

    // step counters restart with every stage; curriculum stages use |pool| buckets
    let mut stage_of_step = Vec::new();
    let mut current = 0usize;
    let mut last_step = None;
    for rec in &log.steps {
        if last_step.is_some_and(|s| rec.step <= s) {
            current += 1;
        }
        last_step = Some(rec.step);
        stage_of_step.push(current);
    }
    for (stage, pool) in [(2usize, vec![8u32, 10]), (3, vec![6, 8, 10])] {
        let recs: Vec<_> = log.steps.iter().zip(&stage_of_step).filter(|(_, &s)| s == stage).map(|(r, _)| r).collect();
        let buckets: std::collections::BTreeSet<usize> = recs.iter().map(|r| r.bucket).collect();
        assert_eq!(buckets.len(), pool.len());
        assert!(recs.iter().all(|r| r.experts.len() == 1 && pool.contains(&r.experts[0])));
    }
}

#[test]
fn first_step_is_blkd_for_every_method() {
    let splits = small_splits();
    let specs = ladder();
    for method in [Method::Blkd, Method::Takd, Method::Dgkd] {
        let path = DistillationPath::new(specs[..3].to_vec(), method).unwrap();
        let opts = PathOptions {
            ranked: None,
            class_balanced: true,
            policy: SelectionPolicy::Baseline,
        };
        let stages = run_path(&path, &splits, opts, None, &cfg(1), &mut NoopObserver).unwrap();
        assert_eq!(stages[1].method, Method::Blkd);
        assert_eq!(stages[1].pool, vec![10]);
        let expected: Vec<u32> = match method {
            Method::Takd => vec![8],
            Method::Dgkd => vec![8, 10],
            _ => vec![10],
        };
        assert_eq!(stages[2].pool, expected, "{method}");
    }
}

#[test]
fn single_model_path_is_scratch_training() {
    let splits = small_splits();
    let spec = ladder()[2].clone();
    let path = DistillationPath::new(vec![spec.clone()], Method::Ceskd).unwrap();
    let opts = PathOptions {
        ranked: None,
        class_balanced: false,
        policy: SelectionPolicy::Baseline,
    };
    let stages = run_path(&path, &splits, opts, None, &cfg(2), &mut NoopObserver).unwrap();
    let (m, metrics) = train_scratch(&spec, &splits, &cfg(2), &mut NoopObserver).unwrap();
    assert_eq!(stages.len(), 1);
    assert_eq!(stages[0].model.checksum(), m.checksum());
    assert!(stages[0].metrics.same_trace(&metrics));
}

#[test]
fn paths_must_shrink_and_teachers_must_match() {
    let specs = ladder();
    assert!(DistillationPath::new(vec![specs[2].clone(), specs[0].clone()], Method::Blkd).is_err());
    assert!(DistillationPath::new(vec![specs[1].clone(), specs[1].clone()], Method::Blkd).is_err());
    let splits = small_splits();
    let wrong = init_weights::<f32>(&specs[1], 0).unwrap();
    let path = DistillationPath::new(specs[..2].to_vec(), Method::Blkd).unwrap();
    let opts = PathOptions {
        ranked: None,
        class_balanced: false,
        policy: SelectionPolicy::Baseline,
    };
    assert!(run_path(&path, &splits, opts, Some(wrong), &cfg(1), &mut NoopObserver).is_err());
    let ceskd = path.with_method(Method::Ceskd);
    let three = DistillationPath::new(specs[..3].to_vec(), Method::Ceskd).unwrap();
    assert!(run_path(&ceskd, &splits, opts, None, &cfg(1), &mut NoopObserver).is_ok());
    assert!(run_path(&three, &splits, opts, None, &cfg(1), &mut NoopObserver).is_err());
}

#[test]
fn evaluation_matches_a_hand_count() {
    // argmax of the raw features: class = position of the largest input
    let spec = ModelSpec::mlp(3, &[], 3, 1).unwrap();
    let mut m: Model<f32> = init_weights(&spec, 0).unwrap();
    m.params_mut()[0].data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    m.params_mut()[1].data_mut().fill(0.0);
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    let mut correct = 0;
    for i in 0..20usize {
        let hot = (i * 7) % 3;
        let mut row = [0.1f32, 0.2, 0.3];
        row[hot] = 1.0;
        feats.extend(row);
        // every fourth label is wrong on purpose
        let label = if i % 4 == 0 { (hot + 1) % 3 } else { hot };
        correct += usize::from(label == hot);
        labels.push(label);
    }
    let test = Dataset::new(Tensor::new(vec![20, 3], feats).unwrap(), labels, 3, Split::Test).unwrap();
    let (top1, top5) = evaluate(&m, &test).unwrap();
    assert_eq!(correct, 15);
    assert_eq!(top1, 75.0);
    assert_eq!(top5, 100.0);
}

#[test]
fn divergence_is_reported_not_hidden() {
    let splits = small_splits();
    let mut c = cfg(3);
    c.schedule = StepSchedule::new(1e30, vec![], 0.1).unwrap();
    let (_, metrics) = train_scratch(&ladder()[3], &splits, &c, &mut NoopObserver).unwrap();
    assert!(metrics.failed(), "{metrics:?}");
    assert!(metrics.epochs.len() < 3);
}

#[test]
fn curriculum_plan_must_cover_the_training_set() {
    let splits = small_splits();
    let experts = trained_experts(&splits);
    let pool = ExpertPool::new(vec![&experts[2]]).unwrap();
    let partial = Curriculum {
        plan: BucketPlan::single((0..10).collect()),
        policy: SelectionPolicy::Baseline,
    };
    assert!(distill_step(&ladder()[3], &pool, Method::Ceskd, Some(&partial), &splits, &cfg(1), &mut NoopObserver).is_err());
}
