//! Tab-separated export of a scored and bucketed training set.
//!
//! ```text
//! # ceskd curriculum 1
//! # buckets 3
//! # class_balanced true
//! # policy baseline
//! # seed 0
//! # scorer 5be1...
//! sample_index  class_label  score  bucket
//! 17  2  0.0003401  0
//! ```
//!
//! Rows follow the ranking, easiest first. Scores are written in the
//! shortest form that parses back to the same `f64`.

use std::path::Path;

use ceskd_core::curriculum::{bucketize, BucketPlan, RankedDataset, ScoredSample};

use crate::config::PolicyName;
use crate::error::{self, Error, Result};

pub const CURRICULUM_VERSION: u32 = 1;
const COLUMNS: &str = "sample_index\tclass_label\tscore\tbucket";

#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumFile {
    pub class_balanced: bool,
    pub policy: PolicyName,
    pub seed: u64,
    /// SHA-256 of the scorer checkpoint file.
    pub scorer: String,
    pub ranked: RankedDataset,
    pub plan: BucketPlan,
}

impl CurriculumFile {
    pub fn new(
        ranked: RankedDataset,
        buckets: usize,
        class_balanced: bool,
        policy: PolicyName,
        seed: u64,
        scorer: String,
    ) -> Result<Self> {
        let plan = bucketize(&ranked, buckets, class_balanced)?;
        Ok(Self {
            class_balanced,
            policy,
            seed,
            scorer,
            ranked,
            plan,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# ceskd curriculum {CURRICULUM_VERSION}\n# buckets {}\n# class_balanced {}\n# policy {}\n# seed {}\n# scorer {}\n{COLUMNS}\n",
            self.plan.len(),
            self.class_balanced,
            self.policy.as_str(),
            self.seed,
            self.scorer
        );
        let bucket_of = self.plan.bucket_of(self.ranked.len());
        for e in self.ranked.entries() {
            let b = bucket_of[e.index].expect("the plan partitions the ranking");
            out.push_str(&format!("{}\t{}\t{}\t{b}\n", e.index, e.label, e.score));
        }
        out
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::line(file, 0, format!("file ends before the `{key}` header")))?;
            let value = line
                .strip_prefix("# ")
                .and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix(' '))
                .ok_or_else(|| Error::line(file, no, format!("expected `# {key} <value>`")))?;
            Ok((no, value.to_string()))
        };
        let (no, magic) = header("ceskd curriculum")?;
        let version: u32 = magic
            .parse()
            .map_err(|_| Error::line(file, no, format!("bad version `{magic}`")))?;
        if version != CURRICULUM_VERSION {
            return Err(Error::Version {
                file: file.to_string(),
                found: version,
                expected: CURRICULUM_VERSION,
            });
        }
        let (no, v) = header("buckets")?;
        let buckets: usize = v.parse().map_err(|_| Error::line(file, no, format!("bad bucket count `{v}`")))?;
        let (no, v) = header("class_balanced")?;
        let class_balanced: bool = v.parse().map_err(|_| Error::line(file, no, format!("bad flag `{v}`")))?;
        let (no, v) = header("policy")?;
        let policy = PolicyName::parse(&v).ok_or_else(|| Error::line(file, no, format!("unknown policy `{v}`")))?;
        let (no, v) = header("seed")?;
        let seed: u64 = v.parse().map_err(|_| Error::line(file, no, format!("bad seed `{v}`")))?;
        let (_, scorer) = header("scorer")?;

        match lines.next() {
            Some((_, COLUMNS)) => {}
            Some((no, _)) => return Err(Error::line(file, no, format!("expected the column line `{COLUMNS}`"))),
            None => return Err(Error::line(file, 0, "file ends before the column line")),
        }
        let mut entries = Vec::new();
        let mut file_buckets = Vec::new();
        for (no, line) in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::line(file, no, format!("expected 4 columns, found {}", cols.len())));
            }
            let bad = |what: &str| Error::line(file, no, format!("bad {what} `{line}`"));
            let index = cols[0].parse().map_err(|_| bad("sample index"))?;
            let label = cols[1].parse().map_err(|_| bad("class label"))?;
            let score: f64 = cols[2].parse().map_err(|_| bad("score"))?;
            let bucket: usize = cols[3].parse().map_err(|_| bad("bucket"))?;
            entries.push(ScoredSample { index, label, score });
            file_buckets.push((no, index, bucket));
        }
        let ranked = RankedDataset::from_ranked(entries).map_err(|e| Error::line(file, 0, e.to_string()))?;
        let plan = bucketize(&ranked, buckets, class_balanced).map_err(|e| Error::line(file, 2, e.to_string()))?;
        let bucket_of = plan.bucket_of(ranked.len());
        for (no, index, bucket) in file_buckets {
            if bucket_of[index] != Some(bucket) {
                return Err(Error::line(
                    file,
                    no,
                    format!("sample {index} is in bucket {bucket}, the ranking puts it in {:?}", bucket_of[index]),
                ));
            }
        }
        Ok(Self {
            class_balanced,
            policy,
            seed,
            scorer,
            ranked,
            plan,
        })
    }

    /// The same ranking split into a different number of buckets.
    pub fn rebucket(&self, buckets: usize) -> Result<BucketPlan> {
        Ok(bucketize(&self.ranked, buckets, self.class_balanced)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        error::write(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = error::read(path)?;
        let file = path.display().to_string();
        let text = String::from_utf8(bytes).map_err(|_| Error::line(&file, 0, "not UTF-8"))?;
        Self::parse(&text, &file)
    }
}
