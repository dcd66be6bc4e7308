//! Versioned tensor container used for checkpoints and serialized datasets.
//!
//! A file is a text header followed by the raw payload:
//!
//! ```text
//! ceskd-container 1
//! kind checkpoint
//! depth_tag 4
//! seed 3
//! input_shape 16
//! layer dense 16 128
//! layer relu
//! layer dense 128 10
//! tensor 128 16
//! tensor 128
//! tensor 10 128
//! tensor 10
//! sha256 9f2c...
//! end
//! <little-endian f32 blocks, one per tensor line, in order>
//! ```
//!
//! Every header line is `key value`. `kind` is always the second line, the
//! `tensor` lines come after the metadata and the checksum covers the payload.

use std::path::Path;

use ceskd_core::data::{Dataset, Split};
use ceskd_core::nn::{LayerSpec, Model, ModelSpec};
use ceskd_core::Tensor;
use sha2::{Digest, Sha256};

use crate::error::{self, Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "ceskd-container";

/// Metadata lines plus the tensors of one file.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: String,
    pub fields: Vec<(String, String)>,
    pub tensors: Vec<Tensor<f32>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Container {
    pub fn field(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::with_capacity(self.tensors.iter().map(|t| 4 * t.len()).sum());
        for t in &self.tensors {
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut head = format!("{MAGIC} {FORMAT_VERSION}\nkind {}\n", self.kind);
        for (k, v) in &self.fields {
            head.push_str(&format!("{k} {v}\n"));
        }
        for t in &self.tensors {
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            head.push_str(&format!("tensor {}\n", dims.join(" ")));
        }
        head.push_str(&format!("sha256 {}\nend\n", sha256_hex(&payload)));
        let mut out = head.into_bytes();
        out.extend_from_slice(&payload);
        out
    }

    /// Parses a container; `file` names the source in error messages.
    pub fn from_bytes(bytes: &[u8], file: &str) -> Result<Self> {
        let mut pos = 0;
        let mut next_line = |what: &str| -> Result<(usize, String)> {
            let start = pos;
            let len = bytes[start..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::bytes(file, start, format!("header ended before {what}")))?;
            let line = std::str::from_utf8(&bytes[start..start + len])
                .map_err(|_| Error::bytes(file, start, "header line is not UTF-8"))?
                .to_string();
            pos = start + len + 1;
            Ok((start, line))
        };

        let (at, first) = next_line("the format line")?;
        let version = first
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::bytes(file, at, "not a ceskd container"))?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                file: file.to_string(),
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let (at, kind_line) = next_line("the kind line")?;
        let kind = kind_line
            .strip_prefix("kind ")
            .ok_or_else(|| Error::bytes(file, at, "expected `kind <name>`"))?
            .to_string();

        let mut fields = Vec::new();
        let mut shapes: Vec<Vec<usize>> = Vec::new();
        let stored = loop {
            let (at, line) = next_line("`end`")?;
            let (key, value) = line.split_once(' ').unwrap_or((line.as_str(), ""));
            match key {
                "tensor" => {
                    let dims = value
                        .split_whitespace()
                        .map(str::parse::<usize>)
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::bytes(file, at, format!("bad tensor shape `{value}`: {e}")))?;
                    if dims.is_empty() {
                        return Err(Error::bytes(file, at, "tensor line without dimensions"));
                    }
                    shapes.push(dims);
                }
                "sha256" => {
                    let (at, end) = next_line("`end`")?;
                    if end != "end" {
                        return Err(Error::bytes(file, at, "expected `end` after the checksum"));
                    }
                    break value.to_string();
                }
                "" | "end" => return Err(Error::bytes(file, at, "header has no checksum line")),
                _ if !shapes.is_empty() => {
                    return Err(Error::bytes(file, at, format!("metadata `{key}` after the tensor list")))
                }
                _ => fields.push((key.to_string(), value.to_string())),
            }
        };

        let payload = &bytes[pos..];
        let expected: usize = shapes.iter().map(|s| 4 * s.iter().product::<usize>()).sum();
        if payload.len() != expected {
            return Err(Error::bytes(
                file,
                pos,
                format!("payload holds {} bytes, tensor list needs {expected}", payload.len()),
            ));
        }
        let computed = sha256_hex(payload);
        if computed != stored {
            return Err(Error::Checksum {
                file: file.to_string(),
                stored,
                computed,
            });
        }
        let mut tensors = Vec::with_capacity(shapes.len());
        let mut words = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        for shape in shapes {
            let n = shape.iter().product();
            let data: Vec<f32> = words.by_ref().take(n).collect();
            tensors.push(Tensor::new(shape, data)?);
        }
        Ok(Self { kind, fields, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        error::write(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&error::read(path)?, &path.display().to_string())
    }
}

fn dims(shape: &[usize]) -> String {
    shape.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn meta_err(file: &str, detail: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        unit: "byte",
        offset: 0,
        detail: detail.into(),
    }
}

fn required<'a>(c: &'a Container, key: &str, file: &str) -> Result<&'a str> {
    c.field(key)
        .ok_or_else(|| meta_err(file, format!("missing `{key}` in the {} header", c.kind)))
}

fn number<T: std::str::FromStr>(c: &Container, key: &str, file: &str) -> Result<T> {
    let v = required(c, key, file)?;
    v.parse()
        .map_err(|_| meta_err(file, format!("`{key}` is not a number: `{v}`")))
}

pub fn checkpoint(model: &Model<f32>) -> Container {
    let spec = model.spec();
    let mut fields = vec![
        ("depth_tag".to_string(), spec.depth_tag.to_string()),
        ("seed".to_string(), model.seed().to_string()),
        ("input_shape".to_string(), dims(&spec.input_shape)),
    ];
    fields.extend(spec.layers.iter().map(|l| ("layer".to_string(), l.to_string())));
    Container {
        kind: "checkpoint".to_string(),
        fields,
        tensors: model.params().to_vec(),
    }
}

pub fn model_from(c: Container, file: &str) -> Result<Model<f32>> {
    if c.kind != "checkpoint" {
        return Err(meta_err(file, format!("expected a checkpoint, found a {}", c.kind)));
    }
    let depth_tag = number(&c, "depth_tag", file)?;
    let seed = number(&c, "seed", file)?;
    let input_shape = required(&c, "input_shape", file)?
        .split_whitespace()
        .map(str::parse::<usize>)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| meta_err(file, format!("bad input_shape: {e}")))?;
    let layers = c
        .fields
        .iter()
        .filter(|(k, _)| k == "layer")
        .map(|(_, v)| v.parse::<LayerSpec>())
        .collect::<ceskd_core::Result<Vec<_>>>()?;
    let spec = ModelSpec::new(input_shape, layers, depth_tag)?;
    Ok(Model::from_params(spec, c.tensors, seed)?)
}

pub fn save_checkpoint(model: &Model<f32>, path: &Path) -> Result<()> {
    checkpoint(model).save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Model<f32>> {
    model_from(Container::load(path)?, &path.display().to_string())
}

/// Loads a checkpoint and checks it against the architecture a config expects.
pub fn load_checkpoint_for(path: &Path, expected: &ModelSpec) -> Result<Model<f32>> {
    let model = load_checkpoint(path)?;
    let file = path.display().to_string();
    if model.depth_tag() != expected.depth_tag {
        return Err(Error::DepthMismatch {
            file,
            expected: expected.depth_tag,
            found: model.depth_tag(),
        });
    }
    if model.spec() != expected {
        return Err(meta_err(&file, "checkpoint layers differ from the configured architecture"));
    }
    Ok(model)
}

pub fn dataset(ds: &Dataset) -> Container {
    let split = match ds.split() {
        Split::Train => "train",
        Split::Test => "test",
    };
    let labels: Vec<f32> = ds.labels().iter().map(|&l| l as f32).collect();
    Container {
        kind: "dataset".to_string(),
        fields: vec![
            ("classes".to_string(), ds.num_classes().to_string()),
            ("split".to_string(), split.to_string()),
        ],
        tensors: vec![
            ds.features().clone(),
            Tensor::new(vec![ds.len()], labels).expect("one label per sample"),
        ],
    }
}

pub fn dataset_from(c: Container, file: &str) -> Result<Dataset> {
    if c.kind != "dataset" {
        return Err(meta_err(file, format!("expected a dataset, found a {}", c.kind)));
    }
    let classes: usize = number(&c, "classes", file)?;
    let split = match required(&c, "split", file)? {
        "train" => Split::Train,
        "test" => Split::Test,
        other => return Err(meta_err(file, format!("unknown split `{other}`"))),
    };
    let [features, labels]: [Tensor<f32>; 2] = c
        .tensors
        .try_into()
        .map_err(|_| meta_err(file, "a dataset holds exactly a feature and a label tensor"))?;
    let labels = labels
        .data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < classes {
                Ok(v as usize)
            } else {
                Err(meta_err(file, format!("label {v} is not a class index below {classes}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(features, labels, classes, split)?)
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    dataset(ds).save(path)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    dataset_from(Container::load(path)?, &path.display().to_string())
}
