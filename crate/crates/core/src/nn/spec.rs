use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{shape_err, Error, Result};

/// One layer of a sequential model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Dense {
        in_features: usize,
        out_features: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool2d {
        kernel: usize,
        stride: usize,
    },
    Flatten,
}

impl LayerSpec {
    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> core::result::Result<Vec<usize>, String> {
        match *self {
            LayerSpec::Dense {
                in_features,
                out_features,
            } => {
                if input != [in_features] {
                    return Err(format!("dense expects input [{in_features}], got {input:?}"));
                }
                Ok(vec![out_features])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let [c, h, w] = *input else {
                    return Err(format!("conv2d expects [channels, h, w], got {input:?}"));
                };
                if c != in_channels {
                    return Err(format!("conv2d expects {in_channels} channels, got {c}"));
                }
                let oh = window_count(h, kernel, stride, padding)?;
                let ow = window_count(w, kernel, stride, padding)?;
                Ok(vec![out_channels, oh, ow])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::MaxPool2d { kernel, stride } => {
                let [c, h, w] = *input else {
                    return Err(format!("maxpool2d expects [channels, h, w], got {input:?}"));
                };
                Ok(vec![
                    c,
                    window_count(h, kernel, stride, 0)?,
                    window_count(w, kernel, stride, 0)?,
                ])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    /// Weight and bias shapes, for layers that carry parameters.
    pub fn param_shapes(&self) -> Option<[Vec<usize>; 2]> {
        match *self {
            LayerSpec::Dense {
                in_features,
                out_features,
            } => Some([vec![out_features, in_features], vec![out_features]]),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some([
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
            ]),
            _ => None,
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Dense { in_features, .. } => in_features,
            LayerSpec::Conv2d {
                in_channels, kernel, ..
            } => in_channels * kernel * kernel,
            _ => 0,
        }
    }
}

fn window_count(size: usize, kernel: usize, stride: usize, padding: usize) -> core::result::Result<usize, String> {
    if kernel == 0 || stride == 0 {
        return Err("kernel and stride must be positive".to_string());
    }
    let padded = size + 2 * padding;
    if padded < kernel {
        return Err(format!("kernel {kernel} larger than padded input {padded}"));
    }
    Ok((padded - kernel) / stride + 1)
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Dense {
                in_features,
                out_features,
            } => write!(f, "dense {in_features} {out_features}"),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => write!(f, "conv2d {in_channels} {out_channels} {kernel} {stride} {padding}"),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::MaxPool2d { kernel, stride } => write!(f, "maxpool2d {kernel} {stride}"),
            LayerSpec::Flatten => f.write_str("flatten"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    /// Parses the `Display` form, e.g. `dense 32 64` or `conv2d 3 16 3 1 1`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let kind = parts.next().unwrap_or("");
        let nums = parts
            .map(|p| p.parse::<usize>())
            .collect::<core::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("bad layer `{s}`: {e}")))?;
        let spec = match (kind, nums.as_slice()) {
            ("dense", &[i, o]) => LayerSpec::Dense {
                in_features: i,
                out_features: o,
            },
            ("conv2d", &[i, o, k, st, p]) => LayerSpec::Conv2d {
                in_channels: i,
                out_channels: o,
                kernel: k,
                stride: st,
                padding: p,
            },
            ("relu", &[]) => LayerSpec::Relu,
            ("maxpool2d", &[k, st]) => LayerSpec::MaxPool2d { kernel: k, stride: st },
            ("flatten", &[]) => LayerSpec::Flatten,
            _ => return Err(Error::Config(format!("bad layer `{s}`"))),
        };
        Ok(spec)
    }
}

/// Architecture of a model: per-sample input shape, layer stack and the
/// capacity label used to order expert pools.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub depth_tag: u32,
}

impl ModelSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>, depth_tag: u32) -> Result<Self> {
        let spec = Self {
            input_shape,
            layers,
            depth_tag,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Fully connected ReLU network with the given hidden widths.
    pub fn mlp(input_dim: usize, hidden: &[usize], classes: usize, depth_tag: u32) -> Result<Self> {
        let mut layers = Vec::new();
        let mut prev = input_dim;
        for &h in hidden {
            layers.push(LayerSpec::Dense {
                in_features: prev,
                out_features: h,
            });
            layers.push(LayerSpec::Relu);
            prev = h;
        }
        layers.push(LayerSpec::Dense {
            in_features: prev,
            out_features: classes,
        });
        Self::new(vec![input_dim], layers, depth_tag)
    }

    /// Propagates shapes through the stack. Returns the per-sample output shape
    /// of every layer; the last one must be a flat logit vector.
    pub fn validate(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(shape_err("input", format!("bad input shape {:?}", self.input_shape)));
        }
        if self.layers.is_empty() {
            return Err(shape_err("model", "no layers"));
        }
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input_shape.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer
                .output_shape(&cur)
                .map_err(|d| shape_err(format!("layer {i} ({layer})"), d))?;
            if cur.contains(&0) {
                return Err(shape_err(format!("layer {i} ({layer})"), "empty output"));
            }
            shapes.push(cur.clone());
        }
        if cur.len() != 1 || cur[0] < 2 {
            return Err(shape_err(
                "output",
                format!("final layer must produce at least 2 logits, got {cur:?}"),
            ));
        }
        Ok(shapes)
    }

    pub fn num_classes(&self) -> usize {
        self.validate().map(|s| s[s.len() - 1][0]).unwrap_or(0)
    }

    /// Shapes of all parameter tensors in storage order (weight, bias per layer).
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.layers
            .iter()
            .filter_map(LayerSpec::param_shapes)
            .flatten()
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatched_stack_names_the_layer() {
        let spec = ModelSpec::new(
            vec![4],
            vec![
                LayerSpec::Dense {
                    in_features: 4,
                    out_features: 8,
                },
                LayerSpec::Relu,
                LayerSpec::Dense {
                    in_features: 7,
                    out_features: 3,
                },
            ],
            2,
        );
        match spec {
            Err(Error::Shape { location, .. }) => assert!(location.starts_with("layer 2")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conv_stack_shapes() {
        let spec = ModelSpec::new(
            vec![3, 8, 8],
            vec![
                LayerSpec::Conv2d {
                    in_channels: 3,
                    out_channels: 4,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2d { kernel: 2, stride: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    in_features: 64,
                    out_features: 10,
                },
            ],
            4,
        )
        .unwrap();
        let shapes = spec.validate().unwrap();
        assert_eq!(shapes[2], vec![4, 4, 4]);
        assert_eq!(spec.num_classes(), 10);
        assert_eq!(spec.param_count(), 4 * 3 * 9 + 4 + 64 * 10 + 10);
    }

    #[test]
    fn dense_after_conv_requires_flatten() {
        let err = ModelSpec::new(
            vec![1, 4, 4],
            vec![LayerSpec::Dense {
                in_features: 16,
                out_features: 2,
            }],
            1,
        );
        assert!(err.is_err());
    }

    #[test]
    fn layer_text_round_trip() {
        for s in ["dense 3 4", "conv2d 1 2 3 1 0", "relu", "maxpool2d 2 2", "flatten"] {
            let l: LayerSpec = s.parse().unwrap();
            assert_eq!(l.to_string(), s);
        }
        assert!("dense 3".parse::<LayerSpec>().is_err());
        assert!("softmax".parse::<LayerSpec>().is_err());
    }
}
