use std::fmt;
use std::str::FromStr;

use super::layers::{output_dims, Conv, Layer};
use super::ModelError;

/// Block family of the convolutional stages.
///
/// * `Plain`: stacked 3x3 conv + ReLU, then 2x2 max-pool (VGG-style).
/// * `Residual`: a 3x3 conv + ReLU stem, then blocks computing
///   `relu(x + conv(relu(conv(x))))`, then max-pool (ResNet-style).
/// * `Dense`: layers appending `relu(conv(x))` (growth = stage filters) to
///   their input channels, a 1x1 conv + ReLU transition, then max-pool
///   (DenseNet-style).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockFamily {
    Plain,
    Residual,
    Dense,
}

impl BlockFamily {
    pub const ALL: [BlockFamily; 3] = [BlockFamily::Plain, BlockFamily::Residual, BlockFamily::Dense];

    pub fn name(self) -> &'static str {
        match self {
            BlockFamily::Plain => "plain",
            BlockFamily::Residual => "residual",
            BlockFamily::Dense => "dense",
        }
    }
}

impl fmt::Display for BlockFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockFamily {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" | "vgg" => Ok(BlockFamily::Plain),
            "residual" | "resnet" => Ok(BlockFamily::Residual),
            "dense" | "densenet" => Ok(BlockFamily::Dense),
            other => Err(ModelError::Spec(format!("unknown block family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage {
    /// Output channels (growth rate for the dense family).
    pub filters: usize,
    pub blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub input_side: usize,
    pub family: BlockFamily,
    pub stages: Vec<Stage>,
}

impl ModelSpec {
    /// Desk-scale default for each family: three stages on 64 px input.
    pub fn default_for(family: BlockFamily) -> Self {
        let stages = match family {
            BlockFamily::Plain | BlockFamily::Residual => vec![
                Stage { filters: 8, blocks: 1 },
                Stage { filters: 16, blocks: 1 },
                Stage { filters: 32, blocks: 1 },
            ],
            BlockFamily::Dense => vec![
                Stage { filters: 8, blocks: 2 },
                Stage { filters: 12, blocks: 2 },
                Stage { filters: 16, blocks: 2 },
            ],
        };
        Self { input_side: 64, family, stages }
    }

    /// Compact descriptor, e.g. `family=plain;input_side=64;stages=8x1,16x1`.
    pub fn descriptor(&self) -> String {
        let stages: Vec<String> = self.stages.iter().map(|s| format!("{}x{}", s.filters, s.blocks)).collect();
        format!("family={};input_side={};stages={}", self.family, self.input_side, stages.join(","))
    }

    pub fn parse_descriptor(text: &str) -> Result<Self, ModelError> {
        let bad = || ModelError::Spec(format!("bad model descriptor {text:?}"));
        let (mut family, mut side, mut stages) = (None, None, None);
        for part in text.trim().split(';') {
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            match key {
                "family" => family = Some(value.parse()?),
                "input_side" => side = Some(value.parse().map_err(|_| bad())?),
                "stages" => {
                    stages = Some(
                        value
                            .split(',')
                            .map(|s| {
                                let (f, b) = s.split_once('x').ok_or_else(bad)?;
                                Ok(Stage {
                                    filters: f.parse().map_err(|_| bad())?,
                                    blocks: b.parse().map_err(|_| bad())?,
                                })
                            })
                            .collect::<Result<Vec<_>, ModelError>>()?,
                    )
                }
                _ => return Err(bad()),
            }
        }
        let spec = ModelSpec {
            family: family.ok_or_else(bad)?,
            input_side: side.ok_or_else(bad)?,
            stages: stages.ok_or_else(bad)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.stages.is_empty() {
            return Err(ModelError::Spec("at least one stage is required".into()));
        }
        if let Some(s) = self.stages.iter().find(|s| s.filters == 0) {
            return Err(ModelError::Spec(format!("stage with {} filters", s.filters)));
        }
        if self.family == BlockFamily::Dense && self.stages.iter().any(|s| s.blocks == 0) {
            return Err(ModelError::Spec("dense stages need at least one layer".into()));
        }
        let arch = build_layers(self);
        output_dims(&arch.layers, (self.input_side, self.input_side, 3)).ok_or_else(|| {
            ModelError::Spec(format!(
                "input side {} is too small for {} pooling stages",
                self.input_side,
                self.stages.len()
            ))
        })?;
        Ok(())
    }
}

/// Layer graph plus parameter layout derived from a spec.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Architecture {
    pub layers: Vec<Layer>,
    pub param_count: usize,
    /// `(weight offset, weight count, fan-in)` of every parametrized layer.
    pub weight_blocks: Vec<(usize, usize, usize)>,
}

struct Builder {
    offset: usize,
    weight_blocks: Vec<(usize, usize, usize)>,
}

impl Builder {
    fn conv(&mut self, in_c: usize, out_c: usize, k: usize) -> Layer {
        let pad = k / 2;
        let w_off = self.offset;
        let b_off = w_off + k * k * in_c * out_c;
        let cv = Conv { in_c, out_c, k, stride: 1, pad, w_off, b_off };
        self.weight_blocks.push((w_off, k * k * in_c * out_c, cv.fan_in()));
        self.offset += cv.param_count();
        Layer::Conv(cv)
    }

    fn linear(&mut self, in_f: usize, out_f: usize) -> Layer {
        let w_off = self.offset;
        let b_off = w_off + in_f * out_f;
        self.weight_blocks.push((w_off, in_f * out_f, in_f));
        self.offset += in_f * out_f + out_f;
        Layer::Linear { in_f, out_f, w_off, b_off }
    }
}

pub(crate) fn build_layers(spec: &ModelSpec) -> Architecture {
    let mut b = Builder { offset: 0, weight_blocks: Vec::new() };
    let mut layers = Vec::new();
    let mut c = 3;
    for stage in &spec.stages {
        let f = stage.filters;
        match spec.family {
            BlockFamily::Plain => {
                for _ in 0..stage.blocks.max(1) {
                    layers.push(b.conv(c, f, 3));
                    layers.push(Layer::Relu);
                    c = f;
                }
            }
            BlockFamily::Residual => {
                layers.push(b.conv(c, f, 3));
                layers.push(Layer::Relu);
                c = f;
                for _ in 0..stage.blocks {
                    let branch = vec![b.conv(f, f, 3), Layer::Relu, b.conv(f, f, 3)];
                    layers.push(Layer::Residual(branch));
                    layers.push(Layer::Relu);
                }
            }
            BlockFamily::Dense => {
                for _ in 0..stage.blocks {
                    layers.push(Layer::DenseConcat(vec![b.conv(c, f, 3), Layer::Relu]));
                    c += f;
                }
                layers.push(b.conv(c, f, 1));
                layers.push(Layer::Relu);
                c = f;
            }
        }
        layers.push(Layer::MaxPool { k: 2, stride: 2 });
    }
    layers.push(Layer::GlobalAvgPool);
    layers.push(b.linear(c, 1));
    Architecture { layers, param_count: b.offset, weight_blocks: b.weight_blocks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_round_trips() {
        for family in BlockFamily::ALL {
            let spec = ModelSpec::default_for(family);
            assert_eq!(ModelSpec::parse_descriptor(&spec.descriptor()).unwrap(), spec);
        }
        assert_eq!(
            ModelSpec::default_for(BlockFamily::Plain).descriptor(),
            "family=plain;input_side=64;stages=8x1,16x1,32x1"
        );
    }

    #[test]
    fn validation() {
        let mut spec = ModelSpec::default_for(BlockFamily::Plain);
        spec.stages.clear();
        assert!(spec.validate().is_err());
        let spec = ModelSpec { input_side: 4, ..ModelSpec::default_for(BlockFamily::Plain) };
        assert!(spec.validate().is_err());
        let spec =
            ModelSpec { input_side: 8, family: BlockFamily::Dense, stages: vec![Stage { filters: 0, blocks: 1 }] };
        assert!(spec.validate().is_err());
        assert!(ModelSpec::parse_descriptor("family=plain;stages=8x1").is_err());
        assert!("wide".parse::<BlockFamily>().is_err());
    }

    #[test]
    fn parameter_counts() {
        // conv 3->8 (3x3): 216 + 8; linear 8->1: 8 + 1
        let spec =
            ModelSpec { input_side: 8, family: BlockFamily::Plain, stages: vec![Stage { filters: 8, blocks: 1 }] };
        assert_eq!(build_layers(&spec).param_count, 224 + 9);
        // dense: conv 3->4 (112), conv 7->4 (256), transition 1x1 11->4 (48), linear 4->1 (5)
        let spec =
            ModelSpec { input_side: 8, family: BlockFamily::Dense, stages: vec![Stage { filters: 4, blocks: 2 }] };
        assert_eq!(build_layers(&spec).param_count, 112 + 256 + 48 + 5);
    }
}
