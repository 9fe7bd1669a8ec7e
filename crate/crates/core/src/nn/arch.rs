//! TAN and MAN layer plans.
//!
//! TAN is a 1D AlexNet: five convolutions, three max-pools and three dense
//! layers. MAN keeps three convolutions (each followed by batch norm), two
//! pools and two dense layers at roughly half the width.

use serde::{Deserialize, Serialize};

use super::layers::{conv_out_len, pool_out_len};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchName {
    #[serde(rename = "TAN", alias = "tan")]
    Tan,
    #[serde(rename = "MAN", alias = "man")]
    Man,
}

impl ArchName {
    pub fn id(self) -> u8 {
        match self {
            ArchName::Tan => 0,
            ArchName::Man => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(ArchName::Tan),
            1 => Some(ArchName::Man),
            _ => None,
        }
    }
}

impl std::fmt::Display for ArchName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ArchName::Tan => "TAN",
            ArchName::Man => "MAN",
        })
    }
}

impl std::str::FromStr for ArchName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "TAN" => Ok(ArchName::Tan),
            "MAN" => Ok(ArchName::Man),
            _ => Err(format!("unknown architecture {s:?} (TAN|MAN)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv1d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize },
    BatchNorm1d { channels: usize },
    Relu,
    MaxPool1d { kernel: usize, stride: usize },
    Flatten,
    Linear { in_features: usize, out_features: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchDescriptor {
    pub name: ArchName,
    pub input_len: usize,
    pub layers: Vec<LayerSpec>,
}

impl ArchDescriptor {
    pub fn count(&self, pred: impl Fn(&LayerKind) -> bool) -> usize {
        self.layers.iter().filter(|l| pred(&l.kind)).count()
    }

    /// Trainable parameter count (weights, biases, BN affine terms).
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::Conv1d { in_ch, out_ch, kernel, .. } => out_ch * in_ch * kernel + out_ch,
                LayerKind::Linear { in_features, out_features } => out_features * in_features + out_features,
                LayerKind::BatchNorm1d { channels } => 2 * channels,
                _ => 0,
            })
            .sum()
    }
}

enum Step {
    Conv(usize, usize, usize, usize),
    Bn,
    Relu,
    Pool(usize, usize),
    Flatten,
    Fc(usize),
    FcOut,
}

fn plan(name: ArchName) -> Vec<Step> {
    use Step::*;
    match name {
        ArchName::Tan => vec![
            Conv(64, 11, 4, 5),
            Relu,
            Pool(3, 2),
            Conv(192, 5, 1, 2),
            Relu,
            Pool(3, 2),
            Conv(384, 3, 1, 1),
            Relu,
            Conv(256, 3, 1, 1),
            Relu,
            Conv(256, 3, 1, 1),
            Relu,
            Pool(3, 2),
            Flatten,
            Fc(1024),
            Relu,
            Fc(1024),
            Relu,
            FcOut,
        ],
        ArchName::Man => vec![
            Conv(32, 11, 4, 5),
            Bn,
            Relu,
            Pool(3, 2),
            Conv(96, 5, 1, 2),
            Bn,
            Relu,
            Pool(3, 2),
            Conv(128, 3, 1, 1),
            Bn,
            Relu,
            Flatten,
            Fc(768),
            Relu,
            FcOut,
        ],
    }
}

/// Resolves the layer plan for `name` against an input window of `input_len`.
pub fn build_arch(name: ArchName, input_len: usize) -> Result<ArchDescriptor> {
    let unsupported = || Error::UnsupportedInputLen(input_len);
    if input_len == 0 {
        return Err(unsupported());
    }
    let (mut ch, mut len, mut flat) = (1usize, input_len, None::<usize>);
    let (mut nconv, mut nbn, mut npool, mut nfc, mut nrelu) = (0, 0, 0, 0, 0);
    let mut layers = Vec::new();
    for step in plan(name) {
        let (lname, kind) = match step {
            Step::Conv(out_ch, kernel, stride, padding) => {
                len = conv_out_len(len, kernel, stride, padding).ok_or_else(unsupported)?;
                let kind = LayerKind::Conv1d { in_ch: ch, out_ch, kernel, stride, padding };
                ch = out_ch;
                nconv += 1;
                (format!("conv{nconv}"), kind)
            }
            Step::Bn => {
                nbn += 1;
                (format!("bn{nbn}"), LayerKind::BatchNorm1d { channels: ch })
            }
            Step::Relu => {
                nrelu += 1;
                (format!("relu{nrelu}"), LayerKind::Relu)
            }
            Step::Pool(kernel, stride) => {
                len = pool_out_len(len, kernel, stride).ok_or_else(unsupported)?;
                npool += 1;
                (format!("pool{npool}"), LayerKind::MaxPool1d { kernel, stride })
            }
            Step::Flatten => {
                flat = Some(ch * len);
                ("flatten".to_string(), LayerKind::Flatten)
            }
            Step::Fc(_) | Step::FcOut if flat.is_none() => return Err(unsupported()),
            Step::Fc(out) => {
                let in_features = flat.replace(out).expect("flattened before dense layers");
                nfc += 1;
                (format!("fc{nfc}"), LayerKind::Linear { in_features, out_features: out })
            }
            Step::FcOut => {
                let in_features = flat.replace(input_len).expect("flattened before dense layers");
                nfc += 1;
                (format!("fc{nfc}"), LayerKind::Linear { in_features, out_features: input_len })
            }
        };
        if len == 0 {
            return Err(unsupported());
        }
        layers.push(LayerSpec { name: lname, kind });
    }
    if flat != Some(input_len) {
        return Err(unsupported());
    }
    Ok(ArchDescriptor { name, input_len, layers })
}
