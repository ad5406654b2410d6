use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed::StreamRng;
use crate::tensor::{Tape, Tensor, Var};

/// One interchangeable operation of a choice block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CandidateKind {
    Identity,
    /// Dense k×k convolution + bias + ReLU.
    Conv { k: usize },
    /// Depthwise k×k then pointwise 1×1 convolution + bias + ReLU.
    SeparableConv { k: usize },
    /// Grouped 1×1 conv → channel shuffle → depthwise k×k → grouped 1×1 conv.
    GroupedShuffleConv { k: usize, groups: usize },
    /// Fully connected layer + ReLU on flat features.
    LinearRelu { width: usize },
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateKind::Identity => write!(f, "identity"),
            CandidateKind::Conv { k } => write!(f, "conv{k}"),
            CandidateKind::SeparableConv { k } => write!(f, "sepconv{k}"),
            CandidateKind::GroupedShuffleConv { k, groups } => write!(f, "shuffle{k}g{groups}"),
            CandidateKind::LinearRelu { width } => write!(f, "linear{width}"),
        }
    }
}

impl FromStr for CandidateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |rest: &str| {
            rest.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad candidate kind `{s}`")))
        };
        let kind = if s == "identity" {
            CandidateKind::Identity
        } else if let Some(rest) = s.strip_prefix("sepconv") {
            CandidateKind::SeparableConv { k: num(rest)? }
        } else if let Some(rest) = s.strip_prefix("conv") {
            CandidateKind::Conv { k: num(rest)? }
        } else if let Some(rest) = s.strip_prefix("shuffle") {
            let (k, g) = rest
                .split_once('g')
                .ok_or_else(|| Error::Config(format!("bad candidate kind `{s}`, expected shuffle<k>g<groups>")))?;
            CandidateKind::GroupedShuffleConv {
                k: num(k)?,
                groups: num(g)?,
            }
        } else if let Some(rest) = s.strip_prefix("linear") {
            CandidateKind::LinearRelu { width: num(rest)? }
        } else {
            return Err(Error::Config(format!(
                "unknown candidate kind `{s}` (expected identity, conv<k>, sepconv<k>, shuffle<k>g<g>, linear<w>)"
            )));
        };
        kind.check_kernel()?;
        Ok(kind)
    }
}

impl CandidateKind {
    fn check_kernel(&self) -> Result<()> {
        let k = match self {
            CandidateKind::Conv { k }
            | CandidateKind::SeparableConv { k }
            | CandidateKind::GroupedShuffleConv { k, .. } => *k,
            _ => return Ok(()),
        };
        if k % 2 == 0 || k == 0 {
            return Err(Error::Config(format!("{self}: kernel size must be odd")));
        }
        Ok(())
    }

    /// Per-sample output shape for a per-sample input shape, or `None` when
    /// the kind cannot consume that input.
    pub fn output_shape(&self, input: &[usize]) -> Option<Vec<usize>> {
        match (self, input.len()) {
            (CandidateKind::Identity, _) => Some(input.to_vec()),
            (CandidateKind::Conv { k } | CandidateKind::SeparableConv { k }, 3) => {
                (k % 2 == 1).then(|| input.to_vec())
            }
            (CandidateKind::GroupedShuffleConv { k, groups }, 3) => {
                (k % 2 == 1 && *groups > 0 && input[0] % groups == 0).then(|| input.to_vec())
            }
            (CandidateKind::LinearRelu { width }, 1) => (*width > 0).then(|| vec![*width]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub slot: usize,
    pub tensor: Tensor,
}

pub(crate) fn he_tensor(shape: Vec<usize>, fan_in: usize, rng: &mut StreamRng) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let numel = shape.iter().product();
    let data = (0..numel).map(|_| normal.sample(rng)).collect();
    Tensor::new(shape, data).expect("finite init").with_grad()
}

fn zeros(shape: Vec<usize>) -> Tensor {
    Tensor::zeros(shape).with_grad()
}

/// A candidate operation together with the weights it owns.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateOp {
    pub kind: CandidateKind,
    pub params: Vec<Param>,
}

impl CandidateOp {
    /// Allocates He-initialized weights for `kind` on per-sample `input`.
    /// Slots are left at 0 and assigned by the owning network.
    pub(crate) fn init(kind: CandidateKind, input: &[usize], prefix: &str, rng: &mut StreamRng) -> Self {
        let named = |suffix: &str, tensor: Tensor| Param {
            name: format!("{prefix}.{suffix}"),
            slot: 0,
            tensor,
        };
        let params = match kind {
            CandidateKind::Identity => vec![],
            CandidateKind::Conv { k } => {
                let c = input[0];
                vec![
                    named("weight", he_tensor(vec![c, c, k, k], c * k * k, rng)),
                    named("bias", zeros(vec![c])),
                ]
            }
            CandidateKind::SeparableConv { k } => {
                let c = input[0];
                vec![
                    named("depthwise", he_tensor(vec![c, 1, k, k], k * k, rng)),
                    named("pointwise", he_tensor(vec![c, c, 1, 1], c, rng)),
                    named("bias", zeros(vec![c])),
                ]
            }
            CandidateKind::GroupedShuffleConv { k, groups } => {
                let c = input[0];
                let cg = c / groups;
                vec![
                    named("group_in", he_tensor(vec![c, cg, 1, 1], cg, rng)),
                    named("bias_in", zeros(vec![c])),
                    named("depthwise", he_tensor(vec![c, 1, k, k], k * k, rng)),
                    named("group_out", he_tensor(vec![c, cg, 1, 1], cg, rng)),
                    named("bias_out", zeros(vec![c])),
                ]
            }
            CandidateKind::LinearRelu { width } => {
                let d = input[0];
                vec![
                    named("weight", he_tensor(vec![d, width], d, rng)),
                    named("bias", zeros(vec![width])),
                ]
            }
        };
        Self { kind, params }
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    /// Records the operation on `tape`. `w` holds the tape handles of
    /// `self.params`, in order.
    pub(crate) fn apply(&self, tape: &mut Tape, x: Var, w: &[Var]) -> Result<Var> {
        match self.kind {
            CandidateKind::Identity => Ok(x),
            CandidateKind::Conv { k } => {
                let y = tape.conv2d(x, w[0], 1, k / 2)?;
                let y = tape.add_bias(y, w[1])?;
                tape.relu(y)
            }
            CandidateKind::SeparableConv { k } => {
                let c = tape.shape(x)[1];
                let y = tape.conv2d_grouped(x, w[0], 1, k / 2, c)?;
                let y = tape.conv2d(y, w[1], 1, 0)?;
                let y = tape.add_bias(y, w[2])?;
                tape.relu(y)
            }
            CandidateKind::GroupedShuffleConv { k, groups } => {
                let c = tape.shape(x)[1];
                let y = tape.conv2d_grouped(x, w[0], 1, 0, groups)?;
                let y = tape.add_bias(y, w[1])?;
                let y = tape.relu(y)?;
                let y = tape.channel_shuffle(y, groups)?;
                let y = tape.conv2d_grouped(y, w[2], 1, k / 2, c)?;
                let y = tape.conv2d_grouped(y, w[3], 1, 0, groups)?;
                let y = tape.add_bias(y, w[4])?;
                tape.relu(y)
            }
            CandidateKind::LinearRelu { .. } => {
                let y = tape.matmul(x, w[0])?;
                let y = tape.add_bias(y, w[1])?;
                tape.relu(y)
            }
        }
    }
}
