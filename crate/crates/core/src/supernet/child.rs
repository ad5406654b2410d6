use std::fmt::Write as _;

use super::{CandidateKind, Supernet};
use crate::data::Batch;
use crate::error::{Error, Result};

use super::forward::ForwardPass;

/// The deployable network: the argmax-α candidate of every edge with its
/// trained weights, no retraining needed.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildArchitecture {
    pub selections: Vec<usize>,
    pub kinds: Vec<CandidateKind>,
    pub alphas: Vec<Vec<f64>>,
    pub network: Supernet,
}

/// Picks the unpruned argmax-α candidate on every edge (ties → lowest index).
pub fn derive_child(net: &Supernet) -> Result<ChildArchitecture> {
    let selections = net.argmax_path();
    let kinds = net
        .edges()
        .iter()
        .zip(&selections)
        .map(|(e, &k)| e.candidates[k].kind)
        .collect();
    Ok(ChildArchitecture {
        network: net.fixed_path(&selections)?,
        kinds,
        alphas: net.alphas(),
        selections,
    })
}

impl ChildArchitecture {
    pub fn forward(&self, batch: &Batch) -> Result<ForwardPass> {
        let path = vec![0; self.selections.len()];
        self.network.forward_selection(&path, None, batch)
    }

    pub fn describe(&self) -> ChildDescription {
        let cfg = self.network.config();
        ChildDescription {
            input_shape: cfg.input_shape.clone(),
            num_classes: cfg.num_classes,
            channels: cfg.channels,
            stem_kernel: cfg.stem_kernel,
            edges: self
                .network
                .edges()
                .iter()
                .enumerate()
                .map(|(e, edge)| EdgeDescription {
                    index: self.selections[e],
                    kind: self.kinds[e],
                    alpha: self.alphas[e].clone(),
                    params: edge.candidates[0].param_count(),
                })
                .collect(),
            total_params: self.network.param_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDescription {
    pub index: usize,
    pub kind: CandidateKind,
    pub alpha: Vec<f64>,
    pub params: usize,
}

/// Text summary of a derived child, written next to its weight blob.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildDescription {
    pub input_shape: Vec<usize>,
    pub num_classes: usize,
    pub channels: usize,
    pub stem_kernel: usize,
    pub edges: Vec<EdgeDescription>,
    pub total_params: usize,
}

const HEADER: &str = "fednas-child 1";

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

impl ChildDescription {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{HEADER}").unwrap();
        writeln!(s, "input_shape = {}", join(&self.input_shape, "x")).unwrap();
        writeln!(s, "num_classes = {}", self.num_classes).unwrap();
        writeln!(s, "channels = {}", self.channels).unwrap();
        writeln!(s, "stem_kernel = {}", self.stem_kernel).unwrap();
        writeln!(s, "edges = {}", self.edges.len()).unwrap();
        for (e, d) in self.edges.iter().enumerate() {
            writeln!(
                s,
                "edge {e} = {} index={} params={} alpha={}",
                d.kind,
                d.index,
                d.params,
                join(&d.alpha, ",")
            )
            .unwrap();
        }
        writeln!(s, "total_params = {}", self.total_params).unwrap();
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Format {
            offset: line as u64,
            detail: format!("child description line {line}: {msg}"),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == HEADER => {}
            _ => return Err(bad(1, "missing header")),
        }
        let mut get = |key: &str| -> Result<(usize, String)> {
            let (i, line) = lines.next().ok_or_else(|| bad(0, &format!("missing `{key}`")))?;
            let (k, v) = line.split_once('=').ok_or_else(|| bad(i + 1, "expected key = value"))?;
            if k.trim() != key {
                return Err(bad(i + 1, &format!("expected `{key}`, found `{}`", k.trim())));
            }
            Ok((i + 1, v.trim().to_string()))
        };
        let num = |(i, v): (usize, String)| -> Result<usize> {
            v.parse().map_err(|_| bad(i, &format!("`{v}` is not a count")))
        };
        let (i, shape) = get("input_shape")?;
        let input_shape = shape
            .split('x')
            .map(|d| d.parse().map_err(|_| bad(i, "bad input shape")))
            .collect::<Result<Vec<usize>>>()?;
        let num_classes = num(get("num_classes")?)?;
        let channels = num(get("channels")?)?;
        let stem_kernel = num(get("stem_kernel")?)?;
        let count = num(get("edges")?)?;
        let mut edges = Vec::with_capacity(count);
        for e in 0..count {
            let (i, v) = get(&format!("edge {e}"))?;
            let mut parts = v.split_whitespace();
            let kind: CandidateKind = parts
                .next()
                .ok_or_else(|| bad(i, "missing kind"))?
                .parse()
                .map_err(|_| bad(i, "bad candidate kind"))?;
            let (mut index, mut params, mut alpha) = (None, None, None);
            for part in parts {
                let (k, val) = part.split_once('=').ok_or_else(|| bad(i, "expected field=value"))?;
                match k {
                    "index" => index = val.parse().ok(),
                    "params" => params = val.parse().ok(),
                    "alpha" => {
                        alpha = val
                            .split(',')
                            .map(|a| a.parse::<f64>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .ok()
                    }
                    _ => return Err(bad(i, &format!("unknown field `{k}`"))),
                }
            }
            edges.push(EdgeDescription {
                kind,
                index: index.ok_or_else(|| bad(i, "missing or bad index"))?,
                params: params.ok_or_else(|| bad(i, "missing or bad params"))?,
                alpha: alpha.ok_or_else(|| bad(i, "missing or bad alpha"))?,
            });
        }
        let total_params = num(get("total_params")?)?;
        Ok(Self {
            input_shape,
            num_classes,
            channels,
            stem_kernel,
            edges,
            total_params,
        })
    }
}
