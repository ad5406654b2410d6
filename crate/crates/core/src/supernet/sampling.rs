use rand::Rng;

use super::{ChoiceEdge, Supernet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One sampled subnetwork: a candidate index per edge plus the unit mask
/// scalars that will be multiplied onto each edge output.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub selections: Vec<usize>,
    pub log_prob: f64,
    pub masks: Vec<Tensor>,
}

impl PathSample {
    /// A deterministic path with fresh masks and the log-probability it
    /// would have under the current α.
    pub fn fixed(net: &Supernet, selections: Vec<usize>) -> Result<Self> {
        if selections.len() != net.num_edges() {
            return Err(Error::Usage(format!(
                "path has {} entries for {} edges",
                selections.len(),
                net.num_edges()
            )));
        }
        let mut log_prob = 0.0;
        for (e, (edge, &k)) in net.edges().iter().zip(&selections).enumerate() {
            let p = edge_probabilities(edge)?;
            if k >= p.len() || edge.pruned()[k] {
                return Err(Error::Usage(format!("edge {e}: candidate {k} is pruned or out of range")));
            }
            log_prob += p[k].ln();
        }
        Ok(Self {
            masks: unit_masks(selections.len()),
            selections,
            log_prob,
        })
    }
}

fn unit_masks(n: usize) -> Vec<Tensor> {
    (0..n).map(|_| Tensor::scalar(1.0).with_grad()).collect()
}

/// Softmax over the unpruned α entries; pruned entries are exactly 0.
pub fn edge_probabilities(edge: &ChoiceEdge) -> Result<Vec<f64>> {
    let alpha = edge.alpha();
    let pruned = edge.pruned();
    let max = alpha
        .iter()
        .zip(pruned)
        .filter(|(_, p)| !**p)
        .map(|(a, _)| *a)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Invariant("every candidate on the edge is pruned".into()));
    }
    let mut probs: Vec<f64> = alpha
        .iter()
        .zip(pruned)
        .map(|(a, p)| if *p { 0.0 } else { (a - max).exp() })
        .collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    Ok(probs)
}

fn draw(probs: &[f64], pruned: &[bool], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last = 0;
    for (i, (&p, &dead)) in probs.iter().zip(pruned).enumerate() {
        if dead {
            continue;
        }
        cum += p;
        last = i;
        if u < cum {
            return i;
        }
    }
    last
}

/// Draws one candidate per edge from `softmax(α)` (one uniform draw per
/// edge, inverse CDF) and allocates fresh unit masks.
pub fn sample_path<R: Rng + ?Sized>(net: &Supernet, rng: &mut R) -> Result<PathSample> {
    let mut selections = Vec::with_capacity(net.num_edges());
    let mut log_prob = 0.0;
    for edge in net.edges() {
        let probs = edge_probabilities(edge)?;
        let u: f64 = rng.random();
        let k = draw(&probs, edge.pruned(), u);
        log_prob += probs[k].ln();
        selections.push(k);
    }
    Ok(PathSample {
        masks: unit_masks(selections.len()),
        selections,
        log_prob,
    })
}

/// `c · (onehot(k) − p)`: the log-softmax gradient at the selected
/// candidate, scaled by the mask-gradient loss signal `c`. Pruned positions
/// are 0.
pub fn alpha_gradient(edge: &ChoiceEdge, selected: usize, dl_dmask: f64) -> Result<Vec<f64>> {
    if selected >= edge.len() || edge.pruned()[selected] {
        return Err(Error::Usage(format!(
            "candidate {selected} is pruned or out of range for an edge of {}",
            edge.len()
        )));
    }
    if !dl_dmask.is_finite() {
        return Err(Error::Numerical(format!("mask gradient {dl_dmask} is not finite")));
    }
    let probs = edge_probabilities(edge)?;
    Ok(probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let onehot = if i == selected { 1.0 } else { 0.0 };
            dl_dmask * (onehot - p)
        })
        .collect())
}
