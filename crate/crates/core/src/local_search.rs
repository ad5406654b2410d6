//! Client-side search: epochs of single-path sampling with joint updates of
//! the operation weights `w` and the architecture parameters `α`.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;

use crate::data::Shard;
use crate::error::{Error, Result};
use crate::seed::stream;
use crate::supernet::{alpha_gradient, prune_edges, sample_path, ParameterBlob, Supernet};
use crate::tensor::Sgd;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearchConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_w: f64,
    pub momentum_w: f64,
    /// Plain SGD step size for α.
    pub lr_alpha: f64,
    /// Candidates whose α drops below this are pruned; `-inf` disables.
    pub alpha_threshold: f64,
    /// Global L2 clip on the weight gradient of each step.
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            batch_size: 32,
            lr_w: 0.05,
            momentum_w: 0.9,
            lr_alpha: 0.003,
            alpha_threshold: f64::NEG_INFINITY,
            grad_clip: None,
            seed: 0,
        }
    }
}

impl LocalSearchConfig {
    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.epochs == 0 {
            v.push("local.epochs must be at least 1".to_string());
        }
        if self.batch_size == 0 {
            v.push("local.batch_size must be at least 1".to_string());
        }
        if !(self.lr_w >= 0.0 && self.lr_w.is_finite()) {
            v.push(format!("local.lr_w = {} must be a non-negative number", self.lr_w));
        }
        if !(self.lr_alpha >= 0.0 && self.lr_alpha.is_finite()) {
            v.push(format!("local.lr_alpha = {} must be a non-negative number", self.lr_alpha));
        }
        if !(0.0..1.0).contains(&self.momentum_w) {
            v.push(format!("local.momentum_w = {} must lie in [0, 1)", self.momentum_w));
        }
        if self.alpha_threshold.is_nan() || self.alpha_threshold == f64::INFINITY {
            v.push(format!("local.alpha_threshold = {} is not usable", self.alpha_threshold));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0 && c.is_finite()) {
                v.push(format!("local.grad_clip = {c} must be positive"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearchReport {
    pub blob: ParameterBlob,
    /// Shard size `n_i`.
    pub samples: usize,
    /// Sample-weighted mean training loss of every epoch.
    pub epoch_losses: Vec<f64>,
    /// `executions[e][j]`: steps in which candidate `j` of edge `e` ran.
    pub executions: Vec<Vec<u64>>,
    /// Candidate operations executed by each step.
    pub step_executions: Vec<usize>,
    /// Largest tape size seen in any step.
    pub peak_live_tensors: usize,
    /// Global dataset indices read during this search, in access order.
    pub accessed: Vec<usize>,
    pub pruned: usize,
    pub duration: Duration,
}

impl LocalSearchReport {
    pub fn steps(&self) -> usize {
        self.step_executions.len()
    }

    /// Everything except wall-clock duration.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self {
            duration: Duration::ZERO,
            ..self.clone()
        } == Self {
            duration: Duration::ZERO,
            ..other.clone()
        }
    }
}

/// Runs local search from `initial` on `shard`.
///
/// `template` supplies the architecture (candidate set and pruning masks);
/// its weights and α are overwritten by `initial`. Each step samples one
/// path, trains the sampled weights with momentum SGD and moves α by
/// `lr_alpha · c · (onehot − p)` where `c` is the loss gradient at the
/// edge's unit mask.
pub fn client_local_search(
    template: &Supernet,
    initial: &ParameterBlob,
    shard: &Shard<'_>,
    config: &LocalSearchConfig,
) -> Result<LocalSearchReport> {
    let started = Instant::now();
    config.validate()?;
    if shard.is_empty() {
        return Err(Error::Data("client shard is empty".into()));
    }
    let mut net = template.clone();
    net.unflatten_params(initial)?;
    net.clear_grads();
    let reads_before = shard.accessed().len();

    let mut sgd = Sgd::new(config.lr_w, config.momentum_w)?;
    let mut path_rng = stream(config.seed, "path", 0);
    let mut executions: Vec<Vec<u64>> = net.edges().iter().map(|e| vec![0; e.len()]).collect();
    let mut step_executions = Vec::new();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut peak = 0;
    let mut pruned = 0;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..shard.len()).collect();
        order.shuffle(&mut stream(config.seed, "batch-order", epoch as u64));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = shard.batch(chunk)?;
            let path = sample_path(&net, &mut path_rng)?;
            let grads = net.forward_path(&path, &batch)?.backward()?;
            if !grads.loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "training loss became {} in epoch {epoch}",
                    grads.loss
                )));
            }
            loss_sum += grads.loss * chunk.len() as f64;
            peak = peak.max(grads.live_tensors);
            step_executions.push(grads.executed_candidates);
            for (e, &k) in path.selections.iter().enumerate() {
                executions[e][k] += 1;
            }

            let mut param_grads = grads.param_grads;
            if let Some(clip) = config.grad_clip {
                let norm = param_grads
                    .iter()
                    .flat_map(|(_, g)| g.iter())
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                if norm > clip {
                    let s = clip / norm;
                    param_grads.iter_mut().for_each(|(_, g)| g.iter_mut().for_each(|x| *x *= s));
                }
            }
            net.accumulate_grads(&param_grads)?;
            sgd.step(
                net.params_mut()
                    .filter(|p| p.tensor.grad().is_some())
                    .map(|p| (p.slot, &mut p.tensor)),
            )?;

            if net.is_searchable() {
                for (e, &k) in path.selections.iter().enumerate() {
                    let g = alpha_gradient(&net.edges()[e], k, grads.mask_grads[e])?;
                    let edge = &mut net.edges_mut()[e];
                    let updated: Vec<f64> = edge
                        .alpha()
                        .iter()
                        .zip(&g)
                        .map(|(a, g)| a - config.lr_alpha * g)
                        .collect();
                    edge.set_alpha(&updated)?;
                }
                pruned += prune_edges(&mut net, config.alpha_threshold);
            }
        }
        epoch_losses.push(loss_sum / shard.len() as f64);
    }

    Ok(LocalSearchReport {
        blob: net.flatten_params(),
        samples: shard.len(),
        epoch_losses,
        executions,
        step_executions,
        peak_live_tensors: peak,
        accessed: shard.accessed().split_off(reads_before),
        pruned,
        duration: started.elapsed(),
    })
}
