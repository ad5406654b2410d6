use super::{PathSample, Supernet};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Tape handles of the parameters registered during a pass, by slot.
pub type ParamRegistry = Vec<(usize, Var)>;

/// A recorded forward pass, ready for backward.
#[derive(Debug)]
pub struct ForwardPass {
    pub tape: Tape,
    pub loss: Var,
    pub logits: Var,
    /// Mask scalar handles, one per edge (empty when masks were omitted).
    pub masks: Vec<Var>,
    /// Output feature map of each edge, before its mask.
    pub edge_outputs: Vec<Var>,
    pub params: ParamRegistry,
    /// Candidate operations executed by this pass.
    pub executed_candidates: usize,
}

/// Result of backward through a [`ForwardPass`].
#[derive(Debug, Clone, PartialEq)]
pub struct PassGradients {
    pub loss: f64,
    /// `∂L/∂mask` per edge.
    pub mask_grads: Vec<f64>,
    /// Gradients of the weights that took part, by slot.
    pub param_grads: Vec<(usize, Vec<f64>)>,
    pub executed_candidates: usize,
    /// Values held by the tape at its peak.
    pub live_tensors: usize,
}

impl ForwardPass {
    pub fn loss_value(&self) -> f64 {
        self.tape.scalar(self.loss)
    }

    pub fn backward(self) -> Result<PassGradients> {
        let loss = self.loss_value();
        let live_tensors = self.tape.len();
        let mut grads = self.tape.backward(self.loss)?;
        let mask_grads = self
            .masks
            .iter()
            .map(|&m| grads.get(m).map(|g| g[0]).unwrap_or(0.0))
            .collect();
        let param_grads = self
            .params
            .iter()
            .filter_map(|&(slot, v)| grads.take(v).map(|g| (slot, g)))
            .collect();
        Ok(PassGradients {
            loss,
            mask_grads,
            param_grads,
            executed_candidates: self.executed_candidates,
            live_tensors,
        })
    }
}

fn register(tape: &mut Tape, params: &[super::Param], registry: &mut ParamRegistry) -> Vec<Var> {
    params
        .iter()
        .map(|p| {
            let v = tape.leaf(&p.tensor);
            if p.tensor.requires_grad() {
                registry.push((p.slot, v));
            }
            v
        })
        .collect()
}

impl Supernet {
    fn check_batch(&self, batch: &Batch) -> Result<()> {
        let shape = batch.features.shape();
        if shape.len() != self.input_shape().len() + 1 || &shape[1..] != self.input_shape() {
            return Err(Error::Data(format!(
                "batch features {:?} do not match input shape {:?}",
                shape,
                self.input_shape()
            )));
        }
        if shape[0] != batch.labels.len() || shape[0] == 0 {
            return Err(Error::Data(format!(
                "{} feature rows for {} labels",
                shape[0],
                batch.labels.len()
            )));
        }
        Ok(())
    }

    /// Stem: conv (images) or linear (vectors), then bias and ReLU.
    pub fn record_stem(&self, tape: &mut Tape, x: Var, registry: &mut ParamRegistry) -> Result<Var> {
        let w = register(tape, &self.stem, registry);
        let y = if self.input_shape().len() == 3 {
            tape.conv2d(x, w[0], 1, self.config.stem_kernel / 2)?
        } else {
            tape.matmul(x, w[0])?
        };
        let y = tape.add_bias(y, w[1])?;
        tape.relu(y)
    }

    /// Candidate `k` of edge `e` applied to `x`.
    pub fn record_candidate(
        &self,
        tape: &mut Tape,
        edge: usize,
        k: usize,
        x: Var,
        registry: &mut ParamRegistry,
    ) -> Result<Var> {
        let op = self
            .edges
            .get(edge)
            .and_then(|e| e.candidates.get(k))
            .ok_or_else(|| Error::Usage(format!("no candidate {k} on edge {edge}")))?;
        let w = register(tape, &op.params, registry);
        op.apply(tape, x, &w)
    }

    /// Head: global average pooling for images, then a linear classifier.
    pub fn record_head(&self, tape: &mut Tape, x: Var, registry: &mut ParamRegistry) -> Result<Var> {
        let w = register(tape, &self.head, registry);
        let x = if tape.shape(x).len() == 4 {
            tape.global_avg_pool(x)?
        } else {
            x
        };
        let y = tape.matmul(x, w[0])?;
        tape.add_bias(y, w[1])
    }

    /// Runs only the sampled candidate of every edge, multiplying each edge
    /// output by its mask scalar, and records the cross-entropy loss.
    pub fn forward_path(&self, path: &PathSample, batch: &Batch) -> Result<ForwardPass> {
        self.forward_selection(&path.selections, Some(&path.masks), batch)
    }

    /// Like [`Supernet::forward_path`]; `masks = None` omits the mask
    /// multiplication entirely.
    pub fn forward_selection(
        &self,
        selections: &[usize],
        masks: Option<&[Tensor]>,
        batch: &Batch,
    ) -> Result<ForwardPass> {
        self.check_batch(batch)?;
        if selections.len() != self.num_edges() {
            return Err(Error::Usage(format!(
                "path has {} entries for {} edges",
                selections.len(),
                self.num_edges()
            )));
        }
        if let Some(m) = masks {
            if m.len() != selections.len() {
                return Err(Error::Usage(format!("{} masks for {} edges", m.len(), selections.len())));
            }
        }
        let mut tape = Tape::new();
        let mut params = ParamRegistry::new();
        let mut mask_vars = Vec::new();
        let mut edge_outputs = Vec::with_capacity(selections.len());

        let x = tape.leaf(&batch.features);
        let mut h = self.record_stem(&mut tape, x, &mut params)?;
        for (e, &k) in selections.iter().enumerate() {
            if self.edges[e].pruned()[k] {
                return Err(Error::Usage(format!("edge {e}: candidate {k} is pruned")));
            }
            let out = self.record_candidate(&mut tape, e, k, h, &mut params)?;
            edge_outputs.push(out);
            h = match masks {
                Some(m) => {
                    let mv = tape.leaf(&m[e]);
                    mask_vars.push(mv);
                    tape.scale(out, mv)?
                }
                None => out,
            };
        }
        let logits = self.record_head(&mut tape, h, &mut params)?;
        let loss = tape.softmax_cross_entropy(logits, &batch.labels)?;
        Ok(ForwardPass {
            tape,
            loss,
            logits,
            masks: mask_vars,
            edge_outputs,
            params,
            executed_candidates: selections.len(),
        })
    }
}
