use super::Tensor;
use crate::error::{Error, Result};

/// SGD with heavy-ball momentum: `v ← momentum·v + grad`, `p ← p − lr·v`.
///
/// Velocity buffers are keyed by a caller-chosen slot id so that a model can
/// step only the parameters that took part in the last forward pass.
#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    velocity: Vec<Option<Vec<f64>>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {lr} must be non-negative")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("momentum {momentum} must lie in [0, 1)")));
        }
        Ok(Self {
            lr,
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Updates every `(slot, param)` pair and clears their gradients. Fails
    /// without touching anything if some parameter has no gradient.
    pub fn step<'a, I>(&mut self, params: I) -> Result<()>
    where
        I: IntoIterator<Item = (usize, &'a mut Tensor)>,
    {
        let mut params: Vec<(usize, &'a mut Tensor)> = params.into_iter().collect();
        if let Some((slot, p)) = params.iter().find(|(_, p)| p.grad().is_none()) {
            return Err(Error::Usage(format!(
                "parameter in slot {slot} (shape {:?}) has no gradient",
                p.shape()
            )));
        }
        for (slot, p) in params.iter_mut() {
            let grad = p.take_grad().expect("checked above");
            if self.velocity.len() <= *slot {
                self.velocity.resize(*slot + 1, None);
            }
            let v = self.velocity[*slot].get_or_insert_with(|| vec![0.0; grad.len()]);
            for ((vi, gi), wi) in v.iter_mut().zip(&grad).zip(p.data_mut()) {
                *vi = self.momentum * *vi + gi;
                *wi -= self.lr * *vi;
            }
        }
        Ok(())
    }
}
