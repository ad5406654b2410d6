//! Datasets, synthetic generators, client partitioning and file formats.

mod io;
mod partition;
mod synthetic;

pub use io::{load_csv, load_dataset, save_dataset, DATASET_FORMAT_VERSION, DATASET_MAGIC};
pub use partition::{dirichlet_split, iid_split, largest_remainder, sample_dirichlet, Partition};
pub use synthetic::{generate_synthetic, Geometry, SyntheticSpec};

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A mini-batch: `features` is `[N, ...sample shape]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Tensor,
    pub labels: Vec<usize>,
}

/// Immutable labelled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let shape = features.shape();
        if shape.len() < 2 {
            return Err(Error::Data(format!("features {shape:?} need a batch axis and a sample shape")));
        }
        if shape[0] != labels.len() || labels.is_empty() {
            return Err(Error::Data(format!(
                "{} feature rows for {} labels",
                shape[0],
                labels.len()
            )));
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::Data(format!(
                "label {l} of sample {i} is outside [0, {num_classes})"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.features.shape()[1..]
    }

    fn sample_numel(&self) -> usize {
        self.sample_shape().iter().product()
    }

    /// Copies the listed samples into a batch.
    pub fn gather(&self, indices: &[usize]) -> Result<Batch> {
        let d = self.sample_numel();
        let mut data = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Data(format!("sample index {i} out of range 0..{}", self.len())));
            }
            data.extend_from_slice(&self.features.data()[i * d..(i + 1) * d]);
            labels.push(self.labels[i]);
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(self.sample_shape());
        Ok(Batch {
            features: Tensor::new(shape, data)?,
            labels,
        })
    }

    /// Per-class counts over `indices`.
    pub fn class_histogram(&self, indices: &[usize]) -> Vec<usize> {
        let mut h = vec![0; self.num_classes];
        for &i in indices {
            h[self.labels[i]] += 1;
        }
        h
    }

    /// Indices of every sample, grouped by class in ascending order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            by[l].push(i);
        }
        by
    }

    /// A new dataset holding a subset of the samples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let b = self.gather(indices)?;
        Self::new(b.features, b.labels, self.num_classes)
    }
}

/// A client's private view of a dataset. Only the shard's own samples can
/// be read, and every read is logged.
#[derive(Debug)]
pub struct Shard<'a> {
    dataset: &'a Dataset,
    indices: &'a [usize],
    access_log: RefCell<Vec<usize>>,
}

impl<'a> Shard<'a> {
    pub fn new(dataset: &'a Dataset, indices: &'a [usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= dataset.len()) {
            return Err(Error::Data(format!("shard index {i} out of range 0..{}", dataset.len())));
        }
        Ok(Self {
            dataset,
            indices,
            access_log: RefCell::new(Vec::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn sample_shape(&self) -> &[usize] {
        self.dataset.sample_shape()
    }

    /// Batch of the shard samples at local `positions` (`0..len()`).
    pub fn batch(&self, positions: &[usize]) -> Result<Batch> {
        let global: Vec<usize> = positions
            .iter()
            .map(|&p| {
                self.indices
                    .get(p)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("position {p} outside shard of {}", self.len())))
            })
            .collect::<Result<_>>()?;
        self.access_log.borrow_mut().extend_from_slice(&global);
        self.dataset.gather(&global)
    }

    /// Global dataset indices read so far, in access order.
    pub fn accessed(&self) -> Vec<usize> {
        self.access_log.borrow().clone()
    }
}
