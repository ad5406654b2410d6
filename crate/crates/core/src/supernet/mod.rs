//! The parent network: stem → chain of choice blocks → classifier head.
//!
//! Every choice block ([`ChoiceEdge`]) owns `m` candidate operations, one
//! architecture logit per candidate, and a pruning mask. A training step
//! samples one candidate per block, executes only that path, and scales each
//! block output by a unit mask scalar whose gradient drives the α update.

mod blob;
mod candidate;
mod child;
mod forward;
mod sampling;

pub use blob::{flatten_params, unflatten_params, ParameterBlob, Record, BLOB_FORMAT_VERSION, BLOB_MAGIC};
pub use candidate::{CandidateKind, CandidateOp, Param};
pub use child::{derive_child, ChildArchitecture, ChildDescription, EdgeDescription};
pub use forward::{ForwardPass, PassGradients, ParamRegistry};
pub use sampling::{alpha_gradient, edge_probabilities, sample_path, PathSample};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::tensor::Tensor;

use candidate::{he_tensor, Param as P};

/// Search-space description: everything needed to build a supernet.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceConfig {
    /// Per-sample input shape, `[C, H, W]` for images or `[D]` for vectors.
    pub input_shape: Vec<usize>,
    pub num_classes: usize,
    /// Width of the stem output (channels for images, units for vectors).
    pub channels: usize,
    /// Stem kernel size for image inputs. 1 keeps the stem purely pointwise.
    pub stem_kernel: usize,
    /// Candidate kinds of every block, in order.
    pub blocks: Vec<Vec<CandidateKind>>,
    pub init_seed: u64,
}

impl SpaceConfig {
    /// `num_blocks` blocks that all offer the same candidate list.
    pub fn uniform(
        input_shape: Vec<usize>,
        num_classes: usize,
        channels: usize,
        num_blocks: usize,
        kinds: Vec<CandidateKind>,
        init_seed: u64,
    ) -> Self {
        Self {
            input_shape,
            num_classes,
            channels,
            stem_kernel: 1,
            blocks: vec![kinds; num_blocks],
            init_seed,
        }
    }

    /// Same space with one fixed candidate per block.
    pub fn restricted(&self, selections: &[usize]) -> Result<Self> {
        if selections.len() != self.blocks.len() {
            return Err(Error::Config(format!(
                "path has {} entries for {} blocks",
                selections.len(),
                self.blocks.len()
            )));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(selections)
            .enumerate()
            .map(|(e, (kinds, &k))| {
                kinds.get(k).map(|kind| vec![*kind]).ok_or_else(|| {
                    Error::Config(format!("edge {e}: candidate index {k} out of range 0..{}", kinds.len()))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            blocks,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceEdge {
    pub candidates: Vec<CandidateOp>,
    alpha: Vec<f64>,
    pruned: Vec<bool>,
}

impl ChoiceEdge {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn pruned(&self) -> &[bool] {
        &self.pruned
    }

    pub fn unpruned_count(&self) -> usize {
        self.pruned.iter().filter(|p| !**p).count()
    }

    pub fn set_alpha(&mut self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.alpha.len() {
            return Err(Error::dim(
                "set_alpha",
                format!("{} values for {} candidates", alpha.len(), self.alpha.len()),
            ));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numerical(format!("non-finite architecture parameters {alpha:?}")));
        }
        self.alpha.copy_from_slice(alpha);
        Ok(())
    }

    pub fn set_pruned(&mut self, pruned: &[bool]) -> Result<()> {
        if pruned.len() != self.pruned.len() || pruned.iter().all(|p| *p) {
            return Err(Error::Invariant(format!(
                "pruning mask {pruned:?} is invalid for {} candidates",
                self.pruned.len()
            )));
        }
        self.pruned.copy_from_slice(pruned);
        Ok(())
    }

    /// Unpruned candidate with the largest α; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best: Option<usize> = None;
        for (i, (&a, &p)) in self.alpha.iter().zip(&self.pruned).enumerate() {
            if p {
                continue;
            }
            match best {
                Some(b) if self.alpha[b] >= a => {}
                _ => best = Some(i),
            }
        }
        best.expect("an edge always keeps one unpruned candidate")
    }

    /// Marks candidates with `α < threshold` as pruned, except that the
    /// edge's argmax always survives. Returns the number newly pruned.
    pub fn prune_below(&mut self, threshold: f64) -> usize {
        let keep = self.argmax();
        let mut count = 0;
        for i in 0..self.alpha.len() {
            if !self.pruned[i] && i != keep && self.alpha[i] < threshold {
                self.pruned[i] = true;
                count += 1;
            }
        }
        count
    }
}

/// The weight-sharing parent network. Owns all operation weights `w` and
/// architecture parameters `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Supernet {
    config: SpaceConfig,
    stem: Vec<P>,
    edges: Vec<ChoiceEdge>,
    head: Vec<P>,
    /// Per-sample feature shapes: entry `e` feeds edge `e`; the last feeds the head.
    feature_shapes: Vec<Vec<usize>>,
    searchable: bool,
}

/// Builds the supernet for `config` with deterministic He-style weights
/// and all-zero α.
pub fn build_supernet(config: &SpaceConfig) -> Result<Supernet> {
    Supernet::build(config)
}

impl Supernet {
    pub fn build(config: &SpaceConfig) -> Result<Self> {
        let input = &config.input_shape;
        if !(input.len() == 1 || input.len() == 3) || input.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!(
                "input shape {input:?} must be [D] or [C, H, W] with positive sizes"
            )));
        }
        if config.num_classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if config.channels == 0 {
            return Err(Error::Config("stem width must be positive".into()));
        }
        if config.blocks.is_empty() {
            return Err(Error::Config("search space needs at least one block".into()));
        }
        let m = config.blocks[0].len();
        if let Some((e, kinds)) = config.blocks.iter().enumerate().find(|(_, k)| k.len() != m || k.is_empty()) {
            return Err(Error::Config(format!(
                "edge {e}: has {} candidates, every block needs the same positive count ({m})",
                kinds.len()
            )));
        }

        let mut rng = rng_from_seed(config.init_seed);
        let image = input.len() == 3;
        let c = config.channels;
        let param = |name: &str, tensor| P {
            name: name.to_string(),
            slot: 0,
            tensor,
        };
        let stem = if image {
            let k = config.stem_kernel;
            if k % 2 == 0 {
                return Err(Error::Config(format!("stem kernel {k} must be odd")));
            }
            vec![
                param("stem.weight", he_tensor(vec![c, input[0], k, k], input[0] * k * k, &mut rng)),
                param("stem.bias", Tensor::zeros(vec![c]).with_grad()),
            ]
        } else {
            vec![
                param("stem.weight", he_tensor(vec![input[0], c], input[0], &mut rng)),
                param("stem.bias", Tensor::zeros(vec![c]).with_grad()),
            ]
        };

        let mut shape = if image { vec![c, input[1], input[2]] } else { vec![c] };
        let mut feature_shapes = vec![shape.clone()];
        let mut edges = Vec::with_capacity(config.blocks.len());
        for (e, kinds) in config.blocks.iter().enumerate() {
            let mut out: Option<Vec<usize>> = None;
            let mut candidates = Vec::with_capacity(kinds.len());
            for (j, kind) in kinds.iter().enumerate() {
                let o = kind.output_shape(&shape).ok_or_else(|| {
                    Error::Config(format!("edge {e}: candidate {j} ({kind}) cannot consume features of shape {shape:?}"))
                })?;
                match &out {
                    Some(prev) if *prev != o => {
                        return Err(Error::Config(format!(
                            "edge {e}: candidate {j} ({kind}) produces {o:?} but earlier candidates produce {prev:?}"
                        )))
                    }
                    _ => out = Some(o),
                }
                candidates.push(CandidateOp::init(*kind, &shape, &format!("edge{e}.cand{j}"), &mut rng));
            }
            shape = out.expect("non-empty block");
            feature_shapes.push(shape.clone());
            edges.push(ChoiceEdge {
                alpha: vec![0.0; candidates.len()],
                pruned: vec![false; candidates.len()],
                candidates,
            });
        }

        let head_in = shape[0];
        let head = vec![
            param("head.weight", he_tensor(vec![head_in, config.num_classes], head_in, &mut rng)),
            param("head.bias", Tensor::zeros(vec![config.num_classes]).with_grad()),
        ];

        let mut net = Self {
            config: config.clone(),
            stem,
            edges,
            head,
            feature_shapes,
            searchable: true,
        };
        net.reindex();
        Ok(net)
    }

    fn reindex(&mut self) {
        for (slot, p) in self.params_mut().enumerate() {
            p.slot = slot;
        }
    }

    pub fn config(&self) -> &SpaceConfig {
        &self.config
    }

    pub fn edges(&self) -> &[ChoiceEdge] {
        &self.edges
    }

    pub fn edges_mut(&mut self) -> &mut [ChoiceEdge] {
        &mut self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.config.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn feature_shapes(&self) -> &[Vec<usize>] {
        &self.feature_shapes
    }

    /// Whether α is trained and exchanged. False for fixed architectures.
    pub fn is_searchable(&self) -> bool {
        self.searchable
    }

    /// Number of distinct paths: product over edges of unpruned candidates.
    pub fn cardinality(&self) -> u128 {
        self.edges.iter().map(|e| e.unpruned_count() as u128).product()
    }

    pub fn stem_params(&self) -> &[P] {
        &self.stem
    }

    pub fn head_params(&self) -> &[P] {
        &self.head
    }

    /// All weights in canonical (slot) order.
    pub fn params(&self) -> impl Iterator<Item = &P> {
        self.stem
            .iter()
            .chain(self.edges.iter().flat_map(|e| e.candidates.iter().flat_map(|c| c.params.iter())))
            .chain(self.head.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut P> {
        self.stem
            .iter_mut()
            .chain(
                self.edges
                    .iter_mut()
                    .flat_map(|e| e.candidates.iter_mut().flat_map(|c| c.params.iter_mut())),
            )
            .chain(self.head.iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.params().map(|p| p.tensor.numel()).sum()
    }

    /// Per-edge argmax-α selection.
    pub fn argmax_path(&self) -> Vec<usize> {
        self.edges.iter().map(ChoiceEdge::argmax).collect()
    }

    /// A fixed-architecture network holding copies of the weights of the
    /// selected candidates. α is not trained or exchanged for it.
    pub fn fixed_path(&self, selections: &[usize]) -> Result<Supernet> {
        let config = self.config.restricted(selections)?;
        for (e, (&k, edge)) in selections.iter().zip(&self.edges).enumerate() {
            if edge.pruned[k] {
                return Err(Error::Usage(format!("edge {e}: candidate {k} is pruned")));
            }
        }
        let edges = self
            .edges
            .iter()
            .zip(selections)
            .map(|(edge, &k)| ChoiceEdge {
                candidates: vec![edge.candidates[k].clone()],
                alpha: vec![0.0],
                pruned: vec![false],
            })
            .collect();
        let mut net = Self {
            config,
            stem: self.stem.clone(),
            edges,
            head: self.head.clone(),
            feature_shapes: self.feature_shapes.clone(),
            searchable: false,
        };
        net.reindex();
        Ok(net)
    }

    /// Turns α training and exchange on or off.
    pub fn set_searchable(&mut self, searchable: bool) {
        self.searchable = searchable;
    }

    /// Writes gradients into the matching parameters' grad slots.
    pub fn accumulate_grads(&mut self, grads: &[(usize, Vec<f64>)]) -> Result<()> {
        let mut by_slot: Vec<Option<&[f64]>> = vec![None; self.params().count()];
        for (slot, g) in grads {
            *by_slot
                .get_mut(*slot)
                .ok_or_else(|| Error::Usage(format!("no parameter in slot {slot}")))? = Some(g);
        }
        for p in self.params_mut() {
            if let Some(g) = by_slot[p.slot] {
                p.tensor.accumulate_grad(g)?;
            }
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        self.params_mut().for_each(|p| p.tensor.clear_grad());
    }

    pub fn alphas(&self) -> Vec<Vec<f64>> {
        self.edges.iter().map(|e| e.alpha.clone()).collect()
    }

    pub fn pruned_masks(&self) -> Vec<Vec<bool>> {
        self.edges.iter().map(|e| e.pruned.clone()).collect()
    }

    pub fn set_pruned_masks(&mut self, masks: &[Vec<bool>]) -> Result<()> {
        if masks.len() != self.edges.len() {
            return Err(Error::Invariant(format!(
                "{} pruning masks for {} edges",
                masks.len(),
                self.edges.len()
            )));
        }
        for (edge, mask) in self.edges.iter_mut().zip(masks) {
            edge.set_pruned(mask)?;
        }
        Ok(())
    }
}

/// Prunes every edge at `alpha_threshold` (see [`ChoiceEdge::prune_below`]).
/// A threshold of `-inf` disables pruning.
pub fn prune_edges(net: &mut Supernet, alpha_threshold: f64) -> usize {
    if alpha_threshold == f64::NEG_INFINITY {
        return 0;
    }
    net.edges.iter_mut().map(|e| e.prune_below(alpha_threshold)).sum()
}
