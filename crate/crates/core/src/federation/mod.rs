//! Server side: client selection, dispatch of local search, weighted
//! aggregation of `w` and `α`, evaluation and byte accounting.

mod aggregate;

pub use aggregate::{aggregate, aggregate_contributions, Contribution};

use std::fmt;
use std::str::FromStr;
use std::sync::mpsc;
use std::time::Instant;

use rand::Rng;

use crate::data::{iid_split, Dataset, Partition, Shard};
use crate::error::{Error, Result};
use crate::local_search::{client_local_search, LocalSearchConfig, LocalSearchReport};
use crate::seed::{derive_seed, stream, StreamRng};
use crate::supernet::{derive_child, prune_edges, ChildArchitecture, ParameterBlob, Supernet};

/// How client uploads are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// `1/K` for each of the K selected clients.
    Uniform,
    /// `n_i / n`, with `n` summed over the selected clients.
    Samples,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Uniform => "uniform",
            Weighting::Samples => "samples",
        })
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(Weighting::Uniform),
            "samples" => Ok(Weighting::Samples),
            other => Err(Error::Config(format!("unknown weighting `{other}` (uniform, samples)"))),
        }
    }
}

/// Search the architecture, or train one fixed path with plain FedAvg.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    Dfnas,
    /// Candidate index per edge; only `w` is trained and exchanged.
    Baseline(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub rounds: usize,
    pub client_pool: usize,
    pub clients_per_round: usize,
    pub weighting: Weighting,
    pub mode: Mode,
    /// Per-client settings; `seed` is replaced per client and round, and
    /// `alpha_threshold` is forced to `-inf` (pruning is server-side).
    pub local: LocalSearchConfig,
    pub seed: u64,
    pub workers: usize,
    /// Threshold applied to the aggregated α after every round.
    pub server_alpha_threshold: f64,
    /// Re-deal the IID split at the start of every round.
    pub iid_resplit: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            client_pool: 4,
            clients_per_round: 4,
            weighting: Weighting::Samples,
            mode: Mode::Dfnas,
            local: LocalSearchConfig::default(),
            seed: 0,
            workers: 1,
            server_alpha_threshold: f64::NEG_INFINITY,
            iid_resplit: false,
        }
    }
}

impl FederationConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.rounds == 0 {
            v.push("federation.rounds must be at least 1".to_string());
        }
        if self.client_pool == 0 {
            v.push("federation.client_pool must be at least 1".to_string());
        }
        if self.clients_per_round == 0 || self.clients_per_round > self.client_pool {
            v.push(format!(
                "federation.clients_per_round = {} must lie in 1..={} (client_pool)",
                self.clients_per_round, self.client_pool
            ));
        }
        if self.workers == 0 {
            v.push("federation.workers must be at least 1".to_string());
        }
        if self.server_alpha_threshold.is_nan() || self.server_alpha_threshold == f64::INFINITY {
            v.push(format!(
                "federation.server_alpha_threshold = {} is not usable",
                self.server_alpha_threshold
            ));
        }
        v.extend(self.local.violations());
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

/// Uniform sample of `k` distinct ids from `0..pool`, sorted ascending.
pub fn select_clients<R: Rng + ?Sized>(pool: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k == 0 || k > pool {
        return Err(Error::Config(format!("cannot select {k} clients from a pool of {pool}")));
    }
    let mut ids = rand::seq::index::sample(rng, pool, k).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Seed of `client`'s local search in round `round` (0-based).
pub fn client_seed(master: u64, round: usize, client: usize) -> u64 {
    derive_seed(master, &format!("client{client}"), round as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

const EVAL_BATCH: usize = 256;

fn evaluate_path(net: &Supernet, selections: &[usize], test: &Dataset) -> Result<Evaluation> {
    let mut correct = 0usize;
    let mut loss = 0.0;
    let classes = net.num_classes();
    let all: Vec<usize> = (0..test.len()).collect();
    for chunk in all.chunks(EVAL_BATCH) {
        let batch = test.gather(chunk)?;
        let pass = net.forward_selection(selections, None, &batch)?;
        loss += pass.loss_value() * chunk.len() as f64;
        let logits = pass.tape.value(pass.logits);
        for (row, &label) in logits.chunks(classes).zip(&batch.labels) {
            let mut best = 0;
            for (j, &z) in row.iter().enumerate() {
                if z > row[best] {
                    best = j;
                }
            }
            correct += usize::from(best == label);
        }
    }
    let n = test.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        loss: loss / n,
    })
}

/// Accuracy and mean cross-entropy of the argmax-α path, without sampling
/// or masks. Ties in the logits go to the lower class index.
pub fn evaluate(net: &Supernet, test: &Dataset) -> Result<Evaluation> {
    evaluate_path(net, &net.argmax_path(), test)
}

pub fn evaluate_child(child: &ChildArchitecture, test: &Dataset) -> Result<Evaluation> {
    evaluate_path(&child.network, &vec![0; child.selections.len()], test)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based round number.
    pub round: usize,
    pub clients: Vec<usize>,
    /// `n_i` of each selected client, in `clients` order.
    pub samples: Vec<usize>,
    pub weights: Vec<f64>,
    /// Weighted mean of the clients' final-epoch training losses.
    pub train_loss: f64,
    pub test_acc: f64,
    pub test_loss: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub wall_ms: u64,
    /// Candidates pruned by the server this round.
    pub pruned: usize,
}

/// What the server sends: the serialized blob plus the pruning masks,
/// which are part of the architecture rather than the parameters.
struct Dispatch {
    payload: Vec<u8>,
    masks: Vec<Vec<bool>>,
}

struct Upload {
    payload: Vec<u8>,
    samples: usize,
    final_loss: f64,
}

fn run_client(
    template: &Supernet,
    dispatch: Dispatch,
    train: &Dataset,
    indices: &[usize],
    local: &LocalSearchConfig,
) -> Result<Upload> {
    let blob = ParameterBlob::from_bytes(&dispatch.payload)?;
    let mut net = template.clone();
    net.set_pruned_masks(&dispatch.masks)?;
    let shard = Shard::new(train, indices)?;
    let report: LocalSearchReport = client_local_search(&net, &blob, &shard, local)?;
    Ok(Upload {
        payload: report.blob.to_bytes(),
        samples: report.samples,
        final_loss: report.epoch_losses.last().copied().unwrap_or(f64::NAN),
    })
}

/// Round-by-round federated search over a fixed client pool.
pub struct Federation<'a> {
    config: FederationConfig,
    template: Supernet,
    net: Supernet,
    train: &'a Dataset,
    test: &'a Dataset,
    partition: Partition,
    selection_rng: StreamRng,
    round: usize,
    pool: rayon::ThreadPool,
}

impl<'a> Federation<'a> {
    /// `net` is the freshly initialized supernet; in baseline mode it is
    /// cut down to the configured path before the first round.
    pub fn new(
        config: FederationConfig,
        net: Supernet,
        train: &'a Dataset,
        test: &'a Dataset,
        partition: Partition,
    ) -> Result<Self> {
        config.validate()?;
        if partition.num_clients() != config.client_pool {
            return Err(Error::Config(format!(
                "partition has {} shards for a pool of {} clients",
                partition.num_clients(),
                config.client_pool
            )));
        }
        if let Some(c) = (0..partition.num_clients()).find(|&c| partition.shard(c).is_empty()) {
            return Err(Error::Data(format!("client {c} holds no samples")));
        }
        if partition.shards().iter().flatten().any(|&i| i >= train.len()) {
            return Err(Error::Data("partition refers past the end of the training set".into()));
        }
        let net = match &config.mode {
            Mode::Dfnas => {
                let mut net = net;
                net.set_searchable(true);
                net
            }
            Mode::Baseline(path) => net.fixed_path(path)?,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Self {
            selection_rng: stream(config.seed, "selection", 0),
            template: net.clone(),
            net,
            train,
            test,
            partition,
            round: 0,
            pool,
            config,
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    /// The current global network.
    pub fn net(&self) -> &Supernet {
        &self.net
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn rounds_done(&self) -> usize {
        self.round
    }

    /// Size of one serialized global blob.
    pub fn blob_size(&self) -> usize {
        self.net.flatten_params().byte_len()
    }

    /// One round: select, dispatch, local search on every selected client
    /// in parallel, aggregate, prune, evaluate.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let started = Instant::now();
        let t = self.round;
        if self.config.iid_resplit {
            self.partition = iid_split(
                self.train,
                self.config.client_pool,
                &mut stream(self.config.seed, "resplit", t as u64),
            )?;
        }
        let clients = select_clients(
            self.config.client_pool,
            self.config.clients_per_round,
            &mut self.selection_rng,
        )?;

        let payload = self.net.flatten_params().to_bytes();
        let masks = self.net.pruned_masks();
        let bytes_down = (payload.len() * clients.len()) as u64;

        let (up_tx, up_rx) = mpsc::channel::<(usize, Result<Upload>)>();
        let (template, train, partition) = (&self.template, self.train, &self.partition);
        let local_base = &self.config.local;
        let master = self.config.seed;
        self.pool.scope(|s| {
            for &client in &clients {
                let (down_tx, down_rx) = mpsc::channel::<Dispatch>();
                down_tx
                    .send(Dispatch {
                        payload: payload.clone(),
                        masks: masks.clone(),
                    })
                    .expect("receiver is alive");
                let up = up_tx.clone();
                s.spawn(move |_| {
                    let dispatch = down_rx.recv().expect("dispatch was sent");
                    let local = LocalSearchConfig {
                        seed: client_seed(master, t, client),
                        alpha_threshold: f64::NEG_INFINITY,
                        ..local_base.clone()
                    };
                    let result = run_client(template, dispatch, train, partition.shard(client), &local);
                    let _ = up.send((client, result));
                });
            }
        });
        drop(up_tx);

        let mut uploads: Vec<(usize, Result<Upload>)> = up_rx.into_iter().collect();
        uploads.sort_by_key(|(c, _)| *c);
        if uploads.len() != clients.len() {
            return Err(Error::Invariant(format!(
                "{} of {} clients reported back",
                uploads.len(),
                clients.len()
            )));
        }
        let mut received = Vec::with_capacity(uploads.len());
        for (client, result) in uploads {
            match result {
                Ok(u) => received.push((client, u)),
                Err(source) => {
                    return Err(Error::ClientFailed {
                        client,
                        source: Box::new(source),
                    })
                }
            }
        }

        let bytes_up: u64 = received.iter().map(|(_, u)| u.payload.len() as u64).sum();
        let samples: Vec<usize> = received.iter().map(|(_, u)| u.samples).collect();
        let weights: Vec<f64> = match self.config.weighting {
            Weighting::Uniform => vec![1.0 / clients.len() as f64; clients.len()],
            Weighting::Samples => {
                let n: usize = samples.iter().sum();
                samples.iter().map(|&s| s as f64 / n as f64).collect()
            }
        };
        let train_loss = received
            .iter()
            .zip(&weights)
            .map(|((_, u), w)| w * u.final_loss)
            .sum();
        let contributions = received
            .into_iter()
            .zip(&weights)
            .map(|((client, u), &weight)| {
                ParameterBlob::from_bytes(&u.payload).map(|blob| Contribution { client, weight, blob })
            })
            .collect::<Result<Vec<_>>>()?;
        let global = aggregate_contributions(&contributions)?;
        self.net.unflatten_params(&global)?;
        let pruned = if self.net.is_searchable() {
            prune_edges(&mut self.net, self.config.server_alpha_threshold)
        } else {
            0
        };

        let eval = evaluate(&self.net, self.test)?;
        self.round += 1;
        Ok(RoundRecord {
            round: self.round,
            clients,
            samples,
            weights,
            train_loss,
            test_acc: eval.accuracy,
            test_loss: eval.loss,
            bytes_up,
            bytes_down,
            wall_ms: started.elapsed().as_millis() as u64,
            pruned,
        })
    }

    /// The child network of the current global supernet.
    pub fn child(&self) -> Result<ChildArchitecture> {
        derive_child(&self.net)
    }
}

#[derive(Debug, Clone)]
pub struct FederatedOutcome {
    pub history: Vec<RoundRecord>,
    pub child: ChildArchitecture,
    pub net: Supernet,
}

/// Runs every configured round and derives the child network.
pub fn run_federated_search(
    config: FederationConfig,
    net: Supernet,
    train: &Dataset,
    test: &Dataset,
    partition: Partition,
) -> Result<FederatedOutcome> {
    let mut fed = Federation::new(config, net, train, test, partition)?;
    let mut history = Vec::with_capacity(fed.config().rounds);
    for _ in 0..fed.config().rounds {
        history.push(fed.run_round()?);
    }
    Ok(FederatedOutcome {
        history,
        child: fed.child()?,
        net: fed.net,
    })
}
