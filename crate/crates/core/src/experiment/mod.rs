//! Config-driven runs: build the scenario, run the federation, write the
//! metrics CSV and the derived child, and compare finished runs.

mod compare;
mod config;

pub use compare::{compare_runs, Comparison, RunMetrics};
pub use config::{schema_text, DataSource, ExperimentConfig, KeySpec, PartitionKind, SpaceSpec, SCHEMA};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::data::{
    dirichlet_split, generate_synthetic, iid_split, load_csv, load_dataset, Dataset, Partition, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::federation::{Federation, FederationConfig, Mode, RoundRecord};
use crate::seed::{derive_seed, stream};
use crate::supernet::{build_supernet, ChildArchitecture, SpaceConfig, Supernet};

pub const METRICS_HEADER: [&str; 7] = ["round", "clients", "test_acc", "test_loss", "bytes_up", "bytes_down", "wall_ms"];

/// Train and test sets for a config. Synthetic data is generated as one
/// pool (so both halves share class structure) and cut in two.
pub fn build_datasets(config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    match &config.data {
        DataSource::Synthetic {
            geometry,
            train_samples,
            test_samples,
            classes,
            noise,
        } => {
            let all = generate_synthetic(&SyntheticSpec {
                samples: train_samples + test_samples,
                classes: *classes,
                geometry: *geometry,
                noise: *noise,
                seed: derive_seed(config.seed, "data", 0),
            })?;
            let train: Vec<usize> = (0..*train_samples).collect();
            let test: Vec<usize> = (*train_samples..train_samples + test_samples).collect();
            Ok((all.subset(&train)?, all.subset(&test)?))
        }
        DataSource::Files { train, test } => {
            let load = |p: &Path| -> Result<Dataset> {
                if p.extension().is_some_and(|e| e == "csv") {
                    load_csv(p, None)
                } else {
                    load_dataset(p)
                }
            };
            let (tr, te) = (load(train)?, load(test)?);
            if tr.sample_shape() != te.sample_shape() {
                return Err(Error::Data(format!(
                    "train samples {:?} and test samples {:?} differ in shape",
                    tr.sample_shape(),
                    te.sample_shape()
                )));
            }
            let classes = tr.num_classes().max(te.num_classes());
            let widen = |d: Dataset| Dataset::new(d.features().clone(), d.labels().to_vec(), classes);
            Ok((widen(tr)?, widen(te)?))
        }
    }
}

pub fn build_partition(config: &ExperimentConfig, train: &Dataset, clients: usize) -> Result<Partition> {
    let mut rng = stream(config.seed, "partition", clients as u64);
    match config.partition {
        PartitionKind::Iid => iid_split(train, clients, &mut rng),
        PartitionKind::Dirichlet(c) => dirichlet_split(train, clients, c, &mut rng),
    }
}

pub fn space_config(config: &ExperimentConfig, train: &Dataset) -> SpaceConfig {
    SpaceConfig {
        input_shape: train.sample_shape().to_vec(),
        num_classes: train.num_classes(),
        channels: config.space.channels,
        stem_kernel: config.space.stem_kernel,
        blocks: vec![config.space.candidates.clone(); config.space.blocks],
        init_seed: derive_seed(config.seed, "init", 0),
    }
}

pub fn build_net(config: &ExperimentConfig, train: &Dataset) -> Result<Supernet> {
    build_supernet(&space_config(config, train))
}

/// Federation settings with the seed derived from the master seed.
pub fn federation_config(config: &ExperimentConfig, clients: Option<usize>) -> FederationConfig {
    let mut f = config.federation.clone();
    f.seed = derive_seed(config.seed, "federation", 0);
    if let Some(k) = clients {
        f.client_pool = k;
        f.clients_per_round = k;
    }
    f
}

pub fn metrics_csv(history: &[RoundRecord], record_wall_ms: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER).expect("in-memory write");
    for r in history {
        w.write_record([
            r.round.to_string(),
            r.clients.len().to_string(),
            format!("{:.6}", r.test_acc),
            format!("{:.6}", r.test_loss),
            r.bytes_up.to_string(),
            r.bytes_down.to_string(),
            if record_wall_ms { r.wall_ms } else { 0 }.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}

/// One finished federated run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub clients: usize,
    pub history: Vec<RoundRecord>,
    pub child: ChildArchitecture,
    pub dir: PathBuf,
    pub wall_ms: u128,
}

impl RunOutcome {
    pub fn final_accuracy(&self) -> f64 {
        self.history.last().map_or(0.0, |r| r.test_acc)
    }

    pub fn total_bytes(&self) -> u64 {
        self.history.iter().map(|r| r.bytes_up + r.bytes_down).sum()
    }

    pub fn summary_line(&self, scenario: &str, mode: &Mode) -> String {
        let mode = match mode {
            Mode::Dfnas => "dfnas",
            Mode::Baseline(_) => "baseline",
        };
        let kinds: Vec<String> = self.child.kinds.iter().map(|k| k.to_string()).collect();
        format!(
            "{scenario} [{mode}, {} clients]: final test accuracy {:.4} after {} rounds, {} bytes exchanged, {:.1} s, child {}",
            self.clients,
            self.final_accuracy(),
            self.history.len(),
            self.total_bytes(),
            self.wall_ms as f64 / 1000.0,
            kinds.join(",")
        )
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn run_one(
    config: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    clients: Option<usize>,
    dir: &Path,
) -> Result<RunOutcome> {
    let started = Instant::now();
    let fed_cfg = federation_config(config, clients);
    let k = fed_cfg.client_pool;
    let partition = build_partition(config, train, k)?;
    let net = build_net(config, train)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ckpt_dir = dir.join("checkpoints");
    if config.checkpoints {
        fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    }

    let mut fed = Federation::new(fed_cfg, net, train, test, partition)?;
    let mut history = Vec::new();
    for _ in 0..fed.config().rounds {
        let record = fed.run_round()?;
        if config.checkpoints {
            let path = ckpt_dir.join(format!("round{:04}.blob", record.round));
            write(&path, fed.net().flatten_params().to_bytes())?;
        }
        history.push(record);
    }
    let child = fed.child()?;
    write(&dir.join("metrics.csv"), metrics_csv(&history, config.record_wall_ms))?;
    write(&dir.join("child.txt"), child.describe().to_text())?;
    write(&dir.join("child.blob"), child.network.flatten_params().to_bytes())?;
    Ok(RunOutcome {
        clients: k,
        history,
        child,
        dir: dir.to_path_buf(),
        wall_ms: started.elapsed().as_millis(),
    })
}

/// Runs the experiment (or each point of its client sweep), writing
/// `metrics.csv`, `child.txt`, `child.blob` and the resolved
/// `config.txt` under the output directory. Sweep points go to
/// `clients{K}/` subdirectories.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    let bad = config.violations();
    if !bad.is_empty() {
        return Err(Error::Config(bad.join("; ")));
    }
    let (train, test) = build_datasets(config)?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("config.txt"), config.to_text())?;
    match &config.client_sweep {
        None => Ok(vec![run_one(config, &train, &test, None, dir)?]),
        Some(sweep) => sweep
            .iter()
            .map(|&k| run_one(config, &train, &test, Some(k), &dir.join(format!("clients{k}"))))
            .collect(),
    }
}
