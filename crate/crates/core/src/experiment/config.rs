//! Flat `key = value` experiment files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys use dotted
//! section prefixes; [`SCHEMA`] lists every key with its default.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::Geometry;
use crate::error::{Error, Result};
use crate::federation::{FederationConfig, Mode};
use crate::local_search::LocalSearchConfig;
use crate::supernet::CandidateKind;

pub struct KeySpec {
    pub key: &'static str,
    /// `None` marks a required key.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(key: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec {
        key,
        default: Some(default),
        help,
    }
}

pub const SCHEMA: &[KeySpec] = &[
    KeySpec {
        key: "scenario",
        default: None,
        help: "run name, also the default output directory name",
    },
    key("seed", "0", "master seed; every random stream is derived from it"),
    key("data.source", "synthetic", "synthetic | files"),
    key("data.geometry", "gaussian-blobs", "gaussian-blobs | concentric-rings | textured-patches"),
    key("data.train_samples", "2000", "synthetic training samples"),
    key("data.test_samples", "500", "synthetic server test samples"),
    key("data.classes", "4", "synthetic class count"),
    key("data.noise", "0.5", "synthetic noise level"),
    key("data.dim", "2", "gaussian-blobs dimension"),
    key("data.size", "8", "textured-patches side length"),
    key("data.train_file", "none", "training set (.fnds binary or .csv) when data.source = files"),
    key("data.test_file", "none", "test set when data.source = files"),
    key("partition.kind", "iid", "iid | dirichlet"),
    key("partition.concentration", "0.5", "Dirichlet concentration"),
    key("partition.iid_resplit", "false", "re-deal the IID split every round"),
    key("space.blocks", "4", "number of choice blocks"),
    key("space.candidates", "identity,conv3,sepconv3", "candidate kinds offered by every block"),
    key("space.channels", "8", "stem width"),
    key("space.stem_kernel", "1", "stem kernel size for image inputs"),
    key("federation.mode", "dfnas", "dfnas | baseline"),
    key("federation.baseline_path", "none", "candidate index per block for baseline mode"),
    key("federation.rounds", "10", "communication rounds"),
    key("federation.client_pool", "4", "number of clients"),
    key("federation.clients_per_round", "4", "clients selected per round"),
    key("federation.weighting", "samples", "samples (n_i/n) | uniform (1/K)"),
    key("federation.workers", "1", "worker threads running clients"),
    key("federation.server_alpha_threshold", "-inf", "server-side pruning threshold on aggregated alpha"),
    key("federation.client_sweep", "none", "comma list of client counts; one run per value"),
    key("local.epochs", "1", "local epochs per round"),
    key("local.batch_size", "32", "mini-batch size"),
    key("local.lr_w", "0.05", "weight learning rate"),
    key("local.momentum_w", "0.9", "weight momentum"),
    key("local.lr_alpha", "0.003", "architecture learning rate (plain SGD)"),
    key("local.grad_clip", "none", "global gradient-norm clip"),
    key("output.dir", "runs/<scenario>", "output directory"),
    key("output.checkpoints", "false", "write the global blob after every round"),
    key("output.record_wall_ms", "false", "write measured round times to the metrics CSV"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic {
        geometry: Geometry,
        train_samples: usize,
        test_samples: usize,
        classes: usize,
        noise: f64,
    },
    Files {
        train: PathBuf,
        test: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionKind {
    Iid,
    Dirichlet(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec {
    pub blocks: usize,
    pub candidates: Vec<CandidateKind>,
    pub channels: usize,
    pub stem_kernel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    pub data: DataSource,
    pub partition: PartitionKind,
    pub space: SpaceSpec,
    /// `federation.seed` is derived from the master seed when the run starts.
    pub federation: FederationConfig,
    pub client_sweep: Option<Vec<usize>>,
    pub output_dir: PathBuf,
    pub checkpoints: bool,
    pub record_wall_ms: bool,
}

fn list<T: FromStr>(s: &str) -> std::result::Result<Option<Vec<T>>, ()> {
    if s.trim() == "none" {
        return Ok(None);
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| ())).collect::<std::result::Result<Vec<_>, _>>().map(Some)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

struct Fields<'a> {
    values: &'a BTreeMap<String, String>,
    errors: Vec<String>,
}

impl Fields<'_> {
    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .or_else(|| SCHEMA.iter().find(|k| k.key == key).and_then(|k| k.default))
            .unwrap_or("")
    }

    fn get<T: FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let raw = self.raw(key).to_string();
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(format!("{key} = `{raw}` is not {what}"));
                None
            }
        }
    }

    fn list<T: FromStr>(&mut self, key: &str, what: &str) -> Option<Option<Vec<T>>> {
        let raw = self.raw(key).to_string();
        match list(&raw) {
            Ok(v) => Some(v),
            Err(()) => {
                self.errors.push(format!("{key} = `{raw}` is not a comma list of {what}"));
                None
            }
        }
    }

    fn optional_f64(&mut self, key: &str) -> Option<Option<f64>> {
        let raw = self.raw(key).to_string();
        if raw == "none" {
            return Some(None);
        }
        match raw.parse() {
            Ok(v) => Some(Some(v)),
            Err(_) => {
                self.errors.push(format!("{key} = `{raw}` is not a number or `none`"));
                None
            }
        }
    }

    fn choice(&mut self, key: &str, options: &[&str]) -> Option<String> {
        let raw = self.raw(key).to_string();
        if options.contains(&raw.as_str()) {
            Some(raw)
        } else {
            self.errors.push(format!("{key} = `{raw}` must be one of {}", options.join(", ")));
            None
        }
    }
}

fn nearest_key(unknown: &str) -> &'static str {
    SCHEMA
        .iter()
        .map(|k| (strsim::levenshtein(unknown, k.key), k.key))
        .min()
        .map(|(_, k)| k)
        .expect("schema is not empty")
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses and validates, reporting every problem found.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut errors = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", n + 1));
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            if !SCHEMA.iter().any(|s| s.key == k) {
                errors.push(format!(
                    "line {}: unknown key `{k}` (did you mean `{}`?)",
                    n + 1,
                    nearest_key(k)
                ));
                continue;
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                errors.push(format!("line {}: `{k}` is set twice", n + 1));
            }
        }
        for spec in SCHEMA.iter().filter(|s| s.default.is_none()) {
            if !values.contains_key(spec.key) {
                errors.push(format!("missing required key `{}`", spec.key));
            }
        }
        let mut f = Fields {
            values: &values,
            errors,
        };
        let built = Self::build(&mut f);
        let mut errors = f.errors;
        if let Some(cfg) = &built {
            errors.extend(cfg.violations());
        }
        match built {
            Some(cfg) if errors.is_empty() => Ok(cfg),
            _ => Err(Error::Config(format!("invalid configuration:\n  - {}", errors.join("\n  - ")))),
        }
    }

    fn build(f: &mut Fields<'_>) -> Option<Self> {
        let scenario = f.raw("scenario").to_string();
        let seed = f.get("seed", "an unsigned integer");

        let source = f.choice("data.source", &["synthetic", "files"]);
        let geometry: Option<Geometry> = f.get("data.geometry", "a geometry name");
        let train_samples = f.get("data.train_samples", "a count");
        let test_samples = f.get("data.test_samples", "a count");
        let classes = f.get("data.classes", "a count");
        let noise = f.get("data.noise", "a number");
        let dim = f.get("data.dim", "a count");
        let size = f.get("data.size", "a count");
        let train_file = f.raw("data.train_file").to_string();
        let test_file = f.raw("data.test_file").to_string();

        let kind = f.choice("partition.kind", &["iid", "dirichlet"]);
        let concentration: Option<f64> = f.get("partition.concentration", "a number");
        let iid_resplit = f.get("partition.iid_resplit", "true or false");

        let blocks = f.get("space.blocks", "a count");
        let candidates = f.list::<CandidateKind>("space.candidates", "candidate kinds");
        let channels = f.get("space.channels", "a count");
        let stem_kernel = f.get("space.stem_kernel", "a count");

        let mode = f.choice("federation.mode", &["dfnas", "baseline"]);
        let baseline_path = f.list::<usize>("federation.baseline_path", "candidate indices");
        let rounds = f.get("federation.rounds", "a count");
        let client_pool = f.get("federation.client_pool", "a count");
        let clients_per_round = f.get("federation.clients_per_round", "a count");
        let weighting = f.get("federation.weighting", "samples or uniform");
        let workers = f.get("federation.workers", "a count");
        let server_threshold = f.get("federation.server_alpha_threshold", "a number");
        let client_sweep = f.list::<usize>("federation.client_sweep", "client counts");

        let epochs = f.get("local.epochs", "a count");
        let batch_size = f.get("local.batch_size", "a count");
        let lr_w = f.get("local.lr_w", "a number");
        let momentum_w = f.get("local.momentum_w", "a number");
        let lr_alpha = f.get("local.lr_alpha", "a number");
        let grad_clip = f.optional_f64("local.grad_clip");

        let dir = f.raw("output.dir").replace("<scenario>", &scenario);
        let checkpoints = f.get("output.checkpoints", "true or false");
        let record_wall_ms = f.get("output.record_wall_ms", "true or false");

        let data = match source?.as_str() {
            "synthetic" => {
                let geometry = match geometry? {
                    Geometry::GaussianBlobs { .. } => Geometry::GaussianBlobs { dim: dim? },
                    Geometry::TexturedPatches { .. } => Geometry::TexturedPatches { size: size? },
                    g => g,
                };
                DataSource::Synthetic {
                    geometry,
                    train_samples: train_samples?,
                    test_samples: test_samples?,
                    classes: classes?,
                    noise: noise?,
                }
            }
            _ => {
                if train_file == "none" || test_file == "none" {
                    f.errors
                        .push("data.source = files needs data.train_file and data.test_file".into());
                    return None;
                }
                DataSource::Files {
                    train: train_file.into(),
                    test: test_file.into(),
                }
            }
        };
        let partition = match kind?.as_str() {
            "iid" => PartitionKind::Iid,
            _ => PartitionKind::Dirichlet(concentration?),
        };
        let mode = match mode?.as_str() {
            "dfnas" => Mode::Dfnas,
            _ => match baseline_path? {
                Some(p) => Mode::Baseline(p),
                None => {
                    f.errors
                        .push("federation.mode = baseline needs federation.baseline_path".into());
                    return None;
                }
            },
        };
        Some(Self {
            scenario,
            seed: seed?,
            data,
            partition,
            space: SpaceSpec {
                blocks: blocks?,
                candidates: candidates?.unwrap_or_default(),
                channels: channels?,
                stem_kernel: stem_kernel?,
            },
            federation: FederationConfig {
                rounds: rounds?,
                client_pool: client_pool?,
                clients_per_round: clients_per_round?,
                weighting: weighting?,
                mode,
                local: LocalSearchConfig {
                    epochs: epochs?,
                    batch_size: batch_size?,
                    lr_w: lr_w?,
                    momentum_w: momentum_w?,
                    lr_alpha: lr_alpha?,
                    alpha_threshold: f64::NEG_INFINITY,
                    grad_clip: grad_clip?,
                    seed: 0,
                },
                seed: 0,
                workers: workers?,
                server_alpha_threshold: server_threshold?,
                iid_resplit: iid_resplit?,
            },
            client_sweep: client_sweep?,
            output_dir: dir.into(),
            checkpoints: checkpoints?,
            record_wall_ms: record_wall_ms?,
        })
    }

    /// Semantic checks across fields.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.scenario.is_empty() || self.scenario.contains(['/', '\\']) {
            v.push(format!("scenario `{}` must be a non-empty plain name", self.scenario));
        }
        if let DataSource::Synthetic {
            train_samples,
            test_samples,
            classes,
            noise,
            ..
        } = &self.data
        {
            if *train_samples == 0 || *test_samples == 0 {
                v.push("data.train_samples and data.test_samples must be positive".into());
            }
            if *classes < 2 {
                v.push(format!("data.classes = {classes} must be at least 2"));
            }
            if !(*noise >= 0.0) {
                v.push(format!("data.noise = {noise} must be non-negative"));
            }
        }
        if let PartitionKind::Dirichlet(c) = self.partition {
            if !(c > 0.0 && c.is_finite()) {
                v.push(format!("partition.concentration = {c} must be positive"));
            }
        }
        if self.space.blocks == 0 {
            v.push("space.blocks must be at least 1".into());
        }
        if self.space.candidates.is_empty() {
            v.push("space.candidates must list at least one candidate".into());
        }
        if self.space.channels == 0 {
            v.push("space.channels must be at least 1".into());
        }
        if self.space.stem_kernel % 2 == 0 {
            v.push(format!("space.stem_kernel = {} must be odd", self.space.stem_kernel));
        }
        if let Mode::Baseline(path) = &self.federation.mode {
            if path.len() != self.space.blocks {
                v.push(format!(
                    "federation.baseline_path has {} entries for {} blocks",
                    path.len(),
                    self.space.blocks
                ));
            }
            if let Some(k) = path.iter().find(|&&k| k >= self.space.candidates.len()) {
                v.push(format!(
                    "federation.baseline_path index {k} is outside 0..{}",
                    self.space.candidates.len()
                ));
            }
        }
        match &self.client_sweep {
            None => v.extend(self.federation.violations()),
            Some(s) if s.is_empty() || s.contains(&0) => {
                v.push("federation.client_sweep entries must be positive".into())
            }
            Some(s) => {
                // each sweep run uses every client in every round
                let f = FederationConfig {
                    client_pool: s[0],
                    clients_per_round: s[0],
                    ..self.federation.clone()
                };
                v.extend(f.violations());
            }
        }
        v
    }

    /// Every key, in schema order; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let f = &self.federation;
        let l = &f.local;
        let mut kv: Vec<(&str, String)> = vec![("scenario", self.scenario.clone()), ("seed", self.seed.to_string())];
        match &self.data {
            DataSource::Synthetic {
                geometry,
                train_samples,
                test_samples,
                classes,
                noise,
            } => {
                kv.push(("data.source", "synthetic".into()));
                kv.push(("data.geometry", geometry.name().into()));
                kv.push(("data.train_samples", train_samples.to_string()));
                kv.push(("data.test_samples", test_samples.to_string()));
                kv.push(("data.classes", classes.to_string()));
                kv.push(("data.noise", noise.to_string()));
                match geometry {
                    Geometry::GaussianBlobs { dim } => kv.push(("data.dim", dim.to_string())),
                    Geometry::TexturedPatches { size } => kv.push(("data.size", size.to_string())),
                    Geometry::ConcentricRings => {}
                }
            }
            DataSource::Files { train, test } => {
                kv.push(("data.source", "files".into()));
                kv.push(("data.train_file", train.display().to_string()));
                kv.push(("data.test_file", test.display().to_string()));
            }
        }
        match self.partition {
            PartitionKind::Iid => kv.push(("partition.kind", "iid".into())),
            PartitionKind::Dirichlet(c) => {
                kv.push(("partition.kind", "dirichlet".into()));
                kv.push(("partition.concentration", c.to_string()));
            }
        }
        kv.push(("partition.iid_resplit", f.iid_resplit.to_string()));
        kv.push(("space.blocks", self.space.blocks.to_string()));
        kv.push(("space.candidates", join(&self.space.candidates)));
        kv.push(("space.channels", self.space.channels.to_string()));
        kv.push(("space.stem_kernel", self.space.stem_kernel.to_string()));
        match &f.mode {
            Mode::Dfnas => kv.push(("federation.mode", "dfnas".into())),
            Mode::Baseline(p) => {
                kv.push(("federation.mode", "baseline".into()));
                kv.push(("federation.baseline_path", join(p)));
            }
        }
        kv.push(("federation.rounds", f.rounds.to_string()));
        kv.push(("federation.client_pool", f.client_pool.to_string()));
        kv.push(("federation.clients_per_round", f.clients_per_round.to_string()));
        kv.push(("federation.weighting", f.weighting.to_string()));
        kv.push(("federation.workers", f.workers.to_string()));
        kv.push(("federation.server_alpha_threshold", f.server_alpha_threshold.to_string()));
        if let Some(s) = &self.client_sweep {
            kv.push(("federation.client_sweep", join(s)));
        }
        kv.push(("local.epochs", l.epochs.to_string()));
        kv.push(("local.batch_size", l.batch_size.to_string()));
        kv.push(("local.lr_w", l.lr_w.to_string()));
        kv.push(("local.momentum_w", l.momentum_w.to_string()));
        kv.push(("local.lr_alpha", l.lr_alpha.to_string()));
        if let Some(c) = l.grad_clip {
            kv.push(("local.grad_clip", c.to_string()));
        }
        kv.push(("output.dir", self.output_dir.display().to_string()));
        kv.push(("output.checkpoints", self.checkpoints.to_string()));
        kv.push(("output.record_wall_ms", self.record_wall_ms.to_string()));

        let mut s = String::new();
        for (k, v) in kv {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }
}

/// The documented schema: every key, its default and a short description.
pub fn schema_text() -> String {
    let mut s = String::new();
    for k in SCHEMA {
        let default = k.default.unwrap_or("(required)");
        writeln!(s, "{:<36} {:<26} {}", k.key, default, k.help).unwrap();
    }
    s
}
