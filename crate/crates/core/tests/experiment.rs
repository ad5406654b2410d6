use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fednas");

fn fednas(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a small blobs config; keys in `extra` replace the defaults here.
fn small_config(dir: &Path, extra: &str) -> String {
    let base = format!(
        "scenario = small
seed = 5
data.train_samples = 240
data.test_samples = 80
data.classes = 3
data.noise = 0.4
space.blocks = 2
space.candidates = identity,linear6
space.channels = 6
federation.rounds = 3
federation.client_pool = 3
federation.clients_per_round = 2
local.batch_size = 16
local.lr_alpha = 0.1
output.dir = {}
",
        dir.join("out").display()
    );
    let key = |l: &str| l.split_once('=').map(|(k, _)| k.trim().to_string());
    let replaced: Vec<String> = extra.lines().filter_map(key).collect();
    let mut text: String = base
        .lines()
        .filter(|l| key(l).is_none_or(|k| !replaced.contains(&k)))
        .map(|l| format!("{l}\n"))
        .collect();
    text.push_str(extra);
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_config(dir.path(), "");
    let first = fednas(&["run", &conf]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    assert!(stdout(&first).contains("final test accuracy"));
    let out = dir.path().join("out");
    for f in ["metrics.csv", "child.txt", "child.blob", "config.txt"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let metrics = fs::read(out.join("metrics.csv")).unwrap();
    let text = String::from_utf8(metrics.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), "round,clients,test_acc,test_loss,bytes_up,bytes_down,wall_ms");
    assert_eq!(text.lines().count(), 4);

    let again = fednas(&["run", &conf]);
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read(out.join("metrics.csv")).unwrap(), metrics);

    let shown = fednas(&["inspect-child", out.join("child.txt").to_str().unwrap()]);
    assert_eq!(code(&shown), 0, "{}", stderr(&shown));
    let s = stdout(&shown);
    assert!(s.contains("edge  0:") && s.contains("edge  1:") && s.contains("total parameters"), "{s}");
}

#[test]
fn overrides_replace_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_config(dir.path(), "");
    let elsewhere = dir.path().join("elsewhere");
    let a = fednas(&["run", &conf, "--seed", "6", "--out", elsewhere.to_str().unwrap()]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let resolved = fs::read_to_string(elsewhere.join("config.txt")).unwrap();
    assert!(resolved.lines().any(|l| l.replace(' ', "") == "seed=6"), "{resolved}");
    assert!(!dir.path().join("out").exists());

    let seeded = fs::read(elsewhere.join("metrics.csv")).unwrap();
    let b = fednas(&["run", &conf]);
    assert_eq!(code(&b), 0);
    assert_ne!(fs::read(dir.path().join("out/metrics.csv")).unwrap(), seeded);

    // baseline without a path is a config error
    let c = fednas(&["run", &conf, "--mode", "baseline"]);
    assert_eq!(code(&c), 2, "{}", stderr(&c));
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let at = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(at).unwrap().to_string()).collect()
}

#[test]
fn one_candidate_search_is_the_fixed_path_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_config(
        dir.path(),
        "space.candidates = linear6\nfederation.baseline_path = 0,0\n",
    );
    let searched = fednas(&["run", &conf, "--out", dir.path().join("dfnas").to_str().unwrap()]);
    assert_eq!(code(&searched), 0, "{}", stderr(&searched));
    let fixed = fednas(&[
        "run",
        &conf,
        "--mode",
        "baseline",
        "--out",
        dir.path().join("baseline").to_str().unwrap(),
    ]);
    assert_eq!(code(&fixed), 0, "{}", stderr(&fixed));
    let a = fs::read_to_string(dir.path().join("dfnas/metrics.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("baseline/metrics.csv")).unwrap();
    for col in ["test_acc", "test_loss"] {
        assert_eq!(column(&a, col), column(&b, col), "{col}");
    }
}

#[test]
fn client_sweep_writes_one_csv_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_config(
        dir.path(),
        "federation.client_pool = 8\nfederation.clients_per_round = 8\nfederation.client_sweep = 2,4,8\n",
    );
    let o = fednas(&["run", &conf]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    for k in [2, 4, 8] {
        let csv = fs::read_to_string(dir.path().join(format!("out/clients{k}/metrics.csv"))).unwrap();
        assert!(column(&csv, "clients").iter().all(|c| *c == k.to_string()), "{csv}");
    }
}

#[test]
fn compare_reports_mean_and_spread() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_config(dir.path(), "");
    let mut csvs = Vec::new();
    for seed in ["1", "2", "3"] {
        let out = dir.path().join(format!("seed{seed}"));
        let o = fednas(&["run", &conf, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        csvs.push(out.join("metrics.csv").display().to_string());
    }
    let table = dir.path().join("table.csv");
    let mut args = vec!["compare"];
    args.extend(csvs.iter().map(String::as_str));
    args.extend(["--out", table.to_str().unwrap()]);
    let o = fednas(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let summary = text.lines().last().unwrap();
    assert!(summary.contains(" ± ") && summary.ends_with("over 3 runs"), "{summary}");
    assert_eq!(fs::read_to_string(&table).unwrap().lines().count(), 4);

    let same = fednas(&["compare", &csvs[0], &csvs[0]]);
    assert!(stdout(&same).contains("± 0.00"), "{}", stdout(&same));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "round,acc\n1,0.5\n").unwrap();
    assert_ne!(code(&fednas(&["compare", &csvs[0], bad.to_str().unwrap()])), 0);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let typo = small_config(dir.path(), "federation.round = 4\n");
    let o = fednas(&["run", &typo]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("federation.round") && stderr(&o).contains("federation.rounds"), "{}", stderr(&o));

    let crowded = small_config(dir.path(), "federation.clients_per_round = 9\n");
    let o = fednas(&["run", &crowded]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("clients_per_round"), "{}", stderr(&o));
}

#[test]
fn runtime_errors_exit_with_three_and_inputs_stay_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let test = dir.path().join("test.csv");
    let rows: String = (0..40).map(|i| format!("{},{}.5,{}\n", i % 2, i % 7, (i * 3) % 5)).collect();
    fs::write(&train, &rows).unwrap();
    fs::write(&test, &rows[..rows.len() / 2]).unwrap();
    let files = format!(
        "data.source = files\ndata.train_file = {}\ndata.test_file = {}\nfederation.client_pool = 2\nfederation.clients_per_round = 2\n",
        train.display(),
        test.display()
    );
    let conf = small_config(dir.path(), &files);
    let before = (fs::read(&train).unwrap(), fs::read(&test).unwrap());
    let o = fednas(&["run", &conf]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!((fs::read(&train).unwrap(), fs::read(&test).unwrap()), before);

    fs::write(&train, "0,1.0\n1,oops\n").unwrap();
    let o = fednas(&["run", &conf]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn schema_lists_every_key_with_a_default() {
    let o = fednas(&["schema"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    for key in ["seed", "federation.rounds", "local.lr_alpha", "partition.concentration", "output.dir"] {
        assert!(s.lines().any(|l| l.split_whitespace().next() == Some(key)), "{key}");
    }
}
