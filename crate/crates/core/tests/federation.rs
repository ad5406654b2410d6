mod common;

use num::{BigRational, ToPrimitive};

use common::*;
use fednas::data::{iid_split, Partition, Shard};
use fednas::federation::{
    aggregate, evaluate, evaluate_child, select_clients, Federation, FederationConfig, Mode, RoundRecord, Weighting,
};
use fednas::local_search::{client_local_search, LocalSearchConfig};
use fednas::supernet::{derive_child, ParameterBlob, Record};
use fednas::Error;

#[test]
fn single_client_selection_is_uniform() {
    let mut r = rng(8);
    let mut counts = [0u64; 8];
    for _ in 0..10_000 {
        let picked = select_clients(8, 1, &mut r).unwrap();
        counts[picked[0]] += 1;
    }
    let chi = chi_square(&counts, &[0.125; 8]);
    assert!(chi < chi_square_critical_01(7), "chi-square {chi} for {counts:?}");
    for c in counts {
        assert!((c as f64 / 10_000.0 - 0.125).abs() < 0.01, "{counts:?}");
    }
    let again: Vec<Vec<usize>> = (0..20).map(|_| select_clients(8, 3, &mut rng(1)).unwrap()).collect();
    assert!(again.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn uniform_mean_matches_exact_rational_mean() {
    let mut r = rng(42);
    let blobs: Vec<ParameterBlob> = (0..5)
        .map(|_| {
            ParameterBlob::new(vec![Record {
                name: "w".into(),
                shape: vec![64],
                data: uniform_vec(&mut r, 64, -100.0, 100.0),
            }])
        })
        .collect();
    let mean = aggregate(&blobs, &[0.2; 5]).unwrap();
    for j in 0..64 {
        let exact = blobs
            .iter()
            .map(|b| BigRational::from_float(b.records[0].data[j]).unwrap())
            .fold(BigRational::from_integer(0.into()), |a, b| a + b)
            / BigRational::from_integer(5.into());
        let exact = exact.to_f64().unwrap();
        let got = mean.records[0].data[j];
        assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0), "{got} vs {exact}");
    }
}

#[test]
fn identical_clients_aggregate_to_their_common_result() {
    let data = blobs(60, 3, 2, 0.5, 1);
    let idx: Vec<usize> = (0..60).collect();
    let shard = Shard::new(&data, &idx).unwrap();
    let net = vector_net(2, 2, "identity,linear4", 4, 3, 2);
    let config = LocalSearchConfig {
        batch_size: 8,
        lr_alpha: 0.1,
        seed: 5,
        ..LocalSearchConfig::default()
    };
    let one = client_local_search(&net, &net.flatten_params(), &shard, &config).unwrap().blob;
    let many: Vec<ParameterBlob> = (0..4)
        .map(|_| client_local_search(&net, &net.flatten_params(), &shard, &config).unwrap().blob)
        .collect();
    let avg = aggregate(&many, &[0.25; 4]).unwrap();
    for (a, b) in avg.records.iter().zip(&one.records) {
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}

fn small_config(weighting: Weighting, workers: usize) -> FederationConfig {
    FederationConfig {
        rounds: 3,
        client_pool: 4,
        clients_per_round: 4,
        weighting,
        mode: Mode::Dfnas,
        local: LocalSearchConfig {
            batch_size: 10,
            lr_alpha: 0.1,
            ..LocalSearchConfig::default()
        },
        seed: 77,
        workers,
        ..FederationConfig::default()
    }
}

fn run(config: FederationConfig) -> (Vec<RoundRecord>, Vec<u8>) {
    let (train, test) = blobs_split(120, 60, 3, 2, 0.5, 3);
    let partition = iid_split(&train, 4, &mut rng(6)).unwrap();
    let net = vector_net(2, 2, "identity,linear4", 4, 3, 9);
    let mut fed = Federation::new(config, net, &train, &test, partition).unwrap();
    let history: Vec<_> = (0..3).map(|_| fed.run_round().unwrap()).collect();
    (history, fed.net().flatten_params().to_bytes())
}

#[test]
fn weighting_modes_agree_on_equal_shards() {
    let (ha, a) = run(small_config(Weighting::Uniform, 1));
    let (hb, b) = run(small_config(Weighting::Samples, 1));
    assert_eq!(ha[0].samples, vec![30; 4]);
    let a = ParameterBlob::from_bytes(&a).unwrap();
    let b = ParameterBlob::from_bytes(&b).unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        for (p, q) in x.data.iter().zip(&y.data) {
            assert!((p - q).abs() <= 1e-12);
        }
    }
    assert_eq!(ha.last().unwrap().test_acc, hb.last().unwrap().test_acc);
}

#[test]
fn worker_count_does_not_change_results() {
    let (h1, a) = run(small_config(Weighting::Samples, 1));
    let (h4, b) = run(small_config(Weighting::Samples, 4));
    assert_eq!(a, b);
    for (x, y) in h1.iter().zip(&h4) {
        assert_eq!((x.test_acc, x.test_loss, x.train_loss), (y.test_acc, y.test_loss, y.train_loss));
    }
}

#[test]
fn zero_rounds_are_rejected() {
    let config = FederationConfig {
        rounds: 0,
        ..small_config(Weighting::Samples, 1)
    };
    assert!(config.violations().iter().any(|v| v.contains("rounds")));
    let train = blobs(40, 2, 2, 0.5, 3);
    let partition = iid_split(&train, 4, &mut rng(6)).unwrap();
    let net = vector_net(2, 1, "identity,linear4", 4, 2, 9);
    assert!(matches!(
        Federation::new(config, net, &train, &train, partition),
        Err(Error::Config(_))
    ));
}

#[test]
fn untrained_net_is_at_chance() {
    // heavy overlap, so predictions carry no label information
    let test = blobs(1000, 10, 4, 50.0, 5);
    let net = vector_net(4, 2, "identity,linear6", 6, 10, 3);
    let acc = evaluate(&net, &test).unwrap().accuracy;
    assert!((acc - 0.1).abs() <= 0.03, "{acc}");
}

#[test]
fn accuracy_matches_a_hand_tally() {
    let test = blobs(20, 4, 3, 1.0, 6);
    let mut net = vector_net(3, 2, "identity,linear5", 5, 4, 11);
    net.edges_mut()[0].set_alpha(&[0.0, 1.0]).unwrap();
    let path = net.argmax_path();
    let mut confusion = [[0usize; 4]; 4];
    for i in 0..test.len() {
        let batch = test.gather(&[i]).unwrap();
        let pass = net.forward_selection(&path, None, &batch).unwrap();
        let logits = pass.tape.value(pass.logits);
        let mut best = 0;
        for (k, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = k;
            }
        }
        confusion[test.labels()[i]][best] += 1;
    }
    let correct: usize = (0..4).map(|c| confusion[c][c]).sum();
    let eval = evaluate(&net, &test).unwrap();
    assert_eq!(eval.accuracy, correct as f64 / 20.0);
    let child = derive_child(&net).unwrap();
    assert_eq!(evaluate_child(&child, &test).unwrap().accuracy, eval.accuracy);
}

#[test]
fn iid_search_solves_separable_blobs() {
    let (train, test) = blobs_split(800, 400, 4, 2, 0.25, 21);
    let net = vector_net(2, 2, "identity,linear8", 8, 4, 5);

    // the task is solvable: the best fixed path trained centrally
    let everyone: Vec<usize> = (0..train.len()).collect();
    let shard = Shard::new(&train, &everyone).unwrap();
    let central = [[0, 0], [0, 1], [1, 0], [1, 1]]
        .iter()
        .map(|p| {
            let f = net.fixed_path(p).unwrap();
            let cfg = LocalSearchConfig {
                epochs: 5,
                lr_alpha: 0.0,
                ..LocalSearchConfig::default()
            };
            let r = client_local_search(&f, &f.flatten_params(), &shard, &cfg).unwrap();
            let mut t = f.clone();
            t.unflatten_params(&r.blob).unwrap();
            evaluate(&t, &test).unwrap().accuracy
        })
        .fold(0.0, f64::max);
    assert!(central >= 0.95, "best central path reaches only {central}");

    let partition = iid_split(&train, 4, &mut rng(1)).unwrap();
    let config = FederationConfig {
        rounds: 30,
        client_pool: 4,
        clients_per_round: 4,
        local: LocalSearchConfig {
            lr_alpha: 0.05,
            ..LocalSearchConfig::default()
        },
        seed: 3,
        ..FederationConfig::default()
    };
    let mut fed = Federation::new(config, net, &train, &test, partition).unwrap();
    let mut last = None;
    for _ in 0..30 {
        last = Some(fed.run_round().unwrap());
    }
    let acc = last.unwrap().test_acc;
    assert!(acc >= 0.95, "federated search reached {acc} (central best {central})");
}

#[test]
fn partition_must_match_the_pool() {
    let train = blobs(40, 2, 2, 0.5, 3);
    let partition = Partition::new(vec![(0..20).collect(), (20..40).collect()], 40).unwrap();
    let net = vector_net(2, 1, "identity,linear4", 4, 2, 9);
    let config = small_config(Weighting::Samples, 1);
    assert!(Federation::new(config, net, &train, &train, partition).is_err());
}
