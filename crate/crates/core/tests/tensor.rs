mod common;

use common::*;
use fednas::tensor::{Tape, Tensor};
use proptest::prelude::*;

#[test]
fn matmul_matches_finite_differences() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let inputs = [random_tensor(&mut r, &[5, 7]), random_tensor(&mut r, &[7, 3])];
        let err = check_graph(&inputs, seed, &|t, v, p| {
            let y = t.matmul(v[0], v[1])?;
            Ok(project(t, y, p))
        });
        assert!(err < 1e-6, "seed {seed}: {err:e}");
    }
}

#[test]
fn conv2d_matches_finite_differences() {
    for seed in 0..3 {
        let mut r = rng(seed);
        let inputs = [random_tensor(&mut r, &[2, 3, 8, 8]), random_tensor(&mut r, &[4, 3, 3, 3])];
        let err = check_graph(&inputs, seed, &|t, v, p| {
            let y = t.conv2d(v[0], v[1], 1, 1)?;
            Ok(project(t, y, p))
        });
        assert!(err < 1e-5, "seed {seed}: {err:e}");
    }
}

#[test]
fn relu_matches_finite_differences_away_from_the_kink() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let x = tensor(&[4, 6], away_from_zero(&mut r, 24, 1e-3));
        let err = check_graph(&[x], seed, &|t, v, p| {
            let y = t.relu(v[0])?;
            Ok(project(t, y, p))
        });
        assert!(err < 1e-6, "seed {seed}: {err:e}");
    }
}

#[test]
fn cross_entropy_matches_finite_differences() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let logits = tensor(&[4, 5], uniform_vec(&mut r, 20, -2.0, 2.0));
        let labels = [0, 3, 4, 1];
        let err = check_graph(&[logits], seed, &|t, v, _| t.softmax_cross_entropy(v[0], &labels));
        assert!(err < 1e-6, "seed {seed}: {err:e}");
    }
}

/// relu(x·W + b)·V → cross-entropy, differentiated by hand one scalar at a time.
#[test]
fn composite_graph_matches_scalar_chain_rule() {
    let mut r = rng(17);
    let (n, d, h, c) = (3, 4, 5, 3);
    let x = uniform_vec(&mut r, n * d, -1.0, 1.0);
    let w = uniform_vec(&mut r, d * h, -1.0, 1.0);
    let b = uniform_vec(&mut r, h, -0.5, 0.5);
    let v = uniform_vec(&mut r, h * c, -1.0, 1.0);
    let labels = [2, 0, 1];

    let mut tape = Tape::new();
    let xs = tape.leaf(&tensor(&[n, d], x.clone()));
    let ws = tape.leaf(&tensor(&[d, h], w.clone()));
    let bs = tape.leaf(&tensor(&[h], b.clone()));
    let vs = tape.leaf(&tensor(&[h, c], v.clone()));
    let z = tape.matmul(xs, ws).unwrap();
    let z = tape.add_bias(z, bs).unwrap();
    let a = tape.relu(z).unwrap();
    let logits = tape.matmul(a, vs).unwrap();
    let loss = tape.softmax_cross_entropy(logits, &labels).unwrap();
    assert!(tape.len() <= 10);
    let loss_value = tape.scalar(loss);
    let g = tape.backward(loss).unwrap();

    // forward, scalar by scalar
    let mut pre = vec![0.0; n * h];
    let mut act = vec![0.0; n * h];
    for i in 0..n {
        for j in 0..h {
            let mut s = b[j];
            for k in 0..d {
                s += x[i * d + k] * w[k * h + j];
            }
            pre[i * h + j] = s;
            act[i * h + j] = s.max(0.0);
        }
    }
    let mut dlogits = vec![0.0; n * c];
    let mut oracle_loss = 0.0;
    for i in 0..n {
        let row: Vec<f64> = (0..c)
            .map(|k| (0..h).map(|j| act[i * h + j] * v[j * c + k]).sum())
            .collect();
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|l| (l - m).exp()).sum();
        oracle_loss += (z.ln() + m - row[labels[i]]) / n as f64;
        for k in 0..c {
            let p = (row[k] - m).exp() / z;
            dlogits[i * c + k] = (p - if k == labels[i] { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    // backward, scalar by scalar
    let mut dv = vec![0.0; h * c];
    let mut dpre = vec![0.0; n * h];
    for i in 0..n {
        for j in 0..h {
            let mut da = 0.0;
            for k in 0..c {
                dv[j * c + k] += act[i * h + j] * dlogits[i * c + k];
                da += v[j * c + k] * dlogits[i * c + k];
            }
            dpre[i * h + j] = if pre[i * h + j] > 0.0 { da } else { 0.0 };
        }
    }
    let mut dw = vec![0.0; d * h];
    let mut db = vec![0.0; h];
    let mut dx = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..h {
            db[j] += dpre[i * h + j];
            for k in 0..d {
                dw[k * h + j] += x[i * d + k] * dpre[i * h + j];
                dx[i * d + k] += w[k * h + j] * dpre[i * h + j];
            }
        }
    }

    assert!((loss_value - oracle_loss).abs() < 1e-12);
    for (var, oracle) in [(xs, &dx), (ws, &dw), (bs, &db), (vs, &dv)] {
        for (a, b) in g.get(var).unwrap().iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let run = || {
        let mut r = rng(3);
        let x = random_tensor(&mut r, &[2, 3, 5, 5]);
        let k = random_tensor(&mut r, &[3, 3, 3, 3]);
        let mut t = Tape::new();
        let (xv, kv) = (t.leaf(&x), t.leaf(&k));
        let y = t.conv2d(xv, kv, 1, 1).unwrap();
        let y = t.relu(y).unwrap();
        let y = t.global_avg_pool(y).unwrap();
        let loss = t.softmax_cross_entropy(y, &[0, 2]).unwrap();
        let value = t.scalar(loss);
        let g = t.backward(loss).unwrap();
        (value.to_bits(), g.get(kv).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn grad_shape_matches_data(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_tensor(&mut r, &[rows, cols]);
        let b = random_tensor(&mut r, &[cols, 2]);
        let mut t = Tape::new();
        let (av, bv) = (t.leaf(&a), t.leaf(&b));
        let y = t.matmul(av, bv).unwrap();
        let loss = t.softmax_cross_entropy(y, &vec![1; rows]).unwrap();
        let g = t.backward(loss).unwrap();
        prop_assert_eq!(g.get(av).unwrap().len(), a.numel());
        prop_assert_eq!(g.get(bv).unwrap().len(), b.numel());
    }

    #[test]
    fn tensor_rejects_non_finite_data(pos in 0usize..6, bad in prop_oneof![Just(f64::NAN), Just(f64::INFINITY)]) {
        let mut data = vec![0.5; 6];
        data[pos] = bad;
        prop_assert!(Tensor::new(vec![2, 3], data).is_err());
    }
}
