//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fednas::data::{generate_synthetic, Batch, Dataset, Geometry, SyntheticSpec};
use fednas::supernet::{build_supernet, CandidateKind, SpaceConfig, Supernet};
use fednas::tensor::{Tape, Tensor, Var};

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Uniform in ±[margin, 1]: keeps values clear of ReLU's kink.
pub fn away_from_zero(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(margin..1.0);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect()
}

pub fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).unwrap().with_grad()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    tensor(shape, uniform_vec(rng, n, -1.0, 1.0))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Reduces a rank-2 or square rank-4 value to a scalar through random
/// linear maps built from tape primitives. Odd maps get one full-extent
/// kernel (a dense functional); even maps a kernel one pixel smaller, whose
/// four placements still weight every position differently.
pub fn project(tape: &mut Tape, y: Var, rng: &mut ChaCha8Rng) -> Var {
    let shape = tape.shape(y).to_vec();
    let y2 = if shape.len() == 4 {
        let (c, h, w) = (shape[1], shape[2], shape[3]);
        assert!(h == w, "projection needs square maps, got {shape:?}");
        let k = if h % 2 == 1 { h } else { h - 1 };
        let k = tape.constant(vec![2, c, k, k], uniform_vec(rng, 2 * c * k * k, -1.0, 1.0)).unwrap();
        let z = tape.conv2d(y, k, 1, 0).unwrap();
        tape.global_avg_pool(z).unwrap()
    } else {
        y
    };
    let s = tape.shape(y2).to_vec();
    let r = tape.constant(vec![s[1], 1], uniform_vec(rng, s[1], -1.0, 1.0)).unwrap();
    let u = tape.constant(vec![1, s[0]], uniform_vec(rng, s[0], -1.0, 1.0)).unwrap();
    let z = tape.matmul(y2, r).unwrap();
    tape.matmul(u, z).unwrap()
}

/// Largest relative error between tape gradients and central differences
/// of `build` with respect to every element of every input.
pub fn check_graph(
    inputs: &[Tensor],
    proj_seed: u64,
    build: &dyn Fn(&mut Tape, &[Var], &mut ChaCha8Rng) -> fednas::Result<Var>,
) -> f64 {
    let run = |ts: &[Tensor]| -> (Tape, Var, Vec<Var>) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ts.iter().map(|t| tape.leaf(t)).collect();
        let loss = build(&mut tape, &vars, &mut rng(proj_seed)).unwrap();
        (tape, loss, vars)
    };
    let (tape, loss, vars) = run(inputs);
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (i, t) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]).unwrap().to_vec();
        for j in 0..t.numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            let (tp, lp, _) = run(&plus);
            let (tm, lm, _) = run(&minus);
            let fd = (tp.scalar(lp) - tm.scalar(lm)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[j], fd));
        }
    }
    worst
}

/// True if any recorded value is exactly zero in one tape and not the
/// other, i.e. some ReLU switched between the two evaluations.
pub fn kink_between(a: &Tape, b: &Tape) -> bool {
    a.values()
        .zip(b.values())
        .any(|(x, y)| x.iter().zip(y).any(|(p, q)| (*p == 0.0) != (*q == 0.0)))
}

pub fn kinds(list: &str) -> Vec<CandidateKind> {
    list.split(',').map(|k| k.parse().unwrap()).collect()
}

pub fn image_net(blocks: usize, list: &str, channels: usize, side: usize, classes: usize, seed: u64) -> Supernet {
    build_supernet(&SpaceConfig::uniform(vec![1, side, side], classes, channels, blocks, kinds(list), seed)).unwrap()
}

pub fn vector_net(dim: usize, blocks: usize, list: &str, width: usize, classes: usize, seed: u64) -> Supernet {
    build_supernet(&SpaceConfig::uniform(vec![dim], classes, width, blocks, kinds(list), seed)).unwrap()
}

pub fn random_batch(rng: &mut ChaCha8Rng, sample_shape: &[usize], n: usize, classes: usize) -> Batch {
    let mut shape = vec![n];
    shape.extend_from_slice(sample_shape);
    let numel = shape.iter().product();
    Batch {
        features: Tensor::new(shape, uniform_vec(rng, numel, -1.0, 1.0)).unwrap(),
        labels: (0..n).map(|_| rng.random_range(0..classes)).collect(),
    }
}

pub fn blobs(samples: usize, classes: usize, dim: usize, noise: f64, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticSpec {
        samples,
        classes,
        geometry: Geometry::GaussianBlobs { dim },
        noise,
        seed,
    })
    .unwrap()
}

/// Train and test halves cut from one generated pool, so both share the
/// same class centres.
pub fn blobs_split(train: usize, test: usize, classes: usize, dim: usize, noise: f64, seed: u64) -> (Dataset, Dataset) {
    let all = blobs(train + test, classes, dim, noise, seed);
    let a: Vec<usize> = (0..train).collect();
    let b: Vec<usize> = (train..train + test).collect();
    (all.subset(&a).unwrap(), all.subset(&b).unwrap())
}

pub fn patches(samples: usize, classes: usize, size: usize, noise: f64, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticSpec {
        samples,
        classes,
        geometry: Geometry::TexturedPatches { size },
        noise,
        seed,
    })
    .unwrap()
}

/// Chi-square statistic of observed counts against expected probabilities.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

/// Upper 1% points of the chi-square distribution, by degrees of freedom.
pub fn chi_square_critical_01(df: usize) -> f64 {
    match df {
        1 => 6.635,
        2 => 9.210,
        3 => 11.345,
        5 => 15.086,
        7 => 18.475,
        8 => 20.090,
        11 => 24.725,
        15 => 30.578,
        _ => panic!("no table entry for {df} degrees of freedom"),
    }
}

/// Total-variation distance between two histograms, each normalized.
pub fn total_variation(a: &[usize], b: &[usize]) -> f64 {
    let (sa, sb) = (a.iter().sum::<usize>() as f64, b.iter().sum::<usize>() as f64);
    0.5 * a.iter().zip(b).map(|(&x, &y)| (x as f64 / sa - y as f64 / sb).abs()).sum::<f64>()
}
