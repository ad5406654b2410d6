use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::Dataset;
use crate::error::{Error, Result};

/// Disjoint per-client index lists that together cover a dataset exactly.
/// Each list is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    shards: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates disjointness and exact coverage of `0..total`.
    pub fn new(mut shards: Vec<Vec<usize>>, total: usize) -> Result<Self> {
        let mut seen = vec![false; total];
        for (client, shard) in shards.iter_mut().enumerate() {
            shard.sort_unstable();
            for &i in shard.iter() {
                match seen.get_mut(i) {
                    None => {
                        return Err(Error::Invariant(format!(
                            "client {client} holds index {i} outside 0..{total}"
                        )))
                    }
                    Some(true) => {
                        return Err(Error::Invariant(format!("index {i} assigned twice")))
                    }
                    Some(s) => *s = true,
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Invariant(format!("index {i} assigned to no client")));
        }
        Ok(Self { shards })
    }

    pub fn num_clients(&self) -> usize {
        self.shards.len()
    }

    pub fn shard(&self, client: usize) -> &[usize] {
        &self.shards[client]
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.shards.iter().map(Vec::len).collect()
    }
}

/// Seeded shuffle dealt round-robin: shard sizes differ by at most one.
pub fn iid_split<R: Rng + ?Sized>(dataset: &Dataset, clients: usize, rng: &mut R) -> Result<Partition> {
    let n = dataset.len();
    if clients == 0 || clients > n {
        return Err(Error::Config(format!(
            "cannot split {n} samples among {clients} clients"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut shards = vec![Vec::with_capacity(n / clients + 1); clients];
    for (pos, i) in order.into_iter().enumerate() {
        shards[pos % clients].push(i);
    }
    Partition::new(shards, n)
}

/// One draw from a symmetric Dirichlet via normalized Gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(k: usize, concentration: f64, rng: &mut R) -> Result<Vec<f64>> {
    if k == 0 || !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::Config(format!(
            "Dirichlet needs k >= 1 and a positive concentration, got k={k}, {concentration}"
        )));
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let gamma = Gamma::new(concentration, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    loop {
        let g: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = g.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return Ok(g.into_iter().map(|x| x / sum).collect());
        }
    }
}

/// Integer counts proportional to `proportions` that sum exactly to
/// `total`: floors first, then the leftover units go to the largest
/// fractional parts (ties to the lower index).
pub fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

const DIRICHLET_REDRAWS: usize = 10;

/// Class-skewed split: for each class, client proportions are drawn from a
/// symmetric Dirichlet and the class's samples are cut into contiguous
/// slices of largest-remainder-rounded size. A partition leaving some client
/// empty is redrawn up to 10 times.
pub fn dirichlet_split<R: Rng + ?Sized>(
    dataset: &Dataset,
    clients: usize,
    concentration: f64,
    rng: &mut R,
) -> Result<Partition> {
    if clients == 0 {
        return Err(Error::Config("need at least one client".into()));
    }
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::Config(format!("concentration {concentration} must be positive")));
    }
    let by_class = dataset.indices_by_class();
    for _attempt in 0..=DIRICHLET_REDRAWS {
        let mut shards = vec![Vec::new(); clients];
        for members in &by_class {
            let p = sample_dirichlet(clients, concentration, rng)?;
            let counts = largest_remainder(&p, members.len());
            let mut start = 0;
            for (client, &c) in counts.iter().enumerate() {
                shards[client].extend_from_slice(&members[start..start + c]);
                start += c;
            }
        }
        if shards.iter().all(|s| !s.is_empty()) {
            return Partition::new(shards, dataset.len());
        }
    }
    Err(Error::Data(format!(
        "Dirichlet({concentration}) split left a client empty after {DIRICHLET_REDRAWS} redraws"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use crate::tensor::Tensor;
    use proptest::prelude::*;

    fn labelled(n: usize, classes: usize) -> Dataset {
        Dataset::new(
            Tensor::zeros(vec![n, 1]),
            (0..n).map(|i| i % classes).collect(),
            classes,
        )
        .unwrap()
    }

    #[test]
    fn iid_sizes() {
        let d = labelled(1000, 10);
        let p = iid_split(&d, 8, &mut rng_from_seed(1)).unwrap();
        assert_eq!(p.sizes(), vec![125; 8]);
        let one = iid_split(&d, 1, &mut rng_from_seed(1)).unwrap();
        assert_eq!(one.shard(0), (0..1000).collect::<Vec<_>>().as_slice());
        assert!(iid_split(&d, 1001, &mut rng_from_seed(1)).unwrap_err().is_config());
    }

    #[test]
    fn partition_rejects_overlap_and_gaps() {
        assert!(Partition::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(Partition::new(vec![vec![0], vec![2]], 3).is_err());
        assert!(Partition::new(vec![vec![0, 3]], 3).is_err());
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.2, 0.3, 0.5], 10), vec![2, 3, 5]);
        assert_eq!(largest_remainder(&[0.34, 0.33, 0.33], 100).iter().sum::<usize>(), 100);
        assert_eq!(largest_remainder(&[1.0], 7), vec![7]);
    }

    #[test]
    fn dirichlet_single_client_takes_everything() {
        let d = labelled(90, 3);
        for conc in [0.01, 0.5, 100.0] {
            let p = dirichlet_split(&d, 1, conc, &mut rng_from_seed(4)).unwrap();
            assert_eq!(p.sizes(), vec![90]);
        }
    }

    #[test]
    fn dirichlet_degenerate_split_errors() {
        // two samples, eight clients: some client is always empty
        let d = labelled(2, 2);
        let err = dirichlet_split(&d, 8, 0.5, &mut rng_from_seed(0)).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn splits_are_exhaustive_and_disjoint(
            n in 20usize..300,
            classes in 2usize..6,
            clients in 1usize..6,
            conc in 0.3f64..20.0,
            seed in any::<u64>(),
        ) {
            let d = labelled(n, classes);
            let iid = iid_split(&d, clients, &mut rng_from_seed(seed)).unwrap();
            prop_assert_eq!(iid.sizes().iter().sum::<usize>(), n);
            let (lo, hi) = (iid.sizes().into_iter().min().unwrap(), iid.sizes().into_iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
            if let Ok(p) = dirichlet_split(&d, clients, conc, &mut rng_from_seed(seed)) {
                // Partition::new already validated coverage; recheck the total.
                prop_assert_eq!(p.sizes().iter().sum::<usize>(), n);
            }
        }

        #[test]
        fn largest_remainder_conserves(props in proptest::collection::vec(0.0f64..1.0, 1..10), total in 0usize..1000) {
            let sum: f64 = props.iter().sum();
            prop_assume!(sum > 0.0);
            let p: Vec<f64> = props.iter().map(|x| x / sum).collect();
            let counts = largest_remainder(&p, total);
            prop_assert_eq!(counts.iter().sum::<usize>(), total);
            for (c, q) in counts.iter().zip(&p) {
                prop_assert!((*c as f64 - q * total as f64).abs() < 1.0 + 1e-9);
            }
        }
    }
}
