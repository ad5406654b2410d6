use crate::error::{Error, Result};
use crate::supernet::{ParameterBlob, Record};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// One client's upload as seen by the server.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub client: usize,
    pub weight: f64,
    pub blob: ParameterBlob,
}

/// Elementwise `Σ ν_i · blob_i` over every record, α included.
///
/// Summation runs left to right in the given order, starting from
/// `ν_0 · blob_0`, so a single blob with weight 1 comes back bit for bit.
/// The weights must be non-negative and sum to 1 within 1e-9; they are not
/// renormalized.
pub fn aggregate(blobs: &[ParameterBlob], weights: &[f64]) -> Result<ParameterBlob> {
    let first = blobs
        .first()
        .ok_or_else(|| Error::Config("nothing to aggregate".into()))?;
    if blobs.len() != weights.len() {
        return Err(Error::Config(format!(
            "{} blobs but {} weights",
            blobs.len(),
            weights.len()
        )));
    }
    if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Config(format!("weight {i} = {w} must be a non-negative number")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::Config(format!("aggregation weights sum to {sum}, not 1")));
    }
    for b in &blobs[1..] {
        first.check_layout(b)?;
    }

    let w0 = weights[0];
    let mut records: Vec<Record> = first
        .records
        .iter()
        .map(|r| Record {
            name: r.name.clone(),
            shape: r.shape.clone(),
            data: r.data.iter().map(|x| w0 * x).collect(),
        })
        .collect();
    for (blob, &w) in blobs.iter().zip(weights).skip(1) {
        for (acc, r) in records.iter_mut().zip(&blob.records) {
            for (a, x) in acc.data.iter_mut().zip(&r.data) {
                *a += w * x;
            }
        }
    }
    Ok(ParameterBlob::new(records))
}

/// Aggregates client uploads in ascending client-id order, whatever order
/// they arrived in.
pub fn aggregate_contributions(contributions: &[Contribution]) -> Result<ParameterBlob> {
    let mut sorted: Vec<&Contribution> = contributions.iter().collect();
    sorted.sort_by_key(|c| c.client);
    if let Some(pair) = sorted.windows(2).find(|p| p[0].client == p[1].client) {
        return Err(Error::Invariant(format!("client {} reported twice", pair[0].client)));
    }
    let blobs: Vec<ParameterBlob> = sorted.iter().map(|c| c.blob.clone()).collect();
    let weights: Vec<f64> = sorted.iter().map(|c| c.weight).collect();
    aggregate(&blobs, &weights)
}
