//! Trader gas cost as the number of bucket endpoints the contract price
//! crosses, one unit per crossing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amm::BucketScheme;
use crate::error::{domain, Result};
use crate::pnl::PricePath;

/// Endpoint crossings along `path`, counting every endpoint strictly between
/// consecutive contract prices in either direction.
pub fn crossings(path: &PricePath, scheme: &BucketScheme) -> usize {
    path.pairs().windows(2).map(|w| scheme.endpoints_strictly_between(w[0].contract, w[1].contract)).sum()
}

/// Adds one to `counts[k]` for each crossing of endpoint `k`.
pub fn crossings_per_endpoint(path: &PricePath, scheme: &BucketScheme, counts: &mut [u64]) {
    let ends = scheme.endpoints();
    for w in path.pairs().windows(2) {
        let (p, q) = (w[0].contract, w[1].contract);
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let first = ends.partition_point(|&e| e <= lo);
        let last = ends.partition_point(|&e| e < hi);
        for c in counts.iter_mut().take(last).skip(first) {
            *c += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasEstimate {
    pub mean_crossings: f64,
    pub stderr: f64,
    /// Mean crossings of each interior endpoint, ascending by price.
    pub per_endpoint: Vec<f64>,
}

/// Sample mean and standard error of crossings over `paths`.
pub fn expected_gas(paths: &[PricePath], scheme: &BucketScheme) -> Result<GasEstimate> {
    if paths.is_empty() {
        return Err(domain("need at least one path"));
    }
    let ne = scheme.endpoints().len();
    let per_path: Vec<(usize, Vec<u64>)> = paths
        .par_iter()
        .map(|p| {
            let mut counts = vec![0u64; ne];
            crossings_per_endpoint(p, scheme, &mut counts);
            (counts.iter().sum::<u64>() as usize, counts)
        })
        .collect();
    let n = paths.len() as f64;
    let totals: Vec<f64> = per_path.iter().map(|(t, _)| *t as f64).collect();
    let mean = totals.iter().sum::<f64>() / n;
    let var = if paths.len() > 1 { totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let mut per_endpoint = vec![0.0; ne];
    for (_, counts) in &per_path {
        for (acc, c) in per_endpoint.iter_mut().zip(counts) {
            *acc += *c as f64;
        }
    }
    per_endpoint.iter_mut().for_each(|v| *v /= n);
    Ok(GasEstimate { mean_crossings: mean, stderr: (var / n).sqrt(), per_endpoint })
}
