//! Distribution summaries with nearest-rank percentiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_s: f64,
    pub median_s: f64,
    pub p90_s: f64,
    pub p95_s: f64,
    pub p99_s: f64,
    pub max_s: f64,
}

/// 1-based nearest rank `ceil(p * n / 100)`, at least 1.
pub fn nearest_rank(p: usize, n: usize) -> usize {
    (p * n).div_ceil(100).max(1)
}

/// Mean in input order; median is the lower middle element.
pub fn latency_stats(values: &[f64]) -> Result<LatencyStats> {
    if values.is_empty() {
        return Err(Error::invalid("latency statistics need at least one value"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("latency value {v} is not finite")));
    }
    let n = values.len();
    let mean_s = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = |p: usize| sorted[nearest_rank(p, n) - 1];
    Ok(LatencyStats {
        mean_s,
        median_s: sorted[(n - 1) / 2],
        p90_s: rank(90),
        p95_s: rank(95),
        p99_s: rank(99),
        max_s: sorted[n - 1],
    })
}
