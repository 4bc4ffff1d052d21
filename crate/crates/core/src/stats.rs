//! Sample averages with non-overlapping batch-means standard errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean of a per-sample series and its batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Summarizes `samples`; requires at least ten complete batches.
pub fn summarize(samples: &[f64], batch: usize) -> Result<Summary> {
    let required = 10 * batch;
    if batch == 0 || samples.len() < required {
        return Err(Error::InsufficientSamples {
            available: samples.len(),
            required,
        });
    }
    Ok(batch_means(samples, batch))
}

/// Batch-means summary without the ten-batch floor. Needs two batches for a
/// finite standard error; with fewer, the error is reported as infinite.
pub fn batch_means(samples: &[f64], batch: usize) -> Summary {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let nb = n.checked_div(batch).unwrap_or(0);
    let stderr = if nb < 2 {
        f64::INFINITY
    } else {
        let means: Vec<f64> = samples
            .chunks_exact(batch)
            .map(|c| c.iter().sum::<f64>() / batch as f64)
            .collect();
        let m = means.iter().sum::<f64>() / nb as f64;
        let var = means.iter().map(|b| (b - m) * (b - m)).sum::<f64>() / (nb - 1) as f64;
        (var / nb as f64).sqrt()
    };
    Summary { mean, stderr, n }
}

/// Mean and standard error of i.i.d. samples.
pub fn iid_summary(samples: &[f64]) -> Summary {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n.max(2) - 1) as f64;
    Summary {
        mean,
        stderr: (var / n as f64).sqrt(),
        n,
    }
}

/// `log(Σ exp(x_i))` without overflow; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
