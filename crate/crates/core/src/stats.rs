//! Empirical distribution summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub x: f64,
    pub cdf: f64,
}

/// Fraction of `sorted` at or below `x`.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.partition_point(|&s| s <= x) as f64 / sorted.len() as f64
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return Err(Error::EmptySamples);
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Right-continuous empirical CDF on `grid` evenly spaced points over
/// `[min, max]`.
pub fn summarize_cdf(samples: &[f64], grid: usize) -> Result<Vec<CdfPoint>> {
    let v = sorted_finite(samples)?;
    let (lo, hi) = (v[0], v[v.len() - 1]);
    if grid <= 1 || lo == hi {
        return Ok(vec![CdfPoint { x: hi, cdf: 1.0 }]);
    }
    Ok((0..grid)
        .map(|k| {
            let x = if k == grid - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (grid - 1) as f64
            };
            CdfPoint { x, cdf: ecdf(&v, x) }
        })
        .collect())
}

pub fn mean(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Linear-interpolated quantile, `q ∈ [0, 1]`.
pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    let v = sorted_finite(samples)?;
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = pos.ceil() as usize;
    Ok(v[i] + (v[j] - v[i]) * (pos - i as f64))
}

pub fn median(samples: &[f64]) -> Result<f64> {
    quantile(samples, 0.5)
}

/// Total amount by which `ecdf(a)` rises above `ecdf(b)`, integrated over
/// the pooled sample support and normalized by its span.
///
/// Zero means `a` first-order stochastically dominates `b`.
pub fn dominance_violation(a: &[f64], b: &[f64]) -> Result<f64> {
    let sa = sorted_finite(a)?;
    let sb = sorted_finite(b)?;
    let mut pts: Vec<f64> = sa.iter().chain(sb.iter()).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let span = pts[pts.len() - 1] - pts[0];
    if span == 0.0 {
        return Ok(0.0);
    }
    let mut area = 0.0;
    for w in pts.windows(2) {
        let gap = ecdf(&sa, w[0]) - ecdf(&sb, w[0]);
        if gap > 0.0 {
            area += gap * (w[1] - w[0]);
        }
    }
    Ok(area / span)
}

/// Largest pointwise excess `ecdf(a) − ecdf(b)` over the pooled support.
pub fn max_cdf_excess(a: &[f64], b: &[f64]) -> Result<f64> {
    let sa = sorted_finite(a)?;
    let sb = sorted_finite(b)?;
    Ok(sa
        .iter()
        .chain(sb.iter())
        .map(|&x| ecdf(&sa, x) - ecdf(&sb, x))
        .fold(0.0, f64::max))
}
