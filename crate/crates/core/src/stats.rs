//! Estimators used by the security and equivalence checks.

use std::collections::HashMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Plug-in mutual information (bits) of the empirical joint distribution of
/// `(x, y)` pairs.
pub fn mutual_information<I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (u64, u64)>,
{
    let mut joint: HashMap<(u64, u64), f64> = HashMap::new();
    let mut px: HashMap<u64, f64> = HashMap::new();
    let mut py: HashMap<u64, f64> = HashMap::new();
    let mut n = 0.0;
    for (x, y) in pairs {
        *joint.entry((x, y)).or_default() += 1.0;
        *px.entry(x).or_default() += 1.0;
        *py.entry(y).or_default() += 1.0;
        n += 1.0;
    }
    if n == 0.0 {
        return 0.0;
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| c / n * ((c * n) / (px[&x] * py[&y])).log2())
        .sum();
    mi.max(0.0)
}

/// Upper-tail p-value of Pearson's chi-square test that `counts` are
/// uniform over their bins.
pub fn chi_square_uniform_p(counts: &[u64]) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::Argument("chi-square needs at least two bins".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Argument("chi-square needs at least one observation".into()));
    }
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64)
        .map_err(|e| Error::Argument(e.to_string()))?;
    Ok(dist.sf(stat))
}

/// Total-variation distance `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Normalised histogram of `values` over `0..bins`.
pub fn empirical_distribution(values: impl IntoIterator<Item = u64>, bins: usize) -> Vec<f64> {
    let mut counts = vec![0u64; bins];
    let mut n = 0u64;
    for v in values {
        counts[v as usize] += 1;
        n += 1;
    }
    counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
}

/// Standard error of a binomial proportion with success probability `p`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
