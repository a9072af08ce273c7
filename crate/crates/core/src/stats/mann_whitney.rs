//! Two-sided Mann-Whitney U test.
//!
//! U is the statistic of the first sample: the number of (a, b) pairs with
//! a > b, ties counting one half. Small tie-free samples get the exact null
//! distribution; everything else the normal approximation with tie-corrected
//! variance and continuity correction.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::StatsError;

/// Largest combined sample size that still uses the exact distribution.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    pub u: f64,
    pub p_value: f64,
    pub method: PMethod,
    pub n_a: usize,
    pub n_b: usize,
}

/// Midranks (1-based) of the pooled sample, plus the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// Number of arrangements of `n` a-items and `m` b-items giving each U value,
/// for U = 0..=n·m. Built from f(n, m, u) = f(n−1, m, u−m) + f(n, m−1, u).
pub fn exact_u_counts(n: usize, m: usize) -> Vec<u128> {
    // table[j][u] holds f(i, j, u) for the current i
    let max = n * m;
    let mut table: Vec<Vec<u128>> = (0..=m)
        .map(|_| {
            let mut row = vec![0u128; max + 1];
            row[0] = 1;
            row
        })
        .collect();
    for _ in 1..=n {
        let mut next: Vec<Vec<u128>> = vec![vec![0u128; max + 1]; m + 1];
        next[0][0] = 1;
        for j in 1..=m {
            for u in 0..=max {
                let with_a_last = if u >= j { table[j][u - j] } else { 0 };
                next[j][u] = with_a_last + next[j - 1][u];
            }
        }
        table = next;
    }
    table.swap_remove(m)
}

/// Exact two-sided p of an observed U: 2·min(P(U ≤ u), P(U ≥ u)), capped at 1.
pub fn exact_p(u: f64, n: usize, m: usize) -> Ratio<u128> {
    let counts = exact_u_counts(n, m);
    let total: u128 = counts.iter().sum();
    let u = u.round() as usize;
    let lower: u128 = counts[..=u].iter().sum();
    let upper: u128 = counts[u..].iter().sum();
    let p = Ratio::new(2 * lower.min(upper), total);
    p.min(Ratio::from_integer(1))
}

/// Normal-approximation two-sided p for U, with tie-corrected variance and
/// continuity correction. `ties` lists tie-group sizes; singletons may be omitted.
pub fn normal_p(u: f64, n: usize, m: usize, ties: &[usize]) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (total * (total - 1.0));
    let variance = nf * mf / 12.0 * ((total + 1.0) - tie_term);
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((u - nf * mf / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}

fn check(sample: &[f64], name: &'static str) -> Result<(), StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample(name));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(name));
    }
    Ok(())
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    check(a, "a")?;
    check(b, "b")?;
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n].iter().sum();
    let u = rank_sum_a - (n * (n + 1)) as f64 / 2.0;
    let tied = ties.iter().any(|&t| t > 1);

    if n + m <= EXACT_MAX_N && !tied {
        let p = exact_p(u, n, m);
        let p_value = *p.numer() as f64 / *p.denom() as f64;
        return Ok(MannWhitney { u, p_value, method: PMethod::Exact, n_a: n, n_b: m });
    }

    let p_value = normal_p(u, n, m, &ties);
    Ok(MannWhitney { u, p_value, method: PMethod::Normal, n_a: n, n_b: m })
}

/// Significance level after Bonferroni correction.
pub fn bonferroni(alpha: Ratio<u64>, comparisons: u64) -> Result<Ratio<u64>, StatsError> {
    if comparisons == 0 {
        return Err(StatsError::ZeroComparisons);
    }
    Ok(alpha / comparisons)
}
