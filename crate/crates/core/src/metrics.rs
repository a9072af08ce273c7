//! Exposure scores over labeled result lists, and the list-similarity
//! measures used to calibrate probing frequency.

use std::collections::HashSet;
use std::hash::Hash;

use thiserror::Error;

use crate::domain::Stance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("score undefined for an empty list")]
    EmptyList,
    #[error("series watch indices must be strictly increasing (index {0} repeats or decreases)")]
    UnorderedSeries(u32),
    #[error("start index {start} must be smaller than end index {end}")]
    BadInterval { start: u32, end: u32 },
    #[error("series has no point at watch index {0}")]
    MissingIndex(u32),
}

/// Stances of a result list in rank order, discarded items already removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScoredList {
    pub stances: Vec<Stance>,
}

impl ScoredList {
    pub fn new(stances: Vec<Stance>) -> Self {
        ScoredList { stances }
    }

    pub fn len(&self) -> usize {
        self.stances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stances.is_empty()
    }
}

impl FromIterator<Stance> for ScoredList {
    fn from_iter<I: IntoIterator<Item = Stance>>(iter: I) -> Self {
        ScoredList { stances: iter.into_iter().collect() }
    }
}

/// Mean stance of the list, ignoring order.
pub fn normalized_score(list: &ScoredList) -> Result<f64, MetricError> {
    if list.is_empty() {
        return Err(MetricError::EmptyList);
    }
    // Integer numerator so the single division is the only rounding step.
    let sum: i64 = list.stances.iter().map(|s| s.value() as i64).sum();
    Ok(sum as f64 / list.len() as f64)
}

/// Rank-weighted stance score: rank r of n carries weight n - r + 1.
pub fn serp_ms(list: &ScoredList) -> Result<f64, MetricError> {
    if list.is_empty() {
        return Err(MetricError::EmptyList);
    }
    let n = list.len() as i64;
    let weighted: i64 = list
        .stances
        .iter()
        .enumerate()
        .map(|(i, s)| s.value() as i64 * (n - i as i64))
        .sum();
    Ok(weighted as f64 / (n * (n + 1) / 2) as f64)
}

/// Normalized score sampled along the watch sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSeries {
    points: Vec<(u32, f64)>,
}

impl ScoreSeries {
    pub fn new(points: Vec<(u32, f64)>) -> Result<Self, MetricError> {
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(MetricError::UnorderedSeries(w[1].0));
            }
        }
        Ok(ScoreSeries { points })
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    pub fn get(&self, watch_index: u32) -> Option<f64> {
        self.points
            .binary_search_by_key(&watch_index, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    pub fn first_index(&self) -> Option<u32> {
        self.points.first().map(|p| p.0)
    }
}

/// Summed deviation of the series from the straight line joining its values
/// at `start` and `end`.
///
/// On a rising segment a positive value means the score rose faster than
/// linearly; on a falling segment a negative value means it fell faster.
pub fn diff_to_linear(series: &ScoreSeries, start: u32, end: u32) -> Result<f64, MetricError> {
    if start >= end {
        return Err(MetricError::BadInterval { start, end });
    }
    let mut values = Vec::with_capacity((end - start + 1) as usize);
    for i in start..=end {
        values.push(series.get(i).ok_or(MetricError::MissingIndex(i))?);
    }
    let ns_s = values[0];
    let ns_e = *values.last().expect("interval has at least two points");
    let slope = (ns_e - ns_s) / (end - start) as f64;
    Ok(values
        .iter()
        .enumerate()
        .map(|(offset, ns_i)| ns_i - ns_s - slope * offset as f64)
        .sum())
}

/// Jaccard overlap of the two lists taken as sets; two empty lists overlap fully.
pub fn list_overlap<T: Eq + Hash>(a: &[T], b: &[T]) -> f64 {
    let sa: HashSet<&T> = a.iter().collect();
    let sb: HashSet<&T> = b.iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Levenshtein distance between two ordered lists.
pub fn sequence_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(x != y);
            cur[j + 1] = substitution.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
