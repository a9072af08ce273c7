//! Deterministic simulated video platform.
//!
//! A generated catalog is shared read-only between sessions. Each session
//! keeps its own watch history and a per-video score perturbation drawn once
//! from the session seed, so a session is a pure function of
//! (catalog, personalization, seed, call sequence).

pub mod catalog;
pub mod session;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Stance, TopicId, VideoId};
pub use catalog::{generate_catalog, read_catalog_videos, Catalog, CatalogConfig, TopicCatalog, Vocabulary};
pub use session::Session;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlatformError {
    #[error("query `{0}` does not belong to any topic")]
    UnknownQuery(String),
    #[error("video {0} is not in the catalog")]
    UnknownVideo(VideoId),
    #[error("topic {topic} has {have} {stance} videos, {need} needed")]
    Infeasible { topic: TopicId, stance: Stance, have: u32, need: u32 },
    #[error("invalid platform configuration `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

/// Score weights of the ranking model.
///
/// Every listing ranks by a weighted sum of relevance, popularity, stance
/// affinity with the watch history, and the session perturbation. Search
/// personalization is separate from recommendation personalization so one
/// can be switched off without the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonalizationConfig {
    /// w_h, affinity to the stance profile of the whole history.
    pub history_weight: f64,
    /// w_r, affinity to the last `recency_window` watches.
    pub recency_weight: f64,
    /// w_s, history affinity applied to search results.
    pub search_weight: f64,
    /// σ, half-width of the uniform per-video perturbation.
    pub noise_scale: f64,
    /// k
    pub recency_window: u32,
    /// w_p
    pub popularity_weight: f64,
    /// Pseudo-count added to the history length; profile shares grow
    /// gradually instead of saturating after the first watch.
    pub history_prior: f64,
    /// Weight of query or watch-page relevance; large enough that on-topic
    /// videos always outrank off-topic ones.
    pub relevance_weight: f64,
}

pub const PRESET_NAMES: [&str; 2] = ["inert", "contextual"];

impl Default for PersonalizationConfig {
    fn default() -> Self {
        Self::contextual()
    }
}

impl PersonalizationConfig {
    /// No personalization at all.
    pub fn inert() -> Self {
        PersonalizationConfig { history_weight: 0.0, recency_weight: 0.0, search_weight: 0.0, ..Self::contextual() }
    }

    /// Recommendations and home follow recent watches strongly and the
    /// long-term profile weakly; search is not personalized.
    pub fn contextual() -> Self {
        PersonalizationConfig {
            history_weight: 0.1,
            recency_weight: 1.0,
            search_weight: 0.0,
            noise_scale: 0.4,
            recency_window: 5,
            popularity_weight: 1.0,
            history_prior: 20.0,
            relevance_weight: 10.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "inert" => Some(Self::inert()),
            "contextual" => Some(Self::contextual()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), PlatformError> {
        let weights = [
            ("history_weight", self.history_weight),
            ("recency_weight", self.recency_weight),
            ("search_weight", self.search_weight),
            ("noise_scale", self.noise_scale),
            ("popularity_weight", self.popularity_weight),
            ("history_prior", self.history_prior),
            ("relevance_weight", self.relevance_weight),
        ];
        for (field, v) in weights {
            if !v.is_finite() || v < 0.0 {
                return Err(PlatformError::InvalidConfig { field, reason: format!("{v} is not a finite value ≥ 0") });
            }
        }
        if self.recency_window == 0 {
            return Err(PlatformError::InvalidConfig { field: "recency_window", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// Stance counts mapped to per-stance affinities in [−1, 1]:
/// `2·count/denominator − 1`, where the denominator is at least the count sum.
pub(crate) fn affinity(counts: [u32; 3], denominator: f64) -> [f64; 3] {
    if denominator <= 0.0 {
        return [0.0; 3];
    }
    counts.map(|c| 2.0 * c as f64 / denominator - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            PersonalizationConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(PersonalizationConfig::preset("sticky").is_none());
        let inert = PersonalizationConfig::inert();
        assert_eq!((inert.history_weight, inert.recency_weight, inert.search_weight), (0.0, 0.0, 0.0));
        let c = PersonalizationConfig::contextual();
        assert!(c.recency_weight > c.history_weight && c.history_weight > 0.0 && c.search_weight == 0.0);
    }

    #[test]
    fn rejects_negative_or_nan() {
        let bad = PersonalizationConfig { history_weight: -0.1, ..Default::default() };
        assert!(matches!(bad.validate(), Err(PlatformError::InvalidConfig { field: "history_weight", .. })));
        let bad = PersonalizationConfig { noise_scale: f64::NAN, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PersonalizationConfig { recency_window: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn affinity_scaling() {
        assert_eq!(affinity([2, 0, 0], 2.0), [1.0, -1.0, -1.0]);
        assert_eq!(affinity([1, 1, 0], 4.0), [-0.5, -0.5, -1.0]);
        assert_eq!(affinity([0, 0, 0], 0.0), [0.0; 3]);
    }
}
