//! User sessions against a shared catalog.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{affinity, Catalog, PersonalizationConfig, PlatformError};
use crate::domain::{Minutes, VideoId};

/// One simulated user. History is append-only between resets.
#[derive(Debug, Clone)]
pub struct Session {
    catalog: Arc<Catalog>,
    config: PersonalizationConfig,
    session_id: String,
    seed: u64,
    /// Static per-video perturbation, redrawn from `seed` on reset.
    noise: Vec<f64>,
    history: Vec<(usize, Minutes)>,
    /// Stance counts of the whole history, indexed by `Stance::index`.
    counts: [u32; 3],
}

fn draw_noise(len: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if scale > 0.0 {
        (0..len).map(|_| rng.random_range(-scale..=scale)).collect()
    } else {
        vec![0.0; len]
    }
}

/// Positions of the `limit` highest scores, best first; ties go to the lower position.
fn top_positions(scores: &[f64], exclude: Option<usize>, limit: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| Some(i) != exclude).collect();
    let order = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if limit < idx.len() {
        idx.select_nth_unstable_by(limit, order);
        idx.truncate(limit);
    }
    idx.sort_unstable_by(order);
    idx
}

impl Session {
    pub fn new(catalog: Arc<Catalog>, config: PersonalizationConfig, session_id: impl Into<String>, seed: u64) -> Self {
        let noise = draw_noise(catalog.len(), config.noise_scale, seed);
        Session { catalog, config, session_id: session_id.into(), seed, noise, history: Vec::new(), counts: [0; 3] }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn history(&self) -> Vec<(VideoId, Minutes)> {
        self.history.iter().map(|(i, m)| (self.catalog.videos()[*i].video_id.clone(), *m)).collect()
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    fn history_affinity(&self) -> [f64; 3] {
        affinity(self.counts, self.history.len() as f64 + self.config.history_prior)
    }

    fn recency_affinity(&self) -> [f64; 3] {
        let k = self.config.recency_window as usize;
        let mut counts = [0u32; 3];
        for (i, _) in self.history.iter().rev().take(k) {
            counts[self.catalog.stance_at(*i).index()] += 1;
        }
        affinity(counts, if self.history.is_empty() { 0.0 } else { k as f64 })
    }

    fn base_score(&self, i: usize) -> f64 {
        self.config.popularity_weight * self.catalog.popularity(i) + self.noise[i]
    }

    fn ids(&self, positions: Vec<usize>) -> Vec<VideoId> {
        positions.into_iter().map(|i| self.catalog.videos()[i].video_id.clone()).collect()
    }

    /// Ranked search results for a query of a known topic.
    pub fn search(&self, query: &str, limit: usize) -> Result<Vec<VideoId>, PlatformError> {
        let relevance = self.catalog.query_relevance(query).ok_or_else(|| PlatformError::UnknownQuery(query.into()))?;
        let aff = self.history_affinity();
        let w = self.config.search_weight;
        let scores: Vec<f64> = (0..self.catalog.len())
            .map(|i| self.config.relevance_weight * relevance[i] + self.base_score(i) + w * aff[self.catalog.stance_at(i).index()])
            .collect();
        Ok(self.ids(top_positions(&scores, None, limit)))
    }

    fn personalized_scores(&self, context_topic: Option<Option<usize>>) -> Vec<f64> {
        let h = self.history_affinity();
        let r = self.recency_affinity();
        let (wh, wr) = (self.config.history_weight, self.config.recency_weight);
        (0..self.catalog.len())
            .map(|i| {
                let s = self.catalog.stance_at(i).index();
                let relevance = match context_topic {
                    Some(t) if t.is_some() && self.catalog.topic_at(i) == t => self.config.relevance_weight,
                    _ => 0.0,
                };
                relevance + self.base_score(i) + wh * h[s] + wr * r[s]
            })
            .collect()
    }

    /// Records a watch and returns (watch-page recommendations, home page).
    /// The watched video never recommends itself.
    pub fn watch(&mut self, video: &VideoId, minutes: Minutes, limit: usize) -> Result<(Vec<VideoId>, Vec<VideoId>), PlatformError> {
        let pos = self.catalog.position(video).ok_or_else(|| PlatformError::UnknownVideo(video.clone()))?;
        self.history.push((pos, minutes));
        self.counts[self.catalog.stance_at(pos).index()] += 1;
        let rec_scores = self.personalized_scores(Some(self.catalog.topic_at(pos)));
        let recs = self.ids(top_positions(&rec_scores, Some(pos), limit));
        Ok((recs, self.home(limit)))
    }

    /// Home page listing; does not touch the history.
    pub fn home(&self, limit: usize) -> Vec<VideoId> {
        self.ids(top_positions(&self.personalized_scores(None), None, limit))
    }

    /// Empties the history and restores the session to its freshly created state.
    pub fn reset_history(&mut self) {
        self.history.clear();
        self.counts = [0; 3];
        self.noise = draw_noise(self.catalog.len(), self.config.noise_scale, self.seed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Stance, TopicId};
    use crate::platform::catalog::{generate_catalog, CatalogConfig};

    fn catalog() -> Arc<Catalog> {
        let mut c = CatalogConfig { seed: 11, general_videos: 50, ..Default::default() };
        c.topics.truncate(2);
        Arc::new(generate_catalog(&c).unwrap())
    }

    #[test]
    fn top_positions_orders_and_breaks_ties() {
        let s = [0.5, 2.0, 2.0, -1.0, 3.0];
        assert_eq!(top_positions(&s, None, 3), [4, 1, 2]);
        assert_eq!(top_positions(&s, Some(4), 2), [1, 2]);
        assert_eq!(top_positions(&s, None, 10), [4, 1, 2, 0, 3]);
    }

    #[test]
    fn history_grows_by_one_per_watch() {
        let cat = catalog();
        let mut s = Session::new(cat.clone(), PersonalizationConfig::contextual(), "s", 1);
        let seeds = cat.most_popular(&TopicId::from("911"), Stance::Promoting, 5);
        for (n, v) in seeds.iter().enumerate() {
            let (recs, home) = s.watch(v, Minutes::whole(3), 20).unwrap();
            assert_eq!(s.history_len(), n + 1);
            assert_eq!((recs.len(), home.len()), (20, 20));
            assert!(!recs.contains(v));
        }
    }

    #[test]
    fn unknown_inputs() {
        let mut s = Session::new(catalog(), PersonalizationConfig::contextual(), "s", 1);
        assert!(matches!(s.search("how to bake bread", 20), Err(PlatformError::UnknownQuery(_))));
        assert!(matches!(s.watch(&VideoId::from("nope"), Minutes::whole(1), 20), Err(PlatformError::UnknownVideo(_))));
        assert_eq!(s.history_len(), 0);
    }

    #[test]
    fn fresh_home_without_noise_is_popularity_order() {
        let cat = catalog();
        let cfg = PersonalizationConfig { noise_scale: 0.0, ..PersonalizationConfig::contextual() };
        let s = Session::new(cat.clone(), cfg, "s", 3);
        let home = s.home(20);
        let pops: Vec<f64> = home.iter().map(|id| cat.popularity(cat.position(id).unwrap())).collect();
        assert!(pops.windows(2).all(|w| w[0] >= w[1]));
        let max = (0..cat.len()).map(|i| cat.popularity(i)).fold(0.0, f64::max);
        assert_eq!(pops[0], max);
    }

    #[test]
    fn reset_twice_is_idempotent() {
        let cat = catalog();
        let mut s = Session::new(cat.clone(), PersonalizationConfig::contextual(), "s", 9);
        let v = cat.most_popular(&TopicId::from("911"), Stance::Promoting, 1);
        s.watch(&v[0], Minutes::whole(2), 20).unwrap();
        s.reset_history();
        let once = s.home(20);
        s.reset_history();
        assert_eq!(s.home(20), once);
        assert_eq!(s.history_len(), 0);
    }
}
