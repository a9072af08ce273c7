//! Synthetic catalog generation.
//!
//! Videos carry topic keywords and stance-typed vocabulary in every text
//! channel, with a small share of tokens drawn from another stance so the
//! classifier faces a learnable but imperfect signal. Popularity is the
//! natural log of a Pareto-distributed view count, so it is exponentially
//! distributed with rate equal to the Pareto shape.

use std::collections::{HashMap, HashSet};
use std::io::{self, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Pareto};
use serde::{Deserialize, Serialize};

use super::PlatformError;
use crate::annotation::LabelRecord;
use crate::classifier::features::tokenize;
use crate::domain::{AnnotationCode, Minutes, ProcessParameters, Stance, Topic, TopicId, VideoId, VideoRecord, MIN_LISTING};
use crate::seed::derive_seed;

/// Topic id of off-topic filler content.
pub const GENERAL_TOPIC: &str = "general";
/// Annotator id of ground-truth labels exported from a catalog.
pub const TRUTH_ANNOTATOR: &str = "simulator-truth";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicCatalog {
    pub topic_id: String,
    pub display_name: String,
    pub queries: Vec<String>,
    pub keywords: Vec<String>,
    pub promoting: u32,
    pub debunking: u32,
    pub neutral: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Vocabulary {
    pub promoting: Vec<String>,
    pub debunking: Vec<String>,
    pub neutral: Vec<String>,
    pub filler: Vec<String>,
    /// Keywords of off-topic videos.
    pub general: Vec<String>,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            promoting: words("truth exposed hidden coverup lies secret wake suppressed whistleblower agenda banned shocking"),
            debunking: words("debunked science facts myth experts explained reality factcheck study physics disproved scientists"),
            neutral: words("news report history documentary interview discussion update story footage archive anniversary"),
            filler: words("the a of and this video watch new today about why how what full part live best people world time day look more"),
            general: words("music cooking gaming travel football tutorial vlog recipe comedy review unboxing workout podcast"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogConfig {
    pub seed: u64,
    pub topics: Vec<TopicCatalog>,
    /// Off-topic neutral videos shared by every home page.
    pub general_videos: u32,
    /// Pareto shape of the popularity draw.
    pub popularity_shape: f64,
    /// Share of stance tokens taken from a different stance.
    pub stance_token_noise: f64,
    pub vocabulary: Vocabulary,
}

fn topic(id: &str, name: &str, queries: &[&str], keywords: &str) -> TopicCatalog {
    TopicCatalog {
        topic_id: id.into(),
        display_name: name.into(),
        queries: queries.iter().map(|q| q.to_string()).collect(),
        keywords: words(keywords),
        promoting: 100,
        debunking: 100,
        neutral: 300,
    }
}

/// The five audited conspiracy topics.
pub fn default_topics() -> Vec<TopicCatalog> {
    vec![
        topic(
            "911",
            "9/11 conspiracies",
            &["9/11 inside job", "9/11 twin towers", "wtc 7 collapse", "twin towers demolition", "september 11 attacks"],
            "911 towers wtc inside job demolition collapse september attacks pentagon",
        ),
        topic(
            "moon_landing",
            "Moon landing hoax",
            &["moon landing", "apollo 11 landing", "moon landing faked", "kubrick moon footage", "nasa apollo moon"],
            "moon landing apollo nasa astronauts lunar kubrick faked flag",
        ),
        topic(
            "chemtrails",
            "Chemtrails",
            &["chemtrails", "chemtrails spraying", "contrails chemtrails", "geoengineering planes", "chemtrails sky"],
            "chemtrails contrails spraying planes sky geoengineering aerosol trails",
        ),
        topic(
            "flat_earth",
            "Flat Earth",
            &["flat earth", "is the earth flat", "flat earth horizon", "globe earth curvature", "flat earth antarctica"],
            "flat earth globe horizon curvature antarctica dome firmament",
        ),
        topic(
            "vaccines",
            "Anti-vaccination",
            &["vaccines autism", "anti vaccination", "vaccine injuries", "mmr vaccine", "vaccine ingredients"],
            "vaccines vaccine autism mmr injuries vaccination ingredients immunity",
        ),
    ]
}

impl Default for CatalogConfig {
    fn default() -> Self {
        CatalogConfig {
            seed: 0,
            topics: default_topics(),
            general_videos: 500,
            popularity_shape: 1.16,
            stance_token_noise: 0.1,
            vocabulary: Vocabulary::default(),
        }
    }
}

impl CatalogConfig {
    pub fn validate(&self) -> Result<(), PlatformError> {
        let invalid = |field, reason: String| Err(PlatformError::InvalidConfig { field, reason });
        if !(self.popularity_shape.is_finite() && self.popularity_shape > 0.0) {
            return invalid("popularity_shape", "must be finite and > 0".into());
        }
        if !(0.0..=1.0).contains(&self.stance_token_noise) {
            return invalid("stance_token_noise", "must lie in [0, 1]".into());
        }
        let v = &self.vocabulary;
        for (field, list) in [
            ("vocabulary.promoting", &v.promoting),
            ("vocabulary.debunking", &v.debunking),
            ("vocabulary.neutral", &v.neutral),
            ("vocabulary.filler", &v.filler),
            ("vocabulary.general", &v.general),
        ] {
            if list.is_empty() {
                return invalid(field, "must not be empty".into());
            }
        }
        let mut ids = HashSet::new();
        let mut queries = HashSet::new();
        for t in &self.topics {
            if t.topic_id.is_empty() || t.topic_id == GENERAL_TOPIC || !ids.insert(t.topic_id.as_str()) {
                return invalid("topics.topic_id", format!("`{}` is empty, reserved or repeated", t.topic_id));
            }
            if t.queries.is_empty() {
                return invalid("topics.queries", format!("topic `{}` has no queries", t.topic_id));
            }
            if t.keywords.is_empty() {
                return invalid("topics.keywords", format!("topic `{}` has no keywords", t.topic_id));
            }
            for q in &t.queries {
                if !queries.insert(q.as_str()) {
                    return invalid("topics.queries", format!("query `{q}` appears in more than one topic"));
                }
            }
        }
        let total: u64 = self.general_videos as u64
            + self.topics.iter().map(|t| (t.promoting + t.debunking + t.neutral) as u64).sum::<u64>();
        if total < MIN_LISTING as u64 {
            return invalid("topics", format!("catalog of {total} videos cannot fill a listing of {MIN_LISTING}"));
        }
        Ok(())
    }

    /// Checks that every topic can supply the seed sets of a run.
    pub fn check_feasible(&self, params: &ProcessParameters) -> Result<(), PlatformError> {
        for t in &self.topics {
            for (stance, have, need) in
                [(Stance::Promoting, t.promoting, params.n_prom), (Stance::Debunking, t.debunking, params.n_deb)]
            {
                if have < need {
                    return Err(PlatformError::Infeasible { topic: TopicId::new(&t.topic_id), stance, have, need });
                }
            }
            if t.queries.len() < params.n_q as usize {
                return Err(PlatformError::InvalidConfig {
                    field: "topics.queries",
                    reason: format!("topic `{}` has {} queries, n_q is {}", t.topic_id, t.queries.len(), params.n_q),
                });
            }
        }
        Ok(())
    }
}

/// Generated catalog plus the static per-video data the ranking uses.
#[derive(Debug, Clone)]
pub struct Catalog {
    videos: Vec<VideoRecord>,
    popularity: Vec<f64>,
    /// Index into `topics`, `None` for off-topic videos.
    topic_of: Vec<Option<usize>>,
    stance_of: Vec<Stance>,
    topics: Vec<Topic>,
    index: HashMap<VideoId, usize>,
    /// Query → (topic index, per-video static relevance).
    queries: HashMap<String, (usize, Vec<f64>)>,
}

/// Serialized catalog line.
#[derive(Debug, Serialize, Deserialize)]
pub struct CatalogEntry {
    #[serde(flatten)]
    pub video: VideoRecord,
    pub popularity: f64,
}

fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

const ID_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

fn video_id(rng: &mut impl Rng, taken: &HashSet<VideoId>) -> VideoId {
    loop {
        let id: String = (0..11).map(|_| ID_ALPHABET[rng.random_range(0..ID_ALPHABET.len())] as char).collect();
        let id = VideoId::new(id);
        if !taken.contains(&id) {
            return id;
        }
    }
}

struct TextGen<'a> {
    vocab: &'a Vocabulary,
    noise: f64,
}

impl TextGen<'_> {
    fn stance_words(&self, stance: Stance) -> &[String] {
        match stance {
            Stance::Promoting => &self.vocab.promoting,
            Stance::Debunking => &self.vocab.debunking,
            Stance::Neutral => &self.vocab.neutral,
        }
    }

    fn stance_token(&self, stance: Stance, rng: &mut impl Rng) -> String {
        let from = if rng.random::<f64>() < self.noise {
            *Stance::ALL.iter().filter(|s| **s != stance).collect::<Vec<_>>().choose(rng).expect("two others")
        } else {
            &stance
        };
        self.stance_words(*from).choose(rng).expect("non-empty").clone()
    }

    /// `len` tokens with the given shares of keywords and stance words.
    fn text(&self, keywords: &[String], stance: Stance, len: usize, kw: f64, st: f64, rng: &mut impl Rng) -> String {
        let tokens: Vec<String> = (0..len)
            .map(|_| {
                let r = rng.random::<f64>();
                if r < kw {
                    keywords.choose(rng).expect("non-empty").clone()
                } else if r < kw + st {
                    self.stance_token(stance, rng)
                } else {
                    self.vocab.filler.choose(rng).expect("non-empty").clone()
                }
            })
            .collect();
        tokens.join(" ")
    }
}

/// Generates the catalog. Byte-identical for identical configs.
pub fn generate_catalog(config: &CatalogConfig) -> Result<Catalog, PlatformError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "catalog"));
    let pareto = Pareto::new(1.0, config.popularity_shape).map_err(|e| PlatformError::InvalidConfig {
        field: "popularity_shape",
        reason: e.to_string(),
    })?;
    let duration = LogNormal::new((600.0f64).ln(), 0.8).expect("valid log-normal");
    let gen = TextGen { vocab: &config.vocabulary, noise: config.stance_token_noise };

    let mut videos = Vec::new();
    let mut raw_pop = Vec::new();
    let mut topic_of = Vec::new();
    let mut taken = HashSet::new();
    let mut plan: Vec<(Option<usize>, Stance, u32)> = Vec::new();
    for (ti, t) in config.topics.iter().enumerate() {
        plan.push((Some(ti), Stance::Promoting, t.promoting));
        plan.push((Some(ti), Stance::Debunking, t.debunking));
        plan.push((Some(ti), Stance::Neutral, t.neutral));
    }
    plan.push((None, Stance::Neutral, config.general_videos));

    for (ti, stance, count) in plan {
        let (topic_id, keywords) = match ti {
            Some(i) => (config.topics[i].topic_id.as_str(), &config.topics[i].keywords),
            None => (GENERAL_TOPIC, &config.vocabulary.general),
        };
        for _ in 0..count {
            let id = video_id(&mut rng, &taken);
            taken.insert(id.clone());
            let title = gen.text(keywords, stance, 7, 0.4, 0.3, &mut rng);
            let description = gen.text(keywords, stance, 20, 0.25, 0.2, &mut rng);
            let transcript = gen.text(keywords, stance, 80, 0.2, 0.15, &mut rng);
            let seconds = duration.sample(&mut rng).clamp(30.0, 3.0 * 3600.0).round() as u32;
            let channel = rng.random_range(0..40u32);
            videos.push(VideoRecord {
                video_id: id,
                topic: TopicId::new(topic_id),
                true_stance: Some(stance),
                title,
                description,
                transcript,
                channel_id: format!("UC-{topic_id}-{channel:02}"),
                duration: Minutes::from_seconds(seconds),
            });
            raw_pop.push(pareto.sample(&mut rng).ln());
            topic_of.push(ti);
        }
    }

    Ok(Catalog::assemble(config, videos, raw_pop, topic_of))
}

impl Catalog {
    fn assemble(config: &CatalogConfig, videos: Vec<VideoRecord>, popularity: Vec<f64>, topic_of: Vec<Option<usize>>) -> Self {
        let topics: Vec<Topic> = config
            .topics
            .iter()
            .map(|t| Topic {
                topic_id: TopicId::new(&t.topic_id),
                display_name: t.display_name.clone(),
                queries: t.queries.clone(),
            })
            .collect();
        let title_tokens: Vec<HashSet<String>> = videos.iter().map(|v| tokenize(&v.title).collect()).collect();
        let mut queries = HashMap::new();
        for (ti, t) in config.topics.iter().enumerate() {
            for q in &t.queries {
                let qt: HashSet<String> = tokenize(q).collect();
                let relevance = (0..videos.len())
                    .map(|i| {
                        let on_topic = if topic_of[i] == Some(ti) { 1.0 } else { 0.0 };
                        on_topic + 0.5 * jaccard(&qt, &title_tokens[i])
                    })
                    .collect();
                queries.insert(q.clone(), (ti, relevance));
            }
        }
        let index = videos.iter().enumerate().map(|(i, v)| (v.video_id.clone(), i)).collect();
        let stance_of = videos.iter().map(|v| v.true_stance.expect("generated videos carry a stance")).collect();
        Catalog { videos, popularity, topic_of, stance_of, topics, index, queries }
    }

    pub fn videos(&self) -> &[VideoRecord] {
        &self.videos
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn topic(&self, id: &TopicId) -> Option<&Topic> {
        self.topics.iter().find(|t| &t.topic_id == id)
    }

    pub fn position(&self, id: &VideoId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn video(&self, id: &VideoId) -> Option<&VideoRecord> {
        self.position(id).map(|i| &self.videos[i])
    }

    pub fn popularity(&self, position: usize) -> f64 {
        self.popularity[position]
    }

    pub(crate) fn stance_at(&self, position: usize) -> Stance {
        self.stance_of[position]
    }

    pub(crate) fn topic_at(&self, position: usize) -> Option<usize> {
        self.topic_of[position]
    }

    pub(crate) fn query_relevance(&self, query: &str) -> Option<&[f64]> {
        self.queries.get(query).map(|(_, r)| r.as_slice())
    }

    /// Videos of a topic with a given stance, most popular first.
    pub fn most_popular(&self, topic: &TopicId, stance: Stance, n: usize) -> Vec<VideoId> {
        let Some(ti) = self.topics.iter().position(|t| &t.topic_id == topic) else {
            return Vec::new();
        };
        let mut members: Vec<usize> =
            (0..self.len()).filter(|&i| self.topic_of[i] == Some(ti) && self.stance_of[i] == stance).collect();
        members.sort_by(|&a, &b| self.popularity[b].total_cmp(&self.popularity[a]).then(a.cmp(&b)));
        members.into_iter().take(n).map(|i| self.videos[i].video_id.clone()).collect()
    }

    /// Class histogram (promoting, neutral, debunking) of a topic.
    pub fn histogram(&self, topic: &TopicId) -> [u32; 3] {
        let mut h = [0u32; 3];
        for v in self.videos.iter().filter(|v| &v.topic == topic) {
            if let Some(s) = v.true_stance {
                h[s.index()] += 1;
            }
        }
        h
    }

    /// Ground-truth stance of every video as manual label records.
    pub fn truth_labels(&self) -> Vec<LabelRecord> {
        self.videos
            .iter()
            .filter_map(|v| {
                v.true_stance.map(|s| LabelRecord::manual(v.video_id.clone(), AnnotationCode::for_stance(s), TRUTH_ANNOTATOR))
            })
            .collect()
    }

    /// One JSON object per line, catalog order.
    pub fn write_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        for (v, &p) in self.videos.iter().zip(&self.popularity) {
            let entry = CatalogEntry { video: v.clone(), popularity: p };
            serde_json::to_writer(&mut out, &entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn export(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut f)?;
        f.flush()
    }
}

/// Reads back the videos of an exported catalog.
pub fn read_catalog_videos(reader: impl io::BufRead) -> io::Result<Vec<VideoRecord>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CatalogEntry = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
        out.push(entry.video);
    }
    Ok(out)
}
