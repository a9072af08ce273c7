//! Hashed bag-of-tokens text features.
//!
//! Three channels, each a fixed-width block: snippet (title and description),
//! transcript, comments. Tokens are lowercased alphanumeric runs, hashed with
//! FNV-1a into the block, counted, and the block is L2-normalized. An empty
//! channel is an all-zero block.

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::domain::VideoRecord;

pub const DEFAULT_DIMS_PER_CHANNEL: usize = 128;
pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// View of one channel block.
    pub fn channel(&self, index: usize, dims: usize) -> &[f64] {
        &self.values[index * dims..(index + 1) * dims]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Featurizer {
    pub dims_per_channel: usize,
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer { dims_per_channel: DEFAULT_DIMS_PER_CHANNEL }
    }
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Featurizer {
    pub fn width(&self) -> usize {
        self.dims_per_channel * CHANNELS
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dims_per_channel as u64) as usize
    }

    fn encode_channel(&self, texts: &[&str], out: &mut [f64]) -> bool {
        let mut any = false;
        for text in texts {
            for token in tokenize(text) {
                out[self.bucket(&token)] += 1.0;
                any = true;
            }
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
        any
    }

    /// Encodes raw channel texts.
    pub fn encode(&self, snippet: &[&str], transcript: &str, comments: &[String]) -> Result<FeatureVector, ClassifierError> {
        let d = self.dims_per_channel;
        let mut values = vec![0.0; self.width()];
        let comment_refs: Vec<&str> = comments.iter().map(String::as_str).collect();
        let a = self.encode_channel(snippet, &mut values[..d]);
        let b = self.encode_channel(&[transcript], &mut values[d..2 * d]);
        let c = self.encode_channel(&comment_refs, &mut values[2 * d..]);
        if !(a || b || c) {
            return Err(ClassifierError::Unfeaturizable);
        }
        Ok(FeatureVector { values })
    }

    pub fn featurize(&self, video: &VideoRecord, comments: &[String]) -> Result<FeatureVector, ClassifierError> {
        self.encode(&[&video.title, &video.description], &video.transcript, comments)
            .map_err(|_| ClassifierError::UnfeaturizableVideo(video.video_id.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Minutes, TopicId, VideoId};

    fn video(title: &str, transcript: &str) -> VideoRecord {
        VideoRecord {
            video_id: VideoId::from("v"),
            topic: TopicId::from("t"),
            true_stance: None,
            title: title.into(),
            description: String::new(),
            transcript: transcript.into(),
            channel_id: "c".into(),
            duration: Minutes::whole(3),
        }
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn tokenization() {
        let t: Vec<String> = tokenize("Moon-Landing: FAKE?! 1969").collect();
        assert_eq!(t, ["moon", "landing", "fake", "1969"]);
    }

    #[test]
    fn deterministic() {
        let f = Featurizer::default();
        let a = f.featurize(&video("Flat earth proof", "the horizon"), &[]).unwrap();
        let b = f.featurize(&video("Flat earth proof", "the horizon"), &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), f.width());
    }

    #[test]
    fn empty_transcript_is_zero_block() {
        let f = Featurizer::default();
        let v = f.featurize(&video("chemtrails exposed", ""), &[]).unwrap();
        let d = f.dims_per_channel;
        assert!(v.channel(1, d).iter().all(|x| *x == 0.0));
        assert!(v.channel(2, d).iter().all(|x| *x == 0.0));
        let norm: f64 = v.channel(0, d).iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_channels_empty() {
        let f = Featurizer::default();
        assert!(matches!(f.featurize(&video("", " -- "), &[]), Err(ClassifierError::UnfeaturizableVideo(_))));
    }

    #[test]
    fn disjoint_tokens_are_orthogonal() {
        let f = Featurizer::default();
        let left = ["vaccine", "autism", "hidden"];
        let right = ["moon", "landing", "studio"];
        // the two token sets must land in disjoint buckets for the claim to hold
        let lb: Vec<usize> = left.iter().map(|t| f.bucket(t)).collect();
        let rb: Vec<usize> = right.iter().map(|t| f.bucket(t)).collect();
        assert!(lb.iter().all(|b| !rb.contains(b)), "pick other tokens: {lb:?} {rb:?}");
        let a = f.featurize(&video(&left.join(" "), ""), &[]).unwrap();
        let b = f.featurize(&video(&right.join(" "), ""), &[]).unwrap();
        let d = f.dims_per_channel;
        assert_eq!(cosine(a.channel(0, d), b.channel(0, d)), 0.0);
    }
}
