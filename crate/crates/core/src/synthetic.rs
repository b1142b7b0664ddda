//! Deterministic multi-topic toy corpus.
//!
//! Each document picks one topic and walks around that topic's ring of
//! words with steps in `±1..=±max_step`. With probability `noise` a
//! position is replaced by a word drawn uniformly from the whole vocabulary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCorpusConfig {
    pub topics: usize,
    pub words_per_topic: usize,
    pub tokens: usize,
    pub doc_len: usize,
    pub noise: f64,
    pub max_step: usize,
    pub seed: u64,
}

impl Default for TopicCorpusConfig {
    fn default() -> Self {
        TopicCorpusConfig {
            topics: 2,
            words_per_topic: 10,
            tokens: 50_000,
            doc_len: 100,
            noise: 0.05,
            max_step: 2,
            seed: 42,
        }
    }
}

impl TopicCorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.topics == 0 || self.words_per_topic < 2 {
            return Err(Error::InvalidParam("need >= 1 topic of >= 2 words".into()));
        }
        if self.doc_len == 0 {
            return Err(Error::InvalidParam("doc_len must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidParam(format!("noise must be in [0,1], got {}", self.noise)));
        }
        if self.max_step == 0 || self.max_step >= self.words_per_topic {
            return Err(Error::InvalidParam("max_step must be in 1..words_per_topic".into()));
        }
        Ok(())
    }

    pub fn vocabulary_size(&self) -> usize {
        self.topics * self.words_per_topic
    }
}

/// Word `i` of topic `t`.
pub fn topic_word(t: usize, i: usize) -> String {
    format!("t{t}w{i}")
}

/// Topic of a generated word, if it is one.
pub fn word_topic(word: &str) -> Option<usize> {
    let rest = word.strip_prefix('t')?;
    let (t, _) = rest.split_once('w')?;
    t.parse().ok()
}

/// One line per document.
pub fn topic_corpus(cfg: &TopicCorpusConfig) -> Result<Vec<String>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.words_per_topic;
    let step = cfg.max_step as i64;
    let mut docs = Vec::new();
    let mut left = cfg.tokens;
    while left > 0 {
        let len = left.min(cfg.doc_len);
        left -= len;
        let topic = rng.random_range(0..cfg.topics);
        let mut pos = rng.random_range(0..n);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let mut s = rng.random_range(1..=step);
            if rng.random_bool(0.5) {
                s = -s;
            }
            pos = (pos as i64 + s).rem_euclid(n as i64) as usize;
            if rng.random_bool(cfg.noise) {
                let u = rng.random_range(0..cfg.vocabulary_size());
                words.push(topic_word(u / n, u % n));
            } else {
                words.push(topic_word(topic, pos));
            }
        }
        docs.push(words.join(" "));
    }
    Ok(docs)
}
