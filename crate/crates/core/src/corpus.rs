//! Tokenization, vocabulary construction, subsampling and window pair extraction.
//!
//! A corpus is UTF-8 text with one document per line. Windows never cross a
//! line boundary.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Lowercase, split on whitespace and strip leading/trailing non-alphanumerics.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|raw| {
        let tok = raw.trim_matches(|c: char| !c.is_alphanumeric());
        if tok.is_empty() {
            None
        } else {
            Some(tok.to_lowercase())
        }
    })
}

/// Word <-> id mapping with corpus counts.
///
/// Ids are assigned by descending count, ties broken lexicographically, so
/// the same corpus always yields the same ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
    min_count: u64,
}

impl Vocabulary {
    /// Build from raw `(word, count)` observations, keeping words with
    /// `count >= min_count`. `total_tokens` counts every observed token,
    /// retained or not.
    pub fn from_counts<I>(counts: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (w, n) in counts {
            *merged.entry(w).or_insert(0) += n;
        }
        let total_tokens = merged.values().sum();
        let mut entries: Vec<(String, u64)> = merged
            .into_iter()
            .filter(|&(_, n)| n >= min_count && n > 0)
            .collect();
        if entries.is_empty() {
            return Err(Error::EmptyCorpus { min_count });
        }
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Self::from_sorted(entries, total_tokens, min_count))
    }

    fn from_sorted(entries: Vec<(String, u64)>, total_tokens: u64, min_count: u64) -> Self {
        let (words, counts): (Vec<String>, Vec<u64>) = entries.into_iter().unzip();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary {
            words,
            counts,
            index,
            total_tokens,
            min_count,
        }
    }

    /// Count tokens over an iterator of documents.
    pub fn from_documents<'a, I>(docs: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for doc in docs {
            for tok in tokenize(doc) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        Self::from_counts(counts, min_count)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Relative corpus frequency `count / total_tokens`.
    pub fn frequency(&self, id: u32) -> f64 {
        self.counts[id as usize] as f64 / self.total_tokens as f64
    }

    /// Write `word<TAB>count` lines; the line number is the id.
    ///
    /// The file does not carry `total_tokens`; a reloaded vocabulary uses
    /// the sum of retained counts instead.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (w, n) in self.words.iter().zip(&self.counts) {
            writeln!(out, "{w}\t{n}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(f);
        self.write_tsv(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashMap::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (w, n) = line
                .split_once('\t')
                .ok_or_else(|| Error::format("vocabulary", lineno + 1, "expected word<TAB>count"))?;
            let n: u64 = n
                .parse()
                .map_err(|_| Error::format("vocabulary", lineno + 1, format!("bad count `{n}`")))?;
            if seen.insert(w.to_string(), ()).is_some() {
                return Err(Error::format(
                    "vocabulary",
                    lineno + 1,
                    format!("duplicate word `{w}`"),
                ));
            }
            if let Some((pw, pn)) = entries.last() {
                let ordered = *pn > n || (*pn == n && pw < &w.to_string());
                if !ordered {
                    return Err(Error::format(
                        "vocabulary",
                        lineno + 1,
                        "entries must be sorted by descending count then word",
                    ));
                }
            }
            entries.push((w.to_string(), n));
        }
        if entries.is_empty() {
            return Err(Error::EmptyCorpus { min_count: 0 });
        }
        let total = entries.iter().map(|e| e.1).sum();
        let min = entries.iter().map(|e| e.1).min().unwrap_or(0);
        Ok(Self::from_sorted(entries, total, min))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(f))
    }
}

/// Count the tokens of a corpus file (one document per line).
pub fn build_vocabulary(corpus_path: &Path, min_count: u64) -> Result<Vocabulary> {
    let f = File::open(corpus_path).map_err(|e| Error::io(corpus_path, e))?;
    let mut counts: HashMap<String, u64> = HashMap::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(corpus_path, e))?;
        for tok in tokenize(&line) {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    Vocabulary::from_counts(counts, min_count)
}

/// Documents as sequences of vocabulary ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    docs: Vec<Vec<u32>>,
}

impl TokenStream {
    pub fn new(docs: Vec<Vec<u32>>) -> Self {
        TokenStream { docs }
    }

    /// Map each text to ids, dropping out-of-vocabulary tokens.
    pub fn from_texts<'a, I>(texts: I, vocab: &Vocabulary) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let docs = texts
            .into_iter()
            .map(|t| tokenize(t).filter_map(|tok| vocab.id(&tok)).collect())
            .collect();
        TokenStream { docs }
    }

    pub fn from_path(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut docs = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            docs.push(tokenize(&line).filter_map(|tok| vocab.id(&tok)).collect());
        }
        Ok(TokenStream { docs })
    }

    pub fn docs(&self) -> &[Vec<u32>] {
        &self.docs
    }

    pub fn num_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    pub fn into_docs(self) -> Vec<Vec<u32>> {
        self.docs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsampleConfig {
    /// Relative frequency threshold; `f64::INFINITY` disables subsampling.
    pub t: f64,
    pub seed: u64,
}

impl SubsampleConfig {
    pub fn new(t: f64, seed: u64) -> Result<Self> {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "subsample threshold must be > 0, got {t}"
            )));
        }
        Ok(SubsampleConfig { t, seed })
    }
}

/// Probability of removing one occurrence of a word with relative
/// frequency `freq`, clamped to `[0, 1]`.
pub fn removal_probability(freq: f64, t: f64) -> f64 {
    if freq <= 0.0 {
        return 0.0;
    }
    (1.0 - (t / freq).sqrt()).clamp(0.0, 1.0)
}

/// Randomly drop frequent-word occurrences and compact the survivors.
///
/// Each document draws from its own ChaCha stream (selected by document
/// index) with exactly one draw per position, so the decision for a token
/// depends only on `(seed, document, position)`.
pub fn subsample(stream: &TokenStream, vocab: &Vocabulary, cfg: &SubsampleConfig) -> TokenStream {
    let drop_p: Vec<f64> = (0..vocab.len() as u32)
        .map(|id| removal_probability(vocab.frequency(id), cfg.t))
        .collect();
    let docs = stream
        .docs
        .par_iter()
        .enumerate()
        .map(|(doc_idx, doc)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(doc_idx as u64);
            doc.iter()
                .copied()
                .filter(|&id| {
                    let u: f64 = rng.random();
                    u >= drop_p[id as usize]
                })
                .collect()
        })
        .collect();
    TokenStream { docs }
}

/// Ordered `(word, context)` pairs of one document for a fixed symmetric window.
pub fn doc_pairs(doc: &[u32], window: usize) -> impl Iterator<Item = (u32, u32)> + '_ {
    let n = doc.len();
    (0..n).flat_map(move |i| {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(n.saturating_sub(1));
        (lo..=hi)
            .filter(move |&j| j != i && window > 0)
            .map(move |j| (doc[i], doc[j]))
    })
}

/// All window pairs of a stream. Each unordered co-occurrence yields both
/// ordered pairs, so the resulting multiset is symmetric.
pub fn extract_pairs(stream: &TokenStream, window: usize) -> impl Iterator<Item = (u32, u32)> + '_ {
    stream.docs.iter().flat_map(move |d| doc_pairs(d, window))
}

/// Number of pairs `extract_pairs` emits for a document of length `len`.
pub fn pair_count(len: usize, window: usize) -> u64 {
    (0..len)
        .map(|i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(len - 1);
            (hi - lo) as u64
        })
        .sum()
}
