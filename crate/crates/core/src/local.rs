//! Query-local adaptation of explicit representations.
//!
//! The top `k` documents for a query (ranked by Dirichlet-smoothed query
//! likelihood) supply local statistics. A feature `f(w, c, F)` computed
//! from them drives a logistic gate on every stored cell:
//! `v'(w,c) = v(w,c) * sigma(a + b f(w,c,F))`.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use crate::cooc::{CoocBuilder, CoocTable};
use crate::corpus::{doc_pairs, tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::matrix::{BuilderTag, ExplicitMatrix};
use crate::neighbors::{neighbors_by_id, Representation};
use crate::sgns::sigmoid;

/// Paragraph separator inside a single-line document.
pub const PARAGRAPH_MARK: char = '\u{b6}';

/// Unit within which `f3` counts co-occurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Window(usize),
    Paragraph,
    Document,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::Window(n) => write!(f, "window{n}"),
            Granularity::Paragraph => f.write_str("paragraph"),
            Granularity::Document => f.write_str("document"),
        }
    }
}

/// Pairs of every position with every other position in `tokens`.
fn add_all_pairs(b: &mut CoocBuilder, tokens: &[u32]) -> Result<()> {
    let mut tf: HashMap<u32, u64> = HashMap::new();
    for &t in tokens {
        *tf.entry(t).or_insert(0) += 1;
    }
    for (&w, &nw) in &tf {
        for (&c, &nc) in &tf {
            let n = if w == c { nw * (nw - 1) } else { nw * nc };
            if n > 0 {
                b.add_count(w, c, n)?;
            }
        }
    }
    Ok(())
}

fn add_doc_pairs(b: &mut CoocBuilder, paragraphs: &[Vec<u32>], tokens: &[u32], g: Granularity) -> Result<()> {
    match g {
        Granularity::Window(n) => {
            for (w, c) in doc_pairs(tokens, n) {
                b.add(w, c)?;
            }
        }
        Granularity::Paragraph => {
            for p in paragraphs {
                add_all_pairs(b, p)?;
            }
        }
        Granularity::Document => add_all_pairs(b, tokens)?,
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Document {
    id: String,
    paragraphs: Vec<Vec<u32>>,
    tokens: Vec<u32>,
}

/// The global collection `C` with its language model and pair set `X_C`.
#[derive(Debug, Clone)]
pub struct DocumentCollection {
    docs: Vec<Document>,
    num_words: usize,
    term_counts: Vec<u64>,
    total_len: u64,
    granularity: Granularity,
    pairs: CoocTable,
}

impl DocumentCollection {
    /// Build from `(doc id, paragraphs of token ids)`.
    pub fn new(
        docs: Vec<(String, Vec<Vec<u32>>)>,
        num_words: usize,
        granularity: Granularity,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Retrieval("empty document collection".into()));
        }
        if let Granularity::Window(0) = granularity {
            return Err(Error::InvalidParam("window must be >= 1".into()));
        }
        let docs: Vec<Document> = docs
            .into_iter()
            .map(|(id, paragraphs)| {
                let tokens = paragraphs.concat();
                Document {
                    id,
                    paragraphs,
                    tokens,
                }
            })
            .collect();
        let mut term_counts = vec![0u64; num_words];
        let mut b = CoocBuilder::new(num_words);
        for d in &docs {
            for &t in &d.tokens {
                let slot = term_counts.get_mut(t as usize).ok_or_else(|| {
                    Error::InvalidParam(format!("token id {t} outside vocabulary"))
                })?;
                *slot += 1;
            }
            add_doc_pairs(&mut b, &d.paragraphs, &d.tokens, granularity)?;
        }
        let total_len = term_counts.iter().sum();
        if total_len == 0 {
            return Err(Error::Retrieval("document collection has no in-vocabulary tokens".into()));
        }
        Ok(DocumentCollection {
            docs,
            num_words,
            term_counts,
            total_len,
            granularity,
            pairs: b.finish()?,
        })
    }

    /// One document per line, optionally `docid<TAB>text`; paragraphs are
    /// separated by [`PARAGRAPH_MARK`]. Out-of-vocabulary tokens are dropped.
    pub fn from_texts<'a, I>(lines: I, vocab: &Vocabulary, granularity: Granularity) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let docs = lines
            .into_iter()
            .enumerate()
            .map(|(i, line)| {
                let (id, text) = match line.split_once('\t') {
                    Some((id, text)) => (id.to_string(), text),
                    None => (i.to_string(), line),
                };
                let paragraphs = text
                    .split(PARAGRAPH_MARK)
                    .map(|p| tokenize(p).filter_map(|t| vocab.id(&t)).collect())
                    .collect();
                (id, paragraphs)
            })
            .collect();
        Self::new(docs, vocab.len(), granularity)
    }

    pub fn load(path: &Path, vocab: &Vocabulary, granularity: Granularity) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<String> = BufReader::new(f)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(path, e))?;
        Self::from_texts(lines.iter().map(String::as_str), vocab, granularity)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    pub fn doc_id(&self, d: usize) -> &str {
        &self.docs[d].id
    }

    pub fn doc_tokens(&self, d: usize) -> &[u32] {
        &self.docs[d].tokens
    }

    /// `|d|`
    pub fn doc_len(&self, d: usize) -> u64 {
        self.docs[d].tokens.len() as u64
    }

    /// `f(w, C)`
    pub fn term_count(&self, w: u32) -> u64 {
        self.term_counts[w as usize]
    }

    /// `sum_{d in C} |d|`
    pub fn total_len(&self) -> u64 {
        self.total_len
    }

    /// `p(w|C)`
    pub fn collection_prob(&self, w: u32) -> f64 {
        self.term_counts[w as usize] as f64 / self.total_len as f64
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    /// `X_C`
    pub fn pairs(&self) -> &CoocTable {
        &self.pairs
    }
}

/// `(f(w,d) + mu p(w|C)) / (|d| + mu)`; an empty document with `mu = 0`
/// falls back to the collection model.
pub fn dirichlet_prob(count_in_doc: u64, doc_len: u64, p_collection: f64, mu: f64) -> f64 {
    let denom = doc_len as f64 + mu;
    if denom == 0.0 {
        return p_collection;
    }
    (count_in_doc as f64 + mu * p_collection) / denom
}

/// Full smoothed language model of document `d` over the vocabulary.
pub fn dirichlet_lm(coll: &DocumentCollection, d: usize, mu: f64) -> Result<Vec<f64>> {
    if mu.is_nan() || mu < 0.0 {
        return Err(Error::InvalidParam(format!("mu must be >= 0, got {mu}")));
    }
    let mut tf = vec![0u64; coll.num_words];
    for &t in coll.doc_tokens(d) {
        tf[t as usize] += 1;
    }
    let len = coll.doc_len(d);
    Ok((0..coll.num_words as u32)
        .map(|w| dirichlet_prob(tf[w as usize], len, coll.collection_prob(w), mu))
        .collect())
}

/// Language model `theta_d` of one retrieved document.
#[derive(Debug, Clone)]
struct DocModel {
    doc: usize,
    tf: HashMap<u32, u64>,
    len: u64,
    /// `prod_{q in Q} p(q | theta_d)`
    query_lik: f64,
}

/// Statistics of the top-ranked documents `F` for one query.
#[derive(Debug, Clone)]
pub struct LocalContext<'a> {
    coll: &'a DocumentCollection,
    query: Vec<u32>,
    mu: f64,
    top: Vec<(usize, f64)>,
    models: Vec<DocModel>,
    local_counts: HashMap<u32, u64>,
    local_len: u64,
    local_pairs: CoocTable,
}

/// Rank all documents by `sum_q ln p(q|theta_d)` and keep the top `k`
/// (ties by ascending document index).
pub fn retrieve<'a>(query: &[u32], coll: &'a DocumentCollection, k: usize, mu: f64) -> Result<LocalContext<'a>> {
    if query.is_empty() {
        return Err(Error::Retrieval("empty query".into()));
    }
    if k < 1 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    if mu.is_nan() || mu < 0.0 {
        return Err(Error::InvalidParam(format!("mu must be >= 0, got {mu}")));
    }
    if let Some(q) = query.iter().find(|&&q| q as usize >= coll.num_words) {
        return Err(Error::InvalidParam(format!("query id {q} outside vocabulary")));
    }
    let tf_of = |d: usize| {
        let mut tf: HashMap<u32, u64> = HashMap::new();
        for &t in coll.doc_tokens(d) {
            *tf.entry(t).or_insert(0) += 1;
        }
        tf
    };
    let mut scored: Vec<(usize, f64)> = (0..coll.len())
        .map(|d| {
            let tf = tf_of(d);
            let len = coll.doc_len(d);
            let s = query
                .iter()
                .map(|&q| {
                    dirichlet_prob(tf.get(&q).copied().unwrap_or(0), len, coll.collection_prob(q), mu).ln()
                })
                .sum::<f64>();
            (d, s)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(LocalContext::from_docs(coll, query.to_vec(), scored, mu))
}

impl<'a> LocalContext<'a> {
    /// Local context over an explicit document set with given scores.
    pub fn from_docs(coll: &'a DocumentCollection, query: Vec<u32>, top: Vec<(usize, f64)>, mu: f64) -> Self {
        let mut local_counts: HashMap<u32, u64> = HashMap::new();
        let mut local_len = 0;
        let mut b = CoocBuilder::new(coll.num_words);
        let mut models = Vec::with_capacity(top.len());
        for &(d, _) in &top {
            let doc = &coll.docs[d];
            let mut tf: HashMap<u32, u64> = HashMap::new();
            for &t in &doc.tokens {
                *tf.entry(t).or_insert(0) += 1;
                *local_counts.entry(t).or_insert(0) += 1;
            }
            local_len += doc.tokens.len() as u64;
            add_doc_pairs(&mut b, &doc.paragraphs, &doc.tokens, coll.granularity)
                .expect("local counts are bounded by global counts");
            let len = doc.tokens.len() as u64;
            let query_lik = query
                .iter()
                .map(|&q| dirichlet_prob(tf.get(&q).copied().unwrap_or(0), len, coll.collection_prob(q), mu))
                .product();
            models.push(DocModel {
                doc: d,
                tf,
                len,
                query_lik,
            });
        }
        LocalContext {
            coll,
            query,
            mu,
            top,
            models,
            local_counts,
            local_len,
            local_pairs: b.finish().expect("local counts are bounded by global counts"),
        }
    }

    /// Every document of the collection, unscored.
    pub fn whole_collection(coll: &'a DocumentCollection, query: Vec<u32>, mu: f64) -> Self {
        let top = (0..coll.len()).map(|d| (d, 0.0)).collect();
        Self::from_docs(coll, query, top, mu)
    }

    pub fn collection(&self) -> &'a DocumentCollection {
        self.coll
    }

    pub fn query(&self) -> &[u32] {
        &self.query
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Retrieved `(document index, score)` in rank order.
    pub fn top_docs(&self) -> &[(usize, f64)] {
        &self.top
    }

    /// `f(c, F)`
    pub fn local_count(&self, c: u32) -> u64 {
        self.local_counts.get(&c).copied().unwrap_or(0)
    }

    /// `sum_{d in F} |d|`
    pub fn local_len(&self) -> u64 {
        self.local_len
    }

    /// `X_F`
    pub fn local_pairs(&self) -> &CoocTable {
        &self.local_pairs
    }

    /// `p(w | theta_d)` for the `i`-th retrieved document.
    pub fn doc_prob(&self, i: usize, w: u32) -> f64 {
        let m = &self.models[i];
        dirichlet_prob(
            m.tf.get(&w).copied().unwrap_or(0),
            m.len,
            self.coll.collection_prob(w),
            self.mu,
        )
    }

    /// `prod_q p(q | theta_d)` for the `i`-th retrieved document.
    pub fn query_likelihood(&self, i: usize) -> f64 {
        self.models[i].query_lik
    }

    pub fn num_docs(&self) -> usize {
        self.models.len()
    }

    /// Document index in the collection of the `i`-th retrieved document.
    pub fn doc_index(&self, i: usize) -> usize {
        self.models[i].doc
    }
}

/// Indicator of `c` occurring in the local documents.
pub fn f1(c: u32, ctx: &LocalContext<'_>) -> f64 {
    if ctx.local_count(c) > 0 {
        1.0
    } else {
        0.0
    }
}

/// `p(c|F) / p(c|C)`; 0 when `c` never occurs in the collection.
pub fn f2(c: u32, ctx: &LocalContext<'_>) -> f64 {
    let global = ctx.coll.term_count(c);
    if global == 0 || ctx.local_len == 0 {
        return 0.0;
    }
    let local = ctx.local_count(c) as f64 / ctx.local_len as f64;
    local / (global as f64 / ctx.coll.total_len as f64)
}

/// `p(w,c|X_F) / p(w,c|X_C)`; 0 when the pair never co-occurs globally.
pub fn f3(w: u32, c: u32, ctx: &LocalContext<'_>) -> f64 {
    let global = ctx.coll.pairs.count(w, c);
    let lt = ctx.local_pairs.total();
    if global == 0 || lt == 0 {
        return 0.0;
    }
    let local = ctx.local_pairs.count(w, c) as f64 / lt as f64;
    local / (global as f64 / ctx.coll.pairs.total() as f64)
}

/// Relevance-model weight `sum_d p(c|theta_d) prod_q p(q|theta_d)`.
pub fn f4(c: u32, ctx: &LocalContext<'_>) -> f64 {
    (0..ctx.num_docs())
        .map(|i| ctx.doc_prob(i, c) * ctx.query_likelihood(i))
        .sum()
}

/// `sum_d p(w|theta_d) p(c|theta_d) prod_q p(q|theta_d)`.
pub fn f5(w: u32, c: u32, ctx: &LocalContext<'_>) -> f64 {
    (0..ctx.num_docs())
        .map(|i| ctx.doc_prob(i, w) * ctx.doc_prob(i, c) * ctx.query_likelihood(i))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    F1,
    F2,
    F3,
    F4,
    F5,
}

impl Feature {
    pub fn eval(self, w: u32, c: u32, ctx: &LocalContext<'_>) -> f64 {
        match self {
            Feature::F1 => f1(c, ctx),
            Feature::F2 => f2(c, ctx),
            Feature::F3 => f3(w, c, ctx),
            Feature::F4 => f4(c, ctx),
            Feature::F5 => f5(w, c, ctx),
        }
    }

    /// Whether `(w, c)` falls under the zero-global-mass rule.
    fn zero_mass(self, w: u32, c: u32, ctx: &LocalContext<'_>) -> bool {
        match self {
            Feature::F2 => ctx.coll.term_count(c) == 0,
            Feature::F3 => ctx.coll.pairs.count(w, c) == 0,
            _ => false,
        }
    }

    fn context_only(self) -> bool {
        matches!(self, Feature::F1 | Feature::F2 | Feature::F4)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Feature::F1 => "f1",
            Feature::F2 => "f2",
            Feature::F3 => "f3",
            Feature::F4 => "f4",
            Feature::F5 => "f5",
        };
        f.write_str(s)
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(Feature::F1),
            "f2" => Ok(Feature::F2),
            "f3" => Ok(Feature::F3),
            "f4" => Ok(Feature::F4),
            "f5" => Ok(Feature::F5),
            _ => Err(Error::InvalidParam(format!("unknown feature `{s}` (f1..f5)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    pub a: f64,
    pub b: f64,
    pub feature: Feature,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            a: 0.0,
            b: 1.0,
            feature: Feature::F1,
        }
    }
}

impl GateConfig {
    pub fn gate(&self, f: f64) -> f64 {
        sigmoid(self.a + self.b * f)
    }
}

#[derive(Debug, Clone)]
pub struct Adapted {
    pub matrix: ExplicitMatrix,
    /// Cells whose feature hit the zero-global-mass rule (f2/f3 only).
    pub zero_mass_cells: usize,
}

/// Gate every stored cell of `rep`. The support can only shrink (when a
/// gate underflows to exactly zero).
pub fn adapt(rep: &ExplicitMatrix, ctx: &LocalContext<'_>, gate: &GateConfig) -> Result<Adapted> {
    if !gate.a.is_finite() || !gate.b.is_finite() {
        return Err(Error::InvalidParam("gate parameters must be finite".into()));
    }
    if rep.dim() != ctx.coll.num_words {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, collection vocabulary {}",
            rep.dim(),
            ctx.coll.num_words
        )));
    }
    let column_gate: Option<Vec<f64>> = gate.feature.context_only().then(|| {
        (0..rep.dim() as u32)
            .map(|c| gate.gate(gate.feature.eval(0, c, ctx)))
            .collect()
    });
    let mut zero_mass_cells = 0;
    let params = vec![
        ("source".to_string(), rep.builder().to_string()),
        ("a".to_string(), gate.a.to_string()),
        ("b".to_string(), gate.b.to_string()),
        ("k".to_string(), ctx.num_docs().to_string()),
        ("mu".to_string(), ctx.mu.to_string()),
        ("context".to_string(), ctx.coll.granularity.to_string()),
    ];
    let matrix = rep.map_cells(BuilderTag::Adapted(gate.feature), params, |w, c, v| {
        if gate.feature.zero_mass(w, c, ctx) {
            zero_mass_cells += 1;
        }
        let g = match &column_gate {
            Some(cols) => cols[c as usize],
            None => gate.gate(gate.feature.eval(w, c, ctx)),
        };
        v * g
    });
    Ok(Adapted {
        matrix,
        zero_mass_cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborComparison {
    pub term: String,
    pub global: Vec<(u32, f64)>,
    pub adapted: Vec<(u32, f64)>,
    /// Ids present in both top-n lists.
    pub overlap: usize,
    /// Mean `|rank_global - rank_adapted|` over the shared ids (0 if none).
    pub mean_displacement: f64,
    pub max_displacement: usize,
}

pub fn compare_neighbors<G, A>(
    global: &G,
    adapted: &A,
    vocab: &Vocabulary,
    terms: &[&str],
    n: usize,
) -> Result<Vec<NeighborComparison>>
where
    G: Representation + ?Sized,
    A: Representation + ?Sized,
{
    terms
        .iter()
        .map(|&term| {
            let id = vocab
                .id(term)
                .ok_or_else(|| Error::UnknownWord(term.to_string()))?;
            let g = neighbors_by_id(global, id, n)?;
            let a = neighbors_by_id(adapted, id, n)?;
            let mut disp = Vec::new();
            for (rg, (u, _)) in g.iter().enumerate() {
                if let Some(ra) = a.iter().position(|(x, _)| x == u) {
                    disp.push(rg.abs_diff(ra));
                }
            }
            let mean_displacement = if disp.is_empty() {
                0.0
            } else {
                disp.iter().sum::<usize>() as f64 / disp.len() as f64
            };
            Ok(NeighborComparison {
                term: term.to_string(),
                overlap: disp.len(),
                max_displacement: disp.iter().copied().max().unwrap_or(0),
                mean_displacement,
                global: g,
                adapted: a,
            })
        })
        .collect()
}
