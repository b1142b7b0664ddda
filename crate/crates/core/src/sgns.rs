//! Skip-Gram with negative sampling: loss, gradients, trainer and the
//! plain-text embedding format.

use std::cell::Cell;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooc::powered_distribution;
use crate::corpus::{doc_pairs, pair_count, subsample, SubsampleConfig, TokenStream, Vocabulary};
use crate::error::{Error, Result};

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(x)`, stable for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sigma(V_w . V~_c)`: probability that `(w, c)` is a genuine pair.
pub fn sigmoid_score(word: &[f64], context: &[f64]) -> f64 {
    debug_assert_eq!(word.len(), context.len());
    sigmoid(dot(word, context))
}

/// Loss of one positive pair against its sampled negatives, with the
/// gradient of that loss for every vector involved.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLoss {
    pub loss: f64,
    pub grad_word: Vec<f64>,
    pub grad_context: Vec<f64>,
    pub grad_negatives: Vec<Vec<f64>>,
}

/// `-[ln sigma(w.c) + sum_i ln sigma(-w.n_i)]` and its analytic gradients.
///
/// `k` is the configured number of negatives; `negatives` must hold
/// exactly that many vectors.
pub fn pair_loss(word: &[f64], context: &[f64], negatives: &[&[f64]], k: usize) -> Result<PairLoss> {
    if negatives.len() != k {
        return Err(Error::InvalidParam(format!(
            "expected {k} negative samples, got {}",
            negatives.len()
        )));
    }
    let d = word.len();
    if context.len() != d || negatives.iter().any(|n| n.len() != d) {
        return Err(Error::DimensionMismatch(
            "pair_loss vectors differ in length".into(),
        ));
    }
    let pos = dot(word, context);
    let mut loss = -log_sigmoid(pos);
    let gp = sigmoid(pos) - 1.0;
    let mut grad_word: Vec<f64> = context.iter().map(|c| gp * c).collect();
    let grad_context: Vec<f64> = word.iter().map(|w| gp * w).collect();
    let mut grad_negatives = Vec::with_capacity(k);
    for n in negatives {
        let s = dot(word, n);
        loss -= log_sigmoid(-s);
        let gn = sigmoid(s);
        for (g, x) in grad_word.iter_mut().zip(n.iter()) {
            *g += gn * x;
        }
        grad_negatives.push(word.iter().map(|w| gn * w).collect());
    }
    Ok(PairLoss {
        loss,
        grad_word,
        grad_context,
        grad_negatives,
    })
}

/// Negative-sampling noise distribution: unigram counts raised to `alpha`, normalized.
pub fn noise_distribution(vocab: &Vocabulary, alpha: f64) -> Result<Vec<f64>> {
    powered_distribution(vocab.counts(), alpha)
}

/// Word vectors `V` and, when available, context vectors `V~`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseEmbeddings {
    words: Vec<String>,
    dim: usize,
    word_vecs: Vec<f64>,
    ctx_vecs: Option<Vec<f64>>,
}

impl DenseEmbeddings {
    pub fn new(
        words: Vec<String>,
        dim: usize,
        word_vecs: Vec<f64>,
        ctx_vecs: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch("dimension must be >= 1".into()));
        }
        let expect = words.len() * dim;
        if word_vecs.len() != expect || ctx_vecs.as_ref().is_some_and(|c| c.len() != expect) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} x {dim} values",
                words.len()
            )));
        }
        let all_finite = word_vecs
            .iter()
            .chain(ctx_vecs.iter().flatten())
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::Divergence("embeddings contain non-finite values".into()));
        }
        Ok(DenseEmbeddings {
            words,
            dim,
            word_vecs,
            ctx_vecs,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word_vec(&self, id: u32) -> &[f64] {
        let o = id as usize * self.dim;
        &self.word_vecs[o..o + self.dim]
    }

    pub fn has_context(&self) -> bool {
        self.ctx_vecs.is_some()
    }

    pub fn ctx_vec(&self, id: u32) -> Option<&[f64]> {
        let o = id as usize * self.dim;
        self.ctx_vecs.as_ref().map(|c| &c[o..o + self.dim])
    }

    /// Flat row-major `V`.
    pub fn word_matrix(&self) -> &[f64] {
        &self.word_vecs
    }

    /// Flat row-major `V~`, or an error when only word vectors were loaded.
    pub fn context_matrix(&self) -> Result<&[f64]> {
        self.ctx_vecs.as_deref().ok_or(Error::MissingContextVectors)
    }

    /// Drop the context vectors, as in a file holding only `V`.
    pub fn without_context(mut self) -> Self {
        self.ctx_vecs = None;
        self
    }

    /// Check that the rows line up with `vocab`.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        if self.words.as_slice() != vocab.words() {
            return Err(Error::DimensionMismatch(format!(
                "embeddings cover {} words that do not match the {}-word vocabulary",
                self.words.len(),
                vocab.len()
            )));
        }
        Ok(())
    }
}

/// Path of the context-vector companion file.
pub fn context_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".ctx");
    PathBuf::from(p)
}

fn write_matrix<W: Write>(mut out: W, words: &[String], dim: usize, m: &[f64]) -> std::io::Result<()> {
    writeln!(out, "{} {}", words.len(), dim)?;
    for (w, row) in words.iter().zip(m.chunks(dim)) {
        write!(out, "{w}")?;
        for x in row {
            write!(out, " {x:.6}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Read one `|W| d` text matrix.
pub fn read_matrix<R: BufRead>(input: R) -> Result<(Vec<String>, usize, Vec<f64>)> {
    const WHAT: &str = "embedding file";
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(WHAT, 1, "missing header"))??;
    let mut h = header.split_whitespace();
    let (n, d) = match (h.next(), h.next(), h.next()) {
        (Some(n), Some(d), None) => (n.parse::<usize>(), d.parse::<usize>()),
        _ => return Err(Error::format(WHAT, 1, format!("bad header `{header}`"))),
    };
    let (n, d) = match (n, d) {
        (Ok(n), Ok(d)) if d > 0 => (n, d),
        _ => return Err(Error::format(WHAT, 1, format!("bad header `{header}`"))),
    };
    let mut words = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n * d);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if words.len() == n {
            return Err(Error::DimensionMismatch(format!(
                "header declares {n} words but line {} holds another vector",
                i + 2
            )));
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("line is not blank").to_string();
        let before = vals.len();
        for p in parts {
            let x: f64 = p
                .parse()
                .map_err(|_| Error::format(WHAT, i + 2, format!("bad value `{p}`")))?;
            vals.push(x);
        }
        if vals.len() - before != d {
            return Err(Error::DimensionMismatch(format!(
                "line {}: expected {d} values, got {}",
                i + 2,
                vals.len() - before
            )));
        }
        words.push(word);
    }
    if words.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "header declares {n} words, file holds {}",
            words.len()
        )));
    }
    Ok((words, d, vals))
}

impl DenseEmbeddings {
    pub fn write_words<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_matrix(out, &self.words, self.dim, &self.word_vecs)
    }

    pub fn write_contexts<W: Write>(&self, out: W) -> Result<()> {
        write_matrix(out, &self.words, self.dim, self.context_matrix()?)?;
        Ok(())
    }

    /// Write `V` to `path` and `V~` (if present) to `path.ctx`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(f);
        self.write_words(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))?;
        if let Some(ctx) = &self.ctx_vecs {
            let cpath = context_path(path);
            let f = File::create(&cpath).map_err(|e| Error::io(&cpath, e))?;
            let mut out = BufWriter::new(f);
            write_matrix(&mut out, &self.words, self.dim, ctx).map_err(|e| Error::io(&cpath, e))?;
            out.flush().map_err(|e| Error::io(&cpath, e))?;
        }
        Ok(())
    }

    /// Load `V` from `path`; `V~` is read from `path.ctx` when that file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let (words, dim, wv) = read_matrix(BufReader::new(f))?;
        let cpath = context_path(path);
        let ctx = if cpath.exists() {
            let f = File::open(&cpath).map_err(|e| Error::io(&cpath, e))?;
            let (cw, cd, cv) = read_matrix(BufReader::new(f))?;
            if cw != words || cd != dim {
                return Err(Error::DimensionMismatch(
                    "context vectors do not match word vectors".into(),
                ));
            }
            Some(cv)
        } else {
            None
        };
        DenseEmbeddings::new(words, dim, wv, ctx)
    }
}

pub fn save_embeddings(emb: &DenseEmbeddings, path: &Path) -> Result<()> {
    emb.save(path)
}

pub fn load_embeddings(path: &Path) -> Result<DenseEmbeddings> {
    DenseEmbeddings::load(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub negative: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub window: usize,
    /// Subsampling threshold; `None` keeps every token.
    pub subsample: Option<f64>,
    pub cds_alpha: f64,
    pub seed: u64,
    /// 1 = deterministic single-threaded; more = lock-free parallel updates.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 300,
            negative: 10,
            epochs: 20,
            learning_rate: 0.025,
            window: 5,
            subsample: Some(1e-5),
            cds_alpha: 0.75,
            seed: 42,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if self.dim < 1 {
            return bad("dim must be >= 1");
        }
        if self.negative < 1 {
            return bad("negative must be >= 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be > 0");
        }
        if self.window < 1 {
            return bad("window must be >= 1");
        }
        if self.subsample.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return bad("subsample threshold must be > 0");
        }
        if !(self.cds_alpha > 0.0 && self.cds_alpha <= 1.0) {
            return bad("cds alpha must be in (0, 1]");
        }
        if self.threads < 1 {
            return bad("threads must be >= 1");
        }
        Ok(())
    }
}

/// Diagnostics collected while training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub updates: u64,
    /// Mean pair loss in consecutive equal slices of the update schedule.
    pub loss_curve: Vec<f64>,
}

const LOSS_BUCKETS: usize = 100;
const MIN_LR_FRACTION: f64 = 1e-4;

/// Scalar parameter storage shared by the sequential and parallel trainers.
trait Slots {
    fn get(&self, i: usize) -> f64;
    fn set(&self, i: usize, v: f64);
}

impl Slots for [Cell<f64>] {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        self[i].get()
    }
    #[inline]
    fn set(&self, i: usize, v: f64) {
        self[i].set(v)
    }
}

/// Relaxed loads and stores with no read-modify-write: concurrent updates
/// to one coordinate may be lost, as in Hogwild-style SGD.
impl Slots for [AtomicU64] {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self[i].load(Ordering::Relaxed))
    }
    #[inline]
    fn set(&self, i: usize, v: f64) {
        self[i].store(v.to_bits(), Ordering::Relaxed)
    }
}

struct Scratch {
    word: Vec<f64>,
    neu1e: Vec<f64>,
    negs: Vec<u32>,
}

/// One SGD step on `(w, c)` with the given negatives; returns the pair loss
/// measured before the update.
#[allow(clippy::too_many_arguments)]
fn sgd_step<S: Slots + ?Sized>(
    v: &S,
    ctx: &S,
    dim: usize,
    w: u32,
    c: u32,
    negs: &[u32],
    lr: f64,
    scratch_word: &mut [f64],
    neu1e: &mut [f64],
) -> f64 {
    let wo = w as usize * dim;
    for (i, x) in scratch_word.iter_mut().enumerate() {
        *x = v.get(wo + i);
    }
    neu1e.fill(0.0);
    let mut loss = 0.0;
    let targets = std::iter::once((c, 1.0)).chain(negs.iter().map(|&n| (n, 0.0)));
    for (target, label) in targets {
        let co = target as usize * dim;
        let mut s = 0.0;
        for (i, x) in scratch_word.iter().enumerate() {
            s += x * ctx.get(co + i);
        }
        loss -= if label > 0.5 {
            log_sigmoid(s)
        } else {
            log_sigmoid(-s)
        };
        let g = (label - sigmoid(s)) * lr;
        for (i, x) in scratch_word.iter().enumerate() {
            let cv = ctx.get(co + i);
            neu1e[i] += g * cv;
            ctx.set(co + i, cv + g * x);
        }
    }
    for (i, e) in neu1e.iter().enumerate() {
        v.set(wo + i, v.get(wo + i) + e);
    }
    loss
}

struct Schedule {
    lr0: f64,
    total: u64,
}

impl Schedule {
    /// Linear decay from `lr0` to `lr0 * 1e-4` over all updates.
    fn rate(&self, step: u64) -> f64 {
        let p = (step as f64 / self.total.max(1) as f64).min(1.0);
        self.lr0 * (1.0 - (1.0 - MIN_LR_FRACTION) * p)
    }

    fn bucket(&self, step: u64) -> usize {
        ((step as u128 * LOSS_BUCKETS as u128) / self.total.max(1) as u128).min(LOSS_BUCKETS as u128 - 1)
            as usize
    }
}

fn epoch_stream(stream: &TokenStream, vocab: &Vocabulary, cfg: &TrainConfig, epoch: usize) -> TokenStream {
    match cfg.subsample {
        Some(t) => {
            let sc = SubsampleConfig {
                t,
                seed: cfg.seed.wrapping_add(1 + epoch as u64),
            };
            subsample(stream, vocab, &sc)
        }
        None => stream.clone(),
    }
}

/// Train with default statistics discarded.
pub fn train(stream: &TokenStream, vocab: &Vocabulary, cfg: &TrainConfig) -> Result<DenseEmbeddings> {
    train_with_stats(stream, vocab, cfg).map(|(e, _)| e)
}

pub fn train_with_stats(
    stream: &TokenStream,
    vocab: &Vocabulary,
    cfg: &TrainConfig,
) -> Result<(DenseEmbeddings, TrainStats)> {
    cfg.validate()?;
    if vocab.is_empty() {
        return Err(Error::EmptyCorpus { min_count: vocab.min_count() });
    }
    let n = vocab.len();
    if let Some(bad) = stream.docs().iter().flatten().find(|&&id| id as usize >= n) {
        return Err(Error::InvalidParam(format!("token id {bad} outside vocabulary")));
    }
    let d = cfg.dim;
    let noise = WeightedIndex::new(noise_distribution(vocab, cfg.cds_alpha)?)
        .map_err(|e| Error::InvalidParam(format!("noise distribution: {e}")))?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 / d as f64;
    let mut v: Vec<f64> = (0..n * d).map(|_| init_rng.random_range(-half..half)).collect();
    let mut ctx = vec![0.0f64; n * d];

    // Subsampling is deterministic, so the exact number of updates is known
    // before training starts.
    let total: u64 = (0..cfg.epochs)
        .map(|e| {
            epoch_stream(stream, vocab, cfg, e)
                .docs()
                .iter()
                .map(|doc| pair_count(doc.len(), cfg.window))
                .sum::<u64>()
        })
        .sum();
    let sched = Schedule {
        lr0: cfg.learning_rate,
        total,
    };
    let mut loss_sum = vec![0.0f64; LOSS_BUCKETS];
    let mut loss_n = vec![0u64; LOSS_BUCKETS];
    let mut step: u64 = 0;

    for epoch in 0..cfg.epochs {
        let es = epoch_stream(stream, vocab, cfg, epoch);
        if cfg.threads == 1 {
            let vs = Cell::from_mut(v.as_mut_slice()).as_slice_of_cells();
            let cs = Cell::from_mut(ctx.as_mut_slice()).as_slice_of_cells();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1 + epoch as u64);
            let mut scratch = Scratch {
                word: vec![0.0; d],
                neu1e: vec![0.0; d],
                negs: vec![0; cfg.negative],
            };
            for doc in es.docs() {
                for (w, c) in doc_pairs(doc, cfg.window) {
                    for s in scratch.negs.iter_mut() {
                        *s = noise.sample(&mut rng) as u32;
                    }
                    let l = sgd_step(
                        vs,
                        cs,
                        d,
                        w,
                        c,
                        &scratch.negs,
                        sched.rate(step),
                        &mut scratch.word,
                        &mut scratch.neu1e,
                    );
                    let b = sched.bucket(step);
                    loss_sum[b] += l;
                    loss_n[b] += 1;
                    step += 1;
                }
            }
        } else {
            let (s, ls, ln) = parallel_epoch(&es, &mut v, &mut ctx, &noise, cfg, &sched, step, epoch);
            step = s;
            for b in 0..LOSS_BUCKETS {
                loss_sum[b] += ls[b];
                loss_n[b] += ln[b];
            }
        }
        if let Some(pos) = v.iter().chain(ctx.iter()).position(|x| !x.is_finite()) {
            let which = if pos < v.len() { "word" } else { "context" };
            let word = vocab.word(((pos % (n * d)) / d) as u32);
            return Err(Error::Divergence(format!(
                "non-finite {which} vector for `{word}` after epoch {}; lower the learning rate",
                epoch + 1
            )));
        }
    }

    let loss_curve = loss_sum
        .iter()
        .zip(&loss_n)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| s / n as f64)
        .collect();
    let emb = DenseEmbeddings::new(vocab.words().to_vec(), d, v, Some(ctx))?;
    Ok((
        emb,
        TrainStats {
            updates: step,
            loss_curve,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
fn parallel_epoch(
    es: &TokenStream,
    v: &mut [f64],
    ctx: &mut [f64],
    noise: &WeightedIndex<f64>,
    cfg: &TrainConfig,
    sched: &Schedule,
    start: u64,
    epoch: usize,
) -> (u64, Vec<f64>, Vec<u64>) {
    let to_atomic = |m: &[f64]| -> Vec<AtomicU64> { m.iter().map(|x| AtomicU64::new(x.to_bits())).collect() };
    let va = to_atomic(v);
    let ca = to_atomic(ctx);
    let counter = AtomicU64::new(start);
    let d = cfg.dim;
    let docs = es.docs();
    let chunk = docs.len().div_ceil(cfg.threads * 4).max(1);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .expect("thread pool");
    let (ls, ln) = pool.install(|| {
        docs.par_chunks(chunk)
            .enumerate()
            .map(|(ci, part)| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((epoch as u64 + 1) << 32));
                rng.set_stream(ci as u64);
                let mut word = vec![0.0; d];
                let mut neu1e = vec![0.0; d];
                let mut negs = vec![0u32; cfg.negative];
                let mut ls = vec![0.0f64; LOSS_BUCKETS];
                let mut ln = vec![0u64; LOSS_BUCKETS];
                for doc in part {
                    for (w, c) in doc_pairs(doc, cfg.window) {
                        for s in negs.iter_mut() {
                            *s = noise.sample(&mut rng) as u32;
                        }
                        let step = counter.fetch_add(1, Ordering::Relaxed);
                        let l = sgd_step(
                            va.as_slice(),
                            ca.as_slice(),
                            d,
                            w,
                            c,
                            &negs,
                            sched.rate(step),
                            &mut word,
                            &mut neu1e,
                        );
                        let b = sched.bucket(step);
                        ls[b] += l;
                        ln[b] += 1;
                    }
                }
                (ls, ln)
            })
            .reduce(
                || (vec![0.0; LOSS_BUCKETS], vec![0; LOSS_BUCKETS]),
                |(mut a, mut an), (b, bn)| {
                    for i in 0..LOSS_BUCKETS {
                        a[i] += b[i];
                        an[i] += bn[i];
                    }
                    (a, an)
                },
            )
    });
    for (dst, a) in v.iter_mut().zip(&va) {
        *dst = f64::from_bits(a.load(Ordering::Relaxed));
    }
    for (dst, a) in ctx.iter_mut().zip(&ca) {
        *dst = f64::from_bits(a.load(Ordering::Relaxed));
    }
    (counter.load(Ordering::Relaxed), ls, ln)
}
