//! Word-association benchmarks: Spearman correlation between model cosine
//! similarities and human scores, high-score subsets, and the summary table.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::matrix::BuilderTag;
use crate::neighbors::Representation;

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub name: String,
    pub pairs: Vec<(String, String, f64)>,
    pub score_scale: (f64, f64),
}

impl Benchmark {
    /// Validate pairs: no duplicate unordered pairs, every score inside
    /// `scale`. Without an explicit scale the observed range is used.
    pub fn new(
        name: impl Into<String>,
        pairs: Vec<(String, String, f64)>,
        scale: Option<(f64, f64)>,
    ) -> Result<Self> {
        let name = name.into();
        let mut seen = HashSet::new();
        for (a, b, _) in &pairs {
            let key = if a <= b { (a, b) } else { (b, a) };
            if !seen.insert(key) {
                return Err(Error::Evaluation(format!(
                    "{name}: duplicate pair ({a}, {b})"
                )));
            }
        }
        let observed = pairs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.2), hi.max(p.2))
        });
        let score_scale = scale.unwrap_or(observed);
        if let Some(p) = pairs
            .iter()
            .find(|p| !(p.2 >= score_scale.0 && p.2 <= score_scale.1))
        {
            return Err(Error::Evaluation(format!(
                "{name}: score {} of ({}, {}) outside scale [{}, {}]",
                p.2, p.0, p.1, score_scale.0, score_scale.1
            )));
        }
        Ok(Benchmark {
            name,
            pairs,
            score_scale,
        })
    }

    /// Parse `word1<TAB>word2<TAB>score` lines; `#` starts a comment line.
    /// Words are lowercased to match the corpus tokenizer.
    pub fn read<R: BufRead>(name: &str, input: R, scale: Option<(f64, f64)>) -> Result<Self> {
        const WHAT: &str = "benchmark";
        let mut pairs = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = t.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::format(WHAT, i + 1, "expected word1<TAB>word2<TAB>score"));
            }
            let score: f64 = f[2]
                .trim()
                .parse()
                .map_err(|_| Error::format(WHAT, i + 1, format!("bad score `{}`", f[2])))?;
            pairs.push((f[0].trim().to_lowercase(), f[1].trim().to_lowercase(), score));
        }
        Benchmark::new(name, pairs, scale)
    }

    pub fn load(path: &Path, scale: Option<(f64, f64)>) -> Result<Self> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "benchmark".into());
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Benchmark::read(&name, BufReader::new(f), scale)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Ranks starting at 1, tied values sharing their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Evaluation(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Evaluation("need at least two observations".into()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
        .ok_or_else(|| Error::Evaluation("zero variance in ranks".into()))
}

/// Two-tailed p-value of a correlation under `t = rho sqrt((n-2)/(1-rho^2))`
/// with `n - 2` degrees of freedom. `None` for `n < 3`.
pub fn correlation_p_value(rho: f64, n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    if rho.abs() >= 1.0 {
        return Some(0.0);
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub benchmark: String,
    pub representation: String,
    pub rho: f64,
    pub n_used: usize,
    pub n_dropped: usize,
    pub p_value: Option<f64>,
}

/// Model and human scores for the in-vocabulary pairs, in benchmark order.
fn scored_pairs<R: Representation + ?Sized>(
    rep: &R,
    vocab: &Vocabulary,
    pairs: &[&(String, String, f64)],
) -> (Vec<f64>, Vec<f64>, usize) {
    let lookup = |w: &str| vocab.id(w).filter(|&i| (i as usize) < rep.num_rows());
    let mut model = Vec::new();
    let mut human = Vec::new();
    let mut dropped = 0;
    for (a, b, s) in pairs.iter().copied() {
        match (lookup(a), lookup(b)) {
            (Some(x), Some(y)) => {
                model.push(rep.similarity(x, y));
                human.push(*s);
            }
            _ => dropped += 1,
        }
    }
    (model, human, dropped)
}

fn evaluate_pairs<R: Representation + ?Sized>(
    rep: &R,
    vocab: &Vocabulary,
    bench_name: &str,
    tag: &str,
    pairs: &[&(String, String, f64)],
) -> Result<EvalResult> {
    let (model, human, n_dropped) = scored_pairs(rep, vocab, pairs);
    if model.is_empty() {
        return Err(Error::Evaluation(format!(
            "{bench_name}: every pair is out of vocabulary"
        )));
    }
    let rho = spearman(&model, &human)?;
    Ok(EvalResult {
        benchmark: bench_name.to_string(),
        representation: tag.to_string(),
        rho,
        n_used: model.len(),
        n_dropped,
        p_value: correlation_p_value(rho, model.len()),
    })
}

/// Spearman correlation of cosine similarity against human scores.
/// Pairs with an out-of-vocabulary word are dropped and counted.
pub fn evaluate<R: Representation + ?Sized>(
    rep: &R,
    vocab: &Vocabulary,
    bench: &Benchmark,
    tag: &str,
) -> Result<EvalResult> {
    let pairs: Vec<&(String, String, f64)> = bench.pairs.iter().collect();
    evaluate_pairs(rep, vocab, &bench.name, tag, &pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetResult {
    pub threshold: f64,
    /// Pairs in the subset that were scored (in vocabulary).
    pub n: usize,
    /// Absent when fewer than three pairs remain or ranks are constant.
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
}

impl SubsetResult {
    pub fn significant(&self, level: f64) -> bool {
        self.p_value.is_some_and(|p| p < level)
    }
}

/// Evaluate on `{pairs : human score >= threshold}` for each threshold.
pub fn threshold_subsets<R: Representation + ?Sized>(
    rep: &R,
    vocab: &Vocabulary,
    bench: &Benchmark,
    thresholds: &[f64],
) -> Vec<SubsetResult> {
    thresholds
        .iter()
        .map(|&th| {
            let subset: Vec<&(String, String, f64)> =
                bench.pairs.iter().filter(|p| p.2 >= th).collect();
            match evaluate_pairs(rep, vocab, &bench.name, "", &subset) {
                Ok(r) if r.n_used >= 3 => SubsetResult {
                    threshold: th,
                    n: r.n_used,
                    rho: Some(r.rho),
                    p_value: r.p_value,
                },
                Ok(r) => SubsetResult {
                    threshold: th,
                    n: r.n_used,
                    rho: None,
                    p_value: None,
                },
                Err(_) => SubsetResult {
                    threshold: th,
                    n: scored_pairs(rep, vocab, &subset).0.len(),
                    rho: None,
                    p_value: None,
                },
            }
        })
        .collect()
}

/// Results laid out with one row per representation and one column per benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub methods: Vec<String>,
    pub benchmarks: Vec<String>,
    /// `cells[method][benchmark]`
    pub cells: Vec<Vec<Option<f64>>>,
    pub sparsity: Vec<Option<f64>>,
    /// Best explicit representation per benchmark column (ties all marked).
    pub best: Vec<Vec<bool>>,
}

/// Explicit representations are those with a matrix builder tag; dense
/// Skip-Gram (`sg`) is listed but never marked.
pub fn is_explicit(tag: &str) -> bool {
    tag.parse::<BuilderTag>().is_ok()
}

pub fn report(results: &[EvalResult], sparsities: &[(String, f64)]) -> Report {
    let mut methods: Vec<String> = Vec::new();
    let mut benchmarks: Vec<String> = Vec::new();
    for r in results {
        if !methods.contains(&r.representation) {
            methods.push(r.representation.clone());
        }
        if !benchmarks.contains(&r.benchmark) {
            benchmarks.push(r.benchmark.clone());
        }
    }
    let mut cells = vec![vec![None; benchmarks.len()]; methods.len()];
    for r in results {
        let m = methods.iter().position(|x| *x == r.representation).unwrap();
        let b = benchmarks.iter().position(|x| *x == r.benchmark).unwrap();
        cells[m][b] = Some(r.rho);
    }
    let mut best = vec![vec![false; benchmarks.len()]; methods.len()];
    for b in 0..benchmarks.len() {
        let top = (0..methods.len())
            .filter(|&m| is_explicit(&methods[m]))
            .filter_map(|m| cells[m][b])
            .fold(f64::NEG_INFINITY, f64::max);
        for m in 0..methods.len() {
            best[m][b] = is_explicit(&methods[m]) && cells[m][b] == Some(top);
        }
    }
    let sparsity = methods
        .iter()
        .map(|m| sparsities.iter().find(|(t, _)| t == m).map(|(_, s)| *s))
        .collect();
    Report {
        methods,
        benchmarks,
        cells,
        sparsity,
        best,
    }
}

impl Report {
    /// Aligned plain text; the best explicit value per column carries a `*`.
    pub fn to_text(&self) -> String {
        let mut header = vec!["Method".to_string(), "Sparsity".to_string()];
        header.extend(self.benchmarks.iter().cloned());
        let mut rows = vec![header];
        for (m, name) in self.methods.iter().enumerate() {
            let mut row = vec![
                name.clone(),
                self.sparsity[m].map_or("-".into(), |s| format!("{:.1}%", s * 100.0)),
            ];
            for b in 0..self.benchmarks.len() {
                row.push(match self.cells[m][b] {
                    Some(v) => format!("{v:.3}{}", if self.best[m][b] { "*" } else { "" }),
                    None => "-".into(),
                });
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    if c == 0 {
                        format!("{s:<w$}", w = widths[c])
                    } else {
                        format!("{s:>w$}", w = widths[c])
                    }
                })
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
        }
        out
    }

    /// Tab-separated form; the last column lists the benchmarks where the
    /// row is the best explicit representation.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "method\tsparsity\t{}\tbest", self.benchmarks.join("\t")).unwrap();
        for (m, name) in self.methods.iter().enumerate() {
            let mut f = vec![
                name.clone(),
                self.sparsity[m].map_or(String::new(), |s| format!("{s:.6}")),
            ];
            for b in 0..self.benchmarks.len() {
                f.push(self.cells[m][b].map_or(String::new(), |v| format!("{v:.6}")));
            }
            let best: Vec<&str> = (0..self.benchmarks.len())
                .filter(|&b| self.best[m][b])
                .map(|b| self.benchmarks[b].as_str())
                .collect();
            f.push(best.join(","));
            writeln!(out, "{}", f.join("\t")).unwrap();
        }
        out
    }
}
