//! Co-occurrence counts `f(<w,c>, X)` and their marginals.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{doc_pairs, TokenStream};
use crate::error::{Error, Result};

/// Largest count a cell or marginal may hold.
pub const MAX_COUNT: u64 = i64::MAX as u64;

/// Sparse word-context counts, row-indexed with strictly increasing context ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoocTable {
    rows: Vec<Vec<(u32, u64)>>,
    row_marginals: Vec<u64>,
    col_marginals: Vec<u64>,
    total: u64,
}

/// Incremental accumulator for a [`CoocTable`].
#[derive(Debug, Clone)]
pub struct CoocBuilder {
    rows: Vec<HashMap<u32, u64>>,
}

impl CoocBuilder {
    pub fn new(num_words: usize) -> Self {
        CoocBuilder {
            rows: vec![HashMap::new(); num_words],
        }
    }

    pub fn add(&mut self, w: u32, c: u32) -> Result<()> {
        self.add_count(w, c, 1)
    }

    pub fn add_count(&mut self, w: u32, c: u32, n: u64) -> Result<()> {
        let dim = self.rows.len();
        if w as usize >= dim || c as usize >= dim {
            return Err(Error::InvalidParam(format!(
                "pair ({w}, {c}) out of range for {dim} words"
            )));
        }
        let cell = self.rows[w as usize].entry(c).or_insert(0);
        *cell = cell
            .checked_add(n)
            .filter(|&v| v <= MAX_COUNT)
            .ok_or(Error::CountOverflow { w, c })?;
        Ok(())
    }

    /// Fold another builder's counts into this one.
    pub fn merge(&mut self, other: CoocBuilder) -> Result<()> {
        for (w, row) in other.rows.into_iter().enumerate() {
            for (c, n) in row {
                self.add_count(w as u32, c, n)?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<CoocTable> {
        let dim = self.rows.len();
        let mut row_marginals = vec![0u64; dim];
        let mut col_marginals = vec![0u64; dim];
        let mut total = 0u64;
        let mut rows = Vec::with_capacity(dim);
        for (w, map) in self.rows.into_iter().enumerate() {
            let mut row: Vec<(u32, u64)> = map.into_iter().filter(|&(_, n)| n > 0).collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            for &(c, n) in &row {
                let overflow = Error::CountOverflow { w: w as u32, c };
                row_marginals[w] = checked(row_marginals[w], n).ok_or(overflow)?;
                col_marginals[c as usize] = checked(col_marginals[c as usize], n)
                    .ok_or(Error::CountOverflow { w: w as u32, c })?;
                total = checked(total, n).ok_or(Error::CountOverflow { w: w as u32, c })?;
            }
            rows.push(row);
        }
        Ok(CoocTable {
            rows,
            row_marginals,
            col_marginals,
            total,
        })
    }
}

fn checked(a: u64, b: u64) -> Option<u64> {
    a.checked_add(b).filter(|&v| v <= MAX_COUNT)
}

/// Count a stream of `(word, context)` pairs.
pub fn accumulate<I>(pairs: I, num_words: usize) -> Result<CoocTable>
where
    I: IntoIterator<Item = (u32, u32)>,
{
    let mut b = CoocBuilder::new(num_words);
    for (w, c) in pairs {
        b.add(w, c)?;
    }
    b.finish()
}

/// Window co-occurrences of a token stream, counted per document in
/// parallel. The result does not depend on the thread count.
pub fn from_stream(stream: &TokenStream, window: usize, num_words: usize) -> Result<CoocTable> {
    stream
        .docs()
        .par_iter()
        .try_fold(
            || CoocBuilder::new(num_words),
            |mut b, doc| {
                for (w, c) in doc_pairs(doc, window) {
                    b.add(w, c)?;
                }
                Ok::<_, Error>(b)
            },
        )
        .try_reduce(
            || CoocBuilder::new(num_words),
            |mut a, b| {
                a.merge(b)?;
                Ok(a)
            },
        )?
        .finish()
}

impl CoocTable {
    pub fn num_words(&self) -> usize {
        self.rows.len()
    }

    /// `|X|`
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn row(&self, w: u32) -> &[(u32, u64)] {
        &self.rows[w as usize]
    }

    pub fn rows(&self) -> impl Iterator<Item = (u32, &[(u32, u64)])> {
        self.rows.iter().enumerate().map(|(w, r)| (w as u32, r.as_slice()))
    }

    pub fn count(&self, w: u32, c: u32) -> u64 {
        let row = &self.rows[w as usize];
        row.binary_search_by_key(&c, |&(cc, _)| cc)
            .map(|i| row[i].1)
            .unwrap_or(0)
    }

    /// `f(<w,.>, X)`
    pub fn row_marginals(&self) -> &[u64] {
        &self.row_marginals
    }

    /// `f(<.,c>, X)`
    pub fn col_marginals(&self) -> &[u64] {
        &self.col_marginals
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "#cooc v1 total={}", self.total)?;
        for (w, row) in self.rows() {
            for &(c, n) in row {
                writeln!(out, "{w}\t{c}\t{n}")?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(f);
        self.write(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a table written by [`CoocTable::write`]. The file does not
    /// record the vocabulary size, so the caller supplies it.
    pub fn read<R: BufRead>(input: R, num_words: usize) -> Result<Self> {
        const WHAT: &str = "cooc file";
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(WHAT, 1, "missing header"))??;
        let declared: u64 = header
            .strip_prefix("#cooc v1 total=")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::format(WHAT, 1, format!("bad header `{header}`")))?;
        let mut b = CoocBuilder::new(num_words);
        let mut prev: Option<(u32, u32)> = None;
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            let mut f = line.split('\t');
            let mut field = |name: &str| -> Result<u64> {
                f.next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::format(WHAT, lineno, format!("bad {name}")))
            };
            let w = field("w_id")? as u32;
            let c = field("c_id")? as u32;
            let n = field("count")?;
            if prev.is_some_and(|p| p >= (w, c)) {
                return Err(Error::format(WHAT, lineno, "pairs not sorted by (w_id, c_id)"));
            }
            if n == 0 {
                return Err(Error::format(WHAT, lineno, "zero count"));
            }
            prev = Some((w, c));
            b.add_count(w, c, n)
                .map_err(|e| Error::format(WHAT, lineno, e.to_string()))?;
        }
        let table = b.finish()?;
        if table.total != declared {
            return Err(Error::format(
                WHAT,
                1,
                format!("header total {declared} != sum of counts {}", table.total),
            ));
        }
        Ok(table)
    }

    pub fn load(path: &Path, num_words: usize) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f), num_words)
    }
}

/// Context distribution `p_alpha(c)`, proportional to the column marginal raised to `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedContextDist {
    pub alpha: f64,
    pub probs: Vec<f64>,
}

impl SmoothedContextDist {
    pub fn prob(&self, c: u32) -> f64 {
        self.probs[c as usize]
    }
}

/// Normalized `count^alpha` weights. Shared by context smoothing and the
/// negative-sampling noise distribution.
pub fn powered_distribution(counts: &[u64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "smoothing exponent must be in (0, 1], got {alpha}"
        )));
    }
    let weights: Vec<f64> = counts.iter().map(|&n| (n as f64).powf(alpha)).collect();
    let z: f64 = weights.iter().sum();
    if z <= 0.0 {
        return Err(Error::EmptyTable);
    }
    Ok(weights.into_iter().map(|x| x / z).collect())
}

pub fn smooth_context(table: &CoocTable, alpha: f64) -> Result<SmoothedContextDist> {
    let probs = powered_distribution(table.col_marginals(), alpha)?;
    Ok(SmoothedContextDist { alpha, probs })
}
