//! Cosine similarity over dense or sparse rows and top-n neighbor search.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::matrix::{ExplicitMatrix, SparseRow};
use crate::sgns::DenseEmbeddings;

/// A single word's vector, in whichever layout the representation uses.
#[derive(Debug, Clone)]
pub enum Row<'a> {
    Dense(Cow<'a, [f64]>),
    Sparse(SparseRow<'a>),
}

impl Row<'_> {
    pub fn norm(&self) -> f64 {
        match self {
            Row::Dense(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Row::Sparse(r) => r.values.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    pub fn dot(&self, other: &Row<'_>) -> f64 {
        match (self, other) {
            (Row::Dense(a), Row::Dense(b)) => a.iter().zip(b.iter()).map(|(x, y)| x * y).sum(),
            (Row::Dense(d), Row::Sparse(s)) | (Row::Sparse(s), Row::Dense(d)) => {
                s.iter().map(|(c, v)| v * d[c as usize]).sum()
            }
            (Row::Sparse(a), Row::Sparse(b)) => sparse_dot(a, b),
        }
    }
}

fn sparse_dot(a: &SparseRow<'_>, b: &SparseRow<'_>) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.indices.len() && j < b.indices.len() {
        match a.indices[i].cmp(&b.indices[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a.values[i] * b.values[j];
                i += 1;
                j += 1;
            }
        }
    }
    s
}

/// Cosine of two rows; 0 when either row is all zeros.
pub fn cosine(a: &Row<'_>, b: &Row<'_>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(b) / (na * nb)
}

/// Anything that maps a word id to a vector.
pub trait Representation: Sync {
    fn num_rows(&self) -> usize;
    fn row(&self, id: u32) -> Row<'_>;

    fn similarity(&self, a: u32, b: u32) -> f64 {
        cosine(&self.row(a), &self.row(b))
    }
}

impl Representation for ExplicitMatrix {
    fn num_rows(&self) -> usize {
        self.dim()
    }

    fn row(&self, id: u32) -> Row<'_> {
        Row::Sparse(ExplicitMatrix::row(self, id))
    }
}

/// Dense Skip-Gram word vectors `V`.
impl Representation for DenseEmbeddings {
    fn num_rows(&self) -> usize {
        self.len()
    }

    fn row(&self, id: u32) -> Row<'_> {
        Row::Dense(Cow::Borrowed(self.word_vec(id)))
    }
}

/// Top-`n` rows by cosine similarity to row `w`, excluding `w`. Ties are
/// broken by ascending id.
pub fn neighbors_by_id<R: Representation + ?Sized>(rep: &R, w: u32, n: usize) -> Result<Vec<(u32, f64)>> {
    let rows = rep.num_rows();
    if w as usize >= rows {
        return Err(Error::UnknownWord(format!("#{w}")));
    }
    let q = rep.row(w);
    let qn = q.norm();
    let mut scored: Vec<(u32, f64)> = (0..rows as u32)
        .into_par_iter()
        .filter(|&u| u != w)
        .map(|u| {
            let r = rep.row(u);
            let rn = r.norm();
            let s = if qn == 0.0 || rn == 0.0 {
                0.0
            } else {
                q.dot(&r) / (qn * rn)
            };
            (u, s)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    Ok(scored)
}

/// [`neighbors_by_id`] keyed by word.
pub fn neighbors<R: Representation + ?Sized>(
    rep: &R,
    vocab: &Vocabulary,
    word: &str,
    n: usize,
) -> Result<Vec<(String, f64)>> {
    let id = vocab
        .id(word)
        .filter(|&i| (i as usize) < rep.num_rows())
        .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
    Ok(neighbors_by_id(rep, id, n)?
        .into_iter()
        .map(|(u, s)| (vocab.word(u).to_string(), s))
        .collect())
}
