//! Explicit representations read off trained Skip-Gram vectors.
//!
//! * ExpSG: `sigma(V_w . V~_c)` for every word/context pair.
//! * RExpSG: ExpSG minus the expected score of a noise context for `w`
//!   (contexts weighted by `count^alpha`) and of a noise word for `c`
//!   (words weighted by raw count). Both expectations are exact sums over
//!   the vocabulary.
//! * PRExpSG: the positive part of RExpSG, stored sparsely.
//!
//! None of these consult co-occurrence counts; a pair that never
//! co-occurred can still get a positive cell.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::cooc::powered_distribution;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::matrix::{BuilderTag, ExplicitMatrix};
use crate::neighbors::{Representation, Row};
use crate::sgns::{dot, sigmoid, DenseEmbeddings};

/// Largest vocabulary for which the dense ExpSG/RExpSG matrices are
/// materialized. Larger models use [`LazyExpSg`].
pub const DENSE_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseExpectations {
    /// `E_{c~N_alpha}[sigma(V_w . V~_c)]`, indexed by word.
    pub ctx_expect: Vec<f64>,
    /// `E_{w~N}[sigma(V_w . V~_c)]`, indexed by context.
    pub word_expect: Vec<f64>,
    pub alpha: f64,
}

/// Fill `out` with `sigma(V_w . V~_c)` for every context `c`.
fn score_row(v: &[f64], ctx: &[f64], d: usize, w: u32, out: &mut Vec<f64>) {
    let vw = &v[w as usize * d..(w as usize + 1) * d];
    out.clear();
    out.extend(ctx.chunks_exact(d).map(|c| sigmoid(dot(vw, c))));
}

fn check_inputs(emb: &DenseEmbeddings, vocab: &Vocabulary) -> Result<()> {
    emb.context_matrix()?;
    emb.check_vocab(vocab)
}

pub fn noise_expectations(
    emb: &DenseEmbeddings,
    vocab: &Vocabulary,
    alpha: f64,
) -> Result<NoiseExpectations> {
    check_inputs(emb, vocab)?;
    let ctx = emb.context_matrix()?;
    let v = emb.word_matrix();
    let d = emb.dim();
    let n = emb.len();
    let word_w = powered_distribution(vocab.counts(), 1.0)?;
    let ctx_w = powered_distribution(vocab.counts(), alpha)?;

    let ctx_expect: Vec<f64> = (0..n as u32)
        .into_par_iter()
        .map_init(Vec::new, |buf, w| {
            score_row(v, ctx, d, w, buf);
            buf.iter().zip(&ctx_w).map(|(s, p)| s * p).sum()
        })
        .collect();
    let word_expect: Vec<f64> = ctx
        .par_chunks_exact(d)
        .map(|c| {
            v.chunks_exact(d)
                .zip(&word_w)
                .map(|(vw, p)| p * sigmoid(dot(vw, c)))
                .sum()
        })
        .collect();
    Ok(NoiseExpectations {
        ctx_expect,
        word_expect,
        alpha,
    })
}

/// Which explicit Skip-Gram variant a row holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpSgKind {
    ExpSg,
    RExpSg,
    PrExpSg,
}

impl ExpSgKind {
    pub fn tag(self) -> BuilderTag {
        match self {
            ExpSgKind::ExpSg => BuilderTag::ExpSg,
            ExpSgKind::RExpSg => BuilderTag::RExpSg,
            ExpSgKind::PrExpSg => BuilderTag::PrExpSg,
        }
    }
}

/// Rows computed on demand from the embeddings, for any vocabulary size.
pub struct LazyExpSg<'a> {
    emb: &'a DenseEmbeddings,
    kind: ExpSgKind,
    noise: Option<NoiseExpectations>,
}

impl<'a> LazyExpSg<'a> {
    pub fn expsg(emb: &'a DenseEmbeddings) -> Result<Self> {
        emb.context_matrix()?;
        Ok(LazyExpSg {
            emb,
            kind: ExpSgKind::ExpSg,
            noise: None,
        })
    }

    pub fn reduced(
        emb: &'a DenseEmbeddings,
        vocab: &Vocabulary,
        alpha: f64,
        positive: bool,
    ) -> Result<Self> {
        let noise = noise_expectations(emb, vocab, alpha)?;
        Ok(LazyExpSg {
            emb,
            kind: if positive {
                ExpSgKind::PrExpSg
            } else {
                ExpSgKind::RExpSg
            },
            noise: Some(noise),
        })
    }

    pub fn kind(&self) -> ExpSgKind {
        self.kind
    }

    pub fn noise(&self) -> Option<&NoiseExpectations> {
        self.noise.as_ref()
    }

    /// Dense row `w`, zeros included.
    pub fn dense_row(&self, w: u32) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.emb.len());
        let ctx = self.emb.context_matrix().expect("checked at construction");
        score_row(self.emb.word_matrix(), ctx, self.emb.dim(), w, &mut out);
        if let Some(noise) = &self.noise {
            let cw = noise.ctx_expect[w as usize];
            for (x, we) in out.iter_mut().zip(&noise.word_expect) {
                *x = *x - cw - we;
                if self.kind == ExpSgKind::PrExpSg && *x < 0.0 {
                    *x = 0.0;
                }
            }
        }
        out
    }

    /// Materialize as an [`ExplicitMatrix`], storing only nonzero cells.
    pub fn to_matrix(&self) -> ExplicitMatrix {
        let n = self.emb.len();
        let rows: Vec<Vec<(u32, f64)>> = (0..n as u32)
            .into_par_iter()
            .map(|w| {
                self.dense_row(w)
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, v)| v != 0.0)
                    .map(|(c, v)| (c as u32, v))
                    .collect()
            })
            .collect();
        let params = match &self.noise {
            Some(nz) => vec![("alpha".to_string(), nz.alpha.to_string())],
            None => Vec::new(),
        };
        ExplicitMatrix::from_rows(n, self.kind.tag(), params, rows)
            .expect("rows are generated in column order")
    }
}

impl Representation for LazyExpSg<'_> {
    fn num_rows(&self) -> usize {
        self.emb.len()
    }

    fn row(&self, id: u32) -> Row<'_> {
        Row::Dense(Cow::Owned(self.dense_row(id)))
    }
}

fn dense_guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            dim: n,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// Dense `sigma(V_w . V~_c)` matrix.
pub fn expsg(emb: &DenseEmbeddings) -> Result<ExplicitMatrix> {
    dense_guard(emb.len())?;
    Ok(LazyExpSg::expsg(emb)?.to_matrix())
}

/// Dense ExpSG minus both noise expectations; values lie in (-2, 1).
pub fn rexpsg(emb: &DenseEmbeddings, vocab: &Vocabulary, alpha: f64) -> Result<ExplicitMatrix> {
    dense_guard(emb.len())?;
    Ok(LazyExpSg::reduced(emb, vocab, alpha, false)?.to_matrix())
}

/// Positive part of RExpSG. Sparse, so any vocabulary size is allowed.
pub fn prexpsg(emb: &DenseEmbeddings, vocab: &Vocabulary, alpha: f64) -> Result<ExplicitMatrix> {
    Ok(LazyExpSg::reduced(emb, vocab, alpha, true)?.to_matrix())
}
