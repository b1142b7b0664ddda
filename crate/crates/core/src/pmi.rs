//! PMI, PPMI and shifted PPMI built from co-occurrence counts.
//!
//! All logarithms are natural. Cells with zero co-occurrence are never
//! stored: for PMI they stand for minus infinity, for the positive
//! variants they are zero.

use rayon::prelude::*;

use crate::cooc::{smooth_context, CoocTable};
use crate::error::{Error, Result};
use crate::matrix::{BuilderTag, ExplicitMatrix};

fn context_probs(table: &CoocTable, alpha: Option<f64>) -> Result<Vec<f64>> {
    match alpha {
        Some(a) => Ok(smooth_context(table, a)?.probs),
        None => {
            let total = table.total() as f64;
            Ok(table
                .col_marginals()
                .iter()
                .map(|&n| n as f64 / total)
                .collect())
        }
    }
}

fn alpha_param(alpha: Option<f64>) -> (String, String) {
    let v = alpha.map_or_else(|| "none".to_string(), |a| a.to_string());
    ("alpha".to_string(), v)
}

/// `ln(p(w,c) / (p(w) p_alpha(c)))`, shifted by `shift` and optionally clamped at 0.
fn build(
    table: &CoocTable,
    alpha: Option<f64>,
    shift: f64,
    positive: bool,
    builder: BuilderTag,
    params: Vec<(String, String)>,
) -> Result<ExplicitMatrix> {
    if table.total() == 0 {
        return Err(Error::EmptyTable);
    }
    let total = table.total() as f64;
    let pc = context_probs(table, alpha)?;
    let rowm = table.row_marginals();
    let rows: Vec<Vec<(u32, f64)>> = (0..table.num_words() as u32)
        .into_par_iter()
        .map(|w| {
            let pw = rowm[w as usize] as f64 / total;
            table
                .row(w)
                .iter()
                .filter_map(|&(c, n)| {
                    let pwc = n as f64 / total;
                    let v = (pwc / (pw * pc[c as usize])).ln() - shift;
                    if positive && v <= 0.0 {
                        None
                    } else {
                        Some((c, v))
                    }
                })
                .collect()
        })
        .collect();
    ExplicitMatrix::from_rows(table.num_words(), builder, params, rows)
}

/// PMI over the observed pairs. With `alpha` set, the context marginal is
/// replaced by its smoothed form.
pub fn pmi(table: &CoocTable, alpha: Option<f64>) -> Result<ExplicitMatrix> {
    build(table, alpha, 0.0, false, BuilderTag::Pmi, vec![alpha_param(alpha)])
}

pub fn ppmi(table: &CoocTable, alpha: Option<f64>) -> Result<ExplicitMatrix> {
    build(table, alpha, 0.0, true, BuilderTag::Ppmi, vec![alpha_param(alpha)])
}

/// `max(PMI - ln k, 0)`
pub fn sppmi(table: &CoocTable, k: u32, alpha: Option<f64>) -> Result<ExplicitMatrix> {
    if k < 1 {
        return Err(Error::InvalidParam("sppmi shift k must be >= 1".into()));
    }
    let params = vec![("k".to_string(), k.to_string()), alpha_param(alpha)];
    build(table, alpha, f64::from(k).ln(), true, BuilderTag::Sppmi, params)
}
