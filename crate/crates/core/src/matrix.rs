//! Row-sparse `|W| x |W|` explicit representations and their file format.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::local::Feature;

/// Which construction produced a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuilderTag {
    Pmi,
    Ppmi,
    Sppmi,
    ExpSg,
    RExpSg,
    PrExpSg,
    Adapted(Feature),
}

impl BuilderTag {
    /// Builders whose stored values must all be strictly positive.
    pub fn is_positive(self) -> bool {
        matches!(self, BuilderTag::Ppmi | BuilderTag::Sppmi | BuilderTag::PrExpSg)
    }
}

impl fmt::Display for BuilderTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuilderTag::Pmi => f.write_str("pmi"),
            BuilderTag::Ppmi => f.write_str("ppmi"),
            BuilderTag::Sppmi => f.write_str("sppmi"),
            BuilderTag::ExpSg => f.write_str("expsg"),
            BuilderTag::RExpSg => f.write_str("rexpsg"),
            BuilderTag::PrExpSg => f.write_str("prexpsg"),
            BuilderTag::Adapted(v) => write!(f, "adapted:{v}"),
        }
    }
}

impl FromStr for BuilderTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pmi" => BuilderTag::Pmi,
            "ppmi" => BuilderTag::Ppmi,
            "sppmi" => BuilderTag::Sppmi,
            "expsg" => BuilderTag::ExpSg,
            "rexpsg" => BuilderTag::RExpSg,
            "prexpsg" => BuilderTag::PrExpSg,
            other => match other.strip_prefix("adapted:") {
                Some(v) => BuilderTag::Adapted(v.parse()?),
                None => return Err(Error::InvalidParam(format!("unknown builder `{s}`"))),
            },
        })
    }
}

/// Borrowed view of one sparse row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Compressed sparse rows. Only nonzero cells are stored and column ids
/// are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitMatrix {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    builder: BuilderTag,
    params: Vec<(String, String)>,
}

impl ExplicitMatrix {
    /// Start an empty matrix; rows are appended in order with [`push_row`](Self::push_row).
    pub fn new(dim: usize, builder: BuilderTag, params: Vec<(String, String)>) -> Self {
        let mut indptr = Vec::with_capacity(dim + 1);
        indptr.push(0);
        ExplicitMatrix {
            dim,
            indptr,
            indices: Vec::new(),
            values: Vec::new(),
            builder,
            params,
        }
    }

    /// Append the next row. Zero values are dropped; column ids must be
    /// strictly increasing and `< dim`.
    pub fn push_row<I>(&mut self, cells: I) -> Result<()>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        if self.num_rows_pushed() >= self.dim {
            return Err(Error::DimensionMismatch(format!(
                "more than {} rows pushed",
                self.dim
            )));
        }
        let start = self.indices.len();
        let mut last: Option<u32> = None;
        for (c, v) in cells {
            if c as usize >= self.dim || last.is_some_and(|l| l >= c) {
                self.indices.truncate(start);
                self.values.truncate(start);
                return Err(Error::InvalidParam(format!(
                    "row {}: column {c} out of order or out of range",
                    self.num_rows_pushed()
                )));
            }
            last = Some(c);
            if v != 0.0 {
                self.indices.push(c);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        Ok(())
    }

    fn num_rows_pushed(&self) -> usize {
        self.indptr.len() - 1
    }

    /// Pad with empty rows up to `dim`.
    pub fn finish(mut self) -> Self {
        while self.num_rows_pushed() < self.dim {
            self.indptr.push(self.indices.len());
        }
        self
    }

    pub fn from_rows<I, R>(
        dim: usize,
        builder: BuilderTag,
        params: Vec<(String, String)>,
        rows: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (u32, f64)>,
    {
        let mut m = ExplicitMatrix::new(dim, builder, params);
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m.finish())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn builder(&self) -> BuilderTag {
        self.builder
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }

    pub fn row(&self, w: u32) -> SparseRow<'_> {
        let (a, b) = (self.indptr[w as usize], self.indptr[w as usize + 1]);
        SparseRow {
            indices: &self.indices[a..b],
            values: &self.values[a..b],
        }
    }

    /// Cell value; absent cells read as 0.
    pub fn get(&self, w: u32, c: u32) -> f64 {
        let r = self.row(w);
        r.indices
            .binary_search(&c)
            .map(|i| r.values[i])
            .unwrap_or(0.0)
    }

    pub fn cells(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.dim as u32).flat_map(move |w| self.row(w).iter().map(move |(c, v)| (w, c, v)))
    }

    /// Apply `f(w, c, value)` to every stored cell, keeping the support
    /// fixed apart from cells that map to exactly zero.
    pub fn map_cells<F>(&self, builder: BuilderTag, params: Vec<(String, String)>, mut f: F) -> Self
    where
        F: FnMut(u32, u32, f64) -> f64,
    {
        let mut m = ExplicitMatrix::new(self.dim, builder, params);
        for w in 0..self.dim as u32 {
            let row: Vec<(u32, f64)> = self.row(w).iter().map(|(c, v)| (c, f(w, c, v))).collect();
            m.push_row(row).expect("source row is already ordered");
        }
        m
    }

    pub fn sparsity(&self) -> SparsityReport {
        sparsity(self)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let params = if self.params.is_empty() {
            "none".to_string()
        } else {
            self.params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(
            out,
            "#explicit v1 builder={} dim={} params={}",
            self.builder, self.dim, params
        )?;
        for (w, c, v) in self.cells() {
            writeln!(out, "{w}\t{c}\t{}", format_exp8(v))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(f);
        self.write(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        const WHAT: &str = "explicit matrix";
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(WHAT, 1, "missing header"))??;
        let rest = header
            .strip_prefix("#explicit v1 ")
            .ok_or_else(|| Error::format(WHAT, 1, format!("bad header `{header}`")))?;
        let (mut builder, mut dim, mut params) = (None, None, None);
        for tok in rest.split_whitespace() {
            if let Some(b) = tok.strip_prefix("builder=") {
                builder = Some(b.parse::<BuilderTag>()?);
            } else if let Some(d) = tok.strip_prefix("dim=") {
                dim = Some(
                    d.parse::<usize>()
                        .map_err(|_| Error::format(WHAT, 1, format!("bad dim `{d}`")))?,
                );
            } else if let Some(p) = tok.strip_prefix("params=") {
                params = Some(parse_params(p).ok_or_else(|| Error::format(WHAT, 1, "bad params"))?);
            } else {
                return Err(Error::format(WHAT, 1, format!("unexpected `{tok}`")));
            }
        }
        let (builder, dim, params) = match (builder, dim, params) {
            (Some(b), Some(d), Some(p)) => (b, d, p),
            _ => return Err(Error::format(WHAT, 1, "header needs builder, dim and params")),
        };

        let mut m = ExplicitMatrix::new(dim, builder, params);
        let mut current: Vec<(u32, f64)> = Vec::new();
        let mut current_w: u32 = 0;
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            let mut f = line.split('\t');
            let (w, c, v) = match (f.next(), f.next(), f.next(), f.next()) {
                (Some(w), Some(c), Some(v), None) => (w, c, v),
                _ => return Err(Error::format(WHAT, lineno, "expected w<TAB>c<TAB>value")),
            };
            let bad = |name: &str| Error::format(WHAT, lineno, format!("bad {name}"));
            let w: u32 = w.parse().map_err(|_| bad("w_id"))?;
            let c: u32 = c.parse().map_err(|_| bad("c_id"))?;
            let v: f64 = v.parse().map_err(|_| bad("value"))?;
            if w as usize >= dim || c as usize >= dim {
                return Err(Error::format(WHAT, lineno, "id out of range"));
            }
            if v == 0.0 || !v.is_finite() {
                return Err(Error::format(WHAT, lineno, "stored values must be finite and nonzero"));
            }
            if w < current_w {
                return Err(Error::format(WHAT, lineno, "rows not sorted"));
            }
            while current_w < w {
                m.push_row(current.drain(..))
                    .map_err(|e| Error::format(WHAT, lineno, e.to_string()))?;
                current_w += 1;
            }
            if current.last().is_some_and(|&(pc, _)| pc >= c) {
                return Err(Error::format(WHAT, lineno, "columns not strictly increasing"));
            }
            current.push((c, v));
        }
        if dim > 0 {
            m.push_row(current.drain(..))?;
        }
        Ok(m.finish())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f))
    }
}

fn parse_params(s: &str) -> Option<Vec<(String, String)>> {
    if s == "none" {
        return Some(Vec::new());
    }
    s.split(',')
        .map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

/// C `printf("%.8e")` rendering: mantissa with 8 decimals, signed exponent
/// of at least two digits.
pub fn format_exp8(v: f64) -> String {
    let s = format!("{v:.8e}");
    match s.split_once('e') {
        Some((mant, exp)) => {
            let e: i32 = exp.parse().expect("rust exponent is an integer");
            let sign = if e < 0 { '-' } else { '+' };
            format!("{mant}e{sign}{:02}", e.abs())
        }
        None => s,
    }
}

/// Fraction of zero cells over `|W|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    pub builder: BuilderTag,
    pub fraction_zero: f64,
}

pub fn sparsity(m: &ExplicitMatrix) -> SparsityReport {
    let cells = (m.dim as f64) * (m.dim as f64);
    let fraction_zero = if cells == 0.0 {
        1.0
    } else {
        1.0 - m.nnz() as f64 / cells
    };
    SparsityReport {
        builder: m.builder,
        fraction_zero,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn small() -> ExplicitMatrix {
        ExplicitMatrix::from_rows(
            3,
            BuilderTag::Ppmi,
            vec![("alpha".into(), "none".into())],
            vec![
                vec![(0, 1.5), (2, 0.25)],
                vec![],
                vec![(0, 0.0), (1, 3.0e-9), (2, 7.0)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn zeros_are_not_stored() {
        let m = small();
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.get(2, 0), 0.0);
        assert_eq!(m.get(2, 2), 7.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn unordered_columns_rejected() {
        let r = ExplicitMatrix::from_rows(3, BuilderTag::Pmi, vec![], vec![vec![(2, 1.0), (1, 1.0)]]);
        assert!(r.is_err());
        let r = ExplicitMatrix::from_rows(3, BuilderTag::Pmi, vec![], vec![vec![(3, 1.0)]]);
        assert!(r.is_err());
    }

    #[test]
    fn sparsity_examples() {
        let empty = ExplicitMatrix::new(5, BuilderTag::Ppmi, vec![]).finish();
        assert_eq!(sparsity(&empty).fraction_zero, 1.0);

        let dense = ExplicitMatrix::from_rows(
            2,
            BuilderTag::ExpSg,
            vec![],
            vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 0.5), (1, 0.5)]],
        )
        .unwrap();
        assert_eq!(sparsity(&dense).fraction_zero, 0.0);

        assert!((sparsity(&small()).fraction_zero - (1.0 - 4.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn c_style_exponent() {
        assert_eq!(format_exp8(1.0), "1.00000000e+00");
        assert_eq!(format_exp8(-0.000123456789), "-1.23456789e-04");
        assert_eq!(format_exp8(6.02e23), "6.02000000e+23");
        assert_eq!(format_exp8(1e-300), "1.00000000e-300");
        assert_eq!("1.00000000e+00".parse::<f64>().unwrap(), 1.0);
    }

    #[test]
    fn file_round_trip_is_byte_identical() {
        let m = small();
        let mut a = Vec::new();
        m.write(&mut a).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with("#explicit v1 builder=ppmi dim=3 params=alpha=none\n0\t0\t1.50000000e+00\n"));
        let back = ExplicitMatrix::read(Cursor::new(&a)).unwrap();
        let mut b = Vec::new();
        back.write(&mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(back.builder(), BuilderTag::Ppmi);
        assert_eq!(back.nnz(), 4);
    }

    #[test]
    fn reader_rejects_malformed() {
        let bad = [
            "",
            "#explicit v2 builder=pmi dim=2 params=none\n",
            "#explicit v1 builder=foo dim=2 params=none\n",
            "#explicit v1 builder=pmi dim=2\n",
            "#explicit v1 builder=pmi dim=2 params=none\n0\t5\t1.0\n",
            "#explicit v1 builder=pmi dim=2 params=none\n1\t0\t1.0\n0\t0\t1.0\n",
            "#explicit v1 builder=pmi dim=2 params=none\n0\t1\t1.0\n0\t0\t1.0\n",
            "#explicit v1 builder=pmi dim=2 params=none\n0\t1\t0.0\n",
            "#explicit v1 builder=pmi dim=2 params=none\n0\t1\n",
        ];
        for b in bad {
            assert!(ExplicitMatrix::read(Cursor::new(b)).is_err(), "{b:?}");
        }
    }

    #[test]
    fn builder_tags_parse() {
        for t in ["pmi", "ppmi", "sppmi", "expsg", "rexpsg", "prexpsg", "adapted:f3"] {
            assert_eq!(t.parse::<BuilderTag>().unwrap().to_string(), t);
        }
        assert!("adapted:f9".parse::<BuilderTag>().is_err());
    }
}
