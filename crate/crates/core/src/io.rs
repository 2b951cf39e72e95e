//! Line-oriented text formats for symbols, subspace bases and operator tuples.
//!
//! All formats share one grammar: `#` starts a comment, `key = value` sets a
//! field, and `begin <label>` … `end` encloses a block of data lines.
//!
//! Symbol file: one record per coefficient, `k₁ … kₙ row col re im`. A
//! rational symbol has a `numerator` block and a `denominator` block instead.
//! Optional keys `nvars`, `rows`, `cols` fix the shape (otherwise inferred).
//!
//! ```text
//! nvars = 2
//! begin numerator
//! 1 1 0 0 2 0
//! 1 0 0 0 -1 0
//! 0 1 0 0 -1 0
//! end
//! begin denominator
//! 0 0 0 0 2 0
//! 1 0 0 0 -1 0
//! 0 1 0 0 -1 0
//! end
//! ```
//!
//! Basis file: keys `caps = d₁,…,dₙ` and optional `channels = m`, then one
//! basis vector per data line as `re im` pairs in the fixed basis order.
//!
//! Tuple file: keys `dim` and `count`, then blocks `begin T1` … `end` with one
//! matrix row per line as `re im` pairs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{MultiIndex, TruncationGrid};
use crate::symbol::{AnalyticSymbol, SymbolKind};
use crate::{CMatrix, C64};

/// One significant line of a document.
#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub number: usize,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Field { line: usize, key: String, value: String },
    Block { line: usize, label: String, body: Vec<Line> },
}

pub fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Splits text into fields and blocks; line numbers are 1-based.
pub fn parse_document(text: &str) -> Result<Vec<Item>> {
    let mut items = Vec::new();
    let mut open: Option<(usize, String, Vec<Line>)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("begin") {
            if !(rest.is_empty() || rest.starts_with(char::is_whitespace)) {
                return Err(parse_error(number, format!("unexpected `{content}`")));
            }
            if let Some((start, label, _)) = &open {
                return Err(parse_error(
                    number,
                    format!("block `{label}` opened at line {start} is not closed"),
                ));
            }
            let label = rest.trim();
            if label.is_empty() {
                return Err(parse_error(number, "block needs a label"));
            }
            open = Some((number, label.to_string(), Vec::new()));
            continue;
        }
        if content == "end" {
            match open.take() {
                Some((line, label, body)) => items.push(Item::Block { line, label, body }),
                None => return Err(parse_error(number, "`end` without `begin`")),
            }
            continue;
        }
        if let Some((_, _, body)) = open.as_mut() {
            body.push(Line {
                number,
                text: content.to_string(),
            });
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(parse_error(number, format!("expected `key = value`, found `{content}`")));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(parse_error(number, "empty key"));
        }
        items.push(Item::Field {
            line: number,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    if let Some((line, label, _)) = open {
        return Err(parse_error(line, format!("block `{label}` is not closed")));
    }
    Ok(items)
}

pub fn parse_f64(line: usize, field: &str, token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(line, format!("{field}: `{token}` is not a finite number")))
}

pub fn parse_usize(line: usize, field: &str, token: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| parse_error(line, format!("{field}: `{token}` is not a non-negative integer")))
}

/// Comma-separated non-negative integers.
pub fn parse_usize_list(line: usize, field: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|t| parse_usize(line, field, t.trim()))
        .collect()
}

/// `re im` pairs on a data line.
pub fn parse_complex_row(line: &Line, field: &str) -> Result<Vec<C64>> {
    let tokens: Vec<&str> = line.text.split_whitespace().collect();
    if !tokens.len().is_multiple_of(2) {
        return Err(parse_error(
            line.number,
            format!("{field}: expected `re im` pairs, found {} numbers", tokens.len()),
        ));
    }
    tokens
        .chunks(2)
        .map(|p| {
            Ok(C64::new(
                parse_f64(line.number, field, p[0])?,
                parse_f64(line.number, field, p[1])?,
            ))
        })
        .collect()
}

struct Record {
    line: usize,
    k: MultiIndex,
    row: usize,
    col: usize,
    value: C64,
}

fn parse_records(lines: &[Line], nvars: Option<usize>) -> Result<Vec<Record>> {
    let mut out = Vec::with_capacity(lines.len());
    let mut width: Option<usize> = nvars.map(|n| n + 4);
    for l in lines {
        let tokens: Vec<&str> = l.text.split_whitespace().collect();
        let w = *width.get_or_insert(tokens.len());
        if tokens.len() != w || w < 5 {
            return Err(parse_error(
                l.number,
                format!(
                    "coefficient record needs {} fields (k₁…kₙ row col re im), found {}",
                    if w >= 5 { w } else { 5 },
                    tokens.len()
                ),
            ));
        }
        let n = w - 4;
        let k = tokens[..n]
            .iter()
            .map(|t| parse_usize(l.number, "exponent", t))
            .collect::<Result<Vec<_>>>()?;
        out.push(Record {
            line: l.number,
            k: MultiIndex::new(k),
            row: parse_usize(l.number, "row", tokens[n])?,
            col: parse_usize(l.number, "col", tokens[n + 1])?,
            value: C64::new(
                parse_f64(l.number, "re", tokens[n + 2])?,
                parse_f64(l.number, "im", tokens[n + 3])?,
            ),
        });
    }
    Ok(out)
}

fn records_to_symbol(
    records: &[Record],
    nvars: Option<usize>,
    rows: Option<usize>,
    cols: Option<usize>,
    line: usize,
) -> Result<AnalyticSymbol> {
    let Some(first) = records.first() else {
        return Err(parse_error(line, "no coefficient records"));
    };
    let n = nvars.unwrap_or(first.k.len());
    let rows = rows.unwrap_or_else(|| records.iter().map(|r| r.row + 1).max().unwrap_or(1));
    let cols = cols.unwrap_or_else(|| records.iter().map(|r| r.col + 1).max().unwrap_or(1));
    for r in records {
        if r.row >= rows || r.col >= cols {
            return Err(parse_error(
                r.line,
                format!("entry ({}, {}) outside a {rows}x{cols} coefficient", r.row, r.col),
            ));
        }
    }
    let mut terms: BTreeMap<MultiIndex, CMatrix> = BTreeMap::new();
    for r in records {
        let m = terms
            .entry(r.k.clone())
            .or_insert_with(|| CMatrix::zeros(rows, cols));
        m[(r.row, r.col)] += r.value;
    }
    AnalyticSymbol::polynomial(n, rows, cols, terms)
}

/// Reads a symbol file (polynomial records, or `numerator`/`denominator` blocks).
pub fn parse_symbol(text: &str) -> Result<AnalyticSymbol> {
    parse_symbol_items(&parse_document(text)?, 0)
}

/// Symbol from already split items; `base_line` is reported for empty input.
pub fn parse_symbol_items(items: &[Item], base_line: usize) -> Result<AnalyticSymbol> {
    let mut nvars = None;
    let mut rows = None;
    let mut cols = None;
    let mut loose = Vec::new();
    let mut numerator = None;
    let mut denominator = None;
    for item in items {
        match item {
            Item::Field { line, key, value } => match key.as_str() {
                "nvars" => nvars = Some(parse_usize(*line, key, value)?),
                "rows" => rows = Some(parse_usize(*line, key, value)?),
                "cols" => cols = Some(parse_usize(*line, key, value)?),
                _ => {
                    // bare records have no `=`; anything else is unknown
                    return Err(parse_error(*line, format!("unknown symbol field `{key}`")));
                }
            },
            Item::Block { line, label, body } => match label.as_str() {
                "numerator" => numerator = Some((*line, body.clone())),
                "denominator" => denominator = Some((*line, body.clone())),
                "coefficients" => loose.extend(body.iter().cloned()),
                other => {
                    return Err(parse_error(*line, format!("unknown symbol block `{other}`")))
                }
            },
        }
    }
    match (numerator, denominator) {
        (Some((nl, num)), Some((dl, den))) => {
            let num = records_to_symbol(&parse_records(&num, nvars)?, nvars, rows, cols, nl)?;
            let den = records_to_symbol(
                &parse_records(&den, Some(num.nvars()))?,
                Some(num.nvars()),
                Some(1),
                Some(1),
                dl,
            )?;
            AnalyticSymbol::rational(num, den).map_err(|e| parse_error(dl, e.to_string()))
        }
        (Some((l, _)), None) => Err(parse_error(l, "numerator without denominator block")),
        (None, Some((l, _))) => Err(parse_error(l, "denominator without numerator block")),
        (None, None) => {
            records_to_symbol(&parse_records(&loose, nvars)?, nvars, rows, cols, base_line)
        }
    }
}

/// Symbol records from raw text lines (no `key = value` fields allowed).
pub fn parse_symbol_records(lines: &[Line], line: usize) -> Result<AnalyticSymbol> {
    records_to_symbol(&parse_records(lines, None)?, None, None, None, line)
}

fn write_records(out: &mut String, symbol: &AnalyticSymbol) {
    for (k, m) in symbol.coefficients() {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    for e in k.entries() {
                        out.push_str(&format!("{e} "));
                    }
                    out.push_str(&format!("{r} {c} {:?} {:?}\n", v.re, v.im));
                }
            }
        }
    }
}

/// Writes a polynomial or rational symbol; series symbols are written as
/// their stored coefficient table.
pub fn format_symbol(symbol: &AnalyticSymbol) -> String {
    let mut out = format!(
        "nvars = {}\nrows = {}\ncols = {}\n",
        symbol.nvars(),
        symbol.rows(),
        symbol.cols()
    );
    match symbol.kind() {
        SymbolKind::Rational(form) => {
            out.push_str("begin numerator\n");
            write_records(&mut out, &form.numerator);
            out.push_str("end\nbegin denominator\n");
            write_records(&mut out, &form.denominator);
            out.push_str("end\n");
        }
        _ => {
            out.push_str("begin coefficients\n");
            write_records(&mut out, symbol);
            out.push_str("end\n");
        }
    }
    out
}

/// Reads a basis file: the grid and the basis vectors as columns.
pub fn parse_basis(text: &str) -> Result<(TruncationGrid, CMatrix)> {
    let items = parse_document(text)?;
    let mut caps = None;
    let mut channels = 1;
    let mut vectors: Vec<(usize, Vec<C64>)> = Vec::new();
    for item in &items {
        match item {
            Item::Field { line, key, value } => match key.as_str() {
                "caps" => caps = Some((*line, parse_usize_list(*line, key, value)?)),
                "channels" => channels = parse_usize(*line, key, value)?,
                _ => return Err(parse_error(*line, format!("unknown basis field `{key}`"))),
            },
            Item::Block { label, body, line } => {
                if label != "vectors" {
                    return Err(parse_error(*line, format!("unknown basis block `{label}`")));
                }
                for l in body {
                    vectors.push((l.number, parse_complex_row(l, "vector")?));
                }
            }
        }
    }
    let Some((cap_line, caps)) = caps else {
        return Err(parse_error(1, "basis file needs `caps`"));
    };
    let grid = TruncationGrid::new(caps, channels).map_err(|e| parse_error(cap_line, e.to_string()))?;
    let mut m = CMatrix::zeros(grid.dim(), vectors.len());
    for (j, (line, v)) in vectors.iter().enumerate() {
        if v.len() != grid.dim() {
            return Err(parse_error(
                *line,
                format!("vector has {} entries, grid dimension is {}", v.len(), grid.dim()),
            ));
        }
        for (i, z) in v.iter().enumerate() {
            m[(i, j)] = *z;
        }
    }
    Ok((grid, m))
}

fn write_row(out: &mut String, values: impl Iterator<Item = C64>) {
    let parts: Vec<String> = values.map(|z| format!("{:?} {:?}", z.re, z.im)).collect();
    out.push_str(&parts.join(" "));
    out.push('\n');
}

pub fn format_basis(grid: &TruncationGrid, columns: &CMatrix) -> String {
    let caps: Vec<String> = grid.caps().iter().map(|d| d.to_string()).collect();
    let mut out = format!("caps = {}\nchannels = {}\nbegin vectors\n", caps.join(","), grid.coeff_dim());
    for j in 0..columns.ncols() {
        write_row(&mut out, columns.column(j).iter().copied());
    }
    out.push_str("end\n");
    out
}

/// Reads a tuple file into its matrices, ordered by block label `T1, T2, …`.
pub fn parse_tuple(text: &str) -> Result<Vec<CMatrix>> {
    parse_tuple_items(&parse_document(text)?)
}

pub fn parse_tuple_items(items: &[Item]) -> Result<Vec<CMatrix>> {
    let mut dim = None;
    let mut count = None;
    let mut blocks: BTreeMap<usize, (usize, &Vec<Line>)> = BTreeMap::new();
    for item in items {
        match item {
            Item::Field { line, key, value } => match key.as_str() {
                "dim" => dim = Some(parse_usize(*line, key, value)?),
                "count" => count = Some((*line, parse_usize(*line, key, value)?)),
                _ => return Err(parse_error(*line, format!("unknown tuple field `{key}`"))),
            },
            Item::Block { line, label, body } => {
                let idx = label
                    .strip_prefix('T')
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|&i| i >= 1)
                    .ok_or_else(|| parse_error(*line, format!("tuple blocks are T1, T2, …; found `{label}`")))?;
                if blocks.insert(idx, (*line, body)).is_some() {
                    return Err(parse_error(*line, format!("duplicate block `{label}`")));
                }
            }
        }
    }
    let Some(dim) = dim else {
        return Err(parse_error(1, "tuple file needs `dim`"));
    };
    if let Some((line, c)) = count {
        if c != blocks.len() {
            return Err(parse_error(line, format!("count = {c} but {} blocks given", blocks.len())));
        }
    }
    let mut out = Vec::new();
    for (expected, (idx, (line, body))) in (1..).zip(&blocks) {
        if *idx != expected {
            return Err(parse_error(*line, format!("block T{expected} is missing")));
        }
        if body.len() != dim {
            return Err(parse_error(*line, format!("T{idx} has {} rows, dim is {dim}", body.len())));
        }
        let mut m = CMatrix::zeros(dim, dim);
        for (r, l) in body.iter().enumerate() {
            let row = parse_complex_row(l, "matrix row")?;
            if row.len() != dim {
                return Err(parse_error(l.number, format!("row has {} entries, dim is {dim}", row.len())));
            }
            for (c, z) in row.into_iter().enumerate() {
                m[(r, c)] = z;
            }
        }
        out.push(m);
    }
    if out.is_empty() {
        return Err(parse_error(1, "tuple file has no matrices"));
    }
    Ok(out)
}

pub fn format_tuple(ops: &[CMatrix]) -> String {
    let dim = ops.first().map_or(0, |m| m.nrows());
    let mut out = format!("dim = {dim}\ncount = {}\n", ops.len());
    for (i, m) in ops.iter().enumerate() {
        out.push_str(&format!("begin T{}\n", i + 1));
        for r in 0..m.nrows() {
            write_row(&mut out, m.row(r).iter().copied());
        }
        out.push_str("end\n");
    }
    out
}
