//! Plain-text matrix blocks: a `rows cols` line followed by row-major entries.
//!
//! An instance file is a sequence of such blocks.

use std::fmt::Write as _;

use crate::{Error, Matrix, Result};

pub fn write_matrix(out: &mut String, m: &Matrix) {
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

/// Parses every block in `text`.
pub fn read_matrices(text: &str) -> Result<Vec<Matrix>> {
    let mut tokens = text.split_whitespace();
    let mut blocks = Vec::new();
    while let Some(first) = tokens.next() {
        let rows = parse_dim(first)?;
        let cols = parse_dim(tokens.next().ok_or_else(|| truncated("column count"))?)?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let tok = tokens.next().ok_or_else(|| truncated("matrix entries"))?;
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad matrix entry {tok:?}")))?;
            data.push(v);
        }
        blocks.push(Matrix::from_row_slice(rows, cols, &data));
    }
    Ok(blocks)
}

fn parse_dim(tok: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("bad matrix dimension {tok:?}")))
}

fn truncated(what: &str) -> Error {
    Error::Parse(format!("instance file ended while reading {what}"))
}
