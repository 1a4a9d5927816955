//! Matrix Market files.
//!
//! Reads `coordinate` files with `real`, `integer` or `pattern` fields and
//! `general`, `symmetric` or `skew-symmetric` symmetry (expanded to general
//! on read), and `array` files as dense blocks. Writes coordinate real
//! general and array real general.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dense::DenseBlock;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

struct Header {
    format: Format,
    field: Field,
    symmetry: Symmetry,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(line: &str, lineno: usize) -> Result<Header> {
    let words: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(lineno, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let format = match words[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(parse_err(lineno, format!("unsupported format '{other}'"))),
    };
    let field = match words[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" if format == Format::Coordinate => Field::Pattern,
        other => return Err(parse_err(lineno, format!("unsupported field '{other}'"))),
    };
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(lineno, format!("unsupported symmetry '{other}'"))),
    };
    Ok(Header {
        format,
        field,
        symmetry,
    })
}

/// Lines after the header, skipping comments and blank lines, numbered from 1.
fn data_lines<R: BufRead>(reader: R) -> Result<(Header, Vec<(usize, String)>)> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => return Err(parse_err(1, "empty file")),
            Some((i, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break parse_header(&line, i + 1)?;
            }
        }
    };
    let mut body = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        body.push((i + 1, t.to_string()));
    }
    Ok((header, body))
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, lineno: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(lineno, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(lineno, format!("invalid {what} '{tok}'")))
}

/// Reads a coordinate-format sparse matrix.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SparseMatrix> {
    let (header, body) = data_lines(reader)?;
    if header.format != Format::Coordinate {
        return Err(parse_err(1, "expected a coordinate file"));
    }
    let mut body = body.into_iter();
    let (lineno, size) = body.next().ok_or_else(|| parse_err(1, "missing size line"))?;
    let mut it = size.split_whitespace();
    let nrows: usize = parse_num(it.next(), lineno, "row count")?;
    let ncols: usize = parse_num(it.next(), lineno, "column count")?;
    let nnz: usize = parse_num(it.next(), lineno, "entry count")?;
    if it.next().is_some() {
        return Err(parse_err(lineno, "size line has extra fields"));
    }
    if header.symmetry != Symmetry::General && nrows != ncols {
        return Err(parse_err(lineno, "symmetric storage needs a square matrix"));
    }

    let mut triplets = Vec::with_capacity(nnz * 2);
    let mut count = 0;
    for (lineno, line) in body {
        count += 1;
        if count > nnz {
            return Err(parse_err(lineno, format!("more than the declared {nnz} entries")));
        }
        let mut it = line.split_whitespace();
        let i: usize = parse_num(it.next(), lineno, "row index")?;
        let j: usize = parse_num(it.next(), lineno, "column index")?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(parse_err(lineno, format!("index ({i}, {j}) outside {nrows}x{ncols}")));
        }
        let v: f64 = match header.field {
            Field::Pattern => 1.0,
            Field::Integer => parse_num::<i64>(it.next(), lineno, "value")? as f64,
            Field::Real => parse_num(it.next(), lineno, "value")?,
        };
        if !v.is_finite() {
            return Err(parse_err(lineno, "non-finite value"));
        }
        if it.next().is_some() {
            return Err(parse_err(lineno, "entry has extra fields"));
        }
        let (r, c) = (i - 1, j - 1);
        if header.symmetry != Symmetry::General && c > r {
            return Err(parse_err(lineno, "symmetric storage holds the lower triangle only"));
        }
        triplets.push((r, c, v));
        if r != c {
            match header.symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => triplets.push((c, r, v)),
                Symmetry::SkewSymmetric => triplets.push((c, r, -v)),
            }
        } else if header.symmetry == Symmetry::SkewSymmetric && v != 0.0 {
            return Err(parse_err(lineno, "skew-symmetric diagonal must be zero"));
        }
    }
    if count < nnz {
        return Err(parse_err(0, format!("declared {nnz} entries, found {count}")));
    }
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
}

/// Reads a dense `array` file.
pub fn read_dense_array<R: BufRead>(reader: R) -> Result<DenseBlock> {
    let (header, body) = data_lines(reader)?;
    if header.format != Format::Array || header.symmetry != Symmetry::General {
        return Err(parse_err(1, "expected an array general file"));
    }
    let mut body = body.into_iter();
    let (lineno, size) = body.next().ok_or_else(|| parse_err(1, "missing size line"))?;
    let mut it = size.split_whitespace();
    let nrows: usize = parse_num(it.next(), lineno, "row count")?;
    let ncols: usize = parse_num(it.next(), lineno, "column count")?;
    let mut data = Vec::with_capacity(nrows * ncols);
    for (lineno, line) in body {
        let v: f64 = parse_num(Some(line.as_str()), lineno, "value")?;
        data.push(v);
    }
    if data.len() != nrows * ncols {
        return Err(parse_err(0, format!("expected {} values, found {}", nrows * ncols, data.len())));
    }
    DenseBlock::from_col_major(nrows, ncols, data)
}

pub fn read_matrix_market_file(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    read_matrix_market(BufReader::new(File::open(path)?))
}

pub fn read_dense_array_file(path: impl AsRef<Path>) -> Result<DenseBlock> {
    read_dense_array(BufReader::new(File::open(path)?))
}

/// Writes `a` as coordinate real general with 1-based indices. Values use
/// the shortest round-trip representation.
pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a dense block as array real general, column by column.
pub fn write_dense_array<W: Write>(m: &DenseBlock, mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for v in m.as_slice() {
        writeln!(out, "{v:e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix_market_file(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_matrix_market(a, BufWriter::new(File::create(path)?))
}

pub fn write_dense_array_file(m: &DenseBlock, path: impl AsRef<Path>) -> Result<()> {
    write_dense_array(m, BufWriter::new(File::create(path)?))
}
