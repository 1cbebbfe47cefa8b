//! Matrix Market input/output and CSV traces.
//!
//! Supported Matrix Market variants are `array` and `coordinate` formats with
//! `real` or (coordinate only) `pattern` fields, and `general` or `symmetric`
//! symmetry. Integer and complex fields are rejected rather than coerced, and
//! so are negative values, since the input of a nonnegative factorization
//! must be nonnegative.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, DenseMatrix, Matrix, MatrixRef};
use crate::solver::TraceRecord;

pub const TRACE_HEADER: [&str; 3] = ["sweep", "elapsed_s", "rel_residual"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

struct Lines<'p, R> {
    inner: std::io::Lines<BufReader<R>>,
    path: &'p Path,
    line: usize,
}

impl<R: Read> Lines<'_, R> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn raw(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            None => Ok(None),
            Some(line) => {
                self.line += 1;
                Ok(Some(line?))
            }
        }
    }

    /// Next line that is neither blank nor a comment.
    fn data(&mut self) -> Result<Option<String>> {
        while let Some(line) = self.raw()? {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('%') {
                return Ok(Some(t.to_string()));
            }
        }
        Ok(None)
    }

    fn expect_data(&mut self, what: &str) -> Result<String> {
        self.data()?
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn index(&self, tok: Option<&str>, what: &str) -> Result<usize> {
        let tok = tok.ok_or_else(|| self.err(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| self.err(format!("{what} `{tok}` is not a nonnegative integer")))
    }

    fn value(&self, tok: Option<&str>) -> Result<f64> {
        let tok = tok.ok_or_else(|| self.err("missing value"))?;
        let v: f64 = tok
            .parse()
            .map_err(|_| self.err(format!("value `{tok}` is not a real number")))?;
        if !v.is_finite() {
            return Err(self.err(format!("value `{tok}` is not finite")));
        }
        if v < 0.0 {
            return Err(self.err(format!("negative value {v}")));
        }
        Ok(v)
    }
}

/// Reads a Matrix Market file into dense or CSR storage depending on its
/// format. Coordinate indices are 1-based and duplicates are summed.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    parse_matrix_market(File::open(path)?, path)
}

/// Parses Matrix Market text from any reader; `path` only labels errors.
pub fn parse_matrix_market(reader: impl Read, path: &Path) -> Result<Matrix> {
    let mut lines = Lines {
        inner: BufReader::new(reader).lines(),
        path,
        line: 0,
    };

    let banner = lines
        .raw()?
        .ok_or_else(|| lines.err("empty file"))?
        .to_ascii_lowercase();
    let words: Vec<&str> = banner.split_whitespace().collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(lines.err("expected `%%MatrixMarket matrix <format> <field> <symmetry>`"));
    }
    let layout = match words[2] {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(lines.err(format!("unsupported format `{other}`"))),
    };
    let pattern = match (words[3], layout) {
        ("real", _) => false,
        ("pattern", Layout::Coordinate) => true,
        (other, _) => {
            return Err(lines.err(format!("unsupported field `{other}` for {}", words[2])))
        }
    };
    let symmetric = match words[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(lines.err(format!("unsupported symmetry `{other}`"))),
    };

    let size = lines.expect_data("size line")?;
    let mut tok = size.split_whitespace();
    let rows = lines.index(tok.next(), "row count")?;
    let cols = lines.index(tok.next(), "column count")?;
    if symmetric && rows != cols {
        return Err(lines.err(format!(
            "symmetric matrix must be square, got {rows}x{cols}"
        )));
    }

    match layout {
        Layout::Array => {
            if tok.next().is_some() {
                return Err(lines.err("array size line has extra fields"));
            }
            let mut dense = DenseMatrix::zeros(rows, cols);
            // Column-major; a symmetric file stores only the lower triangle.
            for j in 0..cols {
                let start = if symmetric { j } else { 0 };
                for i in start..rows {
                    let line = lines.expect_data("matrix value")?;
                    let mut t = line.split_whitespace();
                    let v = lines.value(t.next())?;
                    if t.next().is_some() {
                        return Err(lines.err("array line has extra fields"));
                    }
                    dense[(i, j)] = v;
                    if symmetric {
                        dense[(j, i)] = v;
                    }
                }
            }
            if lines.data()?.is_some() {
                return Err(lines.err("more values than the size line declares"));
            }
            Ok(Matrix::Dense(dense))
        }
        Layout::Coordinate => {
            let nnz = lines.index(tok.next(), "entry count")?;
            if tok.next().is_some() {
                return Err(lines.err("coordinate size line has extra fields"));
            }
            let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
            for _ in 0..nnz {
                let line = lines.expect_data("matrix entry")?;
                let mut t = line.split_whitespace();
                let i = lines.index(t.next(), "row index")?;
                let j = lines.index(t.next(), "column index")?;
                if i == 0 || i > rows || j == 0 || j > cols {
                    return Err(
                        lines.err(format!("index ({i}, {j}) outside a {rows}x{cols} matrix"))
                    );
                }
                let v = if pattern { 1.0 } else { lines.value(t.next())? };
                if t.next().is_some() {
                    return Err(lines.err("coordinate line has extra fields"));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
            if lines.data()?.is_some() {
                return Err(lines.err("more entries than the size line declares"));
            }
            Ok(Matrix::Sparse(CsrMatrix::from_triplets(
                rows, cols, triplets,
            )?))
        }
    }
}

/// Writes `array` format for dense input and `coordinate` format, in
/// row-major order, for sparse input. Values carry 17 significant digits.
pub fn write_matrix_market<'a>(m: impl Into<MatrixRef<'a>>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    format_matrix_market(m.into(), &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn format_matrix_market(m: MatrixRef<'_>, w: &mut impl Write) -> Result<()> {
    match m {
        MatrixRef::Dense(d) => {
            writeln!(w, "%%MatrixMarket matrix array real general")?;
            writeln!(w, "{} {}", d.rows(), d.cols())?;
            for v in d.data() {
                writeln!(w, "{v:.16e}")?;
            }
        }
        MatrixRef::Sparse(s) => {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "{} {} {}", s.rows(), s.cols(), s.nnz())?;
            for i in 0..s.rows() {
                let (idx, vals) = s.row(i);
                for (&j, v) in idx.iter().zip(vals) {
                    writeln!(w, "{} {} {v:.16e}", i + 1, j + 1)?;
                }
            }
        }
    }
    Ok(())
}

/// Writes one CSV row per record under the header
/// `sweep,elapsed_s,rel_residual`, with 10 significant digits per float.
pub fn write_trace_csv(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    format_trace_csv(records, file)
}

pub fn format_trace_csv(records: &[TraceRecord], w: impl Write) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("cannot write an empty trace".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in records {
        out.write_record([
            r.sweep.to_string(),
            format!("{:.9e}", r.elapsed_s),
            format!("{:.9e}", r.rel_residual),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!(
                "unexpected header `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", rec.len())));
        }
        let sweep = rec[0]
            .parse()
            .map_err(|_| bad(format!("sweep `{}` is not an integer", &rec[0])))?;
        let elapsed_s = rec[1]
            .parse()
            .map_err(|_| bad(format!("elapsed_s `{}` is not a number", &rec[1])))?;
        let rel_residual = rec[2]
            .parse()
            .map_err(|_| bad(format!("rel_residual `{}` is not a number", &rec[2])))?;
        records.push(TraceRecord {
            sweep,
            elapsed_s,
            rel_residual,
        });
    }
    Ok(records)
}
