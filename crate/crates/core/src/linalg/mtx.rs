//! Reader for the MatrixMarket exchange format (`coordinate` and `array`
//! layouts, `real`/`integer` fields, `general`/`symmetric` symmetry).

use std::path::Path;

use nalgebra::DMatrix;

use super::{BlockMatrix, CsrMatrix, LinalgError};

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    Coordinate,
    Array,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<BlockMatrix, LinalgError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LinalgError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_matrix_market(&text)
}

/// Parses MatrixMarket text. Coordinate files produce sparse storage, array
/// files dense storage; symmetric inputs are expanded.
pub fn parse_matrix_market(text: &str) -> Result<BlockMatrix, LinalgError> {
    let err = |line: usize, message: &str| LinalgError::MatrixMarket {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(err(1, "expected '%%MatrixMarket matrix <layout> <field> <symmetry>'"));
    }
    let layout = match fields[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(err(1, &format!("unsupported layout '{other}'"))),
    };
    if !matches!(fields[3].as_str(), "real" | "integer" | "double") {
        return Err(err(1, &format!("unsupported field '{}'", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(err(1, &format!("unsupported symmetry '{other}'"))),
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = data.next().ok_or_else(|| err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(size_line, "invalid size entry")))
        .collect::<Result<_, _>>()?;

    let parse_f = |line: usize, t: &str| -> Result<f64, LinalgError> {
        let v: f64 = t.parse().map_err(|_| err(line, &format!("invalid value '{t}'")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(line, "non-finite value"))
        }
    };

    match layout {
        Layout::Coordinate => {
            let [rows, cols, nnz] = dims[..] else {
                return Err(err(size_line, "coordinate size line needs 'rows cols nnz'"));
            };
            if symmetric && rows != cols {
                return Err(err(size_line, "symmetric matrix must be square"));
            }
            let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
            let mut count = 0;
            for (line, l) in data {
                let toks: Vec<&str> = l.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(err(line, "expected 'row col value'"));
                }
                let r: usize = toks[0].parse().map_err(|_| err(line, "invalid row index"))?;
                let c: usize = toks[1].parse().map_err(|_| err(line, "invalid column index"))?;
                if r == 0 || c == 0 || r > rows || c > cols {
                    return Err(err(line, &format!("index ({r}, {c}) outside {rows}x{cols} (1-based)")));
                }
                let v = parse_f(line, toks[2])?;
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
                count += 1;
            }
            if count != nnz {
                return Err(err(size_line, &format!("declared {nnz} entries, found {count}")));
            }
            Ok(BlockMatrix::sparse(CsrMatrix::from_triplets(rows, cols, &triplets)?))
        }
        Layout::Array => {
            let [rows, cols] = dims[..] else {
                return Err(err(size_line, "array size line needs 'rows cols'"));
            };
            if symmetric && rows != cols {
                return Err(err(size_line, "symmetric matrix must be square"));
            }
            let mut values = Vec::new();
            for (line, l) in data {
                for t in l.split_whitespace() {
                    values.push((line, parse_f(line, t)?));
                }
            }
            let mut m = DMatrix::zeros(rows, cols);
            let mut it = values.into_iter();
            // Column-major; symmetric files list only the lower triangle.
            for j in 0..cols {
                let start = if symmetric { j } else { 0 };
                for i in start..rows {
                    let (_, v) = it
                        .next()
                        .ok_or_else(|| err(size_line, "too few array entries"))?;
                    m[(i, j)] = v;
                    if symmetric {
                        m[(j, i)] = v;
                    }
                }
            }
            if let Some((line, _)) = it.next() {
                return Err(err(line, "too many array entries"));
            }
            Ok(BlockMatrix::dense(m))
        }
    }
}

/// MatrixMarket `coordinate real general` text listing the nonzero entries,
/// each printed with 17 significant digits.
pub fn format_matrix_market(m: &BlockMatrix) -> String {
    use std::fmt::Write;
    let sparse = m.to_sparse();
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), sparse.nnz());
    for (i, j, v) in sparse.iter() {
        let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
    }
    out
}
