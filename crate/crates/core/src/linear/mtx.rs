use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative asymmetry tolerated (and averaged away) when a symmetric matrix is required.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Parses a Matrix Market `coordinate` or `array` real matrix.
pub fn parse_matrix_market(text: &str, origin: &str) -> Result<DMatrix<f64>> {
    let bad = |line: usize, why: &str| Error::parse(origin, format!("line {line}: {why}"));
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(bad(1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let coordinate = match words[2].as_str() {
        "coordinate" => true,
        "array" => false,
        f => return Err(bad(1, &format!("unsupported format '{f}'"))),
    };
    if !matches!(words[3].as_str(), "real" | "integer" | "double") {
        return Err(bad(1, &format!("unsupported field '{}'", words[3])));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        s => return Err(bad(1, &format!("unsupported symmetry '{s}'"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sl, size) = body.next().ok_or_else(|| bad(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| bad(sl + 1, &format!("bad size '{w}'"))))
        .collect::<Result<_>>()?;
    let (rows, cols) = match (coordinate, dims.as_slice()) {
        (true, [r, c, _]) | (false, [r, c]) => (*r, *c),
        _ => return Err(bad(sl + 1, "wrong number of size fields")),
    };
    if symmetric && rows != cols {
        return Err(bad(sl + 1, "symmetric matrix must be square"));
    }
    let mut m = DMatrix::zeros(rows, cols);
    let num = |w: &str, line: usize| -> Result<f64> {
        let v: f64 = w.parse().map_err(|_| bad(line, &format!("bad number '{w}'")))?;
        if v.is_finite() { Ok(v) } else { Err(bad(line, "non-finite entry")) }
    };

    if coordinate {
        let nnz = dims[2];
        let mut seen = 0;
        for (ln, line) in body {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad(ln + 1, "expected 'row col value'"));
            }
            let idx = |w: &str, lim: usize| -> Result<usize> {
                match w.parse::<usize>() {
                    Ok(i) if i >= 1 && i <= lim => Ok(i - 1),
                    _ => Err(bad(ln + 1, &format!("index '{w}' out of range"))),
                }
            };
            let (i, j, v) = (idx(f[0], rows)?, idx(f[1], cols)?, num(f[2], ln + 1)?);
            m[(i, j)] += v;
            if symmetric && i != j {
                m[(j, i)] += v;
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(Error::parse(origin, format!("expected {nnz} entries, found {seen}")));
        }
    } else {
        // column-major; symmetric arrays store the lower triangle only
        let mut slots = Vec::new();
        for j in 0..cols {
            for i in (if symmetric { j } else { 0 })..rows {
                slots.push((i, j));
            }
        }
        let mut it = slots.iter();
        for (ln, line) in body {
            for w in line.split_whitespace() {
                let &(i, j) = it.next().ok_or_else(|| bad(ln + 1, "too many entries"))?;
                let v = num(w, ln + 1)?;
                m[(i, j)] = v;
                if symmetric {
                    m[(j, i)] = v;
                }
            }
        }
        if it.next().is_some() {
            return Err(Error::parse(origin, "too few entries"));
        }
    }
    Ok(m)
}

/// Averages `A` with its transpose when they differ by at most [`SYMMETRY_TOL`] relative.
pub fn symmetrize(mut a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let (x, y) = (a[(i, j)], a[(j, i)]);
            if (x - y).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "matrix not symmetric at ({}, {}): {x} vs {y}",
                    i + 1,
                    j + 1
                )));
            }
            let m = 0.5 * (x + y);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    Ok(a)
}

pub fn read_matrix_market(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text, &path.display().to_string())
}

/// Writes the nonzeros in `coordinate real general` form.
pub fn matrix_market_string(a: &DMatrix<f64>) -> String {
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    let nz: Vec<_> = (0..a.ncols())
        .flat_map(|j| (0..a.nrows()).map(move |i| (i, j)))
        .filter(|&(i, j)| a[(i, j)] != 0.0)
        .collect();
    let _ = writeln!(s, "{} {} {}", a.nrows(), a.ncols(), nz.len());
    for (i, j) in nz {
        let _ = writeln!(s, "{} {} {:.16e}", i + 1, j + 1, a[(i, j)]);
    }
    s
}

pub fn write_matrix_market(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, matrix_market_string(a)).map_err(|e| Error::io(path, e))
}

pub fn parse_vector(text: &str, origin: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|w| match w.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::parse(origin, format!("bad number '{w}'"))),
        })
        .collect()
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vector(&text, &path.display().to_string())
}

pub fn vector_string(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}\n")).collect()
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    std::fs::write(path, vector_string(v)).map_err(|e| Error::io(path, e))
}
