//! Parsing of command-line ranges and pattern lists, plus matrix CSV files.

use std::fs;
use std::path::Path;

use corrcov::{Error, Matrix, PatternSpec, Result};
use num_complex::Complex64;

/// Parses a comma-separated list of values and `start:stop:step` ranges.
/// Ranges include `stop` when it is reached by whole steps.
pub fn parse_range(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut col = 1;
    for item in text.split(',') {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str, offset: usize| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(1, col + offset, format!("`{s}` is not a nonnegative integer")))
        };
        match parts.as_slice() {
            [v] => out.push(num(v, 0)?),
            [a, b, c] => {
                let start = num(a, 0)?;
                let stop = num(b, a.len() + 1)?;
                let step = num(c, a.len() + b.len() + 2)?;
                if step == 0 {
                    return Err(Error::parse(1, col + a.len() + b.len() + 2, "step must be positive"));
                }
                if stop < start {
                    return Err(Error::parse(1, col, format!("range `{item}` is decreasing")));
                }
                out.extend((start..=stop).step_by(step));
            }
            _ => return Err(Error::parse(1, col, format!("`{item}` is not a value or start:stop:step"))),
        }
        col += item.len() + 1;
    }
    Ok(out)
}

/// Parses a comma-separated list of pattern specs. Custom patterns name a
/// CSV of real parts, optionally followed by `+` and a CSV of imaginary parts.
pub fn parse_patterns(text: &str) -> Result<Vec<PatternSpec>> {
    let mut out = Vec::new();
    let mut col = 0;
    for item in text.split(',') {
        let spec = PatternSpec::parse(item, load_pattern_matrix).map_err(|e| shift(e, col))?;
        out.push(spec);
        col += item.len() + 1;
    }
    Ok(out)
}

fn shift(e: Error, offset: usize) -> Error {
    match e {
        Error::Parse { line: 1, column, message } => Error::parse(1, column + offset, message),
        other => other,
    }
}

fn load_pattern_matrix(arg: &str) -> Result<Matrix<Complex64>> {
    match arg.split_once('+') {
        Some((re, im)) => load_complex(Path::new(re), Some(Path::new(im))),
        None => load_complex(Path::new(arg), None),
    }
}

/// Reads a real matrix from CSV; blank lines and lines starting with `#`
/// are skipped.
pub fn load_real(path: &Path) -> Result<Matrix<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    parse_real_csv(&text).map_err(|e| match e {
        Error::Parse { line, column, message } => {
            Error::parse(line, column, format!("{}: {message}", path.display()))
        }
        other => other,
    })
}

/// Reads a complex matrix from a CSV of real parts and an optional CSV of
/// imaginary parts of the same shape.
pub fn load_complex(re: &Path, im: Option<&Path>) -> Result<Matrix<Complex64>> {
    let re = load_real(re)?;
    let Some(im) = im else {
        return Ok(re.map(|x| Complex64::new(x, 0.0)));
    };
    let im = load_real(im)?;
    if im.shape() != re.shape() {
        return Err(Error::DimensionMismatch(format!(
            "real part is {}x{}, imaginary part is {}x{}",
            re.nrows(),
            re.ncols(),
            im.nrows(),
            im.ncols()
        )));
    }
    Ok(re.zip_map(&im, Complex64::new))
}

pub fn parse_real_csv(text: &str) -> Result<Matrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, 1, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(line, j + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(line, j + 1, format!("`{field}` is not finite")));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(
                    line,
                    row.len().min(first.len()) + 1,
                    format!("expected {} fields, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(1, 1, "matrix file is empty"));
    }
    let cols = rows[0].len();
    Ok(Matrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}
