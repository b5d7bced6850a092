//! Plain-text vector and matrix files.
//!
//! Complex vector: first line `N`, then `N` lines `re,im`.
//! Complex matrix: first line `M N`, then `M*N` lines `re,im` in row-major order.
//! Real vector: first line `N`, then `N` values.
//! Blank lines and lines starting with `#` are ignored. Values are written with
//! shortest round-trip formatting, so write-then-read is exact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::DesignMatrix;

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: '{}' is not a number", tok.trim())))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: non-finite value")));
    }
    Ok(v)
}

fn parse_complex(s: &str, line: usize) -> Result<Complex<f64>> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("line {line}: expected 're,im'")))?;
    Ok(Complex::new(parse_num(re, line)?, parse_num(im, line)?))
}

fn parse_header(tok: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad dimension '{tok}'")))
}

fn body<'a, T>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    expected: usize,
    mut f: impl FnMut(&str, usize) -> Result<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(expected);
    for (no, l) in lines {
        if out.len() == expected {
            return Err(Error::Parse(format!(
                "line {no}: more entries than the header declares"
            )));
        }
        out.push(f(l, no)?);
    }
    if out.len() != expected {
        return Err(Error::Parse(format!(
            "header declares {expected} entries, found {}",
            out.len()
        )));
    }
    Ok(out)
}

pub fn format_complex_vector(x: &[Complex<f64>]) -> String {
    let mut s = format!("{}\n", x.len());
    for z in x {
        let _ = writeln!(s, "{},{}", z.re, z.im);
    }
    s
}

pub fn parse_complex_vector(text: &str) -> Result<Vec<Complex<f64>>> {
    let mut lines = data_lines(text);
    let (no, h) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty vector file".into()))?;
    let n = parse_header(h, no)?;
    body(lines, n, parse_complex)
}

pub fn write_complex_vector(path: &Path, x: &[Complex<f64>]) -> Result<()> {
    write(path, &format_complex_vector(x))
}

pub fn read_complex_vector(path: &Path) -> Result<Vec<Complex<f64>>> {
    parse_complex_vector(&read(path)?).map_err(|e| annotate(e, path))
}

pub fn format_matrix(a: &DesignMatrix<f64>) -> String {
    let mut s = format!("{} {}\n", a.rows(), a.cols());
    for z in a.to_dense() {
        let _ = writeln!(s, "{},{}", z.re, z.im);
    }
    s
}

/// Parses a dense matrix; the result has kind `External`.
pub fn parse_matrix(text: &str) -> Result<DesignMatrix<f64>> {
    let mut lines = data_lines(text);
    let (no, h) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<&str> = h.split_whitespace().collect();
    let [m, n] = dims[..] else {
        return Err(Error::Parse(format!(
            "line {no}: matrix header must be 'M N'"
        )));
    };
    let (m, n) = (parse_header(m, no)?, parse_header(n, no)?);
    let entries = body(lines, m * n, parse_complex)?;
    DesignMatrix::from_dense(m, n, entries)
}

pub fn write_matrix(path: &Path, a: &DesignMatrix<f64>) -> Result<()> {
    write(path, &format_matrix(a))
}

pub fn read_matrix(path: &Path) -> Result<DesignMatrix<f64>> {
    parse_matrix(&read(path)?).map_err(|e| annotate(e, path))
}

pub fn format_real_vector(x: &[f64]) -> String {
    let mut s = format!("{}\n", x.len());
    for v in x {
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn parse_real_vector(text: &str) -> Result<Vec<f64>> {
    let mut lines = data_lines(text);
    let (no, h) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty vector file".into()))?;
    let n = parse_header(h, no)?;
    body(lines, n, parse_num)
}

pub fn write_real_vector(path: &Path, x: &[f64]) -> Result<()> {
    write(path, &format_real_vector(x))
}

pub fn read_real_vector(path: &Path) -> Result<Vec<f64>> {
    parse_real_vector(&read(path)?).map_err(|e| annotate(e, path))
}

fn annotate(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    }
}
