//! Signal and measurement files.
//!
//! Binary signals are little-endian `f64` pairs `(re, im)` per entry; binary
//! measurements are little-endian `f64` values in mask-major order. CSV
//! signals have one `re,im` line per entry and CSV measurements one value per
//! line. Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use blockpr::{BlockPrError, Complex64, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FileFormat {
    Bin,
    Csv,
}

impl FileFormat {
    /// `csv` for a `.csv` extension, binary otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Bin,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] BlockPrError),
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(s: &str, line: usize) -> Result<f64, IoError> {
    s.trim()
        .parse()
        .map_err(|_| IoError::Parse(format!("line {line}: cannot parse {s:?} as a number")))
}

fn read_f64s(bytes: &[u8]) -> Result<Vec<f64>, IoError> {
    if !bytes.len().is_multiple_of(8) {
        return Err(IoError::Parse(format!("binary length {} is not a multiple of 8", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn read_signal(path: &Path, format: FileFormat) -> Result<Signal, IoError> {
    let entries = match format {
        FileFormat::Bin => {
            let v = read_f64s(&fs::read(path)?)?;
            if v.len() % 2 != 0 {
                return Err(IoError::Parse("odd number of f64 values in a complex signal".into()));
            }
            v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
        }
        FileFormat::Csv => {
            let text = fs::read_to_string(path)?;
            data_lines(&text)
                .map(|(n, l)| {
                    let mut parts = l.split(',');
                    let re = parse_f64(parts.next().unwrap_or(""), n)?;
                    let im = match parts.next() {
                        Some(p) => parse_f64(p, n)?,
                        None => 0.0,
                    };
                    Ok(Complex64::new(re, im))
                })
                .collect::<Result<Vec<_>, IoError>>()?
        }
    };
    Ok(Signal::new(entries)?)
}

pub fn write_signal(path: &Path, format: FileFormat, x: &Signal) -> Result<(), IoError> {
    match format {
        FileFormat::Bin => {
            let mut bytes = Vec::with_capacity(16 * x.len());
            for v in x.entries() {
                bytes.extend_from_slice(&v.re.to_le_bytes());
                bytes.extend_from_slice(&v.im.to_le_bytes());
            }
            fs::write(path, bytes)?;
        }
        FileFormat::Csv => {
            let mut text = String::from("# re,im\n");
            for v in x.entries() {
                text.push_str(&format!("{:e},{:e}\n", v.re, v.im));
            }
            fs::write(path, text)?;
        }
    }
    Ok(())
}

pub fn read_measurements(path: &Path, format: FileFormat) -> Result<Vec<f64>, IoError> {
    match format {
        FileFormat::Bin => read_f64s(&fs::read(path)?),
        FileFormat::Csv => {
            let text = fs::read_to_string(path)?;
            data_lines(&text).map(|(n, l)| parse_f64(l, n)).collect()
        }
    }
}

pub fn write_measurements(path: &Path, format: FileFormat, b: &[f64]) -> Result<(), IoError> {
    match format {
        FileFormat::Bin => {
            let bytes: Vec<u8> = b.iter().flat_map(|v| v.to_le_bytes()).collect();
            fs::write(path, bytes)?;
        }
        FileFormat::Csv => {
            let mut text = String::new();
            for v in b {
                text.push_str(&format!("{v:e}\n"));
            }
            fs::write(path, text)?;
        }
    }
    Ok(())
}
