//! Raster and label-map file formats.
//!
//! * PGM (`P2` ASCII, `P5` binary) per netpbm: 8-bit samples when
//!   `maxval < 256`, otherwise 16-bit big-endian.
//! * CSV: two header lines `width=<int>` and `height=<int>`, then one sample
//!   per line in row-major order. Commas are accepted as separators on read.

use std::path::Path;

use crate::error::{CliError, Result};

/// A single-channel raster of integer samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub samples: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Pgm,
    Csv,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("pgm") | Some("pnm") => Ok(FileFormat::Pgm),
            Some("csv") | Some("txt") => Ok(FileFormat::Csv),
            _ => Err(CliError::format(
                path,
                "unknown extension: expected .pgm or .csv",
            )),
        }
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Option<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Raster> {
    let bad = |m: &str| CliError::format(path, m);
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'2' || bytes[1] == b'5') {
        return Err(bad("not a PGM file (expected P2 or P5 magic)"));
    }
    let binary = bytes[1] == b'5';
    let mut h = Header { bytes, pos: 2 };
    let width = h.number().ok_or_else(|| bad("malformed width"))? as usize;
    let height = h.number().ok_or_else(|| bad("malformed height"))? as usize;
    let maxval = h.number().ok_or_else(|| bad("malformed maxval"))?;
    if width == 0 || height == 0 {
        return Err(bad("empty raster"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval must lie in 1..=65535"));
    }
    let maxval = maxval as u32;
    let n = width * height;
    let samples = if binary {
        // exactly one whitespace byte separates maxval from the raster
        if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
            return Err(bad("missing raster separator"));
        }
        let data = &bytes[h.pos + 1..];
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        if data.len() < need {
            return Err(bad("truncated raster"));
        }
        if wide {
            data[..need]
                .chunks(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]) as u32)
                .collect::<Vec<u32>>()
        } else {
            data[..n].iter().map(|&b| b as u32).collect()
        }
    } else {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let v = h
                .number()
                .ok_or_else(|| bad("truncated or malformed ASCII raster"))?;
            out.push(v.min(u32::MAX as u64) as u32);
        }
        out
    };
    if samples.iter().any(|&s| s > maxval) {
        return Err(bad("sample exceeds maxval"));
    }
    Ok(Raster {
        width,
        height,
        maxval,
        samples,
    })
}

/// Serializes a raster as PGM; `maxval` decides the sample width.
pub fn encode_pgm(r: &Raster, ascii: bool) -> Vec<u8> {
    let mut out = format!(
        "{}\n{} {}\n{}\n",
        if ascii { "P2" } else { "P5" },
        r.width,
        r.height,
        r.maxval
    )
    .into_bytes();
    if ascii {
        for row in r.samples.chunks(r.width) {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    } else if r.maxval > 255 {
        for &s in &r.samples {
            out.extend_from_slice(&(s as u16).to_be_bytes());
        }
    } else {
        out.extend(r.samples.iter().map(|&s| s as u8));
    }
    out
}

/// CSV grid: header dimensions and the raw sample tokens.
pub struct CsvGrid<'a> {
    pub width: usize,
    pub height: usize,
    pub tokens: Vec<&'a str>,
}

pub fn parse_csv<'a>(text: &'a str, path: &Path) -> Result<CsvGrid<'a>> {
    let bad = |m: String| CliError::format(path, m);
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut dim = |key: &str| -> Result<usize> {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("missing `{}=` header line", key)))?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `{}=<int>`, got `{}`", key, line)))?;
        if k.trim() != key {
            return Err(bad(format!("expected `{}=<int>`, got `{}`", key, line)));
        }
        v.trim()
            .parse()
            .map_err(|_| bad(format!("malformed {} `{}`", key, v.trim())))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let tokens: Vec<&str> = lines
        .flat_map(|l| l.split(','))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(bad("no samples".into()));
    }
    if tokens.len() != width * height {
        return Err(bad(format!(
            "{} samples for a {}x{} grid",
            tokens.len(),
            width,
            height
        )));
    }
    Ok(CsvGrid {
        width,
        height,
        tokens,
    })
}

pub fn encode_csv<V: std::fmt::Display>(width: usize, height: usize, values: &[V]) -> String {
    let mut out = format!("width={}\nheight={}\n", width, height);
    for v in values {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}
