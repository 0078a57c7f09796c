//! Matrix persistence and deterministic random streams.
//!
//! Binary layout (little-endian): `b"SPIM"`, version byte `1`, `rows: u64`,
//! `cols: u64`, then `rows * cols` `f64` values in row-major order.
//!
//! CSV layout: comma-delimited, one matrix row per line, no header. Values are
//! written with the shortest representation that parses back to the same bits.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 4] = b"SPIM";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 4 + 1 + 8 + 8;

/// Identifier recorded in manifests so runs can be matched to the generator.
pub const RNG_ALGORITHM: &str = "chacha20-splitmix64-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Binary,
}

impl Format {
    /// Guesses the format from a file extension: `.csv` is CSV, everything else binary.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "binary" | "bin" => Ok(Format::Binary),
            other => Err(Error::Value(format!("unknown matrix format `{other}`"))),
        }
    }
}

pub fn load_matrix(path: impl AsRef<Path>, format: Format) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let m = match format {
        Format::Binary => decode_binary(&bytes)?,
        Format::Csv => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| Error::Parse(format!("{}: not utf-8: {e}", path.display())))?;
            decode_csv(text)?
        }
    };
    if let Some(pos) = m.data().iter().position(|x| !x.is_finite()) {
        return Err(Error::Value(format!(
            "{}: non-finite entry at row {}, column {}",
            path.display(),
            pos / m.cols().max(1),
            pos % m.cols().max(1)
        )));
    }
    Ok(m)
}

pub fn save_matrix(m: &Matrix, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        Format::Binary => encode_binary(m),
        Format::Csv => encode_csv(m).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_binary(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for x in m.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse(format!("binary matrix truncated: {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Parse("bad magic, expected SPIM".into()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported format version {}", bytes[4])));
    }
    let rows = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Parse(format!("dimensions {rows}x{cols} overflow")))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(Error::Parse(format!(
            "{rows}x{cols} matrix needs {expected} data bytes, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::new(rows, cols, data)
}

pub fn encode_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {}: `{tok}` is not a number", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {}: {} fields, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty CSV matrix".into()));
    }
    Matrix::from_rows(&rows)
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `index` under `seed`. Pure function of its inputs, so
/// trial `t` is reproducible without generating trials `0..t`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index ^ 0xD1B5_4A32_D192_ED03))
}

/// Deterministic ChaCha20 stream identified by a 64-bit seed.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Independent child stream. Does not advance `self`.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream::new(derive_seed(self.seed, index))
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        Uniform::new_inclusive(low, high)
            .expect("finite ordered bounds")
            .sample(&mut self.rng)
    }

    /// `rows x cols` matrix of independent standard normal draws.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.standard_normal())
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn gaussian_draws(rng: &mut RngStream, n: usize, mean: f64, sd: f64) -> Result<Vec<f64>> {
    if !(sd > 0.0 && sd.is_finite()) || !mean.is_finite() {
        return Err(Error::Value(format!(
            "gaussian draws need finite mean and sd > 0, got mean={mean}, sd={sd}"
        )));
    }
    let dist = Normal::new(mean, sd).map_err(|e| Error::Value(e.to_string()))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}
