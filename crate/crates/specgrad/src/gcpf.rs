//! Binary feature files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                       |
//! |--------|------|-----------------------------|
//! | 0      | 4    | magic `GCPF`                |
//! | 4      | 4    | `d` (u32)                   |
//! | 8      | 4    | `N` (u32)                   |
//! | 12     | 4    | `count` (u32)               |
//! | 16     | ...  | `count * d * N` f64 values  |
//!
//! Each block is a `d x N` feature matrix stored row-major.

use std::io::{Read, Write};

use specgrad_core::{FeatureMatrix, Matrix};

use crate::error::{CliError, Result};

pub const MAGIC: [u8; 4] = *b"GCPF";
pub const HEADER_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFile {
    pub d: usize,
    pub n: usize,
    pub blocks: Vec<Matrix>,
}

impl FeatureFile {
    pub fn new(d: usize, n: usize, blocks: Vec<Matrix>) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(CliError::usage("feature blocks need d >= 1 and N >= 1"));
        }
        if u32::try_from(d).is_err() || u32::try_from(n).is_err() || u32::try_from(blocks.len()).is_err() {
            return Err(CliError::usage("feature file dimensions must fit in 32 bits"));
        }
        if let Some(b) = blocks.iter().find(|b| b.rows() != d || b.cols() != n) {
            return Err(CliError::usage(format!("block is {}x{}, expected {d}x{n}", b.rows(), b.cols())));
        }
        Ok(Self { d, n, blocks })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.d * self.n * self.blocks.len());
        out.extend_from_slice(&MAGIC);
        for v in [self.d, self.n, self.blocks.len()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for b in &self.blocks {
            for x in b.as_slice() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| CliError::format("feature file", m);
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("{} bytes is shorter than the 16-byte header", bytes.len())));
        }
        if bytes[..4] != MAGIC {
            return Err(bad(format!("bad magic {:02x?}", &bytes[..4])));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let (d, n, count) = (word(4), word(8), word(12));
        let expected = d
            .checked_mul(n)
            .and_then(|v| v.checked_mul(count))
            .and_then(|v| v.checked_mul(8))
            .and_then(|v| v.checked_add(HEADER_LEN))
            .ok_or_else(|| bad("header sizes overflow".into()))?;
        if bytes.len() != expected {
            return Err(bad(format!("expected {expected} bytes for d={d}, N={n}, count={count}, found {}", bytes.len())));
        }
        let mut values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut blocks = Vec::with_capacity(count);
        for _ in 0..count {
            let data: Vec<f64> = values.by_ref().take(d * n).collect();
            blocks.push(Matrix::from_vec(d, n, data)?);
        }
        Self::new(d, n, blocks).map_err(|e| bad(e.to_string()))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| CliError::io("<feature stream>", e))?;
        Self::from_bytes(&buf)
    }

    /// Blocks as validated feature matrices (needs `N >= 2`, finite values).
    pub fn features(&self) -> Result<Vec<FeatureMatrix>> {
        self.blocks.iter().map(|b| FeatureMatrix::new(b.clone()).map_err(CliError::from)).collect()
    }
}
