//! Velocity snapshots: a JSON header line, a NUL byte, then the physical
//! field as little-endian `f64`, component-major and x-fastest.

use std::path::Path;

use euler_lab::{Grid3, SpectralField3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const FORMAT: &str = "euler-lab-snapshot/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub field: String,
    pub n: usize,
    pub box_length: f64,
    pub components: usize,
    pub t: f64,
    pub step: u64,
    pub byte_order: String,
    /// `sha256:<hex>` of the payload.
    pub checksum: String,
    /// Diagnostic context needed to reproduce the in-run sample.
    pub context: SnapshotContext,
}

/// Quantities a sample depends on that a single field cannot supply.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SnapshotContext {
    pub u0_l2: f64,
    pub u0_hs: f64,
    pub delta: f64,
    pub s: f64,
    pub cutoff_l: f64,
    pub pair_budget: usize,
    pub upsample: usize,
    pub bkm_int: f64,
    pub const_int: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    /// Physical values, one vector per component.
    pub values: Vec<Vec<f64>>,
}

fn checksum(payload: &[u8]) -> String {
    let digest = Sha256::digest(payload);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

impl Snapshot {
    pub fn new(grid: &Grid3, t: f64, step: u64, values: Vec<Vec<f64>>, context: SnapshotContext) -> Self {
        let mut s = Self {
            header: SnapshotHeader {
                format: FORMAT.into(),
                field: "velocity".into(),
                n: grid.n(),
                box_length: grid.box_length(),
                components: values.len(),
                t,
                step,
                byte_order: "little".into(),
                checksum: String::new(),
                context,
            },
            values,
        };
        s.header.checksum = checksum(&s.payload());
        s
    }

    fn payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.iter().map(|c| 8 * c.len()).sum());
        for c in &self.values {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.header).expect("header serializes");
        out.extend_from_slice(b"\n\0");
        out.extend_from_slice(&self.payload());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let corrupt = |m: String| CliError::Corrupt(m);
        let end = bytes
            .windows(2)
            .position(|w| w == b"\n\0")
            .ok_or_else(|| corrupt("snapshot header terminator not found".into()))?;
        let header: SnapshotHeader =
            serde_json::from_slice(&bytes[..end]).map_err(|e| corrupt(format!("snapshot header: {e}")))?;
        if header.format != FORMAT {
            return Err(corrupt(format!("unsupported snapshot format `{}`", header.format)));
        }
        if header.byte_order != "little" {
            return Err(corrupt(format!("unsupported byte order `{}`", header.byte_order)));
        }
        let payload = &bytes[end + 2..];
        if checksum(payload) != header.checksum {
            return Err(corrupt("snapshot checksum mismatch".into()));
        }
        let len = header.n.checked_pow(3).ok_or_else(|| corrupt("grid size overflows".into()))?;
        if payload.len() != 8 * len * header.components {
            return Err(corrupt(format!(
                "payload holds {} bytes, header implies {}",
                payload.len(),
                8 * len * header.components
            )));
        }
        let values = payload
            .chunks_exact(8 * len)
            .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect())
            .collect();
        Ok(Self { header, values })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn grid(&self) -> Result<Grid3, CliError> {
        Grid3::new(self.header.n, self.header.box_length).map_err(|e| CliError::Corrupt(e.to_string()))
    }

    /// Spectral velocity from the stored physical values.
    pub fn velocity(&self) -> Result<SpectralField3, CliError> {
        if self.header.components != 3 {
            return Err(CliError::Corrupt(format!("expected 3 components, got {}", self.header.components)));
        }
        let grid = self.grid()?;
        let f = SpectralField3::from_real(grid, self.values.clone()).map_err(|e| CliError::Corrupt(e.to_string()))?;
        Ok(f.to_spectral())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        let g = Grid3::periodic(8).unwrap();
        let values: Vec<Vec<f64>> = (0..3).map(|c| (0..512).map(|i| (i as f64 * 0.37 + c as f64).sin()).collect()).collect();
        Snapshot::new(&g, 0.125, 3, values, SnapshotContext { u0_l2: 1.5, ..Default::default() })
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let s = sample();
        let bytes = s.to_bytes();
        let back = Snapshot::from_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn damage_is_detected() {
        let bytes = sample().to_bytes();
        let truncated = &bytes[..bytes.len() - 8];
        assert!(matches!(Snapshot::from_bytes(truncated), Err(CliError::Corrupt(_))));
        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 1;
        assert!(matches!(Snapshot::from_bytes(&flipped), Err(CliError::Corrupt(_))));
        assert!(matches!(Snapshot::from_bytes(b"{}"), Err(CliError::Corrupt(_))));
    }
}
