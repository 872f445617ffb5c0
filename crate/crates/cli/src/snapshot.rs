//! Binary dump of one grid field.
//!
//! Layout, all little-endian: `b"BGK1"`, three `u32` node counts, `v_min` and
//! `v_max` as six `f64` (64 bytes in total), then one `f64` per node in grid
//! order.

use std::path::Path;

use bgk_core::{Vec3, VelocityGrid};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"BGK1";
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("snapshot is {0} bytes, shorter than the 64-byte header")]
    TooShort(usize),
    #[error("bad snapshot magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("snapshot node counts {0:?} are invalid")]
    Counts([u32; 3]),
    #[error("snapshot bounds are invalid on axis {0}")]
    Bounds(usize),
    #[error("snapshot holds {found} data bytes, header implies {expected}")]
    Length { expected: u64, found: u64 },
    #[error("snapshot value at node {0} is not finite")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub counts: [u32; 3],
    pub v_min: Vec3,
    pub v_max: Vec3,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field(grid: &VelocityGrid, values: &[f64]) -> Self {
        let c = grid.counts();
        Snapshot {
            counts: c.map(|n| n as u32),
            v_min: grid.v_min(),
            v_max: grid.v_max(),
            values: values.to_vec(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(&MAGIC);
        for n in self.counts {
            out.extend_from_slice(&n.to_le_bytes());
        }
        for x in self.v_min.iter().chain(&self.v_max) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for x in &self.values {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < HEADER_LEN {
            return Err(SnapshotError::TooShort(bytes.len()));
        }
        let (header, data) = bytes.split_at(HEADER_LEN);
        let magic: [u8; 4] = header[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(SnapshotError::BadMagic(magic));
        }
        let u32_at = |k: usize| u32::from_le_bytes(header[4 + 4 * k..8 + 4 * k].try_into().unwrap());
        let f64_at = |k: usize| f64::from_le_bytes(header[16 + 8 * k..24 + 8 * k].try_into().unwrap());
        let counts = [u32_at(0), u32_at(1), u32_at(2)];
        if counts.contains(&0) {
            return Err(SnapshotError::Counts(counts));
        }
        let v_min = [f64_at(0), f64_at(1), f64_at(2)];
        let v_max = [f64_at(3), f64_at(4), f64_at(5)];
        for a in 0..3 {
            if !(v_min[a].is_finite() && v_max[a].is_finite() && v_min[a] < v_max[a]) {
                return Err(SnapshotError::Bounds(a));
            }
        }
        let expected = counts
            .iter()
            .try_fold(8u64, |acc, &n| acc.checked_mul(u64::from(n)))
            .ok_or(SnapshotError::Counts(counts))?;
        if expected != data.len() as u64 {
            return Err(SnapshotError::Length {
                expected,
                found: data.len() as u64,
            });
        }
        let values = data
            .chunks_exact(8)
            .enumerate()
            .map(|(k, c)| {
                let x = f64::from_le_bytes(c.try_into().unwrap());
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(SnapshotError::NonFinite(k))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Snapshot {
            counts,
            v_min,
            v_max,
            values,
        })
    }

    pub fn grid(&self) -> bgk_core::Result<VelocityGrid> {
        VelocityGrid::new(self.v_min, self.v_max, self.counts.map(|n| n as usize))
    }

    /// True when the header describes `grid` bit for bit.
    pub fn matches(&self, grid: &VelocityGrid) -> bool {
        let same = |a: Vec3, b: Vec3| a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
        self.counts.map(|n| n as usize) == grid.counts()
            && same(self.v_min, grid.v_min())
            && same(self.v_max, grid.v_max())
    }
}

pub fn read_snapshot(path: &Path) -> std::io::Result<Result<Snapshot, SnapshotError>> {
    Ok(Snapshot::decode(&std::fs::read(path)?))
}

pub fn write_snapshot(path: &Path, snapshot: &Snapshot) -> std::io::Result<()> {
    std::fs::write(path, snapshot.encode())
}
