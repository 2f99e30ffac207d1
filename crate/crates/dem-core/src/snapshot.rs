//! Binary state snapshots.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes   "DEMS"
//! version u32       1
//! count   u64       particle count n
//! floats  f64 * 11n property-major: position xyz, velocity xyz,
//!                   angular_velocity xyz, radius, mass
//! hcount  u64       contact history entry count m
//! entries m * 40 B  kind u64 (0 pair, 1 wall), a u64, b u64, dx dy dz f64
//! ```
//!
//! History entries are keyed by storage slot, not by stable particle id, and
//! are sorted ascending by (kind, a, b). Pair entries keep the convention
//! that the displacement is expressed in the lower-slot particle's frame, so
//! when relabelling flips which endpoint is lower the vector is negated.
//! Floats round-trip bit-exactly, which is what makes resuming from a
//! snapshot indistinguishable from never having stopped.

use crate::error::{DemError, Result};
use crate::forces::{PairKey, TangentialHistory};
use crate::math::Vec3;
use crate::state::ParticleArrays;
use std::collections::BTreeMap;
use std::path::Path;

const MAGIC: &[u8; 4] = b"DEMS";
const VERSION: u32 = 1;
const KIND_PAIR: u64 = 0;
const KIND_WALL: u64 = 1;

pub fn encode_snapshot(arrays: &ParticleArrays, history: &TangentialHistory) -> Result<Vec<u8>> {
    arrays.validate()?;
    let n = arrays.len();
    let entries = slot_keyed_entries(arrays, history)?;

    let mut out = Vec::with_capacity(4 + 4 + 8 + 11 * 8 * n + 8 + 40 * entries.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for p in &arrays.position {
        push_vec3(&mut out, *p);
    }
    for v in &arrays.velocity {
        push_vec3(&mut out, *v);
    }
    for w in &arrays.angular_velocity {
        push_vec3(&mut out, *w);
    }
    for r in &arrays.radius {
        out.extend_from_slice(&r.to_le_bytes());
    }
    for m in &arrays.mass {
        out.extend_from_slice(&m.to_le_bytes());
    }
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for ((kind, a, b), value) in entries {
        out.extend_from_slice(&kind.to_le_bytes());
        out.extend_from_slice(&a.to_le_bytes());
        out.extend_from_slice(&b.to_le_bytes());
        push_vec3(&mut out, value);
    }
    Ok(out)
}

/// Rewrites history keys from stable particle ids to the slots those
/// particles currently occupy. The BTreeMap gives the required ordering.
fn slot_keyed_entries(
    arrays: &ParticleArrays,
    history: &TangentialHistory,
) -> Result<BTreeMap<(u64, u64, u64), Vec3>> {
    let mut slot_of = BTreeMap::new();
    for (slot, id) in arrays.id.iter().enumerate() {
        slot_of.insert(*id, slot as u64);
    }
    let lookup = |id: u64| -> Result<u64> {
        slot_of.get(&id).copied().ok_or_else(|| {
            DemError::Snapshot(format!("contact history references unknown particle id {id}"))
        })
    };
    let mut entries = BTreeMap::new();
    for (key, value) in history.iter() {
        match *key {
            PairKey::Particles(lo, hi) => {
                let a = lookup(lo)?;
                let b = lookup(hi)?;
                // The stored vector lives in the lower endpoint's frame.
                let (a, b, value) = if a <= b { (a, b, *value) } else { (b, a, -*value) };
                entries.insert((KIND_PAIR, a, b), value);
            }
            PairKey::ParticleWall(id, wall) => {
                entries.insert((KIND_WALL, lookup(id)?, wall as u64), *value);
            }
        }
    }
    Ok(entries)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(ParticleArrays, TangentialHistory)> {
    let mut cursor = Cursor { bytes, offset: 0 };
    let magic = cursor.take(4)?;
    if magic != MAGIC {
        return Err(DemError::Snapshot(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = cursor.u32()?;
    if version != VERSION {
        return Err(DemError::Snapshot(format!(
            "unsupported snapshot version {version}, expected {VERSION}"
        )));
    }
    let n64 = cursor.u64()?;
    let n = usize::try_from(n64)
        .ok()
        .filter(|n| cursor.remaining() / 8 >= n.saturating_mul(11))
        .ok_or_else(|| DemError::Snapshot(format!("particle count {n64} exceeds the file size")))?;

    let mut arrays = ParticleArrays::zeroed(n);
    for p in arrays.position.iter_mut() {
        *p = cursor.vec3()?;
    }
    for v in arrays.velocity.iter_mut() {
        *v = cursor.vec3()?;
    }
    for w in arrays.angular_velocity.iter_mut() {
        *w = cursor.vec3()?;
    }
    for r in arrays.radius.iter_mut() {
        *r = cursor.f64()?;
    }
    for m in arrays.mass.iter_mut() {
        *m = cursor.f64()?;
    }

    let entry_count = cursor.u64()?;
    let mut history = TangentialHistory::new();
    let mut previous: Option<(u64, u64, u64)> = None;
    for _ in 0..entry_count {
        let kind = cursor.u64()?;
        let a = cursor.u64()?;
        let b = cursor.u64()?;
        let value = cursor.vec3()?;
        if let Some(prev) = previous {
            if prev >= (kind, a, b) {
                return Err(DemError::Snapshot(
                    "contact history entries are not strictly ascending".to_string(),
                ));
            }
        }
        previous = Some((kind, a, b));
        let key = match kind {
            KIND_PAIR => {
                if a >= b || b >= n64 {
                    return Err(DemError::Snapshot(format!(
                        "pair history entry ({a}, {b}) is not an ordered pair of slots below {n64}"
                    )));
                }
                PairKey::Particles(a, b)
            }
            KIND_WALL => {
                if a >= n64 || b > u32::MAX as u64 {
                    return Err(DemError::Snapshot(format!(
                        "wall history entry ({a}, {b}) is out of range"
                    )));
                }
                PairKey::ParticleWall(a, b as u32)
            }
            _ => {
                return Err(DemError::Snapshot(format!("unknown history entry kind {kind}")));
            }
        };
        history.insert(key, value);
    }
    if cursor.remaining() != 0 {
        return Err(DemError::Snapshot(format!(
            "{} trailing bytes after the last history entry",
            cursor.remaining()
        )));
    }
    Ok((arrays, history))
}

pub fn write_snapshot(
    path: &Path,
    arrays: &ParticleArrays,
    history: &TangentialHistory,
) -> Result<()> {
    let bytes = encode_snapshot(arrays, history)?;
    std::fs::write(path, bytes).map_err(|e| DemError::io(path.display().to_string(), e))
}

pub fn read_snapshot(path: &Path) -> Result<(ParticleArrays, TangentialHistory)> {
    let bytes = std::fs::read(path).map_err(|e| DemError::io(path.display().to_string(), e))?;
    decode_snapshot(&bytes)
}

fn push_vec3(out: &mut Vec<u8>, v: Vec3) {
    out.extend_from_slice(&v.x.to_le_bytes());
    out.extend_from_slice(&v.y.to_le_bytes());
    out.extend_from_slice(&v.z.to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.offset
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(DemError::Snapshot(format!(
                "truncated snapshot: wanted {len} bytes at offset {}, have {}",
                self.offset,
                self.remaining()
            )));
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn vec3(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
}
