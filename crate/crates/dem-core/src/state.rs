//! Particle storage, material table, walls, and global simulation settings.
//!
//! Particle properties live in structure-of-arrays layout: one contiguous
//! array per property, all of identical length. The set is double buffered:
//! a step reads only the previous buffer and writes only the next buffer,
//! which makes per-particle work order-independent under any thread schedule.

use crate::error::{DemError, Result};
use crate::math::Vec3;
use std::ops::Range;

/// One buffer of per-particle properties in structure-of-arrays layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleArrays {
    /// Stable particle identity; survives in-step reordering.
    pub id: Vec<u64>,
    pub position: Vec<Vec3>,
    pub velocity: Vec<Vec3>,
    pub angular_velocity: Vec<Vec3>,
    pub radius: Vec<f64>,
    pub mass: Vec<f64>,
    pub material: Vec<u32>,
    pub force: Vec<Vec3>,
    pub torque: Vec<Vec3>,
}

impl ParticleArrays {
    /// All arrays zero-initialized, ids `0..count`.
    pub fn zeroed(count: usize) -> Self {
        ParticleArrays {
            id: (0..count as u64).collect(),
            position: vec![Vec3::ZERO; count],
            velocity: vec![Vec3::ZERO; count],
            angular_velocity: vec![Vec3::ZERO; count],
            radius: vec![0.0; count],
            mass: vec![0.0; count],
            material: vec![0; count],
            force: vec![Vec3::ZERO; count],
            torque: vec![Vec3::ZERO; count],
        }
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    /// Checks the structural invariants: equal lengths, positive finite
    /// radius and mass.
    pub fn validate(&self) -> Result<()> {
        let n = self.position.len();
        let lengths = [
            self.id.len(),
            self.velocity.len(),
            self.angular_velocity.len(),
            self.radius.len(),
            self.mass.len(),
            self.material.len(),
            self.force.len(),
            self.torque.len(),
        ];
        if lengths.iter().any(|&l| l != n) {
            return Err(DemError::config(format!(
                "particle arrays disagree on length (position has {n})"
            )));
        }
        for i in 0..n {
            if !(self.radius[i] > 0.0 && self.radius[i].is_finite()) {
                return Err(DemError::config(format!(
                    "particle {i} has non-positive radius {}",
                    self.radius[i]
                )));
            }
            if !(self.mass[i] > 0.0 && self.mass[i].is_finite()) {
                return Err(DemError::config(format!(
                    "particle {i} has non-positive mass {}",
                    self.mass[i]
                )));
            }
        }
        Ok(())
    }

    /// FNV-1a hash over the exact bit patterns of every property array.
    /// Two buffers digest equal iff they are bitwise identical.
    pub fn digest(&self) -> u64 {
        fn eat(h: &mut u64, bits: u64) {
            *h ^= bits;
            *h = h.wrapping_mul(0x100000001b3);
        }
        fn eat_vec3(h: &mut u64, v: &Vec3) {
            eat(h, v.x.to_bits());
            eat(h, v.y.to_bits());
            eat(h, v.z.to_bits());
        }
        let mut h: u64 = 0xcbf29ce484222325;
        for v in &self.position {
            eat_vec3(&mut h, v);
        }
        for v in &self.velocity {
            eat_vec3(&mut h, v);
        }
        for v in &self.angular_velocity {
            eat_vec3(&mut h, v);
        }
        for (r, m) in self.radius.iter().zip(&self.mass) {
            eat(&mut h, r.to_bits());
            eat(&mut h, m.to_bits());
        }
        for (id, mat) in self.id.iter().zip(&self.material) {
            eat(&mut h, *id);
            eat(&mut h, *mat as u64);
        }
        h
    }
}

/// Mutable view of one contiguous slot range of a [`ParticleArrays`],
/// handed to exactly one worker during a parallel phase.
pub struct ParticleChunkMut<'a> {
    /// Global index of the first slot in this chunk.
    pub start: usize,
    pub id: &'a mut [u64],
    pub position: &'a mut [Vec3],
    pub velocity: &'a mut [Vec3],
    pub angular_velocity: &'a mut [Vec3],
    pub radius: &'a mut [f64],
    pub mass: &'a mut [f64],
    pub material: &'a mut [u32],
    pub force: &'a mut [Vec3],
    pub torque: &'a mut [Vec3],
    pub written: &'a mut [bool],
}

/// Splits a buffer (plus its write mask) into disjoint per-worker chunks.
/// The partition must be contiguous ranges covering `0..len` in order.
pub fn split_chunks<'a>(
    arrays: &'a mut ParticleArrays,
    written: &'a mut [bool],
    partition: &[Range<usize>],
) -> Vec<ParticleChunkMut<'a>> {
    let mut id = arrays.id.as_mut_slice();
    let mut position = arrays.position.as_mut_slice();
    let mut velocity = arrays.velocity.as_mut_slice();
    let mut angular_velocity = arrays.angular_velocity.as_mut_slice();
    let mut radius = arrays.radius.as_mut_slice();
    let mut mass = arrays.mass.as_mut_slice();
    let mut material = arrays.material.as_mut_slice();
    let mut force = arrays.force.as_mut_slice();
    let mut torque = arrays.torque.as_mut_slice();
    let mut written = written;

    let mut chunks = Vec::with_capacity(partition.len());
    let mut cursor = 0;
    for range in partition {
        assert_eq!(range.start, cursor, "partition ranges must be contiguous");
        let len = range.end - range.start;
        macro_rules! take {
            ($slice:ident) => {{
                let (head, tail) = $slice.split_at_mut(len);
                $slice = tail;
                head
            }};
        }
        chunks.push(ParticleChunkMut {
            start: range.start,
            id: take!(id),
            position: take!(position),
            velocity: take!(velocity),
            angular_velocity: take!(angular_velocity),
            radius: take!(radius),
            mass: take!(mass),
            material: take!(material),
            force: take!(force),
            torque: take!(torque),
            written: take!(written),
        });
        cursor = range.end;
    }
    chunks
}

/// Double-buffered particle state.
///
/// The previous buffer is immutable during a step; the next buffer is
/// partitioned so each slot is written by exactly one worker. A write mask
/// tracks which slots were filled; [`ParticleSet::swap_buffers`] rejects a
/// partially written next buffer (an empty write set is allowed so that a
/// pair of swaps with no writes is an involution).
#[derive(Debug, Clone)]
pub struct ParticleSet {
    count: usize,
    bufs: [ParticleArrays; 2],
    prev_idx: usize,
    written: Vec<bool>,
}

impl ParticleSet {
    pub fn new(initial: ParticleArrays) -> Result<Self> {
        initial.validate()?;
        let count = initial.len();
        let other = initial.clone();
        Ok(ParticleSet {
            count,
            bufs: [initial, other],
            prev_idx: 0,
            written: vec![false; count],
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// The buffer a step reads from.
    pub fn prev(&self) -> &ParticleArrays {
        &self.bufs[self.prev_idx]
    }

    /// The buffer a step writes to.
    pub fn next(&self) -> &ParticleArrays {
        &self.bufs[1 - self.prev_idx]
    }

    /// Simultaneous read access to the previous buffer and write access to
    /// the next buffer plus its write mask.
    pub fn prev_and_next_mut(&mut self) -> (&ParticleArrays, &mut ParticleArrays, &mut [bool]) {
        let (lo, hi) = self.bufs.split_at_mut(1);
        let (prev, next) = if self.prev_idx == 0 {
            (&lo[0], &mut hi[0])
        } else {
            (&hi[0], &mut lo[0])
        };
        (prev, next, &mut self.written)
    }

    /// Marks every slot of the next buffer as written (used after a phase
    /// that provably fills the whole buffer, such as the reorder gather).
    pub fn mark_all_written(&mut self) {
        self.written.fill(true);
    }

    /// Discards a partially written next buffer after a failed phase so the
    /// set stays usable; the next buffer is fully rewritten by any later
    /// phase before it is read.
    pub fn clear_write_mask(&mut self) {
        self.written.fill(false);
    }

    /// Promotes the next buffer to previous. Fails if the next buffer was
    /// written for some but not all particles. The force and torque
    /// accumulators of the buffer that becomes the new next are zeroed.
    pub fn swap_buffers(&mut self) -> Result<()> {
        let filled = self.written.iter().filter(|&&w| w).count();
        if filled != 0 && filled != self.count {
            return Err(DemError::config(format!(
                "swap_buffers with incomplete write set: {filled} of {} slots written",
                self.count
            )));
        }
        self.prev_idx = 1 - self.prev_idx;
        self.written.fill(false);
        let next = 1 - self.prev_idx;
        self.bufs[next].force.fill(Vec3::ZERO);
        self.bufs[next].torque.fill(Vec3::ZERO);
        Ok(())
    }
}

/// Contact force model selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactModel {
    /// Linear spring + damping + shear with constant coefficients.
    Simple,
    /// Overlap-dependent stiffness, tangential spring history, Coulomb
    /// friction cap, contact torque.
    Practical,
}

impl ContactModel {
    pub fn name(self) -> &'static str {
        match self {
            ContactModel::Simple => "simple",
            ContactModel::Practical => "practical",
        }
    }
}

/// Constant coefficients of the simple contact model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleConstants {
    /// Spring coefficient on the overlap vector.
    pub spring: f64,
    /// Damping coefficient on the full relative velocity.
    pub damping: f64,
    /// Shear coefficient on the tangential relative velocity.
    pub shear: f64,
}

/// Per-material-pair contact coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialPair {
    /// Tangential spring parameter.
    pub spring_tangential: f64,
    /// Normal spring parameter.
    pub spring_normal: f64,
    /// Restitution parameter scaling the damping coefficient (>= 0).
    pub restitution: f64,
    /// Kinetic friction coefficient (>= 0).
    pub friction: f64,
}

impl MaterialPair {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            ("spring_tangential", self.spring_tangential),
            ("spring_normal", self.spring_normal),
            ("restitution", self.restitution),
            ("friction", self.friction),
        ];
        for (name, v) in vals {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DemError::config(format!(
                    "material {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric table of contact coefficients indexed by ordered material pair.
#[derive(Debug, Clone)]
pub struct MaterialTable {
    materials: usize,
    pairs: Vec<MaterialPair>,
}

impl MaterialTable {
    /// Single-material table: every pair uses the same coefficients.
    pub fn uniform(pair: MaterialPair) -> Result<Self> {
        pair.validate()?;
        Ok(MaterialTable { materials: 1, pairs: vec![pair] })
    }

    pub fn with_materials(materials: usize, default: MaterialPair) -> Result<Self> {
        default.validate()?;
        Ok(MaterialTable {
            materials,
            pairs: vec![default; materials * materials],
        })
    }

    pub fn materials(&self) -> usize {
        self.materials
    }

    /// Sets both (a, b) and (b, a) so the table stays symmetric.
    pub fn set_pair(&mut self, a: u32, b: u32, pair: MaterialPair) -> Result<()> {
        pair.validate()?;
        let (a, b) = (a as usize, b as usize);
        if a >= self.materials || b >= self.materials {
            return Err(DemError::config(format!(
                "material index out of range: ({a}, {b}) with {} materials",
                self.materials
            )));
        }
        self.pairs[a * self.materials + b] = pair;
        self.pairs[b * self.materials + a] = pair;
        Ok(())
    }

    pub fn pair(&self, a: u32, b: u32) -> &MaterialPair {
        &self.pairs[a as usize * self.materials + b as usize]
    }
}

/// Rectangular extent of a wall, making it a bounded patch instead of an
/// infinite plane. The rectangle lies in the wall plane, spanning
/// `point ± half_u` along axis `axis_u` and `point ± half_v` along `axis_v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallExtent {
    pub axis_u: usize,
    pub axis_v: usize,
    pub half_u: f64,
    pub half_v: f64,
}

/// A static wall: an infinite plane, or a bounded rectangular patch when
/// `extent` is present. Contact-wise it behaves like a particle of infinite
/// radius and mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub point: Vec3,
    /// Unit normal pointing away from the solid, toward the particles.
    pub normal: Vec3,
    pub material: u32,
    pub extent: Option<WallExtent>,
}

impl Wall {
    pub fn plane(point: Vec3, normal: Vec3, material: u32) -> Result<Self> {
        let n = normal.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(DemError::config("wall normal must be a nonzero finite vector"));
        }
        let normal = normal / n;
        debug_assert!((normal.norm() - 1.0).abs() <= 1e-12);
        Ok(Wall { point, normal, material, extent: None })
    }

    /// Axis-aligned rectangular patch. `axis_u` and `axis_v` are the two
    /// coordinate axes spanning the rectangle; the normal must lie along the
    /// remaining axis.
    pub fn patch(
        point: Vec3,
        normal: Vec3,
        material: u32,
        extent: WallExtent,
    ) -> Result<Self> {
        let mut wall = Wall::plane(point, normal, material)?;
        if extent.axis_u >= 3 || extent.axis_v >= 3 || extent.axis_u == extent.axis_v {
            return Err(DemError::config("wall extent axes must be two distinct axes"));
        }
        if !(extent.half_u > 0.0 && extent.half_v > 0.0) {
            return Err(DemError::config("wall extent half-lengths must be positive"));
        }
        let normal_axis = 3 - extent.axis_u - extent.axis_v;
        if wall.normal.component(normal_axis).abs() < 1.0 - 1e-12 {
            return Err(DemError::config(
                "patch normal must be perpendicular to the extent axes",
            ));
        }
        wall.extent = Some(extent);
        Ok(wall)
    }
}

/// Global simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub gravity: Vec3,
    pub domain_min: Vec3,
    pub domain_max: Vec3,
    /// Cell edge lengths of the collision-detection grid.
    pub cell_edge: Vec3,
    /// A run terminates once every per-step displacement drops below this.
    pub termination_eps: f64,
    pub max_steps: u64,
    pub model: ContactModel,
    pub simple: SimpleConstants,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DemError::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.gravity.is_finite() {
            return Err(DemError::config("gravity must be finite"));
        }
        let ext = self.domain_max - self.domain_min;
        if !(ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0) {
            return Err(DemError::config(
                "domain_max must exceed domain_min componentwise",
            ));
        }
        if !(self.cell_edge.x > 0.0 && self.cell_edge.y > 0.0 && self.cell_edge.z > 0.0) {
            return Err(DemError::config("cell_edge must be positive componentwise"));
        }
        let dims = self.grid_dims();
        if dims.iter().any(|&d| d < 3) {
            return Err(DemError::config(format!(
                "grid must be at least 3 cells per axis, got {dims:?}"
            )));
        }
        if !(self.termination_eps >= 0.0 && self.termination_eps.is_finite()) {
            return Err(DemError::config("termination_eps must be non-negative"));
        }
        let simple = [
            ("simple_spring", self.simple.spring),
            ("simple_damping", self.simple.damping),
            ("simple_shear", self.simple.shear),
        ];
        for (name, v) in simple {
            if !v.is_finite() {
                return Err(DemError::config(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Cell counts per axis: floor(extent / cell_edge).
    pub fn grid_dims(&self) -> [usize; 3] {
        let ext = self.domain_max - self.domain_min;
        [
            (ext.x / self.cell_edge.x).floor().max(0.0) as usize,
            (ext.y / self.cell_edge.y).floor().max(0.0) as usize,
            (ext.z / self.cell_edge.z).floor().max(0.0) as usize,
        ]
    }
}
