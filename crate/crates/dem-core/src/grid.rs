//! Uniform collision-detection grid and the sorted correspondence maps.
//!
//! Each particle is registered to the cell containing its center. Sorting
//! the particle→cell map groups particles of one cell into a contiguous
//! range, so neighborhood queries become range scans over at most 27 cells.
//!
//! Map vocabulary: `cm[i]` is the cell of original particle `i`;
//! `scm` is `cm` sorted ascending; `sccm[j]` is the original index of the
//! particle at sorted position `j`, so `scm[j] = cm[sccm[j]]`.

use crate::error::{DemError, Result};
use crate::math::Vec3;
use crate::state::{ParticleArrays, ParticleChunkMut, SimConfig};

/// Geometry of the collision-detection grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub origin: Vec3,
    pub cell_edge: Vec3,
}

impl GridSpec {
    pub fn from_config(config: &SimConfig) -> GridSpec {
        GridSpec {
            dims: config.grid_dims(),
            origin: config.domain_min,
            cell_edge: config.cell_edge,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Cell coordinates of a position. Out-of-domain positions are clamped
    /// to the boundary cell layer; walls are expected to keep particles
    /// inside, clamping just keeps a grazing particle indexable.
    pub fn cell_triple(&self, position: Vec3) -> Result<[usize; 3]> {
        if !position.is_finite() {
            return Err(DemError::config(format!(
                "cannot assign a grid cell to non-finite position {position:?}"
            )));
        }
        let mut triple = [0usize; 3];
        for axis in 0..3 {
            let rel = (position.component(axis) - self.origin.component(axis))
                / self.cell_edge.component(axis);
            let max = (self.dims[axis] - 1) as f64;
            triple[axis] = rel.floor().clamp(0.0, max) as usize;
        }
        Ok(triple)
    }

    /// Linearized cell index: i + nx·(j + ny·k).
    pub fn linear(&self, triple: [usize; 3]) -> usize {
        triple[0] + self.dims[0] * (triple[1] + self.dims[1] * triple[2])
    }

    pub fn triple_of(&self, cell: usize) -> [usize; 3] {
        let i = cell % self.dims[0];
        let j = (cell / self.dims[0]) % self.dims[1];
        let k = cell / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn cell_index(&self, position: Vec3) -> Result<usize> {
        Ok(self.linear(self.cell_triple(position)?))
    }
}

/// `out[i]` = cell of particle `i`, in original particle order.
pub fn build_correspondence_map(positions: &[Vec3], spec: &GridSpec) -> Result<Vec<usize>> {
    positions.iter().map(|&p| spec.cell_index(p)).collect()
}

/// Stable sort of the correspondence map. Returns (scm, sccm): the sorted
/// cell indices and the permutation from sorted position to original index.
/// Ties keep ascending original index, so equal-cell particles preserve
/// their relative order.
pub fn sort_map(cm: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut sccm: Vec<usize> = (0..cm.len()).collect();
    sccm.sort_by_key(|&i| cm[i]);
    let scm = sccm.iter().map(|&i| cm[i]).collect();
    (scm, sccm)
}

/// Per-cell offset ranges into the sorted map: cell `k` occupies sorted
/// positions `[cell_start[k], cell_end[k])`. Empty cells get an empty range
/// positioned by the prefix sum.
pub fn cell_ranges(scm: &[usize], cell_count: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut counts = vec![0usize; cell_count];
    let mut previous = 0usize;
    for &cell in scm {
        if cell < previous {
            return Err(DemError::config("cell_ranges requires a sorted map"));
        }
        if cell >= cell_count {
            return Err(DemError::config(format!(
                "cell index {cell} out of range for {cell_count} cells"
            )));
        }
        counts[cell] += 1;
        previous = cell;
    }
    let mut start = vec![0usize; cell_count];
    let mut acc = 0usize;
    for (cell, &count) in counts.iter().enumerate() {
        start[cell] = acc;
        acc += count;
    }
    let end = start
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| s + c)
        .collect();
    Ok((start, end))
}

/// The in-bounds members of the 3×3×3 cell block around a cell, as linear
/// indices in ascending order.
#[derive(Debug, Clone, Copy)]
pub struct NeighborCells {
    cells: [usize; 27],
    len: usize,
}

impl NeighborCells {
    pub fn as_slice(&self) -> &[usize] {
        &self.cells[..self.len]
    }
}

pub fn neighbor_cells(triple: [usize; 3], spec: &GridSpec) -> NeighborCells {
    let mut out = NeighborCells { cells: [0; 27], len: 0 };
    // Ascending (k, j, i) iteration yields ascending linear indices, which
    // keeps the candidate order deterministic.
    for dk in -1i64..=1 {
        let k = triple[2] as i64 + dk;
        if k < 0 || k >= spec.dims[2] as i64 {
            continue;
        }
        for dj in -1i64..=1 {
            let j = triple[1] as i64 + dj;
            if j < 0 || j >= spec.dims[1] as i64 {
                continue;
            }
            for di in -1i64..=1 {
                let i = triple[0] as i64 + di;
                if i < 0 || i >= spec.dims[0] as i64 {
                    continue;
                }
                out.cells[out.len] = spec.linear([i as usize, j as usize, k as usize]);
                out.len += 1;
            }
        }
    }
    out
}

/// The collision maps for one step.
#[derive(Debug, Clone)]
pub struct GridMaps {
    /// Cell of each particle in original order.
    pub cm: Vec<usize>,
    /// Cells in sorted order: `scm[j] = cm[sccm[j]]`.
    pub scm: Vec<usize>,
    /// Sorted position → original index permutation.
    pub sccm: Vec<usize>,
    pub cell_start: Vec<usize>,
    pub cell_end: Vec<usize>,
}

impl GridMaps {
    pub fn build(positions: &[Vec3], spec: &GridSpec) -> Result<GridMaps> {
        let cm = build_correspondence_map(positions, spec)?;
        let (scm, sccm) = sort_map(&cm);
        let (cell_start, cell_end) = cell_ranges(&scm, spec.cell_count())?;
        Ok(GridMaps { cm, scm, sccm, cell_start, cell_end })
    }

    pub fn len(&self) -> usize {
        self.scm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scm.is_empty()
    }
}

/// Collects the sorted-order indices of all particles in the neighbor cells
/// of particle `j` (itself a sorted-order index), excluding `j`. Results are
/// ascending because neighbor cells are visited in ascending order and each
/// cell's range is ascending.
pub fn candidate_particles(j: usize, maps: &GridMaps, spec: &GridSpec, out: &mut Vec<usize>) {
    out.clear();
    let cell = maps.scm[j];
    for &neighbor in neighbor_cells(spec.triple_of(cell), spec).as_slice() {
        for slot in maps.cell_start[neighbor]..maps.cell_end[neighbor] {
            if slot != j {
                out.push(slot);
            }
        }
    }
}

/// Gathers `src[sccm[global]]` into a destination chunk, marking every slot
/// written. `global` is `chunk.start + local`.
pub fn gather_into_chunk(src: &ParticleArrays, sccm: &[usize], chunk: &mut ParticleChunkMut) {
    for local in 0..chunk.written.len() {
        let from = sccm[chunk.start + local];
        chunk.id[local] = src.id[from];
        chunk.position[local] = src.position[from];
        chunk.velocity[local] = src.velocity[from];
        chunk.angular_velocity[local] = src.angular_velocity[from];
        chunk.radius[local] = src.radius[from];
        chunk.mass[local] = src.mass[from];
        chunk.material[local] = src.material[from];
        chunk.force[local] = src.force[from];
        chunk.torque[local] = src.torque[from];
        chunk.written[local] = true;
    }
}

/// Returns a copy of the arrays with every property gathered through the
/// permutation: `out[j] = src[sccm[j]]`.
pub fn reorder_properties(src: &ParticleArrays, sccm: &[usize]) -> Result<ParticleArrays> {
    let n = src.len();
    if sccm.len() != n {
        return Err(DemError::config(format!(
            "permutation length {} does not match particle count {n}",
            sccm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in sccm {
        if i >= n || seen[i] {
            return Err(DemError::config("reorder index array is not a permutation"));
        }
        seen[i] = true;
    }
    let mut out = ParticleArrays::zeroed(n);
    let mut written = vec![false; n];
    let mut chunk_src = out_chunk(&mut out, &mut written);
    gather_into_chunk(src, sccm, &mut chunk_src);
    Ok(out)
}

fn out_chunk<'a>(arrays: &'a mut ParticleArrays, written: &'a mut [bool]) -> ParticleChunkMut<'a> {
    ParticleChunkMut {
        start: 0,
        id: &mut arrays.id,
        position: &mut arrays.position,
        velocity: &mut arrays.velocity,
        angular_velocity: &mut arrays.angular_velocity,
        radius: &mut arrays.radius,
        mass: &mut arrays.mass,
        material: &mut arrays.material,
        force: &mut arrays.force,
        torque: &mut arrays.torque,
        written,
    }
}
