//! Runtime counters quantifying how much of the candidate search turns
//! into real contact work, plus the closed-form capacity and speedup
//! estimates those counts are compared against.
//!
//! Counting rules: `sqrt_calls` counts only the two coefficient roots of a
//! practical-model pair evaluation (the shared stiffness root and the
//! damping root); vector-norm roots go to `norm_sqrt_calls` so the two
//! kinds stay separable. Each candidate evaluation falls into one of three
//! branch classes (no contact, contact, contact with friction cap); the
//! per-step set of observed classes is the divergence measure.

use crate::error::{DemError, Result};

/// Branch class bits for one candidate evaluation.
pub const BRANCH_NO_CONTACT: u8 = 1 << 0;
pub const BRANCH_CONTACT: u8 = 1 << 1;
pub const BRANCH_CONTACT_CAPPED: u8 = 1 << 2;

/// Per-worker force-phase counters, collected privately and merged at the
/// end-of-phase barrier. The per-particle vectors are indexed by the
/// worker's own slot range in sorted order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkerCounters {
    pub candidates: Vec<u32>,
    pub contacts: Vec<u32>,
    pub coefficient_sqrts: u64,
    pub norm_sqrts: u64,
    pub branch_mask: u8,
    pub wall_checks: u64,
    pub wall_contacts: u64,
}

impl WorkerCounters {
    pub fn with_capacity(slots: usize) -> WorkerCounters {
        WorkerCounters {
            candidates: Vec::with_capacity(slots),
            contacts: Vec::with_capacity(slots),
            ..WorkerCounters::default()
        }
    }
}

/// Merged counters of one completed step. Per-particle arrays are aligned
/// with the step's sorted particle order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub candidates_checked: Vec<u32>,
    pub contacts_found: Vec<u32>,
    /// Coefficient square roots (stiffness + damping), two per contacting
    /// pair evaluation under the practical model.
    pub sqrt_calls: u64,
    /// Square roots spent on vector norms, tracked apart from the
    /// coefficient roots.
    pub norm_sqrt_calls: u64,
    /// Number of distinct branch classes taken across all candidate
    /// evaluations of the step (0 when nothing was evaluated).
    pub branch_path_count: u32,
    pub wall_checks: u64,
    pub wall_contacts: u64,
}

impl StepStats {
    pub fn total_candidates(&self) -> u64 {
        self.candidates_checked.iter().map(|&c| c as u64).sum()
    }

    pub fn total_contacts(&self) -> u64 {
        self.contacts_found.iter().map(|&c| c as u64).sum()
    }

    pub fn max_contacts(&self) -> u32 {
        self.contacts_found.iter().copied().max().unwrap_or(0)
    }

    pub fn max_candidates(&self) -> u32 {
        self.candidates_checked.iter().copied().max().unwrap_or(0)
    }
}

/// Merges per-worker counters in ascending worker order into one step
/// record. Concatenation order must match the partition order so the
/// per-particle arrays line up with sorted slots.
pub fn record_step(workers: impl IntoIterator<Item = WorkerCounters>) -> StepStats {
    let mut stats = StepStats::default();
    let mut mask = 0u8;
    for w in workers {
        debug_assert_eq!(w.candidates.len(), w.contacts.len());
        debug_assert!(w
            .contacts
            .iter()
            .zip(&w.candidates)
            .all(|(found, checked)| found <= checked));
        stats.candidates_checked.extend_from_slice(&w.candidates);
        stats.contacts_found.extend_from_slice(&w.contacts);
        stats.sqrt_calls += w.coefficient_sqrts;
        stats.norm_sqrt_calls += w.norm_sqrts;
        mask |= w.branch_mask;
        stats.wall_checks += w.wall_checks;
        stats.wall_contacts += w.wall_contacts;
    }
    stats.branch_path_count = mask.count_ones();
    stats
}

/// Number of equal spheres of diameter `d` that fit into an `lx × ly × lz`
/// cell under closest packing: sqrt(2) · lx·ly·lz / d³.
pub fn packing_capacity(lx: f64, ly: f64, lz: f64, d: f64) -> f64 {
    std::f64::consts::SQRT_2 * lx * ly * lz / (d * d * d)
}

/// Upper bound on candidates examined per particle: searched cell count
/// times per-cell packing capacity.
pub fn candidate_bound(cells_searched: usize, capacity: f64) -> f64 {
    cells_searched as f64 * capacity
}

/// Fraction of candidate checks that were real contacts. Undefined (error)
/// when nothing was checked.
pub fn divergence_ratio(stats: &StepStats) -> Result<f64> {
    let candidates = stats.total_candidates();
    if candidates == 0 {
        return Err(DemError::config(
            "divergence ratio undefined: no candidates were checked",
        ));
    }
    Ok(stats.total_contacts() as f64 / candidates as f64)
}

/// Best-case lockstep speedup when `distinct_paths` branch outcomes
/// serialize inside a warp of `warp_width` threads.
pub fn speedup_bound(distinct_paths: u32, warp_width: u32) -> f64 {
    assert!(distinct_paths >= 1, "at least one path is always taken");
    assert!(warp_width >= distinct_paths, "paths cannot exceed warp width");
    warp_width as f64 / distinct_paths as f64
}
