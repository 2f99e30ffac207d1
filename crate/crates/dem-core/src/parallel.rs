//! Fork-join execution of barrier-phased, data-parallel work.
//!
//! A step runs as a fixed sequence of phases. Within one phase every
//! worker owns a contiguous range of sorted particle slots, reads shared
//! immutable inputs, writes only its own slots plus private scratch, and
//! the scratch results are merged in ascending worker order after the
//! join. Nothing in a phase depends on thread timing, so any worker count
//! produces bitwise-identical results.

use crate::error::{DemError, Result};
use std::collections::BTreeMap;
use std::ops::Range;

/// Partition of the sorted particle slots among workers: contiguous,
/// disjoint ranges covering the whole slot space in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionPlan {
    partition: Vec<Range<usize>>,
}

impl ExecutionPlan {
    /// Splits `count` slots across `worker_count` workers as evenly as
    /// possible (first `count % workers` ranges hold one extra slot).
    /// Workers beyond the slot count are dropped.
    pub fn new(count: usize, worker_count: usize) -> ExecutionPlan {
        let workers = worker_count.max(1).min(count.max(1));
        let base = count / workers;
        let extra = count % workers;
        let mut partition = Vec::with_capacity(workers);
        let mut cursor = 0;
        for w in 0..workers {
            let len = base + usize::from(w < extra);
            partition.push(cursor..cursor + len);
            cursor += len;
        }
        debug_assert_eq!(cursor, count);
        ExecutionPlan { partition }
    }

    pub fn worker_count(&self) -> usize {
        self.partition.len()
    }

    pub fn partition(&self) -> &[Range<usize>] {
        &self.partition
    }
}

/// Runs one phase: item `w` of `items` is handed to worker `w`, and the
/// results come back in worker order. A single item executes inline on the
/// calling thread; worker panics propagate to the caller.
pub fn run_workers<C, T, F>(items: Vec<C>, body: F) -> Vec<T>
where
    C: Send,
    T: Send,
    F: Fn(usize, C) -> T + Sync,
{
    if items.len() <= 1 {
        return items.into_iter().enumerate().map(|(w, item)| body(w, item)).collect();
    }
    std::thread::scope(|scope| {
        let body = &body;
        let handles: Vec<_> = items
            .into_iter()
            .enumerate()
            .map(|(w, item)| scope.spawn(move || body(w, item)))
            .collect();
        handles
            .into_iter()
            .map(|h| match h.join() {
                Ok(value) => value,
                Err(panic) => std::panic::resume_unwind(panic),
            })
            .collect()
    })
}

/// Phase driver for read-only per-range work: the body sees its worker id
/// and slot range, and the per-worker results are returned in worker
/// order for merging.
pub fn parallel_for_particles<T, F>(plan: &ExecutionPlan, body: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync,
{
    run_workers(plan.partition.clone(), body)
}

/// Worker count resolution: an explicit request wins, then the
/// `DEM_WORKERS` environment variable, then the machine's available
/// parallelism.
pub fn resolve_worker_count(explicit: Option<usize>) -> Result<usize> {
    if let Some(n) = explicit {
        if n == 0 {
            return Err(DemError::config("worker count must be at least 1"));
        }
        return Ok(n);
    }
    match std::env::var("DEM_WORKERS") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(DemError::config(format!(
                "DEM_WORKERS must be a positive integer, got {raw:?}"
            ))),
        },
        Err(std::env::VarError::NotPresent) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err(DemError::config("DEM_WORKERS is not valid unicode"))
        }
    }
}

/// Distribution of per-particle work and how evenly it lands on workers.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadHistogram {
    /// work value → number of particles with that value.
    pub counts: BTreeMap<u32, u64>,
    /// Total work per worker, in worker order.
    pub worker_loads: Vec<u64>,
    /// Max worker load over mean worker load; 1.0 for an idle step.
    pub imbalance: f64,
}

/// Summarizes per-particle work counts (e.g. candidates checked) against
/// a partition.
pub fn load_histogram(work: &[u32], plan: &ExecutionPlan) -> LoadHistogram {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for &w in work {
        *counts.entry(w).or_insert(0) += 1;
    }
    let worker_loads: Vec<u64> = plan
        .partition
        .iter()
        .map(|range| work[range.clone()].iter().map(|&w| w as u64).sum())
        .collect();
    let max = worker_loads.iter().copied().max().unwrap_or(0);
    let mean = worker_loads.iter().sum::<u64>() as f64 / worker_loads.len().max(1) as f64;
    let imbalance = if mean == 0.0 { 1.0 } else { max as f64 / mean };
    LoadHistogram { counts, worker_loads, imbalance }
}
