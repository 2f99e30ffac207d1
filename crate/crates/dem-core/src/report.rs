//! Run reports: a per-step CSV trace and a JSON summary.

use crate::error::{DemError, Result};
use crate::math::Vec3;
use crate::parallel::{load_histogram, ExecutionPlan};
use crate::profiler::{divergence_ratio, StepStats};
use serde::Serialize;
use std::io::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// The largest per-step displacement fell below the threshold.
    Settled,
    /// The configured step budget ran out first.
    StepBudget,
}

/// One simulation step, reduced to scalars a spreadsheet can hold.
#[derive(Debug, Clone)]
pub struct StepRow {
    pub step: u64,
    pub max_displacement: f64,
    pub candidates: u64,
    pub contacts: u64,
    pub max_contacts: u32,
    pub max_candidates: u32,
    /// contacts / candidates; absent on steps where nothing was checked.
    pub divergence: Option<f64>,
    pub sqrt_calls: u64,
    pub norm_sqrt_calls: u64,
    pub branch_paths: u32,
    pub wall_checks: u64,
    pub wall_contacts: u64,
    /// Max worker load over mean worker load, by candidate count.
    pub imbalance: f64,
}

impl StepRow {
    pub fn from_stats(step: u64, max_displacement: f64, stats: &StepStats, plan: &ExecutionPlan) -> StepRow {
        let histogram = load_histogram(&stats.candidates_checked, plan);
        StepRow {
            step,
            max_displacement,
            candidates: stats.total_candidates(),
            contacts: stats.total_contacts(),
            max_contacts: stats.max_contacts(),
            max_candidates: stats.max_candidates(),
            divergence: divergence_ratio(stats).ok(),
            sqrt_calls: stats.sqrt_calls,
            norm_sqrt_calls: stats.norm_sqrt_calls,
            branch_paths: stats.branch_path_count,
            wall_checks: stats.wall_checks,
            wall_contacts: stats.wall_contacts,
            imbalance: histogram.imbalance,
        }
    }
}

/// Whole-run summary. Serializes without the per-step rows; those go to CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scene: String,
    pub model: String,
    pub particle_count: usize,
    pub workers: usize,
    pub dt: f64,
    pub total_steps: u64,
    pub wall_seconds: f64,
    /// Particle-steps per wall-clock second; 0.0 for a run with no steps.
    pub throughput: f64,
    pub termination: TerminationReason,
    pub momentum_initial: Vec3,
    pub momentum_final: Vec3,
    pub momentum_drift: f64,
    pub kinetic_energy_final: f64,
    /// Spheres one grid cell can hold at closest packing.
    pub cell_capacity: f64,
    /// cell_capacity times the 27 searched cells: the candidate ceiling.
    pub candidate_bound: f64,
    pub max_candidates_observed: u32,
    pub max_contacts_observed: u32,
    pub mean_divergence: Option<f64>,
    /// Warp-width 32 over the worst observed branch path count.
    pub warp_speedup_bound: Option<f64>,
    #[serde(skip)]
    pub steps: Vec<StepRow>,
}

pub const CSV_HEADER: &str = "step,max_displacement,candidates,contacts,max_contacts,max_candidates,divergence,sqrt_calls,norm_sqrt_calls,branch_paths,wall_checks,wall_contacts,imbalance";

impl RunReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| DemError::io(path.display().to_string(), e))?;
        let mut out = std::io::BufWriter::new(file);
        let io_err = |e| DemError::io(path.display().to_string(), e);
        writeln!(out, "{CSV_HEADER}").map_err(io_err)?;
        for row in &self.steps {
            let divergence = match row.divergence {
                Some(d) => d.to_string(),
                None => String::new(),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.step,
                row.max_displacement,
                row.candidates,
                row.contacts,
                row.max_contacts,
                row.max_candidates,
                divergence,
                row.sqrt_calls,
                row.norm_sqrt_calls,
                row.branch_paths,
                row.wall_checks,
                row.wall_contacts,
                row.imbalance,
            )
            .map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| DemError::config(format!("report serialization failed: {e}")))?;
        std::fs::write(path, text).map_err(|e| DemError::io(path.display().to_string(), e))
    }
}

/// Two runs of the same scene under the two force models, plus the headline
/// number: how much throughput the cheaper model buys.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub simple: RunReport,
    pub practical: RunReport,
    /// simple throughput / practical throughput; absent when either run
    /// performed no work.
    pub throughput_ratio: Option<f64>,
}

impl CompareReport {
    pub fn new(simple: RunReport, practical: RunReport) -> CompareReport {
        let ratio = if simple.throughput > 0.0 && practical.throughput > 0.0 {
            Some(simple.throughput / practical.throughput)
        } else {
            None
        };
        CompareReport { simple, practical, throughput_ratio: ratio }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| DemError::config(format!("report serialization failed: {e}")))?;
        std::fs::write(path, text).map_err(|e| DemError::io(path.display().to_string(), e))
    }
}
