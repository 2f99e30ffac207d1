//! Whole-run orchestration: build a scene, step it to termination, time it,
//! and emit reports and snapshots.

use crate::config::RunConfig;
use crate::error::Result;
use crate::integrator::{termination_check, Simulation};
use crate::profiler::{candidate_bound, packing_capacity, speedup_bound};
use crate::report::{CompareReport, RunReport, StepRow, TerminationReason};
use crate::scene::build_scene;
use crate::snapshot::write_snapshot;
use crate::state::{ContactModel, MaterialTable};
use std::path::Path;
use std::time::{Duration, Instant};

pub fn build_simulation(config: &RunConfig, workers: usize) -> Result<Simulation> {
    let scene = build_scene(config)?;
    let materials = MaterialTable::uniform(config.material)?;
    Simulation::new(config.sim.clone(), materials, scene.walls, scene.particles, workers)
}

/// Runs to termination without touching the filesystem.
pub fn run_in_memory(config: &RunConfig, workers: usize) -> Result<(RunReport, Simulation)> {
    run_internal(config, workers, None)
}

/// Runs to termination and writes `steps.csv`, `summary.json`, `final.dems`
/// and any periodic `step_<k>.dems` under the configured output directory.
pub fn run_with_outputs(config: &RunConfig, workers: usize) -> Result<RunReport> {
    let dir = config.output_dir.clone();
    ensure_dir(&dir)?;
    let (report, sim) = run_internal(config, workers, Some(dir.as_path()))?;
    write_snapshot(&dir.join("final.dems"), sim.particles(), sim.history())?;
    report.write_csv(&dir.join("steps.csv"))?;
    report.write_json(&dir.join("summary.json"))?;
    Ok(report)
}

/// Runs the scene under both force models with everything else identical.
pub fn compare_in_memory(config: &RunConfig, workers: usize) -> Result<CompareReport> {
    let (simple, _) = run_in_memory(&with_model(config, ContactModel::Simple), workers)?;
    let (practical, _) = run_in_memory(&with_model(config, ContactModel::Practical), workers)?;
    Ok(CompareReport::new(simple, practical))
}

/// Like [`compare_in_memory`], plus `steps_simple.csv`, `steps_practical.csv`
/// and `compare.json` in the output directory.
pub fn compare_with_outputs(config: &RunConfig, workers: usize) -> Result<CompareReport> {
    let dir = config.output_dir.clone();
    ensure_dir(&dir)?;
    let compare = compare_in_memory(config, workers)?;
    compare.simple.write_csv(&dir.join("steps_simple.csv"))?;
    compare.practical.write_csv(&dir.join("steps_practical.csv"))?;
    compare.write_json(&dir.join("compare.json"))?;
    Ok(compare)
}

fn with_model(config: &RunConfig, model: ContactModel) -> RunConfig {
    let mut config = config.clone();
    config.sim.model = model;
    config
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::DemError::io(dir.display().to_string(), e))
}

fn run_internal(
    config: &RunConfig,
    workers: usize,
    snapshot_dir: Option<&Path>,
) -> Result<(RunReport, Simulation)> {
    let mut sim = build_simulation(config, workers)?;
    let momentum_initial = sim.total_momentum();
    let mut rows: Vec<StepRow> = Vec::new();
    let mut stepping = Duration::ZERO;
    let mut termination = TerminationReason::StepBudget;

    while sim.step_index() < config.sim.max_steps {
        let started = Instant::now();
        let outcome = sim.step()?;
        stepping += started.elapsed();
        rows.push(StepRow::from_stats(
            outcome.step_index,
            outcome.max_displacement,
            &outcome.stats,
            sim.plan(),
        ));
        if let Some(dir) = snapshot_dir {
            let every = config.snapshot_every;
            if every > 0 && outcome.step_index % every == 0 {
                let path = dir.join(format!("step_{}.dems", outcome.step_index));
                write_snapshot(&path, sim.particles(), sim.history())?;
            }
        }
        if termination_check(&outcome, &config.sim) {
            if outcome.max_displacement < config.sim.termination_eps {
                termination = TerminationReason::Settled;
            }
            break;
        }
    }

    let total_steps = sim.step_index();
    let wall_seconds = stepping.as_secs_f64();
    let throughput = if total_steps == 0 {
        0.0
    } else {
        config.particle_count as f64 * total_steps as f64 / wall_seconds.max(1e-9)
    };
    let momentum_final = sim.total_momentum();

    let diameter = 2.0 * config.radius;
    let cell = config.sim.cell_edge;
    let cell_capacity = packing_capacity(cell.x, cell.y, cell.z, diameter);
    let worst_paths = rows.iter().map(|r| r.branch_paths).max().unwrap_or(0);
    let divergences: Vec<f64> = rows.iter().filter_map(|r| r.divergence).collect();
    let mean_divergence = if divergences.is_empty() {
        None
    } else {
        Some(divergences.iter().sum::<f64>() / divergences.len() as f64)
    };

    let report = RunReport {
        scene: config.scene.name().to_string(),
        model: config.sim.model.name().to_string(),
        particle_count: config.particle_count,
        workers: sim.worker_count(),
        dt: config.sim.dt,
        total_steps,
        wall_seconds,
        throughput,
        termination,
        momentum_initial,
        momentum_final,
        momentum_drift: (momentum_final - momentum_initial).norm(),
        kinetic_energy_final: sim.kinetic_energy(),
        cell_capacity,
        candidate_bound: candidate_bound(27, cell_capacity),
        max_candidates_observed: rows.iter().map(|r| r.max_candidates).max().unwrap_or(0),
        max_contacts_observed: rows.iter().map(|r| r.max_contacts).max().unwrap_or(0),
        mean_divergence,
        warp_speedup_bound: (worst_paths >= 1 && worst_paths <= 32)
            .then(|| speedup_bound(worst_paths, 32)),
        steps: rows,
    };
    Ok((report, sim))
}
