//! Command-line benchmark driver.

use clap::{Args, Parser, Subcommand};
use dem_core::config::RunConfig;
use dem_core::error::Result;
use dem_core::parallel::resolve_worker_count;
use dem_core::profiler::{candidate_bound, packing_capacity};
use dem_core::report::RunReport;
use dem_core::runner;
use dem_core::scene::build_scene;
use std::path::PathBuf;

const FULL_COUNT: usize = 1 << 17;

#[derive(Parser)]
#[command(
    name = "dem",
    version,
    about = "Granular-flow benchmark: spring-dashpot spheres on a sorted collision grid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scene to termination and write reports and snapshots
    Run(CommonArgs),
    /// Run the scene under both contact models and report the throughput ratio
    Compare(CommonArgs),
    /// Validate a config and print scene statistics without simulating
    Scene(SceneArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a `key = value` run configuration file
    config: PathBuf,
    /// Worker thread count (default: DEM_WORKERS, then available parallelism)
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Scale up to the full 131,072-particle benchmark (domain grows to keep
    /// the packing density; counts at or above that size are left alone)
    #[arg(long)]
    full: bool,
    /// Write outputs here instead of the configured output_dir
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SceneArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Accepted for clarity; `scene` never simulates either way
    #[arg(long)]
    dry_run: bool,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Scene(args) => cmd_scene(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn prepare(args: &CommonArgs) -> Result<(RunConfig, usize)> {
    let mut config = RunConfig::load(&args.config)?;
    if args.full && config.particle_count < FULL_COUNT {
        let scale = (FULL_COUNT as f64 / config.particle_count as f64).cbrt();
        let extent = config.sim.domain_max - config.sim.domain_min;
        config.sim.domain_max = config.sim.domain_min + extent * scale;
        config.particle_count = FULL_COUNT;
        config.validate()?;
    }
    if let Some(dir) = &args.output {
        config.output_dir = dir.clone();
    }
    let workers = resolve_worker_count(args.workers)?;
    Ok((config, workers))
}

fn print_run_summary(report: &RunReport) {
    println!("scene        {}", report.scene);
    println!("model        {}", report.model);
    println!("particles    {}", report.particle_count);
    println!("workers      {}", report.workers);
    println!("steps        {}", report.total_steps);
    println!("termination  {}", termination_name(report));
    println!("wall seconds {:.3}", report.wall_seconds);
    println!("throughput   {:.0} particle-steps/s", report.throughput);
    match report.mean_divergence {
        Some(d) => println!("divergence   {d:.4} (contacts per candidate)"),
        None => println!("divergence   n/a"),
    }
    println!("max contacts {}", report.max_contacts_observed);
}

fn termination_name(report: &RunReport) -> &'static str {
    match report.termination {
        dem_core::report::TerminationReason::Settled => "settled",
        dem_core::report::TerminationReason::StepBudget => "step budget",
    }
}

fn cmd_run(args: CommonArgs) -> Result<()> {
    let (config, workers) = prepare(&args)?;
    let report = runner::run_with_outputs(&config, workers)?;
    print_run_summary(&report);
    println!("outputs in   {}", config.output_dir.display());
    Ok(())
}

fn cmd_compare(args: CommonArgs) -> Result<()> {
    let (config, workers) = prepare(&args)?;
    let compare = runner::compare_with_outputs(&config, workers)?;
    println!("== simple model ==");
    print_run_summary(&compare.simple);
    println!();
    println!("== practical model ==");
    print_run_summary(&compare.practical);
    println!();
    match compare.throughput_ratio {
        Some(ratio) => println!("throughput ratio (simple / practical): {ratio:.2}"),
        None => println!("throughput ratio (simple / practical): n/a"),
    }
    println!("outputs in   {}", config.output_dir.display());
    Ok(())
}

fn cmd_scene(args: SceneArgs) -> Result<()> {
    let (config, workers) = prepare(&args.common)?;
    let scene = build_scene(&config)?;
    let dims = config.sim.grid_dims();
    let cells = dims[0] * dims[1] * dims[2];
    let cell = config.sim.cell_edge;
    let capacity = packing_capacity(cell.x, cell.y, cell.z, 2.0 * config.radius);

    println!("scene        {}", config.scene.name());
    println!("model        {}", config.sim.model.name());
    println!("particles    {}", scene.particles.len());
    println!("walls        {}", scene.walls.len());
    let lo = config.sim.domain_min;
    let hi = config.sim.domain_max;
    println!("domain       ({}, {}, {}) .. ({}, {}, {})", lo.x, lo.y, lo.z, hi.x, hi.y, hi.z);
    println!("grid         {} x {} x {} = {} cells", dims[0], dims[1], dims[2], cells);
    println!("cell holds   {capacity:.2} spheres at closest packing");
    println!("candidates   at most {:.1} per particle", candidate_bound(27, capacity));
    println!("workers      {workers}");

    // A pairwise scan is quadratic; only worth it at desk scale.
    if scene.particles.len() <= 10_000 {
        let p = &scene.particles;
        let mut overlaps = 0usize;
        for a in 0..p.len() {
            for b in (a + 1)..p.len() {
                let touch = p.radius[a] + p.radius[b];
                if (p.position[a] - p.position[b]).norm_squared() < touch * touch {
                    overlaps += 1;
                }
            }
        }
        println!("overlaps     {overlaps} initially");
    }
    Ok(())
}
