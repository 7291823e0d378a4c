use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ddm::bench::{
    lower_bound, occupancy_heatmap, rows_to_csv, rows_to_json, run_experiment, ExperimentSpec,
    MapSource, Mode, RunStats,
};
use ddm::dmp::run_dmp;
use ddm::engine::{save_trace, solve, EngineConfig, ShapePref};
use ddm::grid::{format_map, format_scenario, load_scenario, random_scenario};
use ddm::heuristics::HeuristicKind;
use ddm::Error;
use ddm_cli::{emit, load_databases, record_csv, Format};

#[derive(Parser)]
#[command(
    name = "ddm",
    version,
    about = "Multi-robot path planning on grid maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write its statistics and trace.
    Solve(SolveArgs),
    /// Run an experiment matrix.
    Bench(BenchArgs),
    /// Lifelong run: fresh goals on every arrival.
    Dmp(DmpArgs),
    /// Traversal counts of many independently planned paths.
    Heatmap(HeatmapArgs),
    /// Write a generated map file.
    Map(MapArgs),
    /// Write a random scenario file.
    Scenario(ScenarioArgs),
}

#[derive(Args)]
struct Common {
    /// `free:WxH`, `warehouse`, `lowres:WxH:kK:FRACTION` or a map file.
    #[arg(long, default_value = "free:24x18")]
    map: MapSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value = "2x3")]
    shape: ShapePref,
    /// Database file, repeatable; falls back to `DDM_SUBDB`.
    #[arg(long)]
    db: Vec<PathBuf>,
    /// Include wall-clock times in written files.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Occupancy/state-time penalty divisor (default: robot count).
    #[arg(long)]
    divisor: Option<u32>,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig {
            max_steps: self.max_steps,
            divisor: self.divisor,
            ..EngineConfig::with_shape(self.shape)
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    engine: EngineArgs,
    /// Scenario file; a random scenario is drawn otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    robots: usize,
    #[arg(long, default_value = "occupancy")]
    heuristic: HeuristicKind,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchMode {
    OneShot,
    Dmp,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "10,20,30,40,50,60,70,80,90,100"
    )]
    robots: Vec<usize>,
    /// Heuristic names, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    heuristics: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "2x3")]
    shapes: Vec<ShapePref>,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = BenchMode::OneShot)]
    mode: BenchMode,
    /// Goals per lifelong trial.
    #[arg(long, default_value_t = 1000)]
    goals: usize,
}

#[derive(Args)]
struct DmpArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 100)]
    robots: usize,
    #[arg(long, default_value_t = 10_000)]
    goals: usize,
    #[arg(long, default_value = "occupancy")]
    heuristic: HeuristicKind,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Arrival log as `robot,step` CSV.
    #[arg(long)]
    arrivals: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long, default_value = "free:48x27")]
    map: MapSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
    #[arg(long, default_value = "random")]
    heuristic: HeuristicKind,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long, default_value = "warehouse")]
    map: MapSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, default_value = "free:24x18")]
    map: MapSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    robots: usize,
}

fn main() -> Result<()> {
    let result = match Cli::parse().command {
        Command::Solve(args) => run_solve(args),
        Command::Bench(args) => run_bench(args),
        Command::Dmp(args) => run_lifelong(args),
        Command::Heatmap(args) => run_heatmap(args),
        Command::Map(args) => {
            let g = args.map.build(args.seed)?;
            emit(args.out.as_deref(), &format_map(&g))
        }
        Command::Scenario(args) => {
            let g = args.map.build(args.seed)?;
            let sc = random_scenario(&g, args.robots, args.seed)?;
            emit(args.out.as_deref(), &format_scenario(&sc))
        }
    };
    if let Err(e) = &result {
        if let Some(Error::Stall { dump, .. }) = e.downcast_ref::<Error>() {
            eprint!("{dump}");
        }
    }
    result
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let c = &args.common;
    let g = c.map.build(c.seed)?;
    let sc = match &args.scenario {
        Some(path) => load_scenario(&g, path)?,
        None => random_scenario(&g, args.robots, c.seed)?,
    };
    let dbs = load_databases(&args.engine.db, args.engine.shape)?;
    let lb = lower_bound(&g, &sc)?;
    let sol = solve(&g, &sc, args.heuristic, &dbs, &args.engine.config())?;
    if let Some(path) = &args.trace {
        save_trace(&sol.paths, path)?;
    }
    let stats = RunStats::new(&sol, lb, sc.seed, args.engine.timing);
    let text = match c.format {
        Format::Json => serde_json::to_string_pretty(&stats)? + "\n",
        Format::Csv => {
            let mut fields = vec![
                ("makespan", stats.makespan.to_string()),
                ("lower_bound", stats.lower_bound.to_string()),
                ("ratio", format!("{:.4}", stats.ratio)),
            ];
            if let Some(ms) = stats.wall_ms {
                fields.push(("wall_ms", format!("{ms:.3}")));
            }
            fields.extend([
                ("conflicts", stats.conflicts.to_string()),
                ("windows", stats.windows.to_string()),
                ("postpones", stats.postpones.to_string()),
                ("skips", stats.skips.to_string()),
                ("seed", stats.seed.to_string()),
            ]);
            record_csv(&fields)
        }
    };
    emit(c.out.as_deref(), &text)
}

fn parse_heuristics(names: &[String]) -> Result<Vec<HeuristicKind>> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            out.extend(HeuristicKind::ALL);
        } else {
            out.push(name.parse()?);
        }
    }
    if out.is_empty() {
        bail!("no heuristics selected");
    }
    Ok(out)
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let c = &args.common;
    let mut spec = ExperimentSpec::new(
        c.map.clone(),
        args.robots.clone(),
        parse_heuristics(&args.heuristics)?,
    );
    spec.shapes = args.shapes.clone();
    spec.trials = args.trials;
    spec.seed_base = c.seed;
    spec.mode = match args.mode {
        BenchMode::OneShot => Mode::OneShot,
        BenchMode::Dmp => Mode::Dmp {
            total_goals: args.goals,
        },
    };
    let pref = if spec.shapes.contains(&ShapePref::ThreeByThree) {
        ShapePref::ThreeByThree
    } else {
        ShapePref::TwoByThree
    };
    let dbs = load_databases(&args.engine.db, pref)?;
    let rows = run_experiment(&spec, &dbs)?;
    for r in &rows {
        eprintln!(
            "{:>4} {:<16} {} makespan {:>8.2} ratio {:>6} wall {:>8.2} ms failures {}",
            r.robots,
            r.heuristic,
            r.shape,
            r.makespan_mean,
            r.ratio_mean
                .map(|x| format!("{x:.3}"))
                .unwrap_or_else(|| "-".into()),
            r.wall_ms_mean,
            r.failures
        );
        for e in &r.errors {
            eprintln!("     {e}");
        }
    }
    let text = match c.format {
        Format::Csv => rows_to_csv(&rows, args.engine.timing),
        Format::Json => rows_to_json(&rows, args.engine.timing),
    };
    emit(c.out.as_deref(), &text)
}

fn run_lifelong(args: DmpArgs) -> Result<()> {
    let c = &args.common;
    let g = c.map.build(c.seed)?;
    let dbs = load_databases(&args.engine.db, args.engine.shape)?;
    let run = run_dmp(
        &g,
        args.robots,
        args.heuristic,
        &dbs,
        &args.engine.config(),
        args.goals,
        c.seed,
    )?;
    if let Some(path) = &args.trace {
        save_trace(&run.trajectories, path)?;
    }
    if let Some(path) = &args.arrivals {
        let mut text = String::from("robot,step\n");
        for a in &run.arrivals {
            text.push_str(&format!("{},{}\n", a.robot, a.step));
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let r = &run.record;
    let text = match c.format {
        Format::Csv => {
            let mut fields = vec![
                ("robots", args.robots.to_string()),
                ("total_arrivals", r.total_arrivals.to_string()),
                ("elapsed_steps", r.elapsed_steps.to_string()),
                ("throughput", format!("{:.6}", r.throughput)),
                ("conflicts", run.stats.conflicts.to_string()),
                ("windows", run.stats.windows.to_string()),
                ("postpones", run.stats.postpones.to_string()),
                ("skips", run.stats.skips.to_string()),
                ("seed", c.seed.to_string()),
            ];
            if args.engine.timing {
                fields.push(("wall_ms", format!("{:.3}", run.wall_ms)));
            }
            record_csv(&fields)
        }
        Format::Json => {
            let mut value = serde_json::json!({
                "robots": args.robots,
                "total_arrivals": r.total_arrivals,
                "elapsed_steps": r.elapsed_steps,
                "throughput": r.throughput,
                "conflicts": run.stats.conflicts,
                "windows": run.stats.windows,
                "postpones": run.stats.postpones,
                "skips": run.stats.skips,
                "seed": c.seed,
            });
            if args.engine.timing {
                value["wall_ms"] = run.wall_ms.into();
            }
            serde_json::to_string_pretty(&value)? + "\n"
        }
    };
    emit(c.out.as_deref(), &text)
}

fn run_heatmap(args: HeatmapArgs) -> Result<()> {
    let g = args.map.build(args.seed)?;
    let hm = occupancy_heatmap(&g, args.pairs, args.heuristic, args.seed)?;
    eprintln!(
        "center mean {:.2}, border mean {:.2}",
        hm.center_mean(),
        hm.border_mean()
    );
    let text = match args.format {
        Format::Csv => hm.to_csv(),
        Format::Json => {
            let rows: Vec<&[u64]> = hm.counts.chunks(hm.width as usize).collect();
            let value = serde_json::json!({
                "width": hm.width,
                "height": hm.height,
                "heuristic": args.heuristic.to_string(),
                "pairs": args.pairs,
                "seed": args.seed,
                "center_mean": hm.center_mean(),
                "border_mean": hm.border_mean(),
                "counts": rows,
            });
            serde_json::to_string(&value)? + "\n"
        }
    };
    emit(args.out.as_deref(), &text)
}
