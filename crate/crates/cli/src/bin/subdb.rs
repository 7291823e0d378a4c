use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ddm::subdb::{verify_database, BuildOptions, Shape, SolutionDatabase};
use ddm_cli::{emit, record_csv, Format, DB_ENV};

#[derive(Parser)]
#[command(
    name = "subdb",
    version,
    about = "Build and check small-grid solution databases"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every instance up to `--nmax` robots and write a database file.
    Build(BuildArgs),
    /// Compare random lookups against the search oracle.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BuildKind {
    Full,
    /// Full up to `--nmax`, solved on demand above it once loaded.
    Hybrid,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, default_value = "2x3")]
    shape: Shape,
    /// Largest stored robot count (default: 6 for 2x3, 5 for 3x3).
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long, value_enum, default_value_t = BuildKind::Full)]
    mode: BuildKind,
    /// Database file to write.
    #[arg(long)]
    db: PathBuf,
    /// Summary output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, env = DB_ENV)]
    db: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Build(args) => build(args),
        Command::Verify(args) => verify(args),
    }
}

fn build(args: BuildArgs) -> Result<()> {
    let nmax = args.nmax.unwrap_or(match args.shape {
        Shape::TwoByThree => 6,
        Shape::ThreeByThree => 5,
    });
    let options = match args.mode {
        BuildKind::Full => BuildOptions::full(nmax),
        BuildKind::Hybrid => BuildOptions::hybrid(nmax),
    };
    let started = Instant::now();
    let db = SolutionDatabase::build(args.shape, &options)?;
    db.save(&args.db)?;
    let ms = started.elapsed().as_secs_f64() * 1e3;
    let mut fields = vec![
        ("shape", args.shape.to_string()),
        ("nmax", nmax.to_string()),
        ("entries", db.len().to_string()),
    ];
    if args.timing {
        fields.push(("wall_ms", format!("{ms:.1}")));
    }
    let text = match args.format {
        Format::Csv => record_csv(&fields),
        Format::Json => {
            let mut value = serde_json::json!({
                "shape": args.shape.to_string(),
                "nmax": nmax,
                "entries": db.len(),
            });
            if args.timing {
                value["wall_ms"] = ms.into();
            }
            serde_json::to_string_pretty(&value)? + "\n"
        }
    };
    emit(args.out.as_deref(), &text)
}

fn verify(args: VerifyArgs) -> Result<()> {
    let db = SolutionDatabase::load(&args.db, false)?;
    let report = verify_database(&db, args.samples, args.seed)?;
    let fields = [
        ("shape", db.shape().to_string()),
        ("samples", report.samples.to_string()),
        ("invalid", report.invalid.to_string()),
        ("suboptimal", report.suboptimal.to_string()),
    ];
    let text = match args.format {
        Format::Csv => record_csv(&fields),
        Format::Json => {
            let value = serde_json::json!({
                "shape": db.shape().to_string(),
                "samples": report.samples,
                "invalid": report.invalid,
                "suboptimal": report.suboptimal,
            });
            serde_json::to_string_pretty(&value)? + "\n"
        }
    };
    emit(args.out.as_deref(), &text)?;
    if report.invalid + report.suboptimal > 0 {
        bail!(
            "{} invalid and {} suboptimal entries",
            report.invalid,
            report.suboptimal
        );
    }
    Ok(())
}
