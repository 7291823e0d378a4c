//! Shared plumbing for the `ddm` and `subdb` binaries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use ddm::engine::{DatabaseSet, ShapePref};
use ddm::subdb::{BuildOptions, Shape, SolutionDatabase};

/// Database search path variable, `:`-separated like `PATH`.
pub const DB_ENV: &str = "DDM_SUBDB";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Single-record CSV from ordered `(column, value)` pairs.
pub fn record_csv(fields: &[(&str, String)]) -> String {
    let head: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
    let vals: Vec<&str> = fields.iter().map(|(_, v)| v.as_str()).collect();
    format!("{}\n{}\n", head.join(","), vals.join(","))
}

/// Loads every listed database file (or those on `DDM_SUBDB`), then fills
/// whatever `pref` still needs in memory: the full 2x3 store, or a lazily
/// solved 3x3 store.
pub fn load_databases(paths: &[PathBuf], pref: ShapePref) -> Result<DatabaseSet> {
    let mut files = paths.to_vec();
    if files.is_empty() {
        if let Some(var) = std::env::var_os(DB_ENV) {
            files.extend(std::env::split_paths(&var).filter(|p| !p.as_os_str().is_empty()));
        }
    }
    let (mut two, mut three) = (None, None);
    for path in &files {
        let db = SolutionDatabase::load(path, true)
            .with_context(|| format!("loading {}", path.display()))?;
        let slot = match db.shape() {
            Shape::TwoByThree => &mut two,
            Shape::ThreeByThree => &mut three,
        };
        if slot.is_some() {
            bail!("two {} databases given", db.shape());
        }
        *slot = Some(db);
    }
    if two.is_none() {
        two = Some(SolutionDatabase::build(
            Shape::TwoByThree,
            &BuildOptions::full(6),
        )?);
    }
    if pref == ShapePref::ThreeByThree && three.is_none() {
        eprintln!("note: no 3x3 database file given; solving 3x3 windows on demand");
        three = Some(SolutionDatabase::build(
            Shape::ThreeByThree,
            &BuildOptions::lazy(),
        )?);
    }
    Ok(DatabaseSet::new(two, three)?)
}
