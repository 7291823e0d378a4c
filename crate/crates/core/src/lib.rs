//! Multi-robot path planning on 4-connected grids by diversified initial
//! paths and local conflict resolution from small-grid solution databases.

pub mod bench;
pub mod dmp;
pub mod engine;
pub mod error;
pub mod grid;
pub mod heuristics;
pub mod subdb;

pub use error::{Error, Result};
pub use grid::{GridGraph, Scenario, Vertex};
pub use heuristics::{HeuristicKind, Path};
pub use subdb::{Shape, SmallConfig, SmallSolution, SolutionDatabase};
