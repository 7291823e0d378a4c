//! Lifelong operation: every robot that reaches its goal is handed a fresh
//! one, and the run reports goal arrivals per timestep.

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{DatabaseSet, Engine, EngineConfig, EngineStats};
use crate::error::{Error, Result};
use crate::grid::{random_scenario, random_vertex, seeded_rng, GridGraph, Vertex};
use crate::heuristics::{planning_order, HeuristicKind, Path, PathPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRecord {
    pub total_arrivals: usize,
    pub elapsed_steps: usize,
    /// Arrivals per step.
    pub throughput: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arrival {
    pub robot: usize,
    pub step: usize,
}

#[derive(Debug, Clone)]
pub struct DmpRun {
    pub record: ThroughputRecord,
    pub arrivals: Vec<Arrival>,
    pub trajectories: Vec<Path>,
    pub stats: EngineStats,
    pub wall_ms: f64,
}

/// Step cap used when the engine config sets none.
pub fn default_dmp_steps(g: &GridGraph, n: usize, total_goals: usize) -> usize {
    20 * (g.width() + g.height()) as usize * (total_goals.div_ceil(n.max(1)) + 1) + 10 * n
}

/// Uniform draw from the free cells that are nobody's current goal.
fn fresh_goal(g: &GridGraph, taken: &HashSet<Vertex>, rng: &mut impl rand::Rng) -> Vertex {
    loop {
        let v = random_vertex(g, rng);
        if !taken.contains(&v) {
            return v;
        }
    }
}

struct Committed {
    path: Path,
    start_time: u32,
}

/// Runs `n` robots from a random scenario until `total_goals` arrivals have
/// been counted. Robots already on their goal at step 0 count at step 0.
pub fn run_dmp(
    g: &GridGraph,
    n: usize,
    heuristic: HeuristicKind,
    dbs: &DatabaseSet,
    config: &EngineConfig,
    total_goals: usize,
    seed: u64,
) -> Result<DmpRun> {
    if n == 0 || n >= g.free_count() {
        return Err(Error::Capacity {
            requested: n,
            available: g.free_count().saturating_sub(1),
        });
    }
    if total_goals < n {
        return Err(Error::InvalidParameter(format!(
            "total goals {total_goals} below the robot count {n}"
        )));
    }
    let started = Instant::now();
    let sc = random_scenario(g, n, seed)?;
    let mut planner = PathPlanner::new(g, heuristic, config.divisor.unwrap_or(n as u32), seed);
    let mut committed: Vec<Option<Committed>> = (0..n).map(|_| None).collect();
    for r in planning_order(&sc, heuristic) {
        let path = planner
            .plan(sc.starts[r], sc.goals[r], 0)
            .map_err(|e| with_robot(e, r))?;
        planner.commit(&path, 0);
        committed[r] = Some(Committed {
            path,
            start_time: 0,
        });
    }
    let paths: Vec<Path> = committed
        .iter()
        .map(|c| c.as_ref().unwrap().path.clone())
        .collect();
    let mut engine = Engine::new(g, dbs, config, sc.goals.clone(), paths, seed)?;
    let mut goal_rng = seeded_rng(seed, 6);
    let mut taken: HashSet<Vertex> = sc.goals.iter().copied().collect();
    let mut arrivals = Vec::with_capacity(total_goals);
    let max_steps = config
        .max_steps
        .unwrap_or_else(|| default_dmp_steps(g, n, total_goals));

    let mut arrived: Vec<usize> = (0..n).filter(|&r| sc.starts[r] == sc.goals[r]).collect();
    loop {
        for &r in &arrived {
            if arrivals.len() == total_goals {
                break;
            }
            arrivals.push(Arrival {
                robot: r,
                step: engine.clock(),
            });
            if arrivals.len() == total_goals {
                break;
            }
            let goal = fresh_goal(g, &taken, &mut goal_rng);
            taken.remove(&engine.goal(r));
            taken.insert(goal);
            let (anchor, offset) = engine.replan_anchor(r);
            let start_time = (engine.clock() + offset) as u32;
            if let Some(old) = committed[r].take() {
                planner.retract(&old.path, old.start_time);
            }
            let path = planner
                .plan(anchor, goal, start_time)
                .map_err(|e| with_robot(e, r))?;
            planner.commit(&path, start_time);
            engine.set_goal(r, goal, &path)?;
            committed[r] = Some(Committed { path, start_time });
        }
        if arrivals.len() == total_goals {
            break;
        }
        if engine.clock() >= max_steps {
            return Err(Error::Stall {
                clock: engine.clock(),
                reason: format!("exceeded the step limit of {max_steps}"),
                dump: format!("{} of {total_goals} arrivals", arrivals.len()),
            });
        }
        arrived = engine.step()?;
    }

    let elapsed_steps = engine.clock();
    Ok(DmpRun {
        record: ThroughputRecord {
            total_arrivals: arrivals.len(),
            elapsed_steps,
            throughput: arrivals.len() as f64 / elapsed_steps.max(1) as f64,
        },
        arrivals,
        trajectories: engine.trajectories(),
        stats: engine.stats(),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

fn with_robot(e: Error, robot: usize) -> Error {
    match e {
        Error::NoPath { from, to, .. } => Error::NoPath {
            robot: Some(robot),
            from,
            to,
        },
        other => other,
    }
}
