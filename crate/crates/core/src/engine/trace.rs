//! Solution trace files and an independent replay collision checker.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridGraph, Vertex};
use crate::heuristics::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    LengthMismatch {
        robot: usize,
        len: usize,
        expected: usize,
    },
    Blocked {
        robot: usize,
        time: usize,
        at: Vertex,
    },
    Jump {
        robot: usize,
        time: usize,
        from: Vertex,
        to: Vertex,
    },
    VertexCollision {
        robots: (usize, usize),
        time: usize,
        at: Vertex,
    },
    EdgeSwap {
        robots: (usize, usize),
        time: usize,
        from: Vertex,
        to: Vertex,
    },
    WrongStart {
        robot: usize,
    },
    WrongGoal {
        robot: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch {
                robot,
                len,
                expected,
            } => {
                write!(f, "robot {robot} has {len} waypoints, expected {expected}")
            }
            Violation::Blocked { robot, time, at } => {
                write!(f, "robot {robot} on blocked cell {at} at t={time}")
            }
            Violation::Jump {
                robot,
                time,
                from,
                to,
            } => {
                write!(f, "robot {robot} jumps {from} -> {to} at t={time}")
            }
            Violation::VertexCollision { robots, time, at } => {
                write!(
                    f,
                    "robots {} and {} share {at} at t={time}",
                    robots.0, robots.1
                )
            }
            Violation::EdgeSwap {
                robots,
                time,
                from,
                to,
            } => {
                write!(
                    f,
                    "robots {} and {} swap {from} <-> {to} at t={time}",
                    robots.0, robots.1
                )
            }
            Violation::WrongStart { robot } => {
                write!(f, "robot {robot} does not start at its start")
            }
            Violation::WrongGoal { robot } => write!(f, "robot {robot} does not end at its goal"),
        }
    }
}

/// Replays synchronized trajectories and lists every rule violation: cells
/// must be free, moves must be waits or unit steps, no two robots may share
/// a vertex, and no two robots may traverse one edge in opposite directions.
pub fn replay_violations(g: &GridGraph, paths: &[Path]) -> Vec<Violation> {
    let mut out = Vec::new();
    let horizon = paths.iter().map(|p| p.len()).max().unwrap_or(0);
    for (r, p) in paths.iter().enumerate() {
        if p.len() != horizon {
            out.push(Violation::LengthMismatch {
                robot: r,
                len: p.len(),
                expected: horizon,
            });
        }
    }
    if !out.is_empty() {
        return out;
    }
    for t in 0..horizon {
        let mut at: HashMap<Vertex, usize> = HashMap::with_capacity(paths.len());
        for (r, p) in paths.iter().enumerate() {
            let v = p[t];
            if !g.is_free(v) {
                out.push(Violation::Blocked {
                    robot: r,
                    time: t,
                    at: v,
                });
            }
            if let Some(&other) = at.get(&v) {
                out.push(Violation::VertexCollision {
                    robots: (other, r),
                    time: t,
                    at: v,
                });
            } else {
                at.insert(v, r);
            }
        }
        if t == 0 {
            continue;
        }
        let mut before: HashMap<Vertex, usize> = HashMap::with_capacity(paths.len());
        for (r, p) in paths.iter().enumerate() {
            before.insert(p[t - 1], r);
        }
        for (r, p) in paths.iter().enumerate() {
            let (u, v) = (p[t - 1], p[t]);
            if u == v {
                continue;
            }
            let step = u.i.abs_diff(v.i) + u.j.abs_diff(v.j);
            if step != 1 {
                out.push(Violation::Jump {
                    robot: r,
                    time: t,
                    from: u,
                    to: v,
                });
            }
            if let Some(&o) = before.get(&v) {
                if o > r && paths[o][t] == u {
                    out.push(Violation::EdgeSwap {
                        robots: (r, o),
                        time: t,
                        from: u,
                        to: v,
                    });
                }
            }
        }
    }
    out
}

/// Replay check plus start and goal endpoints.
pub fn validate_solution(
    g: &GridGraph,
    starts: &[Vertex],
    goals: &[Vertex],
    paths: &[Path],
) -> Vec<Violation> {
    let mut out = replay_violations(g, paths);
    for (r, p) in paths.iter().enumerate() {
        if p.first() != starts.get(r) {
            out.push(Violation::WrongStart { robot: r });
        }
        if p.last() != goals.get(r) {
            out.push(Violation::WrongGoal { robot: r });
        }
    }
    out
}

/// `n T`, then T+1 lines of n `i j` pairs (0-based).
pub fn format_trace(paths: &[Path]) -> String {
    let horizon = paths.iter().map(|p| p.len()).max().unwrap_or(1);
    let mut out = format!("{} {}\n", paths.len(), horizon.saturating_sub(1));
    for t in 0..horizon {
        let line: Vec<String> = paths
            .iter()
            .map(|p| {
                let v = p[t.min(p.len() - 1)];
                format!("{} {}", v.i - 1, v.j - 1)
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_trace(text: &str, origin: &FsPath) -> Result<Vec<Path>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "empty trace"))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|s| {
            s.parse()
                .map_err(|_| Error::parse(origin, 1, "expected `n T`"))
        })
        .collect::<Result<_>>()?;
    let [n, horizon] = nums[..] else {
        return Err(Error::parse(origin, 1, "expected `n T`"));
    };
    let mut paths = vec![Vec::with_capacity(horizon + 1); n];
    for t in 0..=horizon {
        let (k, line) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, t + 2, "missing timestep"))?;
        let coords: Vec<u32> = line
            .split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::parse(origin, k + 1, "bad coordinate"))
            })
            .collect::<Result<_>>()?;
        if coords.len() != 2 * n {
            return Err(Error::parse(
                origin,
                k + 1,
                format!("expected {} coordinates", 2 * n),
            ));
        }
        for (r, path) in paths.iter_mut().enumerate() {
            path.push(Vertex::new(coords[2 * r] + 1, coords[2 * r + 1] + 1));
        }
    }
    if let Some((k, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(
            origin,
            k + 1,
            format!("unexpected trailing line {line:?}"),
        ));
    }
    Ok(paths.into_iter().map(Path).collect())
}

pub fn save_trace(paths: &[Path], path: impl AsRef<FsPath>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_trace(paths)).map_err(|e| Error::io(path, e))
}

pub fn load_trace(path: impl AsRef<FsPath>) -> Result<Vec<Path>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, path)
}
