//! Single-robot path generation with path-diversification heuristics.
//!
//! On obstacle-free regions, paths are built directly from the axis-aligned
//! move multiset (randomized or single-turn orderings). Otherwise A* is used
//! with the Manhattan heuristic, optionally inflated by a vertex-occupancy
//! term `O[v] / n` or a state-time term `(S[v, t] + S[(parent, v), t]) / n`.
//! The inflation terms are soft: they change which shortest-ish path is found
//! but never reachability.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{seeded_rng, GridGraph, Scenario, Vertex};

/// Time-indexed vertex sequence `p^0 .. p^T`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Path(pub Vec<Vertex>);

impl Path {
    /// Number of timesteps T (waypoints minus one).
    pub fn duration(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn start(&self) -> Option<Vertex> {
        self.0.first().copied()
    }

    pub fn goal(&self) -> Option<Vertex> {
        self.0.last().copied()
    }

    /// Consecutive waypoints are equal or adjacent, and every waypoint is free.
    pub fn is_valid(&self, g: &GridGraph) -> bool {
        self.0.iter().all(|&v| g.is_free(v))
            && self
                .0
                .windows(2)
                .all(|w| w[0] == w[1] || w[0].is_adjacent(w[1]))
    }

    pub fn into_inner(self) -> Vec<Vertex> {
        self.0
    }
}

impl Deref for Path {
    type Target = [Vertex];

    fn deref(&self) -> &[Vertex] {
        &self.0
    }
}

pub fn manhattan(a: Vertex, b: Vertex) -> u32 {
    a.i.abs_diff(b.i) + a.j.abs_diff(b.j)
}

/// Which turning point a single-turn path uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TurnMode {
    /// Turning point farther from the grid center.
    Far,
    Near,
    /// Far with the given probability, otherwise near.
    Mixed(f64),
}

pub const DEFAULT_MIXED_RATIO: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HeuristicKind {
    Random,
    SingleTurnFar,
    SingleTurnNear,
    SingleTurnMixed(f64),
    Manhattan,
    Occupancy,
    StateTime,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 7] = [
        HeuristicKind::Random,
        HeuristicKind::SingleTurnFar,
        HeuristicKind::SingleTurnNear,
        HeuristicKind::SingleTurnMixed(DEFAULT_MIXED_RATIO),
        HeuristicKind::Manhattan,
        HeuristicKind::Occupancy,
        HeuristicKind::StateTime,
    ];

    fn turn_mode(self) -> Option<TurnMode> {
        match self {
            HeuristicKind::SingleTurnFar => Some(TurnMode::Far),
            HeuristicKind::SingleTurnNear => Some(TurnMode::Near),
            HeuristicKind::SingleTurnMixed(r) => Some(TurnMode::Mixed(r)),
            _ => None,
        }
    }

    /// Occupancy and state-time planning is order dependent.
    pub fn is_sequential(self) -> bool {
        matches!(self, HeuristicKind::Occupancy | HeuristicKind::StateTime)
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeuristicKind::Random => write!(f, "random"),
            HeuristicKind::SingleTurnFar => write!(f, "turn-far"),
            HeuristicKind::SingleTurnNear => write!(f, "turn-near"),
            HeuristicKind::SingleTurnMixed(r) => write!(f, "turn-mixed={r}"),
            HeuristicKind::Manhattan => write!(f, "manhattan"),
            HeuristicKind::Occupancy => write!(f, "occupancy"),
            HeuristicKind::StateTime => write!(f, "state-time"),
        }
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "random" => HeuristicKind::Random,
            "turn-far" => HeuristicKind::SingleTurnFar,
            "turn-near" => HeuristicKind::SingleTurnNear,
            "turn-mixed" => HeuristicKind::SingleTurnMixed(DEFAULT_MIXED_RATIO),
            "manhattan" => HeuristicKind::Manhattan,
            "occupancy" => HeuristicKind::Occupancy,
            "state-time" => HeuristicKind::StateTime,
            other => {
                let ratio = other
                    .strip_prefix("turn-mixed=")
                    .and_then(|r| r.parse::<f64>().ok())
                    .filter(|r| (0.0..=1.0).contains(r))
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!("unknown heuristic {other:?}"))
                    })?;
                HeuristicKind::SingleTurnMixed(ratio)
            }
        };
        Ok(kind)
    }
}

/// Per-vertex count of committed paths traversing it.
#[derive(Debug, Clone)]
pub struct OccupancyMap {
    counts: Vec<u32>,
}

impl OccupancyMap {
    pub fn new(g: &GridGraph) -> Self {
        OccupancyMap {
            counts: vec![0; g.cell_count()],
        }
    }

    pub fn get(&self, g: &GridGraph, v: Vertex) -> u32 {
        self.counts[g.index(v)]
    }

    pub fn add_path(&mut self, g: &GridGraph, path: &[Vertex]) {
        for &v in path {
            self.counts[g.index(v)] += 1;
        }
    }

    pub fn remove_path(&mut self, g: &GridGraph, path: &[Vertex]) {
        for &v in path {
            let c = &mut self.counts[g.index(v)];
            *c = c.saturating_sub(1);
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Counts indexed by row-major cell index.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }
}

/// Per-(vertex or undirected edge, timestep) usage counts.
#[derive(Debug, Clone, Default)]
pub struct StateTimeMap {
    counts: HashMap<u64, u32>,
}

impl StateTimeMap {
    pub fn new() -> Self {
        Self::default()
    }

    fn vertex_key(cell: usize, t: u32) -> u64 {
        ((t as u64) << 44) | ((cell as u64) << 22) | (cell as u64)
    }

    fn edge_key(a: usize, b: usize, t: u32) -> u64 {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        ((t as u64) << 44) | ((lo as u64) << 22) | hi as u64 | (1 << 63)
    }

    pub fn vertex_count(&self, g: &GridGraph, v: Vertex, t: u32) -> u32 {
        self.counts
            .get(&Self::vertex_key(g.index(v), t))
            .copied()
            .unwrap_or(0)
    }

    pub fn edge_count(&self, g: &GridGraph, a: Vertex, b: Vertex, t: u32) -> u32 {
        self.counts
            .get(&Self::edge_key(g.index(a), g.index(b), t))
            .copied()
            .unwrap_or(0)
    }

    fn keys(g: &GridGraph, path: &[Vertex], start_time: u32) -> impl Iterator<Item = u64> {
        let cells: Vec<usize> = path.iter().map(|&v| g.index(v)).collect();
        (0..cells.len()).flat_map(move |k| {
            let t = start_time + k as u32;
            let vertex = Self::vertex_key(cells[k], t);
            let edge = (k > 0 && cells[k] != cells[k - 1])
                .then(|| Self::edge_key(cells[k - 1], cells[k], t));
            std::iter::once(vertex).chain(edge)
        })
    }

    /// Records `path[k]` at time `start_time + k` and the edge entering it.
    pub fn add_path(&mut self, g: &GridGraph, path: &[Vertex], start_time: u32) {
        for key in Self::keys(g, path, start_time) {
            *self.counts.entry(key).or_insert(0) += 1;
        }
    }

    pub fn remove_path(&mut self, g: &GridGraph, path: &[Vertex], start_time: u32) {
        for key in Self::keys(g, path, start_time) {
            if let Some(c) = self.counts.get_mut(&key) {
                *c -= 1;
                if *c == 0 {
                    self.counts.remove(&key);
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Inflation term added to the Manhattan heuristic.
#[derive(Debug, Clone, Copy)]
pub enum Penalty<'a> {
    None,
    Occupancy(&'a OccupancyMap),
    StateTime {
        map: &'a StateTimeMap,
        start_time: u32,
    },
}

fn monotone_moves(s: Vertex, t: Vertex) -> (Vec<(i64, i64)>, (i64, i64), (i64, i64)) {
    let dx = if t.i >= s.i { (1, 0) } else { (-1, 0) };
    let dy = if t.j >= s.j { (0, 1) } else { (0, -1) };
    let mut moves = vec![dx; s.i.abs_diff(t.i) as usize];
    moves.extend(std::iter::repeat_n(dy, s.j.abs_diff(t.j) as usize));
    (moves, dx, dy)
}

fn walk(s: Vertex, moves: &[(i64, i64)]) -> Path {
    let mut cur = s;
    let mut out = Vec::with_capacity(moves.len() + 1);
    out.push(cur);
    for &(di, dj) in moves {
        cur = Vertex::new((cur.i as i64 + di) as u32, (cur.j as i64 + dj) as u32);
        out.push(cur);
    }
    Path(out)
}

fn require_free_rect(g: &GridGraph, s: Vertex, t: Vertex) -> Result<()> {
    if !g.is_free(s) {
        return Err(Error::InvalidVertex(s));
    }
    if !g.is_free(t) {
        return Err(Error::InvalidVertex(t));
    }
    if !g.rect_is_free(s, t) {
        return Err(Error::NotApplicable { from: s, to: t });
    }
    Ok(())
}

/// Uniformly random ordering of the axis-aligned moves from `s` to `t`.
///
/// Requires the bounding rectangle of `s` and `t` to be obstacle-free.
pub fn random_shortest_path<R: Rng>(
    g: &GridGraph,
    s: Vertex,
    t: Vertex,
    rng: &mut R,
) -> Result<Path> {
    require_free_rect(g, s, t)?;
    let (mut moves, _, _) = monotone_moves(s, t);
    moves.shuffle(rng);
    Ok(walk(s, &moves))
}

/// L-shaped path from `s` to `t`; the turning point is chosen relative to
/// the grid center `((w+1)/2, (h+1)/2)` by Euclidean distance.
pub fn single_turn_path<R: Rng>(
    g: &GridGraph,
    s: Vertex,
    t: Vertex,
    mode: TurnMode,
    rng: &mut R,
) -> Result<Path> {
    require_free_rect(g, s, t)?;
    let (moves, dx, dy) = monotone_moves(s, t);
    let nx = s.i.abs_diff(t.i) as usize;
    if nx == 0 || nx == moves.len() {
        return Ok(walk(s, &moves));
    }
    let cx = (g.width() as f64 + 1.0) / 2.0;
    let cy = (g.height() as f64 + 1.0) / 2.0;
    let dist2 = |v: Vertex| (v.i as f64 - cx).powi(2) + (v.j as f64 - cy).powi(2);
    // x-first turns at (t.i, s.j), y-first at (s.i, t.j)
    let x_first_far = dist2(Vertex::new(t.i, s.j)) >= dist2(Vertex::new(s.i, t.j));
    let want_far = match mode {
        TurnMode::Far => true,
        TurnMode::Near => false,
        TurnMode::Mixed(ratio) => rng.gen_bool(ratio.clamp(0.0, 1.0)),
    };
    let x_first = want_far == x_first_far;
    let ny = moves.len() - nx;
    let ordered: Vec<(i64, i64)> = if x_first {
        std::iter::repeat_n(dx, nx)
            .chain(std::iter::repeat_n(dy, ny))
            .collect()
    } else {
        std::iter::repeat_n(dy, ny)
            .chain(std::iter::repeat_n(dx, nx))
            .collect()
    };
    Ok(walk(s, &ordered))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct OpenNode {
    key: u64,
    g: u32,
    seq: u64,
    state: u32,
}

impl Ord for OpenNode {
    // BinaryHeap is a max-heap: smallest key first, then larger g, then
    // earlier insertion
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .cmp(&self.key)
            .then(self.g.cmp(&other.g))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time horizon at which state-time search saturates.
pub fn state_time_horizon(g: &GridGraph) -> u32 {
    4 * (g.width() + g.height())
}

/// A* from `s` to `t` with `f = g + manhattan + penalty / divisor`.
///
/// Among equal `f`, larger cost-so-far is expanded first, then insertion
/// order (neighbors are generated E, W, N, S).
pub fn astar_path(
    g: &GridGraph,
    s: Vertex,
    t: Vertex,
    penalty: Penalty<'_>,
    divisor: u32,
) -> Result<Path> {
    if !g.is_free(s) {
        return Err(Error::InvalidVertex(s));
    }
    if !g.is_free(t) {
        return Err(Error::InvalidVertex(t));
    }
    let scale = match penalty {
        Penalty::None => 1,
        _ => divisor.max(1) as u64,
    };
    match penalty {
        Penalty::StateTime { map, start_time } => astar_state_time(g, s, t, map, start_time, scale),
        _ => astar_vertex(g, s, t, penalty, scale),
    }
}

fn astar_vertex(
    g: &GridGraph,
    s: Vertex,
    t: Vertex,
    penalty: Penalty<'_>,
    scale: u64,
) -> Result<Path> {
    let cells = g.cell_count();
    let mut best = vec![u32::MAX; cells];
    let mut parent = vec![u32::MAX; cells];
    let mut closed = vec![false; cells];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    let pen = |v: Vertex| match penalty {
        Penalty::Occupancy(o) => o.get(g, v) as u64,
        _ => 0,
    };
    let start = g.index(s);
    best[start] = 0;
    open.push(OpenNode {
        key: scale * manhattan(s, t) as u64 + pen(s),
        g: 0,
        seq,
        state: start as u32,
    });
    let goal = g.index(t);
    while let Some(node) = open.pop() {
        let k = node.state as usize;
        if closed[k] {
            continue;
        }
        closed[k] = true;
        if k == goal {
            let mut out = vec![g.vertex(k)];
            let mut cur = k;
            while parent[cur] != u32::MAX {
                cur = parent[cur] as usize;
                out.push(g.vertex(cur));
            }
            out.reverse();
            return Ok(Path(out));
        }
        let v = g.vertex(k);
        for n in g.free_neighbors(v) {
            let nk = g.index(n);
            let ng = node.g + 1;
            if closed[nk] || ng >= best[nk] {
                continue;
            }
            best[nk] = ng;
            parent[nk] = k as u32;
            seq += 1;
            open.push(OpenNode {
                key: scale * (ng + manhattan(n, t)) as u64 + pen(n),
                g: ng,
                seq,
                state: nk as u32,
            });
        }
    }
    Err(Error::NoPath {
        robot: None,
        from: s,
        to: t,
    })
}

fn astar_state_time(
    g: &GridGraph,
    s: Vertex,
    t: Vertex,
    map: &StateTimeMap,
    start_time: u32,
    scale: u64,
) -> Result<Path> {
    // reachability first so an unreachable goal does not exhaust the
    // time-expanded space
    if g.bfs_distances(s)[g.index(t)] == u32::MAX {
        return Err(Error::NoPath {
            robot: None,
            from: s,
            to: t,
        });
    }
    let horizon = state_time_horizon(g);
    let cells = g.cell_count() as u64;
    let encode = |cell: usize, tt: u32| tt as u64 * cells + cell as u64;
    // state id -> (best g, parent state)
    let mut info: HashMap<u64, (u32, u64)> = HashMap::new();
    let mut closed: std::collections::HashSet<u64> = std::collections::HashSet::new();
    let mut ids: Vec<u64> = Vec::new();
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    let start = encode(g.index(s), 0);
    info.insert(start, (0, u64::MAX));
    let pen0 = map.vertex_count(g, s, start_time) as u64;
    ids.push(start);
    open.push(OpenNode {
        key: scale * manhattan(s, t) as u64 + pen0,
        g: 0,
        seq,
        state: 0,
    });
    let goal_cell = g.index(t);
    while let Some(node) = open.pop() {
        let id = ids[node.state as usize];
        if !closed.insert(id) {
            continue;
        }
        let cell = (id % cells) as usize;
        if cell == goal_cell {
            let mut out = Vec::new();
            let mut cur = id;
            while cur != u64::MAX {
                out.push(g.vertex((cur % cells) as usize));
                cur = info[&cur].1;
            }
            out.reverse();
            return Ok(Path(out));
        }
        let v = g.vertex(cell);
        for n in g.free_neighbors(v) {
            let ng = node.g + 1;
            let tt = ng.min(horizon);
            let nid = encode(g.index(n), tt);
            if closed.contains(&nid) {
                continue;
            }
            if let Some(&(bg, _)) = info.get(&nid) {
                if ng >= bg {
                    continue;
                }
            }
            info.insert(nid, (ng, id));
            let abs_t = start_time + tt;
            let pen = map.vertex_count(g, n, abs_t) as u64 + map.edge_count(g, v, n, abs_t) as u64;
            seq += 1;
            ids.push(nid);
            open.push(OpenNode {
                key: scale * (ng + manhattan(n, t)) as u64 + pen,
                g: ng,
                seq,
                state: (ids.len() - 1) as u32,
            });
        }
    }
    Err(Error::NoPath {
        robot: None,
        from: s,
        to: t,
    })
}

/// Stateful path generator holding the occupancy / state-time maps that
/// later paths are diversified against.
///
/// Occupancy and state-time planning must run on one logical worker: every
/// committed path changes the penalty field seen by the next query.
pub struct PathPlanner<'g> {
    graph: &'g GridGraph,
    kind: HeuristicKind,
    divisor: u32,
    occupancy: OccupancyMap,
    state_time: StateTimeMap,
    rng: ChaCha8Rng,
}

impl<'g> PathPlanner<'g> {
    /// `divisor` is the penalty divisor, normally the robot count.
    pub fn new(graph: &'g GridGraph, kind: HeuristicKind, divisor: u32, seed: u64) -> Self {
        PathPlanner {
            graph,
            kind,
            divisor: divisor.max(1),
            occupancy: OccupancyMap::new(graph),
            state_time: StateTimeMap::new(),
            rng: seeded_rng(seed, 3),
        }
    }

    pub fn kind(&self) -> HeuristicKind {
        self.kind
    }

    pub fn occupancy(&self) -> &OccupancyMap {
        &self.occupancy
    }

    pub fn state_time(&self) -> &StateTimeMap {
        &self.state_time
    }

    /// Plans a path that would start at absolute time `start_time`; does not
    /// update the maps.
    pub fn plan(&mut self, s: Vertex, t: Vertex, start_time: u32) -> Result<Path> {
        let g = self.graph;
        let monotone_ok = g.rect_is_free(s, t);
        match self.kind {
            HeuristicKind::Random if monotone_ok => random_shortest_path(g, s, t, &mut self.rng),
            kind if monotone_ok && kind.turn_mode().is_some() => {
                single_turn_path(g, s, t, kind.turn_mode().unwrap(), &mut self.rng)
            }
            HeuristicKind::Occupancy => {
                astar_path(g, s, t, Penalty::Occupancy(&self.occupancy), self.divisor)
            }
            HeuristicKind::StateTime => astar_path(
                g,
                s,
                t,
                Penalty::StateTime {
                    map: &self.state_time,
                    start_time,
                },
                self.divisor,
            ),
            _ => astar_path(g, s, t, Penalty::None, 1),
        }
    }

    /// Adds a path to the penalty maps.
    pub fn commit(&mut self, path: &[Vertex], start_time: u32) {
        match self.kind {
            HeuristicKind::Occupancy => self.occupancy.add_path(self.graph, path),
            HeuristicKind::StateTime => self.state_time.add_path(self.graph, path, start_time),
            _ => {}
        }
    }

    /// Undoes a previous [`PathPlanner::commit`] with the same arguments.
    pub fn retract(&mut self, path: &[Vertex], start_time: u32) {
        match self.kind {
            HeuristicKind::Occupancy => self.occupancy.remove_path(self.graph, path),
            HeuristicKind::StateTime => self.state_time.remove_path(self.graph, path, start_time),
            _ => {}
        }
    }
}

/// Order in which initial paths are generated: descending Manhattan distance
/// (ties by index) for the map-based heuristics, index order otherwise.
pub fn planning_order(sc: &Scenario, kind: HeuristicKind) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sc.len()).collect();
    if kind.is_sequential() {
        order.sort_by_key(|&r| (std::cmp::Reverse(manhattan(sc.starts[r], sc.goals[r])), r));
    }
    order
}

/// One initial path per robot, ignoring robot-robot interaction.
///
/// `divisor` overrides the occupancy/state-time penalty divisor (default: n).
pub fn generate_initial_paths(
    g: &GridGraph,
    sc: &Scenario,
    kind: HeuristicKind,
    divisor: Option<u32>,
) -> Result<Vec<Path>> {
    let mut planner = PathPlanner::new(g, kind, divisor.unwrap_or(sc.len() as u32), sc.seed);
    let mut paths = vec![Path::default(); sc.len()];
    for robot in planning_order(sc, kind) {
        let path = planner
            .plan(sc.starts[robot], sc.goals[robot], 0)
            .map_err(|e| match e {
                Error::NoPath { from, to, .. } => Error::NoPath {
                    robot: Some(robot),
                    from,
                    to,
                },
                other => other,
            })?;
        planner.commit(&path, 0);
        paths[robot] = path;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32, j: u32) -> Vertex {
        Vertex::new(i, j)
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan(v(2, 3), v(5, 5)), 5);
        assert_eq!(manhattan(v(4, 4), v(4, 4)), 0);
        assert_eq!(manhattan(v(1, 1), v(1, 9)), 8);
    }

    #[test]
    fn random_path_degenerate_cases() {
        let g = GridGraph::free(5, 5).unwrap();
        let mut rng = seeded_rng(1, 0);
        assert_eq!(
            random_shortest_path(&g, v(2, 2), v(2, 2), &mut rng)
                .unwrap()
                .0,
            vec![v(2, 2)]
        );
        assert_eq!(
            random_shortest_path(&g, v(1, 1), v(3, 1), &mut rng)
                .unwrap()
                .0,
            vec![v(1, 1), v(2, 1), v(3, 1)]
        );
        let blocked = GridGraph::new(3, 3, [v(2, 2)]).unwrap();
        assert!(matches!(
            random_shortest_path(&blocked, v(1, 1), v(3, 3), &mut rng),
            Err(Error::NotApplicable { .. })
        ));
    }

    #[test]
    fn single_turn_far_picks_farther_corner() {
        let g = GridGraph::free(48, 27).unwrap();
        let mut rng = seeded_rng(1, 0);
        let p = single_turn_path(&g, v(1, 1), v(10, 10), TurnMode::Far, &mut rng).unwrap();
        // center (24.5, 14): (10,1) is at d^2 = 210.25 + 169, (1,10) at 552.25 + 16
        let far = if 14.5f64.powi(2) + 13f64.powi(2) > 23.5f64.powi(2) + 4f64.powi(2) {
            v(10, 1)
        } else {
            v(1, 10)
        };
        assert_eq!(far, v(1, 10));
        assert_eq!(p[9], far);
        let p = single_turn_path(&g, v(1, 1), v(10, 10), TurnMode::Near, &mut rng).unwrap();
        assert_eq!(p[9], v(10, 1));
        assert_eq!(p.duration(), 18);
        assert!(p.is_valid(&g));
    }

    #[test]
    fn single_turn_axis_aligned_is_straight() {
        let g = GridGraph::free(10, 10).unwrap();
        let mut rng = seeded_rng(1, 0);
        for mode in [TurnMode::Far, TurnMode::Near, TurnMode::Mixed(0.5)] {
            let p = single_turn_path(&g, v(3, 2), v(3, 8), mode, &mut rng).unwrap();
            assert!(p.iter().all(|w| w.i == 3));
            assert_eq!(p.duration(), 6);
        }
    }

    #[test]
    fn astar_manhattan_is_shortest_on_free_grid() {
        let g = GridGraph::free(12, 9).unwrap();
        let p = astar_path(&g, v(2, 8), v(11, 1), Penalty::None, 1).unwrap();
        assert_eq!(p.duration(), 16);
        assert!(p.is_valid(&g));
        assert_eq!((p.start(), p.goal()), (Some(v(2, 8)), Some(v(11, 1))));
    }

    #[test]
    fn astar_unreachable() {
        let g = GridGraph::new(3, 3, [v(2, 1), v(2, 2), v(2, 3)]).unwrap();
        assert!(matches!(
            astar_path(&g, v(1, 1), v(3, 3), Penalty::None, 1),
            Err(Error::NoPath { .. })
        ));
        let st = StateTimeMap::new();
        assert!(matches!(
            astar_path(
                &g,
                v(1, 1),
                v(3, 3),
                Penalty::StateTime {
                    map: &st,
                    start_time: 0
                },
                2
            ),
            Err(Error::NoPath { .. })
        ));
    }

    #[test]
    fn empty_occupancy_matches_manhattan() {
        let g = GridGraph::new(10, 10, [v(4, 4), v(5, 4), v(6, 6), v(3, 8)]).unwrap();
        let o = OccupancyMap::new(&g);
        let st = StateTimeMap::new();
        for (s, t) in [(v(1, 1), v(10, 10)), (v(9, 2), v(2, 9)), (v(5, 5), v(5, 1))] {
            let base = astar_path(&g, s, t, Penalty::None, 1).unwrap();
            assert_eq!(
                astar_path(&g, s, t, Penalty::Occupancy(&o), 7).unwrap(),
                base
            );
            assert_eq!(
                astar_path(
                    &g,
                    s,
                    t,
                    Penalty::StateTime {
                        map: &st,
                        start_time: 0
                    },
                    7
                )
                .unwrap(),
                base
            );
        }
    }

    #[test]
    fn occupancy_avoids_used_corridor() {
        // two parallel corridors (rows 1 and 3) separated by a wall on row 2
        let wall: Vec<Vertex> = (2..=6).map(|i| v(i, 2)).collect();
        let g = GridGraph::new(7, 3, wall).unwrap();
        let first = astar_path(&g, v(1, 2), v(7, 2), Penalty::None, 1).unwrap();
        let mut o = OccupancyMap::new(&g);
        o.add_path(&g, &first);
        let second = astar_path(&g, v(1, 2), v(7, 2), Penalty::Occupancy(&o), 2).unwrap();
        assert_eq!(second.duration(), first.duration());
        let used_row = first[2].j;
        assert!(second[1..second.len() - 1].iter().all(|w| w.j != used_row));
    }

    #[test]
    fn state_time_is_deterministic_and_valid() {
        let g = GridGraph::new(8, 8, [v(3, 3), v(4, 3), v(5, 5)]).unwrap();
        let mut st = StateTimeMap::new();
        let p = astar_path(&g, v(1, 1), v(8, 8), Penalty::None, 1).unwrap();
        st.add_path(&g, &p, 0);
        let a = astar_path(
            &g,
            v(1, 1),
            v(8, 8),
            Penalty::StateTime {
                map: &st,
                start_time: 0,
            },
            1,
        )
        .unwrap();
        let b = astar_path(
            &g,
            v(1, 1),
            v(8, 8),
            Penalty::StateTime {
                map: &st,
                start_time: 0,
            },
            1,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.is_valid(&g));
        st.remove_path(&g, &p, 0);
        assert!(st.is_empty());
    }

    #[test]
    fn parse_heuristics() {
        for kind in HeuristicKind::ALL {
            assert_eq!(kind.to_string().parse::<HeuristicKind>().unwrap(), kind);
        }
        assert_eq!(
            "turn-mixed=0.3".parse::<HeuristicKind>().unwrap(),
            HeuristicKind::SingleTurnMixed(0.3)
        );
        assert!("turn-mixed=1.5".parse::<HeuristicKind>().is_err());
        assert!("astar".parse::<HeuristicKind>().is_err());
    }

    #[test]
    fn initial_paths_single_robot_and_occupancy_mass() {
        let g = GridGraph::free(10, 10).unwrap();
        let sc = Scenario::new(&g, vec![v(1, 1)], vec![v(6, 4)], 0).unwrap();
        for kind in HeuristicKind::ALL {
            let paths = generate_initial_paths(&g, &sc, kind, None).unwrap();
            assert_eq!(paths[0].duration(), 8, "{kind}");
        }

        let g = GridGraph::new(12, 12, [v(5, 5), v(5, 6), v(6, 5), v(6, 6)]).unwrap();
        let sc = crate::grid::random_scenario(&g, 20, 4).unwrap();
        let paths = generate_initial_paths(&g, &sc, HeuristicKind::Occupancy, None).unwrap();
        let mut o = OccupancyMap::new(&g);
        for p in &paths {
            assert!(p.is_valid(&g));
            o.add_path(&g, p);
        }
        let expected: u64 = paths.iter().map(|p| p.len() as u64).sum();
        assert_eq!(o.total(), expected);
    }

    #[test]
    fn planning_order_descending_distance() {
        let g = GridGraph::free(10, 10).unwrap();
        let sc = Scenario::new(
            &g,
            vec![v(1, 1), v(2, 2), v(3, 3)],
            vec![v(2, 1), v(9, 9), v(3, 6)],
            0,
        )
        .unwrap();
        assert_eq!(planning_order(&sc, HeuristicKind::Occupancy), vec![1, 2, 0]);
        assert_eq!(planning_order(&sc, HeuristicKind::Random), vec![0, 1, 2]);
    }
}
