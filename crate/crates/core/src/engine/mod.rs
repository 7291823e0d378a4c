//! Simulated execution of planned paths with conflict resolution.
//!
//! Every step the engine looks one move ahead. Colliding pairs are handled
//! in priority order (longest remaining plan first, then lowest index): of
//! the free windows around both robots whose instance the database stores,
//! the one with the shortest solution is reserved, and every robot inside it
//! is rerouted along that solution to per-robot temporary goals. Robots
//! outside windows then advance, except those that would enter a reserved
//! cell or still collide, which wait in place.

pub mod trace;
pub mod window;

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{seeded_rng, GridGraph, Scenario, Vertex};
use crate::heuristics::{astar_path, generate_initial_paths, HeuristicKind, Path, Penalty};
use crate::subdb::{BuildOptions, Shape, SmallConfig, SmallSolution, SolutionDatabase};

pub use trace::{
    format_trace, load_trace, parse_trace, replay_violations, save_trace, validate_solution,
    Violation,
};
pub use window::{
    candidate_windows, find_window, ShapePref, SubGraphWindow, WindowOutcome, WindowShape,
};

/// The databases available to the engine, one per shape.
#[derive(Debug, Default)]
pub struct DatabaseSet {
    two_by_three: Option<SolutionDatabase>,
    three_by_three: Option<SolutionDatabase>,
}

impl DatabaseSet {
    pub fn new(
        two_by_three: Option<SolutionDatabase>,
        three_by_three: Option<SolutionDatabase>,
    ) -> Result<Self> {
        for (db, shape) in [
            (&two_by_three, Shape::TwoByThree),
            (&three_by_three, Shape::ThreeByThree),
        ] {
            if let Some(db) = db {
                if db.shape() != shape {
                    return Err(Error::InvalidParameter(format!(
                        "expected a {shape} database, got {}",
                        db.shape()
                    )));
                }
            }
        }
        Ok(DatabaseSet {
            two_by_three,
            three_by_three,
        })
    }

    /// Full 2x3 store, built in memory.
    pub fn two_by_three() -> Result<Self> {
        DatabaseSet::new(
            Some(SolutionDatabase::build(
                Shape::TwoByThree,
                &BuildOptions::full(6),
            )?),
            None,
        )
    }

    pub fn get(&self, shape: Shape) -> Option<&SolutionDatabase> {
        match shape {
            Shape::TwoByThree => self.two_by_three.as_ref(),
            Shape::ThreeByThree => self.three_by_three.as_ref(),
        }
    }

    fn check(&self, pref: ShapePref) -> Result<()> {
        for shape in pref.shapes() {
            let db = self.get(shape.database_shape()).ok_or_else(|| {
                Error::InvalidParameter(format!("no {} database loaded", shape.database_shape()))
            })?;
            let cells = shape.database_shape().cells();
            if !(1..=cells).all(|n| db.covers(n)) {
                return Err(Error::NotCovered {
                    robots: cells,
                    nmax: db.nmax(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConflictKind {
    Vertex,
    EdgeSwap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub kind: ConflictKind,
    /// Lower index first.
    pub robots: (usize, usize),
    /// Contested vertex, or the edge as traversed by the first robot.
    pub from: Vertex,
    pub to: Vertex,
    pub time: usize,
}

/// Pairs that would share a vertex or swap along an edge when moving from
/// `current` to `next`.
pub fn detect_conflicts(current: &[Vertex], next: &[Vertex], time: usize) -> Vec<ConflictReport> {
    let mut out = Vec::new();
    let mut by_target: HashMap<Vertex, Vec<usize>> = HashMap::new();
    for (r, &v) in next.iter().enumerate() {
        by_target.entry(v).or_default().push(r);
    }
    let mut groups: Vec<&Vec<usize>> = by_target.values().filter(|g| g.len() > 1).collect();
    groups.sort_by_key(|g| g[0]);
    for group in groups {
        for (x, &a) in group.iter().enumerate() {
            for &b in &group[x + 1..] {
                out.push(ConflictReport {
                    kind: ConflictKind::Vertex,
                    robots: (a, b),
                    from: next[a],
                    to: next[a],
                    time,
                });
            }
        }
    }
    let at: HashMap<Vertex, usize> = current.iter().enumerate().map(|(r, &v)| (v, r)).collect();
    for r in 0..current.len() {
        if next[r] == current[r] {
            continue;
        }
        if let Some(&o) = at.get(&next[r]) {
            if o > r && next[o] == current[r] {
                out.push(ConflictReport {
                    kind: ConflictKind::EdgeSwap,
                    robots: (r, o),
                    from: current[r],
                    to: next[r],
                    time,
                });
            }
        }
    }
    out
}

/// Orders reports by the priority rank of the more important robot, then
/// of the other. `rank[r] == 0` is the highest priority.
pub fn prioritize(reports: &mut [ConflictReport], rank: &[usize]) {
    reports.sort_by_key(|c| {
        let (a, b) = (rank[c.robots.0], rank[c.robots.1]);
        (a.min(b), a.max(b))
    });
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub shape_pref: ShapePref,
    /// Consecutive steps without any movement before giving up
    /// (default 3(w+h)).
    pub stall_limit: Option<usize>,
    /// Hard cap on one-shot steps (default 20(w+h) + 10n).
    pub max_steps: Option<usize>,
    /// Occupancy/state-time penalty divisor (default n).
    pub divisor: Option<u32>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            shape_pref: ShapePref::TwoByThree,
            stall_limit: None,
            max_steps: None,
            divisor: None,
        }
    }
}

impl EngineConfig {
    pub fn with_shape(shape_pref: ShapePref) -> Self {
        EngineConfig {
            shape_pref,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineStats {
    pub conflicts: usize,
    pub windows: usize,
    pub postpones: usize,
    pub skips: usize,
}

struct WindowPlan {
    window: SubGraphWindow,
    robots: Vec<usize>,
    splice: Vec<Option<usize>>,
    solution: SmallSolution,
}

#[derive(Debug, Clone)]
struct ActiveWindow {
    window: SubGraphWindow,
    robots: Vec<usize>,
    cursor: usize,
    makespan: usize,
}

/// Engine state: current configuration (heads of the planned paths),
/// planned path suffixes, active windows and the clock.
pub struct Engine<'a> {
    graph: &'a GridGraph,
    dbs: &'a DatabaseSet,
    shapes: &'static [WindowShape],
    goals: Vec<Vertex>,
    planned: Vec<VecDeque<Vertex>>,
    windows: Vec<Option<ActiveWindow>>,
    /// Robot -> window slot + 1, or 0.
    in_window: Vec<u32>,
    /// Cell -> window slot + 1, or 0.
    reserved: Vec<u32>,
    /// Cell -> robot + 1, or 0.
    occupant: Vec<u32>,
    clock: usize,
    idle: usize,
    stall_limit: usize,
    rng: ChaCha8Rng,
    stats: EngineStats,
    history: Vec<Vec<Vertex>>,
}

impl<'a> Engine<'a> {
    /// `paths[r]` must run from `starts[r]` to `goals[r]`.
    pub fn new(
        graph: &'a GridGraph,
        dbs: &'a DatabaseSet,
        config: &EngineConfig,
        goals: Vec<Vertex>,
        paths: Vec<Path>,
        seed: u64,
    ) -> Result<Self> {
        dbs.check(config.shape_pref)?;
        if paths.len() != goals.len() {
            return Err(Error::InvalidParameter(format!(
                "{} paths for {} robots",
                paths.len(),
                goals.len()
            )));
        }
        let mut occupant = vec![0u32; graph.cell_count()];
        for (r, p) in paths.iter().enumerate() {
            if p.is_empty() || p.goal() != Some(goals[r]) || !p.is_valid(graph) {
                return Err(Error::InvalidParameter(format!(
                    "path of robot {r} is not a valid plan to its goal"
                )));
            }
            let c = &mut occupant[graph.index(p[0])];
            if *c != 0 {
                return Err(Error::InvalidParameter(format!(
                    "robots {} and {r} share a start",
                    *c - 1
                )));
            }
            *c = r as u32 + 1;
        }
        let history = paths.iter().map(|p| vec![p[0]]).collect();
        Ok(Engine {
            graph,
            dbs,
            shapes: config.shape_pref.shapes(),
            planned: paths.into_iter().map(|p| p.into_inner().into()).collect(),
            windows: Vec::new(),
            in_window: vec![0; goals.len()],
            reserved: vec![0; graph.cell_count()],
            occupant,
            clock: 0,
            idle: 0,
            stall_limit: config
                .stall_limit
                .unwrap_or(3 * (graph.width() + graph.height()) as usize),
            rng: seeded_rng(seed, 5),
            stats: EngineStats::default(),
            history,
            goals,
        })
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn clock(&self) -> usize {
        self.clock
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn position(&self, r: usize) -> Vertex {
        self.planned[r][0]
    }

    pub fn positions(&self) -> Vec<Vertex> {
        self.planned.iter().map(|p| p[0]).collect()
    }

    pub fn goal(&self, r: usize) -> Vertex {
        self.goals[r]
    }

    pub fn goals(&self) -> &[Vertex] {
        &self.goals
    }

    /// Remaining plan of a robot, current position first.
    pub fn planned(&self, r: usize) -> &VecDeque<Vertex> {
        &self.planned[r]
    }

    pub fn active_windows(&self) -> Vec<SubGraphWindow> {
        self.windows.iter().flatten().map(|w| w.window).collect()
    }

    pub fn all_at_goals(&self) -> bool {
        self.planned
            .iter()
            .zip(&self.goals)
            .all(|(p, g)| p[0] == *g)
    }

    /// Executed trajectories so far, one per robot, equal lengths.
    pub fn trajectories(&self) -> Vec<Path> {
        self.history.iter().map(|h| Path(h.clone())).collect()
    }

    fn next_of(&self, r: usize) -> Vertex {
        let p = &self.planned[r];
        if p.len() > 1 {
            p[1]
        } else {
            p[0]
        }
    }

    /// `rank[r]`: position of robot r when ordered by remaining plan length
    /// (descending), then index.
    pub fn priority_ranks(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&r| (std::cmp::Reverse(self.planned[r].len()), r));
        let mut rank = vec![0; self.len()];
        for (k, &r) in order.iter().enumerate() {
            rank[r] = k;
        }
        rank
    }

    /// Where a new plan for `r` may start, and how many steps from now.
    /// Robots inside a window finish its solution first.
    pub fn replan_anchor(&self, r: usize) -> (Vertex, usize) {
        match self.in_window[r] {
            0 => (self.planned[r][0], 0),
            slot => {
                let w = self.windows[slot as usize - 1]
                    .as_ref()
                    .expect("active window");
                let remaining = w.makespan - w.cursor;
                (self.planned[r][remaining], remaining)
            }
        }
    }

    /// Assigns a new goal with a plan starting at [`Engine::replan_anchor`].
    pub fn set_goal(&mut self, r: usize, goal: Vertex, path: &Path) -> Result<()> {
        let (anchor, offset) = self.replan_anchor(r);
        if path.start() != Some(anchor) || path.goal() != Some(goal) || !path.is_valid(self.graph) {
            return Err(Error::InvalidParameter(format!(
                "new plan for robot {r} must run from {anchor} to {goal}"
            )));
        }
        self.planned[r].truncate(offset + 1);
        self.planned[r].extend(path.iter().skip(1));
        self.goals[r] = goal;
        Ok(())
    }

    /// One synchronous timestep; returns robots that reached their goal.
    pub fn step(&mut self) -> Result<Vec<usize>> {
        let n = self.len();
        let current = self.positions();
        let next: Vec<Vertex> = (0..n).map(|r| self.next_of(r)).collect();
        let mut reports = detect_conflicts(&current, &next, self.clock);
        let ranks = self.priority_ranks();
        prioritize(&mut reports, &ranks);
        for report in &reports {
            self.resolve(report, &ranks)?;
        }

        let g = self.graph;
        let mut proposal: Vec<Vertex> = (0..n).map(|r| self.next_of(r)).collect();
        let mut follow: Vec<bool> = self.planned.iter().map(|p| p.len() > 1).collect();
        for r in 0..n {
            if self.in_window[r] == 0
                && proposal[r] != current[r]
                && self.reserved[g.index(proposal[r])] != 0
            {
                proposal[r] = current[r];
                follow[r] = false;
            }
        }
        self.freeze_residual(&current, &mut proposal, &mut follow);

        let mut moved = false;
        for r in 0..n {
            if follow[r] {
                self.planned[r].pop_front();
            }
            debug_assert_eq!(self.planned[r][0], proposal[r]);
            if proposal[r] != current[r] {
                moved = true;
                self.occupant[g.index(current[r])] = 0;
            }
        }
        for r in 0..n {
            self.occupant[g.index(proposal[r])] = r as u32 + 1;
            self.history[r].push(proposal[r]);
        }
        for slot in 0..self.windows.len() {
            let done = match self.windows[slot].as_mut() {
                Some(w) => {
                    w.cursor += 1;
                    w.cursor >= w.makespan
                }
                None => false,
            };
            if done {
                self.retire(slot);
            }
        }
        self.clock += 1;
        self.idle = if moved { 0 } else { self.idle + 1 };
        if self.idle >= self.stall_limit {
            return Err(Error::Stall {
                clock: self.clock,
                reason: format!("no robot moved for {} steps", self.idle),
                dump: self.dump(),
            });
        }
        Ok((0..n)
            .filter(|&r| proposal[r] == self.goals[r] && current[r] != self.goals[r])
            .collect())
    }

    /// Stops robots outside windows that still collide, until none do.
    fn freeze_residual(&self, current: &[Vertex], proposal: &mut [Vertex], follow: &mut [bool]) {
        let g = self.graph;
        let n = proposal.len();
        let mut claim: HashMap<Vertex, usize> = HashMap::with_capacity(n);
        loop {
            let mut stop = Vec::new();
            claim.clear();
            for r in 0..n {
                if let Some(&o) = claim.get(&proposal[r]) {
                    stop.push(o);
                    stop.push(r);
                } else {
                    claim.insert(proposal[r], r);
                }
            }
            for r in 0..n {
                if proposal[r] == current[r] {
                    continue;
                }
                if let Some(o) = (self.occupant[g.index(proposal[r])] as usize).checked_sub(1) {
                    if o != r && proposal[o] == current[r] {
                        stop.push(o);
                        stop.push(r);
                    }
                }
            }
            let mut changed = false;
            for r in stop {
                if self.in_window[r] == 0 && proposal[r] != current[r] {
                    proposal[r] = current[r];
                    follow[r] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn is_moving(&self, r: usize) -> bool {
        self.next_of(r) != self.planned[r][0]
    }

    fn resolve(&mut self, report: &ConflictReport, ranks: &[usize]) -> Result<()> {
        let (a, b) = report.robots;
        if self.in_window[a] != 0 || self.in_window[b] != 0 {
            return Ok(());
        }
        let (ca, cb) = (self.planned[a][0], self.planned[b][0]);
        let (na, nb) = (self.next_of(a), self.next_of(b));
        if na != nb && !(na == cb && nb == ca) {
            return Ok(());
        }
        self.stats.conflicts += 1;
        match candidate_windows(self.graph, ca, cb, &self.reserved, self.shapes) {
            Ok(candidates) => {
                let mut pool: Vec<SubGraphWindow> = Vec::new();
                for &shape in self.shapes {
                    let db = self
                        .dbs
                        .get(shape.database_shape())
                        .expect("database presence checked at construction");
                    pool.extend(
                        candidates
                            .iter()
                            .filter(|w| w.shape == shape && db.stores(self.robots_in(w))),
                    );
                    if !pool.is_empty() {
                        break;
                    }
                }
                if pool.is_empty() {
                    pool.push(candidates[0]);
                }
                let mut best: Option<(WindowPlan, ChaCha8Rng)> = None;
                for w in pool {
                    let mut rng = self.rng.clone();
                    let plan = self.plan_window(w, ranks, &mut rng)?;
                    let m = plan.solution.makespan();
                    if m > 0 && best.as_ref().is_none_or(|(b, _)| m < b.solution.makespan()) {
                        best = Some((plan, rng));
                    }
                }
                match best {
                    Some((plan, rng)) => {
                        self.rng = rng;
                        self.open_window(plan)?;
                    }
                    None => self.postpone(a, b, ranks),
                }
            }
            Err(WindowOutcome::Skip) => self.stats.skips += 1,
            Err(_) => self.postpone(a, b, ranks),
        }
        Ok(())
    }

    /// The lower-priority robot waits one step, or the other one if the
    /// lower-priority robot is not moving.
    fn postpone(&mut self, a: usize, b: usize, ranks: &[usize]) {
        let (hi, lo) = if ranks[a] < ranks[b] { (a, b) } else { (b, a) };
        let waiter = if self.is_moving(lo) { lo } else { hi };
        if self.is_moving(waiter) {
            let here = self.planned[waiter][0];
            self.planned[waiter].insert(1, here);
        }
        self.stats.postpones += 1;
    }

    /// Per robot inside the window (priority order), the temporary goal is
    /// the last vertex of its plan inside the window; a robot whose cell is
    /// already claimed gets a random unclaimed window cell. Returns the
    /// local goal ids and, per robot, the plan index the solution splices
    /// into (None when the goal was drawn at random).
    pub fn assign_temp_goals(
        &mut self,
        window: &SubGraphWindow,
        robots: &[usize],
    ) -> (Vec<u8>, Vec<Option<usize>>) {
        let mut rng = self.rng.clone();
        let out = self.temp_goals(window, robots, &mut rng);
        self.rng = rng;
        out
    }

    fn temp_goals(
        &self,
        window: &SubGraphWindow,
        robots: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> (Vec<u8>, Vec<Option<usize>>) {
        let cells = window.shape.database_shape().cells() as u8;
        let mut used = 0u16;
        let mut goals = Vec::with_capacity(robots.len());
        let mut splice = Vec::with_capacity(robots.len());
        for &r in robots {
            let path = &self.planned[r];
            let k = (0..path.len())
                .rev()
                .find(|&k| window.contains(path[k]))
                .expect("robot inside window");
            let id = window.local_id(path[k]).expect("vertex inside window");
            if used & (1 << id) == 0 {
                used |= 1 << id;
                goals.push(id);
                splice.push(Some(k));
            } else {
                goals.push(u8::MAX);
                splice.push(None);
            }
        }
        for goal in goals.iter_mut().filter(|g| **g == u8::MAX) {
            let free: Vec<u8> = (0..cells).filter(|&c| used & (1 << c) == 0).collect();
            let pick = *free
                .choose(rng)
                .expect("window has room for every robot inside");
            used |= 1 << pick;
            *goal = pick;
        }
        (goals, splice)
    }

    fn robots_in(&self, window: &SubGraphWindow) -> usize {
        window
            .cells()
            .iter()
            .filter(|&&c| self.occupant[self.graph.index(c)] != 0)
            .count()
    }

    fn plan_window(
        &self,
        window: SubGraphWindow,
        ranks: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<WindowPlan> {
        let g = self.graph;
        let mut robots: Vec<usize> = window
            .cells()
            .iter()
            .filter_map(|&c| (self.occupant[g.index(c)] as usize).checked_sub(1))
            .collect();
        robots.sort_by_key(|&r| ranks[r]);
        let (goals, splice) = self.temp_goals(&window, &robots, rng);
        let starts: Vec<u8> = robots
            .iter()
            .map(|&r| {
                window
                    .local_id(self.planned[r][0])
                    .expect("robot inside window")
            })
            .collect();
        let db = self
            .dbs
            .get(window.shape.database_shape())
            .expect("database presence checked at construction");
        let solution = db.lookup(&SmallConfig::new(&starts)?, &SmallConfig::new(&goals)?)?;
        Ok(WindowPlan {
            window,
            robots,
            splice,
            solution,
        })
    }

    fn open_window(&mut self, plan: WindowPlan) -> Result<()> {
        let g = self.graph;
        let WindowPlan {
            window,
            robots,
            splice,
            solution: sol,
        } = plan;
        let slot = match self.windows.iter().position(Option::is_none) {
            Some(s) => s,
            None => {
                self.windows.push(None);
                self.windows.len() - 1
            }
        };
        for (k, &r) in robots.iter().enumerate() {
            let mut path: VecDeque<Vertex> =
                sol.path(k).iter().map(|&id| window.vertex(id)).collect();
            match splice[k] {
                Some(at) => path.extend(self.planned[r].iter().skip(at + 1)),
                None => {
                    let from = *path.back().unwrap();
                    let tail = astar_path(g, from, self.goals[r], Penalty::None, 1).map_err(
                        |e| match e {
                            Error::NoPath { from, to, .. } => Error::NoPath {
                                robot: Some(r),
                                from,
                                to,
                            },
                            other => other,
                        },
                    )?;
                    path.extend(tail.iter().skip(1));
                }
            }
            self.planned[r] = path;
            self.in_window[r] = slot as u32 + 1;
        }
        for c in window.cells() {
            self.reserved[g.index(c)] = slot as u32 + 1;
        }
        self.windows[slot] = Some(ActiveWindow {
            window,
            robots,
            cursor: 0,
            makespan: sol.makespan(),
        });
        self.stats.windows += 1;
        Ok(())
    }

    fn retire(&mut self, slot: usize) {
        if let Some(w) = self.windows[slot].take() {
            for r in w.robots {
                self.in_window[r] = 0;
            }
            for c in w.window.cells() {
                self.reserved[self.graph.index(c)] = 0;
            }
        }
    }

    fn dump(&self) -> String {
        let mut out = String::new();
        let waiting: Vec<usize> = (0..self.len())
            .filter(|&r| self.planned[r][0] != self.goals[r])
            .collect();
        out.push_str(&format!(
            "{} robots away from goal, {} active windows\n",
            waiting.len(),
            self.windows.iter().flatten().count()
        ));
        for &r in waiting.iter().take(20) {
            out.push_str(&format!(
                "  robot {r}: at {} goal {} next {} window {}\n",
                self.planned[r][0],
                self.goals[r],
                self.next_of(r),
                self.in_window[r]
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub paths: Vec<Path>,
    pub makespan: usize,
    pub stats: EngineStats,
    /// Initial planning plus simulation.
    pub wall_ms: f64,
}

pub fn default_max_steps(g: &GridGraph, n: usize) -> usize {
    20 * (g.width() + g.height()) as usize + 10 * n
}

/// Plans initial paths with `heuristic` and simulates until every robot is
/// at its goal.
pub fn solve(
    g: &GridGraph,
    sc: &Scenario,
    heuristic: HeuristicKind,
    dbs: &DatabaseSet,
    config: &EngineConfig,
) -> Result<Solution> {
    let started = Instant::now();
    let paths = generate_initial_paths(g, sc, heuristic, config.divisor)?;
    let mut engine = Engine::new(g, dbs, config, sc.goals.clone(), paths, sc.seed)?;
    let max_steps = config
        .max_steps
        .unwrap_or_else(|| default_max_steps(g, sc.len()));
    while !engine.all_at_goals() {
        if engine.clock() >= max_steps {
            return Err(Error::Stall {
                clock: engine.clock(),
                reason: format!("exceeded the step limit of {max_steps}"),
                dump: engine.dump(),
            });
        }
        engine.step()?;
    }
    Ok(Solution {
        paths: engine.trajectories(),
        makespan: engine.clock(),
        stats: engine.stats(),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
