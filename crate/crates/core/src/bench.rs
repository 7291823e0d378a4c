//! Experiment matrix runner, lower bounds, traversal heatmaps and the
//! result file formats.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmp::run_dmp;
use crate::engine::{
    replay_violations, solve, validate_solution, DatabaseSet, EngineConfig, ShapePref, Solution,
};
use crate::error::{Error, Result};
use crate::grid::{
    load_map, random_low_resolution, random_vertex, seeded_rng, GridGraph, Scenario, Vertex,
    WarehouseLayout,
};
use crate::heuristics::{HeuristicKind, PathPlanner};

pub const CSV_SCHEMA: &str = "# ddm-bench results v1";

/// Max over robots of the BFS distance from start to goal.
pub fn lower_bound(g: &GridGraph, sc: &Scenario) -> Result<usize> {
    let mut best = 0;
    for (r, (&s, &t)) in sc.starts.iter().zip(&sc.goals).enumerate() {
        let d = g.bfs_distances(s)[g.index(t)];
        if d == u32::MAX {
            return Err(Error::Disconnected {
                robot: r,
                start: s,
                goal: t,
            });
        }
        best = best.max(d as usize);
    }
    Ok(best)
}

/// Where an experiment's graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MapSource {
    Free {
        width: u32,
        height: u32,
    },
    Warehouse,
    /// Random obstacles on a `width/k x height/k` grid, expanded by `k`.
    LowResolution {
        width: u32,
        height: u32,
        k: u32,
        fraction: f64,
    },
    File(PathBuf),
}

impl MapSource {
    /// Random low-resolution maps are drawn per `seed`; the others ignore it.
    pub fn build(&self, seed: u64) -> Result<GridGraph> {
        match self {
            MapSource::Free { width, height } => GridGraph::free(*width, *height),
            MapSource::Warehouse => WarehouseLayout::STANDARD.generate(),
            MapSource::LowResolution {
                width,
                height,
                k,
                fraction,
            } => random_low_resolution(width / k, height / k, *k, *fraction, seed),
            MapSource::File(path) => load_map(path),
        }
    }

    pub fn is_seeded(&self) -> bool {
        matches!(self, MapSource::LowResolution { .. })
    }
}

fn parse_dims(s: &str) -> Option<(u32, u32)> {
    let (w, h) = s.split_once('x')?;
    Some((w.parse().ok()?, h.parse().ok()?))
}

impl FromStr for MapSource {
    type Err = Error;

    /// `free:WxH`, `warehouse`, `lowres:WxH:kK:FRACTION`, or a map file path.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad map source {s:?}"));
        if s == "warehouse" {
            return Ok(MapSource::Warehouse);
        }
        if let Some(rest) = s.strip_prefix("free:") {
            let (width, height) = parse_dims(rest).ok_or_else(bad)?;
            return Ok(MapSource::Free { width, height });
        }
        if let Some(rest) = s.strip_prefix("lowres:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let [dims, k, fraction] = parts[..] else {
                return Err(bad());
            };
            let (width, height) = parse_dims(dims).ok_or_else(bad)?;
            let k: u32 = k
                .strip_prefix('k')
                .and_then(|k| k.parse().ok())
                .ok_or_else(bad)?;
            let fraction: f64 = fraction.parse().map_err(|_| bad())?;
            if k < 2 || width % k != 0 || height % k != 0 {
                return Err(Error::InvalidParameter(format!(
                    "{width}x{height} is not a multiple of k={k}"
                )));
            }
            return Ok(MapSource::LowResolution {
                width,
                height,
                k,
                fraction,
            });
        }
        Ok(MapSource::File(PathBuf::from(s)))
    }
}

impl fmt::Display for MapSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapSource::Free { width, height } => write!(f, "free:{width}x{height}"),
            MapSource::Warehouse => write!(f, "warehouse"),
            MapSource::LowResolution {
                width,
                height,
                k,
                fraction,
            } => write!(f, "lowres:{width}x{height}:k{k}:{fraction}"),
            MapSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    OneShot,
    Dmp { total_goals: usize },
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::OneShot => write!(f, "one-shot"),
            Mode::Dmp { .. } => write!(f, "dmp"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub map: MapSource,
    pub robots: Vec<usize>,
    pub heuristics: Vec<HeuristicKind>,
    pub shapes: Vec<ShapePref>,
    pub trials: usize,
    pub seed_base: u64,
    pub mode: Mode,
}

impl ExperimentSpec {
    pub fn new(map: MapSource, robots: Vec<usize>, heuristics: Vec<HeuristicKind>) -> Self {
        ExperimentSpec {
            map,
            robots,
            heuristics,
            shapes: vec![ShapePref::TwoByThree],
            trials: 30,
            seed_base: 0,
            mode: Mode::OneShot,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial, stable across platforms and releases.
pub fn trial_seed(base: u64, cell: &str, trial: usize) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in cell.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01B3);
    }
    splitmix(splitmix(base ^ h) ^ trial as u64)
}

/// Aggregate over the trials of one matrix cell. Means and deviations cover
/// successful trials only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub map: String,
    pub mode: String,
    pub robots: usize,
    pub heuristic: String,
    pub shape: String,
    pub trials: usize,
    pub failures: usize,
    /// Makespan for one-shot runs, elapsed steps for lifelong runs.
    pub makespan_mean: f64,
    pub makespan_std: f64,
    pub lower_bound_mean: Option<f64>,
    pub ratio_mean: Option<f64>,
    pub throughput_mean: Option<f64>,
    pub wall_ms_mean: f64,
    pub wall_ms_std: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl ResultRow {
    pub fn successes(&self) -> usize {
        self.trials - self.failures
    }
}

#[derive(Debug, Clone)]
struct Trial {
    makespan: usize,
    lower_bound: Option<usize>,
    throughput: Option<f64>,
    wall_ms: f64,
}

fn run_trial(
    spec: &ExperimentSpec,
    dbs: &DatabaseSet,
    n: usize,
    h: HeuristicKind,
    shape: ShapePref,
    seed: u64,
) -> Result<Trial> {
    let g = spec.map.build(seed)?;
    let config = EngineConfig::with_shape(shape);
    match spec.mode {
        Mode::OneShot => {
            let sc = crate::grid::random_scenario(&g, n, seed)?;
            let lb = lower_bound(&g, &sc)?;
            let sol = solve(&g, &sc, h, dbs, &config)?;
            if let Some(v) = validate_solution(&g, &sc.starts, &sc.goals, &sol.paths).first() {
                return Err(Error::InvalidParameter(format!("replay check failed: {v}")));
            }
            Ok(Trial {
                makespan: sol.makespan,
                lower_bound: Some(lb),
                throughput: None,
                wall_ms: sol.wall_ms,
            })
        }
        Mode::Dmp { total_goals } => {
            let run = run_dmp(&g, n, h, dbs, &config, total_goals, seed)?;
            if let Some(v) = replay_violations(&g, &run.trajectories).first() {
                return Err(Error::InvalidParameter(format!("replay check failed: {v}")));
            }
            Ok(Trial {
                makespan: run.record.elapsed_steps,
                lower_bound: None,
                throughput: Some(run.record.throughput),
                wall_ms: run.wall_ms,
            })
        }
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Runs every (robots, heuristic, shape) cell; trials run in parallel.
/// Trial `t` of every cell with the same robot count solves the same
/// instance. A failed trial is counted, never dropped silently.
pub fn run_experiment(spec: &ExperimentSpec, dbs: &DatabaseSet) -> Result<Vec<ResultRow>> {
    if spec.trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial is required".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n in &spec.robots {
        for &h in &spec.heuristics {
            for &shape in &spec.shapes {
                let cell = format!("{}|{}|{n}", spec.map, spec.mode);
                let results: Vec<Result<Trial>> = (0..spec.trials)
                    .into_par_iter()
                    .map(|t| {
                        run_trial(spec, dbs, n, h, shape, trial_seed(spec.seed_base, &cell, t))
                    })
                    .collect();
                let mut ok = Vec::new();
                let mut errors = Vec::new();
                for (t, r) in results.into_iter().enumerate() {
                    match r {
                        Ok(trial) => ok.push(trial),
                        Err(e) => errors.push(format!("trial {t}: {e}")),
                    }
                }
                let (makespan_mean, makespan_std) =
                    mean_std(&ok.iter().map(|t| t.makespan as f64).collect::<Vec<_>>());
                let (wall_ms_mean, wall_ms_std) =
                    mean_std(&ok.iter().map(|t| t.wall_ms).collect::<Vec<_>>());
                let lbs: Vec<f64> = ok
                    .iter()
                    .filter_map(|t| t.lower_bound)
                    .map(|x| x as f64)
                    .collect();
                let ratios: Vec<f64> = ok
                    .iter()
                    .filter_map(|t| t.lower_bound.map(|lb| t.makespan as f64 / lb.max(1) as f64))
                    .collect();
                let throughputs: Vec<f64> = ok.iter().filter_map(|t| t.throughput).collect();
                let opt_mean = |xs: &[f64]| (!xs.is_empty()).then(|| mean_std(xs).0);
                rows.push(ResultRow {
                    map: spec.map.to_string(),
                    mode: spec.mode.to_string(),
                    robots: n,
                    heuristic: h.to_string(),
                    shape: shape.to_string(),
                    trials: spec.trials,
                    failures: errors.len(),
                    makespan_mean,
                    makespan_std,
                    lower_bound_mean: opt_mean(&lbs),
                    ratio_mean: opt_mean(&ratios),
                    throughput_mean: opt_mean(&throughputs),
                    wall_ms_mean,
                    wall_ms_std,
                    errors,
                });
            }
        }
    }
    Ok(rows)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_default()
}

/// CSV with a schema comment line. Without `timing` the wall-time columns
/// are left empty so repeated runs produce identical bytes.
pub fn rows_to_csv(rows: &[ResultRow], timing: bool) -> String {
    let mut out = format!("{CSV_SCHEMA}\n");
    out.push_str(
        "map,mode,robots,heuristic,shape,trials,failures,makespan_mean,makespan_std,\
         lower_bound_mean,ratio_mean,throughput_mean,wall_ms_mean,wall_ms_std\n",
    );
    for r in rows {
        let (wm, ws) = if timing {
            (
                format!("{:.3}", r.wall_ms_mean),
                format!("{:.3}", r.wall_ms_std),
            )
        } else {
            (String::new(), String::new())
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.4},{:.4},{},{},{},{wm},{ws}",
            r.map,
            r.mode,
            r.robots,
            r.heuristic,
            r.shape,
            r.trials,
            r.failures,
            r.makespan_mean,
            r.makespan_std,
            opt(r.lower_bound_mean),
            opt(r.ratio_mean),
            opt(r.throughput_mean),
        )
        .unwrap();
    }
    out
}

/// JSON array of rows; wall times are nulled without `timing`.
pub fn rows_to_json(rows: &[ResultRow], timing: bool) -> String {
    let values: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).expect("rows serialize");
            if !timing {
                v["wall_ms_mean"] = serde_json::Value::Null;
                v["wall_ms_std"] = serde_json::Value::Null;
            }
            v
        })
        .collect();
    serde_json::to_string_pretty(&values).expect("rows serialize") + "\n"
}

/// Summary of one solved instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub makespan: usize,
    pub lower_bound: usize,
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
    pub conflicts: usize,
    pub windows: usize,
    pub postpones: usize,
    pub skips: usize,
    pub seed: u64,
}

impl RunStats {
    pub fn new(sol: &Solution, lower_bound: usize, seed: u64, timing: bool) -> Self {
        RunStats {
            makespan: sol.makespan,
            lower_bound,
            ratio: if lower_bound == 0 {
                1.0
            } else {
                sol.makespan as f64 / lower_bound as f64
            },
            wall_ms: timing.then_some(sol.wall_ms),
            conflicts: sol.stats.conflicts,
            windows: sol.stats.windows,
            postpones: sol.stats.postpones,
            skips: sol.stats.skips,
            seed,
        }
    }
}

/// Per-vertex traversal counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heatmap {
    pub width: u32,
    pub height: u32,
    /// Indexed like [`GridGraph::index`].
    pub counts: Vec<u64>,
}

impl Heatmap {
    pub fn get(&self, v: Vertex) -> u64 {
        self.counts[((v.j - 1) * self.width + (v.i - 1)) as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mean count over the central 8x8 block.
    pub fn center_mean(&self) -> f64 {
        let (i0, j0) = (
            self.width.saturating_sub(8) / 2 + 1,
            self.height.saturating_sub(8) / 2 + 1,
        );
        let mut sum = 0u64;
        let mut cells = 0u64;
        for j in j0..(j0 + 8).min(self.height + 1) {
            for i in i0..(i0 + 8).min(self.width + 1) {
                sum += self.get(Vertex::new(i, j));
                cells += 1;
            }
        }
        sum as f64 / cells.max(1) as f64
    }

    /// Mean count over the outermost ring of cells.
    pub fn border_mean(&self) -> f64 {
        let mut sum = 0u64;
        let mut cells = 0u64;
        for j in 1..=self.height {
            for i in 1..=self.width {
                if i == 1 || j == 1 || i == self.width || j == self.height {
                    sum += self.get(Vertex::new(i, j));
                    cells += 1;
                }
            }
        }
        sum as f64 / cells.max(1) as f64
    }

    /// One CSV line per grid row, `j = 1` first.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.counts.chunks(self.width as usize) {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Plans `pairs` random start/goal pairs with `h` and counts how often each
/// vertex appears on the resulting paths.
pub fn occupancy_heatmap(
    g: &GridGraph,
    pairs: usize,
    h: HeuristicKind,
    seed: u64,
) -> Result<Heatmap> {
    let mut planner = PathPlanner::new(g, h, pairs.max(1) as u32, seed);
    let mut rng = seeded_rng(seed, 8);
    let mut counts = vec![0u64; g.cell_count()];
    for _ in 0..pairs {
        let s = random_vertex(g, &mut rng);
        let t = random_vertex(g, &mut rng);
        let path = planner.plan(s, t, 0)?;
        planner.commit(&path, 0);
        for &v in path.iter() {
            counts[g.index(v)] += 1;
        }
    }
    Ok(Heatmap {
        width: g.width(),
        height: g.height(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::random_scenario;
    use std::sync::OnceLock;

    fn dbs() -> &'static DatabaseSet {
        static DBS: OnceLock<DatabaseSet> = OnceLock::new();
        DBS.get_or_init(|| DatabaseSet::two_by_three().unwrap())
    }

    #[test]
    fn lower_bound_examples() {
        let g = GridGraph::free(6, 6).unwrap();
        let sc = Scenario::new(&g, vec![Vertex::new(1, 1)], vec![Vertex::new(4, 3)], 0).unwrap();
        assert_eq!(lower_bound(&g, &sc).unwrap(), 5);
        let sc = random_scenario(&g, 5, 1).unwrap();
        let parked = Scenario::new(&g, sc.starts.clone(), sc.starts.clone(), 0).unwrap();
        assert_eq!(lower_bound(&g, &parked).unwrap(), 0);
    }

    #[test]
    fn map_sources_parse_and_print() {
        for s in [
            "free:24x18",
            "warehouse",
            "lowres:60x60:k2:0.1",
            "maps/a.map",
        ] {
            let m: MapSource = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert!("lowres:61x60:k2:0.1".parse::<MapSource>().is_err());
        assert!("free:24".parse::<MapSource>().is_err());
        let g = "lowres:60x60:k2:0.1"
            .parse::<MapSource>()
            .unwrap()
            .build(3)
            .unwrap();
        assert_eq!((g.width(), g.height()), (60, 60));
        assert_eq!(g.obstacle_count(), 4 * 90);
    }

    #[test]
    fn trial_seeds_are_stable_and_distinct() {
        assert_eq!(trial_seed(7, "a", 0), trial_seed(7, "a", 0));
        assert_ne!(trial_seed(7, "a", 0), trial_seed(7, "a", 1));
        assert_ne!(trial_seed(7, "a", 0), trial_seed(7, "b", 0));
        assert_ne!(trial_seed(7, "a", 0), trial_seed(8, "a", 0));
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let mut spec = ExperimentSpec::new(
            MapSource::Free {
                width: 10,
                height: 8,
            },
            vec![5, 15],
            vec![HeuristicKind::Random, HeuristicKind::Occupancy],
        );
        spec.trials = 4;
        let a = run_experiment(&spec, dbs()).unwrap();
        assert_eq!(a.len(), 4);
        for row in &a {
            assert_eq!(row.failures, 0);
            assert!(row.ratio_mean.unwrap() >= 1.0);
        }
        let b = run_experiment(&spec, dbs()).unwrap();
        assert_eq!(rows_to_csv(&a, false), rows_to_csv(&b, false));
        assert_eq!(rows_to_json(&a, false), rows_to_json(&b, false));
        assert!(rows_to_csv(&a, false).starts_with(CSV_SCHEMA));
    }

    #[test]
    fn lifelong_rows_report_throughput() {
        let mut spec = ExperimentSpec::new(
            MapSource::Free {
                width: 10,
                height: 8,
            },
            vec![10],
            vec![HeuristicKind::Manhattan],
        );
        spec.trials = 2;
        spec.mode = Mode::Dmp { total_goals: 40 };
        let rows = run_experiment(&spec, dbs()).unwrap();
        assert_eq!(rows[0].failures, 0);
        assert!(rows[0].throughput_mean.unwrap() > 0.0);
        assert!(rows[0].ratio_mean.is_none());
    }

    #[test]
    fn heatmap_totals_match_path_lengths() {
        let g = GridGraph::free(12, 9).unwrap();
        let empty = occupancy_heatmap(&g, 0, HeuristicKind::Random, 1).unwrap();
        assert_eq!(empty.total(), 0);
        let mut rng = seeded_rng(5, 8);
        let mut expected = 0u64;
        for _ in 0..200 {
            let s = random_vertex(&g, &mut rng);
            let t = random_vertex(&g, &mut rng);
            expected += crate::heuristics::manhattan(s, t) as u64 + 1;
        }
        let hm = occupancy_heatmap(&g, 200, HeuristicKind::Random, 5).unwrap();
        assert_eq!(hm.total(), expected);
        assert_eq!(hm.to_csv().lines().count(), 9);
    }
}
