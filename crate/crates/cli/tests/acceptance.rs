//! Acceptance suite: one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL` line (straight to stderr, so it survives output
//! capture) before asserting.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use ddm::bench::{
    lower_bound, occupancy_heatmap, run_experiment, ExperimentSpec, MapSource, Mode, ResultRow,
};
use ddm::engine::{solve, validate_solution, DatabaseSet, EngineConfig, ShapePref};
use ddm::grid::{random_low_resolution, random_scenario, seeded_rng, GridGraph};
use ddm::heuristics::HeuristicKind;
use ddm::subdb::{
    apply_group_action, random_instance, transport, BuildOptions, GroupAction, Shape, SmallConfig,
    SmallSolution, SolutionDatabase,
};
use rand::Rng;

fn verdict(id: u32, title: &str, ok: bool, detail: &str) {
    let line = format!(
        "criterion {id}: {} | {title} | {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    std::io::stderr().lock().write_all(line.as_bytes()).unwrap();
    assert!(ok, "criterion {id} failed: {detail}");
}

struct Stores {
    two: SolutionDatabase,
    three: SolutionDatabase,
    build_secs: (f64, f64),
}

/// Both stores, built once, written to disk and read back.
fn stores() -> &'static Stores {
    static STORES: OnceLock<Stores> = OnceLock::new();
    STORES.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let t = std::time::Instant::now();
        let two = SolutionDatabase::build(Shape::TwoByThree, &BuildOptions::full(6)).unwrap();
        let two_secs = t.elapsed().as_secs_f64();
        let t = std::time::Instant::now();
        let three = SolutionDatabase::build(Shape::ThreeByThree, &BuildOptions::full(5)).unwrap();
        let three_secs = t.elapsed().as_secs_f64();
        let (p2, p3) = (dir.path().join("2x3.bin"), dir.path().join("3x3.bin"));
        two.save(&p2).unwrap();
        three.save(&p3).unwrap();
        drop((two, three));
        Stores {
            two: SolutionDatabase::load(&p2, false).unwrap(),
            three: SolutionDatabase::load(&p3, true).unwrap(),
            build_secs: (two_secs, three_secs),
        }
    })
}

fn engine_dbs() -> &'static DatabaseSet {
    static DBS: OnceLock<DatabaseSet> = OnceLock::new();
    DBS.get_or_init(|| DatabaseSet::two_by_three().unwrap())
}

/// Cells of a three-column grid, ids row-major from the bottom-left.
fn grid_adjacent(a: u8, b: u8) -> bool {
    (a % 3).abs_diff(b % 3) + (a / 3).abs_diff(b / 3) == 1
}

/// Plain breadth-first search over labelled joint states.
fn brute_force_makespan(rows: u8, start: &[u8], goal: &[u8]) -> usize {
    let n = start.len();
    let cells = 3 * rows;
    let encode = |s: &[u8]| s.iter().fold(0u32, |acc, &c| acc << 4 | c as u32);
    let mut dist = vec![u8::MAX; 1 << (4 * n)];
    let target = encode(goal);
    dist[encode(start) as usize] = 0;
    let mut queue = VecDeque::from([start.to_vec()]);
    let mut next = Vec::with_capacity(n);
    while let Some(s) = queue.pop_front() {
        let d = dist[encode(&s) as usize];
        if encode(&s) == target {
            return d as usize;
        }
        let mut stack = vec![(0usize, Vec::<u8>::new())];
        while let Some((k, partial)) = stack.pop() {
            if k == n {
                let swap = (0..n).any(|a| {
                    (0..n)
                        .any(|b| a != b && partial[a] == s[b] && partial[b] == s[a] && s[a] != s[b])
                });
                let code = encode(&partial) as usize;
                if !swap && dist[code] == u8::MAX {
                    dist[code] = d + 1;
                    queue.push_back(partial);
                }
                continue;
            }
            for c in 0..cells {
                if (c == s[k] || grid_adjacent(c, s[k])) && !partial.contains(&c) {
                    next.clone_from(&partial);
                    next.push(c);
                    stack.push((k + 1, next.clone()));
                }
            }
        }
    }
    panic!("unreachable goal");
}

/// Every step keeps robots on distinct in-range cells, moves at most one
/// edge, and no pair swaps.
fn independently_valid(rows: u8, sol: &SmallSolution) -> bool {
    let cells = 3 * rows;
    sol.steps.windows(2).all(|w| {
        let (a, b) = (w[0].as_slice(), w[1].as_slice());
        let distinct = b.iter().collect::<HashSet<_>>().len() == b.len();
        let moves = a
            .iter()
            .zip(b)
            .all(|(&x, &y)| y < cells && (x == y || grid_adjacent(x, y)));
        let swaps = (0..a.len())
            .any(|i| (0..a.len()).any(|j| i != j && a[i] != b[i] && b[i] == a[j] && b[j] == a[i]));
        distinct && moves && !swaps
    })
}

#[test]
fn criterion_1_database_optimality() {
    let s = stores();
    let mut rng = seeded_rng(2024, 0);
    let mut mismatches = 0;
    for (db, rows, count, max_n) in [(&s.two, 2u8, 1000, 6usize), (&s.three, 3, 300, 5)] {
        for _ in 0..count {
            let n = rng.gen_range(1..=max_n);
            let (xi, xg) = random_instance(db.shape(), n, &mut rng);
            let sol = db.lookup(&xi, &xg).unwrap();
            let ok = independently_valid(rows, &sol)
                && sol.start() == xi
                && sol.end() == xg
                && sol.makespan() == brute_force_makespan(rows, xi.as_slice(), xg.as_slice());
            mismatches += usize::from(!ok);
        }
    }
    verdict(
        1,
        "database optimality",
        mismatches == 0 && s.build_secs.0 < 60.0 && s.build_secs.1 < 900.0,
        &format!(
            "{mismatches} of 1300 lookups differ from joint BFS; builds {:.1}s (2x3), {:.1}s (3x3 n<=5)",
            s.build_secs.0, s.build_secs.1
        ),
    );
}

#[test]
fn criterion_2_golden_lookup() {
    let sol = stores()
        .three
        .lookup(
            &SmallConfig::new(&[0, 6, 5]).unwrap(),
            &SmallConfig::new(&[2, 8, 3]).unwrap(),
        )
        .unwrap();
    let steps: Vec<Vec<u8>> = sol.steps.iter().map(|c| c.as_slice().to_vec()).collect();
    let ok = steps == [vec![0, 6, 5], vec![1, 7, 4], vec![2, 8, 3]] && sol.makespan() == 2;
    let shown: Vec<String> = sol.steps.iter().map(|c| c.sorted().to_string()).collect();
    verdict(
        2,
        "golden 3x3 lookup",
        ok,
        &format!("{} (makespan {})", shown.join(" -> "), sol.makespan()),
    );
}

#[test]
fn criterion_3_symmetry_suite() {
    let db = &stores().three;
    let mut rng = seeded_rng(77, 0);
    let mut bad = 0;
    let mut checks = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=5);
        let (xi, xg) = random_instance(Shape::ThreeByThree, n, &mut rng);
        let sol = db.lookup(&xi, &xg).unwrap();
        let mut variants: Vec<(SmallSolution, SmallConfig, SmallConfig)> = GroupAction::all()
            .into_iter()
            .map(|a| {
                let s = transport(Shape::ThreeByThree, a, &sol).unwrap();
                let ai = apply_group_action(a, &xi, Shape::ThreeByThree).unwrap();
                let ag = apply_group_action(a, &xg, Shape::ThreeByThree).unwrap();
                (s, ai, ag)
            })
            .collect();
        variants.push((sol.reversed(), xg, xi));
        for (s, from, to) in variants {
            checks += 1;
            let optimal = db.lookup(&from, &to).unwrap().makespan();
            let ok = independently_valid(3, &s)
                && s.start() == from
                && s.end() == to
                && s.makespan() == optimal;
            bad += usize::from(!ok);
        }
    }
    verdict(
        3,
        "symmetry transport",
        bad == 0,
        &format!("{bad} of {checks} transported solutions invalid or not makespan-preserving"),
    );
}

#[test]
fn criterion_4_soundness() {
    let free = GridGraph::free(24, 18).unwrap();
    let warehouse = MapSource::Warehouse.build(0).unwrap();
    let mut runs = 0;
    let mut failures = Vec::new();
    for seed in 0..30u64 {
        let lowres = random_low_resolution(30, 30, 2, 0.1, seed).unwrap();
        let cases: [(&str, &GridGraph, &[usize]); 3] = [
            ("24x18", &free, &[20, 60, 100]),
            ("warehouse", &warehouse, &[50, 150]),
            ("60x60", &lowres, &[100, 200]),
        ];
        for (name, g, counts) in cases {
            for &n in counts {
                let sc = random_scenario(g, n, seed).unwrap();
                for h in HeuristicKind::ALL {
                    runs += 1;
                    match solve(g, &sc, h, engine_dbs(), &EngineConfig::default()) {
                        Ok(sol) => {
                            let v = validate_solution(g, &sc.starts, &sc.goals, &sol.paths);
                            if !v.is_empty() {
                                failures.push(format!("{name} n={n} {h} seed {seed}: {}", v[0]));
                            }
                        }
                        Err(e) => failures.push(format!("{name} n={n} {h} seed {seed}: {e}")),
                    }
                }
            }
        }
    }
    let detail = match failures.first() {
        None => format!("{runs} runs, all heuristics, no stall, no collision"),
        Some(f) => format!("{} of {runs} runs failed, first: {f}", failures.len()),
    };
    verdict(4, "soundness", failures.is_empty(), &detail);
}

fn ratio(row: &ResultRow) -> f64 {
    row.makespan_mean / row.lower_bound_mean.unwrap()
}

#[test]
fn criterion_5_optimality_ratio() {
    let mut spec = ExperimentSpec::new(
        MapSource::Free {
            width: 24,
            height: 18,
        },
        (1..=10).map(|k| 10 * k).collect(),
        HeuristicKind::ALL.to_vec(),
    );
    spec.seed_base = 5;
    let rows = run_experiment(&spec, engine_dbs()).unwrap();
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    let worst = rows
        .iter()
        .max_by(|a, b| ratio(a).total_cmp(&ratio(b)))
        .unwrap();
    let at = |h: HeuristicKind| {
        ratio(
            rows.iter()
                .find(|r| r.robots == 100 && r.heuristic == h.to_string())
                .unwrap(),
        )
    };
    let (occ, rnd) = (at(HeuristicKind::Occupancy), at(HeuristicKind::Random));
    let ok = failures == 0 && ratio(worst) <= 1.8 && occ <= rnd;
    verdict(
        5,
        "optimality ratio",
        ok,
        &format!(
            "worst {:.3} ({} n={}); n=100 occupancy {occ:.3} vs random {rnd:.3}; {failures} failed trials",
            ratio(worst),
            worst.heuristic,
            worst.robots
        ),
    );
}

#[test]
fn criterion_6_speed() {
    let mut spec = ExperimentSpec::new(
        "lowres:60x60:k2:0.1".parse().unwrap(),
        vec![200],
        vec![HeuristicKind::Occupancy],
    );
    spec.seed_base = 6;
    let dbs = engine_dbs();
    // one worker, so wall times are not inflated by sharing cores
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let rows = pool.install(|| run_experiment(&spec, dbs)).unwrap();
    let row = &rows[0];
    let ok = row.failures == 0 && row.wall_ms_mean < 1000.0;
    verdict(
        6,
        "solve speed",
        ok,
        &format!(
            "mean wall {:.1} ms (std {:.1}) over {} trials, {} failures",
            row.wall_ms_mean, row.wall_ms_std, row.trials, row.failures
        ),
    );
}

#[test]
fn criterion_7_heatmaps() {
    let g = GridGraph::free(48, 27).unwrap();
    let center = |h| occupancy_heatmap(&g, 100_000, h, 7).unwrap().center_mean();
    let random = center(HeuristicKind::Random);
    let far = center(HeuristicKind::SingleTurnFar);
    let mixed = center(HeuristicKind::SingleTurnMixed(0.85));
    let ok = random > far && far < mixed && mixed < random;
    verdict(
        7,
        "heatmap ordering",
        ok,
        &format!("center means: random {random:.1}, mixed {mixed:.1}, far {far:.1}"),
    );
}

#[test]
fn criterion_8_lifelong_trend() {
    let mut spec = ExperimentSpec::new(
        "lowres:30x30:k2:0.1".parse().unwrap(),
        vec![50, 150, 300, 450],
        vec![HeuristicKind::Occupancy],
    );
    spec.trials = 5;
    spec.seed_base = 8;
    spec.mode = Mode::Dmp { total_goals: 1000 };
    let rows = run_experiment(&spec, engine_dbs()).unwrap();
    let steps: HashMap<usize, f64> = rows.iter().map(|r| (r.robots, r.makespan_mean)).collect();
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    let ok = failures == 0 && steps[&150] < steps[&50] && steps[&450] > steps[&300];
    verdict(
        8,
        "lifelong trend",
        ok,
        &format!(
            "mean elapsed steps n=50 {:.1}, n=150 {:.1}, n=300 {:.1}, n=450 {:.1}; {failures} failed runs",
            steps[&50], steps[&150], steps[&300], steps[&450]
        ),
    );
}

fn run(bin: &str, dir: &Path, args: &[&str]) {
    let out = Command::new(bin)
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{bin} {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_9_determinism() {
    let ddm = env!("CARGO_BIN_EXE_ddm");
    let subdb = env!("CARGO_BIN_EXE_subdb");
    let commands: Vec<(&str, Vec<&str>)> = vec![
        (
            subdb,
            vec![
                "build",
                "--shape",
                "2x3",
                "--db",
                "db.bin",
                "--out",
                "build.json",
            ],
        ),
        (
            subdb,
            vec![
                "verify",
                "--db",
                "db.bin",
                "--samples",
                "200",
                "--seed",
                "3",
                "--out",
                "verify.csv",
                "--format",
                "csv",
            ],
        ),
        (
            ddm,
            vec![
                "solve",
                "--map",
                "warehouse",
                "--robots",
                "120",
                "--seed",
                "4",
                "--heuristic",
                "state-time",
                "--db",
                "db.bin",
                "--out",
                "solve.json",
                "--trace",
                "solve.trace",
            ],
        ),
        (
            ddm,
            vec![
                "solve",
                "--map",
                "lowres:60x60:k2:0.1",
                "--robots",
                "150",
                "--seed",
                "5",
                "--heuristic",
                "random",
                "--format",
                "csv",
                "--out",
                "solve.csv",
                "--trace",
                "lowres.trace",
            ],
        ),
        (
            ddm,
            vec![
                "dmp",
                "--map",
                "lowres:30x30:k2:0.1",
                "--robots",
                "100",
                "--goals",
                "400",
                "--seed",
                "6",
                "--out",
                "dmp.json",
                "--trace",
                "dmp.trace",
                "--arrivals",
                "arrivals.csv",
            ],
        ),
        (
            ddm,
            vec![
                "bench",
                "--robots",
                "20,60",
                "--heuristics",
                "all",
                "--trials",
                "3",
                "--seed",
                "7",
                "--out",
                "bench.csv",
                "--format",
                "csv",
            ],
        ),
        (
            ddm,
            vec![
                "bench",
                "--mode",
                "dmp",
                "--goals",
                "60",
                "--robots",
                "20",
                "--heuristics",
                "manhattan",
                "--trials",
                "2",
                "--out",
                "bench.json",
            ],
        ),
        (
            ddm,
            vec![
                "heatmap",
                "--pairs",
                "5000",
                "--heuristic",
                "turn-mixed",
                "--seed",
                "8",
                "--out",
                "heat.csv",
            ],
        ),
        (
            ddm,
            vec![
                "scenario", "--robots", "30", "--seed", "9", "--out", "sc.txt",
            ],
        ),
        (
            ddm,
            vec![
                "solve",
                "--scenario",
                "sc.txt",
                "--shape",
                "3x3",
                "--out",
                "sc.json",
                "--trace",
                "sc.trace",
            ],
        ),
    ];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        for (bin, args) in &commands {
            run(bin, dir.path(), args);
        }
    }
    let (a, b) = (snapshot(dirs[0].path()), snapshot(dirs[1].path()));
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let ok = a.len() == b.len() && a.len() >= 15 && differing.is_empty();
    verdict(
        9,
        "determinism",
        ok,
        &format!(
            "{} commands run twice, {} output files compared, differing: {differing:?}",
            commands.len(),
            a.len()
        ),
    );
}

#[test]
fn lower_bound_matches_independent_bfs() {
    let g = MapSource::Warehouse.build(0).unwrap();
    let sc = random_scenario(&g, 50, 12).unwrap();
    let bfs = |s: ddm::Vertex, t: ddm::Vertex| {
        let mut seen = HashSet::from([s]);
        let mut queue = VecDeque::from([(s, 0usize)]);
        while let Some((v, d)) = queue.pop_front() {
            if v == t {
                return d;
            }
            for u in g.free_neighbors(v) {
                if seen.insert(u) {
                    queue.push_back((u, d + 1));
                }
            }
        }
        unreachable!()
    };
    let expected = sc
        .starts
        .iter()
        .zip(&sc.goals)
        .map(|(&s, &t)| bfs(s, t))
        .max()
        .unwrap();
    assert_eq!(lower_bound(&g, &sc).unwrap(), expected);
}

#[test]
fn three_by_three_preference_is_sound() {
    let s = stores();
    let dbs = DatabaseSet::new(
        Some(SolutionDatabase::build(Shape::TwoByThree, &BuildOptions::full(6)).unwrap()),
        Some(SolutionDatabase::build(Shape::ThreeByThree, &BuildOptions::lazy()).unwrap()),
    )
    .unwrap();
    assert!(s.three.covers(9));
    let g = GridGraph::free(24, 18).unwrap();
    for seed in 0..5 {
        let sc = random_scenario(&g, 60, seed).unwrap();
        let sol = solve(
            &g,
            &sc,
            HeuristicKind::Occupancy,
            &dbs,
            &EngineConfig::with_shape(ShapePref::ThreeByThree),
        )
        .unwrap();
        assert!(validate_solution(&g, &sc.starts, &sc.goals, &sol.paths).is_empty());
    }
}
