//! Grid graphs, low-resolution expansion, map generators and map/scenario files.
//!
//! Vertices use 1-based `(i, j)` coordinates internally (`i` is the column,
//! `j` the row). Every file format written by this module is 0-based.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with a `u64`, so a
//! given seed produces the same maps and scenarios on every platform.

use std::collections::VecDeque;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A grid cell, 1-based: `1 <= i <= width`, `1 <= j <= height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub i: u32,
    pub j: u32,
}

impl Vertex {
    pub const fn new(i: u32, j: u32) -> Self {
        Vertex { i, j }
    }

    pub fn is_adjacent(self, other: Vertex) -> bool {
        self.i.abs_diff(other.i) + self.j.abs_diff(other.j) == 1
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// Neighbor offsets in the fixed order E, W, N, S.
pub const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Ordered tuple of robot positions; index = robot id.
pub type Configuration = Vec<Vertex>;

/// Seeded portable generator used everywhere randomness is needed.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rectangular 4-connected grid with static obstacles.
#[derive(Clone, PartialEq, Eq)]
pub struct GridGraph {
    width: u32,
    height: u32,
    blocked: Vec<bool>,
    // (width + 1) x (height + 1) inclusive prefix sums of obstacle counts
    prefix: Vec<u32>,
    free_count: usize,
}

impl fmt::Debug for GridGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "GridGraph {}x{}", self.width, self.height)?;
        for j in (1..=self.height).rev() {
            for i in 1..=self.width {
                let c = if self.is_free(Vertex::new(i, j)) {
                    '.'
                } else {
                    '@'
                };
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl GridGraph {
    pub fn new(
        width: u32,
        height: u32,
        obstacles: impl IntoIterator<Item = Vertex>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        let mut blocked = vec![false; width as usize * height as usize];
        for v in obstacles {
            if v.i == 0 || v.j == 0 || v.i > width || v.j > height {
                return Err(Error::InvalidVertex(v));
            }
            blocked[(v.j - 1) as usize * width as usize + (v.i - 1) as usize] = true;
        }
        Ok(Self::from_blocked(width, height, blocked))
    }

    /// Obstacle-free `width x height` grid.
    pub fn free(width: u32, height: u32) -> Result<Self> {
        Self::new(width, height, std::iter::empty())
    }

    fn from_blocked(width: u32, height: u32, blocked: Vec<bool>) -> Self {
        let (w, h) = (width as usize, height as usize);
        let mut prefix = vec![0u32; (w + 1) * (h + 1)];
        for j in 1..=h {
            for i in 1..=w {
                let b = blocked[(j - 1) * w + (i - 1)] as u32;
                prefix[j * (w + 1) + i] =
                    b + prefix[(j - 1) * (w + 1) + i] + prefix[j * (w + 1) + i - 1]
                        - prefix[(j - 1) * (w + 1) + i - 1];
            }
        }
        let free_count = blocked.iter().filter(|b| !**b).count();
        GridGraph {
            width,
            height,
            blocked,
            prefix,
            free_count,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Number of cells in the bounding rectangle (free or not).
    pub fn cell_count(&self) -> usize {
        self.blocked.len()
    }

    /// |V|
    pub fn free_count(&self) -> usize {
        self.free_count
    }

    pub fn in_bounds(&self, v: Vertex) -> bool {
        v.i >= 1 && v.j >= 1 && v.i <= self.width && v.j <= self.height
    }

    pub fn is_free(&self, v: Vertex) -> bool {
        self.in_bounds(v) && !self.blocked[self.index(v)]
    }

    /// Row-major cell index of an in-bounds vertex.
    #[inline]
    pub fn index(&self, v: Vertex) -> usize {
        (v.j - 1) as usize * self.width as usize + (v.i - 1) as usize
    }

    #[inline]
    pub fn vertex(&self, index: usize) -> Vertex {
        let w = self.width as usize;
        Vertex::new((index % w) as u32 + 1, (index / w) as u32 + 1)
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.blocked.len())
            .filter(|&k| !self.blocked[k])
            .map(|k| self.vertex(k))
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.blocked.len())
            .filter(|&k| self.blocked[k])
            .map(|k| self.vertex(k))
    }

    pub fn obstacle_count(&self) -> usize {
        self.blocked.len() - self.free_count
    }

    /// 4-way neighbors of `v` in V, ordered E, W, N, S.
    pub fn neighbors(&self, v: Vertex) -> Result<Vec<Vertex>> {
        if !self.is_free(v) {
            return Err(Error::InvalidVertex(v));
        }
        Ok(self.free_neighbors(v).collect())
    }

    /// Unchecked variant of [`GridGraph::neighbors`] for hot loops.
    #[inline]
    pub fn free_neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        DIRECTIONS.iter().filter_map(move |&(di, dj)| {
            let i = v.i as i64 + di;
            let j = v.j as i64 + dj;
            if i < 1 || j < 1 || i > self.width as i64 || j > self.height as i64 {
                return None;
            }
            let n = Vertex::new(i as u32, j as u32);
            (!self.blocked[self.index(n)]).then_some(n)
        })
    }

    /// Number of obstacles inside the inclusive rectangle `[lo, hi]`.
    /// Cells outside the grid count as obstacles.
    pub fn obstacles_in_rect(&self, lo: Vertex, hi: Vertex) -> usize {
        let (i0, i1) = (lo.i.min(hi.i), lo.i.max(hi.i));
        let (j0, j1) = (lo.j.min(hi.j), lo.j.max(hi.j));
        let outside = (i1 - i0 + 1) as usize * (j1 - j0 + 1) as usize;
        if i0 < 1 || j0 < 1 || i1 > self.width || j1 > self.height {
            return outside;
        }
        let w = self.width as usize + 1;
        let p = |i: u32, j: u32| self.prefix[j as usize * w + i as usize] as i64;
        (p(i1, j1) - p(i0 - 1, j1) - p(i1, j0 - 1) + p(i0 - 1, j0 - 1)) as usize
    }

    pub fn rect_is_free(&self, lo: Vertex, hi: Vertex) -> bool {
        self.obstacles_in_rect(lo, hi) == 0
    }

    /// BFS distances from `source` indexed by cell; `u32::MAX` marks unreachable cells.
    pub fn bfs_distances(&self, source: Vertex) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.blocked.len()];
        if !self.is_free(source) {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[self.index(source)] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let d = dist[self.index(v)];
            for n in self.free_neighbors(v) {
                let k = self.index(n);
                if dist[k] == u32::MAX {
                    dist[k] = d + 1;
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Connected-component label per cell (`u32::MAX` for obstacles).
    pub fn components(&self) -> Vec<u32> {
        let mut label = vec![u32::MAX; self.blocked.len()];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.blocked.len() {
            if self.blocked[start] || label[start] != u32::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(self.vertex(start));
            while let Some(v) = queue.pop_front() {
                for n in self.free_neighbors(v) {
                    let k = self.index(n);
                    if label[k] == u32::MAX {
                        label[k] = next;
                        queue.push_back(n);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == u32::MAX || c == 0)
    }

    /// Expand every cell into a `k x k` block of the same kind.
    pub fn expand_low_resolution(&self, k: u32) -> Result<GridGraph> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "low-resolution factor must be >= 2, got {k}"
            )));
        }
        let (w, h) = (self.width * k, self.height * k);
        let mut blocked = vec![false; w as usize * h as usize];
        for j in 1..=h {
            for i in 1..=w {
                let base = Vertex::new((i - 1) / k + 1, (j - 1) / k + 1);
                blocked[(j - 1) as usize * w as usize + (i - 1) as usize] =
                    self.blocked[self.index(base)];
            }
        }
        Ok(Self::from_blocked(w, h, blocked))
    }

    /// Inverse of [`GridGraph::expand_low_resolution`] by majority vote per block.
    /// Ties count as obstacles.
    pub fn contract_low_resolution(&self, k: u32) -> Result<GridGraph> {
        if k < 2 || !self.width.is_multiple_of(k) || !self.height.is_multiple_of(k) {
            return Err(Error::InvalidParameter(format!(
                "cannot contract {}x{} grid by factor {k}",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width / k, self.height / k);
        let mut blocked = vec![false; w as usize * h as usize];
        for bj in 0..h {
            for bi in 0..w {
                let lo = Vertex::new(bi * k + 1, bj * k + 1);
                let hi = Vertex::new(bi * k + k, bj * k + k);
                let obstacles = self.obstacles_in_rect(lo, hi) as u32;
                blocked[(bj * w + bi) as usize] = 2 * obstacles >= k * k;
            }
        }
        Ok(Self::from_blocked(w, h, blocked))
    }
}

/// Warehouse layout: a `rows x cols` lattice of `block_w x block_h` obstacle
/// blocks separated by aisles, surrounded by a free border one cell wider
/// than the aisle on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarehouseLayout {
    pub rows: u32,
    pub cols: u32,
    pub block_w: u32,
    pub block_h: u32,
    /// Gap between horizontally adjacent blocks.
    pub aisle_x: u32,
    /// Gap between vertically adjacent blocks.
    pub aisle_y: u32,
}

impl WarehouseLayout {
    /// 69 x 36 workspace with 8 x 8 blocks of 5 x 2 obstacles.
    pub const STANDARD: WarehouseLayout = WarehouseLayout {
        rows: 8,
        cols: 8,
        block_w: 5,
        block_h: 2,
        aisle_x: 3,
        aisle_y: 2,
    };

    pub fn dimensions(&self) -> (u32, u32) {
        let w = self.cols * self.block_w + (self.cols - 1) * self.aisle_x + 2 * (self.aisle_x + 1);
        let h = self.rows * self.block_h + (self.rows - 1) * self.aisle_y + 2 * (self.aisle_y + 1);
        (w, h)
    }

    pub fn generate(&self) -> Result<GridGraph> {
        let params = [
            self.rows,
            self.cols,
            self.block_w,
            self.block_h,
            self.aisle_x,
            self.aisle_y,
        ];
        if params.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "warehouse parameters must be positive: {self:?}"
            )));
        }
        let (w, h) = self.dimensions();
        let mut obstacles = Vec::new();
        for r in 0..self.rows {
            let j0 = self.aisle_y + 1 + r * (self.block_h + self.aisle_y) + 1;
            for c in 0..self.cols {
                let i0 = self.aisle_x + 1 + c * (self.block_w + self.aisle_x) + 1;
                for dj in 0..self.block_h {
                    for di in 0..self.block_w {
                        obstacles.push(Vertex::new(i0 + di, j0 + dj));
                    }
                }
            }
        }
        GridGraph::new(w, h, obstacles)
    }
}

/// Warehouse grid with the same aisle width on both axes.
pub fn generate_warehouse(
    rows: u32,
    cols: u32,
    block_w: u32,
    block_h: u32,
    aisle: u32,
) -> Result<GridGraph> {
    WarehouseLayout {
        rows,
        cols,
        block_w,
        block_h,
        aisle_x: aisle,
        aisle_y: aisle,
    }
    .generate()
}

/// Random low-resolution grid: a `base_w x base_h` grid with
/// `round(fraction * base_w * base_h)` obstacle cells placed uniformly at
/// random (resampled until the free space is connected), expanded by `k`.
pub fn random_low_resolution(
    base_w: u32,
    base_h: u32,
    k: u32,
    fraction: f64,
    seed: u64,
) -> Result<GridGraph> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "obstacle fraction must be in [0, 1), got {fraction}"
        )));
    }
    let base = GridGraph::free(base_w, base_h)?;
    let count = (fraction * base.cell_count() as f64).round() as usize;
    let mut rng = seeded_rng(seed, 1);
    let cells: Vec<Vertex> = base.vertices().collect();
    for _ in 0..10_000 {
        let picked: Vec<Vertex> = cells.choose_multiple(&mut rng, count).copied().collect();
        let g = GridGraph::new(base_w, base_h, picked)?;
        if g.is_connected() {
            return g.expand_low_resolution(k);
        }
    }
    Err(Error::InvalidParameter(format!(
        "could not generate a connected {base_w}x{base_h} grid with {count} obstacles"
    )))
}

/// Start and goal configurations for `n` robots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub starts: Configuration,
    pub goals: Configuration,
    pub seed: u64,
}

impl Scenario {
    /// Validates vertex membership, distinctness and start/goal connectivity.
    pub fn new(
        g: &GridGraph,
        starts: Configuration,
        goals: Configuration,
        seed: u64,
    ) -> Result<Self> {
        if starts.len() != goals.len() {
            return Err(Error::InvalidParameter(format!(
                "{} starts but {} goals",
                starts.len(),
                goals.len()
            )));
        }
        for config in [&starts, &goals] {
            let mut seen = vec![false; g.cell_count()];
            for &v in config {
                if !g.is_free(v) {
                    return Err(Error::InvalidVertex(v));
                }
                let k = g.index(v);
                if seen[k] {
                    return Err(Error::InvalidParameter(format!("vertex {v} used twice")));
                }
                seen[k] = true;
            }
        }
        let comp = g.components();
        for (robot, (&s, &t)) in starts.iter().zip(&goals).enumerate() {
            if comp[g.index(s)] != comp[g.index(t)] {
                return Err(Error::Disconnected {
                    robot,
                    start: s,
                    goal: t,
                });
            }
        }
        Ok(Scenario {
            starts,
            goals,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }
}

/// Starts and goals each drawn uniformly without replacement from V.
pub fn random_scenario(g: &GridGraph, n: usize, seed: u64) -> Result<Scenario> {
    if n > g.free_count() {
        return Err(Error::Capacity {
            requested: n,
            available: g.free_count(),
        });
    }
    let mut rng = seeded_rng(seed, 2);
    let mut cells: Vec<Vertex> = g.vertices().collect();
    let starts = cells.partial_shuffle(&mut rng, n).0.to_vec();
    let goals = cells.partial_shuffle(&mut rng, n).0.to_vec();
    Scenario::new(g, starts, goals, seed)
}

/// Uniform random free vertex.
pub fn random_vertex<R: Rng>(g: &GridGraph, rng: &mut R) -> Vertex {
    loop {
        let k = rng.gen_range(0..g.cell_count());
        if !g.blocked[k] {
            return g.vertex(k);
        }
    }
}

// ---------------------------------------------------------------------------
// File formats

/// Map text: `width height`, then `height` rows of `.`/`@`, first row is j = 1.
pub fn format_map(g: &GridGraph) -> String {
    let mut out = format!("{} {}\n", g.width, g.height);
    for j in 1..=g.height {
        for i in 1..=g.width {
            out.push(if g.is_free(Vertex::new(i, j)) {
                '.'
            } else {
                '@'
            });
        }
        out.push('\n');
    }
    out
}

pub fn parse_map(text: &str, origin: &Path) -> Result<GridGraph> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "empty map file"))?;
    let dims: Vec<u32> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(origin, 1, format!("bad header: {e}")))?;
    let [width, height] = dims[..] else {
        return Err(Error::parse(origin, 1, "header must be `width height`"));
    };
    let mut obstacles = Vec::new();
    let mut rows = 0;
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() && rows == height {
            continue;
        }
        rows += 1;
        if rows > height {
            return Err(Error::parse(
                origin,
                idx + 1,
                "more rows than declared height",
            ));
        }
        if line.chars().count() != width as usize {
            return Err(Error::parse(
                origin,
                idx + 1,
                format!("row has {} cells, expected {width}", line.chars().count()),
            ));
        }
        for (c, ch) in line.chars().enumerate() {
            match ch {
                '.' => {}
                '@' => obstacles.push(Vertex::new(c as u32 + 1, rows)),
                other => {
                    return Err(Error::parse(
                        origin,
                        idx + 1,
                        format!("unexpected character {other:?}"),
                    ))
                }
            }
        }
    }
    if rows != height {
        return Err(Error::parse(
            origin,
            rows as usize + 2,
            format!("found {rows} rows, expected {height}"),
        ));
    }
    GridGraph::new(width, height, obstacles)
}

pub fn load_map(path: impl AsRef<Path>) -> Result<GridGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_map(&text, path)
}

pub fn save_map(g: &GridGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_map(g)).map_err(|e| Error::io(path, e))
}

/// Scenario text: `n seed`, then `n` lines `si sj gi gj` (0-based).
pub fn format_scenario(sc: &Scenario) -> String {
    let mut out = format!("{} {}\n", sc.len(), sc.seed);
    for (s, t) in sc.starts.iter().zip(&sc.goals) {
        out.push_str(&format!(
            "{} {} {} {}\n",
            s.i - 1,
            s.j - 1,
            t.i - 1,
            t.j - 1
        ));
    }
    out
}

pub fn parse_scenario(g: &GridGraph, text: &str, origin: &Path) -> Result<Scenario> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "empty scenario file"))?;
    let fields: Vec<u64> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(origin, 1, format!("bad header: {e}")))?;
    let [n, seed] = fields[..] else {
        return Err(Error::parse(origin, 1, "header must be `n seed`"));
    };
    let mut starts = Vec::with_capacity(n as usize);
    let mut goals = Vec::with_capacity(n as usize);
    for (idx, line) in lines {
        let nums: Vec<u32> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(origin, idx + 1, format!("bad robot line: {e}")))?;
        let [si, sj, gi, gj] = nums[..] else {
            return Err(Error::parse(
                origin,
                idx + 1,
                "robot line must be `si sj gi gj`",
            ));
        };
        starts.push(Vertex::new(si + 1, sj + 1));
        goals.push(Vertex::new(gi + 1, gj + 1));
    }
    if starts.len() != n as usize {
        return Err(Error::parse(
            origin,
            starts.len() + 2,
            format!("expected {n} robots, found {}", starts.len()),
        ));
    }
    Scenario::new(g, starts, goals, seed)
}

pub fn load_scenario(g: &GridGraph, path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(g, &text, path)
}

pub fn save_scenario(sc: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_scenario(sc)).map_err(|e| Error::io(path, e))
}
