//! Min-makespan solution databases for obstacle-free 2x3 and 3x3 grids.
//!
//! Cells are numbered row-major from the bottom-left corner:
//!
//! ```text
//! 3x3:  6 7 8     2x3:  3 4 5
//!       3 4 5           0 1 2
//!       0 1 2
//! ```
//!
//! Entries are keyed by the sorted initial configuration and the goal
//! configuration permuted alongside it (`"056 238"`); values list the
//! configuration at every timestep (`"056 147 238"`). Solutions come from a
//! breadth-first search over the joint configuration space. One backward
//! search per unordered goal set serves every labeling of that set, since
//! relabeling robots commutes with the move rules.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, OnceLock, RwLock};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::seeded_rng;

const MAGIC: &[u8; 8] = b"DDMSUBDB";
const VERSION: u32 = 1;
const HEADER_LEN: u64 = 24;
const MISSING: u32 = u32::MAX;
const UNREACHABLE: u8 = u8::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shape {
    /// Three cells wide, two tall.
    TwoByThree,
    ThreeByThree,
}

impl Shape {
    pub const fn width(self) -> u8 {
        3
    }

    pub const fn height(self) -> u8 {
        match self {
            Shape::TwoByThree => 2,
            Shape::ThreeByThree => 3,
        }
    }

    pub const fn cells(self) -> usize {
        (self.width() * self.height()) as usize
    }

    pub fn coords(self, id: u8) -> (u8, u8) {
        (id % 3, id / 3)
    }

    pub fn id(self, x: u8, y: u8) -> u8 {
        y * 3 + x
    }

    /// Neighbors of a cell in E, W, N, S order.
    pub fn neighbors(self, id: u8) -> Vec<u8> {
        let (x, y) = self.coords(id);
        let (w, h) = (self.width() as i8, self.height() as i8);
        [(1i8, 0i8), (-1, 0), (0, 1), (0, -1)]
            .iter()
            .filter_map(|&(dx, dy)| {
                let (nx, ny) = (x as i8 + dx, y as i8 + dy);
                (nx >= 0 && ny >= 0 && nx < w && ny < h).then(|| self.id(nx as u8, ny as u8))
            })
            .collect()
    }

    pub fn is_adjacent(self, a: u8, b: u8) -> bool {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx) + ay.abs_diff(by) == 1
    }

    fn tag(self) -> u8 {
        match self {
            Shape::TwoByThree => 0,
            Shape::ThreeByThree => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Shape> {
        match tag {
            0 => Some(Shape::TwoByThree),
            1 => Some(Shape::ThreeByThree),
            _ => None,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::TwoByThree => write!(f, "2x3"),
            Shape::ThreeByThree => write!(f, "3x3"),
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2x3" | "3x2" => Ok(Shape::TwoByThree),
            "3x3" => Ok(Shape::ThreeByThree),
            other => Err(Error::InvalidParameter(format!("unknown shape {other:?}"))),
        }
    }
}

/// Ordered tuple of distinct cell ids; position k is robot k.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SmallConfig {
    len: u8,
    cells: [u8; 9],
}

impl SmallConfig {
    pub fn new(cells: &[u8]) -> Result<Self> {
        if cells.is_empty() || cells.len() > 9 {
            return Err(Error::InvalidParameter(format!(
                "configuration must hold 1..=9 robots, got {}",
                cells.len()
            )));
        }
        let mut seen = 0u16;
        for &c in cells {
            if c >= 9 || seen & (1 << c) != 0 {
                return Err(Error::InvalidParameter(format!(
                    "invalid configuration {cells:?}"
                )));
            }
            seen |= 1 << c;
        }
        Ok(Self::from_slice_unchecked(cells))
    }

    pub fn for_shape(shape: Shape, cells: &[u8]) -> Result<Self> {
        let c = Self::new(cells)?;
        if cells.iter().any(|&id| id as usize >= shape.cells()) {
            return Err(Error::InvalidParameter(format!(
                "configuration {c} out of range for {shape}"
            )));
        }
        Ok(c)
    }

    fn from_slice_unchecked(cells: &[u8]) -> Self {
        let mut out = SmallConfig {
            len: cells.len() as u8,
            cells: [0; 9],
        };
        out.cells[..cells.len()].copy_from_slice(cells);
        out
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.cells[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mask(&self) -> u16 {
        self.as_slice().iter().fold(0, |m, &c| m | 1 << c)
    }

    pub fn is_sorted(&self) -> bool {
        self.as_slice().windows(2).all(|w| w[0] < w[1])
    }

    pub fn sorted(&self) -> SmallConfig {
        let mut out = *self;
        out.cells[..self.len as usize].sort_unstable();
        out
    }
}

impl fmt::Display for SmallConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &c in self.as_slice() {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SmallConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmallConfig({self})")
    }
}

impl FromStr for SmallConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits: Option<Vec<u8>> = s.chars().map(|c| c.to_digit(10).map(|d| d as u8)).collect();
        let digits = digits
            .ok_or_else(|| Error::InvalidParameter(format!("bad configuration string {s:?}")))?;
        SmallConfig::new(&digits)
    }
}

/// Timestep-by-timestep configurations, first = initial, last = goal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SmallSolution {
    pub steps: Vec<SmallConfig>,
}

impl SmallSolution {
    pub fn new(steps: Vec<SmallConfig>) -> Self {
        SmallSolution { steps }
    }

    pub fn makespan(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn start(&self) -> SmallConfig {
        self.steps[0]
    }

    pub fn end(&self) -> SmallConfig {
        *self.steps.last().expect("solution has at least one step")
    }

    pub fn robots(&self) -> usize {
        self.steps.first().map_or(0, |c| c.len())
    }

    /// Cell sequence of one robot.
    pub fn path(&self, robot: usize) -> Vec<u8> {
        self.steps.iter().map(|c| c.as_slice()[robot]).collect()
    }

    pub fn reversed(&self) -> SmallSolution {
        SmallSolution {
            steps: self.steps.iter().rev().copied().collect(),
        }
    }

    /// Every step is in range and every transition is a legal synchronous move.
    pub fn is_valid(&self, shape: Shape) -> bool {
        let Some(first) = self.steps.first() else {
            return false;
        };
        let in_range = |c: &SmallConfig| {
            c.len() == first.len() && c.as_slice().iter().all(|&id| (id as usize) < shape.cells())
        };
        self.steps.iter().all(in_range)
            && self
                .steps
                .windows(2)
                .all(|w| is_legal_move(shape, &w[0], &w[1]))
    }

    /// New robot k is old robot `perm[k]`.
    fn permuted(&self, perm: &[usize]) -> SmallSolution {
        SmallSolution {
            steps: self
                .steps
                .iter()
                .map(|c| {
                    let s = c.as_slice();
                    let cells: Vec<u8> = perm.iter().map(|&p| s[p]).collect();
                    SmallConfig::from_slice_unchecked(&cells)
                })
                .collect(),
        }
    }

    /// Inverse of [`Self::permuted`].
    fn unpermuted(&self, perm: &[usize]) -> SmallSolution {
        SmallSolution {
            steps: self
                .steps
                .iter()
                .map(|c| {
                    let mut cells = [0u8; 9];
                    for (k, &p) in perm.iter().enumerate() {
                        cells[p] = c.as_slice()[k];
                    }
                    SmallConfig::from_slice_unchecked(&cells[..perm.len()])
                })
                .collect(),
        }
    }
}

/// One synchronous step: every robot waits or moves to a neighbor, no two
/// robots share a cell afterwards and no two robots swap along an edge.
pub fn is_legal_move(shape: Shape, from: &SmallConfig, to: &SmallConfig) -> bool {
    let (a, b) = (from.as_slice(), to.as_slice());
    if a.len() != b.len() || to.mask().count_ones() as usize != b.len() {
        return false;
    }
    if a.iter()
        .zip(b)
        .any(|(&u, &v)| u != v && !shape.is_adjacent(u, v))
    {
        return false;
    }
    for k in 0..a.len() {
        for l in k + 1..a.len() {
            if a[k] == b[l] && a[l] == b[k] {
                return false;
            }
        }
    }
    true
}

/// Dihedral symmetry: flip about the vertical middle line first (when
/// `flip`), then rotate clockwise by `rot` quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupAction {
    pub flip: bool,
    pub rot: u8,
}

impl GroupAction {
    pub const IDENTITY: GroupAction = GroupAction {
        flip: false,
        rot: 0,
    };
    pub const R: GroupAction = GroupAction {
        flip: false,
        rot: 1,
    };
    pub const F: GroupAction = GroupAction { flip: true, rot: 0 };

    pub fn all() -> [GroupAction; 8] {
        let mut out = [GroupAction::IDENTITY; 8];
        for (k, a) in out.iter_mut().enumerate() {
            *a = GroupAction {
                flip: k >= 4,
                rot: (k % 4) as u8,
            };
        }
        out
    }

    /// Actions that map the shape onto itself.
    pub fn for_shape(shape: Shape) -> Vec<GroupAction> {
        GroupAction::all()
            .into_iter()
            .filter(|a| a.is_valid_for(shape))
            .collect()
    }

    pub fn is_valid_for(self, shape: Shape) -> bool {
        shape == Shape::ThreeByThree || self.rot.is_multiple_of(2)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(self, other: GroupAction) -> GroupAction {
        let rot = if self.flip {
            (self.rot + 4 - other.rot % 4) % 4
        } else {
            (self.rot + other.rot) % 4
        };
        GroupAction {
            flip: self.flip ^ other.flip,
            rot,
        }
    }

    pub fn inverse(self) -> GroupAction {
        if self.flip {
            self
        } else {
            GroupAction {
                flip: false,
                rot: (4 - self.rot % 4) % 4,
            }
        }
    }

    pub fn apply_cell(self, shape: Shape, id: u8) -> Result<u8> {
        if !self.is_valid_for(shape) || id as usize >= shape.cells() {
            return Err(Error::InvalidAction {
                action: self.to_string(),
                shape: shape.to_string(),
            });
        }
        let (mut x, mut y) = shape.coords(id);
        let (w, h) = (shape.width() - 1, shape.height() - 1);
        if self.flip {
            x = w - x;
        }
        match shape {
            Shape::ThreeByThree => {
                for _ in 0..self.rot % 4 {
                    (x, y) = (y, 2 - x);
                }
            }
            Shape::TwoByThree => {
                if self.rot % 4 == 2 {
                    (x, y) = (w - x, h - y);
                }
            }
        }
        Ok(shape.id(x, y))
    }
}

impl fmt::Display for GroupAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.rot % 4, self.flip) {
            (0, false) => write!(f, "1"),
            (0, true) => write!(f, "f"),
            (1, flip) => write!(f, "r{}", if flip { "f" } else { "" }),
            (k, flip) => write!(f, "r{k}{}", if flip { "f" } else { "" }),
        }
    }
}

pub fn apply_group_action(a: GroupAction, c: &SmallConfig, shape: Shape) -> Result<SmallConfig> {
    let mut cells = [0u8; 9];
    for (k, &id) in c.as_slice().iter().enumerate() {
        cells[k] = a.apply_cell(shape, id)?;
    }
    Ok(SmallConfig::from_slice_unchecked(&cells[..c.len()]))
}

/// Maps every step of a solution through a group action.
pub fn transport(shape: Shape, a: GroupAction, sol: &SmallSolution) -> Result<SmallSolution> {
    let steps = sol
        .steps
        .iter()
        .map(|c| apply_group_action(a, c, shape))
        .collect::<Result<Vec<_>>>()?;
    Ok(SmallSolution { steps })
}

/// Robot permutation sorting the initial configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canonical {
    /// Canonical robot k is original robot `perm[k]`.
    pub perm: Vec<usize>,
    pub xi: SmallConfig,
    pub xg: SmallConfig,
}

pub fn canonicalize(xi: &SmallConfig, xg: &SmallConfig) -> Canonical {
    let mut perm: Vec<usize> = (0..xi.len()).collect();
    perm.sort_by_key(|&k| xi.as_slice()[k]);
    let pick = |c: &SmallConfig| {
        let cells: Vec<u8> = perm.iter().map(|&p| c.as_slice()[p]).collect();
        SmallConfig::from_slice_unchecked(&cells)
    };
    Canonical {
        xi: pick(xi),
        xg: pick(xg),
        perm: perm.clone(),
    }
}

pub fn encode_key(xi: &SmallConfig, xg: &SmallConfig) -> String {
    format!("{xi} {xg}")
}

pub fn decode_key(shape: Shape, key: &str) -> Result<(SmallConfig, SmallConfig)> {
    let mut parts = key.split(' ');
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::DatabaseIntegrity(format!("malformed key {key:?}")));
    };
    let xi = SmallConfig::for_shape(shape, &digits(a)?)?;
    let xg = SmallConfig::for_shape(shape, &digits(b)?)?;
    if xi.len() != xg.len() {
        return Err(Error::DatabaseIntegrity(format!(
            "key {key:?} has mismatched lengths"
        )));
    }
    Ok((xi, xg))
}

fn digits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| c.to_digit(10).map(|d| d as u8))
        .collect::<Option<Vec<u8>>>()
        .ok_or_else(|| Error::DatabaseIntegrity(format!("non-digit in {s:?}")))
}

pub fn encode_value(sol: &SmallSolution) -> String {
    sol.steps
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn decode_value(shape: Shape, value: &str) -> Result<SmallSolution> {
    let steps = value
        .split_whitespace()
        .map(|s| SmallConfig::for_shape(shape, &digits(s)?))
        .collect::<Result<Vec<_>>>()?;
    let sol = SmallSolution { steps };
    if sol.steps.is_empty() || !sol.is_valid(shape) {
        return Err(Error::DatabaseIntegrity(format!(
            "invalid solution {value:?}"
        )));
    }
    Ok(sol)
}

/// Ranking tables and move options for one shape.
struct ShapeData {
    m: usize,
    /// The cell itself plus its neighbors, ascending.
    options: Vec<Vec<u8>>,
    comb_rank: Vec<u32>,
    /// Sorted n-subsets in lexicographic order, indexed by n.
    combos: Vec<Vec<SmallConfig>>,
}

fn shape_data(shape: Shape) -> &'static ShapeData {
    static TWO: OnceLock<ShapeData> = OnceLock::new();
    static THREE: OnceLock<ShapeData> = OnceLock::new();
    let cell = match shape {
        Shape::TwoByThree => &TWO,
        Shape::ThreeByThree => &THREE,
    };
    cell.get_or_init(|| ShapeData::new(shape))
}

impl ShapeData {
    fn new(shape: Shape) -> Self {
        let m = shape.cells();
        let options = (0..m as u8)
            .map(|c| {
                let mut o = shape.neighbors(c);
                o.push(c);
                o.sort_unstable();
                o
            })
            .collect();
        let mut combos = vec![Vec::new(); m + 1];
        let mut comb_rank = vec![MISSING; 1 << m];
        fn rec(m: u8, start: u8, cur: &mut Vec<u8>, combos: &mut [Vec<SmallConfig>]) {
            if !cur.is_empty() {
                combos[cur.len()].push(SmallConfig::from_slice_unchecked(cur));
            }
            for c in start..m {
                cur.push(c);
                rec(m, c + 1, cur, combos);
                cur.pop();
            }
        }
        rec(m as u8, 0, &mut Vec::new(), &mut combos);
        for list in combos.iter_mut() {
            list.sort();
            for (r, c) in list.iter().enumerate() {
                comb_rank[c.mask() as usize] = r as u32;
            }
        }
        ShapeData {
            m,
            options,
            comb_rank,
            combos,
        }
    }

    fn perm_count(&self, n: usize) -> usize {
        (0..n).map(|k| self.m - k).product()
    }

    /// Lexicographic rank of an ordered partial permutation.
    fn perm_rank(&self, c: &[u8]) -> usize {
        let mut used = 0u16;
        let mut rank = 0usize;
        for (k, &x) in c.iter().enumerate() {
            let below = x as usize - (used & ((1u16 << x) - 1)).count_ones() as usize;
            rank = rank * (self.m - k) + below;
            used |= 1 << x;
        }
        rank
    }

    fn perm_unrank(&self, n: usize, mut rank: usize) -> SmallConfig {
        let mut digit = [0usize; 9];
        for k in (0..n).rev() {
            digit[k] = rank % (self.m - k);
            rank /= self.m - k;
        }
        let mut used = 0u16;
        let mut cells = [0u8; 9];
        for k in 0..n {
            let mut d = digit[k];
            for c in 0..self.m as u8 {
                if used & (1 << c) == 0 {
                    if d == 0 {
                        cells[k] = c;
                        used |= 1 << c;
                        break;
                    }
                    d -= 1;
                }
            }
        }
        SmallConfig::from_slice_unchecked(&cells[..n])
    }

    fn manhattan(&self, a: u8, b: u8) -> u8 {
        (a % 3).abs_diff(b % 3) + (a / 3).abs_diff(b / 3)
    }

    fn comb_index(&self, c: &SmallConfig) -> usize {
        self.comb_rank[c.mask() as usize] as usize
    }

    /// Visits legal successors of `x` in lexicographic order until `f`
    /// returns true; returns whether it stopped early. Robot k only
    /// considers cells `v` with `allow(k, v)`.
    fn for_each_successor<A, F>(&self, x: &[u8], allow: &A, f: &mut F) -> bool
    where
        A: Fn(usize, u8) -> bool,
        F: FnMut(&[u8]) -> bool,
    {
        let mut occ = [u8::MAX; 9];
        for (k, &c) in x.iter().enumerate() {
            occ[c as usize] = k as u8;
        }
        let mut target = [0u8; 9];
        self.successor_dfs(x, 0, &occ, &mut target, 0, allow, f)
    }

    #[allow(clippy::too_many_arguments)]
    fn successor_dfs<A, F>(
        &self,
        x: &[u8],
        k: usize,
        occ: &[u8; 9],
        target: &mut [u8; 9],
        taken: u16,
        allow: &A,
        f: &mut F,
    ) -> bool
    where
        A: Fn(usize, u8) -> bool,
        F: FnMut(&[u8]) -> bool,
    {
        if k == x.len() {
            return f(&target[..k]);
        }
        for &v in &self.options[x[k] as usize] {
            if taken & (1 << v) != 0 || !allow(k, v) {
                continue;
            }
            if v != x[k] {
                let l = occ[v as usize] as usize;
                if l < k && target[l] == x[k] {
                    continue;
                }
            }
            target[k] = v;
            if self.successor_dfs(x, k + 1, occ, target, taken | 1 << v, allow, f) {
                return true;
            }
        }
        false
    }

    /// Minimum steps from every ordered placement of `goal.len()` robots to
    /// the sorted goal set `goal` (robot k ends on `goal[k]`).
    fn distance_table(&self, goal: &SmallConfig) -> Vec<u8> {
        let n = goal.len();
        let mut dist = vec![UNREACHABLE; self.perm_count(n)];
        dist[self.perm_rank(goal.as_slice())] = 0;
        let mut frontier = vec![*goal];
        let mut d = 0u8;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for x in &frontier {
                self.for_each_successor(x.as_slice(), &|_, _| true, &mut |y| {
                    let r = self.perm_rank(y);
                    if dist[r] == UNREACHABLE {
                        dist[r] = d + 1;
                        next.push(SmallConfig::from_slice_unchecked(y));
                    }
                    false
                });
            }
            frontier = next;
            d += 1;
        }
        dist
    }

    /// Greedy descent along the distance table, taking the lexicographically
    /// smallest successor one step closer each time.
    fn walk(&self, xi: &SmallConfig, xg: &SmallConfig, table: &[u8]) -> Option<SmallSolution> {
        let n = xi.len();
        let mut sigma = [0usize; 9];
        for k in 0..n {
            sigma[k] = xg
                .as_slice()
                .iter()
                .filter(|&&c| c < xg.as_slice()[k])
                .count();
        }
        let dist = |x: &[u8]| {
            let mut y = [0u8; 9];
            for k in 0..n {
                y[sigma[k]] = x[k];
            }
            table[self.perm_rank(&y[..n])]
        };
        let mut d = dist(xi.as_slice());
        if d == UNREACHABLE {
            return None;
        }
        let mut steps = vec![*xi];
        let mut cur = *xi;
        let goal = xg.as_slice();
        while d > 0 {
            let mut found = None;
            let within = |k: usize, v: u8| self.manhattan(v, goal[k]) < d;
            self.for_each_successor(cur.as_slice(), &within, &mut |y| {
                if dist(y) == d - 1 {
                    found = Some(SmallConfig::from_slice_unchecked(y));
                    true
                } else {
                    false
                }
            });
            cur = found?;
            steps.push(cur);
            d -= 1;
        }
        Some(SmallSolution { steps })
    }
}

fn check_pair(shape: Shape, xi: &SmallConfig, xg: &SmallConfig) -> Result<()> {
    let cells = shape.cells();
    let bad = |c: &SmallConfig| c.as_slice().iter().any(|&id| id as usize >= cells);
    if xi.len() != xg.len() || xi.is_empty() || bad(xi) || bad(xg) {
        return Err(Error::InvalidParameter(format!(
            "configurations {xi} -> {xg} are not a valid {shape} instance"
        )));
    }
    Ok(())
}

/// Minimum-makespan solution by joint-space breadth-first search, ties
/// broken toward the lexicographically smallest successor.
pub fn oracle_solve(shape: Shape, xi: &SmallConfig, xg: &SmallConfig) -> Result<SmallSolution> {
    check_pair(shape, xi, xg)?;
    let data = shape_data(shape);
    let table = data.distance_table(&xg.sorted());
    data.walk(xi, xg, &table).ok_or_else(|| {
        Error::DatabaseIntegrity(format!("{shape} instance {xi} -> {xg} is infeasible"))
    })
}

/// Number of (sorted initial, goal) pairs for `n` robots.
pub fn entry_count(shape: Shape, n: usize) -> usize {
    let data = shape_data(shape);
    data.combos.get(n).map_or(0, |c| c.len()) * data.perm_count(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuildMode {
    /// Enumerate every instance up to `nmax` robots.
    Full,
    /// Store nothing; solve and memoize on lookup.
    Lazy,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub nmax: usize,
    pub mode: BuildMode,
    /// In full mode, solve larger instances on demand instead of failing.
    pub lazy_fallback: bool,
    pub max_entries: Option<usize>,
}

impl BuildOptions {
    pub fn full(nmax: usize) -> Self {
        BuildOptions {
            nmax,
            mode: BuildMode::Full,
            lazy_fallback: false,
            max_entries: None,
        }
    }

    pub fn lazy() -> Self {
        BuildOptions {
            nmax: 0,
            mode: BuildMode::Lazy,
            lazy_fallback: true,
            max_entries: None,
        }
    }

    /// Full store up to `nmax` robots, memoized solving above it.
    pub fn hybrid(nmax: usize) -> Self {
        BuildOptions {
            lazy_fallback: true,
            ..BuildOptions::full(nmax)
        }
    }
}

/// Dense store for one robot count, indexed by
/// `comb_rank(sorted xi) * P(m, n) + perm_rank(xg)`.
#[derive(Debug, Clone)]
struct Level {
    n: usize,
    offsets: Vec<u32>,
    /// Per entry: makespan byte, then `makespan * n` cell bytes.
    blob: Vec<u8>,
}

impl Level {
    fn empty(shape: Shape, n: usize) -> Self {
        Level {
            n,
            offsets: vec![MISSING; entry_count(shape, n)],
            blob: Vec::new(),
        }
    }

    fn push(&mut self, index: usize, sol: &SmallSolution) {
        self.offsets[index] = self.blob.len() as u32;
        self.blob.push(sol.makespan() as u8);
        for step in &sol.steps[1..] {
            self.blob.extend_from_slice(step.as_slice());
        }
    }

    fn get(&self, index: usize, xi: &SmallConfig) -> Option<SmallSolution> {
        let off = *self.offsets.get(index)?;
        if off == MISSING {
            return None;
        }
        let off = off as usize;
        let mk = self.blob[off] as usize;
        let mut steps = Vec::with_capacity(mk + 1);
        steps.push(*xi);
        for s in 0..mk {
            let a = off + 1 + s * self.n;
            steps.push(SmallConfig::from_slice_unchecked(&self.blob[a..a + self.n]));
        }
        Some(SmallSolution { steps })
    }

    fn stored(&self) -> usize {
        self.offsets.iter().filter(|&&o| o != MISSING).count()
    }
}

type TableKey = (usize, usize);

/// Canonical-key solution store for one shape.
pub struct SolutionDatabase {
    shape: Shape,
    nmax: usize,
    lazy: bool,
    levels: Vec<Level>,
    memo: RwLock<HashMap<(SmallConfig, SmallConfig), Arc<SmallSolution>>>,
    tables: RwLock<HashMap<TableKey, Arc<Vec<u8>>>>,
}

impl fmt::Debug for SolutionDatabase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolutionDatabase")
            .field("shape", &self.shape)
            .field("nmax", &self.nmax)
            .field("lazy", &self.lazy)
            .field("entries", &self.len())
            .finish()
    }
}

pub fn build_database(shape: Shape, nmax: usize, mode: BuildMode) -> Result<SolutionDatabase> {
    let options = match mode {
        BuildMode::Full => BuildOptions::full(nmax),
        BuildMode::Lazy => BuildOptions::lazy(),
    };
    SolutionDatabase::build(shape, &options)
}

impl SolutionDatabase {
    fn empty(shape: Shape, lazy: bool) -> Self {
        SolutionDatabase {
            shape,
            nmax: 0,
            lazy,
            levels: Vec::new(),
            memo: RwLock::new(HashMap::new()),
            tables: RwLock::new(HashMap::new()),
        }
    }

    pub fn build(shape: Shape, options: &BuildOptions) -> Result<Self> {
        if options.nmax > shape.cells() {
            return Err(Error::InvalidParameter(format!(
                "nmax {} exceeds the {} cells of {shape}",
                options.nmax,
                shape.cells()
            )));
        }
        let mut db = SolutionDatabase::empty(
            shape,
            options.lazy_fallback || options.mode == BuildMode::Lazy,
        );
        if options.mode == BuildMode::Lazy {
            return Ok(db);
        }
        let mut total = 0usize;
        for n in 1..=options.nmax {
            let size = entry_count(shape, n);
            if let Some(cap) = options.max_entries {
                if total + size > cap {
                    let completed = db.nmax;
                    return Err(Error::BudgetExceeded {
                        cap,
                        completed,
                        checkpoint: Box::new(db),
                    });
                }
            }
            db.levels.push(build_level(shape, n)?);
            db.nmax = n;
            total += size;
        }
        Ok(db)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Largest robot count stored in full.
    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn is_lazy(&self) -> bool {
        self.lazy
    }

    /// Stored entries, including memoized ones.
    pub fn len(&self) -> usize {
        self.levels.iter().map(Level::stored).sum::<usize>() + self.memo.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether `n`-robot lookups are answered from precomputed entries.
    pub fn stores(&self, n: usize) -> bool {
        n >= 1 && n <= self.nmax
    }

    pub fn covers(&self, n: usize) -> bool {
        n >= 1 && n <= self.shape.cells() && (n <= self.nmax || self.lazy)
    }

    /// Solution for an arbitrary instance, in the caller's robot order.
    pub fn lookup(&self, xi: &SmallConfig, xg: &SmallConfig) -> Result<SmallSolution> {
        check_pair(self.shape, xi, xg)?;
        let canon = canonicalize(xi, xg);
        let sol = self.get_canonical(&canon.xi, &canon.xg)?;
        Ok(sol.unpermuted(&canon.perm))
    }

    /// Stored value for a sorted initial configuration.
    pub fn get_canonical(&self, xi: &SmallConfig, xg: &SmallConfig) -> Result<SmallSolution> {
        check_pair(self.shape, xi, xg)?;
        if !xi.is_sorted() {
            return Err(Error::InvalidParameter(format!(
                "key configuration {xi} is not sorted"
            )));
        }
        let n = xi.len();
        let data = shape_data(self.shape);
        if n <= self.nmax {
            let index = data.comb_index(xi) * data.perm_count(n) + data.perm_rank(xg.as_slice());
            return self.levels[n - 1].get(index, xi).ok_or_else(|| {
                Error::DatabaseIntegrity(format!("missing entry {}", encode_key(xi, xg)))
            });
        }
        if !self.lazy {
            return Err(Error::NotCovered {
                robots: n,
                nmax: self.nmax,
            });
        }
        if let Some(sol) = self.memo.read().unwrap().get(&(*xi, *xg)) {
            return Ok((**sol).clone());
        }
        let table = self.table(n, &xg.sorted());
        let sol = data.walk(xi, xg, &table).ok_or_else(|| {
            Error::DatabaseIntegrity(format!(
                "{} instance {xi} -> {xg} is infeasible",
                self.shape
            ))
        })?;
        self.memoize(&sol)?;
        Ok(sol)
    }

    /// Value string for a key string.
    pub fn get_encoded(&self, key: &str) -> Result<String> {
        let (xi, xg) = decode_key(self.shape, key)?;
        Ok(encode_value(&self.get_canonical(&xi, &xg)?))
    }

    fn table(&self, n: usize, goal_set: &SmallConfig) -> Arc<Vec<u8>> {
        let data = shape_data(self.shape);
        let key = (n, data.comb_index(goal_set));
        if let Some(t) = self.tables.read().unwrap().get(&key) {
            return Arc::clone(t);
        }
        let t = Arc::new(data.distance_table(goal_set));
        Arc::clone(self.tables.write().unwrap().entry(key).or_insert(t))
    }

    /// Stores a canonical solution together with its transports under every
    /// valid group action and reversal.
    fn memoize(&self, sol: &SmallSolution) -> Result<()> {
        let mut memo = self.memo.write().unwrap();
        memo.entry((sol.start(), sol.end()))
            .or_insert_with(|| Arc::new(sol.clone()));
        for a in GroupAction::for_shape(self.shape) {
            let t = transport(self.shape, a, sol)?;
            for cand in [t.reversed(), t] {
                let canon = canonicalize(&cand.start(), &cand.end());
                memo.entry((canon.xi, canon.xg))
                    .or_insert_with(|| Arc::new(cand.permuted(&canon.perm)));
            }
        }
        Ok(())
    }

    /// All fully stored entries as (key, value) strings in key order.
    pub fn entries(&self) -> impl Iterator<Item = (String, String)> + '_ {
        MergedEntries::new(self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e| Error::io(path, e);
        let count: usize = self.levels.iter().map(Level::stored).sum();
        let file = File::create(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&[self.shape.tag(), self.nmax as u8, 0, 0])
            .map_err(io)?;
        w.write_all(&(count as u64).to_le_bytes()).map_err(io)?;
        let records_start = HEADER_LEN + 8 * count as u64;
        let mut offsets = Vec::with_capacity(count);
        w.seek(SeekFrom::Start(records_start)).map_err(io)?;
        let mut pos = records_start;
        for (key, value) in self.entries() {
            offsets.push(pos);
            let line = format!("{key}\t{value}\n");
            w.write_all(line.as_bytes()).map_err(io)?;
            pos += line.len() as u64;
        }
        w.seek(SeekFrom::Start(HEADER_LEN)).map_err(io)?;
        for off in offsets {
            w.write_all(&off.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Loads a database file fully into memory. `lazy_fallback` enables
    /// on-demand solving above the stored robot count.
    pub fn load(path: impl AsRef<Path>, lazy_fallback: bool) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let header = Header::read(&mut r, path)?;
        let mut db = SolutionDatabase::empty(header.shape, lazy_fallback);
        db.nmax = header.nmax;
        db.levels = (1..=header.nmax)
            .map(|n| Level::empty(header.shape, n))
            .collect();
        r.seek(SeekFrom::Start(HEADER_LEN + 8 * header.count))
            .map_err(|e| Error::io(path, e))?;
        let data = shape_data(header.shape);
        let mut line = String::new();
        for record in 0..header.count {
            line.clear();
            r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
            let (key, value) = line
                .trim_end_matches('\n')
                .split_once('\t')
                .ok_or_else(|| Error::DatabaseIntegrity(format!("record {record} is malformed")))?;
            let (xi, xg) = decode_key(header.shape, key)?;
            let sol = decode_value(header.shape, value)?;
            if !xi.is_sorted() || sol.start() != xi || sol.end() != xg || xi.len() > header.nmax {
                return Err(Error::DatabaseIntegrity(format!(
                    "record {key:?} does not match its value"
                )));
            }
            let n = xi.len();
            let index = data.comb_index(&xi) * data.perm_count(n) + data.perm_rank(xg.as_slice());
            db.levels[n - 1].push(index, &sol);
        }
        Ok(db)
    }
}

fn build_level(shape: Shape, n: usize) -> Result<Level> {
    let data = shape_data(shape);
    let combos = &data.combos[n];
    let tables: Vec<Vec<u8>> = combos.par_iter().map(|s| data.distance_table(s)).collect();
    let pcount = data.perm_count(n);
    let chunks = combos
        .par_iter()
        .map(|xi| {
            let mut part = Level {
                n,
                offsets: Vec::with_capacity(pcount),
                blob: Vec::new(),
            };
            for p in 0..pcount {
                let xg = data.perm_unrank(n, p);
                let table = &tables[data.comb_index(&xg)];
                let sol = data.walk(xi, &xg, table).ok_or_else(|| {
                    Error::DatabaseIntegrity(format!("{shape} instance {xi} -> {xg} is infeasible"))
                })?;
                part.offsets.push(0);
                part.push(p, &sol);
            }
            Ok(part)
        })
        .collect::<Result<Vec<Level>>>()?;
    let mut level = Level {
        n,
        offsets: Vec::with_capacity(combos.len() * pcount),
        blob: Vec::new(),
    };
    for part in chunks {
        let base = level.blob.len() as u32;
        level.offsets.extend(part.offsets.iter().map(|o| o + base));
        level.blob.extend_from_slice(&part.blob);
    }
    Ok(level)
}

struct LevelCursor<'a> {
    level: &'a Level,
    index: usize,
    pcount: usize,
}

impl LevelCursor<'_> {
    fn current(&mut self, data: &ShapeData) -> Option<(String, String)> {
        while self.index < self.level.offsets.len() {
            let n = self.level.n;
            let xi = data.combos[n][self.index / self.pcount];
            if let Some(sol) = self.level.get(self.index, &xi) {
                return Some((encode_key(&xi, &sol.end()), encode_value(&sol)));
            }
            self.index += 1;
        }
        None
    }
}

/// k-way merge of the per-level entry streams into key-string order.
struct MergedEntries<'a> {
    data: &'static ShapeData,
    cursors: Vec<LevelCursor<'a>>,
    heads: Vec<Option<(String, String)>>,
}

impl<'a> MergedEntries<'a> {
    fn new(db: &'a SolutionDatabase) -> Self {
        let data = shape_data(db.shape);
        let mut cursors: Vec<LevelCursor<'a>> = db
            .levels
            .iter()
            .map(|level| LevelCursor {
                level,
                index: 0,
                pcount: data.perm_count(level.n),
            })
            .collect();
        let heads = cursors.iter_mut().map(|c| c.current(data)).collect();
        MergedEntries {
            data,
            cursors,
            heads,
        }
    }
}

impl Iterator for MergedEntries<'_> {
    type Item = (String, String);

    fn next(&mut self) -> Option<Self::Item> {
        let best = self
            .heads
            .iter()
            .enumerate()
            .filter_map(|(k, h)| h.as_ref().map(|(key, _)| (key, k)))
            .min()?
            .1;
        let out = self.heads[best].take();
        self.cursors[best].index += 1;
        self.heads[best] = self.cursors[best].current(self.data);
        out
    }
}

struct Header {
    shape: Shape,
    nmax: usize,
    count: u64,
}

impl Header {
    fn read<R: Read>(r: &mut R, path: &Path) -> Result<Header> {
        let mut buf = [0u8; HEADER_LEN as usize];
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        if &buf[..8] != MAGIC {
            return Err(Error::DatabaseIntegrity(format!(
                "{} is not a solution database",
                path.display()
            )));
        }
        let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::DatabaseIntegrity(format!(
                "unsupported database version {version}"
            )));
        }
        let shape = Shape::from_tag(buf[12])
            .ok_or_else(|| Error::DatabaseIntegrity(format!("unknown shape tag {}", buf[12])))?;
        let nmax = buf[13] as usize;
        if nmax > shape.cells() {
            return Err(Error::DatabaseIntegrity(format!(
                "nmax {nmax} too large for {shape}"
            )));
        }
        let count = u64::from_le_bytes(buf[16..24].try_into().unwrap());
        Ok(Header { shape, nmax, count })
    }
}

/// Read-only view of a database file that binary-searches the offset table
/// instead of loading the records.
pub struct DiskIndex {
    path: PathBuf,
    reader: BufReader<File>,
    shape: Shape,
    nmax: usize,
    count: u64,
}

impl DiskIndex {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut reader = BufReader::new(File::open(&path).map_err(|e| Error::io(&path, e))?);
        let header = Header::read(&mut reader, &path)?;
        Ok(DiskIndex {
            path,
            reader,
            shape: header.shape,
            nmax: header.nmax,
            count: header.count,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn record(&mut self, k: u64) -> Result<(String, String)> {
        let io = |e| Error::io(&self.path, e);
        self.reader
            .seek(SeekFrom::Start(HEADER_LEN + 8 * k))
            .map_err(io)?;
        let mut off = [0u8; 8];
        self.reader
            .read_exact(&mut off)
            .map_err(|e| Error::io(&self.path, e))?;
        self.reader
            .seek(SeekFrom::Start(u64::from_le_bytes(off)))
            .map_err(|e| Error::io(&self.path, e))?;
        let mut line = String::new();
        self.reader
            .read_line(&mut line)
            .map_err(|e| Error::io(&self.path, e))?;
        let (key, value) = line
            .trim_end_matches('\n')
            .split_once('\t')
            .ok_or_else(|| Error::DatabaseIntegrity(format!("record {k} is malformed")))?;
        Ok((key.to_string(), value.to_string()))
    }

    /// Value string for a key string.
    pub fn get(&mut self, key: &str) -> Result<Option<String>> {
        let (mut lo, mut hi) = (0u64, self.count);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let (k, v) = self.record(mid)?;
            match k.as_str().cmp(key) {
                std::cmp::Ordering::Equal => return Ok(Some(v)),
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
            }
        }
        Ok(None)
    }

    pub fn lookup(&mut self, xi: &SmallConfig, xg: &SmallConfig) -> Result<SmallSolution> {
        check_pair(self.shape, xi, xg)?;
        if xi.len() > self.nmax {
            return Err(Error::NotCovered {
                robots: xi.len(),
                nmax: self.nmax,
            });
        }
        let canon = canonicalize(xi, xg);
        let key = encode_key(&canon.xi, &canon.xg);
        let value = self
            .get(&key)?
            .ok_or_else(|| Error::DatabaseIntegrity(format!("missing entry {key}")))?;
        Ok(decode_value(self.shape, &value)?.unpermuted(&canon.perm))
    }
}

/// Uniformly random instance with `n` robots.
pub fn random_instance<R: Rng>(shape: Shape, n: usize, rng: &mut R) -> (SmallConfig, SmallConfig) {
    let mut cells: Vec<u8> = (0..shape.cells() as u8).collect();
    cells.shuffle(rng);
    let xi = SmallConfig::from_slice_unchecked(&cells[..n]);
    cells.shuffle(rng);
    let xg = SmallConfig::from_slice_unchecked(&cells[..n]);
    (xi, xg)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub invalid: usize,
    pub suboptimal: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.invalid == 0 && self.suboptimal == 0
    }
}

/// Spot-checks random lookups against fresh oracle solves.
pub fn verify_database(db: &SolutionDatabase, samples: usize, seed: u64) -> Result<VerifyReport> {
    let top = if db.is_lazy() {
        db.shape().cells()
    } else {
        db.nmax()
    };
    if top == 0 {
        return Err(Error::InvalidParameter("database stores no entries".into()));
    }
    let mut rng = seeded_rng(seed, 7);
    let mut report = VerifyReport::default();
    for _ in 0..samples {
        let n = rng.gen_range(1..=top);
        let (xi, xg) = random_instance(db.shape(), n, &mut rng);
        let sol = db.lookup(&xi, &xg)?;
        let oracle = oracle_solve(db.shape(), &xi, &xg)?;
        report.samples += 1;
        if !sol.is_valid(db.shape()) || sol.start() != xi || sol.end() != xg {
            report.invalid += 1;
        } else if sol.makespan() != oracle.makespan() {
            report.suboptimal += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> SmallConfig {
        s.parse().unwrap()
    }

    #[test]
    fn golden_oracle_and_canonical_key() {
        let sol = oracle_solve(Shape::ThreeByThree, &c("065"), &c("283")).unwrap();
        assert_eq!(encode_value(&sol), "065 174 283");
        let canon = canonicalize(&c("065"), &c("283"));
        assert_eq!(encode_key(&canon.xi, &canon.xg), "056 238");
        assert_eq!(canon.perm, vec![0, 2, 1]);
    }

    #[test]
    fn canonicalize_reversed() {
        let canon = canonicalize(&c("840"), &c("123"));
        assert_eq!(canon.perm, vec![2, 1, 0]);
        assert_eq!(canon.xi, c("048"));
        assert_eq!(canon.xg, c("321"));
        let canon = canonicalize(&c("136"), &c("502"));
        assert_eq!(canon.perm, vec![0, 1, 2]);
    }

    #[test]
    fn trivial_instance() {
        let sol = oracle_solve(Shape::TwoByThree, &c("05"), &c("05")).unwrap();
        assert_eq!(sol.makespan(), 0);
        assert_eq!(sol.steps, vec![c("05")]);
    }

    #[test]
    fn rank_round_trip() {
        let data = shape_data(Shape::ThreeByThree);
        for n in 1..=4 {
            for r in 0..data.perm_count(n) {
                let cfg = data.perm_unrank(n, r);
                assert_eq!(data.perm_rank(cfg.as_slice()), r);
            }
        }
        assert_eq!(data.combos[3].len(), 84);
        assert_eq!(data.comb_index(&c("012")), 0);
        assert_eq!(data.comb_index(&c("678")), 83);
    }

    #[test]
    fn group_action_basics() {
        let s = Shape::ThreeByThree;
        assert_eq!(GroupAction::F.apply_cell(s, 4).unwrap(), 4);
        // top-left corner goes to top-right under a clockwise quarter turn
        assert_eq!(GroupAction::R.apply_cell(s, 6).unwrap(), 8);
        assert_eq!(GroupAction::R.apply_cell(s, 8).unwrap(), 2);
        let cfg = c("015");
        let mut x = cfg;
        for _ in 0..4 {
            x = apply_group_action(GroupAction::R, &x, s).unwrap();
        }
        assert_eq!(x, cfg);
        assert!(matches!(
            apply_group_action(GroupAction::R, &c("01"), Shape::TwoByThree),
            Err(Error::InvalidAction { .. })
        ));
        assert_eq!(GroupAction::for_shape(Shape::TwoByThree).len(), 4);
    }

    #[test]
    fn group_composition_matches_application() {
        let cfg = c("0157");
        for shape in [Shape::TwoByThree, Shape::ThreeByThree] {
            let cfg = SmallConfig::from_slice_unchecked(
                &cfg.as_slice()[..shape.cells().min(4)]
                    .iter()
                    .map(|&x| x % shape.cells() as u8)
                    .collect::<Vec<_>>(),
            );
            for a in GroupAction::for_shape(shape) {
                let inv = a.inverse();
                assert_eq!(a.compose(inv), GroupAction::IDENTITY);
                for b in GroupAction::for_shape(shape) {
                    let lhs =
                        apply_group_action(a, &apply_group_action(b, &cfg, shape).unwrap(), shape)
                            .unwrap();
                    let rhs = apply_group_action(a.compose(b), &cfg, shape).unwrap();
                    assert_eq!(lhs, rhs, "{a} {b} on {shape}");
                }
            }
        }
    }

    #[test]
    fn legal_move_rules() {
        let s = Shape::ThreeByThree;
        assert!(is_legal_move(s, &c("01"), &c("12")));
        assert!(!is_legal_move(s, &c("01"), &c("10")));
        assert!(!is_legal_move(
            s,
            &c("02"),
            &SmallConfig::from_slice_unchecked(&[1, 1])
        ));
        assert!(!is_legal_move(s, &c("0"), &c("2")));
        // rotation around a 2x2 block
        assert!(is_legal_move(s, &c("0143"), &c("1430")));
    }

    #[test]
    fn small_full_build_and_lookup() {
        let db = build_database(Shape::TwoByThree, 3, BuildMode::Full).unwrap();
        assert_eq!(db.len(), 36 + 450 + 2400);
        let sol = db.lookup(&c("52"), &c("25")).unwrap();
        assert!(sol.is_valid(Shape::TwoByThree));
        assert_eq!((sol.start(), sol.end()), (c("52"), c("25")));
        assert!(matches!(
            db.lookup(&c("0123"), &c("1234")),
            Err(Error::NotCovered { .. })
        ));
    }

    #[test]
    fn budget_cap_returns_checkpoint() {
        let opts = BuildOptions {
            max_entries: Some(500),
            ..BuildOptions::full(3)
        };
        match SolutionDatabase::build(Shape::TwoByThree, &opts) {
            Err(Error::BudgetExceeded {
                completed,
                checkpoint,
                ..
            }) => {
                assert_eq!(completed, 2);
                assert_eq!(checkpoint.len(), 36 + 450);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn lazy_memoizes_transports() {
        let db = build_database(Shape::ThreeByThree, 0, BuildMode::Lazy).unwrap();
        assert!(db.is_empty());
        let sol = db.lookup(&c("065"), &c("283")).unwrap();
        assert_eq!(sol.makespan(), 2);
        assert!(db.len() > 1 && db.len() <= 16);
    }

    #[test]
    fn value_round_trip_and_rejection() {
        let sol = decode_value(Shape::ThreeByThree, "056 147 238").unwrap();
        assert_eq!(encode_value(&sol), "056 147 238");
        assert!(decode_value(Shape::ThreeByThree, "01 10").is_err());
        assert!(decode_value(Shape::TwoByThree, "08").is_err());
        assert!(decode_key(Shape::ThreeByThree, "056238").is_err());
    }
}
