//! Sub-graph windows reserved for local conflict resolution.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::{GridGraph, Vertex};
use crate::subdb::Shape;

/// Window footprint on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WindowShape {
    /// 3x3.
    Square,
    /// Three wide, two tall.
    Wide,
    /// Two wide, three tall; solved through the 2x3 database rotated a
    /// quarter turn.
    Tall,
}

impl WindowShape {
    pub fn width(self) -> u32 {
        match self {
            WindowShape::Square | WindowShape::Wide => 3,
            WindowShape::Tall => 2,
        }
    }

    pub fn height(self) -> u32 {
        match self {
            WindowShape::Square | WindowShape::Tall => 3,
            WindowShape::Wide => 2,
        }
    }

    pub fn database_shape(self) -> Shape {
        match self {
            WindowShape::Square => Shape::ThreeByThree,
            WindowShape::Wide | WindowShape::Tall => Shape::TwoByThree,
        }
    }
}

/// Which window sizes the engine builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapePref {
    /// Only 2x3 and 3x2 windows.
    TwoByThree,
    /// 3x3 whenever possible, otherwise 2x3 or 3x2.
    ThreeByThree,
}

impl ShapePref {
    pub fn shapes(self) -> &'static [WindowShape] {
        match self {
            ShapePref::TwoByThree => &[WindowShape::Wide, WindowShape::Tall],
            ShapePref::ThreeByThree => &[WindowShape::Square, WindowShape::Wide, WindowShape::Tall],
        }
    }
}

impl fmt::Display for ShapePref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapePref::TwoByThree => write!(f, "2x3"),
            ShapePref::ThreeByThree => write!(f, "3x3"),
        }
    }
}

impl std::str::FromStr for ShapePref {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "2x3" => Ok(ShapePref::TwoByThree),
            "3x3" => Ok(ShapePref::ThreeByThree),
            other => Err(crate::Error::InvalidParameter(format!(
                "unknown shape {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubGraphWindow {
    /// Lowest-index corner.
    pub anchor: Vertex,
    pub shape: WindowShape,
}

impl SubGraphWindow {
    pub fn new(anchor: Vertex, shape: WindowShape) -> Self {
        SubGraphWindow { anchor, shape }
    }

    pub fn contains(&self, v: Vertex) -> bool {
        v.i >= self.anchor.i
            && v.j >= self.anchor.j
            && v.i < self.anchor.i + self.shape.width()
            && v.j < self.anchor.j + self.shape.height()
    }

    pub fn cells(&self) -> Vec<Vertex> {
        let mut out = Vec::with_capacity(9);
        for y in 0..self.shape.height() {
            for x in 0..self.shape.width() {
                out.push(Vertex::new(self.anchor.i + x, self.anchor.j + y));
            }
        }
        out
    }

    pub fn far_corner(&self) -> Vertex {
        Vertex::new(
            self.anchor.i + self.shape.width() - 1,
            self.anchor.j + self.shape.height() - 1,
        )
    }

    /// Database cell id of a grid vertex inside the window.
    pub fn local_id(&self, v: Vertex) -> Option<u8> {
        if !self.contains(v) {
            return None;
        }
        let (x, y) = ((v.i - self.anchor.i) as u8, (v.j - self.anchor.j) as u8);
        Some(match self.shape {
            WindowShape::Square | WindowShape::Wide => y * 3 + x,
            WindowShape::Tall => (1 - x) * 3 + y,
        })
    }

    pub fn vertex(&self, id: u8) -> Vertex {
        let (x, y) = match self.shape {
            WindowShape::Square | WindowShape::Wide => (id % 3, id / 3),
            WindowShape::Tall => (1 - id / 3, id % 3),
        };
        Vertex::new(self.anchor.i + x as u32, self.anchor.j + y as u32)
    }

    pub fn overlaps(&self, other: &SubGraphWindow) -> bool {
        let (a, b) = (self.far_corner(), other.far_corner());
        self.anchor.i <= b.i
            && other.anchor.i <= a.i
            && self.anchor.j <= b.j
            && other.anchor.j <= a.j
    }
}

impl fmt::Display for SubGraphWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}@{}",
            self.shape.width(),
            self.shape.height(),
            self.anchor
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowOutcome {
    Window(SubGraphWindow),
    /// Obstacle-free candidates exist but all overlap active windows.
    Skip,
    /// No obstacle-free candidate contains both robots.
    Postpone,
}

/// First obstacle-free window containing `a` and `b` that avoids reserved
/// cells (`reserved[g.index(v)] != 0`). Shapes are tried in order; anchors
/// row-major.
pub fn find_window(
    g: &GridGraph,
    a: Vertex,
    b: Vertex,
    reserved: &[u32],
    shapes: &[WindowShape],
) -> WindowOutcome {
    match candidate_windows(g, a, b, reserved, shapes) {
        Ok(all) => WindowOutcome::Window(all[0]),
        Err(outcome) => outcome,
    }
}

/// Every usable window, grouped by shape in the given order, anchors
/// row-major within a shape. Fails with `Skip` or `Postpone` exactly when
/// [`find_window`] does.
pub fn candidate_windows(
    g: &GridGraph,
    a: Vertex,
    b: Vertex,
    reserved: &[u32],
    shapes: &[WindowShape],
) -> Result<Vec<SubGraphWindow>, WindowOutcome> {
    let mut blocked_only_by_reservation = false;
    let mut found = Vec::new();
    for &shape in shapes {
        let (w, h) = (shape.width(), shape.height());
        let (lo_i, hi_i) = (a.i.min(b.i), a.i.max(b.i));
        let (lo_j, hi_j) = (a.j.min(b.j), a.j.max(b.j));
        if hi_i - lo_i >= w || hi_j - lo_j >= h {
            continue;
        }
        let i_min = (hi_i + 1).saturating_sub(w).max(1);
        let j_min = (hi_j + 1).saturating_sub(h).max(1);
        let i_max = lo_i.min(g.width().saturating_sub(w - 1));
        let j_max = lo_j.min(g.height().saturating_sub(h - 1));
        for j0 in j_min..=j_max {
            for i0 in i_min..=i_max {
                let win = SubGraphWindow::new(Vertex::new(i0, j0), shape);
                if !g.rect_is_free(win.anchor, win.far_corner()) {
                    continue;
                }
                if win.cells().iter().any(|&c| reserved[g.index(c)] != 0) {
                    blocked_only_by_reservation = true;
                    continue;
                }
                found.push(win);
            }
        }
    }
    if !found.is_empty() {
        return Ok(found);
    }
    Err(if blocked_only_by_reservation {
        WindowOutcome::Skip
    } else {
        WindowOutcome::Postpone
    })
}
