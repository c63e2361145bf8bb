use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::geometry::{CellIndex, OccupancyGrid, Vec2, NEIGHBORS_8};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("{which} {point} lies outside the planning grid")]
    OutOfBounds { which: &'static str, point: Vec2 },
    #[error("{which} {point} lies in an occupied cell")]
    OccupiedEndpoint { which: &'static str, point: Vec2 },
    #[error("no path between the start and goal cells")]
    NoPath,
}

/// A grid path through cell centers, start first.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub waypoints: Vec<Vec2>,
    pub cells: Vec<CellIndex>,
    /// Total length in meters.
    pub cost: f64,
}

/// Path length in whole axial and diagonal steps. Comparing these exactly
/// (rather than accumulated floats) keeps ties and optimality checks exact:
/// `a + d*sqrt(2)` determines `(a, d)` uniquely.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Steps {
    axial: u32,
    diagonal: u32,
}

impl Steps {
    #[inline]
    fn value(self) -> f64 {
        self.axial as f64 + SQRT_2 * self.diagonal as f64
    }

    #[inline]
    fn plus(self, other: Steps) -> Steps {
        Steps {
            axial: self.axial + other.axial,
            diagonal: self.diagonal + other.diagonal,
        }
    }

    /// Octile distance between two cells.
    fn octile(a: CellIndex, b: CellIndex) -> Steps {
        let dx = a.x.abs_diff(b.x) as u32;
        let dy = a.y.abs_diff(b.y) as u32;
        Steps {
            axial: dx.max(dy) - dx.min(dy),
            diagonal: dx.min(dy),
        }
    }
}

struct OpenEntry {
    f: f64,
    seq: u64,
    cell: CellIndex,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // Max-heap: the "greatest" entry pops first. Lowest f wins, then the most
    // recently pushed, then the lexicographically smallest cell.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.seq.cmp(&other.seq))
            .then_with(|| (other.cell.x, other.cell.y).cmp(&(self.cell.x, self.cell.y)))
    }
}

fn endpoint_cell(grid: &OccupancyGrid, p: Vec2, which: &'static str) -> Result<CellIndex, PlanError> {
    let cell = grid
        .cell_of(p)
        .ok_or(PlanError::OutOfBounds { which, point: p })?;
    if grid.is_occupied(cell) {
        return Err(PlanError::OccupiedEndpoint { which, point: p });
    }
    Ok(cell)
}

/// Minimum-length 8-connected path between the cells containing `start` and
/// `goal`, using the octile heuristic. Diagonal moves may not clip the corner
/// of an occupied cell.
pub fn astar_plan(grid: &OccupancyGrid, start: Vec2, goal: Vec2) -> Result<Path, PlanError> {
    let start_cell = endpoint_cell(grid, start, "start")?;
    let goal_cell = endpoint_cell(grid, goal, "goal")?;
    let cells = astar_cells(grid, start_cell, goal_cell).ok_or(PlanError::NoPath)?;
    let steps = cells.windows(2).fold(Steps::default(), |acc, w| {
        let diagonal = w[0].x != w[1].x && w[0].y != w[1].y;
        acc.plus(if diagonal {
            Steps { axial: 0, diagonal: 1 }
        } else {
            Steps { axial: 1, diagonal: 0 }
        })
    });
    Ok(Path {
        waypoints: cells.iter().map(|&c| grid.cell_center(c)).collect(),
        cost: grid.resolution() * steps.value(),
        cells,
    })
}

const UNSEEN: u32 = u32::MAX;

pub(crate) fn astar_cells(grid: &OccupancyGrid, start: CellIndex, goal: CellIndex) -> Option<Vec<CellIndex>> {
    let w = grid.width();
    let n = w * grid.height();
    let flat = |c: CellIndex| c.y * w + c.x;

    let mut best = vec![
        Steps {
            axial: UNSEEN,
            diagonal: UNSEEN
        };
        n
    ];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    best[flat(start)] = Steps::default();
    open.push(OpenEntry {
        f: Steps::octile(start, goal).value(),
        seq,
        cell: start,
    });

    while let Some(OpenEntry { cell, .. }) = open.pop() {
        let ci = flat(cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if cell == goal {
            let mut path = vec![cell];
            let mut cur = ci;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push(CellIndex::new(cur % w, cur / w));
            }
            path.reverse();
            return Some(path);
        }
        let g = best[ci];
        for (dx, dy) in NEIGHBORS_8 {
            let nx = cell.x as i64 + dx;
            let ny = cell.y as i64 + dy;
            if grid.blocked(nx, ny) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal && (grid.blocked(cell.x as i64 + dx, cell.y as i64) || grid.blocked(cell.x as i64, cell.y as i64 + dy)) {
                continue;
            }
            let next = CellIndex::new(nx as usize, ny as usize);
            let ni = flat(next);
            if closed[ni] {
                continue;
            }
            let step = if diagonal {
                Steps { axial: 0, diagonal: 1 }
            } else {
                Steps { axial: 1, diagonal: 0 }
            };
            let cand = g.plus(step);
            let known = best[ni];
            if known.axial != UNSEEN && known.value() <= cand.value() {
                continue;
            }
            best[ni] = cand;
            parent[ni] = ci;
            seq += 1;
            open.push(OpenEntry {
                f: cand.plus(Steps::octile(next, goal)).value(),
                seq,
                cell: next,
            });
        }
    }
    None
}
