use super::{GeometryError, ObstacleSet, Rect, Segment, Vec2};

/// Slack on the cell/capsule overlap test so that points sitting on a cell
/// border never fall into a free neighbor through rounding.
const OVERLAP_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub x: usize,
    pub y: usize,
}

impl CellIndex {
    pub const fn new(x: usize, y: usize) -> Self {
        CellIndex { x, y }
    }
}

/// Boolean occupancy over a regular grid. Cell `(x, y)` covers the square
/// `origin + [x, x+1) * resolution` by `origin + [y, y+1) * resolution`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    origin: Vec2,
    resolution: f64,
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(origin: Vec2, resolution: f64, width: usize, height: usize) -> Result<Self, GeometryError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(GeometryError::InvalidResolution(resolution));
        }
        Ok(OccupancyGrid {
            origin,
            resolution,
            width,
            height,
            cells: vec![false; width * height],
        })
    }

    /// Builds a grid from rows of `'#'` (occupied) and `'.'` (free), first
    /// row at the top (largest y).
    pub fn from_ascii(origin: Vec2, resolution: f64, rows: &[&str]) -> Result<Self, GeometryError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut grid = OccupancyGrid::new(origin, resolution, width, height)?;
        for (row_idx, row) in rows.iter().enumerate() {
            let y = height - 1 - row_idx;
            for (x, ch) in row.chars().enumerate() {
                grid.set(CellIndex::new(x, y), ch == '#');
            }
        }
        Ok(grid)
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    fn flat(&self, c: CellIndex) -> usize {
        c.y * self.width + c.x
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    #[inline]
    pub fn is_occupied(&self, c: CellIndex) -> bool {
        self.cells[self.flat(c)]
    }

    /// Occupancy with out-of-bounds cells reported as occupied.
    pub fn blocked(&self, x: i64, y: i64) -> bool {
        !self.in_bounds(x, y) || self.cells[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, c: CellIndex, occupied: bool) {
        let i = self.flat(c);
        self.cells[i] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Cell containing `p`. Points on the far boundary of the grid belong to
    /// the last row/column.
    pub fn cell_of(&self, p: Vec2) -> Option<CellIndex> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        let ix = snap_index(fx, p.x, self.origin.x + self.width as f64 * self.resolution, self.width)?;
        let iy = snap_index(fy, p.y, self.origin.y + self.height as f64 * self.resolution, self.height)?;
        Some(CellIndex::new(ix, iy))
    }

    pub fn cell_center(&self, c: CellIndex) -> Vec2 {
        Vec2::new(
            self.origin.x + (c.x as f64 + 0.5) * self.resolution,
            self.origin.y + (c.y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell_rect(&self, c: CellIndex) -> Rect {
        let min = Vec2::new(
            self.origin.x + c.x as f64 * self.resolution,
            self.origin.y + c.y as f64 * self.resolution,
        );
        Rect::new(min, min + Vec2::new(self.resolution, self.resolution))
    }

    /// Nearest free cell to `start` by breadth-first search over 8-neighbors.
    pub fn nearest_free(&self, start: CellIndex) -> Option<CellIndex> {
        if !self.is_occupied(start) {
            return Some(start);
        }
        let mut seen = vec![false; self.cells.len()];
        let mut queue = std::collections::VecDeque::new();
        seen[self.flat(start)] = true;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            for (dx, dy) in NEIGHBORS_8 {
                let nx = c.x as i64 + dx;
                let ny = c.y as i64 + dy;
                if !self.in_bounds(nx, ny) {
                    continue;
                }
                let n = CellIndex::new(nx as usize, ny as usize);
                let i = self.flat(n);
                if seen[i] {
                    continue;
                }
                if !self.cells[i] {
                    return Some(n);
                }
                seen[i] = true;
                queue.push_back(n);
            }
        }
        None
    }
}

/// Offsets of the 8-connected neighborhood, axial moves first.
pub const NEIGHBORS_8: [(i64, i64); 8] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

fn snap_index(f: f64, coord: f64, far_edge: f64, n: usize) -> Option<usize> {
    if !f.is_finite() || f < 0.0 {
        return None;
    }
    let i = f as usize;
    if i < n {
        Some(i)
    } else if n > 0 && (coord - far_edge).abs() <= OVERLAP_SLACK {
        Some(n - 1)
    } else {
        None
    }
}

/// Conservatively rasterizes `obstacles` dilated by `inflation`: a cell is
/// occupied whenever its square comes within `inflation` of a segment.
///
/// The grid covers `world_bounds` when given, otherwise the obstacle bounds
/// padded by the inflation radius.
pub fn rasterize(
    obstacles: &ObstacleSet,
    resolution: f64,
    inflation: f64,
    world_bounds: Option<Rect>,
) -> Result<OccupancyGrid, GeometryError> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(GeometryError::InvalidResolution(resolution));
    }
    if !(inflation >= 0.0) || !inflation.is_finite() {
        return Err(GeometryError::InvalidInflation(inflation));
    }
    let extent = match world_bounds {
        Some(b) if !b.is_degenerate() => b,
        _ => match obstacles.bounds() {
            Some(b) if !b.is_degenerate() => b.expanded(inflation),
            _ => return Err(GeometryError::EmptyBounds),
        },
    };

    let cells_along = |len: f64| ((len / resolution) - 1e-9).ceil().max(1.0) as usize;
    let width = cells_along(extent.width());
    let height = cells_along(extent.height());
    let mut grid = OccupancyGrid::new(extent.min, resolution, width, height)?;

    let reach = inflation + OVERLAP_SLACK;
    for seg in obstacles.segments() {
        let mut bb = Rect::from_points([seg.a(), seg.b()]).expect("two points");
        bb = bb.expanded(reach);
        let to_index = |v: f64, o: f64, n: usize| -> usize {
            let f = ((v - o) / resolution).floor();
            if f <= 0.0 {
                0
            } else {
                (f as usize).min(n.saturating_sub(1))
            }
        };
        if bb.max.x < grid.origin.x
            || bb.max.y < grid.origin.y
            || bb.min.x > grid.origin.x + width as f64 * resolution
            || bb.min.y > grid.origin.y + height as f64 * resolution
        {
            continue;
        }
        let x0 = to_index(bb.min.x, grid.origin.x, width);
        let x1 = to_index(bb.max.x, grid.origin.x, width);
        let y0 = to_index(bb.min.y, grid.origin.y, height);
        let y1 = to_index(bb.max.y, grid.origin.y, height);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = CellIndex::new(x, y);
                if grid.is_occupied(c) {
                    continue;
                }
                if segment_rect_distance(seg, &grid.cell_rect(c)) <= reach {
                    grid.set(c, true);
                }
            }
        }
    }
    Ok(grid)
}

fn point_rect_distance(p: Vec2, r: &Rect) -> f64 {
    let dx = (r.min.x - p.x).max(0.0).max(p.x - r.max.x);
    let dy = (r.min.y - p.y).max(0.0).max(p.y - r.max.y);
    dx.hypot(dy)
}

/// Euclidean distance between a segment and a closed rectangle.
pub(crate) fn segment_rect_distance(seg: &Segment, r: &Rect) -> f64 {
    if r.contains(seg.a()) || r.contains(seg.b()) {
        return 0.0;
    }
    let corners = [
        r.min,
        Vec2::new(r.max.x, r.min.y),
        r.max,
        Vec2::new(r.min.x, r.max.y),
    ];
    for i in 0..4 {
        if segments_intersect(seg.a(), seg.b(), corners[i], corners[(i + 1) % 4]) {
            return 0.0;
        }
    }
    let mut d = point_rect_distance(seg.a(), r).min(point_rect_distance(seg.b(), r));
    for c in corners {
        d = d.min(seg.distance_to(c));
    }
    d
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = (q2 - q1).cross(p1 - q1);
    let d2 = (q2 - q1).cross(p2 - q1);
    let d3 = (p2 - p1).cross(q1 - p1);
    let d4 = (p2 - p1).cross(q2 - p1);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}
