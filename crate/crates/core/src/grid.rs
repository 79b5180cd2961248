//! Grid graphs in the MovingAI `.map` format, BFS distance fields and the
//! deterministic descent rule every planner shares.

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Marker stored in a [`DistanceField`] for cells that cannot reach the target.
pub const UNREACHABLE: u32 = u32::MAX;

/// A grid vertex addressed by row and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl Cell {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }

    /// Chebyshev distance, the metric of a square communication area.
    pub fn chebyshev(self, other: Cell) -> u32 {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("map line {line}: {message}")]
pub struct MapParseError {
    pub line: usize,
    pub message: String,
}

impl MapParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("cell {0} is outside the map")]
    OutOfBounds(Cell),
    #[error("cell {0} is blocked")]
    Blocked(Cell),
    #[error("target {to} is unreachable from {from}")]
    Unreachable { from: Cell, to: Cell },
    #[error("map has no passable cells")]
    Empty,
}

/// Passable/blocked cell grid with 4-connected unit-cost moves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: u32,
    height: u32,
    blocked: Vec<bool>,
}

impl GridMap {
    /// Builds a map from a row-major blocked mask.
    pub fn from_blocked(width: u32, height: u32, blocked: Vec<bool>) -> Result<Self, GridError> {
        assert_eq!(blocked.len(), (width as usize) * (height as usize), "mask size mismatch");
        if width == 0 || height == 0 || blocked.iter().all(|&b| b) {
            return Err(GridError::Empty);
        }
        Ok(Self { width, height, blocked })
    }

    /// Parses a bare body of rows (`.` passable, `@` blocked, ...) without a header.
    pub fn from_rows(rows: &[&str]) -> Result<Self, MapParseError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut text = format!("type octile\nheight {height}\nwidth {width}\nmap\n");
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        parse_map(&text)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.blocked.len()
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c.row as usize * self.width as usize + c.col as usize
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        let w = self.width as usize;
        Cell::new((index / w) as u32, (index % w) as u32)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.row < self.height && c.col < self.width
    }

    pub fn is_passable(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked[self.index(c)]
    }

    pub fn check_passable(&self, c: Cell) -> Result<(), GridError> {
        if !self.in_bounds(c) {
            Err(GridError::OutOfBounds(c))
        } else if self.blocked[self.index(c)] {
            Err(GridError::Blocked(c))
        } else {
            Ok(())
        }
    }

    pub fn passable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.blocked.len()).filter(|&i| !self.blocked[i]).map(|i| self.cell_at(i))
    }

    pub fn passable_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| !b).count()
    }

    /// Passable 4-neighbors in the fixed order up, left, right, down.
    pub fn neighbors(&self, c: Cell) -> Neighbors {
        let mut out = Neighbors::default();
        let candidates = [
            (c.row.checked_sub(1), Some(c.col)),
            (Some(c.row), c.col.checked_sub(1)),
            (Some(c.row), c.col.checked_add(1)),
            (c.row.checked_add(1), Some(c.col)),
        ];
        for (r, col) in candidates {
            if let (Some(r), Some(col)) = (r, col) {
                let n = Cell::new(r, col);
                if self.is_passable(n) {
                    out.push(n);
                }
            }
        }
        out
    }

    /// Connected components of passable cells, largest first (ties by lowest cell index).
    pub fn components(&self) -> Vec<Vec<Cell>> {
        let mut label = vec![usize::MAX; self.blocked.len()];
        let mut comps: Vec<Vec<Cell>> = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..self.blocked.len() {
            if self.blocked[start] || label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = Vec::new();
            label[start] = id;
            queue.push_back(self.cell_at(start));
            while let Some(c) = queue.pop_front() {
                members.push(c);
                for n in self.neighbors(c) {
                    let ni = self.index(n);
                    if label[ni] == usize::MAX {
                        label[ni] = id;
                        queue.push_back(n);
                    }
                }
            }
            members.sort();
            comps.push(members);
        }
        // stable sort keeps discovery order (lowest first cell) among equal sizes
        comps.sort_by_key(|c| std::cmp::Reverse(c.len()));
        comps
    }

    pub fn largest_component(&self) -> Vec<Cell> {
        self.components().into_iter().next().unwrap_or_default()
    }

    /// Longest finite shortest-path distance between two passable cells.
    pub fn diameter(&self) -> u32 {
        let cells: Vec<Cell> = self.passable_cells().collect();
        cells
            .par_iter()
            .map(|&c| bfs(self, c).into_iter().filter(|&d| d != UNREACHABLE).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Serializes back to MovingAI text.
    pub fn to_map_text(&self) -> String {
        let mut s = format!("type octile\nheight {}\nwidth {}\nmap\n", self.height, self.width);
        for r in 0..self.height {
            for c in 0..self.width {
                s.push(if self.is_passable(Cell::new(r, c)) { '.' } else { '@' });
            }
            s.push('\n');
        }
        s
    }
}

/// Up to four neighbors, stack allocated.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neighbors {
    cells: [Cell; 4],
    len: usize,
}

impl Neighbors {
    fn push(&mut self, c: Cell) {
        self.cells[self.len] = c;
        self.len += 1;
    }

    pub fn as_slice(&self) -> &[Cell] {
        &self.cells[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl IntoIterator for Neighbors {
    type Item = Cell;
    type IntoIter = std::iter::Take<std::array::IntoIter<Cell, 4>>;

    fn into_iter(self) -> Self::IntoIter {
        self.cells.into_iter().take(self.len)
    }
}

impl Default for Cell {
    fn default() -> Self {
        Cell::new(0, 0)
    }
}

/// Parses MovingAI `.map` text. `.` and `G` are passable; `@`, `O`, `T`, `W` are blocked.
pub fn parse_map(text: &str) -> Result<GridMap, MapParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut height: Option<u32> = None;
    let mut width: Option<u32> = None;
    let mut saw_type = false;
    let mut last_line = 0;

    loop {
        let Some((no, line)) = lines.next() else {
            return Err(MapParseError::new(last_line + 1, "missing `map` line"));
        };
        last_line = no;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let value = parts.next();
        match key {
            "type" => saw_type = true,
            "height" | "width" => {
                let v: u32 = value
                    .and_then(|v| v.parse().ok())
                    .filter(|&v| v > 0)
                    .ok_or_else(|| MapParseError::new(no, format!("invalid {key} value")))?;
                if key == "height" {
                    height = Some(v);
                } else {
                    width = Some(v);
                }
            }
            "map" => break,
            other => return Err(MapParseError::new(no, format!("unexpected header field `{other}`"))),
        }
    }
    if !saw_type {
        return Err(MapParseError::new(1, "missing `type` header"));
    }
    let height = height.ok_or_else(|| MapParseError::new(last_line, "missing `height` header"))?;
    let width = width.ok_or_else(|| MapParseError::new(last_line, "missing `width` header"))?;

    let mut blocked = Vec::with_capacity(width as usize * height as usize);
    let mut rows = 0u32;
    for (no, line) in lines {
        if rows == height {
            if line.trim().is_empty() {
                continue;
            }
            return Err(MapParseError::new(no, format!("more than {height} rows")));
        }
        let mut count = 0u32;
        for ch in line.chars() {
            let b = match ch {
                '.' | 'G' => false,
                '@' | 'O' | 'T' | 'W' => true,
                other => return Err(MapParseError::new(no, format!("unknown map character `{other}`"))),
            };
            blocked.push(b);
            count += 1;
        }
        if count != width {
            return Err(MapParseError::new(no, format!("row has {count} cells, expected {width}")));
        }
        rows += 1;
        last_line = no;
    }
    if rows != height {
        return Err(MapParseError::new(last_line + 1, format!("found {rows} rows, expected {height}")));
    }
    GridMap::from_blocked(width, height, blocked).map_err(|e| MapParseError::new(last_line, e.to_string()))
}

fn bfs(map: &GridMap, source: Cell) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; map.cell_count()];
    let mut queue = VecDeque::new();
    dist[map.index(source)] = 0;
    queue.push_back(source);
    while let Some(c) = queue.pop_front() {
        let d = dist[map.index(c)];
        for n in map.neighbors(c) {
            let ni = map.index(n);
            if dist[ni] == UNREACHABLE {
                dist[ni] = d + 1;
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Shortest-path distances from every cell to one target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    target: Cell,
    dist: Vec<u32>,
    width: u32,
}

impl DistanceField {
    pub fn target(&self) -> Cell {
        self.target
    }

    /// Distance from `c` to the target, or `None` when unreachable or off-map.
    #[inline]
    pub fn get(&self, c: Cell) -> Option<u32> {
        if c.col >= self.width {
            return None;
        }
        let i = c.row as usize * self.width as usize + c.col as usize;
        match self.dist.get(i) {
            Some(&d) if d != UNREACHABLE => Some(d),
            _ => None,
        }
    }

    /// Raw distance, [`UNREACHABLE`] when no path exists.
    #[inline]
    pub fn raw(&self, c: Cell) -> u32 {
        self.get(c).unwrap_or(UNREACHABLE)
    }
}

pub fn distance_field(map: &GridMap, target: Cell) -> Result<DistanceField, GridError> {
    map.check_passable(target)?;
    Ok(DistanceField { target, dist: bfs(map, target), width: map.width })
}

/// The next cell on the canonical shortest path from `v` toward `field`'s target:
/// `v` itself at the target, otherwise the first neighbor (fixed order) one step closer.
pub fn next_vertex(map: &GridMap, v: Cell, field: &DistanceField) -> Result<Cell, GridError> {
    let to = field.target();
    let d = field.get(v).ok_or(GridError::Unreachable { from: v, to })?;
    if d == 0 {
        return Ok(v);
    }
    map.neighbors(v).into_iter().find(|&n| field.get(n) == Some(d - 1)).ok_or(GridError::Unreachable { from: v, to })
}

/// Cells visited after leaving `v` along the canonical path, ending at the target.
/// For `v` at the target this is just the target.
pub fn canonical_path(map: &GridMap, v: Cell, field: &DistanceField) -> Result<Vec<Cell>, GridError> {
    let mut cur = v;
    let mut path = Vec::new();
    if cur == field.target() {
        path.push(cur);
        return Ok(path);
    }
    while cur != field.target() {
        cur = next_vertex(map, cur, field)?;
        path.push(cur);
    }
    Ok(path)
}

/// One distance field per target, shared by every agent of an instance.
#[derive(Debug, Clone)]
pub struct DistanceFields {
    fields: Vec<DistanceField>,
}

impl DistanceFields {
    pub fn build(map: &GridMap, targets: &[Cell]) -> Result<Self, GridError> {
        let fields = targets.par_iter().map(|&t| distance_field(map, t)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { fields })
    }

    #[inline]
    pub fn field(&self, target: usize) -> &DistanceField {
        &self.fields[target]
    }

    #[inline]
    pub fn dist(&self, from: Cell, target: usize) -> Option<u32> {
        self.fields[target].get(from)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DistanceField> {
        self.fields.iter()
    }
}
