//! Named benchmark maps.
//!
//! A catalog resolves a map name such as `maze-32-32-4` to a MovingAI file in a
//! directory when one is present. Otherwise it builds a deterministic procedural
//! stand-in with the same dimensions and topology class, flagged as a surrogate so
//! reports never pass it off as the original.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{parse_map, Cell, GridError, GridMap, MapParseError};

/// Directory override for real map files.
pub const MAPS_ENV: &str = "AMAPF_MAPS";

#[derive(Debug, Error)]
pub enum MapError {
    #[error("unknown map `{0}` and no file for it in the map directory")]
    Unknown(String),
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: MapParseError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapSource {
    File(PathBuf),
    Surrogate,
}

impl MapSource {
    pub fn is_surrogate(&self) -> bool {
        matches!(self, MapSource::Surrogate)
    }
}

impl fmt::Display for MapSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapSource::File(p) => write!(f, "{}", p.display()),
            MapSource::Surrogate => f.write_str("surrogate"),
        }
    }
}

/// Names with a procedural fallback.
pub const SURROGATE_NAMES: [&str; 5] = ["maze-32-32-4", "random-32-32-10", "room-64-64-16", "den312d", "den404d"];

#[derive(Debug, Clone, Default)]
pub struct MapCatalog {
    dir: Option<PathBuf>,
}

impl MapCatalog {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    /// Uses `$AMAPF_MAPS` when set.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(MAPS_ENV).map(PathBuf::from))
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn load(&self, name: &str) -> Result<(Arc<GridMap>, MapSource), MapError> {
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{name}.map"));
            if path.is_file() {
                return Ok((Arc::new(load_map_file(&path)?), MapSource::File(path)));
            }
        }
        surrogate(name).map(|m| (Arc::new(m), MapSource::Surrogate))
    }
}

pub fn load_map_file(path: &Path) -> Result<GridMap, MapError> {
    let text = std::fs::read_to_string(path).map_err(|source| MapError::Io { path: path.into(), source })?;
    parse_map(&text).map_err(|source| MapError::Parse { path: path.into(), source })
}

/// Procedural stand-in for a named benchmark map.
pub fn surrogate(name: &str) -> Result<GridMap, MapError> {
    let seed = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "maze-32-32-4" => maze(32, 32, 4, &mut rng),
        "random-32-32-10" => random_obstacles(32, 32, 0.10, &mut rng),
        "room-64-64-16" => rooms(64, 64, 16, &mut rng),
        "den312d" => cave(81, 65, &mut rng),
        "den404d" => cave(34, 77, &mut rng),
        _ => Err(MapError::Unknown(name.to_string())),
    }
}

/// Uniform random obstacles at the given density; blocked cells chosen without replacement.
pub fn random_obstacles(width: u32, height: u32, density: f64, rng: &mut impl Rng) -> Result<GridMap, MapError> {
    let total = (width * height) as usize;
    let blocked_count = (total as f64 * density).round() as usize;
    let mut idx: Vec<usize> = (0..total).collect();
    let (chosen, _) = idx.partial_shuffle(rng, blocked_count);
    let mut blocked = vec![false; total];
    for &i in chosen.iter() {
        blocked[i] = true;
    }
    Ok(GridMap::from_blocked(width, height, blocked)?)
}

/// Perfect maze (randomized depth-first carving) with `corridor`-wide passages and
/// one-cell walls. A partial last row or column of maze cells is kept.
pub fn maze(width: u32, height: u32, corridor: u32, rng: &mut impl Rng) -> Result<GridMap, MapError> {
    let pitch = corridor + 1;
    let cols = width.div_ceil(pitch) as usize;
    let rows = height.div_ceil(pitch) as usize;
    let mut blocked = vec![false; (width * height) as usize];
    let set = |blocked: &mut Vec<bool>, r: u32, c: u32, v: bool| {
        if r < height && c < width {
            blocked[(r * width + c) as usize] = v;
        }
    };
    // every wall line starts solid
    for r in 0..height {
        for c in 0..width {
            if r % pitch == corridor || c % pitch == corridor {
                set(&mut blocked, r, c, true);
            }
        }
    }
    let mut seen = vec![false; rows * cols];
    let mut stack = vec![(0usize, 0usize)];
    seen[0] = true;
    while let Some(&(r, c)) = stack.last() {
        let mut next: Vec<(usize, usize)> = Vec::with_capacity(4);
        if r > 0 {
            next.push((r - 1, c));
        }
        if c > 0 {
            next.push((r, c - 1));
        }
        if c + 1 < cols {
            next.push((r, c + 1));
        }
        if r + 1 < rows {
            next.push((r + 1, c));
        }
        next.retain(|&(nr, nc)| !seen[nr * cols + nc]);
        let Some(&(nr, nc)) = next.choose(rng) else {
            stack.pop();
            continue;
        };
        seen[nr * cols + nc] = true;
        // open the full-width wall segment between the two maze cells
        let (r0, c0) = ((r.min(nr)) as u32 * pitch, (c.min(nc)) as u32 * pitch);
        for i in 0..corridor {
            if nr != r {
                set(&mut blocked, r0 + corridor, c0 + i, false);
            } else {
                set(&mut blocked, r0 + i, c0 + corridor, false);
            }
        }
        stack.push((nr, nc));
    }
    Ok(GridMap::from_blocked(width, height, blocked)?)
}

/// Square rooms on a `pitch` lattice separated by one-cell walls; every wall segment
/// between adjacent rooms gets one door at a random offset, plus an extra door with
/// probability one half.
pub fn rooms(width: u32, height: u32, pitch: u32, rng: &mut impl Rng) -> Result<GridMap, MapError> {
    let wall = |x: u32| x % pitch == pitch - 1;
    let mut blocked = vec![false; (width * height) as usize];
    for r in 0..height {
        for c in 0..width {
            blocked[(r * width + c) as usize] = (wall(r) && r + 1 < height) || (wall(c) && c + 1 < width);
        }
    }
    let open = |blocked: &mut Vec<bool>, r: u32, c: u32| blocked[(r * width + c) as usize] = false;
    let rooms_r = height.div_ceil(pitch);
    let rooms_c = width.div_ceil(pitch);
    for rr in 0..rooms_r {
        for rc in 0..rooms_c {
            let (r0, c0) = (rr * pitch, rc * pitch);
            let doors = 1 + rng.gen_bool(0.5) as u32;
            if rc + 1 < rooms_c {
                for _ in 0..doors {
                    let r = r0 + rng.gen_range(0..pitch - 1);
                    open(&mut blocked, r.min(height - 1), c0 + pitch - 1);
                }
            }
            if rr + 1 < rooms_r {
                for _ in 0..doors {
                    let c = c0 + rng.gen_range(0..pitch - 1);
                    open(&mut blocked, r0 + pitch - 1, c.min(width - 1));
                }
            }
        }
    }
    Ok(GridMap::from_blocked(width, height, blocked)?)
}

/// Cave-like open map: 45% random fill smoothed by five rounds of the 4-5 cellular
/// automaton rule, with a solid border. Cells outside the largest component are
/// filled in.
pub fn cave(width: u32, height: u32, rng: &mut impl Rng) -> Result<GridMap, MapError> {
    let (w, h) = (width as i64, height as i64);
    let border = |r: i64, c: i64| r <= 0 || c <= 0 || r >= h - 1 || c >= w - 1;
    let mut solid: Vec<bool> = (0..h * w).map(|i| border(i / w, i % w) || rng.gen_bool(0.45)).collect();
    for _ in 0..5 {
        let prev = solid.clone();
        for r in 0..h {
            for c in 0..w {
                let mut walls = 0;
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (r + dr, c + dc);
                        if nr < 0 || nc < 0 || nr >= h || nc >= w || prev[(nr * w + nc) as usize] {
                            walls += 1;
                        }
                    }
                }
                solid[(r * w + c) as usize] = border(r, c) || walls >= 5;
            }
        }
    }
    let map = GridMap::from_blocked(width, height, solid)?;
    let keep: std::collections::HashSet<Cell> = map.largest_component().into_iter().collect();
    let blocked = (0..height * width).map(|i| !keep.contains(&Cell::new(i / width, i % width))).collect();
    Ok(GridMap::from_blocked(width, height, blocked)?)
}
