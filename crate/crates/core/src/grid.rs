//! Grid geometry, the map file format and the seeded terrain generator.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A grid cell. `x` is the column, `y` the row.
///
/// Cells order lexicographically by `(row, column)`, which fixes every
/// tie-break that iterates over cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Cell center as a GP input, in cell units.
    pub fn point(self) -> [f64; 2] {
        [self.x as f64, self.y as f64]
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn euclidean(self, other: Cell) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        (dx * dx + dy * dy).sqrt()
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// One-cell moves. `Up` increases the row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    /// The move from `from` to an adjacent `to`, if they are 4-neighbors.
    pub fn between(from: Cell, to: Cell) -> Option<Action> {
        match (to.x as isize - from.x as isize, to.y as isize - from.y as isize) {
            (1, 0) => Some(Action::Right),
            (-1, 0) => Some(Action::Left),
            (0, 1) => Some(Action::Up),
            (0, -1) => Some(Action::Down),
            _ => None,
        }
    }

    /// Applies the move, staying put at the grid border.
    pub fn apply(self, c: Cell, dims: GridDims) -> Cell {
        let next = match self {
            Action::Up => Cell::new(c.x, c.y + 1),
            Action::Down => Cell::new(c.x, c.y.wrapping_sub(1)),
            Action::Left => Cell::new(c.x.wrapping_sub(1), c.y),
            Action::Right => Cell::new(c.x + 1, c.y),
        };
        if dims.contains(next) {
            next
        } else {
            c
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Up => "UP",
            Action::Down => "DOWN",
            Action::Left => "LEFT",
            Action::Right => "RIGHT",
        })
    }
}

/// Width/height of a grid; all the index arithmetic lives here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDims {
    pub width: usize,
    pub height: usize,
}

impl GridDims {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|i| self.cell(i))
    }

    /// In-bounds 4-neighbors, in the order left, right, down (y-1), up (y+1).
    pub fn neighbors4(&self, c: Cell) -> impl Iterator<Item = Cell> {
        let dims = *self;
        let cand = [
            (c.x.checked_sub(1), Some(c.y)),
            (c.x.checked_add(1), Some(c.y)),
            (Some(c.x), c.y.checked_sub(1)),
            (Some(c.x), c.y.checked_add(1)),
        ];
        cand.into_iter().filter_map(move |(x, y)| {
            let cell = Cell::new(x?, y?);
            dims.contains(cell).then_some(cell)
        })
    }

    /// In-bounds cells of the `size`x`size` patch centered at `center`,
    /// row-major.
    pub fn window(&self, center: Cell, size: usize) -> Vec<Cell> {
        let half = size / 2;
        let x0 = center.x.saturating_sub(half);
        let y0 = center.y.saturating_sub(half);
        let x1 = (center.x + half).min(self.width.saturating_sub(1));
        let y1 = (center.y + half).min(self.height.saturating_sub(1));
        let mut out = Vec::with_capacity(size * size);
        for y in y0..=y1 {
            for x in x0..=x1 {
                out.push(Cell::new(x, y));
            }
        }
        out
    }

    /// All cell centers as GP inputs, row-major.
    pub fn points(&self) -> Vec<[f64; 2]> {
        self.cells().map(Cell::point).collect()
    }
}

/// Dense field of cell values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    dims: GridDims,
    values: Vec<f64>,
}

impl GridMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("map dimensions must be positive".into()));
        }
        if values.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "expected {} values for a {width}x{height} map, got {}",
                width * height,
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ValueOutOfRange { row: i / width, col: i % width, value: v });
            }
        }
        Ok(Self { dims: GridDims::new(width, height), values })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: Cell) -> f64 {
        self.values[self.dims.index(c)]
    }

    /// Serializes in the map file format: `H W` header, then `H` rows of `W`
    /// comma-separated values, LF line endings.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.height(), self.width());
        for row in self.values.chunks(self.width()) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    /// Parses the map file format. A file without the `H W` header line is
    /// accepted as plain CSV.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .split('\n')
            .enumerate()
            .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        let Some(&(first_no, first)) = lines.first() else {
            return Err(Error::Parse { line: 1, message: "empty map file".into() });
        };
        let header: Option<(usize, usize)> = if first.contains(',') {
            None
        } else {
            let parts: Vec<&str> = first.split_whitespace().collect();
            match parts.as_slice() {
                [h, w] => Some((parse_dim(h, first_no)?, parse_dim(w, first_no)?)),
                _ => {
                    return Err(Error::Parse {
                        line: first_no,
                        message: format!("expected header `H W`, got {first:?}"),
                    })
                }
            }
        };
        let rows = if header.is_some() { &lines[1..] } else { &lines[..] };
        let (height, width) = match header {
            Some(hw) => hw,
            None => (rows.len(), rows[0].1.split(',').count()),
        };
        if rows.len() != height {
            let line = rows.last().map_or(first_no, |r| r.0);
            return Err(Error::Parse {
                line,
                message: format!("expected {height} rows, found {}", rows.len()),
            });
        }
        let mut values = Vec::with_capacity(width * height);
        for (row, &(line_no, line)) in rows.iter().enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("row {row} has {} values, expected {width}", fields.len()),
                });
            }
            for (col, f) in fields.iter().enumerate() {
                let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("row {row}, column {col}: not a number: {f:?}"),
                })?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::ValueOutOfRange { row, col, value: v });
                }
                values.push(v);
            }
        }
        Self::new(width, height, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }

    /// Seeded synthetic terrain: a sum of Gaussian bumps of random position,
    /// width and sign, min-max normalized to `[0, 1]`.
    pub fn generate(width: usize, height: usize, seed: u64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("map dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_bumps = (width * height / 48).max(4);
        let max_r = (width.max(height) as f64 / 6.0).max(2.0);
        let bumps: Vec<(f64, f64, f64, f64)> = (0..n_bumps)
            .map(|_| {
                let cx = rng.random_range(0.0..width as f64);
                let cy = rng.random_range(0.0..height as f64);
                let r = rng.random_range(1.5..max_r);
                let a = rng.random_range(-1.0..1.0);
                (cx, cy, r, a)
            })
            .collect();
        let mut field: Vec<f64> = (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as f64, (i / width) as f64);
                bumps
                    .iter()
                    .map(|&(cx, cy, r, a)| {
                        let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                        a * (-0.5 * d2 / (r * r)).exp()
                    })
                    .sum()
            })
            .collect();
        let lo = field.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        for v in &mut field {
            *v = ((*v - lo) / span).clamp(0.0, 1.0);
        }
        Self::new(width, height, field)
    }
}

fn parse_dim(s: &str, line: usize) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::Parse { line, message: format!("invalid dimension {s:?}") }),
    }
}

/// Where a map comes from: a file, or the generator spec `WxH:seed`.
#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    File(std::path::PathBuf),
    Generated { width: usize, height: usize, seed: u64 },
}

impl MapSource {
    pub fn parse_generator(spec: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("generator spec must look like WxH:seed, got {spec:?}"));
        let (dims, seed) = spec.split_once(':').ok_or_else(bad)?;
        let (w, h) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
        let width: usize = w.trim().parse().map_err(|_| bad())?;
        let height: usize = h.trim().parse().map_err(|_| bad())?;
        let seed: u64 = seed.trim().parse().map_err(|_| bad())?;
        Ok(Self::Generated { width, height, seed })
    }

    pub fn load(&self) -> Result<GridMap> {
        match self {
            Self::File(p) => GridMap::load(p),
            Self::Generated { width, height, seed } => GridMap::generate(*width, *height, *seed),
        }
    }
}

impl fmt::Display for MapSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::File(p) => write!(f, "{}", p.display()),
            Self::Generated { width, height, seed } => write!(f, "{width}x{height}:{seed}"),
        }
    }
}
