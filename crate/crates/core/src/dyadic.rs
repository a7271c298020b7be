//! Shifted dyadic grids `D_beta = { 2^-k ([0,1)^n + j + (-1)^k beta) }` with
//! `beta` in `{0, 1/3}^n`.
//!
//! Coordinates are exact: every corner is an integer multiple of
//! `1 / (3 * 2^SCALE_EXP)`, so containment and half-open boundary tests never
//! touch floating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellGrid, Cube, Region, MAX_DIM};

/// Exact coordinates are integers in units of `1 / (3 * 2^SCALE_EXP)`.
pub const SCALE_EXP: i32 = 60;
/// Finest representable level.
pub const MAX_LEVEL: i32 = SCALE_EXP;
/// Coarsest representable level.
pub const MIN_LEVEL: i32 = -40;

/// Shift vector as a bit mask: bit `a` set means `beta_a = 1/3`.
pub type Shift = u8;

/// Number of shifted grids in dimension `n`.
pub fn shift_count(n: usize) -> Shift {
    1 << n
}

fn sign(level: i32) -> i128 {
    if level.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

fn bit(beta: Shift, axis: usize) -> i128 {
    i128::from(beta >> axis & 1)
}

/// A cube of one of the grids `D_beta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub n: u8,
    pub beta: Shift,
    pub level: i32,
    pub index: [i64; MAX_DIM],
}

impl DyadicCube {
    pub fn new(n: usize, beta: Shift, level: i32, index: &[i64]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) || index.len() != n {
            return Err(Error::param(format!("bad dyadic cube dimension {n}")));
        }
        if beta >= shift_count(n) {
            return Err(Error::param(format!("shift mask {beta:#b} has bits beyond dimension {n}")));
        }
        check_level(level)?;
        let mut idx = [0; MAX_DIM];
        idx[..n].copy_from_slice(index);
        Ok(DyadicCube { n: n as u8, beta, level, index: idx })
    }

    pub fn dim(&self) -> usize {
        usize::from(self.n)
    }

    /// Side length `2^-k`.
    pub fn side(&self) -> f64 {
        2f64.powi(-self.level)
    }

    /// Side in exact units.
    pub fn side_exact(&self) -> i128 {
        3i128 << (SCALE_EXP - self.level)
    }

    /// Lower corner along `axis` in exact units:
    /// `2^-k (j + (-1)^k beta_a)` scaled by `3 * 2^SCALE_EXP`.
    pub fn lower_exact(&self, axis: usize) -> i128 {
        let unit = 1i128 << (SCALE_EXP - self.level);
        (3 * i128::from(self.index[axis]) + sign(self.level) * bit(self.beta, axis)) * unit
    }

    pub fn lower(&self) -> [f64; MAX_DIM] {
        let denom = 3.0 * 2f64.powi(SCALE_EXP);
        let mut out = [0.0; MAX_DIM];
        for (axis, slot) in out.iter_mut().enumerate().take(self.dim()) {
            *slot = self.lower_exact(axis) as f64 / denom;
        }
        out
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        self.n == other.n
            && (0..self.dim()).all(|a| {
                let lo = self.lower_exact(a);
                let olo = other.lower_exact(a);
                olo >= lo && olo + other.side_exact() <= lo + self.side_exact()
            })
    }

    /// Half-open containment of an exact box `[lower, lower + side)`.
    pub fn contains_exact_box(&self, lower: &[i128], side: i128) -> bool {
        (0..self.dim()).all(|a| {
            let lo = self.lower_exact(a);
            lower[a] >= lo && lower[a] + side <= lo + self.side_exact()
        })
    }

    pub fn intersects(&self, other: &DyadicCube) -> bool {
        (0..self.dim()).all(|a| {
            let (lo, olo) = (self.lower_exact(a), other.lower_exact(a));
            lo < olo + other.side_exact() && olo < lo + self.side_exact()
        })
    }

    /// The cube of `D_beta` at `level` containing the exact point.
    pub fn containing_point(n: usize, beta: Shift, level: i32, point: &[i128]) -> Result<Self> {
        check_level(level)?;
        let mut idx = [0i64; MAX_DIM];
        let unit = 1i128 << (SCALE_EXP - level);
        for axis in 0..n {
            let shifted = point[axis] - sign(level) * bit(beta, axis) * unit;
            idx[axis] = shifted.div_euclid(3 * unit) as i64;
        }
        DyadicCube::new(n, beta, level, &idx[..n])
    }

    /// The `2^n` children in row-major order of their offsets.
    pub fn children(&self) -> Result<Vec<DyadicCube>> {
        let level = self.level + 1;
        if level > MAX_LEVEL {
            return Err(Error::Range(format!("level {level} is finer than {MAX_LEVEL}")));
        }
        let n = self.dim();
        let half = self.side_exact() / 2;
        let mut out = Vec::with_capacity(1 << n);
        for offset in 0..(1usize << n) {
            let mut corner = [0i128; MAX_DIM];
            for (axis, slot) in corner.iter_mut().enumerate().take(n) {
                let step = (offset >> (n - 1 - axis)) & 1;
                *slot = self.lower_exact(axis) + half * step as i128;
            }
            let child = DyadicCube::containing_point(n, self.beta, level, &corner[..n])?;
            debug_assert_eq!(child.lower_exact(0), corner[0]);
            out.push(child);
        }
        Ok(out)
    }

    pub fn parent(&self) -> Result<DyadicCube> {
        let level = self.level - 1;
        if level < MIN_LEVEL {
            return Err(Error::Range(format!("level {level} is coarser than {MIN_LEVEL}")));
        }
        let corner: Vec<i128> = (0..self.dim()).map(|a| self.lower_exact(a)).collect();
        DyadicCube::containing_point(self.dim(), self.beta, level, &corner)
    }

    /// Cells of the grid covered by this cube, clipped to the box.
    ///
    /// `None` when the cube misses the box or is not cell-aligned (`k > L`).
    pub fn region(&self, grid: &CellGrid) -> Option<Region> {
        if self.level > grid.level() as i32 || grid.dim() != self.dim() {
            return None;
        }
        let cells_exp = SCALE_EXP - grid.level() as i32;
        let side_cells = (self.side_exact() >> cells_exp) as i64;
        let limit = grid.cells_per_side() as i64;
        let mut lo = [0; MAX_DIM];
        let mut hi = [1; MAX_DIM];
        let mut clipped = false;
        for axis in 0..grid.dim() {
            let start = (self.lower_exact(axis) >> cells_exp) as i64;
            let end = start + side_cells;
            if end <= 0 || start >= limit {
                return None;
            }
            clipped |= start < 0 || end > limit;
            lo[axis] = start.max(0) as usize;
            hi[axis] = end.min(limit) as usize;
        }
        let volume = self.side().powi(grid.dim() as i32);
        Some(Region { lo, hi, volume, clipped })
    }

    /// The cube as a grid cube, when it lies entirely inside the box.
    pub fn to_cube(&self, grid: &CellGrid) -> Option<Cube> {
        let region = self.region(grid)?;
        if !region.is_full() {
            return None;
        }
        Some(Cube { lower: region.lo, side: region.hi[0] - region.lo[0] })
    }

    /// Exact lower corner and side of a grid cube.
    pub fn exact_box(grid: &CellGrid, cube: &Cube) -> ([i128; MAX_DIM], i128) {
        let cell = 1i128 << (SCALE_EXP - grid.level() as i32);
        let mut lower = [0i128; MAX_DIM];
        for axis in 0..grid.dim() {
            lower[axis] = cube.lower[axis] as i128 * cell;
        }
        (lower, cube.side as i128 * cell)
    }
}

fn check_level(level: i32) -> Result<()> {
    if !(MIN_LEVEL..=MAX_LEVEL).contains(&level) {
        return Err(Error::Range(format!("level {level} outside [{MIN_LEVEL}, {MAX_LEVEL}]")));
    }
    Ok(())
}

/// JSON form: `beta` as a bit vector (1 means 1/3), the level and index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeRecord {
    pub beta: Vec<u8>,
    pub k: i32,
    pub j: Vec<i64>,
}

impl From<&DyadicCube> for CubeRecord {
    fn from(c: &DyadicCube) -> Self {
        CubeRecord {
            beta: (0..c.dim()).map(|a| c.beta >> a & 1).collect(),
            k: c.level,
            j: c.index[..c.dim()].to_vec(),
        }
    }
}

impl TryFrom<&CubeRecord> for DyadicCube {
    type Error = Error;

    fn try_from(r: &CubeRecord) -> Result<Self> {
        if r.beta.len() != r.j.len() || r.beta.iter().any(|&b| b > 1) {
            return Err(Error::Format("cube record beta must be a 0/1 vector matching j".into()));
        }
        let beta = r.beta.iter().enumerate().fold(0u8, |acc, (a, &b)| acc | (b << a));
        DyadicCube::new(r.j.len(), beta, r.k, &r.j)
    }
}

/// Levels `k` with `l(Q) <= 2^-k <= 6 l(Q)`, finest first.
fn candidate_levels(grid: &CellGrid, cube: &Cube) -> Vec<i32> {
    // in cells: 2^-k = 3 * 2^(L-k) cells
    let l = grid.level() as i32;
    let side = cube.side as i128;
    // a cube of at least one cell needs 2^-k >= 1 cell, hence k <= L + 1
    (MIN_LEVEL..=l + 1)
        .rev()
        .filter(|&k| {
            let cells_x2 = 3i128 << (l - k + 1);
            side * 2 <= cells_x2 && cells_x2 <= 12 * side
        })
        .collect()
}

/// Covering by shifted dyadic cubes: some `Q_beta` in some `D_beta` with
/// `Q` contained in `Q_beta` and `l(Q_beta) <= 6 l(Q)`.
///
/// Grids are scanned in increasing mask order and, within a grid, levels from
/// finest to coarsest; the first admissible cube is returned.
pub fn enclosing_dyadic(grid: &CellGrid, cube: &Cube) -> (Shift, DyadicCube) {
    let n = grid.dim();
    let (lower, side) = DyadicCube::exact_box(grid, cube);
    let levels = candidate_levels(grid, cube);
    for beta in 0..shift_count(n) {
        for &k in &levels {
            let q = DyadicCube::containing_point(n, beta, k, &lower[..n])
                .expect("candidate levels are in range");
            if q.contains_exact_box(&lower, side) {
                return (beta, q);
            }
        }
    }
    panic!("no shifted dyadic cube encloses {cube:?} within ratio 6; covering lemma violated");
}

/// Side ratio `l(Q_beta) / l(Q)` as an exact fraction `(num, den)`.
pub fn side_ratio(grid: &CellGrid, cube: &Cube, q: &DyadicCube) -> (i128, i128) {
    let (_, side) = DyadicCube::exact_box(grid, cube);
    (q.side_exact(), side)
}
