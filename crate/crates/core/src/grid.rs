//! Piecewise-constant fields on a cell-aligned box and exact cube integrals.
//!
//! The box is `[0, 2^K)^n`, split into `3 * 2^(K+L)` cells per side of width
//! `h = 2^-L / 3`. The factor three makes every cube of both the standard and
//! the one-third-shifted dyadic grids at levels `k <= L` a union of cells, so
//! every cube integral below is a finite sum of cell values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod io;

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// Largest supported `K + L`; keeps `cells_per_side` well inside `i64`.
pub const MAX_RESOLUTION_EXP: u32 = 24;

/// Geometry of the sampled box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellGrid {
    n: usize,
    domain_exp: u32,
    level: u32,
}

impl CellGrid {
    pub fn new(n: usize, domain_exp: u32, level: u32) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::param(format!("dimension must be in 1..={MAX_DIM}, got {n}")));
        }
        if domain_exp + level > MAX_RESOLUTION_EXP {
            return Err(Error::param(format!(
                "K + L must not exceed {MAX_RESOLUTION_EXP}, got {}",
                domain_exp + level
            )));
        }
        let grid = CellGrid { n, domain_exp, level };
        if grid.cells_per_side().checked_pow(n as u32).is_none() {
            return Err(Error::param("cell count overflows"));
        }
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `K`: the box is `[0, 2^K)^n`.
    pub fn domain_exp(&self) -> u32 {
        self.domain_exp
    }

    /// `L`: the finest dyadic level that is cell-aligned.
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cells_per_side(&self) -> usize {
        3usize << (self.domain_exp + self.level)
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_side().pow(self.n as u32)
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / (3.0 * 2f64.powi(self.level as i32))
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_width().powi(self.n as i32)
    }

    pub fn domain_side(&self) -> f64 {
        2f64.powi(self.domain_exp as i32)
    }

    /// Row-major multi-index of a linear cell index; axis 0 varies slowest.
    pub fn cell_coords(&self, mut index: usize) -> [usize; MAX_DIM] {
        let side = self.cells_per_side();
        let mut out = [0; MAX_DIM];
        for axis in (0..self.n).rev() {
            out[axis] = index % side;
            index /= side;
        }
        out
    }

    pub fn cell_index(&self, coords: &[usize]) -> usize {
        let side = self.cells_per_side();
        coords[..self.n].iter().fold(0, |acc, &c| acc * side + c)
    }

    pub fn cell_center(&self, coords: &[usize]) -> [f64; MAX_DIM] {
        let h = self.cell_width();
        let mut out = [0.0; MAX_DIM];
        for axis in 0..self.n {
            out[axis] = (coords[axis] as f64 + 0.5) * h;
        }
        out
    }

    /// The same box refined once (`L + 1`).
    pub fn refined(&self) -> Result<Self> {
        CellGrid::new(self.n, self.domain_exp, self.level + 1)
    }

    /// The whole box as a cube.
    pub fn whole(&self) -> Cube {
        Cube { lower: [0; MAX_DIM], side: self.cells_per_side() }
    }
}

/// A cell-aligned cube inside the grid box, in cell units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube {
    pub lower: [usize; MAX_DIM],
    pub side: usize,
}

impl Cube {
    pub fn new(grid: &CellGrid, lower: &[usize], side: usize) -> Result<Self> {
        if lower.len() != grid.dim() {
            return Err(Error::domain(format!(
                "cube corner has {} coordinates, grid dimension is {}",
                lower.len(),
                grid.dim()
            )));
        }
        let mut corner = [0; MAX_DIM];
        corner[..lower.len()].copy_from_slice(lower);
        let cube = Cube { lower: corner, side };
        cube.check(grid)?;
        Ok(cube)
    }

    pub fn check(&self, grid: &CellGrid) -> Result<()> {
        if self.side == 0 {
            return Err(Error::domain("cube side must be at least one cell"));
        }
        let n = grid.cells_per_side();
        for axis in 0..grid.dim() {
            if self.lower[axis] + self.side > n {
                return Err(Error::domain(format!(
                    "cube [{:?}, side {}) leaves the box of {} cells per side",
                    &self.lower[..grid.dim()],
                    self.side,
                    n
                )));
            }
        }
        Ok(())
    }

    pub fn volume(&self, grid: &CellGrid) -> f64 {
        (self.side as f64 * grid.cell_width()).powi(grid.dim() as i32)
    }

    pub fn region(&self, grid: &CellGrid) -> Region {
        let mut hi = [1; MAX_DIM];
        for axis in 0..grid.dim() {
            hi[axis] = self.lower[axis] + self.side;
        }
        Region { lo: self.lower, hi, volume: self.volume(grid), clipped: false }
    }

    pub fn contains_cell(&self, grid: &CellGrid, cell: &[usize]) -> bool {
        (0..grid.dim()).all(|a| cell[a] >= self.lower[a] && cell[a] < self.lower[a] + self.side)
    }
}

/// The part of a cube that lies inside the box, together with the volume of
/// the whole cube. Fields vanish outside the box, so integrals over a cube
/// are integrals over its region while averages divide by `volume`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: [usize; MAX_DIM],
    pub hi: [usize; MAX_DIM],
    pub volume: f64,
    pub clipped: bool,
}

impl Region {
    pub fn contains_cell(&self, n: usize, cell: &[usize]) -> bool {
        (0..n).all(|a| cell[a] >= self.lo[a] && cell[a] < self.hi[a])
    }

    pub fn cell_count(&self, n: usize) -> usize {
        (0..n).map(|a| self.hi[a] - self.lo[a]).product()
    }

    /// Whether the region is the entire cube, i.e. nothing was clipped.
    pub fn is_full(&self) -> bool {
        !self.clipped
    }

    /// Linear indices of the cells of the region, row-major.
    pub fn cells(&self, grid: &CellGrid) -> Vec<usize> {
        let n = grid.dim();
        let mut out = Vec::with_capacity(self.cell_count(n));
        let mut cur = self.lo;
        if (0..n).any(|a| self.hi[a] <= self.lo[a]) {
            return out;
        }
        loop {
            out.push(grid.cell_index(&cur));
            let mut axis = n;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                cur[axis] += 1;
                if cur[axis] < self.hi[axis] {
                    break;
                }
                cur[axis] = self.lo[axis];
            }
        }
    }
}

/// Per-cell values on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: CellGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: CellGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::domain(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite field value at cell {i}")));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: CellGrid, value: f64) -> Self {
        Field { grid, values: vec![value; grid.cell_count()] }
    }

    pub fn from_fn(grid: CellGrid, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let values = (0..grid.cell_count()).map(|i| f(&grid.cell_coords(i))).collect();
        Field::new(grid, values)
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::domain("fields live on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn from(v: f64) -> Self {
        DoubleDouble { hi: v, lo: 0.0 }
    }

    fn add(self, other: Self) -> Self {
        let s = self.hi + other.hi;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (other.hi - bb);
        let lo = err + self.lo + other.lo;
        let hi = s + lo;
        DoubleDouble { hi, lo: lo - (hi - s) }
    }

    fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Summed-area table with double-double entries.
///
/// Prefix sums are accumulated axis by axis (axis 0 first), so the table and
/// every query are bit-reproducible. Inclusion-exclusion is done in
/// double-double arithmetic; cancellation between large prefix sums does not
/// cost accuracy on small cubes.
#[derive(Clone, Debug)]
pub struct SummedAreaTable {
    grid: CellGrid,
    stride: [usize; MAX_DIM],
    table: Vec<DoubleDouble>,
}

impl SummedAreaTable {
    pub fn new(field: &Field) -> Self {
        let grid = field.grid;
        let n = grid.dim();
        let side = grid.cells_per_side() + 1;
        let mut stride = [0; MAX_DIM];
        let mut s = 1;
        for axis in (0..n).rev() {
            stride[axis] = s;
            s *= side;
        }
        let mut table = vec![DoubleDouble::default(); s];
        for (i, &v) in field.values.iter().enumerate() {
            let c = grid.cell_coords(i);
            let idx: usize = (0..n).map(|a| (c[a] + 1) * stride[a]).sum();
            table[idx] = DoubleDouble::from(v);
        }
        for axis in 0..n {
            let st = stride[axis];
            for idx in 0..table.len() {
                let coord = (idx / st) % side;
                if coord > 0 {
                    table[idx] = table[idx].add(table[idx - st]);
                }
            }
        }
        SummedAreaTable { grid, stride, table }
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    /// Sum of cell values over the region (not scaled by cell volume).
    pub fn cell_sum(&self, region: &Region) -> f64 {
        let n = self.grid.dim();
        if (0..n).any(|a| region.hi[a] <= region.lo[a]) {
            return 0.0;
        }
        let mut acc = DoubleDouble::default();
        for corner in 0..(1usize << n) {
            let mut idx = 0;
            let mut lows = 0;
            for axis in 0..n {
                if corner >> axis & 1 == 1 {
                    idx += region.lo[axis] * self.stride[axis];
                    lows += 1;
                } else {
                    idx += region.hi[axis] * self.stride[axis];
                }
            }
            let term = self.table[idx];
            acc = if lows % 2 == 0 { acc.add(term) } else { acc.add(term.neg()) };
        }
        acc.value()
    }

    /// Integral of the field over the region.
    pub fn integral(&self, region: &Region) -> f64 {
        self.cell_sum(region) * self.grid.cell_volume()
    }
}

/// `h^n` times the sum of the field over the cube.
pub fn integrate(field: &Field, cube: &Cube) -> Result<f64> {
    cube.check(&field.grid)?;
    Ok(SummedAreaTable::new(field).integral(&cube.region(&field.grid)))
}

/// Functions `f_1..f_m` and weights `w_1..w_m` sampled on one grid.
#[derive(Clone, Debug)]
pub struct SampledFunctions {
    grid: CellGrid,
    functions: Vec<Field>,
    weights: Vec<Field>,
    function_sats: Vec<SummedAreaTable>,
}

impl SampledFunctions {
    pub fn new(functions: Vec<Field>, weights: Vec<Field>) -> Result<Self> {
        let first = functions
            .first()
            .ok_or_else(|| Error::param("at least one function is required"))?;
        let grid = first.grid;
        if weights.len() != functions.len() {
            return Err(Error::param(format!(
                "{} functions but {} weights",
                functions.len(),
                weights.len()
            )));
        }
        for (i, f) in functions.iter().enumerate() {
            if f.grid != grid {
                return Err(Error::domain(format!("function {} is on a different grid", i + 1)));
            }
            if let Some(c) = f.values.iter().position(|&v| v < 0.0) {
                return Err(Error::param(format!("function {} is negative at cell {c}", i + 1)));
            }
        }
        for (i, w) in weights.iter().enumerate() {
            if w.grid != grid {
                return Err(Error::domain(format!("weight {} is on a different grid", i + 1)));
            }
            if let Some(c) = w.values.iter().position(|&v| v <= 0.0) {
                return Err(Error::param(format!("weight {} is not positive at cell {c}", i + 1)));
            }
        }
        let function_sats = functions.iter().map(SummedAreaTable::new).collect();
        Ok(SampledFunctions { grid, functions, weights, function_sats })
    }

    /// Functions with unit weights.
    pub fn unweighted(functions: Vec<Field>) -> Result<Self> {
        let grid = functions
            .first()
            .map(|f| f.grid)
            .ok_or_else(|| Error::param("at least one function is required"))?;
        let weights = vec![Field::constant(grid, 1.0); functions.len()];
        Self::new(functions, weights)
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.functions.len()
    }

    pub fn functions(&self) -> &[Field] {
        &self.functions
    }

    pub fn weights(&self) -> &[Field] {
        &self.weights
    }

    pub fn function_tables(&self) -> &[SummedAreaTable] {
        &self.function_sats
    }

    /// Replace every `f_i` by `f_i^power`.
    pub fn powered(&self, power: f64) -> Result<Self> {
        let fs = self.functions.iter().map(|f| f.map(|v| v.powf(power))).collect();
        Self::new(fs, self.weights.clone())
    }

    pub fn with_functions(&self, functions: Vec<Field>) -> Result<Self> {
        Self::new(functions, self.weights.clone())
    }
}

pub(crate) fn check_alpha(alpha: f64, m: usize, n: usize) -> Result<()> {
    let top = (m * n) as f64;
    if !(alpha >= 0.0 && alpha < top) {
        return Err(Error::param(format!("alpha must lie in [0, mn) = [0, {top}), got {alpha}")));
    }
    Ok(())
}

/// `prod_i |Q|^(alpha/(mn) - 1) * integral_Q f_i` over a region, using the
/// region's full-cube volume.
pub fn product_average_region(
    tables: &[SummedAreaTable],
    region: &Region,
    alpha: f64,
    n: usize,
) -> f64 {
    let m = tables.len();
    let scale = region.volume.powf(alpha / (m * n) as f64 - 1.0);
    tables.iter().fold(1.0, |acc, t| acc * (scale * t.integral(region)))
}

/// The `alpha`-adjusted product of averages of the functions over a cube.
pub fn product_average(fs: &SampledFunctions, cube: &Cube, alpha: f64) -> Result<f64> {
    check_alpha(alpha, fs.m(), fs.grid.dim())?;
    cube.check(&fs.grid)?;
    Ok(product_average_region(&fs.function_sats, &cube.region(&fs.grid), alpha, fs.grid.dim()))
}

/// `(integral |field|^p weight)^(1/p)`.
pub fn lp_norm(field: &Field, weight: &Field, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::param(format!("exponent must be positive, got {p}")));
    }
    if field.grid != weight.grid {
        return Err(Error::domain("field and weight live on different grids"));
    }
    let sum: f64 = field
        .values
        .iter()
        .zip(&weight.values)
        .map(|(&f, &w)| f.abs().powf(p) * w)
        .sum();
    Ok((sum * field.grid.cell_volume()).powf(1.0 / p))
}

/// `sup_lambda lambda * weight({|field| > lambda})^(1/q)`.
///
/// On piecewise-constant data the supremum is approached as `lambda` rises
/// to an attained value `v`, where the level set is `{|field| >= v}`.
pub fn weak_norm(field: &Field, weight: &Field, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::param(format!("exponent must be positive, got {q}")));
    }
    if field.grid != weight.grid {
        return Err(Error::domain("field and weight live on different grids"));
    }
    let mut pairs: Vec<(f64, f64)> =
        field.values.iter().zip(&weight.values).map(|(&f, &w)| (f.abs(), w)).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let vol = field.grid.cell_volume();
    let mut mass = 0.0;
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        if v <= 0.0 {
            break;
        }
        while i < pairs.len() && pairs[i].0 == v {
            mass += pairs[i].1;
            i += 1;
        }
        best = best.max(v * (mass * vol).powf(1.0 / q));
    }
    Ok(best)
}
