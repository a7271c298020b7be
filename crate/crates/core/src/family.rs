//! Finite cube families over which all suprema are taken.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{shift_count, DyadicCube, Shift};
use crate::error::{Error, Result};
use crate::grid::{CellGrid, Cube, Region, MAX_DIM};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CubeFamily {
    /// Every cube of every shifted grid `D_beta` at levels `-K-2..=L` that
    /// meets the box.
    #[default]
    DyadicUnion,
    /// Cubes of one grid `D_beta` at levels `-K-2..=L` that meet the box.
    Dyadic { beta: Shift },
    /// Every cell-aligned cube inside the box.
    AllCubes,
    Explicit { cubes: Vec<Cube> },
}

/// One cube of a family, as seen from the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Member {
    pub region: Region,
    pub origin: Origin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Dyadic(DyadicCube),
    Cube(Cube),
}

impl Origin {
    pub fn describe(&self, n: usize) -> String {
        match self {
            Origin::Dyadic(q) => {
                let beta: Vec<u8> = (0..n).map(|a| q.beta >> a & 1).collect();
                format!("D{beta:?} k={} j={:?}", q.level, &q.index[..n])
            }
            Origin::Cube(c) => format!("cube lower={:?} side={}", &c.lower[..n], c.side),
        }
    }
}

/// Range of cube indices per axis at one dyadic level, and the cell-unit
/// geometry needed to map cells to cubes.
#[derive(Clone, Copy, Debug)]
struct LevelLayout {
    level: i32,
    beta: Shift,
    /// `2^(L-k)`
    unit: i64,
    j_lo: [i64; MAX_DIM],
    extent: [usize; MAX_DIM],
}

impl LevelLayout {
    fn new(grid: &CellGrid, beta: Shift, level: i32) -> Self {
        let unit = 1i64 << (grid.level() as i32 - level);
        let last = grid.cells_per_side() as i64 - 1;
        let mut j_lo = [0; MAX_DIM];
        let mut extent = [1; MAX_DIM];
        let mut lay = LevelLayout { level, beta, unit, j_lo, extent };
        for axis in 0..grid.dim() {
            j_lo[axis] = lay.index_of(0, axis);
            extent[axis] = (lay.index_of(last, axis) - j_lo[axis] + 1) as usize;
        }
        lay.j_lo = j_lo;
        lay.extent = extent;
        lay
    }

    /// Index along `axis` of the level cube containing cell coordinate `c`.
    fn index_of(&self, c: i64, axis: usize) -> i64 {
        let b = i64::from(self.beta >> axis & 1);
        let s = if self.level.rem_euclid(2) == 0 { 1 } else { -1 };
        (c - s * b * self.unit).div_euclid(3 * self.unit)
    }

    fn len(&self, n: usize) -> usize {
        self.extent[..n].iter().product()
    }

    fn flat(&self, n: usize, idx: &[i64]) -> usize {
        (0..n).fold(0, |acc, a| acc * self.extent[a] + (idx[a] - self.j_lo[a]) as usize)
    }

    fn unflat(&self, n: usize, mut flat: usize) -> [i64; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for a in (0..n).rev() {
            out[a] = self.j_lo[a] + (flat % self.extent[a]) as i64;
            flat /= self.extent[a];
        }
        out
    }

    fn cube(&self, n: usize, idx: &[i64]) -> DyadicCube {
        DyadicCube::new(n, self.beta, self.level, &idx[..n]).expect("level within range")
    }
}

/// Levels `-K-2..=L`. Below `-K-2` every grid has a single cube containing
/// the box at each level and averages only shrink, so nothing is lost.
fn dyadic_levels(grid: &CellGrid) -> std::ops::RangeInclusive<i32> {
    -(grid.domain_exp() as i32) - 2..=grid.level() as i32
}

fn grids_of(family: &CubeFamily, n: usize) -> Vec<Shift> {
    match family {
        CubeFamily::DyadicUnion => (0..shift_count(n)).collect(),
        CubeFamily::Dyadic { beta } => vec![*beta],
        _ => Vec::new(),
    }
}

impl CubeFamily {
    pub fn describe(&self) -> String {
        match self {
            CubeFamily::DyadicUnion => "union of all shifted dyadic grids, levels -K-2..=L".into(),
            CubeFamily::Dyadic { beta } => format!("dyadic grid beta mask {beta:#b}, levels -K-2..=L"),
            CubeFamily::AllCubes => "all cell-aligned cubes inside the box".into(),
            CubeFamily::Explicit { cubes } => format!("explicit list of {} cubes", cubes.len()),
        }
    }

    pub fn validate(&self, grid: &CellGrid) -> Result<()> {
        match self {
            CubeFamily::Dyadic { beta } if *beta >= shift_count(grid.dim()) => {
                Err(Error::param(format!("shift mask {beta:#b} exceeds dimension {}", grid.dim())))
            }
            CubeFamily::Explicit { cubes } => {
                if cubes.is_empty() {
                    return Err(Error::param("cube family is empty"));
                }
                cubes.iter().try_for_each(|c| c.check(grid))
            }
            _ => Ok(()),
        }
    }

    /// Number of members; what a sweep over the family costs.
    pub fn member_count(&self, grid: &CellGrid) -> u128 {
        let n = grid.dim();
        match self {
            CubeFamily::DyadicUnion | CubeFamily::Dyadic { .. } => grids_of(self, n)
                .into_iter()
                .flat_map(|b| dyadic_levels(grid).map(move |k| (b, k)))
                .map(|(b, k)| LevelLayout::new(grid, b, k).len(n) as u128)
                .sum(),
            CubeFamily::AllCubes => {
                let side = grid.cells_per_side() as u128;
                (1..=side).map(|l| (side - l + 1).pow(n as u32)).sum()
            }
            CubeFamily::Explicit { cubes } => cubes.len() as u128,
        }
    }

    /// All members in canonical order: grids by mask, levels coarse to fine,
    /// indices row-major; all-cubes by side then corner.
    pub fn members(&self, grid: &CellGrid) -> Result<Vec<Member>> {
        self.validate(grid)?;
        let n = grid.dim();
        let mut out = Vec::new();
        match self {
            CubeFamily::DyadicUnion | CubeFamily::Dyadic { .. } => {
                for beta in grids_of(self, n) {
                    for level in dyadic_levels(grid) {
                        let lay = LevelLayout::new(grid, beta, level);
                        for flat in 0..lay.len(n) {
                            let q = lay.cube(n, &lay.unflat(n, flat));
                            let region = q.region(grid).expect("layout cubes meet the box");
                            out.push(Member { region, origin: Origin::Dyadic(q) });
                        }
                    }
                }
            }
            CubeFamily::AllCubes => {
                let side = grid.cells_per_side();
                for l in 1..=side {
                    let positions = side - l + 1;
                    for flat in 0..positions.pow(n as u32) {
                        let mut lower = [0; MAX_DIM];
                        let mut rest = flat;
                        for a in (0..n).rev() {
                            lower[a] = rest % positions;
                            rest /= positions;
                        }
                        let cube = Cube { lower, side: l };
                        out.push(Member { region: cube.region(grid), origin: Origin::Cube(cube) });
                    }
                }
            }
            CubeFamily::Explicit { cubes } => {
                for c in cubes {
                    out.push(Member { region: c.region(grid), origin: Origin::Cube(*c) });
                }
            }
        }
        Ok(out)
    }

    /// Members lying entirely inside the box.
    pub fn inside_members(&self, grid: &CellGrid) -> Result<Vec<Member>> {
        let all = self.members(grid)?;
        let inside: Vec<Member> = all.into_iter().filter(|m| m.region.is_full()).collect();
        if inside.is_empty() {
            return Err(Error::param("cube family has no cube inside the box"));
        }
        Ok(inside)
    }

    /// `out[x] = max { value(Q) : Q in family, x in Q }` per cell.
    ///
    /// Dyadic families use a top-down pass per grid: each level keeps the best
    /// value seen along the ancestor chain. The all-cubes family uses a
    /// separable sliding-window maximum per side length.
    pub fn sup_field<F>(&self, grid: &CellGrid, value: F) -> Result<Vec<f64>>
    where
        F: Fn(&Region) -> f64 + Sync,
    {
        self.validate(grid)?;
        let n = grid.dim();
        let cells = grid.cell_count();
        let mut out = vec![f64::NEG_INFINITY; cells];
        match self {
            CubeFamily::DyadicUnion | CubeFamily::Dyadic { .. } => {
                for beta in grids_of(self, n) {
                    let best = dyadic_tree_pass(grid, beta, &value);
                    for (o, b) in out.iter_mut().zip(best) {
                        *o = o.max(b);
                    }
                }
            }
            CubeFamily::AllCubes => {
                let side = grid.cells_per_side();
                for l in 1..=side {
                    let positions = side - l + 1;
                    let corners: Vec<f64> = (0..positions.pow(n as u32))
                        .into_par_iter()
                        .map(|flat| {
                            let mut lower = [0; MAX_DIM];
                            let mut rest = flat;
                            for a in (0..n).rev() {
                                lower[a] = rest % positions;
                                rest /= positions;
                            }
                            value(&Cube { lower, side: l }.region(grid))
                        })
                        .collect();
                    let spread = window_max(corners, n, positions, side, l);
                    for (o, b) in out.iter_mut().zip(spread) {
                        *o = o.max(b);
                    }
                }
            }
            CubeFamily::Explicit { cubes } => {
                let values: Vec<f64> = cubes.iter().map(|c| value(&c.region(grid))).collect();
                for (c, v) in cubes.iter().zip(values) {
                    for idx in c.region(grid).cells(grid) {
                        out[idx] = out[idx].max(v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// `out[x] = max { value(x, Q) : Q in family, x in Q }` for values that
    /// depend on the point as well as the cube.
    pub fn sup_at_cells<F>(&self, grid: &CellGrid, value: F) -> Result<Vec<f64>>
    where
        F: Fn(usize, &Region) -> f64 + Sync,
    {
        let cover = self.cover(grid)?;
        let out = (0..grid.cell_count())
            .into_par_iter()
            .map(|cell| {
                let mut best = f64::NEG_INFINITY;
                cover.for_each(cell, |r| best = best.max(value(cell, r)));
                best
            })
            .collect();
        Ok(out)
    }

    /// Per-cell enumeration of the members containing a cell.
    pub fn cover<'a>(&'a self, grid: &CellGrid) -> Result<Cover<'a>> {
        self.validate(grid)?;
        let n = grid.dim();
        let layouts: Vec<LevelLayout> = grids_of(self, n)
            .into_iter()
            .flat_map(|b| dyadic_levels(grid).map(move |k| (b, k)))
            .map(|(b, k)| LevelLayout::new(grid, b, k))
            .collect();
        Ok(Cover { family: self, grid: *grid, layouts })
    }
}

pub struct Cover<'a> {
    family: &'a CubeFamily,
    grid: CellGrid,
    layouts: Vec<LevelLayout>,
}

impl Cover<'_> {
    /// Calls `visit` on every member containing `cell`, in canonical order.
    pub fn for_each(&self, cell: usize, mut visit: impl FnMut(&Region)) {
        let grid = &self.grid;
        let n = grid.dim();
        let c = grid.cell_coords(cell);
        let side = grid.cells_per_side();
        match self.family {
            CubeFamily::DyadicUnion | CubeFamily::Dyadic { .. } => {
                for lay in &self.layouts {
                    let mut idx = [0; MAX_DIM];
                    for a in 0..n {
                        idx[a] = lay.index_of(c[a] as i64, a);
                    }
                    visit(&lay.cube(n, &idx).region(grid).expect("contains cell"));
                }
            }
            CubeFamily::AllCubes => {
                for l in 1..=side {
                    let mut lo = [0; MAX_DIM];
                    let mut hi = [1; MAX_DIM];
                    for a in 0..n {
                        lo[a] = (c[a] + 1).saturating_sub(l);
                        hi[a] = c[a].min(side - l) + 1;
                    }
                    let corners = Region { lo, hi, volume: 0.0, clipped: false };
                    for flat in corners.cells(grid) {
                        let lower = grid.cell_coords(flat);
                        visit(&Cube { lower, side: l }.region(grid));
                    }
                }
            }
            CubeFamily::Explicit { cubes } => {
                for q in cubes.iter().filter(|q| q.contains_cell(grid, &c)) {
                    visit(&q.region(grid));
                }
            }
        }
    }
}
fn dyadic_tree_pass<F>(grid: &CellGrid, beta: Shift, value: &F) -> Vec<f64>
where
    F: Fn(&Region) -> f64 + Sync,
{
    let n = grid.dim();
    let mut prev: Option<(LevelLayout, Vec<f64>)> = None;
    for level in dyadic_levels(grid) {
        let lay = LevelLayout::new(grid, beta, level);
        let best: Vec<f64> = (0..lay.len(n))
            .into_par_iter()
            .map(|flat| {
                let idx = lay.unflat(n, flat);
                let region = lay.cube(n, &idx).region(grid).expect("layout cubes meet the box");
                let own = value(&region);
                match &prev {
                    Some((plan, pbest)) => {
                        let mut pidx = [0; MAX_DIM];
                        for a in 0..n {
                            pidx[a] = plan.index_of(region.lo[a] as i64, a);
                        }
                        own.max(pbest[plan.flat(n, &pidx)])
                    }
                    None => own,
                }
            })
            .collect();
        prev = Some((lay, best));
    }
    let (lay, best) = prev.expect("at least one level");
    (0..grid.cell_count())
        .into_par_iter()
        .map(|cell| {
            let c = grid.cell_coords(cell);
            let mut idx = [0; MAX_DIM];
            for a in 0..n {
                idx[a] = lay.index_of(c[a] as i64, a);
            }
            best[lay.flat(n, &idx)]
        })
        .collect()
}

/// Sliding maximum along one line: `out[x] = max in[c]` over corners `c`
/// with `c <= x < c + len`.
fn line_window_max(input: &[f64], cells: usize, len: usize, out: &mut [f64]) {
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for x in 0..cells {
        while next < input.len() && next <= x {
            while dq.back().is_some_and(|&b| input[b] <= input[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        while dq.front().is_some_and(|&f| f + len <= x) {
            dq.pop_front();
        }
        out[x] = dq.front().map_or(f64::NEG_INFINITY, |&f| input[f]);
    }
}

/// Spread corner values of side-`len` cubes to the cells they cover.
fn window_max(corners: Vec<f64>, n: usize, positions: usize, cells: usize, len: usize) -> Vec<f64> {
    let mut shape = [1usize; MAX_DIM];
    shape[..n].fill(positions);
    let mut data = corners;
    for axis in 0..n {
        let mut new_shape = shape;
        new_shape[axis] = cells;
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..n].iter().product();
        let mut next = vec![0.0; outer * cells * inner];
        let mut line = vec![0.0; shape[axis]];
        let mut res = vec![0.0; cells];
        for o in 0..outer {
            for i in 0..inner {
                for (p, slot) in line.iter_mut().enumerate() {
                    *slot = data[(o * shape[axis] + p) * inner + i];
                }
                line_window_max(&line, cells, len, &mut res);
                for (x, &v) in res.iter().enumerate() {
                    next[(o * cells + x) * inner + i] = v;
                }
            }
        }
        data = next;
        shape = new_shape;
    }
    data
}
