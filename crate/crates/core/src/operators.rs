//! Maximal and fractional-integral operators on sampled data, and the
//! pointwise dominations between them.
//!
//! Maximal operators are evaluated at cell centers and take their supremum
//! over a [`CubeFamily`]. Cubes of the dyadic families may stick out of the
//! box; the data vanish there.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::shift_count;
use crate::error::{Error, Result};
use crate::family::CubeFamily;
use crate::grid::{check_alpha, product_average_region, CellGrid, Field, Region, SampledFunctions, SummedAreaTable};
use crate::kernels::{KernelForm, RoughKernel};
use crate::profile::conjugate;

/// Compute limits for the expensive paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Largest grid (in cells) on which the all-cubes family may be swept.
    pub all_cubes_cells: usize,
    /// Largest `cells^m` for joint-kernel and multilinear integral sums.
    pub joint_terms: u128,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { all_cubes_cells: 1 << 14, joint_terms: 1 << 26 }
    }
}

impl Budget {
    pub fn check_family(&self, family: &CubeFamily, grid: &CellGrid) -> Result<()> {
        if *family == CubeFamily::AllCubes && grid.cell_count() > self.all_cubes_cells {
            return Err(Error::Resource(format!(
                "all-cubes family on {} cells exceeds the budget of {} cells",
                grid.cell_count(),
                self.all_cubes_cells
            )));
        }
        Ok(())
    }

    fn check_terms(&self, cells: usize, m: usize, what: &str) -> Result<()> {
        let terms = (cells as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
        if terms > self.joint_terms {
            return Err(Error::Resource(format!("{what} needs {terms} terms, budget is {}", self.joint_terms)));
        }
        Ok(())
    }
}

fn finish(grid: CellGrid, sup: Vec<f64>) -> Field {
    // a cell covered by no cube has an empty supremum, i.e. zero
    let values = sup.into_iter().map(|v| if v == f64::NEG_INFINITY { 0.0 } else { v }).collect();
    Field::new(grid, values).expect("one value per cell")
}

/// `M_alpha(f)(x) = sup_{Q ni x} prod_i |Q|^(alpha/(mn) - 1) integral_Q f_i`.
pub fn maximal_alpha(fs: &SampledFunctions, alpha: f64, family: &CubeFamily) -> Result<Field> {
    let grid = *fs.grid();
    check_alpha(alpha, fs.m(), grid.dim())?;
    let tables = fs.function_tables();
    let n = grid.dim();
    let sup = family.sup_field(&grid, |r| product_average_region(tables, r, alpha, n))?;
    Ok(finish(grid, sup))
}

/// `M_alpha` restricted to the grid `D_beta`.
pub fn dyadic_maximal(fs: &SampledFunctions, alpha: f64, beta: u8) -> Result<Field> {
    maximal_alpha(fs, alpha, &CubeFamily::Dyadic { beta })
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub constant: f64,
    /// `max_x LHS(x) / RHS(x)`; at most one when the inequality holds.
    pub worst_ratio: f64,
    pub worst_cell: usize,
    pub cells: usize,
}

const RELATIVE_SLACK: f64 = 1e-12;

/// Both sides of `M_alpha(f)(x) <= 6^(mn-alpha) sum_beta M_alpha^{D_beta}(f)(x)`,
/// with `M_alpha` over all cell-aligned cubes.
pub fn shift_domination_sides(fs: &SampledFunctions, alpha: f64, budget: &Budget) -> Result<(Field, Field)> {
    let grid = *fs.grid();
    budget.check_family(&CubeFamily::AllCubes, &grid)?;
    let lhs = maximal_alpha(fs, alpha, &CubeFamily::AllCubes)?;
    let mut rhs = vec![0.0; grid.cell_count()];
    for beta in 0..shift_count(grid.dim()) {
        let d = dyadic_maximal(fs, alpha, beta)?;
        for (r, v) in rhs.iter_mut().zip(d.values()) {
            *r += v;
        }
    }
    let constant = shift_constant(fs.m(), grid.dim(), alpha);
    let rhs = Field::new(grid, rhs.into_iter().map(|r| constant * r).collect())?;
    Ok((lhs, rhs))
}

/// `6^(mn - alpha)`.
pub fn shift_constant(m: usize, n: usize, alpha: f64) -> f64 {
    6f64.powf((m * n) as f64 - alpha)
}

/// Checks the shifted dyadic domination at every cell. A violation is an error.
pub fn shift_domination_check(fs: &SampledFunctions, alpha: f64, budget: &Budget) -> Result<DominationReport> {
    let grid = *fs.grid();
    let (lhs, rhs) = shift_domination_sides(fs, alpha, budget)?;
    let constant = shift_constant(fs.m(), grid.dim(), alpha);
    let mut report = DominationReport { constant, worst_ratio: 0.0, worst_cell: 0, cells: grid.cell_count() };
    for (cell, (&l, &r)) in lhs.values().iter().zip(rhs.values()).enumerate() {
        let ratio = if l == 0.0 { 0.0 } else { l / r };
        if ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst_cell = cell;
        }
    }
    if !(report.worst_ratio <= 1.0 + RELATIVE_SLACK) {
        return Err(Error::Inconsistency(format!(
            "shifted dyadic domination fails at cell {} with ratio {}",
            report.worst_cell, report.worst_ratio
        )));
    }
    Ok(report)
}

/// Weight of cell `y` as seen from the center of cell `x` in each direction
/// bin. In one dimension the singular cell is split evenly between the two
/// signs, which integrates a sign kernel exactly; for `n >= 2` the singular
/// cell is dropped and other cells use their center direction.
fn direction_weights(grid: &CellGrid, kernel: &RoughKernel, x: usize, y: usize) -> Result<Vec<(usize, f64)>> {
    let n = grid.dim();
    if x == y {
        return Ok(if n == 1 { vec![(0, 0.5), (1, 0.5)] } else { vec![] });
    }
    let cx = grid.cell_center(&grid.cell_coords(x));
    let cy = grid.cell_center(&grid.cell_coords(y));
    let mut off = [0.0; 3];
    for a in 0..n {
        off[a] = cx[a] - cy[a];
    }
    Ok(vec![(kernel.sphere().bin_of(&off)?, 1.0)])
}

fn check_kernel(fs: &SampledFunctions, kernel: &RoughKernel) -> Result<()> {
    if kernel.m() != fs.m() {
        return Err(Error::param(format!("kernel has m = {}, data has m = {}", kernel.m(), fs.m())));
    }
    if kernel.dim() != fs.grid().dim() {
        return Err(Error::param(format!("kernel has n = {}, grid has n = {}", kernel.dim(), fs.grid().dim())));
    }
    Ok(())
}

/// `M_{Omega,alpha}(f)(x) = sup_{Q ni x} |Q|^(alpha/n - m) integral_{Q^m} |Omega(x - y)| prod f_i(y_i) dy`.
///
/// Constant kernels reduce to `|c| M_alpha`. Product kernels factor into `m`
/// integrals against per-point direction weights; joint kernels take the full
/// `Q^m` sum and are limited by `budget.joint_terms`.
pub fn rough_maximal(
    fs: &SampledFunctions,
    kernel: &RoughKernel,
    alpha: f64,
    family: &CubeFamily,
    budget: &Budget,
) -> Result<Field> {
    let grid = *fs.grid();
    check_alpha(alpha, fs.m(), grid.dim())?;
    check_kernel(fs, kernel)?;
    budget.check_family(family, &grid)?;
    let n = grid.dim();
    let m = fs.m();
    match kernel.form() {
        KernelForm::Constant(c) => {
            let c = c.abs();
            Ok(maximal_alpha(fs, alpha, family)?.map(|v| c * v))
        }
        KernelForm::Product(_) => {
            let cover = family.cover(&grid)?;
            let cells = grid.cell_count();
            let out = (0..cells)
                .into_par_iter()
                .map(|x| {
                    let tables = (0..m)
                        .map(|i| {
                            let f = fs.functions()[i].values();
                            let mut g = vec![0.0; cells];
                            for (y, gy) in g.iter_mut().enumerate() {
                                if f[y] != 0.0 {
                                    for (bin, wt) in direction_weights(&grid, kernel, x, y)? {
                                        *gy += wt * kernel.factor_value(i, bin).expect("product form") * f[y];
                                    }
                                }
                            }
                            Ok(SummedAreaTable::new(&Field::new(grid, g)?))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let mut best = f64::NEG_INFINITY;
                    cover.for_each(x, |r| best = best.max(product_average_region(&tables, r, alpha, n)));
                    Ok(best)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(finish(grid, out))
        }
        KernelForm::Joint(_) => {
            budget.check_terms(grid.cell_count(), m, "joint kernel sum")?;
            let cover = family.cover(&grid)?;
            let h_nm = grid.cell_volume().powi(m as i32);
            let out = (0..grid.cell_count())
                .into_par_iter()
                .map(|x| {
                    let mut regions = Vec::new();
                    cover.for_each(x, |r| regions.push(*r));
                    let mut best = f64::NEG_INFINITY;
                    for r in &regions {
                        let integral = joint_sum(fs, kernel, &grid, x, r)? * h_nm;
                        best = best.max(r.volume.powf(alpha / n as f64 - m as f64) * integral);
                    }
                    Ok(best)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(finish(grid, out))
        }
    }
}

/// `sum_{y in R^m} |Omega|(bins) prod wt_i f_i(y_i)` in cell units.
fn joint_sum(fs: &SampledFunctions, kernel: &RoughKernel, grid: &CellGrid, x: usize, r: &Region) -> Result<f64> {
    let m = fs.m();
    let cells = r.cells(grid);
    let mut lists: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    for f in fs.functions() {
        let mut list = Vec::new();
        for &y in &cells {
            let v = f.values()[y];
            if v != 0.0 {
                for (bin, wt) in direction_weights(grid, kernel, x, y)? {
                    list.push((bin, wt * v));
                }
            }
        }
        if list.is_empty() {
            return Ok(0.0);
        }
        lists.push(list);
    }
    let mut idx = vec![0usize; m];
    let mut bins = vec![0usize; m];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for i in 0..m {
            let (b, w) = lists[i][idx[i]];
            bins[i] = b;
            weight *= w;
        }
        total += kernel.value_at_bins(&bins) * weight;
        let mut i = m;
        loop {
            if i == 0 {
                return Ok(total);
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < lists[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// Largest of `lhs / rhs` over the cells where `lhs > 0`.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalConstant {
    pub value: f64,
    pub argmax_cell: usize,
    pub points: usize,
}

fn empirical(lhs: &[f64], rhs: &[f64], cells: &[usize]) -> Result<EmpiricalConstant> {
    let mut out = EmpiricalConstant { value: 0.0, argmax_cell: 0, points: cells.len() };
    for (k, &c) in cells.iter().enumerate() {
        if lhs[k] > 0.0 {
            if !(rhs[k] > 0.0) {
                return Err(Error::Inconsistency(format!(
                    "left side {} is positive where the right side vanishes (cell {c})",
                    lhs[k]
                )));
            }
            let r = lhs[k] / rhs[k];
            if r > out.value {
                out.value = r;
                out.argmax_cell = c;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderReport {
    pub s: f64,
    pub s_prime: f64,
    pub kernel_norm: f64,
    /// `sup_x M_{Omega,alpha}(f)(x) / (||Omega||_s M_{alpha s'}(f^s')(x)^(1/s'))`.
    pub constant: EmpiricalConstant,
}

/// Compares `M_{Omega,alpha}(f)` with `||Omega||_s M_{alpha s'}(f^{s'})^{1/s'}`
/// cellwise over one family.
pub fn rough_vs_smooth_check(
    fs: &SampledFunctions,
    kernel: &RoughKernel,
    alpha: f64,
    family: &CubeFamily,
    budget: &Budget,
) -> Result<HolderReport> {
    let grid = *fs.grid();
    let s = kernel.s();
    let sp = conjugate(s);
    let mn = (fs.m() * grid.dim()) as f64;
    if !(alpha * sp < mn) {
        return Err(Error::Hypothesis(format!("requires alpha s' < mn, got alpha s' = {}", alpha * sp)));
    }
    let lhs = rough_maximal(fs, kernel, alpha, family, budget)?;
    let smooth = maximal_alpha(&fs.powered(sp)?, alpha * sp, family)?;
    let norm = kernel.ls_norm();
    let rhs: Vec<f64> = smooth.values().iter().map(|v| norm * v.powf(1.0 / sp)).collect();
    let cells: Vec<usize> = (0..grid.cell_count()).collect();
    Ok(HolderReport { s, s_prime: sp, kernel_norm: norm, constant: empirical(lhs.values(), &rhs, &cells)? })
}

/// `I_{Omega,alpha}(f)(x) = integral |Omega(y)| |y|^(alpha - mn) prod f_i(x - y_i) dy`
/// over `|y| <= truncation` (`f64::INFINITY` for no truncation).
///
/// For `m = n = 1` every cell integral is done in closed form, so the only
/// approximation is the data itself. Otherwise the midpoint rule is used and
/// tuples with a zero offset (in any factor, for directional kernels) are
/// dropped.
pub fn frac_integral(
    fs: &SampledFunctions,
    kernel: &RoughKernel,
    alpha: f64,
    x: &[f64],
    truncation: f64,
    budget: &Budget,
) -> Result<f64> {
    let grid = *fs.grid();
    let n = grid.dim();
    let m = fs.m();
    check_kernel(fs, kernel)?;
    let mn = (m * n) as f64;
    if !(alpha > 0.0 && alpha < mn) {
        return Err(Error::param(format!("alpha must lie in (0, mn) = (0, {mn}), got {alpha}")));
    }
    if !(truncation >= grid.cell_width()) {
        return Err(Error::param(format!(
            "truncation {truncation} is smaller than one cell ({})",
            grid.cell_width()
        )));
    }
    if x.len() != n || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("evaluation point {x:?} is not a point of R^{n}")));
    }
    if m == 1 && n == 1 {
        return Ok(frac_integral_line(fs.functions()[0].values(), kernel, &grid, alpha, x[0], truncation));
    }
    let supports: Vec<Vec<usize>> = fs
        .functions()
        .iter()
        .map(|f| (0..grid.cell_count()).filter(|&c| f.values()[c] != 0.0).collect())
        .collect();
    if supports.iter().any(Vec::is_empty) {
        return Ok(0.0);
    }
    let terms: u128 = supports.iter().map(|s| s.len() as u128).product();
    if terms > budget.joint_terms {
        return Err(Error::Resource(format!("integral needs {terms} terms, budget is {}", budget.joint_terms)));
    }
    let offsets: Vec<Vec<[f64; 3]>> = supports
        .iter()
        .map(|s| {
            s.iter()
                .map(|&c| {
                    let z = grid.cell_center(&grid.cell_coords(c));
                    let mut y = [0.0; 3];
                    for a in 0..n {
                        y[a] = x[a] - z[a];
                    }
                    y
                })
                .collect()
        })
        .collect();
    let directional = !kernel.is_constant();
    let power = alpha - mn;
    let r2max = truncation * truncation;
    let mut idx = vec![0usize; m];
    let mut bins = vec![0usize; m];
    let mut total = 0.0;
    'tuples: loop {
        let mut r2 = 0.0;
        let mut prod = 1.0;
        let mut skip = false;
        for i in 0..m {
            let y = &offsets[i][idx[i]];
            let yi2: f64 = y[..n].iter().map(|v| v * v).sum();
            if directional {
                if yi2 == 0.0 {
                    skip = true;
                    break;
                }
                bins[i] = kernel.sphere().bin_of(y)?;
            }
            r2 += yi2;
            prod *= fs.functions()[i].values()[supports[i][idx[i]]];
        }
        if !skip && r2 > 0.0 && r2 <= r2max {
            total += kernel.value_at_bins(&bins) * r2.powf(power / 2.0) * prod;
        }
        let mut i = m;
        loop {
            if i == 0 {
                break 'tuples;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < supports[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(total * grid.cell_volume().powi(m as i32))
}

fn frac_integral_line(f: &[f64], kernel: &RoughKernel, grid: &CellGrid, alpha: f64, x: f64, trunc: f64) -> f64 {
    let h = grid.cell_width();
    let plus = kernel.value_at_bins(&[0]);
    let minus = kernel.value_at_bins(&[1]);
    // integral of |t|^(alpha-1) over t in [u, v], 0 <= u <= v
    let radial = |u: f64, v: f64| (v.powf(alpha) - u.powf(alpha)) / alpha;
    let mut total = 0.0;
    for (c, &v) in f.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let (a, b) = (c as f64 * h, (c + 1) as f64 * h);
        let mut cell = 0.0;
        // y = x - z > 0 for z < x
        let (lo, hi) = (a.max(x - trunc), b.min(x));
        if lo < hi {
            cell += plus * radial(x - hi, x - lo);
        }
        let (lo, hi) = (a.max(x), b.min(x + trunc));
        if lo < hi {
            cell += minus * radial(lo - x, hi - x);
        }
        total += v * cell;
    }
    total
}

/// Cells containing the points `((k + 1/2)/count) * side` along axis 0, at
/// the middle of the remaining axes. The points do not move under refinement.
pub fn sample_cells(grid: &CellGrid, count: usize) -> Vec<usize> {
    let side = grid.cells_per_side();
    let mut coords = [side / 2; 3];
    (0..count)
        .map(|k| {
            coords[0] = (2 * k + 1) * side / (2 * count);
            grid.cell_index(&coords[..grid.dim()])
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometricMeanRow {
    pub cell: usize,
    pub x: Vec<f64>,
    pub integral: f64,
    pub maximal_plus: f64,
    pub maximal_minus: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometricMeanReport {
    pub alpha: f64,
    pub eps: f64,
    /// `sup_x I_{Omega,alpha}(x) / (M_{Omega,alpha+eps}(x) M_{Omega,alpha-eps}(x))^(1/2)`.
    pub constant: EmpiricalConstant,
    pub rows: Vec<GeometricMeanRow>,
}

/// `I_{Omega,alpha}(f)(x) <= C (M_{Omega,alpha+eps}(f)(x) M_{Omega,alpha-eps}(f)(x))^(1/2)`
/// at the centers of `samples` sample cells.
#[allow(clippy::too_many_arguments)]
pub fn geometric_mean_domination_check(
    fs: &SampledFunctions,
    kernel: &RoughKernel,
    alpha: f64,
    eps: f64,
    family: &CubeFamily,
    samples: usize,
    budget: &Budget,
) -> Result<GeometricMeanReport> {
    let grid = *fs.grid();
    let mn = (fs.m() * grid.dim()) as f64;
    if !(eps > 0.0 && eps < alpha && alpha + eps < mn) {
        return Err(Error::param(format!(
            "requires 0 < eps < alpha and alpha + eps < mn, got eps = {eps}, alpha = {alpha}"
        )));
    }
    let plus = rough_maximal(fs, kernel, alpha + eps, family, budget)?;
    let minus = rough_maximal(fs, kernel, alpha - eps, family, budget)?;
    let cells = sample_cells(&grid, samples);
    let rows = cells
        .par_iter()
        .map(|&c| {
            let center = grid.cell_center(&grid.cell_coords(c));
            let x = center[..grid.dim()].to_vec();
            let integral = frac_integral(fs, kernel, alpha, &x, f64::INFINITY, budget)?;
            Ok(GeometricMeanRow {
                cell: c,
                x,
                integral,
                maximal_plus: plus.values()[c],
                maximal_minus: minus.values()[c],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lhs: Vec<f64> = rows.iter().map(|r| r.integral).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| (r.maximal_plus * r.maximal_minus).sqrt()).collect();
    Ok(GeometricMeanReport { alpha, eps, constant: empirical(&lhs, &rhs, &cells)?, rows })
}

/// `M_{sigma,alpha/m}(f)(x) = sup_{Q ni x} sigma(Q)^(alpha/(nm) - 1) integral_Q f sigma`,
/// with `sigma` vanishing outside the box.
pub fn weighted_maximal(f: &Field, sigma: &Field, alpha: f64, m: usize, family: &CubeFamily) -> Result<Field> {
    let grid = *f.grid();
    if *sigma.grid() != grid {
        return Err(Error::domain("function and weight live on different grids"));
    }
    if sigma.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::param("sigma must be positive everywhere"));
    }
    if f.values().iter().any(|&v| v < 0.0) {
        return Err(Error::param("f must be nonnegative"));
    }
    check_alpha(alpha, m, grid.dim())?;
    let mass = SummedAreaTable::new(sigma);
    let weighted = SummedAreaTable::new(&f.zip_map(sigma, |a, b| a * b)?);
    let power = alpha / (grid.dim() * m) as f64 - 1.0;
    let sup = family.sup_field(&grid, |r| {
        let s = mass.integral(r);
        if s > 0.0 { s.powf(power) * weighted.integral(r) } else { 0.0 }
    })?;
    Ok(finish(grid, sup))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(l: u32) -> CellGrid {
        CellGrid::new(1, 0, l).unwrap()
    }

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn random_fs(g: CellGrid, m: usize, seed: u64) -> SampledFunctions {
        let mut r = lcg(seed);
        let fs = (0..m).map(|_| Field::from_fn(g, |_| if r() < 0.3 { 0.0 } else { r() * 3.0 }).unwrap()).collect();
        SampledFunctions::unweighted(fs).unwrap()
    }

    fn indicator(g: CellGrid, lo: f64, hi: f64) -> Field {
        Field::from_fn(g, |c| {
            let x = g.cell_center(c)[0];
            if x >= lo && x < hi { 1.0 } else { 0.0 }
        })
        .unwrap()
    }

    fn brute(fs: &SampledFunctions, alpha: f64, family: &CubeFamily) -> Vec<f64> {
        let g = *fs.grid();
        let mut out = vec![0.0f64; g.cell_count()];
        for mem in family.members(&g).unwrap() {
            let v = product_average_region(fs.function_tables(), &mem.region, alpha, g.dim());
            for c in mem.region.cells(&g) {
                out[c] = out[c].max(v);
            }
        }
        out
    }

    #[test]
    fn unit_functions_give_unit_maximal() {
        let g = grid1(3);
        let fs = SampledFunctions::unweighted(vec![Field::constant(g, 1.0); 2]).unwrap();
        for alpha in [0.0, 0.5, 1.5] {
            let mx = maximal_alpha(&fs, alpha, &CubeFamily::DyadicUnion).unwrap();
            assert!(mx.values().iter().all(|&v| (v - 1.0).abs() < 1e-14), "{alpha}");
        }
    }

    #[test]
    fn half_indicator_right_half_sees_whole_box() {
        let g = grid1(3);
        let fs = SampledFunctions::unweighted(vec![indicator(g, 0.0, 0.5)]).unwrap();
        let mx = maximal_alpha(&fs, 0.0, &CubeFamily::Dyadic { beta: 0 }).unwrap();
        for c in 0..g.cell_count() {
            let x = g.cell_center(&[c])[0];
            if x > 0.5 {
                assert_eq!(mx.values()[c], 0.5);
            } else {
                assert_eq!(mx.values()[c], 1.0);
            }
        }
    }

    #[test]
    fn fast_paths_match_brute_force() {
        for (g, m) in [(grid1(4), 1), (grid1(3), 2), (CellGrid::new(2, 0, 1).unwrap(), 2)] {
            let fs = random_fs(g, m, 17);
            for fam in [CubeFamily::DyadicUnion, CubeFamily::Dyadic { beta: 1 }, CubeFamily::AllCubes] {
                let fast = maximal_alpha(&fs, 0.5, &fam).unwrap();
                assert_eq!(fast.values(), &brute(&fs, 0.5, &fam)[..], "{fam:?}");
            }
        }
    }

    #[test]
    fn dyadic_indicator_tree_values() {
        // f = indicator of the dyadic cube [0, 1/4): ancestors [0,1/2), [0,1), [0,2), [0,4)
        let g = CellGrid::new(1, 0, 3).unwrap();
        let fs = SampledFunctions::unweighted(vec![indicator(g, 0.0, 0.25)]).unwrap();
        let mx = dyadic_maximal(&fs, 0.0, 0).unwrap();
        for c in 0..g.cell_count() {
            let x = g.cell_center(&[c])[0];
            let want = if x < 0.25 { 1.0 } else if x < 0.5 { 0.5 } else { 0.25 };
            assert_eq!(mx.values()[c], want, "x = {x}");
        }
    }

    #[test]
    fn shift_domination_holds_on_random_data() {
        for seed in 0..4 {
            let fs = random_fs(grid1(3), 2, seed);
            let rep = shift_domination_check(&fs, 0.5, &Budget::default()).unwrap();
            assert!(rep.worst_ratio <= 1.0);
        }
        let fs = random_fs(CellGrid::new(2, 0, 1).unwrap(), 1, 5);
        shift_domination_check(&fs, 0.25, &Budget::default()).unwrap();
    }

    #[test]
    fn constant_kernel_reduces_exactly() {
        let fs = random_fs(grid1(3), 2, 3);
        let k = RoughKernel::constant(1, 2, 1.0, 2.0).unwrap();
        let fam = CubeFamily::DyadicUnion;
        let a = rough_maximal(&fs, &k, 0.5, &fam, &Budget::default()).unwrap();
        let b = maximal_alpha(&fs, 0.5, &fam).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn unit_product_kernel_matches_maximal() {
        let fs = random_fs(grid1(3), 2, 4);
        let k = RoughKernel::signs(&[(1.0, 1.0), (1.0, 1.0)], 2.0).unwrap();
        let fam = CubeFamily::DyadicUnion;
        let a = rough_maximal(&fs, &k, 0.5, &fam, &Budget::default()).unwrap();
        let b = maximal_alpha(&fs, 0.5, &fam).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-13 * y.max(1e-300), "{x} {y}");
        }
    }

    #[test]
    fn sign_kernel_on_unit_indicator() {
        // n=m=1, alpha=0, Omega(+)=2, Omega(-)=0, f = 1 on [0,1): at the
        // center x of cell c the best cube is [0, x + h/2) with value
        // 2 (x - 0) / (x + h/2) in the all-cubes family.
        let g = grid1(3);
        let h = g.cell_width();
        let fs = SampledFunctions::unweighted(vec![Field::constant(g, 1.0)]).unwrap();
        let k = RoughKernel::signs(&[(2.0, 0.0)], 2.0).unwrap();
        let mx = rough_maximal(&fs, &k, 0.0, &CubeFamily::AllCubes, &Budget::default()).unwrap();
        for c in 0..g.cell_count() {
            let x = (c as f64 + 0.5) * h;
            let want = 2.0 * x / (x + h / 2.0);
            assert!((mx.values()[c] - want).abs() < 1e-13, "cell {c}: {} vs {want}", mx.values()[c]);
            assert!(mx.values()[c] < 2.0);
        }
    }

    #[test]
    fn product_matches_joint_brute_force() {
        let g = CellGrid::new(1, 0, 3).unwrap();
        assert_eq!(g.cell_count(), 24);
        let fs = random_fs(g, 2, 8);
        let k = RoughKernel::signs(&[(2.0, 0.5), (0.25, 3.0)], 2.0).unwrap();
        let j = k.to_joint().unwrap();
        let fam = CubeFamily::DyadicUnion;
        let a = rough_maximal(&fs, &k, 0.5, &fam, &Budget::default()).unwrap();
        let b = rough_maximal(&fs, &j, 0.5, &fam, &Budget::default()).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{x} {y}");
        }
        let g2 = CellGrid::new(2, 0, 0).unwrap();
        let fs2 = random_fs(g2, 2, 9);
        let sp = crate::kernels::SpherePartition::new(2, &[8]).unwrap();
        let mut r = lcg(3);
        let k2 = RoughKernel::product(sp, (0..2).map(|_| (0..8).map(|_| r()).collect()).collect(), 2.0).unwrap();
        let a = rough_maximal(&fs2, &k2, 1.0, &fam, &Budget::default()).unwrap();
        let b = rough_maximal(&fs2, &k2.to_joint().unwrap(), 1.0, &fam, &Budget::default()).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{x} {y}");
        }
    }

    #[test]
    fn joint_budget_is_enforced() {
        let fs = random_fs(grid1(3), 2, 1);
        let j = RoughKernel::signs(&[(1.0, 1.0), (1.0, 1.0)], 2.0).unwrap().to_joint().unwrap();
        let tight = Budget { joint_terms: 100, ..Budget::default() };
        let err = rough_maximal(&fs, &j, 0.5, &CubeFamily::DyadicUnion, &tight).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
        let tiny = Budget { all_cubes_cells: 10, ..Budget::default() };
        assert!(matches!(shift_domination_check(&fs, 0.5, &tiny), Err(Error::Resource(_))));
    }

    #[test]
    fn frac_integral_spot_value() {
        let k = RoughKernel::constant(1, 1, 1.0, 2.0).unwrap();
        for l in [2, 6] {
            let g = grid1(l);
            let fs = SampledFunctions::unweighted(vec![Field::constant(g, 1.0)]).unwrap();
            let v = frac_integral(&fs, &k, 0.5, &[0.5], f64::INFINITY, &Budget::default()).unwrap();
            assert!((v / (2.0 * 2f64.sqrt()) - 1.0).abs() < 1e-12, "L={l}: {v}");
        }
    }

    #[test]
    fn frac_integral_zero_and_truncation() {
        let g = CellGrid::new(1, 1, 2).unwrap();
        let k = RoughKernel::constant(1, 2, 1.0, 2.0).unwrap();
        let zero = SampledFunctions::unweighted(vec![Field::constant(g, 0.0); 2]).unwrap();
        assert_eq!(frac_integral(&zero, &k, 0.5, &[0.5], 1.0, &Budget::default()).unwrap(), 0.0);
        let f = indicator(g, 0.0, 1.0);
        let fs = SampledFunctions::unweighted(vec![f.clone(), f]).unwrap();
        let a = frac_integral(&fs, &k, 0.5, &[0.5], 2.0, &Budget::default()).unwrap();
        let b = frac_integral(&fs, &k, 0.5, &[0.5], 4.0, &Budget::default()).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
        assert!(frac_integral(&fs, &k, 0.5, &[0.5], 1e-3, &Budget::default()).is_err());
    }

    #[test]
    fn geometric_mean_constant_is_finite() {
        let g = grid1(4);
        let fs = SampledFunctions::unweighted(vec![indicator(g, 0.0, 1.0)]).unwrap();
        let k = RoughKernel::constant(1, 1, 1.0, 2.0).unwrap();
        let rep = geometric_mean_domination_check(&fs, &k, 0.5, 0.25, &CubeFamily::DyadicUnion, 33, &Budget::default())
            .unwrap();
        assert!(rep.constant.value.is_finite() && rep.constant.value > 0.0);
    }

    #[test]
    fn holder_constant_for_unit_kernel_and_infinite_s() {
        let fs = random_fs(grid1(3), 1, 2);
        let k = RoughKernel::constant(1, 1, 1.0, f64::INFINITY).unwrap();
        let rep = rough_vs_smooth_check(&fs, &k, 0.5, &CubeFamily::DyadicUnion, &Budget::default()).unwrap();
        assert_eq!(rep.s_prime, 1.0);
        assert!((rep.constant.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weighted_maximal_reductions() {
        let g = grid1(3);
        let fs = random_fs(g, 1, 6);
        let one = Field::constant(g, 1.0);
        let fam = CubeFamily::DyadicUnion;
        let a = weighted_maximal(&fs.functions()[0], &one, 1.0, 2, &fam).unwrap();
        let b = maximal_alpha(&fs, 0.5, &fam).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-14 * y.max(1e-300));
        }
        let mut r = lcg(11);
        let sigma = Field::from_fn(g, |_| 0.1 + r()).unwrap();
        let total = SummedAreaTable::new(&sigma).integral(&g.whole().region(&g));
        let w = weighted_maximal(&one, &sigma, 0.5, 1, &fam).unwrap();
        for v in w.values() {
            assert!((v / total.powf(0.5) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_cells_are_refinement_stable() {
        let a = sample_cells(&grid1(5), 33);
        let b = sample_cells(&grid1(6), 33);
        for (ca, cb) in a.iter().zip(&b) {
            let xa = grid1(5).cell_center(&[*ca])[0];
            let xb = grid1(6).cell_center(&[*cb])[0];
            assert!((xa - xb).abs() <= grid1(5).cell_width());
        }
    }
}
