//! Stopping-time construction of sparse families from the level sets of the
//! dyadic maximal function, and exact verification of sparseness.
//!
//! Averages are compared in scaled form. With `T_i(Q)` the cell sums of
//! `f_i` over `Q` and `N(Q)` the number of cells of the full cube,
//! `avg(Q) = prod T_i(Q) / W(k)` with `W(k) = N^(m - alpha/n) h^(-alpha)
//! = 3^(nm) 2^(nm(L-k)) 2^(k alpha)`. Cube masses are built bottom-up
//! (parent = sum of children), so masses are monotone under inclusion in
//! floating point and the selection bounds hold exactly, not up to rounding.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dyadic::{CubeRecord, DyadicCube, Shift};
use crate::error::{Error, Result};
use crate::grid::{check_alpha, CellGrid, Field, SampledFunctions, SummedAreaTable};
use crate::operators::dyadic_maximal;
use crate::weights::NuConvention;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SelectedCube {
    pub cube: DyadicCube,
    pub average: f64,
}

#[derive(Clone, Debug)]
pub struct SparseFamily {
    grid: CellGrid,
    beta: Shift,
    alpha: f64,
    m: usize,
    a: f64,
    levels: BTreeMap<i32, Vec<SelectedCube>>,
    source: String,
}

/// Default stopping base `2^(m(n+1))`.
pub fn default_base(m: usize, n: usize) -> f64 {
    2f64.powi((m * (n + 1)) as i32)
}

fn fingerprint(fs: &SampledFunctions) -> String {
    let mut h = Sha256::new();
    for f in fs.functions() {
        for v in f.values() {
            h.update(v.to_le_bytes());
        }
    }
    format!("{:x}", h.finalize())
}

/// Scaled averages over one grid `D_beta`.
struct MassTree {
    grid: CellGrid,
    m: usize,
    alpha: f64,
    masses: HashMap<DyadicCube, Vec<f64>>,
    /// The ancestor chains of the level-`L` cubes, finest first.
    leaves: Vec<DyadicCube>,
    /// Coarsest level whose cube contains the whole box.
    top: DyadicCube,
}

impl MassTree {
    fn new(fs: &SampledFunctions, alpha: f64, beta: Shift) -> Result<Self> {
        let grid = *fs.grid();
        let n = grid.dim();
        let m = fs.m();
        let level = grid.level() as i32;
        let sats: Vec<SummedAreaTable> = fs.functions().iter().map(SummedAreaTable::new).collect();
        let mut masses: HashMap<DyadicCube, Vec<f64>> = HashMap::new();
        let mut frontier: Vec<DyadicCube> = Vec::new();
        // level-L cubes meeting the box, found through their cells
        for cell in 0..grid.cell_count() {
            let c = grid.cell_coords(cell);
            let point: Vec<i128> = (0..n).map(|a| (c[a] as i128) << (crate::dyadic::SCALE_EXP - level)).collect();
            let q = DyadicCube::containing_point(n, beta, level, &point)?;
            if !masses.contains_key(&q) {
                let r = q.region(&grid).expect("cube contains a cell");
                masses.insert(q, sats.iter().map(|s| s.cell_sum(&r)).collect());
                frontier.push(q);
            }
        }
        frontier.sort();
        let leaves = frontier.clone();
        let full = |q: &DyadicCube| {
            let r = q.region(&grid).expect("ancestors meet the box");
            (0..n).all(|a| r.lo[a] == 0 && r.hi[a] == grid.cells_per_side())
        };
        let mut top = frontier[0];
        while frontier.len() > 1 || !full(&frontier[0]) {
            let mut next: Vec<DyadicCube> = Vec::new();
            let mut sums: HashMap<DyadicCube, Vec<f64>> = HashMap::new();
            for q in &frontier {
                let p = q.parent()?;
                let child = &masses[q];
                let slot = sums.entry(p).or_insert_with(|| {
                    next.push(p);
                    vec![0.0; m]
                });
                for (s, v) in slot.iter_mut().zip(child) {
                    *s += v;
                }
            }
            // children are added in sorted order, so sums are reproducible
            masses.extend(sums);
            next.sort();
            frontier = next;
            top = frontier[0];
        }
        Ok(MassTree { grid, m, alpha, masses, leaves, top })
    }

    fn mass(&mut self, q: &DyadicCube) -> Result<Vec<f64>> {
        if let Some(v) = self.masses.get(q) {
            return Ok(v.clone());
        }
        if q.level < self.top.level && q.contains(&self.top) {
            let v = self.masses[&self.top].clone();
            self.masses.insert(*q, v.clone());
            return Ok(v);
        }
        Err(Error::Inconsistency(format!("cube {q:?} is not in the mass tree")))
    }

    fn score(&mut self, q: &DyadicCube) -> Result<f64> {
        Ok(self.mass(q)?.iter().product())
    }

    /// `W(k)`; exact up to the single rounding of `2^(k alpha)`.
    fn scale(&self, level: i32) -> Result<f64> {
        let n = self.grid.dim() as i32;
        let m = self.m as i32;
        let int = 3f64.powi(n * m) * 2f64.powi(n * m * (self.grid.level() as i32 - level));
        let w = int * (level as f64 * self.alpha).exp2();
        if !w.is_finite() || w == 0.0 {
            return Err(Error::Range(format!("scaled average at level {level} is out of range")));
        }
        Ok(w)
    }

    fn average(&mut self, q: &DyadicCube) -> Result<f64> {
        Ok(self.score(q)? / self.scale(q.level)?)
    }

    /// `avg(q) > a^k`, decided in scaled form.
    fn exceeds(&mut self, q: &DyadicCube, a: f64, k: i32) -> Result<bool> {
        Ok(self.score(q)? > a.powi(k) * self.scale(q.level)?)
    }

    /// Ancestor chain of a leaf up to the first cube that contains the box
    /// and no longer exceeds `a^k_floor`.
    fn chain(&mut self, leaf: DyadicCube, a: f64, k_floor: i32) -> Result<Vec<DyadicCube>> {
        let mut out = vec![leaf];
        let mut q = leaf;
        loop {
            let boxed = q.level <= self.top.level;
            if boxed && !self.exceeds(&q, a, k_floor)? {
                return Ok(out);
            }
            q = q.parent()?;
            out.push(q);
        }
    }

    /// Largest `k` with `avg(q) > a^k`, or `None` when `avg(q) = 0`.
    fn top_level_exceeded(&mut self, q: &DyadicCube, a: f64) -> Result<Option<i32>> {
        let score = self.score(q)?;
        if score == 0.0 {
            return Ok(None);
        }
        let est = ((score / self.scale(q.level)?).ln() / a.ln()).floor() as i32;
        let mut k = est;
        while !self.exceeds(q, a, k)? {
            k -= 1;
        }
        while self.exceeds(q, a, k + 1)? {
            k += 1;
        }
        Ok(Some(k))
    }
}

/// Maximal dyadic cubes of `D_beta` on which the average exceeds `a^k`, for
/// every `k` between the smallest and largest level where `Omega_k` is
/// nonempty and not the whole box region.
pub fn build_sparse(fs: &SampledFunctions, alpha: f64, beta: Shift, a: Option<f64>) -> Result<SparseFamily> {
    let grid = *fs.grid();
    let n = grid.dim();
    check_alpha(alpha, fs.m(), n)?;
    if beta >= crate::dyadic::shift_count(n) {
        return Err(Error::param(format!("shift mask {beta:#b} exceeds dimension {n}")));
    }
    let a = a.unwrap_or_else(|| default_base(fs.m(), n));
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::param(format!("stopping base must exceed 1, got {a}")));
    }
    let mut family = SparseFamily {
        grid,
        beta,
        alpha,
        m: fs.m(),
        a,
        levels: BTreeMap::new(),
        source: fingerprint(fs),
    };
    let mut tree = MassTree::new(fs, alpha, beta)?;
    // best level per leaf over its chain up to the box-containing cube; the
    // averages only fall beyond it
    let leaves = tree.leaves.clone();
    let mut per_leaf = Vec::with_capacity(leaves.len());
    for leaf in &leaves {
        let mut best: Option<i32> = None;
        let mut q = *leaf;
        loop {
            if let Some(k) = tree.top_level_exceeded(&q, a)? {
                best = Some(best.map_or(k, |b| b.max(k)));
            }
            if q.level <= tree.top.level {
                break;
            }
            q = q.parent()?;
        }
        per_leaf.push(best);
    }
    let Some(k_hi) = per_leaf.iter().flatten().copied().max() else {
        return Ok(family);
    };
    let k_lo = per_leaf.iter().map(|b| b.unwrap_or(i32::MIN)).min().expect("leaves").max(k_hi - 4096);
    let k_lo = if per_leaf.iter().any(Option::is_none) {
        // cells where the maximal function vanishes: start where it is positive
        per_leaf.iter().flatten().copied().min().expect("some leaf")
    } else {
        k_lo
    };
    let chains = leaves
        .iter()
        .map(|&leaf| tree.chain(leaf, a, k_lo))
        .collect::<Result<Vec<_>>>()?;
    for k in k_lo..=k_hi {
        let mut chosen: Vec<DyadicCube> = Vec::new();
        for chain in &chains {
            let mut pick = None;
            for q in chain {
                if tree.exceeds(q, a, k)? {
                    pick = Some(*q);
                }
            }
            if let Some(q) = pick {
                chosen.push(q);
            }
        }
        chosen.sort();
        chosen.dedup();
        let cubes = chosen
            .into_iter()
            .map(|cube| Ok(SelectedCube { cube, average: tree.average(&cube)? }))
            .collect::<Result<Vec<_>>>()?;
        if !cubes.is_empty() {
            family.levels.insert(k, cubes);
        }
    }
    Ok(family)
}

impl SparseFamily {
    /// A family assembled by hand, for checking the verifier.
    pub fn from_levels(grid: CellGrid, beta: Shift, a: f64, levels: BTreeMap<i32, Vec<DyadicCube>>) -> Self {
        let levels = levels
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().map(|cube| SelectedCube { cube, average: f64::NAN }).collect()))
            .collect();
        SparseFamily { grid, beta, alpha: 0.0, m: 1, a, levels, source: String::new() }
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn beta(&self) -> Shift {
        self.beta
    }

    pub fn base(&self) -> f64 {
        self.a
    }

    pub fn levels(&self) -> &BTreeMap<i32, Vec<SelectedCube>> {
        &self.levels
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn cube_count(&self) -> usize {
        self.levels.values().map(Vec::len).sum()
    }

    pub fn report(&self) -> SparseReport {
        SparseReport {
            beta: (0..self.grid.dim()).map(|a| self.beta >> a & 1).collect(),
            a: self.a,
            alpha: self.alpha,
            levels: self
                .levels
                .iter()
                .map(|(&k, cubes)| SparseLevel {
                    k,
                    threshold: self.a.powi(k),
                    cubes: cubes.iter().map(|c| CubeRecord::from(&c.cube)).collect(),
                    averages: cubes.iter().map(|c| c.average).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SparseLevel {
    pub k: i32,
    pub threshold: f64,
    pub cubes: Vec<CubeRecord>,
    pub averages: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SparseReport {
    pub beta: Vec<u8>,
    pub a: f64,
    pub alpha: f64,
    pub levels: Vec<SparseLevel>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparseViolation {
    pub k: i32,
    pub j: usize,
    pub property: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SparseVerdict {
    pub passed: bool,
    pub levels: usize,
    pub cubes: usize,
    pub violations: Vec<SparseViolation>,
}

impl SparseVerdict {
    fn new(s: &SparseFamily) -> Self {
        SparseVerdict { passed: true, levels: s.levels.len(), cubes: s.cube_count(), violations: Vec::new() }
    }

    fn fail(&mut self, k: i32, j: usize, property: &'static str, detail: String) {
        self.passed = false;
        self.violations.push(SparseViolation { k, j, property, detail });
    }
}

/// Exact volume of a cube in units of the finest cube of the family.
fn units(q: &DyadicCube, finest: i32) -> Result<u128> {
    let shift = q.dim() as u32 * (finest - q.level) as u32;
    1u128
        .checked_shl(shift)
        .filter(|_| shift < 127)
        .ok_or_else(|| Error::Range(format!("volume 2^{shift} does not fit exact counting")))
}

/// Checks disjointness within levels, nesting of the level sets, the
/// half-measure condition, and disjointness and size of the carriers
/// `E_j^k = Q_j^k \ Omega_(k+1)`, by exact counting.
pub fn verify_sparse(s: &SparseFamily) -> Result<SparseVerdict> {
    let mut verdict = SparseVerdict::new(s);
    let Some(&finest) = s.levels.values().flatten().map(|c| &c.cube.level).max() else {
        return Ok(verdict);
    };
    let grid = &s.grid;
    let mut carrier_count = vec![0u32; grid.cell_count()];
    let mut base_cover = vec![false; grid.cell_count()];
    let first_level = *s.levels.keys().next().expect("nonempty");
    for (&k, cubes) in &s.levels {
        // (i) disjoint within the level
        for (j, q) in cubes.iter().enumerate() {
            if q.cube.beta != s.beta {
                verdict.fail(k, j, "grid", format!("cube {:?} is not in the family's grid", q.cube));
            }
            for (j2, r) in cubes.iter().enumerate().skip(j + 1) {
                if q.cube.intersects(&r.cube) {
                    verdict.fail(k, j, "disjoint", format!("meets cube {j2} of the same level"));
                }
            }
        }
        // (ii) Omega_k within Omega_(k-1)
        if let Some(prev) = s.levels.get(&(k - 1)) {
            for (j, q) in cubes.iter().enumerate() {
                if !prev.iter().any(|p| p.cube.contains(&q.cube)) {
                    verdict.fail(k, j, "nested", format!("not inside any cube of level {}", k - 1));
                }
            }
        } else if k != first_level {
            verdict.fail(k, 0, "nested", format!("level {} is missing", k - 1));
        }
        let next = s.levels.get(&(k + 1));
        for (j, q) in cubes.iter().enumerate() {
            let vol = units(&q.cube, finest)?;
            let mut covered: u128 = 0;
            if let Some(next) = next {
                for r in next {
                    if r.cube.contains(&q.cube) {
                        covered = vol;
                        break;
                    }
                    if q.cube.contains(&r.cube) {
                        covered += units(&r.cube, finest)?;
                    }
                }
            }
            // (iii) |Omega_(k+1) cap Q| <= |Q| / 2, and |Q| <= 2 |E|
            if 2 * covered > vol {
                verdict.fail(k, j, "half-covered", format!("next level covers {covered} of {vol} units"));
            }
            let carrier = vol - covered.min(vol);
            if vol > 2 * carrier {
                verdict.fail(k, j, "carrier-size", format!("carrier has {carrier} of {vol} units"));
            }
            // carrier cells on the box
            let Some(region) = q.cube.region(grid) else { continue };
            for cell in region.cells(grid) {
                if k == first_level {
                    base_cover[cell] = true;
                }
                let coords = grid.cell_coords(cell);
                let in_next = next.is_some_and(|nx| {
                    nx.iter().any(|r| r.cube.region(grid).is_some_and(|rr| rr.contains_cell(grid.dim(), &coords)))
                });
                if !in_next {
                    carrier_count[cell] += 1;
                }
            }
        }
    }
    for (cell, &count) in carrier_count.iter().enumerate() {
        if count > 1 {
            verdict.fail(first_level, 0, "carrier-disjoint", format!("cell {cell} lies in {count} carriers"));
        } else if base_cover[cell] && count == 0 {
            verdict.fail(first_level, 0, "carrier-cover", format!("cell {cell} of the lowest level set is in no carrier"));
        }
    }
    Ok(verdict)
}

/// Re-derives every cube's average from the data and checks
/// `a^k < avg(Q) <= 2^(mn) a^k`, the maximality of `Q`, and that the level
/// sets agree with the dyadic maximal field on the box.
pub fn check_selection(s: &SparseFamily, fs: &SampledFunctions) -> Result<SparseVerdict> {
    if fingerprint(fs) != s.source || *fs.grid() != s.grid {
        return Err(Error::param("sparse family was built from different data"));
    }
    let mut verdict = SparseVerdict::new(s);
    let n = s.grid.dim();
    let mut tree = MassTree::new(fs, s.alpha, s.beta)?;
    let upper = 2f64.powi((s.m * n) as i32);
    for (&k, cubes) in &s.levels {
        for (j, q) in cubes.iter().enumerate() {
            let score = tree.score(&q.cube)?;
            let w = tree.scale(q.cube.level)?;
            let ak = s.a.powi(k);
            if !(score > ak * w) {
                verdict.fail(k, j, "lower-bound", format!("average {} does not exceed {ak}", score / w));
            }
            if !(score <= upper * ak * w) {
                verdict.fail(k, j, "upper-bound", format!("average {} exceeds {}", score / w, upper * ak));
            }
            let p = q.cube.parent()?;
            if tree.mass(&p).is_ok() && tree.exceeds(&p, s.a, k)? {
                verdict.fail(k, j, "maximal", "parent also exceeds the threshold".into());
            }
        }
    }
    // Omega_k on the box equals {M^d > a^k}
    let md = dyadic_maximal(fs, s.alpha, s.beta)?;
    for (&k, cubes) in &s.levels {
        let mut inside = vec![false; s.grid.cell_count()];
        for q in cubes {
            if let Some(r) = q.cube.region(&s.grid) {
                for c in r.cells(&s.grid) {
                    inside[c] = true;
                }
            }
        }
        let ak = s.a.powi(k);
        // the maximal field is rounded independently; only flag clear disagreements
        let tol = 1e-12;
        for (cell, (&v, &ins)) in md.values().iter().zip(&inside).enumerate() {
            let clear_in = v > ak * (1.0 + tol);
            let clear_out = v < ak * (1.0 - tol);
            if (clear_in && !ins) || (clear_out && ins) {
                verdict.fail(k, 0, "level-set", format!("cell {cell}: maximal value {v} vs threshold {ak}"));
            }
        }
    }
    Ok(verdict)
}

#[derive(Clone, Debug, Serialize)]
pub struct NormBound {
    /// `sum_{k,j} a^q avg(Q_j^k)^q nu^q(Q_j^k)`.
    pub bound: f64,
    /// `integral (M^d(f) nu)^q` over the box.
    pub direct: f64,
    pub ratio: f64,
    /// `a^q 2^(mnq) / (1 - a^-q)`, the largest possible ratio.
    pub ratio_limit: f64,
}

/// The sparse reconstitution of `||M^d(f) nu||_q^q`, with
/// `nu = prod w_i` taken from the weights of `fs`.
pub fn sparse_norm_bound(s: &SparseFamily, fs: &SampledFunctions, q: f64) -> Result<NormBound> {
    if fingerprint(fs) != s.source || *fs.grid() != s.grid {
        return Err(Error::param("sparse family was built from different data"));
    }
    if !(q > 0.0) {
        return Err(Error::param(format!("exponent must be positive, got {q}")));
    }
    let grid = s.grid;
    let nu = crate::weights::WeightVector::new(
        fs.weights().to_vec(),
        crate::profile::ExponentProfile::new(grid.dim(), 0.0, vec![1.0; fs.m()])?,
    )?
    .nu(NuConvention::Product);
    let nu_q = SummedAreaTable::new(&nu.map(|v| v.powf(q)));
    let aq = s.a.powf(q);
    let mut bound = 0.0;
    for cubes in s.levels.values() {
        for c in cubes {
            if let Some(r) = c.cube.region(&grid) {
                bound += aq * c.average.powf(q) * nu_q.integral(&r);
            }
        }
    }
    let md = dyadic_maximal(fs, s.alpha, s.beta)?;
    let integrand = md.zip_map(&nu, |m, v| (m * v).powf(q))?;
    let direct = integrand.values().iter().sum::<f64>() * grid.cell_volume();
    let mn = (fs.m() * grid.dim()) as f64;
    let ratio = if direct == 0.0 { if bound == 0.0 { 1.0 } else { f64::INFINITY } } else { bound / direct };
    Ok(NormBound { bound, direct, ratio, ratio_limit: aq * 2f64.powf(mn * q) / (1.0 - 1.0 / aq) })
}

/// The cells of `Omega_k` on the box, for reporting.
pub fn level_set_field(s: &SparseFamily, k: i32) -> Field {
    let mut v = vec![0.0; s.grid.cell_count()];
    if let Some(cubes) = s.levels.get(&k) {
        for q in cubes {
            if let Some(r) = q.cube.region(&s.grid) {
                for c in r.cells(&s.grid) {
                    v[c] = 1.0;
                }
            }
        }
    }
    Field::new(s.grid, v).expect("one value per cell")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_indicator() -> SampledFunctions {
        let g = CellGrid::new(1, 0, 2).unwrap();
        let f = Field::from_fn(g, |c| if c[0] < 3 { 1.0 } else { 0.0 }).unwrap();
        SampledFunctions::unweighted(vec![f]).unwrap()
    }

    #[test]
    fn quarter_indicator_levels() {
        let fs = quarter_indicator();
        let s = build_sparse(&fs, 0.0, 0, Some(4.0)).unwrap();
        let lv = s.levels();
        assert_eq!(lv.keys().copied().collect::<Vec<_>>(), vec![-2, -1]);
        assert_eq!(lv[&-2].len(), 1);
        assert_eq!(lv[&-2][0].cube, DyadicCube::new(1, 0, -1, &[0]).unwrap());
        assert_eq!(lv[&-2][0].average, 0.125);
        assert_eq!(lv[&-1][0].cube, DyadicCube::new(1, 0, 1, &[0]).unwrap());
        assert_eq!(lv[&-1][0].average, 0.5);
        assert!(verify_sparse(&s).unwrap().passed);
        let sel = check_selection(&s, &fs).unwrap();
        assert!(sel.passed, "{:?}", sel.violations);
    }

    #[test]
    fn zero_data_gives_empty_family() {
        let g = CellGrid::new(1, 0, 2).unwrap();
        let fs = SampledFunctions::unweighted(vec![Field::constant(g, 0.0)]).unwrap();
        let s = build_sparse(&fs, 0.0, 0, None).unwrap();
        assert!(s.is_empty());
        assert!(verify_sparse(&s).unwrap().passed);
        let nb = sparse_norm_bound(&s, &fs, 2.0).unwrap();
        assert_eq!((nb.bound, nb.direct), (0.0, 0.0));
    }

    #[test]
    fn three_quarter_cover_fails_half_condition() {
        let g = CellGrid::new(1, 0, 2).unwrap();
        let q = DyadicCube::new(1, 0, 0, &[0]).unwrap();
        let kids: Vec<DyadicCube> = q.children().unwrap().iter().flat_map(|c| c.children().unwrap()).collect();
        let mut levels = BTreeMap::new();
        levels.insert(0, vec![q]);
        levels.insert(1, kids[..3].to_vec());
        let s = SparseFamily::from_levels(g, 0, 4.0, levels);
        let v = verify_sparse(&s).unwrap();
        assert!(!v.passed);
        assert!(v.violations.iter().any(|x| x.property == "half-covered" && x.k == 0 && x.j == 0));
    }

    #[test]
    fn random_inputs_pass_and_bound_dominates() {
        let mut seed = 5u64;
        let mut rnd = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..20 {
            let (n, l, m) = [(1, 4, 1), (1, 3, 2), (2, 1, 1), (2, 1, 2)][trial % 4];
            let g = CellGrid::new(n, 0, l).unwrap();
            let fs: Vec<Field> =
                (0..m).map(|_| Field::from_fn(g, |_| if rnd() < 0.5 { 0.0 } else { rnd() * 10.0 }).unwrap()).collect();
            let fs = SampledFunctions::unweighted(fs).unwrap();
            let alpha = [0.0, 0.5][trial % 2];
            let beta = (trial % (1 << n)) as Shift;
            let s = build_sparse(&fs, alpha, beta, None).unwrap();
            let v = verify_sparse(&s).unwrap();
            assert!(v.passed, "trial {trial}: {:?}", v.violations);
            let v = check_selection(&s, &fs).unwrap();
            assert!(v.passed, "trial {trial}: {:?}", v.violations);
            let nb = sparse_norm_bound(&s, &fs, 2.0).unwrap();
            assert!(nb.ratio >= 1.0 && nb.ratio <= nb.ratio_limit, "trial {trial}: {nb:?}");
        }
    }

    #[test]
    fn mismatched_data_is_rejected() {
        let fs = quarter_indicator();
        let s = build_sparse(&fs, 0.0, 0, None).unwrap();
        let other = SampledFunctions::unweighted(vec![Field::constant(*fs.grid(), 1.0)]).unwrap();
        assert!(sparse_norm_bound(&s, &other, 2.0).is_err());
    }
}
