//! Multiple-weight constants restricted to a finite cube family.
//!
//! Every supremum here runs over the members of a [`CubeFamily`] that lie
//! entirely inside the box (weights are only known there). Reported argmax
//! cubes are the first maximal member in the family's canonical order.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::CubeFamily;
use crate::grid::{CellGrid, Field, Region, SummedAreaTable};
use crate::profile::ExponentProfile;

/// Which product weight `nu` a constant uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NuConvention {
    /// `nu = prod w_i`, used by the `A_(P,q)` class.
    Product,
    /// `nu = prod w_i^(p/p_i)`, used by the `A_P` class.
    Power,
}

/// Weights `w_1..w_m` together with the exponents they are measured against.
#[derive(Clone, Debug)]
pub struct WeightVector {
    weights: Vec<Field>,
    profile: ExponentProfile,
}

impl WeightVector {
    pub fn new(weights: Vec<Field>, profile: ExponentProfile) -> Result<Self> {
        profile.check_basic()?;
        if weights.len() != profile.m() {
            return Err(Error::param(format!(
                "{} weights for a profile with m = {}",
                weights.len(),
                profile.m()
            )));
        }
        let grid = *weights[0].grid();
        for (i, w) in weights.iter().enumerate() {
            if *w.grid() != grid {
                return Err(Error::domain(format!("weight {} is on a different grid", i + 1)));
            }
            if w.values().iter().any(|&v| !(v > 0.0)) {
                return Err(Error::param(format!("weight {} must be positive everywhere", i + 1)));
            }
        }
        Ok(WeightVector { weights, profile })
    }

    pub fn grid(&self) -> &CellGrid {
        self.weights[0].grid()
    }

    pub fn weights(&self) -> &[Field] {
        &self.weights
    }

    pub fn profile(&self) -> &ExponentProfile {
        &self.profile
    }

    pub fn nu(&self, convention: NuConvention) -> Field {
        let p = self.profile.p_total();
        let mut out = Field::constant(*self.grid(), 1.0);
        for (w, &pi) in self.weights.iter().zip(&self.profile.p) {
            out = match convention {
                NuConvention::Product => out.zip_map(w, |a, b| a * b),
                NuConvention::Power => out.zip_map(w, |a, b| a * b.powf(p / pi)),
            }
            .expect("same grid");
        }
        out
    }

    /// `sigma_i = w_i^(-p_i')`; `None` when `p_i = 1`.
    pub fn sigma(&self, i: usize) -> Option<Field> {
        let pp = self.profile.p_prime(i);
        pp.is_finite().then(|| self.weights[i].map(|w| w.powf(-pp)))
    }

    pub fn scaled(&self, c: f64) -> Self {
        WeightVector {
            weights: self.weights.iter().map(|w| w.map(|v| v * c)).collect(),
            profile: self.profile.clone(),
        }
    }
}

/// One cube's contribution to a constant.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantRow {
    pub cube: String,
    pub brackets: Vec<f64>,
    pub product: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantReport {
    pub definition: String,
    pub family: String,
    pub value: f64,
    pub argmax: String,
    pub rows: Vec<ConstantRow>,
}

fn average(sat: &SummedAreaTable, r: &Region) -> f64 {
    sat.integral(r) / r.volume
}

fn region_min(field: &Field, grid: &CellGrid, r: &Region) -> f64 {
    r.cells(grid).into_iter().map(|c| field.values()[c]).fold(f64::INFINITY, f64::min)
}

fn fold_rows(definition: &str, family: &CubeFamily, rows: Vec<ConstantRow>) -> ConstantReport {
    let mut best = 0;
    for (i, row) in rows.iter().enumerate() {
        if row.product > rows[best].product {
            best = i;
        }
    }
    ConstantReport {
        definition: definition.to_string(),
        family: family.describe(),
        value: rows[best].product,
        argmax: rows[best].cube.clone(),
        rows,
    }
}

/// `[w]_A(P,q) = sup_Q (avg_Q nu^q) prod_i (avg_Q w_i^(-p_i'))^(q/p_i')`
/// with `nu = prod w_i`; for `p_i = 1` the `i`-th factor is `(inf_Q w_i)^(-q)`.
pub fn apq_constant(wv: &WeightVector, family: &CubeFamily) -> Result<ConstantReport> {
    let grid = *wv.grid();
    let prof = wv.profile();
    let q = prof.q();
    if !(q > 0.0) {
        return Err(Error::Hypothesis(format!("requires q > 0, got {q}")));
    }
    let members = family.inside_members(&grid)?;
    let nu_q = SummedAreaTable::new(&wv.nu(NuConvention::Product).map(|v| v.powf(q)));
    let sigmas: Vec<Option<SummedAreaTable>> =
        (0..prof.m()).map(|i| wv.sigma(i).map(|s| SummedAreaTable::new(&s))).collect();
    let n = grid.dim();
    let rows = members
        .par_iter()
        .map(|mem| {
            let r = &mem.region;
            let mut brackets = vec![average(&nu_q, r)];
            for (i, sig) in sigmas.iter().enumerate() {
                brackets.push(match sig {
                    Some(sat) => average(sat, r).powf(q / prof.p_prime(i)),
                    None => region_min(&wv.weights[i], &grid, r).powf(-q),
                });
            }
            let product = brackets.iter().product();
            ConstantRow { cube: mem.origin.describe(n), brackets, product }
        })
        .collect();
    Ok(fold_rows("apq", family, rows))
}

/// `[w]_A_P = sup_Q prod_i (avg_Q w_i^(1-p_i'))^(p/p_i') avg_Q nu` with
/// `nu = prod w_i^(p/p_i)`; for `p_i = 1` the `i`-th factor is
/// `(inf_Q w_i)^(-p)`.
pub fn multi_ap_constant(wv: &WeightVector, family: &CubeFamily) -> Result<ConstantReport> {
    let grid = *wv.grid();
    let prof = wv.profile();
    let p = prof.p_total();
    let members = family.inside_members(&grid)?;
    let nu = SummedAreaTable::new(&wv.nu(NuConvention::Power));
    let duals: Vec<Option<SummedAreaTable>> = (0..prof.m())
        .map(|i| {
            let pp = prof.p_prime(i);
            pp.is_finite()
                .then(|| SummedAreaTable::new(&wv.weights[i].map(|w| w.powf(1.0 - pp))))
        })
        .collect();
    let n = grid.dim();
    let rows = members
        .par_iter()
        .map(|mem| {
            let r = &mem.region;
            let mut brackets = Vec::with_capacity(prof.m() + 1);
            for (i, dual) in duals.iter().enumerate() {
                brackets.push(match dual {
                    Some(sat) => average(sat, r).powf(p / prof.p_prime(i)),
                    None => region_min(&wv.weights[i], &grid, r).powf(-p),
                });
            }
            brackets.push(average(&nu, r));
            let product = brackets.iter().product();
            ConstantRow { cube: mem.origin.describe(n), brackets, product }
        })
        .collect();
    Ok(fold_rows("ap", family, rows))
}

/// Fujii–Wilson constant `sup_Q w(Q)^-1 integral_Q M(w chi_Q)`, where `M` is
/// the maximal operator over the same family.
pub fn ainfty_constant(weight: &Field, family: &CubeFamily) -> Result<ConstantReport> {
    let grid = *weight.grid();
    if weight.values().par_iter().any(|&v| !(v > 0.0)) {
        return Err(Error::param("weight must be positive everywhere"));
    }
    let members = family.inside_members(&grid)?;
    let sat = SummedAreaTable::new(weight);
    let n = grid.dim();
    let vol = grid.cell_volume();
    let rows = members
        .iter()
        .map(|mem| {
            let q = mem.region;
            let mass = sat.integral(&q);
            let local = family.sup_field(&grid, |r| sat.integral(&intersect(&q, r, n)) / r.volume)?;
            let maximal_mass: f64 = q.cells(&grid).into_iter().map(|c| local[c]).sum::<f64>() * vol;
            Ok(ConstantRow {
                cube: mem.origin.describe(n),
                brackets: vec![mass, maximal_mass],
                product: maximal_mass / mass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fold_rows("ainfty", family, rows))
}

fn intersect(a: &Region, b: &Region, n: usize) -> Region {
    let mut out = *a;
    for axis in 0..n {
        out.lo[axis] = a.lo[axis].max(b.lo[axis]);
        out.hi[axis] = a.hi[axis].min(b.hi[axis]).max(out.lo[axis]);
    }
    out
}

/// Constant of the sharp reverse Hölder inequality, `c_n = 2^(11+n)`.
pub fn reverse_holder_constant(n: usize) -> f64 {
    2f64.powi(11 + n as i32)
}

/// `r(w) = 1 + 1 / (c_n [w]_A_infty)`.
pub fn reverse_holder_exponent(n: usize, ainfty: f64) -> f64 {
    1.0 + 1.0 / (reverse_holder_constant(n) * ainfty)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReverseHolderReport {
    pub family: String,
    pub ainfty: f64,
    pub exponent: f64,
    /// `r(w)'`, to be compared with `[w]_A_infty` (no constant is asserted).
    pub exponent_conjugate: f64,
    /// `max_Q (avg_Q w^r)^(1/r) / (2 avg_Q w)`.
    pub worst_ratio: f64,
    pub worst_cube: String,
    pub cubes_checked: usize,
    pub passed: bool,
}

/// Evaluates `(avg_Q w^r)^(1/r) <= 2 avg_Q w` on every inside member.
/// Failures are reported, not raised: a restricted `A_infty` constant can
/// undershoot the true one and inflate `r`.
pub fn reverse_holder_check(weight: &Field, family: &CubeFamily) -> Result<ReverseHolderReport> {
    let grid = *weight.grid();
    let ainfty = ainfty_constant(weight, family)?.value;
    let r = reverse_holder_exponent(grid.dim(), ainfty);
    let members = family.inside_members(&grid)?;
    let plain = SummedAreaTable::new(weight);
    let powered = SummedAreaTable::new(&weight.map(|w| w.powf(r)));
    let n = grid.dim();
    let mut worst = (f64::NEG_INFINITY, String::new());
    for mem in &members {
        let lhs = average(&powered, &mem.region).powf(1.0 / r);
        let rhs = 2.0 * average(&plain, &mem.region);
        let ratio = lhs / rhs;
        if ratio > worst.0 {
            worst = (ratio, mem.origin.describe(n));
        }
    }
    Ok(ReverseHolderReport {
        family: family.describe(),
        ainfty,
        exponent: r,
        exponent_conjugate: crate::profile::conjugate(r),
        worst_ratio: worst.0,
        worst_cube: worst.1,
        cubes_checked: members.len(),
        passed: worst.0 <= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, l: u32) -> CellGrid {
        CellGrid::new(n, 0, l).unwrap()
    }

    fn lcg_field(g: CellGrid, seed: u64, lo: f64, hi: f64) -> Field {
        let mut s = seed;
        Field::from_fn(g, |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            lo + (hi - lo) * ((s >> 11) as f64 / (1u64 << 53) as f64)
        })
        .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn unit_weights_give_unit_constants() {
        let g = grid(1, 3);
        let prof = ExponentProfile::new(1, 0.5, vec![2.0, 2.0]).unwrap();
        let wv = WeightVector::new(vec![Field::constant(g, 1.0); 2], prof).unwrap();
        for fam in [CubeFamily::DyadicUnion, CubeFamily::AllCubes] {
            assert!(rel(apq_constant(&wv, &fam).unwrap().value, 1.0) < 1e-12);
            assert!(rel(multi_ap_constant(&wv, &fam).unwrap().value, 1.0) < 1e-12);
        }
        let one = Field::constant(g, 1.0);
        assert!(rel(ainfty_constant(&one, &CubeFamily::DyadicUnion).unwrap().value, 1.0) < 1e-12);
    }

    #[test]
    fn constant_weights_cancel_in_ap() {
        let g = grid(2, 1);
        let prof = ExponentProfile::new(2, 0.0, vec![2.0, 3.0]).unwrap();
        let wv = WeightVector::new(vec![Field::constant(g, 3.5), Field::constant(g, 0.2)], prof).unwrap();
        assert!(rel(multi_ap_constant(&wv, &CubeFamily::DyadicUnion).unwrap().value, 1.0) < 1e-12);
    }

    #[test]
    fn single_weight_matches_classical_apq() {
        let g = grid(1, 4);
        let w = lcg_field(g, 7, 0.1, 5.0);
        let (p, alpha) = (1.5, 0.25);
        let prof = ExponentProfile::new(1, alpha, vec![p]).unwrap();
        let q = prof.q();
        let pp = p / (p - 1.0);
        let wv = WeightVector::new(vec![w.clone()], prof).unwrap();
        let fam = CubeFamily::AllCubes;
        let got = apq_constant(&wv, &fam).unwrap().value;
        // direct two-loop classical A_{p,q}
        let n = g.cells_per_side();
        let mut best: f64 = 0.0;
        for side in 1..=n {
            for lo in 0..=n - side {
                let cells = &w.values()[lo..lo + side];
                let a: f64 = cells.iter().map(|v| v.powf(q)).sum::<f64>() / side as f64;
                let b: f64 = cells.iter().map(|v| v.powf(-pp)).sum::<f64>() / side as f64;
                best = best.max(a * b.powf(q / pp));
            }
        }
        assert!(rel(got, best) < 1e-12, "{got} vs {best}");
    }

    #[test]
    fn ap_matches_direct_loop_on_tiny_grid() {
        let g = grid(2, 0);
        let prof = ExponentProfile::new(2, 0.0, vec![2.0, 4.0]).unwrap();
        let ws = vec![lcg_field(g, 1, 0.2, 3.0), lcg_field(g, 2, 0.5, 2.0)];
        let wv = WeightVector::new(ws.clone(), prof.clone()).unwrap();
        let fam = CubeFamily::AllCubes;
        let got = multi_ap_constant(&wv, &fam).unwrap().value;
        let p = prof.p_total();
        let side = g.cells_per_side();
        let mut best: f64 = 0.0;
        for l in 1..=side {
            for x in 0..=side - l {
                for y in 0..=side - l {
                    let mut cells = Vec::new();
                    for a in x..x + l {
                        for b in y..y + l {
                            cells.push(a * side + b);
                        }
                    }
                    let avg = |f: &dyn Fn(usize) -> f64| cells.iter().map(|&c| f(c)).sum::<f64>() / cells.len() as f64;
                    let mut prod = avg(&|c| ws[0].values()[c].powf(p / 2.0) * ws[1].values()[c].powf(p / 4.0));
                    for (w, pi) in ws.iter().zip([2.0f64, 4.0]) {
                        let pp = pi / (pi - 1.0);
                        prod *= avg(&|c| w.values()[c].powf(1.0 - pp)).powf(p / pp);
                    }
                    best = best.max(prod);
                }
            }
        }
        assert!(rel(got, best) < 1e-12, "{got} vs {best}");
    }

    #[test]
    fn simultaneous_scaling_leaves_constants_invariant() {
        let g = grid(1, 3);
        let prof = ExponentProfile::new(1, 0.5, vec![2.0, 3.0]).unwrap();
        let wv = WeightVector::new(vec![lcg_field(g, 3, 0.5, 2.0), lcg_field(g, 4, 0.1, 1.0)], prof).unwrap();
        let fam = CubeFamily::DyadicUnion;
        for c in [2.0, 0.37, 11.0] {
            let s = wv.scaled(c);
            assert!(rel(apq_constant(&s, &fam).unwrap().value, apq_constant(&wv, &fam).unwrap().value) < 1e-12);
            assert!(rel(multi_ap_constant(&s, &fam).unwrap().value, multi_ap_constant(&wv, &fam).unwrap().value) < 1e-12);
        }
    }

    #[test]
    fn inf_convention_keeps_scale_invariance() {
        let g = grid(1, 3);
        let prof = ExponentProfile::new(1, 0.5, vec![1.0, 2.0]).unwrap();
        let wv = WeightVector::new(vec![lcg_field(g, 5, 0.5, 2.0), lcg_field(g, 6, 0.1, 1.0)], prof).unwrap();
        let fam = CubeFamily::DyadicUnion;
        let s = wv.scaled(3.0);
        assert!(rel(apq_constant(&s, &fam).unwrap().value, apq_constant(&wv, &fam).unwrap().value) < 1e-12);
        assert!(rel(multi_ap_constant(&s, &fam).unwrap().value, multi_ap_constant(&wv, &fam).unwrap().value) < 1e-12);
    }

    #[test]
    fn larger_family_never_decreases_constants() {
        let g = grid(1, 4);
        let prof = ExponentProfile::new(1, 0.25, vec![2.0, 2.0]).unwrap();
        let w = lcg_field(g, 9, 0.05, 4.0);
        let wv = WeightVector::new(vec![w.clone(), lcg_field(g, 10, 0.2, 1.5)], prof).unwrap();
        let small = CubeFamily::Dyadic { beta: 0 };
        let union = CubeFamily::DyadicUnion;
        let all = CubeFamily::AllCubes;
        let a = apq_constant(&wv, &small).unwrap().value;
        let b = apq_constant(&wv, &union).unwrap().value;
        let c = apq_constant(&wv, &all).unwrap().value;
        assert!(a <= b && b <= c);
        let a = ainfty_constant(&w, &small).unwrap().value;
        let b = ainfty_constant(&w, &union).unwrap().value;
        assert!(a <= b * (1.0 + 1e-12));
    }

    #[test]
    fn ainfty_is_at_least_one() {
        let g = grid(1, 4);
        for seed in 0..5 {
            let w = lcg_field(g, seed, 0.01, 10.0);
            for fam in [CubeFamily::DyadicUnion, CubeFamily::AllCubes] {
                assert!(ainfty_constant(&w, &fam).unwrap().value >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn reverse_holder_on_flat_and_spiky_weights() {
        let g = grid(1, 3);
        let one = Field::constant(g, 1.0);
        let rep = reverse_holder_check(&one, &CubeFamily::DyadicUnion).unwrap();
        assert!(rel(rep.worst_ratio, 0.5) < 1e-12);
        assert!(rep.passed);
        let spike = Field::from_fn(g, |c| if c[0] == 5 { 1e6 } else { 1.0 }).unwrap();
        let rep = reverse_holder_check(&spike, &CubeFamily::DyadicUnion).unwrap();
        assert!(rep.ainfty > 1.0);
        assert!(rep.worst_ratio.is_finite());
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn empty_family_and_bad_weights_are_rejected() {
        let g = grid(1, 1);
        let prof = ExponentProfile::new(1, 0.0, vec![2.0]).unwrap();
        assert!(WeightVector::new(vec![Field::constant(g, 0.0)], prof.clone()).is_err());
        let wv = WeightVector::new(vec![Field::constant(g, 1.0)], prof).unwrap();
        assert!(apq_constant(&wv, &CubeFamily::Explicit { cubes: vec![] }).is_err());
    }
}
