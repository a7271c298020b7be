//! End-to-end acceptance checks. Runs without the libtest harness so the
//! PASS/FAIL line of every criterion is always shown; exits nonzero if any fails.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use roughmax::cli::{preset, Command, RunConfig};
use roughmax::dyadic::{enclosing_dyadic, shift_count, side_ratio, DyadicCube};
use roughmax::experiments::{
    default_eps, ols, sharpness_run, two_weight_check, weaktype_run, TwoWeightConfig, WeakCase,
};
use roughmax::grid::product_average_region;
use roughmax::kernels::RoughKernel;
use roughmax::operators::{
    dyadic_maximal, frac_integral, geometric_mean_domination_check, maximal_alpha, rough_maximal,
    rough_vs_smooth_check, shift_constant, shift_domination_sides, Budget,
};
use roughmax::presets::{sign_kernel, FunctionSpec};
use roughmax::sparse::{build_sparse, check_selection, default_base, verify_sparse};
use roughmax::{CellGrid, Cube, CubeFamily, ExponentProfile, Field, SampledFunctions};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_field(grid: CellGrid, rng: &mut ChaCha8Rng) -> Field {
    let zeros: f64 = rng.gen_range(0.0..0.6);
    let values = (0..grid.cell_count())
        .map(|_| if rng.gen_bool(zeros) { 0.0 } else { rng.gen_range(0.0..4.0) })
        .collect();
    Field::new(grid, values).unwrap()
}

fn random_functions(grid: CellGrid, m: usize, rng: &mut ChaCha8Rng) -> SampledFunctions {
    SampledFunctions::unweighted((0..m).map(|_| random_field(grid, rng)).collect()).unwrap()
}

fn spec(json: &str) -> FunctionSpec {
    serde_json::from_str(json).unwrap()
}

fn drift(a: f64, b: f64) -> f64 {
    ((b - a) / a).abs()
}

fn sharp_profile() -> ExponentProfile {
    ExponentProfile::new(1, 0.5, vec![2.0, 2.0]).unwrap()
}

fn c1_sharpness() -> Outcome {
    let rep = sharpness_run(&sharp_profile(), &default_eps()).map_err(|e| e.to_string())?;
    // r' (1 - alpha/(mn)) / q with r = p_i = 2, q = 2
    let target = 2.0 * (1.0 - 0.5 / 2.0) / 2.0;
    let err = (rep.gamma_hat - target).abs();
    ensure(err <= 0.05 * target, format!("gamma_hat = {:.5}, target {target}, |err| = {err:.5}", rep.gamma_hat))
}

fn c2_norm_identity() -> Outcome {
    let rep = sharpness_run(&sharp_profile(), &default_eps()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for row in &rep.rows {
        // 1/p = 1/2 + 1/2
        let target = 1.0 / row.eps;
        worst = worst.max(((row.norm_product - target) / target).abs());
    }
    ensure(worst <= 2f64.powi(-40), format!("{} eps values, worst relative error {worst:.3e}", rep.rows.len()))
}

fn c3_apq_growth() -> Outcome {
    let prof = sharp_profile();
    let rep = sharpness_run(&prof, &default_eps()).map_err(|e| e.to_string())?;
    let x: Vec<f64> = rep.rows.iter().map(|r| (1.0 / r.eps).ln()).collect();
    let y: Vec<f64> = rep.rows.iter().map(|r| r.apq.ln()).collect();
    let (slope, _) = ols(&x, &y).map_err(|e| e.to_string())?;
    let p = 1.0 / prof.p.iter().map(|p| 1.0 / p).sum::<f64>();
    let q = 1.0 / (1.0 / p - prof.alpha / prof.n as f64);
    let target = q * (prof.m() as f64 - 1.0 / p);
    let err = (slope - target).abs() / target;
    ensure(err <= 0.05, format!("slope {slope:.4} vs q(m - 1/p) = {target}, relative error {err:.4}"))
}

fn c4_shift_domination() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let budget = Budget::default();
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = 1 + case % 2;
        let m = rng.gen_range(1..=2);
        let level = if n == 1 { rng.gen_range(0..=5) } else { rng.gen_range(0..=3) };
        let grid = CellGrid::new(n, 0, level).unwrap();
        let fs = random_functions(grid, m, &mut rng);
        let alpha = rng.gen_range(0.0..(m * n) as f64 * 0.9);
        let (lhs, rhs) = shift_domination_sides(&fs, alpha, &budget).map_err(|e| e.to_string())?;
        // both sides are recomputed from the operators themselves
        let c = 6f64.powf((m * n) as f64 - alpha);
        if (shift_constant(m, n, alpha) - c).abs() > 1e-12 * c {
            return Err(format!("case {case}: constant {} != 6^(mn-alpha) = {c}", shift_constant(m, n, alpha)));
        }
        let mut sum = vec![0.0; grid.cell_count()];
        for beta in 0..shift_count(n) {
            let d = dyadic_maximal(&fs, alpha, beta).map_err(|e| e.to_string())?;
            for (s, v) in sum.iter_mut().zip(d.values()) {
                *s += v;
            }
        }
        let all = maximal_alpha(&fs, alpha, &CubeFamily::AllCubes).map_err(|e| e.to_string())?;
        for cell in 0..grid.cell_count() {
            let (l, r) = (all.values()[cell], c * sum[cell]);
            if lhs.values()[cell] != l || (rhs.values()[cell] - r).abs() > 1e-12 * r {
                return Err(format!("case {case}: sides disagree with the operators at cell {cell}"));
            }
            if l > r * (1.0 + 1e-12) {
                return Err(format!("case {case} (n={n}, m={m}, L={level}): {l} > {r} at cell {cell}"));
            }
            if l > 0.0 {
                worst = worst.max(l / r);
            }
        }
    }
    ensure(true, format!("100 inputs, largest lhs/rhs = {worst:.4}"))
}

fn c5_sparse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cubes = 0;
    for case in 0..500 {
        let n = rng.gen_range(1..=2);
        let m = rng.gen_range(1..=2);
        let level = if n == 1 { rng.gen_range(0..=5) } else { rng.gen_range(0..=3) };
        let grid = CellGrid::new(n, rng.gen_range(0..=1), level).unwrap();
        let fs = random_functions(grid, m, &mut rng);
        let alpha = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..(m * n) as f64 * 0.9) };
        let beta = rng.gen_range(0..shift_count(n));
        let s = build_sparse(&fs, alpha, beta, None).map_err(|e| e.to_string())?;
        let v = verify_sparse(&s).map_err(|e| e.to_string())?;
        let sel = check_selection(&s, &fs).map_err(|e| e.to_string())?;
        if !v.passed || !sel.passed {
            let first = v.violations.iter().chain(&sel.violations).next().cloned();
            return Err(format!("case {case}: {first:?}"));
        }
        // independent two-sided bound from naive cell sums
        let a = default_base(m, n);
        let top = 2f64.powi((m * n) as i32);
        for (&k, level_cubes) in s.levels() {
            for c in level_cubes {
                let region = c.cube.region(&grid).ok_or("selected cube misses the box")?;
                let vol = region.volume;
                let mut avg = 1.0;
                for f in fs.functions() {
                    let sum: f64 = region.cells(&grid).iter().map(|&i| f.values()[i]).sum();
                    avg *= vol.powf(alpha / (m * n) as f64 - 1.0) * sum * grid.cell_volume();
                }
                let ak = a.powi(k);
                if !(avg > ak * (1.0 - 1e-12) && avg <= top * ak * (1.0 + 1e-12)) {
                    return Err(format!("case {case}: average {avg} outside (a^{k}, 2^mn a^{k}] = ({ak}, {}]", top * ak));
                }
                cubes += 1;
            }
        }
    }
    ensure(true, format!("500 inputs, {cubes} selected cubes, all invariants hold"))
}

fn c6_covering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.gen_range(1..=3);
        let level = rng.gen_range(0..=if n == 3 { 3 } else { 6 });
        let grid = CellGrid::new(n, rng.gen_range(0..=2), level).unwrap();
        let side_cells = grid.cells_per_side();
        let side = rng.gen_range(1..=side_cells);
        let lower: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=side_cells - side)).collect();
        let cube = Cube::new(&grid, &lower, side).unwrap();
        let (beta, q) = enclosing_dyadic(&grid, &cube);
        let (num, den) = side_ratio(&grid, &cube, &q);
        // exact containment in units of 1/(3 * 2^60)
        let (lo, s) = DyadicCube::exact_box(&grid, &cube);
        let inside = (0..n).all(|a| q.lower_exact(a) <= lo[a] && lo[a] + s <= q.lower_exact(a) + q.side_exact());
        if q.beta != beta || !inside || num > 6 * den {
            return Err(format!("case {case}: cube {cube:?} got {q:?} with ratio {num}/{den}"));
        }
        worst = worst.max(num as f64 / den as f64);
    }
    ensure(true, format!("1000 cubes, largest side ratio {worst}"))
}

/// Brute force over every cube of `D_beta` at every level, with the same
/// per-cube reduction as the library.
fn brute_dyadic(fs: &SampledFunctions, alpha: f64, beta: u8) -> Vec<f64> {
    let grid = *fs.grid();
    let n = grid.dim();
    let mut cubes = BTreeSet::new();
    for level in -(grid.domain_exp() as i32) - 2..=grid.level() as i32 {
        for cell in 0..grid.cell_count() {
            let c = grid.cell_coords(cell);
            let unit = Cube::new(&grid, &c[..n], 1).unwrap();
            let (lo, _) = DyadicCube::exact_box(&grid, &unit);
            cubes.insert(DyadicCube::containing_point(n, beta, level, &lo[..n]).unwrap());
        }
    }
    let mut out = vec![0.0f64; grid.cell_count()];
    for q in cubes {
        let region = q.region(&grid).unwrap();
        let v = product_average_region(fs.function_tables(), &region, alpha, n);
        for cell in region.cells(&grid) {
            out[cell] = out[cell].max(v);
        }
    }
    out
}

fn c7_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for (n, levels) in [(1usize, 0..=6u32), (2, 0..=3)] {
        for level in levels {
            let grid = CellGrid::new(n, 0, level).unwrap();
            for m in 1..=2 {
                let fs = random_functions(grid, m, &mut rng);
                let alpha = rng.gen_range(0.0..(m * n) as f64 * 0.9);
                for beta in 0..shift_count(n) {
                    let fast = dyadic_maximal(&fs, alpha, beta).map_err(|e| e.to_string())?;
                    let slow = brute_dyadic(&fs, alpha, beta);
                    if fast.values().iter().zip(&slow).any(|(a, b)| a.to_bits() != b.to_bits()) {
                        return Err(format!("mismatch at n={n}, L={level}, m={m}, beta={beta}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    ensure(true, format!("{checked} grid/shift combinations bitwise equal"))
}

fn c8_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let budget = Budget::default();
    for case in 0..50 {
        let n = rng.gen_range(1..=2);
        let m = rng.gen_range(1..=2);
        let grid = CellGrid::new(n, 0, rng.gen_range(0..=if n == 1 { 4 } else { 2 })).unwrap();
        let fs = random_functions(grid, m, &mut rng);
        let alpha = rng.gen_range(0.0..(m * n) as f64 * 0.9);
        let family = [CubeFamily::DyadicUnion, CubeFamily::AllCubes, CubeFamily::Dyadic { beta: 0 }][case % 3].clone();
        let kernel = RoughKernel::constant(n, m, 1.0, 2.0).map_err(|e| e.to_string())?;
        let rough = rough_maximal(&fs, &kernel, alpha, &family, &budget).map_err(|e| e.to_string())?;
        let plain = maximal_alpha(&fs, alpha, &family).map_err(|e| e.to_string())?;
        if rough.values() != plain.values() {
            return Err(format!("case {case}: fields differ"));
        }
    }
    ensure(true, "50 inputs equal cellwise".into())
}

fn holder_constant(m: usize, level: u32) -> roughmax::Result<f64> {
    let grid = CellGrid::new(1, 0, level)?;
    let functions = (0..m)
        .map(|i| spec(&format!(r#"{{"kind":"random","seed":{},"level":3,"zero_fraction":0.25}}"#, 90 + i)).sample(&grid, 0))
        .collect::<roughmax::Result<Vec<_>>>()?;
    let fs = SampledFunctions::unweighted(functions)?;
    let alpha = if m == 1 { 0.25 } else { 0.5 };
    let r = rough_vs_smooth_check(&fs, &sign_kernel(m, 2.0)?, alpha, &CubeFamily::DyadicUnion, &Budget::default())?;
    Ok(r.constant.value)
}

fn c9_holder() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for m in 1..=2 {
        let (a, b) = (holder_constant(m, 4).map_err(|e| e.to_string())?, holder_constant(m, 5).map_err(|e| e.to_string())?);
        let d = drift(a, b);
        ok &= a.is_finite() && b.is_finite() && a <= 1.0 + 1e-12 && d < 0.05;
        parts.push(format!("m={m}: C = {a:.4} -> {b:.4}, drift {d:.4}"));
    }
    ensure(ok, parts.join("; "))
}

fn geometric_constant(level: u32) -> roughmax::Result<f64> {
    let grid = CellGrid::new(1, 0, level)?;
    let f = spec(r#"{"kind":"indicator","lo":[0],"hi":[0.5]}"#).sample(&grid, 0)?;
    let fs = SampledFunctions::unweighted(vec![f])?;
    let kernel = RoughKernel::constant(1, 1, 1.0, f64::INFINITY)?;
    let r = geometric_mean_domination_check(&fs, &kernel, 0.5, 0.25, &CubeFamily::DyadicUnion, 33, &Budget::default())?;
    Ok(r.constant.value)
}

fn c10_geometric_mean() -> Outcome {
    let (a, b) = (geometric_constant(5).map_err(|e| e.to_string())?, geometric_constant(6).map_err(|e| e.to_string())?);
    let d = drift(a, b);
    let grid = CellGrid::new(1, 1, 4).unwrap();
    let f = spec(r#"{"kind":"indicator","lo":[0],"hi":[1]}"#).sample(&grid, 0).unwrap();
    let fs = SampledFunctions::unweighted(vec![f]).unwrap();
    let kernel = RoughKernel::constant(1, 1, 1.0, f64::INFINITY).unwrap();
    let spot = frac_integral(&fs, &kernel, 0.5, &[0.5], f64::INFINITY, &Budget::default()).map_err(|e| e.to_string())?;
    // integral_{x-1}^{x} |y|^(alpha-1) dy = (x^alpha + (1-x)^alpha)/alpha
    let (x, alpha): (f64, f64) = (0.5, 0.5);
    let oracle = (x.powf(alpha) + (1.0 - x).powf(alpha)) / alpha;
    let spot_err = drift(oracle, spot);
    ensure(
        a.is_finite() && b.is_finite() && d < 0.10 && spot_err < 0.02 && (oracle - 2.0 * 2f64.sqrt()).abs() < 1e-12,
        format!("C = {a:.4} -> {b:.4}, drift {d:.4}; I(0.5) = {spot:.6} vs {oracle:.6}"),
    )
}

fn weak_config(p: [f64; 2]) -> RunConfig {
    let mut cfg = preset(Command::Weaktype);
    cfg.profile.p = p.to_vec();
    cfg.weights = p.iter().map(|&pi| FunctionSpec::ExtremalWeight { eps: 0.5, p: pi }).collect();
    cfg
}

fn c11_weak_type() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut cases = BTreeSet::new();
    for p in [[1.0, 1.0], [2.0, 2.0], [1.0, 2.0]] {
        let cfg = weak_config(p);
        let prof = cfg.profile().map_err(|e| e.to_string())?;
        cases.insert(format!("{:?}", WeakCase::of(&prof)));
        let mut ratios = Vec::new();
        for level in [5, 6] {
            let fs = cfg.sampled(level, 0).map_err(|e| e.to_string())?;
            let r = weaktype_run(&fs, &prof, &cfg.family).map_err(|e| e.to_string())?;
            ratios.push(r.ratio);
        }
        ok &= ratios.iter().all(|r| r.is_finite() && *r > 0.0) && ratios[1] <= 1.10 * ratios[0];
        parts.push(format!("p={p:?} ({:?}): {:.4} -> {:.4}", WeakCase::of(&prof), ratios[0], ratios[1]));
    }
    ok &= cases.len() == 3;
    ensure(ok, parts.join("; "))
}

fn two_weight_constant(u: &FunctionSpec, v: &FunctionSpec, level: u32) -> roughmax::Result<(f64, f64)> {
    let cfg = preset(Command::Twoweight);
    let prof = cfg.profile()?;
    let fs = cfg.sampled(level, 0)?;
    let grid = *fs.grid();
    let tw = TwoWeightConfig::new(u.sample(&grid, 0)?, vec![v.sample(&grid, 0)?; 2], vec![2.0, 2.0])?;
    let r = two_weight_check(&fs, &tw, &prof, &cfg.family)?;
    Ok((r.testing.value, r.constant))
}

fn c12_two_weight() -> Outcome {
    let one = FunctionSpec::Constant { value: 1.0 };
    let mut parts = Vec::new();
    let mut ok = true;
    for level in [5, 6] {
        let (k, c) = two_weight_constant(&one, &one, level).map_err(|e| e.to_string())?;
        ok &= k == 1.0 && c.is_finite();
        parts.push(format!("unit L={level}: K = {k}, C = {c:.4}"));
    }
    let u = spec(r#"{"kind":"power","coef":1,"exponent":0.5}"#);
    let v = spec(r#"{"kind":"power","coef":1,"exponent":-0.25}"#);
    let (k5, c5) = two_weight_constant(&u, &v, 5).map_err(|e| e.to_string())?;
    let (k6, c6) = two_weight_constant(&u, &v, 6).map_err(|e| e.to_string())?;
    let d = drift(c5, c6);
    ok &= [k5, k6, c5, c6].iter().all(|x| x.is_finite() && *x > 0.0) && d < 0.10;
    parts.push(format!("power: K = {k5:.4} -> {k6:.4}, C = {c5:.4} -> {c6:.4}, drift {d:.4}"));
    ensure(ok, parts.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("sharpness exponent", c1_sharpness),
        ("extremal norm identity", c2_norm_identity),
        ("weight constant growth", c3_apq_growth),
        ("shift domination", c4_shift_domination),
        ("sparse invariants", c5_sparse),
        ("covering by shifted dyadic cubes", c6_covering),
        ("dyadic fast path vs brute force", c7_oracle),
        ("unit kernel reduction", c8_reduction),
        ("pointwise Holder bound", c9_holder),
        ("geometric-mean domination", c10_geometric_mean),
        ("weak type", c11_weak_type),
        ("two-weight testing", c12_two_weight),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match &outcome {
            Ok(d) => println!("criterion {:2} PASS  {name}: {d}", i + 1),
            Err(d) => {
                println!("criterion {:2} FAIL  {name}: {d}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
