//! End-to-end studies: the sharp weight exponent on the extremal family,
//! the weak-type functional, and two-weight testing constants.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::ExtremalFamily;
use crate::error::{Error, Result};
use crate::family::CubeFamily;
use crate::grid::{lp_norm, weak_norm, Cube, Field, Region, SampledFunctions, SummedAreaTable};
use crate::operators::maximal_alpha;
use crate::profile::{conjugate, ExponentProfile};
use crate::weights::{apq_constant, NuConvention, WeightVector};

/// Relative tolerance on the fitted exponent.
pub const SLOPE_TOLERANCE: f64 = 0.05;

/// `eps = 2^-3, ..., 2^-12`.
pub fn default_eps() -> Vec<f64> {
    (3..=12).map(|j| (-(j as f64)).exp2()).collect()
}

/// Ordinary least squares `y ~ slope x + intercept`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::param("least squares needs at least two paired points"));
    }
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::param("least squares needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Reference exponents for one `s'`.
#[derive(Clone, Debug, Serialize)]
pub struct ExponentRefs {
    pub s_prime: f64,
    /// `mp/(q(mp - s')) (1 - s' alpha/(mn))`.
    pub gamma_low: f64,
    /// `(1/q)(1 - s' alpha/(mn)) max_i (p_i/s')'`.
    pub gamma_high: f64,
    /// `r'(1 - s' alpha/(mn))/q` when every `p_i = s' r`.
    pub gamma_sharp: Option<f64>,
}

pub fn reference_exponents(profile: &ExponentProfile, s_prime: f64) -> ExponentRefs {
    let m = profile.m() as f64;
    let mn = m * profile.n as f64;
    let p = profile.p_total();
    let q = profile.q();
    let factor = 1.0 - s_prime * profile.alpha / mn;
    let pmax = profile.p.iter().map(|pi| conjugate(pi / s_prime)).fold(f64::NEG_INFINITY, f64::max);
    ExponentRefs {
        s_prime,
        gamma_low: m * p / (q * (m * p - s_prime)) * factor,
        gamma_high: factor * pmax / q,
        gamma_sharp: profile.equal_exponents().then(|| conjugate(profile.p[0] / s_prime) * factor / q),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SharpnessRow {
    pub eps: f64,
    pub norm_product: f64,
    pub norm_product_target: f64,
    pub apq: f64,
    pub apq_interval: (f64, f64),
    pub maximal_lower: f64,
    /// `||M_alpha(f)||_{L^q(nu^q)} / prod ||f_i||`, bounded below.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SharpnessReport {
    pub profile: ExponentProfile,
    pub rows: Vec<SharpnessRow>,
    /// Least-squares slope of `log ratio` against `log [w]_A(P,q)`.
    pub gamma_hat: f64,
    pub intercept: f64,
    /// Slope of `log [w]` against `log(1/eps)`; tends to `q(m - 1/p)`.
    pub apq_slope: f64,
    /// Slope of `log prod ||f_i||` against `log(1/eps)`; equals `1/p`.
    pub norm_slope: f64,
    pub gamma_low: f64,
    pub gamma_high: f64,
    pub gamma_sharp: Option<f64>,
    /// The same references for the kernel's `s'` (if any).
    pub refs: Vec<ExponentRefs>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Fits the exponent of `[w]` on the extremal family over `eps_list`.
pub fn sharpness_run(profile: &ExponentProfile, eps_list: &[f64]) -> Result<SharpnessReport> {
    sharpness_run_scaled(profile, eps_list, &vec![1.0; profile.m()])
}

/// As [`sharpness_run`] with `f_i` multiplied by `coefs[i]`.
pub fn sharpness_run_scaled(profile: &ExponentProfile, eps_list: &[f64], coefs: &[f64]) -> Result<SharpnessReport> {
    if profile.n != 1 {
        return Err(Error::param(format!("the sharpness study is one-dimensional, got n = {}", profile.n)));
    }
    profile.require_weighted_range()?;
    if let Some(pi) = profile.p.iter().find(|&&pi| !(pi > 1.0)) {
        return Err(Error::Hypothesis(format!("requires 1 < p_i, got p_i = {pi}")));
    }
    if eps_list.len() < 3 {
        return Err(Error::param(format!("at least 3 eps values are required, got {}", eps_list.len())));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::param("eps values must be strictly decreasing in (0, 1)"));
    }
    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let fam = ExtremalFamily::with_coefficients(eps, profile.clone(), coefs.to_vec())?;
            let r = fam.norms()?;
            Ok(SharpnessRow {
                eps,
                norm_product: r.norm_product,
                norm_product_target: r.norm_product_target,
                apq: r.apq,
                apq_interval: r.apq_interval,
                maximal_lower: r.maximal_lower,
                ratio: r.ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let log_w: Vec<f64> = rows.iter().map(|r| r.apq.ln()).collect();
    let log_r: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
    let log_inv: Vec<f64> = rows.iter().map(|r| -r.eps.ln()).collect();
    let (gamma_hat, intercept) = ols(&log_w, &log_r)?;
    let (apq_slope, _) = ols(&log_inv, &log_w)?;
    let log_n: Vec<f64> = rows.iter().map(|r| r.norm_product.ln()).collect();
    let (norm_slope, _) = ols(&log_inv, &log_n)?;
    let base = reference_exponents(profile, 1.0);
    let mut refs = vec![base.clone()];
    if let Some(sp) = profile.s_prime() {
        if sp > 1.0 && profile.p.iter().all(|&pi| sp < pi) {
            refs.push(reference_exponents(profile, sp));
        }
    }
    let tol = SLOPE_TOLERANCE;
    let mut passed = gamma_hat >= base.gamma_low * (1.0 - tol);
    if let Some(g) = base.gamma_sharp {
        passed &= (gamma_hat - g).abs() <= tol * g;
    }
    Ok(SharpnessReport {
        profile: profile.clone(),
        rows,
        gamma_hat,
        intercept,
        apq_slope,
        norm_slope,
        gamma_low: base.gamma_low,
        gamma_high: base.gamma_high,
        gamma_sharp: base.gamma_sharp,
        refs,
        tolerance: tol,
        passed,
    })
}

/// The three exponent patterns of the weak-type estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeakCase {
    AllOne,
    AllAboveOne,
    Mixed,
}

impl WeakCase {
    pub fn of(profile: &ExponentProfile) -> Self {
        let ones = profile.p.iter().filter(|&&p| p == 1.0).count();
        match ones {
            0 => WeakCase::AllAboveOne,
            k if k == profile.m() => WeakCase::AllOne,
            _ => WeakCase::Mixed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakTypeReport {
    pub case: WeakCase,
    pub q: f64,
    /// `||M_alpha(f) nu||_{L^{q,inf}}` over the box.
    pub weak_norm: f64,
    pub apq: f64,
    pub apq_argmax: String,
    pub norm_product: f64,
    /// `weak_norm / ([w]^(1/q) prod ||f_i||_{L^p_i(w_i^p_i)})`.
    pub ratio: f64,
    pub family: String,
}

/// The weak-type functional for the functions and weights of `fs`.
pub fn weaktype_run(fs: &SampledFunctions, profile: &ExponentProfile, family: &CubeFamily) -> Result<WeakTypeReport> {
    profile.require_weak_range()?;
    let grid = *fs.grid();
    if profile.n != grid.dim() || profile.m() != fs.m() {
        return Err(Error::param("profile does not match the sampled functions"));
    }
    let q = profile.q();
    let wv = WeightVector::new(fs.weights().to_vec(), profile.clone())?;
    let constant = apq_constant(&wv, family)?;
    let nu = wv.nu(NuConvention::Product);
    let m = maximal_alpha(fs, profile.alpha, family)?;
    let weak = weak_norm(&m.zip_map(&nu, |a, b| a * b)?, &Field::constant(grid, 1.0), q)?;
    let mut norm_product = 1.0;
    for ((f, w), &pi) in fs.functions().iter().zip(fs.weights()).zip(&profile.p) {
        norm_product *= lp_norm(f, &w.map(|v| v.powf(pi)), pi)?;
    }
    let denom = constant.value.powf(1.0 / q) * norm_product;
    let ratio = if weak == 0.0 { 0.0 } else { weak / denom };
    Ok(WeakTypeReport {
        case: WeakCase::of(profile),
        q,
        weak_norm: weak,
        apq: constant.value,
        apq_argmax: constant.argmax,
        norm_product,
        ratio,
        family: family.describe(),
    })
}

/// A quantity tracked over successive refinement levels.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementStudy {
    pub levels: Vec<u32>,
    pub values: Vec<f64>,
    /// Largest `|v_(k+1) - v_k| / |v_k|`.
    pub drift: f64,
    /// Largest `v_(k+1) / v_k`.
    pub growth: f64,
}

pub fn refinement(levels: &[u32], mut value: impl FnMut(u32) -> Result<f64>) -> Result<RefinementStudy> {
    if levels.len() < 2 {
        return Err(Error::param("a refinement study needs at least two levels"));
    }
    let values = levels.iter().map(|&l| value(l)).collect::<Result<Vec<_>>>()?;
    let mut drift: f64 = 0.0;
    let mut growth = f64::NEG_INFINITY;
    for w in values.windows(2) {
        drift = drift.max(((w[1] - w[0]) / w[0]).abs());
        growth = growth.max(w[1] / w[0]);
    }
    Ok(RefinementStudy { levels: levels.to_vec(), values, drift, growth })
}

/// `||f||_{L^r, Q} = (avg_Q |f|^r)^(1/r)`.
pub fn x_average(field: &Field, cube: &Cube, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::param(format!("requires r >= 1, got {r}")));
    }
    cube.check(field.grid())?;
    let grid = field.grid();
    let region = cube.region(grid);
    let cells = region.cells(grid);
    let sum: f64 = cells.iter().map(|&c| field.values()[c].abs().powf(r)).sum();
    Ok((sum / cells.len() as f64).powf(1.0 / r))
}

/// `u`, `v_1..v_m` and the `L^r_i` averages standing in for `X_i`.
#[derive(Clone, Debug)]
pub struct TwoWeightConfig {
    pub u: Field,
    pub v: Vec<Field>,
    pub r: Vec<f64>,
}

impl TwoWeightConfig {
    pub fn new(u: Field, v: Vec<Field>, r: Vec<f64>) -> Result<Self> {
        if v.len() != r.len() || v.is_empty() {
            return Err(Error::param("one exponent r_i per weight v_i is required"));
        }
        if let Some(ri) = r.iter().find(|&&ri| !(ri >= 1.0)) {
            return Err(Error::param(format!("requires r_i >= 1, got {ri}")));
        }
        let grid = *u.grid();
        for (name, w) in std::iter::once(("u", &u)).chain(v.iter().map(|w| ("v", w))) {
            if *w.grid() != grid {
                return Err(Error::domain(format!("weight {name} is on a different grid")));
            }
            if w.values().iter().any(|&x| !(x > 0.0)) {
                return Err(Error::param(format!("weight {name} must be positive everywhere")));
            }
        }
        Ok(TwoWeightConfig { u, v, r })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TestingConstant {
    pub value: f64,
    pub argmax: String,
    pub cubes: usize,
    pub family: String,
}

fn region_average(sat: &SummedAreaTable, r: &Region, n: usize) -> f64 {
    sat.cell_sum(r) / r.cell_count(n) as f64
}

/// `K = sup_Q (u(Q)/|Q|)^(1/q) prod_i ||v_i^-1||_{L^r_i, Q}` over the members
/// of `family` inside the box.
pub fn testing_constant(cfg: &TwoWeightConfig, profile: &ExponentProfile, family: &CubeFamily) -> Result<TestingConstant> {
    let grid = *cfg.u.grid();
    if cfg.v.len() != profile.m() {
        return Err(Error::param("one weight v_i per function is required"));
    }
    let q = profile.q();
    if !(q > 0.0) {
        return Err(Error::Hypothesis(format!("requires q > 0, got {q}")));
    }
    let n = grid.dim();
    let u = SummedAreaTable::new(&cfg.u);
    let inv: Vec<SummedAreaTable> =
        cfg.v.iter().zip(&cfg.r).map(|(v, &r)| SummedAreaTable::new(&v.map(|x| x.powf(-r)))).collect();
    let members = family.inside_members(&grid)?;
    let values: Vec<f64> = members
        .par_iter()
        .map(|mem| {
            let r = &mem.region;
            let mut k = region_average(&u, r, n).powf(1.0 / q);
            for (sat, &ri) in inv.iter().zip(&cfg.r) {
                k *= region_average(sat, r, n).powf(1.0 / ri);
            }
            k
        })
        .collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(TestingConstant {
        value: values[best],
        argmax: members[best].origin.describe(n),
        cubes: members.len(),
        family: family.describe(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoWeightReport {
    pub testing: TestingConstant,
    /// `||M_alpha(f)||_{L^q(u)}`.
    pub lhs: f64,
    /// `prod_i ||f_i v_i||_{L^p_i}`.
    pub norm_product: f64,
    /// `lhs / (K norm_product)`.
    pub constant: f64,
}

/// Evaluates `||M_alpha(f)||_{L^q(u)} <= C K prod ||f_i v_i||_{p_i}` and
/// reports the empirical `C`.
pub fn two_weight_check(
    fs: &SampledFunctions,
    cfg: &TwoWeightConfig,
    profile: &ExponentProfile,
    family: &CubeFamily,
) -> Result<TwoWeightReport> {
    profile.require_weighted_range()?;
    let grid = *fs.grid();
    if *cfg.u.grid() != grid || profile.m() != fs.m() || profile.n != grid.dim() {
        return Err(Error::param("configuration does not match the sampled functions"));
    }
    let q = profile.q();
    if !(q > profile.p_total()) {
        return Err(Error::Hypothesis(format!("requires p < q, got p = {}, q = {q}", profile.p_total())));
    }
    let testing = testing_constant(cfg, profile, family)?;
    let m = maximal_alpha(fs, profile.alpha, family)?;
    let lhs = lp_norm(&m, &cfg.u, q)?;
    let one = Field::constant(grid, 1.0);
    let mut norm_product = 1.0;
    for ((f, v), &pi) in fs.functions().iter().zip(&cfg.v).zip(&profile.p) {
        norm_product *= lp_norm(&f.zip_map(v, |a, b| a * b)?, &one, pi)?;
    }
    let constant = if lhs == 0.0 { 0.0 } else { lhs / (testing.value * norm_product) };
    Ok(TwoWeightReport { testing, lhs, norm_product, constant })
}
