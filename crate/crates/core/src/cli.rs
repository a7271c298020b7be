//! Run configuration, built-in presets and artifact writing for the
//! `roughmax` binary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{
    default_eps, refinement, sharpness_run, two_weight_check, weaktype_run, TwoWeightConfig,
};
use crate::family::CubeFamily;
use crate::grid::{CellGrid, Field, SampledFunctions};
use crate::kernels::KernelSpec;
use crate::operators::{
    geometric_mean_domination_check, maximal_alpha, rough_maximal, rough_vs_smooth_check, shift_domination_check,
    shift_domination_sides, Budget,
};
use crate::presets::FunctionSpec;
use crate::profile::ExponentProfile;
use crate::sparse::{build_sparse, check_selection, sparse_norm_bound, verify_sparse};
use crate::weights::{ainfty_constant, apq_constant, multi_ap_constant, reverse_holder_check, WeightVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Maximal,
    Constant,
    Sparse,
    Dominate,
    Sharpness,
    Weaktype,
    Twoweight,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Maximal => "maximal",
            Command::Constant => "constant",
            Command::Sparse => "sparse",
            Command::Dominate => "dominate",
            Command::Sharpness => "sharpness",
            Command::Weaktype => "weaktype",
            Command::Twoweight => "twoweight",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default)]
    pub domain_exp: u32,
    pub level: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub alpha: f64,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoWeightSpec {
    pub u: FunctionSpec,
    pub v: Vec<FunctionSpec>,
    pub r: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub profile: ProfileConfig,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    /// Weights `w_i`; unit weights when empty.
    #[serde(default)]
    pub weights: Vec<FunctionSpec>,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub family: CubeFamily,
    /// Extremal-family parameters for `sharpness`.
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    /// Order shift for the geometric-mean check in `dominate`.
    #[serde(default)]
    pub shift: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Grid mask and stopping base for `sparse`.
    #[serde(default)]
    pub beta: u8,
    #[serde(default)]
    pub base: Option<f64>,
    #[serde(default)]
    pub two_weight: Option<TwoWeightSpec>,
    /// Repeat the grid computations one level finer and report the drift.
    #[serde(default)]
    pub refine: bool,
}

fn default_samples() -> usize {
    33
}

/// Options that come from the command line rather than the config file.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub budget: Budget,
    pub seed: u64,
}

/// Built-in configuration used when no `--config` is given.
pub fn preset(cmd: Command) -> RunConfig {
    let text = match cmd {
        Command::Maximal => {
            r#"{"grid":{"n":1,"level":5},"profile":{"alpha":0,"p":[1]},
                "functions":[{"kind":"indicator","lo":[0],"hi":[0.5]}]}"#
        }
        Command::Constant => {
            r#"{"grid":{"n":1,"level":6},"profile":{"alpha":0.5,"p":[2,2]},
                "weights":[{"kind":"extremal-weight","eps":0.5,"p":2},{"kind":"extremal-weight","eps":0.5,"p":2}]}"#
        }
        Command::Sparse => {
            r#"{"grid":{"n":1,"level":4},"profile":{"alpha":0,"p":[2]},"base":4,
                "functions":[{"kind":"indicator","lo":[0],"hi":[0.25]}]}"#
        }
        Command::Dominate => {
            r#"{"grid":{"n":1,"level":4},"profile":{"alpha":0.5,"p":[2,2]},
                "functions":[{"kind":"random","seed":1,"level":3},{"kind":"random","seed":2,"level":3}],
                "kernel":{"form":"product","values":[{"+":1.5,"-":0.5},{"+":1.5,"-":0.5}],"s":2},
                "shift":0.25}"#
        }
        Command::Sharpness => r#"{"grid":{"n":1,"level":0},"profile":{"alpha":0.5,"p":[2,2]}}"#,
        Command::Weaktype => {
            r#"{"grid":{"n":1,"level":5},"profile":{"alpha":0.5,"p":[1,2]},"refine":true,
                "functions":[{"kind":"indicator","lo":[0],"hi":[0.25]},{"kind":"indicator","lo":[0.125],"hi":[0.5]}],
                "weights":[{"kind":"extremal-weight","eps":0.5,"p":1},{"kind":"extremal-weight","eps":0.5,"p":2}]}"#
        }
        Command::Twoweight => {
            r#"{"grid":{"n":1,"level":5},"profile":{"alpha":0.5,"p":[2,2]},"refine":true,
                "functions":[{"kind":"indicator","lo":[0],"hi":[0.5]},{"kind":"indicator","lo":[0.25],"hi":[1]}],
                "two_weight":{"u":{"kind":"constant","value":1},
                              "v":[{"kind":"constant","value":1},{"kind":"constant","value":1}],"r":[2,2]}}"#
        }
    };
    serde_json::from_str(text).expect("presets parse")
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// SHA-256 of the configuration as it was resolved, plus the command-line
/// options that change results.
pub fn config_hash(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> String {
    let mut h = Sha256::new();
    h.update(cmd.name().as_bytes());
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.update(opts.seed.to_le_bytes());
    h.update(serde_json::to_vec(&opts.budget).expect("budget serializes"));
    format!("{:x}", h.finalize())
}

impl RunConfig {
    pub fn profile(&self) -> Result<ExponentProfile> {
        let prof = ExponentProfile::new(self.grid.n, self.profile.alpha, self.profile.p.clone())?;
        match &self.kernel {
            Some(k) => prof.with_kernel_exponent(kernel_s(k)),
            None => Ok(prof),
        }
    }

    fn grid_at(&self, level: u32) -> Result<CellGrid> {
        CellGrid::new(self.grid.n, self.grid.domain_exp, level)
    }

    fn sample_all(specs: &[FunctionSpec], grid: &CellGrid, seed: u64) -> Result<Vec<Field>> {
        specs.iter().enumerate().map(|(i, s)| s.sample(grid, seed.wrapping_add(i as u64))).collect()
    }

    /// Functions and weights on the grid of level `level`.
    pub fn sampled(&self, level: u32, seed: u64) -> Result<SampledFunctions> {
        let grid = self.grid_at(level)?;
        let m = self.profile.p.len();
        if self.functions.len() != m {
            return Err(Error::param(format!("{} functions for {m} exponents p_i", self.functions.len())));
        }
        let functions = Self::sample_all(&self.functions, &grid, seed)?;
        let weights = if self.weights.is_empty() {
            vec![Field::constant(grid, 1.0); m]
        } else {
            Self::sample_all(&self.weights, &grid, seed.wrapping_add(1 << 32))?
        };
        SampledFunctions::new(functions, weights)
    }
}

fn kernel_s(k: &KernelSpec) -> f64 {
    match k {
        KernelSpec::Constant { s, .. } | KernelSpec::Product { s, .. } | KernelSpec::Joint { s, .. } => s.value(),
    }
}

/// What a run produced.
#[derive(Debug)]
pub struct RunOutput {
    pub summary: Value,
    pub csv: PathBuf,
    pub json: PathBuf,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn field_table(fields: &[(&str, &Field)]) -> Table {
    let grid = *fields[0].1.grid();
    let n = grid.dim();
    let mut header = vec!["cell".to_string()];
    header.extend((0..n).map(|a| format!("x{a}")));
    header.extend(fields.iter().map(|(name, _)| name.to_string()));
    let mut t = Table { header, rows: Vec::new() };
    for cell in 0..grid.cell_count() {
        let center = grid.cell_center(&grid.cell_coords(cell));
        let mut row = vec![cell.to_string()];
        row.extend(center[..n].iter().map(|&c| num(c)));
        row.extend(fields.iter().map(|(_, f)| num(f.values()[cell])));
        t.push(row);
    }
    t
}

fn argmax(f: &Field) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in f.values().iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Validates, computes and writes `<out>/<command>.csv` and `<out>/<command>.json`.
pub fn run(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutput> {
    let (table, mut summary) = match cmd {
        Command::Maximal => run_maximal(cfg, opts)?,
        Command::Constant => run_constant(cfg)?,
        Command::Sparse => run_sparse(cfg, opts)?,
        Command::Dominate => run_dominate(cfg, opts)?,
        Command::Sharpness => run_sharpness(cfg)?,
        Command::Weaktype => run_weaktype(cfg, opts)?,
        Command::Twoweight => run_twoweight(cfg, opts)?,
    };
    let obj = summary.as_object_mut().expect("summaries are objects");
    obj.insert("command".into(), json!(cmd.name()));
    obj.insert("config_hash".into(), json!(config_hash(cmd, cfg, opts)));
    obj.entry("family").or_insert_with(|| json!(cfg.family.describe()));
    fs::create_dir_all(&opts.out)?;
    let csv_path = opts.out.join(format!("{}.csv", cmd.name()));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    let json_path = opts.out.join(format!("{}.json", cmd.name()));
    fs::write(&json_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(RunOutput { summary, csv: csv_path, json: json_path })
}

fn run_maximal(cfg: &RunConfig, opts: &RunOptions) -> Result<(Table, Value)> {
    let prof = cfg.profile()?;
    let fs = cfg.sampled(cfg.grid.level, opts.seed)?;
    opts.budget.check_family(&cfg.family, fs.grid())?;
    let field = match &cfg.kernel {
        Some(k) => rough_maximal(&fs, &k.build(prof.n, prof.m())?, prof.alpha, &cfg.family, &opts.budget)?,
        None => maximal_alpha(&fs, prof.alpha, &cfg.family)?,
    };
    let (cell, max) = argmax(&field);
    let summary = json!({
        "alpha": prof.alpha,
        "kernel": cfg.kernel.as_ref().map(|k| k.build(prof.n, prof.m()).map(|k| k.describe())).transpose()?,
        "max_value": max,
        "argmax_cell": cell,
        "cells": field.values().len(),
    });
    Ok((field_table(&[("value", &field)]), summary))
}

fn run_constant(cfg: &RunConfig) -> Result<(Table, Value)> {
    let prof = cfg.profile()?;
    prof.require_weak_range()?;
    let grid = cfg.grid_at(cfg.grid.level)?;
    if cfg.weights.len() != prof.m() {
        return Err(Error::param(format!("{} weights for {} exponents p_i", cfg.weights.len(), prof.m())));
    }
    let weights = RunConfig::sample_all(&cfg.weights, &grid, 0)?;
    let wv = WeightVector::new(weights.clone(), prof.clone())?;
    let apq = apq_constant(&wv, &cfg.family)?;
    let ap = multi_ap_constant(&wv, &cfg.family)?;
    let mut sigma = Vec::new();
    for i in 0..prof.m() {
        if let Some(s) = wv.sigma(i) {
            let a = ainfty_constant(&s, &cfg.family)?;
            let rh = reverse_holder_check(&s, &cfg.family)?;
            sigma.push(json!({"index": i + 1, "ainfty": a.value, "ainfty_argmax": a.argmax, "reverse_holder": rh}));
        }
    }
    let mut t = Table::new(&["cube", "apq_product", "ap_product"]);
    for (a, b) in apq.rows.iter().zip(&ap.rows) {
        t.push(vec![a.cube.clone(), num(a.product), num(b.product)]);
    }
    let summary = json!({
        "p": prof.p, "q": prof.q(), "alpha": prof.alpha,
        "apq": apq.value, "apq_argmax": apq.argmax,
        "ap": ap.value, "ap_argmax": ap.argmax,
        "sigma": sigma,
    });
    Ok((t, summary))
}

fn run_sparse(cfg: &RunConfig, opts: &RunOptions) -> Result<(Table, Value)> {
    let prof = cfg.profile()?;
    let fs = cfg.sampled(cfg.grid.level, opts.seed)?;
    let s = build_sparse(&fs, prof.alpha, cfg.beta, cfg.base)?;
    let verdict = verify_sparse(&s)?;
    let selection = check_selection(&s, &fs)?;
    let q = prof.q();
    let norm = if q > 0.0 { Some(sparse_norm_bound(&s, &fs, q)?) } else { None };
    let mut t = Table::new(&["k", "j", "level", "index", "average"]);
    for (k, cubes) in s.levels() {
        for (j, c) in cubes.iter().enumerate() {
            let idx: Vec<String> = c.cube.index[..fs.grid().dim()].iter().map(|v| v.to_string()).collect();
            t.push(vec![k.to_string(), j.to_string(), c.cube.level.to_string(), idx.join(" "), num(c.average)]);
        }
    }
    let summary = json!({
        "family": s.report(),
        "verdict": verdict,
        "selection": selection,
        "norm_bound": norm,
        "passed": verdict.passed && selection.passed,
    });
    Ok((t, summary))
}

fn run_dominate(cfg: &RunConfig, opts: &RunOptions) -> Result<(Table, Value)> {
    let prof = cfg.profile()?;
    let fs = cfg.sampled(cfg.grid.level, opts.seed)?;
    let report = shift_domination_check(&fs, prof.alpha, &opts.budget)?;
    let (lhs, rhs) = shift_domination_sides(&fs, prof.alpha, &opts.budget)?;
    let ratio = lhs.zip_map(&rhs, |l, r| if l == 0.0 { 0.0 } else { l / r })?;
    let mut summary = json!({ "shift_domination": report });
    if let Some(spec) = &cfg.kernel {
        let kernel = spec.build(prof.n, prof.m())?;
        if let Some(sp) = prof.s_prime() {
            if !(prof.alpha * sp < (prof.m() * prof.n) as f64) {
                return Err(Error::Hypothesis(format!("requires alpha s' < mn, got alpha s' = {}", prof.alpha * sp)));
            }
        }
        let holder = |level: u32| -> Result<f64> {
            let fs = cfg.sampled(level, opts.seed)?;
            Ok(rough_vs_smooth_check(&fs, &kernel, prof.alpha, &cfg.family, &opts.budget)?.constant.value)
        };
        let h = rough_vs_smooth_check(&fs, &kernel, prof.alpha, &cfg.family, &opts.budget)?;
        summary["holder"] = json!(h);
        if cfg.refine {
            summary["holder_refinement"] = json!(refinement(&[cfg.grid.level, cfg.grid.level + 1], holder)?);
        }
        if let Some(eps) = cfg.shift {
            let g = geometric_mean_domination_check(&fs, &kernel, prof.alpha, eps, &cfg.family, cfg.samples, &opts.budget)?;
            summary["geometric_mean"] = json!(g);
            if cfg.refine {
                let study = refinement(&[cfg.grid.level, cfg.grid.level + 1], |level| {
                    let fs = cfg.sampled(level, opts.seed)?;
                    let r = geometric_mean_domination_check(&fs, &kernel, prof.alpha, eps, &cfg.family, cfg.samples, &opts.budget)?;
                    Ok(r.constant.value)
                })?;
                summary["geometric_mean_refinement"] = json!(study);
            }
        }
    }
    Ok((field_table(&[("lhs", &lhs), ("rhs", &rhs), ("ratio", &ratio)]), summary))
}

fn run_sharpness(cfg: &RunConfig) -> Result<(Table, Value)> {
    let prof = cfg.profile()?;
    let eps = cfg.eps.clone().unwrap_or_else(default_eps);
    let rep = sharpness_run(&prof, &eps)?;
    let mut t = Table::new(&["eps", "norm_product", "norm_product_target", "apq", "maximal_lower", "ratio"]);
    for r in &rep.rows {
        t.push(vec![num(r.eps), num(r.norm_product), num(r.norm_product_target), num(r.apq), num(r.maximal_lower), num(r.ratio)]);
    }
    let summary = json!({
        "gamma_hat": rep.gamma_hat,
        "gamma_low": rep.gamma_low,
        "gamma_high": rep.gamma_high,
        "gamma_sharp": rep.gamma_sharp,
        "apq_slope": rep.apq_slope,
        "norm_slope": rep.norm_slope,
        "refs": rep.refs,
        "tolerance": rep.tolerance,
        "passed": rep.passed,
        "family": "intervals (0,t] and [t,2t], t = 2^-j, 0 <= j <= 40",
    });
    Ok((t, summary))
}

fn levels(cfg: &RunConfig) -> Vec<u32> {
    if cfg.refine {
        vec![cfg.grid.level, cfg.grid.level + 1]
    } else {
        vec![cfg.grid.level]
    }
}

fn run_weaktype(cfg: &RunConfig, opts: &RunOptions) -> Result<(Table, Value)> {
    let prof = cfg.profile()?;
    prof.require_weak_range()?;
    let mut t = Table::new(&["level", "case", "weak_norm", "apq", "norm_product", "ratio"]);
    let mut reports = Vec::new();
    for level in levels(cfg) {
        let fs = cfg.sampled(level, opts.seed)?;
        opts.budget.check_family(&cfg.family, fs.grid())?;
        let r = weaktype_run(&fs, &prof, &cfg.family)?;
        t.push(vec![
            level.to_string(),
            json!(r.case).as_str().unwrap_or_default().to_string(),
            num(r.weak_norm),
            num(r.apq),
            num(r.norm_product),
            num(r.ratio),
        ]);
        reports.push(r);
    }
    let stable = reports.windows(2).all(|w| w[1].ratio <= 1.10 * w[0].ratio);
    let summary = json!({ "reports": reports, "stable": stable, "finite": reports.iter().all(|r| r.ratio.is_finite()) });
    Ok((t, summary))
}

fn run_twoweight(cfg: &RunConfig, opts: &RunOptions) -> Result<(Table, Value)> {
    let prof = cfg.profile()?;
    prof.require_weighted_range()?;
    let spec = cfg.two_weight.as_ref().ok_or_else(|| Error::param("twoweight needs a \"two_weight\" section"))?;
    let mut t = Table::new(&["level", "testing_constant", "lhs", "norm_product", "constant"]);
    let mut reports = Vec::new();
    for level in levels(cfg) {
        let fs = cfg.sampled(level, opts.seed)?;
        opts.budget.check_family(&cfg.family, fs.grid())?;
        let grid = *fs.grid();
        let tw = TwoWeightConfig::new(
            spec.u.sample(&grid, opts.seed)?,
            RunConfig::sample_all(&spec.v, &grid, opts.seed)?,
            spec.r.clone(),
        )?;
        let r = two_weight_check(&fs, &tw, &prof, &cfg.family)?;
        t.push(vec![level.to_string(), num(r.testing.value), num(r.lhs), num(r.norm_product), num(r.constant)]);
        reports.push(r);
    }
    let drift = reports.windows(2).map(|w| ((w[1].constant - w[0].constant) / w[0].constant).abs()).fold(0.0, f64::max);
    let summary = json!({ "reports": reports, "drift": drift });
    Ok((t, summary))
}
