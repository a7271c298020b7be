//! Declarative function and weight specifications, sampled as exact cell
//! averages where a closed form exists.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{power_integral, PowerSpec};
use crate::error::{Error, Result};
use crate::grid::{CellGrid, Field};
use crate::kernels::RoughKernel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        value: f64,
    },
    /// Indicator of the box `[lo, hi)`.
    Indicator {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// `coef * x_axis^exponent` on `support` along `axis`, zero elsewhere.
    Power {
        coef: f64,
        exponent: f64,
        #[serde(default)]
        axis: usize,
        #[serde(default)]
        support: Option<[f64; 2]>,
    },
    /// `coef * x^(eps - 1)` on `(0, 1)`.
    Extremal {
        eps: f64,
        #[serde(default = "one")]
        coef: f64,
    },
    /// `x^((1 - eps)(1 - 1/p))`.
    ExtremalWeight {
        eps: f64,
        p: f64,
    },
    /// Values in `[low, high)` drawn per cell of the level-`level` grid and
    /// held constant under refinement. A cell is zero with probability
    /// `zero_fraction`.
    Random {
        #[serde(default)]
        seed: Option<u64>,
        level: u32,
        #[serde(default)]
        low: f64,
        #[serde(default = "one")]
        high: f64,
        #[serde(default)]
        zero_fraction: f64,
    },
    Values {
        values: Vec<f64>,
    },
    /// One value per line (row-major), optionally with a header.
    Csv {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

/// Length of `[a, b) cap [lo, hi)`.
fn overlap(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    (b.min(hi) - a.max(lo)).max(0.0)
}

fn power_cells(grid: &CellGrid, spec: PowerSpec, axis: usize, support: [f64; 2]) -> Result<Field> {
    if axis >= grid.dim() {
        return Err(Error::param(format!("axis {axis} out of range for n = {}", grid.dim())));
    }
    let h = grid.cell_width();
    let side = grid.cells_per_side();
    let [lo, hi] = support;
    let per_axis = (0..side)
        .map(|c| {
            let (a, b) = (c as f64 * h, (c + 1) as f64 * h);
            let (a, b) = (a.max(lo), b.min(hi));
            if b <= a {
                Ok(0.0)
            } else {
                Ok(power_integral(&spec, a, b)? / h)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Field::from_fn(*grid, |c| per_axis[c[axis]])
}

impl FunctionSpec {
    /// Cell averages on `grid`. `seed` is used by random specs without their own.
    pub fn sample(&self, grid: &CellGrid, seed: u64) -> Result<Field> {
        let n = grid.dim();
        let h = grid.cell_width();
        match self {
            FunctionSpec::Constant { value } => Ok(Field::constant(*grid, *value)),
            FunctionSpec::Indicator { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return Err(Error::param(format!("indicator corners need {n} coordinates")));
                }
                Field::from_fn(*grid, |c| {
                    (0..n)
                        .map(|a| overlap(c[a] as f64 * h, (c[a] + 1) as f64 * h, lo[a], hi[a]) / h)
                        .product()
                })
            }
            FunctionSpec::Power { coef, exponent, axis, support } => {
                let support = support.unwrap_or([0.0, grid.domain_side()]);
                power_cells(grid, PowerSpec::new(*coef, *exponent), *axis, support)
            }
            FunctionSpec::Extremal { eps, coef } => {
                check_eps(*eps)?;
                power_cells(grid, PowerSpec::scaled(*coef, -1.0, *eps), 0, [0.0, 1.0])
            }
            FunctionSpec::ExtremalWeight { eps, p } => {
                check_eps(*eps)?;
                if !(*p >= 1.0) {
                    return Err(Error::param(format!("p must be at least 1, got {p}")));
                }
                let spec = PowerSpec::scaled(1.0, 1.0 - 1.0 / p, *eps);
                power_cells(grid, spec, 0, [0.0, grid.domain_side()])
            }
            FunctionSpec::Random { seed: own, level, low, high, zero_fraction } => {
                if *level > grid.level() {
                    return Err(Error::param(format!(
                        "random data level {level} is finer than the grid level {}",
                        grid.level()
                    )));
                }
                if !(low <= high) || !(0.0..=1.0).contains(zero_fraction) {
                    return Err(Error::param("random data needs low <= high and zero_fraction in [0, 1]"));
                }
                let base = CellGrid::new(n, grid.domain_exp(), *level)?;
                let mut rng = ChaCha8Rng::seed_from_u64(own.unwrap_or(seed));
                let values: Vec<f64> = (0..base.cell_count())
                    .map(|_| {
                        let zero = rng.gen::<f64>() < *zero_fraction;
                        let v = if low < high { rng.gen_range(*low..*high) } else { *low };
                        if zero { 0.0 } else { v }
                    })
                    .collect();
                let shift = grid.level() - level;
                Field::from_fn(*grid, |c| {
                    let coarse: Vec<usize> = c.iter().map(|&x| x >> shift).collect();
                    values[base.cell_index(&coarse)]
                })
            }
            FunctionSpec::Values { values } => Field::new(*grid, values.clone()),
            FunctionSpec::Csv { path } => Field::new(*grid, read_column(path)?),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("eps must lie in (0, 1), got {eps}")))
    }
}

fn read_column(path: &PathBuf) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = rec.get(rec.len().saturating_sub(1)).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if line == 0 => continue,
            Err(_) => {
                return Err(Error::Format(format!("{}: line {} is not a number", path.display(), line + 1)));
            }
        }
    }
    Ok(out)
}

/// `Omega(y) = prod_i (1 + sgn(y_i)/2)` on the real line: the product
/// kernel with values `3/2` on positive and `1/2` on negative offsets.
pub fn sign_kernel(m: usize, s: f64) -> Result<RoughKernel> {
    RoughKernel::signs(&vec![(1.5, 0.5); m], s)
}
