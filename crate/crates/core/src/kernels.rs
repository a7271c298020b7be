//! Rough homogeneous kernels on products of spheres.
//!
//! A kernel only ever sees directions, so degree-zero homogeneity holds by
//! construction. `S^0 = {+1, -1}` carries counting measure; for `n >= 2` the
//! sphere is cut into bins of equal surface measure (angle bins on `S^1`,
//! equal-area `(cos theta, phi)` bins on `S^2`) and kernel tables are constant
//! on bins, so `L^s` norms are exact finite sums.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equal-measure partition of `S^(n-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpherePartition {
    n: usize,
    /// n=2: `[angle bins, 1]`; n=3: `[z bins, phi bins]`; unused for n=1.
    res: [usize; 2],
}

impl SpherePartition {
    pub fn new(n: usize, res: &[usize]) -> Result<Self> {
        let res = match (n, res) {
            (1, _) => [2, 1],
            (2, [b]) | (2, [b, 1]) if *b >= 1 => [*b, 1],
            (3, [z, p]) if *z >= 1 && *p >= 1 => [*z, *p],
            (1..=3, _) => {
                return Err(Error::param(format!("bad sphere resolution {res:?} for n = {n}")));
            }
            _ => return Err(Error::param(format!("dimension {n} not supported"))),
        };
        Ok(SpherePartition { n, res })
    }

    /// The exact two-point partition of `S^0`.
    pub fn signs() -> Self {
        SpherePartition { n: 1, res: [2, 1] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> Vec<usize> {
        match self.n {
            1 => vec![],
            2 => vec![self.res[0]],
            _ => self.res.to_vec(),
        }
    }

    pub fn bins(&self) -> usize {
        self.res[0] * self.res[1]
    }

    /// Surface measure of one bin.
    pub fn bin_measure(&self) -> f64 {
        self.total_measure() / self.bins() as f64
    }

    pub fn total_measure(&self) -> f64 {
        match self.n {
            1 => 2.0,
            2 => 2.0 * PI,
            _ => 4.0 * PI,
        }
    }

    /// Bin of the direction `y / |y|`.
    pub fn bin_of(&self, y: &[f64]) -> Result<usize> {
        let y = &y[..self.n];
        if y.iter().all(|&v| v == 0.0) {
            return Err(Error::Singular("kernel evaluated at a zero offset".into()));
        }
        Ok(match self.n {
            1 => usize::from(y[0] < 0.0),
            2 => {
                let t = y[1].atan2(y[0]).rem_euclid(2.0 * PI) / (2.0 * PI);
                ((t * self.res[0] as f64) as usize).min(self.res[0] - 1)
            }
            _ => {
                let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
                let z = (y[2] / r).clamp(-1.0, 1.0);
                let zb = (((z + 1.0) / 2.0 * self.res[0] as f64) as usize).min(self.res[0] - 1);
                let t = y[1].atan2(y[0]).rem_euclid(2.0 * PI) / (2.0 * PI);
                let pb = ((t * self.res[1] as f64) as usize).min(self.res[1] - 1);
                zb * self.res[1] + pb
            }
        })
    }

    /// A direction inside bin `b`, for tests and table building.
    pub fn bin_center(&self, b: usize) -> [f64; 3] {
        match self.n {
            1 => [if b == 0 { 1.0 } else { -1.0 }, 0.0, 0.0],
            2 => {
                let t = 2.0 * PI * (b as f64 + 0.5) / self.res[0] as f64;
                [t.cos(), t.sin(), 0.0]
            }
            _ => {
                let (zb, pb) = (b / self.res[1], b % self.res[1]);
                let z = -1.0 + 2.0 * (zb as f64 + 0.5) / self.res[0] as f64;
                let t = 2.0 * PI * (pb as f64 + 0.5) / self.res[1] as f64;
                let r = (1.0 - z * z).sqrt();
                [r * t.cos(), r * t.sin(), z]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelForm {
    Constant(f64),
    /// One table per factor, indexed by bin.
    Product(Vec<Vec<f64>>),
    /// Tensor table over `bins^m` with factor 1 most significant.
    Joint(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoughKernel {
    m: usize,
    sphere: SpherePartition,
    form: KernelForm,
    s: f64,
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 1.0) {
        return Err(Error::param(format!("kernel exponent s must exceed 1, got {s}")));
    }
    Ok(())
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("kernel values must be finite"));
    }
    Ok(())
}

impl RoughKernel {
    pub fn constant(n: usize, m: usize, c: f64, s: f64) -> Result<Self> {
        check_s(s)?;
        check_values(&[c])?;
        if m == 0 {
            return Err(Error::param("m must be positive"));
        }
        let sphere = if n == 1 { SpherePartition::signs() } else { SpherePartition::new(n, &[1, 1][..n - 1])? };
        Ok(RoughKernel { m, sphere, form: KernelForm::Constant(c), s })
    }

    pub fn product(sphere: SpherePartition, factors: Vec<Vec<f64>>, s: f64) -> Result<Self> {
        check_s(s)?;
        if factors.is_empty() {
            return Err(Error::param("product kernel needs at least one factor"));
        }
        for f in &factors {
            if f.len() != sphere.bins() {
                return Err(Error::param(format!("factor table has {} entries, sphere has {} bins", f.len(), sphere.bins())));
            }
            check_values(f)?;
        }
        Ok(RoughKernel { m: factors.len(), sphere, form: KernelForm::Product(factors), s })
    }

    pub fn joint(sphere: SpherePartition, m: usize, values: Vec<f64>, s: f64) -> Result<Self> {
        check_s(s)?;
        if m == 0 {
            return Err(Error::param("m must be positive"));
        }
        let want = sphere.bins().checked_pow(m as u32).ok_or_else(|| Error::Resource("joint table too large".into()))?;
        if values.len() != want {
            return Err(Error::param(format!("joint table has {} entries, expected {want}", values.len())));
        }
        check_values(&values)?;
        Ok(RoughKernel { m, sphere, form: KernelForm::Joint(values), s })
    }

    /// n = 1 sign kernel `Omega(+1) = plus`, `Omega(-1) = minus`, one per factor.
    pub fn signs(factors: &[(f64, f64)], s: f64) -> Result<Self> {
        Self::product(SpherePartition::signs(), factors.iter().map(|&(p, q)| vec![p, q]).collect(), s)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.sphere.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn with_s(&self, s: f64) -> Result<Self> {
        check_s(s)?;
        Ok(RoughKernel { s, ..self.clone() })
    }

    pub fn sphere(&self) -> &SpherePartition {
        &self.sphere
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.form, KernelForm::Constant(_))
    }

    pub fn describe(&self) -> String {
        let kind = match self.form {
            KernelForm::Constant(c) => format!("constant {c}"),
            KernelForm::Product(_) => "product".into(),
            KernelForm::Joint(_) => "joint".into(),
        };
        format!("{kind} kernel, n={}, m={}, s={}", self.sphere.n, self.m, self.s)
    }

    /// `|Omega|` on a tuple of bins.
    pub fn value_at_bins(&self, bins: &[usize]) -> f64 {
        match &self.form {
            KernelForm::Constant(c) => c.abs(),
            KernelForm::Product(f) => f.iter().zip(bins).map(|(t, &b)| t[b].abs()).product(),
            KernelForm::Joint(t) => {
                let nb = self.sphere.bins();
                t[bins.iter().fold(0, |acc, &b| acc * nb + b)].abs()
            }
        }
    }

    /// `|Omega_i|` on one bin, for product kernels.
    pub fn factor_value(&self, i: usize, bin: usize) -> Option<f64> {
        match &self.form {
            KernelForm::Product(f) => Some(f[i][bin].abs()),
            KernelForm::Constant(c) if i == 0 => Some(c.abs()),
            KernelForm::Constant(_) => Some(1.0),
            KernelForm::Joint(_) => None,
        }
    }

    /// `|Omega(y_1, .., y_m)|`. Product and joint forms need every `y_i != 0`.
    pub fn evaluate(&self, y: &[&[f64]]) -> Result<f64> {
        if y.len() != self.m {
            return Err(Error::param(format!("{} offsets for an m = {} kernel", y.len(), self.m)));
        }
        if let KernelForm::Constant(c) = self.form {
            return Ok(c.abs());
        }
        let bins = y.iter().map(|yi| self.sphere.bin_of(yi)).collect::<Result<Vec<_>>>()?;
        Ok(self.value_at_bins(&bins))
    }

    /// `||Omega||_{L^s((S^(n-1))^m)}`.
    pub fn ls_norm(&self) -> f64 {
        let mu = self.sphere.bin_measure();
        let s = self.s;
        let norm = |vals: &mut dyn Iterator<Item = f64>, mass: f64| -> f64 {
            if s.is_infinite() {
                vals.fold(0.0, |a, v| a.max(v.abs()))
            } else {
                (vals.map(|v| v.abs().powf(s)).sum::<f64>() * mass).powf(1.0 / s)
            }
        };
        match &self.form {
            KernelForm::Constant(c) => {
                let total = self.sphere.total_measure().powi(self.m as i32);
                if s.is_infinite() { c.abs() } else { c.abs() * total.powf(1.0 / s) }
            }
            KernelForm::Product(f) => f.iter().map(|t| norm(&mut t.iter().copied(), mu)).product(),
            KernelForm::Joint(t) => norm(&mut t.iter().copied(), mu.powi(self.m as i32)),
        }
    }

    /// The same kernel as a joint tensor table.
    pub fn to_joint(&self) -> Result<Self> {
        let nb = self.sphere.bins();
        let size = nb.checked_pow(self.m as u32).ok_or_else(|| Error::Resource("joint table too large".into()))?;
        let mut values = Vec::with_capacity(size);
        let mut bins = vec![0; self.m];
        for flat in 0..size {
            let mut rest = flat;
            for b in bins.iter_mut().rev() {
                *b = rest % nb;
                rest /= nb;
            }
            values.push(match &self.form {
                KernelForm::Constant(c) => *c,
                KernelForm::Product(f) => f.iter().zip(&bins).map(|(t, &b)| t[b]).product(),
                KernelForm::Joint(t) => t[flat],
            });
        }
        Self::joint(self.sphere, self.m, values, self.s)
    }
}

/// Kernel exponent as it appears in JSON: a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Named(InfName),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfName {
    #[serde(rename = "inf")]
    Inf,
}

impl Exponent {
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(v) => v,
            Exponent::Named(_) => f64::INFINITY,
        }
    }
}

/// Table values: sign strings (`"+"`, `"+-"`, ...) for n = 1, or a flat array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableValues {
    Signs(BTreeMap<String, f64>),
    Flat(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum KernelSpec {
    Constant {
        #[serde(default = "one")]
        values: f64,
        s: Exponent,
    },
    Product {
        values: Vec<TableValues>,
        #[serde(default)]
        bins: Vec<usize>,
        s: Exponent,
    },
    Joint {
        values: TableValues,
        #[serde(default)]
        bins: Vec<usize>,
        s: Exponent,
    },
}

fn one() -> f64 {
    1.0
}

fn sign_index(key: &str, len: usize) -> Result<usize> {
    if key.len() != len || !key.chars().all(|c| c == '+' || c == '-') {
        return Err(Error::param(format!("sign key {key:?} must be {len} characters of '+'/'-'")));
    }
    Ok(key.chars().fold(0, |acc, c| acc * 2 + usize::from(c == '-')))
}

fn table(values: &TableValues, sphere: &SpherePartition, m: usize) -> Result<Vec<f64>> {
    let size = sphere.bins().pow(m as u32);
    match values {
        TableValues::Flat(v) => Ok(v.clone()),
        TableValues::Signs(map) => {
            if sphere.dim() != 1 {
                return Err(Error::param("sign-keyed kernel values need n = 1"));
            }
            let mut out = vec![f64::NAN; size];
            for (k, &v) in map {
                out[sign_index(k, m)?] = v;
            }
            if out.iter().any(|v| v.is_nan()) {
                return Err(Error::param(format!("sign table needs all {size} keys")));
            }
            Ok(out)
        }
    }
}

impl KernelSpec {
    pub fn build(&self, n: usize, m: usize) -> Result<RoughKernel> {
        let sphere_of = |bins: &[usize]| if n == 1 { Ok(SpherePartition::signs()) } else { SpherePartition::new(n, bins) };
        match self {
            KernelSpec::Constant { values, s } => RoughKernel::constant(n, m, *values, s.value()),
            KernelSpec::Product { values, bins, s } => {
                if values.len() != m {
                    return Err(Error::param(format!("{} kernel factors for m = {m}", values.len())));
                }
                let sphere = sphere_of(bins)?;
                let factors = values.iter().map(|v| table(v, &sphere, 1)).collect::<Result<Vec<_>>>()?;
                RoughKernel::product(sphere, factors, s.value())
            }
            KernelSpec::Joint { values, bins, s } => {
                let sphere = sphere_of(bins)?;
                RoughKernel::joint(sphere, m, table(values, &sphere, m)?, s.value())
            }
        }
    }
}
