//! Closed-form one-dimensional power functions and the power-weight
//! extremal family used to bound the sharp weight exponent from below.
//!
//! Exponents of the form `c (1 - eps)` are integrated through their "rise"
//! `1 + c (1 - eps) = (1 + c) - c eps`, which keeps full relative precision
//! when the rise is of order `eps`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::ExponentProfile;

/// `coef * x^exponent` on `x > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PowerRepr", into = "PowerRepr")]
pub struct PowerSpec {
    coef: f64,
    /// `exponent + 1`, stored separately so it can carry more precision than
    /// the exponent itself.
    rise: f64,
}

#[derive(Serialize, Deserialize)]
struct PowerRepr {
    coef: f64,
    exponent: f64,
}

impl From<PowerRepr> for PowerSpec {
    fn from(r: PowerRepr) -> Self {
        PowerSpec::new(r.coef, r.exponent)
    }
}

impl From<PowerSpec> for PowerRepr {
    fn from(s: PowerSpec) -> Self {
        PowerRepr { coef: s.coef, exponent: s.exponent() }
    }
}

impl PowerSpec {
    pub fn new(coef: f64, exponent: f64) -> Self {
        PowerSpec { coef, rise: exponent + 1.0 }
    }

    /// `coef * x^(rise - 1)`.
    pub fn from_rise(coef: f64, rise: f64) -> Self {
        PowerSpec { coef, rise }
    }

    /// `coef * x^(c (1 - eps))`.
    pub fn scaled(coef: f64, c: f64, eps: f64) -> Self {
        PowerSpec { coef, rise: (1.0 + c) - c * eps }
    }

    pub fn coef(&self) -> f64 {
        self.coef
    }

    pub fn exponent(&self) -> f64 {
        self.rise - 1.0
    }

    pub fn rise(&self) -> f64 {
        self.rise
    }

    pub fn value(&self, x: f64) -> f64 {
        self.coef * x.powf(self.exponent())
    }

    /// Infimum over `[a, b]`; `a = 0` with a positive exponent gives 0.
    pub fn inf_on(&self, a: f64, b: f64) -> f64 {
        match self.exponent() {
            e if e > 0.0 => self.value(a),
            e if e < 0.0 => self.value(b),
            _ => self.coef,
        }
    }
}

/// `integral_a^b coef x^e dx` in closed form; `b` may be infinite.
pub fn power_integral(spec: &PowerSpec, a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b > a) {
        return Err(Error::param(format!("requires 0 <= a < b, got a = {a}, b = {b}")));
    }
    let r = spec.rise;
    let c = spec.coef;
    if a == 0.0 && r <= 0.0 {
        return Err(Error::Divergent(format!("x^{} is not integrable at 0", spec.exponent())));
    }
    if b.is_infinite() {
        if r >= 0.0 {
            return Err(Error::Divergent(format!("x^{} is not integrable at infinity", spec.exponent())));
        }
        return Ok(c * a.powf(r) / -r);
    }
    if r == 0.0 {
        return Ok(c * (b / a).ln());
    }
    if a == 0.0 {
        return Ok(c * b.powf(r) / r);
    }
    // b^r (1 - (a/b)^r) / r without cancellation for small r
    Ok(c * b.powf(r) * -(r * (a / b).ln()).exp_m1() / r)
}

/// `(integral_a^b x^e dx) / (b - a)`.
fn power_average(spec: &PowerSpec, a: f64, b: f64) -> Result<f64> {
    Ok(power_integral(spec, a, b)? / (b - a))
}

/// The family `w_i = x^((1-eps)(1-1/p_i))`, `f_i = c_i x^(eps-1)` on `(0,1)`.
#[derive(Clone, Debug)]
pub struct ExtremalFamily {
    eps: f64,
    profile: ExponentProfile,
    coefs: Vec<f64>,
}

/// Largest `j` in the interval family `(0, 2^-j]`, `[2^-j, 2^(1-j)]`.
pub const INTERVAL_DEPTH: i32 = 40;

#[derive(Clone, Debug, Serialize)]
pub struct ExtremalNorms {
    pub eps: f64,
    /// `prod_i ||f_i||_{L^p_i(w_i^p_i)}`.
    pub norm_product: f64,
    /// `eps^(-1/p)` times the coefficients.
    pub norm_product_target: f64,
    /// `[w]_A(P,q)` over the interval family.
    pub apq: f64,
    pub apq_interval: (f64, f64),
    /// `||M_alpha(f)||_{L^q(nu^q)}` bounded below through the intervals `(0, x)`.
    pub maximal_lower: f64,
    /// `maximal_lower / norm_product`, with the coefficients cancelled.
    pub ratio: f64,
}

impl ExtremalFamily {
    /// Requires `n = 1`, `0 < eps < 1` and `1/m <= p < 1/alpha`.
    pub fn new(eps: f64, profile: ExponentProfile) -> Result<Self> {
        let m = profile.m();
        Self::with_coefficients(eps, profile, vec![1.0; m])
    }

    pub fn with_coefficients(eps: f64, profile: ExponentProfile, coefs: Vec<f64>) -> Result<Self> {
        if profile.n != 1 {
            return Err(Error::param(format!("the extremal family is one-dimensional, got n = {}", profile.n)));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::param(format!("eps must lie in (0, 1), got {eps}")));
        }
        if coefs.len() != profile.m() || coefs.iter().any(|c| !(c.is_finite() && *c != 0.0)) {
            return Err(Error::param("one finite nonzero coefficient per function is required"));
        }
        profile.check_basic()?;
        if !(profile.q() > 0.0 && profile.alpha > 0.0) {
            return Err(Error::Hypothesis(format!(
                "requires 0 < alpha and p < n/alpha, got alpha = {} and q = {}",
                profile.alpha,
                profile.q()
            )));
        }
        Ok(ExtremalFamily { eps, profile, coefs })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn profile(&self) -> &ExponentProfile {
        &self.profile
    }

    /// `f_i` on `(0, 1)`.
    pub fn function(&self, i: usize) -> PowerSpec {
        PowerSpec::scaled(self.coefs[i], -1.0, self.eps)
    }

    pub fn weight(&self, i: usize) -> PowerSpec {
        PowerSpec::scaled(1.0, 1.0 - 1.0 / self.profile.p[i], self.eps)
    }

    /// `nu = prod w_i = x^((1-eps)(m - 1/p))`.
    pub fn nu(&self) -> PowerSpec {
        PowerSpec::scaled(1.0, self.nu_power(), self.eps)
    }

    fn nu_power(&self) -> f64 {
        self.profile.p.iter().map(|p| 1.0 - 1.0 / p).sum()
    }

    /// `sigma_i = w_i^(-p_i')`; `None` when `p_i = 1`.
    pub fn sigma(&self, i: usize) -> Option<PowerSpec> {
        let pp = self.profile.p_prime(i);
        pp.is_finite().then(|| PowerSpec::scaled(1.0, -(1.0 - 1.0 / self.profile.p[i]) * pp, self.eps))
    }

    /// `||f_i||_{L^p_i(w_i^p_i)}` without the coefficient.
    fn unit_norm(&self, i: usize) -> Result<f64> {
        let pi = self.profile.p[i];
        // f_i^p_i w_i^p_i = x^((1-eps)(p_i (1 - 1/p_i) - p_i))
        let spec = PowerSpec::scaled(1.0, pi * (1.0 - 1.0 / pi) - pi, self.eps);
        Ok(power_integral(&spec, 0.0, 1.0)?.powf(1.0 / pi))
    }

    pub fn norm(&self, i: usize) -> Result<f64> {
        Ok(self.coefs[i].abs() * self.unit_norm(i)?)
    }

    fn coef_product(&self) -> f64 {
        self.coefs.iter().map(|c| c.abs()).product()
    }

    /// The `A_(P,q)` bracket on `[a, b]`.
    pub fn apq_on(&self, a: f64, b: f64) -> Result<f64> {
        let q = self.profile.q();
        let nu_q = PowerSpec::scaled(1.0, q * self.nu_power(), self.eps);
        let mut v = power_average(&nu_q, a, b)?;
        for i in 0..self.profile.m() {
            v *= match self.sigma(i) {
                Some(s) => power_average(&s, a, b)?.powf(q / self.profile.p_prime(i)),
                None => self.weight(i).inf_on(a, b).powf(-q),
            };
        }
        Ok(v)
    }

    /// `[w]_A(P,q)` over `(0, t]` and `[t, 2t]`, `t = 2^-j`, `0 <= j <= 40`,
    /// with the maximizing interval.
    pub fn apq(&self) -> Result<(f64, (f64, f64))> {
        let mut best = (f64::NEG_INFINITY, (0.0, 0.0));
        for j in 0..=INTERVAL_DEPTH {
            let t = (-j as f64).exp2();
            for (a, b) in [(0.0, t), (t, 2.0 * t)] {
                let v = self.apq_on(a, b)?;
                if v > best.0 {
                    best = (v, (a, b));
                }
            }
        }
        Ok(best)
    }

    /// `prod_i |Q|^(alpha/m - 1) integral_Q f_i` at `Q = (0, x)`, `0 < x <= 1`:
    /// `eps^-m x^(m(eps-1) + alpha)` times the coefficients.
    pub fn witness_value(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::param(format!("witness point must lie in (0, 1], got {x}")));
        }
        let m = self.profile.m() as f64;
        Ok(self.coef_product() * self.eps.powf(-m) * x.powf(m * (self.eps - 1.0) + self.profile.alpha))
    }

    /// `(integral_0^1 (witness nu)^q)^(1/q)` without the coefficients:
    /// `eps^-m (p/(q eps))^(1/q)`, since `q(alpha - 1/p) = -1`.
    fn unit_maximal_lower(&self) -> Result<f64> {
        let q = self.profile.q();
        let p = self.profile.p_total();
        let alpha = self.profile.alpha;
        let m = self.profile.m() as f64;
        // x^(q(alpha - (1-eps)/p)): rise = (1 + q alpha - q/p) + q eps / p
        let rise = (1.0 + q * alpha - q / p) + q * self.eps / p;
        let spec = PowerSpec::from_rise(1.0, rise);
        Ok(self.eps.powf(-m) * power_integral(&spec, 0.0, 1.0)?.powf(1.0 / q))
    }

    pub fn norms(&self) -> Result<ExtremalNorms> {
        let m = self.profile.m();
        let unit_norms = (0..m).map(|i| self.unit_norm(i)).collect::<Result<Vec<_>>>()?;
        let unit_product: f64 = unit_norms.iter().product();
        let (apq, apq_interval) = self.apq()?;
        let unit_lower = self.unit_maximal_lower()?;
        let c = self.coef_product();
        Ok(ExtremalNorms {
            eps: self.eps,
            norm_product: c * unit_product,
            norm_product_target: c * self.eps.powf(-1.0 / self.profile.p_total()),
            apq,
            apq_interval,
            maximal_lower: c * unit_lower,
            ratio: unit_lower / unit_product,
        })
    }
}
