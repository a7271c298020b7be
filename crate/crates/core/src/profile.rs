use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hölder conjugate `p' = p / (p - 1)`, with `1' = infinity`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Exponents of a multilinear fractional problem.
///
/// `1/p = sum 1/p_i`, `1/q = 1/p - alpha/n`, `1/q_i = 1/p_i - alpha/(mn)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentProfile {
    pub n: usize,
    pub alpha: f64,
    pub p: Vec<f64>,
    /// Kernel integrability exponent; `None` when no rough kernel is involved.
    #[serde(default)]
    pub s: Option<f64>,
}

impl ExponentProfile {
    /// Checks only what every operator needs: `m >= 1`, `p_i >= 1`,
    /// `0 <= alpha < mn`.
    pub fn new(n: usize, alpha: f64, p: Vec<f64>) -> Result<Self> {
        let prof = ExponentProfile { n, alpha, p, s: None };
        prof.check_basic()?;
        Ok(prof)
    }

    pub fn with_kernel_exponent(mut self, s: f64) -> Result<Self> {
        if !(s > 1.0) {
            return Err(Error::param(format!("kernel exponent s must exceed 1, got {s}")));
        }
        self.s = Some(s);
        Ok(self)
    }

    pub fn check_basic(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("dimension n must be positive"));
        }
        if self.p.is_empty() {
            return Err(Error::param("at least one exponent p_i is required"));
        }
        if let Some(pi) = self.p.iter().find(|&&pi| !(pi >= 1.0) || pi.is_infinite()) {
            return Err(Error::param(format!("every p_i must lie in [1, infinity), got {pi}")));
        }
        let top = (self.m() * self.n) as f64;
        if !(self.alpha >= 0.0 && self.alpha < top) {
            return Err(Error::param(format!("alpha must lie in [0, mn) = [0, {top}), got {}", self.alpha)));
        }
        if let Some(s) = self.s {
            if !(s > 1.0) {
                return Err(Error::param(format!("kernel exponent s must exceed 1, got {s}")));
            }
        }
        Ok(())
    }

    /// The standing hypotheses of the weighted theory: `1/m < p < n/alpha`.
    pub fn require_weighted_range(&self) -> Result<()> {
        self.check_basic()?;
        let p = self.p_total();
        let lower = 1.0 / self.m() as f64;
        let upper = if self.alpha == 0.0 { f64::INFINITY } else { self.n as f64 / self.alpha };
        if !(p > lower && p < upper) {
            return Err(Error::Hypothesis(format!(
                "requires 1/m < p < n/alpha, got p = {p} with 1/m = {lower} and n/alpha = {upper}"
            )));
        }
        if !(self.q() > 0.0) {
            return Err(Error::Hypothesis(format!("requires q > 0, got {}", self.q())));
        }
        Ok(())
    }

    /// The weak-type range `1/m <= p < n/alpha`, which admits `p_i = 1` for
    /// every `i`.
    pub fn require_weak_range(&self) -> Result<()> {
        self.check_basic()?;
        let p = self.p_total();
        let lower = 1.0 / self.m() as f64;
        let upper = if self.alpha == 0.0 { f64::INFINITY } else { self.n as f64 / self.alpha };
        // p = 1/m is computed as 1/(sum 1/p_i), which is exact when all p_i = 1
        if !(p >= lower && p < upper) {
            return Err(Error::Hypothesis(format!(
                "requires 1/m <= p < n/alpha, got p = {p} with 1/m = {lower} and n/alpha = {upper}"
            )));
        }
        Ok(())
    }

    /// Hypotheses for rough kernels: `1 <= s' < p_i` for every `i`.
    pub fn require_rough_range(&self) -> Result<()> {
        self.require_weighted_range()?;
        let sp = self
            .s_prime()
            .ok_or_else(|| Error::Hypothesis("a kernel exponent s is required".into()))?;
        if let Some(pi) = self.p.iter().find(|&&pi| !(sp < pi)) {
            return Err(Error::Hypothesis(format!(
                "requires 1 <= s' < p_i, got s' = {sp} and p_i = {pi}"
            )));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    /// `p` with `1/p = sum 1/p_i`.
    pub fn p_total(&self) -> f64 {
        1.0 / self.p.iter().map(|pi| 1.0 / pi).sum::<f64>()
    }

    /// `q` with `1/q = 1/p - alpha/n`.
    pub fn q(&self) -> f64 {
        1.0 / self.inv_q()
    }

    pub fn inv_q(&self) -> f64 {
        self.p.iter().map(|pi| 1.0 / pi).sum::<f64>() - self.alpha / self.n as f64
    }

    /// `q_i` with `1/q_i = 1/p_i - alpha/(mn)`.
    pub fn q_i(&self, i: usize) -> f64 {
        1.0 / (1.0 / self.p[i] - self.alpha / (self.m() * self.n) as f64)
    }

    pub fn p_prime(&self, i: usize) -> f64 {
        conjugate(self.p[i])
    }

    pub fn s_prime(&self) -> Option<f64> {
        self.s.map(conjugate)
    }

    /// `q_{+-eps}` with `1/q_eps = 1/p - (alpha + eps)/n`.
    pub fn q_shifted(&self, eps: f64) -> f64 {
        1.0 / (1.0 / self.p_total() - (self.alpha + eps) / self.n as f64)
    }

    /// `1 - alpha/(mn)`.
    pub fn fractional_factor(&self) -> f64 {
        1.0 - self.alpha / (self.m() * self.n) as f64
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut out = self.clone();
        out.alpha = alpha;
        out.check_basic()?;
        Ok(out)
    }

    /// Whether all `p_i` coincide.
    pub fn equal_exponents(&self) -> bool {
        self.p.windows(2).all(|w| w[0] == w[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn derived_exponents_of_bilinear_example() {
        let prof = ExponentProfile::new(1, 0.5, vec![2.0, 2.0]).unwrap();
        assert_eq!(prof.p_total(), 1.0);
        assert_eq!(prof.q(), 2.0);
        assert_eq!(prof.p_prime(0), 2.0);
        assert_eq!(prof.fractional_factor(), 0.75);
        prof.require_weighted_range().unwrap();
    }

    #[test]
    fn identities_hold() {
        for (n, alpha, p) in [(1, 0.5, vec![2.0, 3.0]), (2, 1.0, vec![1.5, 4.0, 2.5]), (3, 0.0, vec![2.0])] {
            let prof = ExponentProfile::new(n, alpha, p).unwrap();
            let sum_qi: f64 = (0..prof.m()).map(|i| 1.0 / prof.q_i(i)).sum();
            assert!(rel(sum_qi, 1.0 / prof.q()) < 2f64.powi(-40));
            for i in 0..prof.m() {
                let pi = prof.p[i];
                assert!(rel(1.0 / pi + 1.0 / prof.p_prime(i), 1.0) < 2f64.powi(-40));
            }
            let eps = 0.125;
            let expect = 1.0 / prof.q() - eps / n as f64;
            assert!(rel(1.0 / prof.q_shifted(eps), expect) < 2f64.powi(-40));
        }
    }

    #[test]
    fn conjugate_edges() {
        assert_eq!(conjugate(1.0), f64::INFINITY);
        assert_eq!(conjugate(f64::INFINITY), 1.0);
        assert_eq!(conjugate(2.0), 2.0);
    }

    #[test]
    fn range_violations_name_the_hypothesis() {
        // p = 1/2 with alpha = 1.5, n = 1 -> n/alpha = 2/3 > p fine; push p above n/alpha
        let prof = ExponentProfile::new(1, 0.9, vec![4.0, 4.0]).unwrap();
        let err = prof.require_weighted_range().unwrap_err().to_string();
        assert!(err.contains("1/m < p < n/alpha"), "{err}");
        let prof = ExponentProfile::new(1, 0.0, vec![1.0, 1.0, 1.0]).unwrap();
        assert!(prof.require_weighted_range().is_err());
        let prof = ExponentProfile::new(1, 0.25, vec![2.0])
            .unwrap()
            .with_kernel_exponent(1.5)
            .unwrap();
        let err = prof.require_rough_range().unwrap_err().to_string();
        assert!(err.contains("s' < p_i"), "{err}");
        assert!(ExponentProfile::new(1, 1.0, vec![2.0]).is_err());
        assert!(ExponentProfile::new(1, 0.0, vec![0.5]).is_err());
        assert!(ExponentProfile::new(1, 0.0, vec![]).is_err());
    }
}
