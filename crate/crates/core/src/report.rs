//! Estimator reports shared by the Monte Carlo checks.

use num_complex::Complex64;
use serde::Serialize;

use crate::stats::{mean_se, paired, MeanSe};

/// A real or complex scalar, serialized as a number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl Scalar {
    pub fn re(&self) -> f64 {
        match self {
            Scalar::Real(x) => *x,
            Scalar::Complex([re, _]) => *re,
        }
    }

    pub fn im(&self) -> f64 {
        match self {
            Scalar::Real(_) => 0.0,
            Scalar::Complex([_, im]) => *im,
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.re(), self.im())
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Scalar {
        Scalar::Real(x)
    }
}

impl From<Complex64> for Scalar {
    fn from(z: Complex64) -> Scalar {
        Scalar::Complex([z.re, z.im])
    }
}

/// How `pass` was decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PassRule {
    /// |estimate − reference| ≤ k·SE, componentwise for complex values.
    Statistical { k: f64 },
    /// |estimate − reference| ≤ tol.
    Deterministic { tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub identity: String,
    pub estimate: Scalar,
    pub reference: Scalar,
    pub se: Scalar,
    pub n: usize,
    pub pass: bool,
    pub rule: PassRule,
}

/// Default width of the statistical acceptance band, in standard errors.
pub const SE_BAND: f64 = 4.0;

impl EstimatorReport {
    fn decide(identity: String, estimate: Scalar, reference: Scalar, se: Scalar, n: usize, rule: PassRule) -> Self {
        let pass = match rule {
            PassRule::Statistical { k } => {
                (estimate.re() - reference.re()).abs() <= k * se.re()
                    && (estimate.im() - reference.im()).abs() <= k * se.im()
            }
            PassRule::Deterministic { tol } => (estimate.to_complex() - reference.to_complex()).norm() <= tol,
        };
        EstimatorReport { identity, estimate, reference, se, n, pass, rule }
    }

    /// Sample mean of `samples` against `reference` at 4 SE.
    pub fn from_samples(identity: impl Into<String>, samples: &[f64], reference: f64) -> Self {
        Self::from_mean_se(identity, mean_se(samples), reference)
    }

    pub fn from_mean_se(identity: impl Into<String>, m: MeanSe, reference: f64) -> Self {
        Self::decide(
            identity.into(),
            m.mean.into(),
            reference.into(),
            m.se.into(),
            m.n,
            PassRule::Statistical { k: SE_BAND },
        )
    }

    /// Complex sample mean, SE taken separately for the real and imaginary parts.
    pub fn from_complex_samples(identity: impl Into<String>, samples: &[Complex64], reference: Complex64) -> Self {
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        let (mr, mi) = (mean_se(&re), mean_se(&im));
        Self::decide(
            identity.into(),
            Scalar::Complex([mr.mean, mi.mean]),
            reference.into(),
            Scalar::Complex([mr.se, mi.se]),
            samples.len(),
            PassRule::Statistical { k: SE_BAND },
        )
    }

    /// Two estimators of the same quantity from the same draws: estimate = mean(a),
    /// reference = mean(b), SE of the paired differences.
    pub fn paired(identity: impl Into<String>, a: &[f64], b: &[f64]) -> Self {
        let (ma, mb, diff) = paired(a, b);
        Self::decide(
            identity.into(),
            ma.into(),
            mb.into(),
            diff.se.into(),
            diff.n,
            PassRule::Statistical { k: SE_BAND },
        )
    }

    /// A pathwise identity checked against a fixed tolerance.
    pub fn deterministic(identity: impl Into<String>, estimate: f64, reference: f64, tol: f64, n: usize) -> Self {
        Self::decide(identity.into(), estimate.into(), reference.into(), 0.0.into(), n, PassRule::Deterministic { tol })
    }

    /// One summary line: `PASS name estimate reference se n`.
    pub fn summary(&self) -> String {
        let fmt = |s: &Scalar| match s {
            Scalar::Real(x) => format!("{x:.6e}"),
            Scalar::Complex([re, im]) => format!("{re:.6e}{im:+.6e}i"),
        };
        format!(
            "{} {} estimate={} reference={} se={} n={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.identity,
            fmt(&self.estimate),
            fmt(&self.reference),
            fmt(&self.se),
            self.n
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistical_rule_uses_four_se() {
        let r = EstimatorReport::from_samples("x", &[1.0, 2.0, 3.0, 4.0], 2.5);
        assert!(r.pass);
        let se = r.se.re();
        let off = EstimatorReport::from_samples("x", &[1.0, 2.0, 3.0, 4.0], 2.5 + 4.01 * se);
        assert!(!off.pass);
        let edge = EstimatorReport::from_samples("x", &[1.0, 2.0, 3.0, 4.0], 2.5 + 3.99 * se);
        assert!(edge.pass);
    }

    #[test]
    fn exact_constant_samples_pass_with_zero_se() {
        let r = EstimatorReport::from_complex_samples("c", &[Complex64::new(1.0, 0.0); 10], Complex64::new(1.0, 0.0));
        assert!(r.pass);
        assert_eq!(r.se, Scalar::Complex([0.0, 0.0]));
    }

    #[test]
    fn paired_report_uses_difference_se() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.1, 2.1, 2.9, 4.1];
        let r = EstimatorReport::paired("p", &a, &b);
        assert_eq!(r.estimate, Scalar::Real(2.5));
        assert!(r.se.re() < 0.1);
        assert!(r.pass);
    }

    #[test]
    fn nan_never_passes() {
        assert!(!EstimatorReport::from_samples("n", &[f64::NAN, 1.0], 1.0).pass);
        assert!(!EstimatorReport::deterministic("n", f64::NAN, 1.0, 1.0, 1).pass);
    }

    #[test]
    fn json_shape() {
        let r = EstimatorReport::deterministic("id", 1.0, 1.0, 1e-12, 3);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["identity"], "id");
        assert_eq!(v["pass"], true);
        assert_eq!(v["n"], 3);
        let c = EstimatorReport::from_complex_samples("z", &[Complex64::new(0.5, 0.25)], Complex64::new(0.5, 0.25));
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        assert_eq!(v["estimate"][1], 0.25);
    }
}
