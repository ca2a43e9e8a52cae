use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denoiser strengths `σ_d⁽¹⁾ > … > σ_d⁽ⁿ⁾`, evenly spaced in log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    sigmas: Vec<f64>,
}

impl Schedule {
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.sigmas.last().expect("schedules are never empty")
    }

    /// Single-step schedule, used when only one iteration is requested.
    pub(crate) fn single(sigma: f64) -> Self {
        Self { sigmas: vec![sigma] }
    }
}

/// Log-spaced schedule from `sigma1` down to `sigma2` with exact endpoints.
pub fn make_schedule(sigma1: f64, sigma2: f64, n: usize) -> Result<Schedule> {
    if !(sigma2 > 0.0) || !(sigma1 > sigma2) || !sigma1.is_finite() {
        return Err(Error::param(format!(
            "schedule needs sigma1 > sigma2 > 0 (got {sigma1}, {sigma2})"
        )));
    }
    if n < 2 {
        return Err(Error::param(format!("schedule needs at least 2 steps, got {n}")));
    }
    let (l1, l2) = (sigma1.ln(), sigma2.ln());
    let mut sigmas: Vec<f64> = (0..n)
        .map(|i| (l1 + i as f64 / (n - 1) as f64 * (l2 - l1)).exp())
        .collect();
    sigmas[0] = sigma1;
    sigmas[n - 1] = sigma2;
    Ok(Schedule { sigmas })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_steps_are_endpoints() {
        let s = make_schedule(0.3, 0.01, 2).unwrap();
        assert_eq!(s.sigmas(), &[0.3, 0.01]);
    }

    #[test]
    fn geometric_midpoint() {
        let s = make_schedule(0.1, 0.001, 3).unwrap();
        assert_eq!(s.sigmas()[0], 0.1);
        assert!((s.sigmas()[1] - 0.01).abs() < 1e-15);
        assert_eq!(s.sigmas()[2], 0.001);
    }

    #[test]
    fn constant_ratio() {
        let s = make_schedule(20.0 / 255.0, 0.005, 8).unwrap();
        let r: Vec<f64> = s.sigmas().windows(2).map(|w| w[1] / w[0]).collect();
        for q in &r {
            assert!((q - r[0]).abs() < 1e-12);
        }
        let logs: Vec<f64> = s.sigmas().iter().map(|v| v.ln()).collect();
        let step = logs[1] - logs[0];
        for w in logs.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-12);
        }
    }

    #[test]
    fn ordering_violations() {
        assert!(make_schedule(0.01, 0.1, 4).is_err());
        assert!(make_schedule(0.1, 0.0, 4).is_err());
        assert!(make_schedule(0.1, 0.01, 1).is_err());
    }
}
