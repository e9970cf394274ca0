//! Hitting-time aggregation, the log-linear scaling fit and verdicts.

mod fit;
mod summary;

pub use fit::{fit_loglinear, quantile, Estimand, FitPoint, RegressionFit, MAX_CENSORED_FRACTION};
pub use summary::{summarize, summary_csv, EtaSummary};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("{:.1}% of runs at eta = {eta} hit the step cap", fraction * 100.0)]
    TooCensored { eta: f64, fraction: f64 },
    #[error("need at least two distinct step sizes")]
    DegenerateDesign,
    #[error("hitting-time statistic at eta = {eta} is zero")]
    NonPositiveTime { eta: f64 },
}

/// Acceptance thresholds for a fit against a theoretical slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerdictPolicy {
    /// Allowed `|slope − theory| / theory`.
    pub rel_tol: f64,
    /// Absolute slope allowance; governs when theory is zero or tiny.
    pub abs_floor: f64,
    pub min_r_squared: f64,
    pub min_theory_r_squared: f64,
}

impl Default for VerdictPolicy {
    fn default() -> Self {
        VerdictPolicy {
            rel_tol: 0.2,
            abs_floor: 0.0,
            min_r_squared: 0.9,
            min_theory_r_squared: 0.85,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub slope: f64,
    pub theory_slope: f64,
    pub slope_error: f64,
    pub allowed_error: f64,
    /// Goodness-of-fit thresholds only apply when the slope allowance is
    /// relative; a flat law leaves nothing for `r²` to explain.
    pub zero_energy_branch: bool,
    pub reasons: Vec<String>,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// PASS iff `|slope − theory| ≤ max(rel_tol·|theory|, abs_floor)` and, unless
/// the absolute floor governs, both `r²` values clear their thresholds.
pub fn compare_report(fit: &RegressionFit, policy: &VerdictPolicy) -> Verdict {
    let relative = policy.rel_tol * fit.theory_slope.abs();
    let allowed = relative.max(policy.abs_floor);
    let zero_branch = policy.abs_floor > relative;
    let err = (fit.slope - fit.theory_slope).abs();
    let mut reasons = Vec::new();
    if !(err <= allowed) {
        reasons.push(format!("slope error {err:.6e} exceeds allowance {allowed:.6e}"));
    }
    if !zero_branch {
        if fit.r_squared < policy.min_r_squared {
            reasons.push(format!("r^2 {:.4} below {}", fit.r_squared, policy.min_r_squared));
        }
        if fit.theory_r_squared < policy.min_theory_r_squared {
            reasons.push(format!(
                "theory r^2 {:.4} below {}",
                fit.theory_r_squared, policy.min_theory_r_squared
            ));
        }
    }
    Verdict {
        pass: reasons.is_empty(),
        slope: fit.slope,
        theory_slope: fit.theory_slope,
        slope_error: err,
        allowed_error: allowed,
        zero_energy_branch: zero_branch,
        reasons,
    }
}

pub fn fit_text(fit: &RegressionFit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "estimand: {:?}", fit.estimand);
    let _ = writeln!(out, "points: {}", fit.n_points);
    let _ = writeln!(out, "slope: {}", fit.slope);
    let _ = writeln!(out, "intercept: {}", fit.intercept);
    let _ = writeln!(out, "r_squared: {}", fit.r_squared);
    let _ = writeln!(out, "theory_slope: {}", fit.theory_slope);
    let _ = writeln!(out, "theory_intercept: {}", fit.theory_intercept);
    let _ = writeln!(out, "theory_r_squared: {}", fit.theory_r_squared);
    let censored: usize = fit.points.iter().map(|p| p.censored).sum();
    if censored > 0 {
        let _ = writeln!(out, "warning: {censored} censored runs excluded");
    }
    out
}

pub fn verdict_text(v: &Verdict) -> String {
    let mut out = format!(
        "verdict: {}\nslope: {}\ntheory_slope: {}\nslope_error: {}\nallowed_error: {}\n",
        v.label(),
        v.slope,
        v.theory_slope,
        v.slope_error,
        v.allowed_error
    );
    for r in &v.reasons {
        let _ = writeln!(out, "reason: {r}");
    }
    out
}

/// `key,value` rows of the fit scalars.
pub fn fit_csv(fit: &RegressionFit) -> String {
    let mut out = String::from("key,value\n");
    let rows = [
        ("slope", fit.slope),
        ("intercept", fit.intercept),
        ("r_squared", fit.r_squared),
        ("n_points", fit.n_points as f64),
        ("theory_slope", fit.theory_slope),
        ("theory_intercept", fit.theory_intercept),
        ("theory_r_squared", fit.theory_r_squared),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// `inv_eta,ln_mean_tau,data_fit,theory_fit` per step size.
pub fn plot_data_csv(fit: &RegressionFit) -> String {
    let mut out = String::from("inv_eta,ln_mean_tau,data_fit,theory_fit\n");
    for p in &fit.points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.inv_eta,
            p.ln_tau,
            fit.predict(p.inv_eta),
            fit.predict_theory(p.inv_eta)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(slope: f64, theory: f64) -> RegressionFit {
        RegressionFit {
            estimand: Estimand::Mean,
            slope,
            intercept: 0.0,
            r_squared: 0.99,
            n_points: 5,
            theory_slope: theory,
            theory_intercept: 0.0,
            theory_r_squared: 0.97,
            points: vec![],
        }
    }

    #[test]
    fn relative_tolerance() {
        assert!(compare_report(&fit(3.1, 3.0), &VerdictPolicy::default()).pass);
        let v = compare_report(&fit(3.1, 1.0), &VerdictPolicy::default());
        assert!(!v.pass);
        assert_eq!(v.label(), "FAIL");
    }

    #[test]
    fn zero_theory_uses_absolute_floor() {
        let camel = 2.0 * (1.59047 - (-3.29712)) / 2500.0;
        let policy = VerdictPolicy {
            abs_floor: 0.05 * camel,
            ..VerdictPolicy::default()
        };
        let mut flat = fit(0.0001, 0.0);
        flat.r_squared = 0.1;
        flat.theory_r_squared = 0.0;
        let v = compare_report(&flat, &policy);
        assert!(v.pass && v.zero_energy_branch);
        assert!(!compare_report(&fit(0.004, 0.0), &policy).pass);
    }

    #[test]
    fn poor_fit_fails() {
        let mut f = fit(3.0, 3.0);
        f.r_squared = 0.5;
        let v = compare_report(&f, &VerdictPolicy::default());
        assert!(!v.pass);
        assert_eq!(v.reasons.len(), 1);
        assert!(verdict_text(&v).starts_with("verdict: FAIL\n"));
    }

    #[test]
    fn plot_data_columns() {
        let mut f = fit(2.0, 1.0);
        f.intercept = 1.0;
        f.points = vec![FitPoint { eta: 0.5, inv_eta: 2.0, runs: 1, censored: 0, tau: 1.0, ln_tau: 0.0 }];
        assert_eq!(plot_data_csv(&f), "inv_eta,ln_mean_tau,data_fit,theory_fit\n2,0,5,2\n");
        assert!(fit_csv(&f).contains("slope,2\n"));
    }
}
