use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::sim::HittingTimeSample;

/// Largest censored fraction per step size that still admits a fit.
pub const MAX_CENSORED_FRACTION: f64 = 0.01;

/// Which per-eta statistic is regressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitPoint {
    pub eta: f64,
    pub inv_eta: f64,
    pub runs: usize,
    pub censored: usize,
    /// Mean or median of the hitting times, per the estimand.
    pub tau: f64,
    pub ln_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub estimand: Estimand,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub theory_slope: f64,
    /// Intercept of the least-squares fit with the slope fixed to theory.
    pub theory_intercept: f64,
    pub theory_r_squared: f64,
    pub points: Vec<FitPoint>,
}

impl RegressionFit {
    pub fn predict(&self, inv_eta: f64) -> f64 {
        self.slope * inv_eta + self.intercept
    }

    pub fn predict_theory(&self, inv_eta: f64) -> f64 {
        self.theory_slope * inv_eta + self.theory_intercept
    }
}

/// Samples grouped by step size, in first-seen order of `eta_index`.
pub(crate) fn group(samples: &[HittingTimeSample]) -> Vec<(f64, Vec<&HittingTimeSample>)> {
    let mut by: BTreeMap<usize, (f64, Vec<&HittingTimeSample>)> = BTreeMap::new();
    for s in samples {
        by.entry(s.eta_index).or_insert_with(|| (s.eta, Vec::new())).1.push(s);
    }
    by.into_values().collect()
}

/// Type-7 quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn r_squared(ss_res: f64, ss_tot: f64) -> f64 {
    if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Least squares of `ln τ` against `1/η` over the per-eta statistic.
///
/// Censored runs are excluded from the mean; more than 1% censoring at any
/// step size is an error. The median variant keeps censored runs at the cap.
pub fn fit_loglinear(
    samples: &[HittingTimeSample],
    theory_slope: f64,
    estimand: Estimand,
) -> Result<RegressionFit, StatsError> {
    let mut points = Vec::new();
    for (eta, runs) in group(samples) {
        let censored = runs.iter().filter(|s| s.censored).count();
        let frac = censored as f64 / runs.len() as f64;
        if frac > MAX_CENSORED_FRACTION {
            return Err(StatsError::TooCensored { eta, fraction: frac });
        }
        let tau = match estimand {
            Estimand::Mean => {
                let kept: Vec<f64> = runs.iter().filter(|s| !s.censored).map(|s| s.steps as f64).collect();
                kept.iter().sum::<f64>() / kept.len() as f64
            }
            Estimand::Median => {
                let mut all: Vec<f64> = runs.iter().map(|s| s.steps as f64).collect();
                all.sort_by(f64::total_cmp);
                quantile(&all, 0.5)
            }
        };
        if !(tau > 0.0) {
            return Err(StatsError::NonPositiveTime { eta });
        }
        points.push(FitPoint {
            eta,
            inv_eta: 1.0 / eta,
            runs: runs.len(),
            censored,
            tau,
            ln_tau: tau.ln(),
        });
    }
    fit_points(points, theory_slope, estimand)
}

pub(crate) fn fit_points(
    points: Vec<FitPoint>,
    theory_slope: f64,
    estimand: Estimand,
) -> Result<RegressionFit, StatsError> {
    if points.len() < 2 {
        return Err(StatsError::DegenerateDesign);
    }
    let n = points.len() as f64;
    let x: Vec<f64> = points.iter().map(|p| p.inv_eta).collect();
    // logs of ratios to the first point, so a common factor in τ cancels exactly
    let y: Vec<f64> = points.iter().map(|p| (p.tau / points[0].tau).ln()).collect();
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();
    if !(sxx > 0.0) {
        return Err(StatsError::DegenerateDesign);
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let syy: f64 = y.iter().map(|v| (v - ym) * (v - ym)).sum();
    let slope = sxy / sxx;
    let rel_intercept = ym - slope * xm;
    let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (b - slope * a - rel_intercept).powi(2)).sum();
    let rel_theory = ym - theory_slope * xm;
    let ss_theory: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - theory_slope * a - rel_theory).powi(2))
        .sum();
    let r2 = r_squared(ss_res, syy);
    let offset = points[0].ln_tau;
    Ok(RegressionFit {
        estimand,
        slope,
        intercept: offset + rel_intercept,
        r_squared: r2,
        n_points: points.len(),
        theory_slope,
        theory_intercept: offset + rel_theory,
        theory_r_squared: r_squared(ss_theory, syy),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(etas: &[f64], tau: impl Fn(f64) -> u64, runs: usize) -> Vec<HittingTimeSample> {
        let mut out = Vec::new();
        for (e, &eta) in etas.iter().enumerate() {
            for r in 0..runs {
                out.push(HittingTimeSample {
                    run_id: e * runs + r,
                    eta_index: e,
                    eta,
                    seed: 0,
                    steps: tau(eta),
                    censored: false,
                    diverged: false,
                    final_point: vec![0.0],
                });
            }
        }
        out
    }

    #[test]
    fn recovers_exact_exponential_law() {
        let etas = [1.0, 0.5, 0.25, 0.2];
        let pts: Vec<FitPoint> = etas
            .iter()
            .map(|&eta| {
                let tau = (3.0 / eta + 1.0_f64).exp();
                FitPoint { eta, inv_eta: 1.0 / eta, runs: 1, censored: 0, tau, ln_tau: tau.ln() }
            })
            .collect();
        let fit = fit_points(pts, 3.0, Estimand::Mean).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.theory_r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn censoring_and_design_errors() {
        let mut s = synthetic(&[0.1, 0.2], |_| 10, 50);
        assert!(matches!(
            fit_loglinear(&synthetic(&[0.1], |_| 10, 5), 0.0, Estimand::Mean),
            Err(StatsError::DegenerateDesign)
        ));
        s[0].censored = true;
        assert!(matches!(fit_loglinear(&s, 0.0, Estimand::Mean), Err(StatsError::TooCensored { .. })));
        let s = synthetic(&[0.1, 0.2], |_| 0, 3);
        assert!(matches!(fit_loglinear(&s, 0.0, Estimand::Mean), Err(StatsError::NonPositiveTime { .. })));
    }

    #[test]
    fn censored_runs_leave_the_mean() {
        let mut s = synthetic(&[0.1, 0.2], |eta| (10.0 / eta) as u64, 200);
        s[0].censored = true;
        s[0].steps = 1_000_000;
        let fit = fit_loglinear(&s, 0.0, Estimand::Mean).unwrap();
        assert_eq!(fit.points[0].tau, 100.0);
        assert_eq!(fit.points[0].censored, 1);
    }

    #[test]
    fn median_variant() {
        let mut s = synthetic(&[0.5, 0.25], |eta| (1.0 / eta) as u64, 3);
        s[2].steps = 1000;
        let fit = fit_loglinear(&s, 0.0, Estimand::Median).unwrap();
        assert_eq!(fit.points[0].tau, 2.0);
    }

    proptest! {
        #[test]
        fn power_of_two_scaling_moves_only_the_intercept(
            taus in prop::collection::vec(1.0f64..1e6, 3..8),
            k in -10i32..10,
        ) {
            let pts = |c: f64| -> Vec<FitPoint> {
                taus.iter().enumerate().map(|(i, &t)| {
                    let eta = 1.0 / (i as f64 + 1.0);
                    FitPoint { eta, inv_eta: 1.0 / eta, runs: 1, censored: 0, tau: c * t, ln_tau: (c * t).ln() }
                }).collect()
            };
            let c = 2f64.powi(k);
            let a = fit_points(pts(1.0), 0.5, Estimand::Mean).unwrap();
            let b = fit_points(pts(c), 0.5, Estimand::Mean).unwrap();
            prop_assert_eq!(a.slope.to_bits(), b.slope.to_bits());
            prop_assert_eq!(a.r_squared.to_bits(), b.r_squared.to_bits());
            prop_assert!((b.intercept - a.intercept - c.ln()).abs() < 1e-9 * (1.0 + a.intercept.abs()));
        }

        #[test]
        fn constrained_fit_never_wins(
            taus in prop::collection::vec(1.0f64..1e6, 2..8),
            theory in -5.0f64..5.0,
        ) {
            let pts: Vec<FitPoint> = taus.iter().enumerate().map(|(i, &t)| {
                let eta = 1.0 / (i as f64 + 1.0);
                FitPoint { eta, inv_eta: 1.0 / eta, runs: 1, censored: 0, tau: t, ln_tau: t.ln() }
            }).collect();
            let f = fit_points(pts, theory, Estimand::Mean).unwrap();
            prop_assert!(f.theory_r_squared <= f.r_squared + 1e-12);
            prop_assert!((0.0..=1.0).contains(&f.r_squared));
            prop_assert!((0.0..=1.0).contains(&f.theory_r_squared));
        }
    }
}
