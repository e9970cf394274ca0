use std::fmt::Write as _;

use serde::Serialize;

use super::fit::{group, quantile};
use crate::sim::HittingTimeSample;

/// Box-plot statistics of the hitting times at one step size.
///
/// Quantiles cover every recorded run (censored runs sit at the cap); the
/// mean and its standard error cover the uncensored runs only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaSummary {
    pub eta: f64,
    pub runs: usize,
    pub censored: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
    pub std_err: f64,
}

pub fn summarize(samples: &[HittingTimeSample]) -> Vec<EtaSummary> {
    group(samples)
        .into_iter()
        .map(|(eta, runs)| {
            let mut all: Vec<f64> = runs.iter().map(|s| s.steps as f64).collect();
            all.sort_by(f64::total_cmp);
            let kept: Vec<f64> = runs.iter().filter(|s| !s.censored).map(|s| s.steps as f64).collect();
            let n = kept.len() as f64;
            let mean = if kept.is_empty() { f64::NAN } else { kept.iter().sum::<f64>() / n };
            let std_err = if kept.len() < 2 {
                0.0
            } else {
                let var = kept.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            };
            EtaSummary {
                eta,
                runs: runs.len(),
                censored: runs.len() - kept.len(),
                min: all[0],
                q25: quantile(&all, 0.25),
                median: quantile(&all, 0.5),
                q75: quantile(&all, 0.75),
                max: all[all.len() - 1],
                mean,
                std_err,
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[EtaSummary]) -> String {
    let mut out = String::from("eta,runs,censored,min,q25,median,q75,max,mean,std_err\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.eta, r.runs, r.censored, r.min, r.q25, r.median, r.q75, r.max, r.mean, r.std_err
        );
    }
    out
}
