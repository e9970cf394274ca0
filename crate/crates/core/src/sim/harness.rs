use rayon::prelude::*;

use super::rng::run_seed;
use super::sgd::{run_to_hit, HittingTimeSample, SgdConfig};
use super::SimError;

/// `runs_per_eta` independent runs at every step size.
///
/// Seeds depend only on `(master_seed, eta index, run index)` and the output
/// is ordered by that key, so results do not depend on `jobs`.
pub fn monte_carlo(
    cfg: &SgdConfig,
    etas: &[f64],
    runs_per_eta: usize,
    master_seed: u64,
    jobs: usize,
) -> Result<Vec<HittingTimeSample>, SimError> {
    if runs_per_eta < 1 {
        return Err(SimError::InvalidConfig("runs_per_eta must be at least 1".into()));
    }
    if etas.is_empty() {
        return Err(SimError::InvalidConfig("no step sizes given".into()));
    }
    let configs: Vec<SgdConfig> = etas
        .iter()
        .map(|&eta| {
            let c = SgdConfig {
                eta,
                record_trajectory: false,
                ..cfg.clone()
            };
            c.validate().map(|_| c)
        })
        .collect::<Result<_, _>>()?;
    let tasks: Vec<(usize, usize)> = (0..etas.len())
        .flat_map(|e| (0..runs_per_eta).map(move |r| (e, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(e, r)| {
                let seed = run_seed(master_seed, e, r);
                let mut s = run_to_hit(&configs[e], seed)?;
                s.run_id = e * runs_per_eta + r;
                s.eta_index = e;
                Ok(s)
            })
            .collect()
    })
}

/// `run_id,eta,seed,steps,censored,final_x1..final_xd`.
pub fn samples_csv(samples: &[HittingTimeSample]) -> String {
    use std::fmt::Write as _;
    let d = samples.first().map_or(0, |s| s.final_point.len());
    let mut out = String::from("run_id,eta,seed,steps,censored");
    for k in 1..=d {
        let _ = write!(out, ",final_x{k}");
    }
    out.push('\n');
    for s in samples {
        let _ = write!(out, "{},{},{},{},{}", s.run_id, s.eta, s.seed, s.steps, s.censored);
        for v in &s.final_point {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Parses [`samples_csv`] output; `#` lines are ignored.
pub fn parse_samples_csv(text: &str) -> Result<Vec<HittingTimeSample>, SimError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let bad = |e: String| SimError::Parse(e);
    let mut etas: Vec<f64> = Vec::new();
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() < 5 {
            return Err(bad(format!("expected at least 5 columns, got {}", rec.len())));
        }
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("column {i}: {e}")));
        let int = |i: usize| rec[i].parse::<u64>().map_err(|e| bad(format!("column {i}: {e}")));
        let eta = num(1)?;
        let eta_index = match etas.iter().position(|&e| e == eta) {
            Some(i) => i,
            None => {
                etas.push(eta);
                etas.len() - 1
            }
        };
        out.push(HittingTimeSample {
            run_id: int(0)? as usize,
            eta_index,
            eta,
            seed: int(2)?,
            steps: int(3)?,
            censored: rec[4].parse().map_err(|e| bad(format!("censored: {e}")))?,
            diverged: false,
            final_point: (5..rec.len()).map(num).collect::<Result<_, _>>()?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::QuadraticBowl;
    use crate::ldp::IsotropicGaussian;
    use std::collections::HashSet;
    use std::sync::Arc;

    fn cfg() -> SgdConfig {
        SgdConfig {
            objective: Arc::new(QuadraticBowl::new(2)),
            noise: Arc::new(IsotropicGaussian::new(0.25, 2).unwrap()),
            eta: 0.1,
            x0: vec![1.0, 1.0],
            target_centers: vec![vec![0.0, 0.0]],
            epsilon: 0.05,
            max_steps: 100_000,
            record_trajectory: false,
        }
    }

    #[test]
    fn six_samples_with_distinct_seeds() {
        let s = monte_carlo(&cfg(), &[0.1, 0.05], 3, 7, 2).unwrap();
        assert_eq!(s.len(), 6);
        let seeds: HashSet<u64> = s.iter().map(|x| x.seed).collect();
        assert_eq!(seeds.len(), 6);
        assert_eq!(s.iter().map(|x| x.run_id).collect::<Vec<_>>(), [0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let a = monte_carlo(&cfg(), &[0.1, 0.05, 0.02], 20, 99, 1).unwrap();
        let b = monte_carlo(&cfg(), &[0.1, 0.05, 0.02], 20, 99, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(samples_csv(&a), samples_csv(&b));
    }

    #[test]
    fn csv_roundtrip() {
        let s = monte_carlo(&cfg(), &[0.1, 0.05], 4, 1, 1).unwrap();
        let text = samples_csv(&s);
        assert!(text.starts_with("run_id,eta,seed,steps,censored,final_x1,final_x2\n"));
        let back = parse_samples_csv(&format!("# header\n{text}")).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn bad_runs_rejected() {
        assert!(monte_carlo(&cfg(), &[0.1], 0, 1, 1).is_err());
        assert!(monte_carlo(&cfg(), &[-0.1], 1, 1, 1).is_err());
    }
}
