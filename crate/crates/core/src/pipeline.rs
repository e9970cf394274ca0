//! End-to-end commands: analyze, simulate, fit, report, mam.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::config::{ConfigError, Manifest};
use crate::energy::{energy_from_point, EnergyError, EnergyReport};
use crate::graph::{
    build_with, chain_closure, emit_dot, write_graph_csv, EdgeContext, EdgeCostRegistry, EdgeEstimate,
    GraphError, TransitionGraph,
};
use crate::landscape::{
    find_critical_points, saddle_connections, write_critical_points_csv, CriticalPointSet, DomainBox,
    FlowConfig, LandscapeError, Objective, ObjectiveRegistry, Polynomial, SaddleConnection,
};
use crate::ldp::{minimize_action, LdpError, MamResult, NoiseModel, NoiseRegistry};
use crate::sim::{monte_carlo, parse_samples_csv, samples_csv, HittingTimeSample, SgdConfig, SimError};
use crate::stats::{
    compare_report, fit_csv, fit_loglinear, fit_text, plot_data_csv, summarize, summary_csv, verdict_text,
    RegressionFit, StatsError, Verdict,
};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Ldp(#[from] LdpError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("verdict FAIL: {}", .0.reasons.join("; "))]
    Fail(Box<Verdict>),
}

impl Error {
    /// 2 config, 3 analysis, 4 simulation, 5 verdict FAIL, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Landscape(_) | Error::Graph(_) | Error::Energy(_) | Error::Ldp(_) => 3,
            Error::Simulation(_) | Error::Stats(_) => 4,
            Error::Fail(_) => 5,
            Error::Io { .. } => 1,
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: usize,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            jobs: 1,
            seed: None,
            output: None,
        }
    }
}

pub const CRITICAL_POINTS_FILE: &str = "critical_points.csv";
pub const GRAPH_CSV_FILE: &str = "graph.csv";
pub const CLOSED_GRAPH_CSV_FILE: &str = "graph_closed.csv";
pub const GRAPH_DOT_FILE: &str = "graph.dot";
pub const EDGES_FILE: &str = "edges.csv";
pub const ENERGY_CSV_FILE: &str = "energy.csv";
pub const ENERGY_TEXT_FILE: &str = "energy.txt";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FIT_CSV_FILE: &str = "fit.csv";
pub const FIT_TEXT_FILE: &str = "fit.txt";
pub const PLOT_DATA_FILE: &str = "plot_data.csv";
pub const VERDICT_FILE: &str = "verdict.txt";
pub const MAM_PATH_FILE: &str = "mam_path.csv";

/// Landscape, noise, graphs and energies of a manifest.
pub struct Analysis {
    pub objective: Arc<dyn Objective>,
    pub noise: Arc<dyn NoiseModel>,
    pub critical_points: CriticalPointSet,
    pub connections: Vec<SaddleConnection>,
    pub graph: TransitionGraph,
    pub closed: TransitionGraph,
    pub estimates: Vec<EdgeEstimate>,
    pub energy: EnergyReport,
}

pub struct Pipeline {
    pub manifest: Manifest,
    pub jobs: usize,
    objective: Arc<dyn Objective>,
    noise: Arc<dyn NoiseModel>,
    pool: rayon::ThreadPool,
}

pub fn build_objective(m: &Manifest) -> Result<Arc<dyn Objective>, Error> {
    let o = &m.objective;
    if o.name == "polynomial" {
        let (Some(terms), Some(lo), Some(hi)) = (&o.terms, &o.domain_lo, &o.domain_hi) else {
            return Err(ConfigError::Invalid("polynomial needs terms and domain".into()).into());
        };
        let domain = DomainBox::new(lo.clone(), hi.clone())?;
        return Ok(Arc::new(Polynomial::new("polynomial", terms.clone(), domain)?));
    }
    Ok(ObjectiveRegistry::with_builtins().create(&o.name)?)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Pipeline {
    pub fn new(mut manifest: Manifest, opts: &RunOptions) -> Result<Self, Error> {
        if let Some(seed) = opts.seed {
            if let Some(e) = manifest.experiment.as_mut() {
                e.master_seed = seed;
            }
        }
        if let Some(dir) = &opts.output {
            manifest.output.dir = dir.clone();
        }
        manifest.validate()?;
        // unresolvable names and malformed blocks are configuration errors
        let invalid = |e: String| Error::Config(ConfigError::Invalid(e));
        let objective = build_objective(&manifest).map_err(|e| invalid(e.to_string()))?;
        let noise = NoiseRegistry::with_builtins()
            .create(&manifest.noise, objective.dim())
            .map_err(|e| invalid(e.to_string()))?;
        EdgeCostRegistry::with_builtins()
            .get(&manifest.graph.cost_model)
            .map_err(|e| invalid(e.to_string()))?;
        let jobs = opts.jobs.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| SimError::Pool(e.to_string()))?;
        Ok(Pipeline {
            manifest,
            jobs,
            objective,
            noise,
            pool,
        })
    }

    pub fn from_path(path: &Path, opts: &RunOptions) -> Result<Self, Error> {
        Self::new(Manifest::load(path)?, opts)
    }

    pub fn output_dir(&self) -> &Path {
        &self.manifest.output.dir
    }

    pub fn master_seed(&self) -> u64 {
        self.manifest.experiment.as_ref().map_or(0, |e| e.master_seed)
    }

    /// Provenance line prefixed to every output file.
    pub fn header(&self, comment: &str) -> String {
        format!(
            "{comment} fwsgd {} config_hash={} master_seed={}\n",
            env!("CARGO_PKG_VERSION"),
            self.manifest.hash(),
            self.master_seed()
        )
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf, Error> {
        let dir = self.output_dir();
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(name);
        let comment = if name.ends_with(".dot") { "//" } else { "#" };
        let text = format!("{}{body}", self.header(comment));
        std::fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn analysis(&self) -> Result<Analysis, Error> {
        let m = &self.manifest;
        let obj = self.objective.clone();
        let noise = self.noise.clone();
        let cps = find_critical_points(obj.as_ref(), m.objective.grid_density)?;
        let flow = FlowConfig::default();
        let conns = saddle_connections(obj.as_ref(), &cps, &flow)?;
        let registry = EdgeCostRegistry::with_builtins();
        let model = registry.get(&m.graph.cost_model)?;
        let ctx = EdgeContext {
            obj: obj.as_ref(),
            cps: &cps,
            conns: &conns,
            noise: noise.as_ref(),
            mam: &m.mam,
        };
        let (mut graph, estimates) = self.pool.install(|| build_with(model, &ctx))?;
        if let Some(t) = &m.graph.targets {
            graph = graph.with_targets(t.clone())?;
        }
        let closed = chain_closure(&graph)?;
        let energy = EnergyReport::compute(&closed)?;
        Ok(Analysis {
            objective: obj,
            noise,
            critical_points: cps,
            connections: conns,
            graph,
            closed,
            estimates,
            energy,
        })
    }

    pub fn analyze(&self) -> Result<Analysis, Error> {
        let a = self.analysis()?;
        self.write(CRITICAL_POINTS_FILE, &write_critical_points_csv(&a.critical_points))?;
        self.write(GRAPH_CSV_FILE, &write_graph_csv(&a.graph))?;
        self.write(CLOSED_GRAPH_CSV_FILE, &write_graph_csv(&a.closed))?;
        self.write(GRAPH_DOT_FILE, &emit_dot(&a.graph))?;
        self.write(EDGES_FILE, &edges_csv(&a.estimates))?;
        self.write(ENERGY_CSV_FILE, &a.energy.to_csv())?;
        self.write(ENERGY_TEXT_FILE, &a.energy.to_text())?;
        Ok(a)
    }

    /// Start point of the experiment.
    pub fn start_point(&self, a: &Analysis) -> Result<Vec<f64>, Error> {
        let e = self.manifest.experiment()?;
        if let Some(x0) = &e.x0 {
            return Ok(x0.clone());
        }
        let node = e.start_node.expect("validated");
        let p = a.critical_points.get(node).ok_or_else(|| {
            ConfigError::Invalid(format!(
                "start_node {node} out of range ({} critical points)",
                a.critical_points.len()
            ))
        })?;
        let mut x = p.location.clone();
        if let Some(off) = &e.start_offset {
            if off.len() != x.len() {
                return Err(ConfigError::Invalid("start_offset has the wrong dimension".into()).into());
            }
            for (v, o) in x.iter_mut().zip(off) {
                *v += o;
            }
        }
        Ok(x)
    }

    pub fn sgd_config(&self, a: &Analysis) -> Result<SgdConfig, Error> {
        let e = self.manifest.experiment()?;
        Ok(SgdConfig {
            objective: a.objective.clone(),
            noise: a.noise.clone(),
            eta: e.etas[0],
            x0: self.start_point(a)?,
            target_centers: a
                .closed
                .targets
                .iter()
                .map(|&t| a.closed.nodes[t].location.clone())
                .collect(),
            epsilon: e.epsilon,
            max_steps: e.max_steps,
            record_trajectory: false,
        })
    }

    pub fn run_samples(&self, a: &Analysis) -> Result<Vec<HittingTimeSample>, Error> {
        let e = self.manifest.experiment()?;
        let cfg = self.sgd_config(a)?;
        Ok(monte_carlo(&cfg, &e.etas, e.runs_per_eta, e.master_seed, self.jobs)?)
    }

    pub fn simulate_with(&self, a: &Analysis) -> Result<Vec<HittingTimeSample>, Error> {
        match self.run_samples(a) {
            Ok(s) => {
                self.write(SAMPLES_FILE, &samples_csv(&s))?;
                Ok(s)
            }
            Err(err) => {
                self.write(SAMPLES_FILE, &format!("# FAILED: {err}\n"))?;
                Err(err)
            }
        }
    }

    pub fn simulate(&self) -> Result<Vec<HittingTimeSample>, Error> {
        let a = self.analysis()?;
        self.simulate_with(&a)
    }

    /// Samples from a previous `simulate` with the same manifest, if any.
    pub fn load_samples(&self) -> Result<Option<Vec<HittingTimeSample>>, Error> {
        let path = self.output_dir().join(SAMPLES_FILE);
        let Ok(text) = std::fs::read_to_string(&path) else {
            return Ok(None);
        };
        if text.lines().next() != Some(self.header("#").trim_end()) {
            return Ok(None);
        }
        if text.lines().any(|l| l.starts_with("# FAILED")) {
            return Ok(None);
        }
        Ok(Some(parse_samples_csv(&text)?))
    }

    /// `E(T‖x0)`, unless the manifest fixes the theory slope.
    pub fn theory_slope(&self, a: &Analysis) -> Result<f64, Error> {
        if let Some(s) = self.manifest.report.theory_slope {
            return Ok(s);
        }
        let x0 = self.start_point(a)?;
        Ok(energy_from_point(
            &a.closed,
            &a.energy,
            a.objective.as_ref(),
            &a.critical_points,
            &x0,
            &FlowConfig::default(),
        )?)
    }

    fn samples_for(&self, a: &Analysis) -> Result<Vec<HittingTimeSample>, Error> {
        match self.load_samples()? {
            Some(s) => Ok(s),
            None => self.simulate_with(a),
        }
    }

    pub fn fit(&self) -> Result<RegressionFit, Error> {
        let a = self.analysis()?;
        self.fit_with(&a)
    }

    fn fit_with(&self, a: &Analysis) -> Result<RegressionFit, Error> {
        let samples = self.samples_for(a)?;
        let theory = self.theory_slope(a)?;
        let fit = fit_loglinear(&samples, theory, self.manifest.report.estimand)?;
        self.write(SUMMARY_FILE, &summary_csv(&summarize(&samples)))?;
        self.write(FIT_CSV_FILE, &fit_csv(&fit))?;
        self.write(FIT_TEXT_FILE, &fit_text(&fit))?;
        self.write(PLOT_DATA_FILE, &plot_data_csv(&fit))?;
        Ok(fit)
    }

    /// Analysis, simulation (reusing matching samples), fit and verdict.
    /// A FAIL verdict is returned as `Ok`; callers map it to an exit status.
    pub fn report(&self) -> Result<(RegressionFit, Verdict), Error> {
        let a = self.analyze()?;
        let fit = self.fit_with(&a)?;
        let verdict = compare_report(&fit, &self.manifest.report.policy());
        self.write(VERDICT_FILE, &verdict_text(&verdict))?;
        Ok((fit, verdict))
    }

    /// Minimum-action path between two critical points or explicit points.
    pub fn mam(&self, from: &str, to: &str) -> Result<MamResult, Error> {
        let m = &self.manifest;
        let obj = &self.objective;
        let noise = &self.noise;
        let needs_cps = [from, to].iter().any(|s| !s.contains(','));
        let cps = if needs_cps {
            Some(find_critical_points(obj.as_ref(), m.objective.grid_density)?)
        } else {
            None
        };
        let resolve = |s: &str| -> Result<Vec<f64>, Error> {
            if s.contains(',') {
                s.split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| ConfigError::Invalid(format!("bad point '{s}': {e}")).into())
            } else {
                let id: usize = s
                    .trim()
                    .parse()
                    .map_err(|e| ConfigError::Invalid(format!("bad node id '{s}': {e}")))?;
                let cps = cps.as_ref().expect("computed above");
                cps.get(id)
                    .map(|p| p.location.clone())
                    .ok_or_else(|| ConfigError::Invalid(format!("no critical point {id}")).into())
            }
        };
        let (a, b) = (resolve(from)?, resolve(to)?);
        let res = match minimize_action(obj.as_ref(), noise.as_ref(), &a, &b, &m.mam) {
            Ok(r) => r,
            Err(LdpError::MaxIterations(r)) => {
                self.write(MAM_PATH_FILE, &path_csv(&r))?;
                return Err(LdpError::MaxIterations(r).into());
            }
            Err(e) => return Err(e.into()),
        };
        self.write(MAM_PATH_FILE, &path_csv(&res))?;
        Ok(res)
    }
}

fn edges_csv(estimates: &[EdgeEstimate]) -> String {
    let mut out = String::from("from,to,cost,raw,flagged\n");
    for e in estimates {
        let raw = e.raw.map_or(String::new(), |r| r.to_string());
        let _ = writeln!(out, "{},{},{},{raw},{}", e.from, e.to, e.cost, e.flagged);
    }
    out
}

fn path_csv(r: &MamResult) -> String {
    let d = r.path.points.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for k in 1..=d {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    for (t, x) in r.path.times.iter().zip(&r.path.points) {
        let _ = write!(out, "{t}");
        for v in x {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
