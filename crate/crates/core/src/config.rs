//! Experiment manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::landscape::Monomial;
use crate::ldp::{MamConfig, NoiseParams};
use crate::stats::{Estimand, VerdictPolicy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid manifest: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub objective: ObjectiveSection,
    pub noise: NoiseParams,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default)]
    pub mam: MamConfig,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    /// A registered objective, or `polynomial` together with `terms`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<Monomial>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_hi: Option<Vec<f64>>,
    #[serde(default = "default_grid_density")]
    pub grid_density: usize,
}

fn default_grid_density() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    /// Edge-cost model name.
    pub cost_model: String,
    /// Target node ids; the global minimizers when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<usize>>,
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection {
            cost_model: "closed_form".into(),
            targets: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub etas: Vec<f64>,
    pub runs_per_eta: usize,
    pub epsilon: f64,
    /// Explicit start point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Start at a critical point, shifted by `start_offset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_node: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_offset: Option<Vec<f64>>,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    pub master_seed: u64,
}

fn default_max_steps() -> u64 {
    10_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub estimand: Estimand,
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub min_r_squared: f64,
    pub min_theory_r_squared: f64,
    /// Replaces the slope derived from the energy pipeline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory_slope: Option<f64>,
}

impl Default for ReportSection {
    fn default() -> Self {
        let p = VerdictPolicy::default();
        ReportSection {
            estimand: Estimand::Mean,
            rel_tol: p.rel_tol,
            abs_floor: p.abs_floor,
            min_r_squared: p.min_r_squared,
            min_theory_r_squared: p.min_theory_r_squared,
            theory_slope: None,
        }
    }
}

impl ReportSection {
    pub fn policy(&self) -> VerdictPolicy {
        VerdictPolicy {
            rel_tol: self.rel_tol,
            abs_floor: self.abs_floor,
            min_r_squared: self.min_r_squared,
            min_theory_r_squared: self.min_theory_r_squared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let m: Manifest = toml::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let o = &self.objective;
        if o.name == "polynomial" {
            if o.terms.is_none() || o.domain_lo.is_none() || o.domain_hi.is_none() {
                return bad("a polynomial objective needs terms, domain_lo and domain_hi".into());
            }
        } else if o.terms.is_some() || o.domain_lo.is_some() || o.domain_hi.is_some() {
            return bad(format!(
                "'terms' and the domain only apply to name = \"polynomial\", not '{}'",
                o.name
            ));
        }
        if o.grid_density < 2 {
            return bad("grid_density must be at least 2".into());
        }
        if let Some(e) = &self.experiment {
            if e.etas.is_empty() || e.etas.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return bad("etas must be positive".into());
            }
            for (k, a) in e.etas.iter().enumerate() {
                if e.etas[..k].contains(a) {
                    return bad(format!("eta {a} listed twice"));
                }
            }
            if e.runs_per_eta < 1 {
                return bad("runs_per_eta must be at least 1".into());
            }
            if !(e.epsilon > 0.0) {
                return bad("epsilon must be positive".into());
            }
            if e.max_steps < 1 {
                return bad("max_steps must be at least 1".into());
            }
            match (&e.x0, e.start_node) {
                (Some(_), Some(_)) => return bad("give either x0 or start_node, not both".into()),
                (None, None) => return bad("experiment needs x0 or start_node".into()),
                (Some(_), None) if e.start_offset.is_some() => {
                    return bad("start_offset requires start_node".into())
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical manifest with the output directory blanked,
    /// so relocating outputs leaves the hash alone.
    pub fn hash(&self) -> String {
        let mut m = self.clone();
        m.output.dir = PathBuf::new();
        hex::encode(Sha256::digest(m.to_toml().as_bytes()))
    }

    pub fn experiment(&self) -> Result<&ExperimentSection, ConfigError> {
        self.experiment
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("missing [experiment] section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAMEL: &str = r#"
[objective]
name = "three_hump_camel_variant"

[noise]
kind = "isotropic_gaussian"
sigma = 50.0

[experiment]
etas = [0.0009, 0.0008]
runs_per_eta = 10
epsilon = 0.01
start_node = 2
start_offset = [0.05, 0.05]
master_seed = 7

[report]
rel_tol = 0.2
min_r_squared = 0.9

[output]
dir = "out/camel"
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let m = Manifest::from_toml(CAMEL).unwrap();
        assert_eq!(m.objective.grid_density, 20);
        assert_eq!(m.graph.cost_model, "closed_form");
        let e = m.experiment().unwrap();
        assert_eq!(e.max_steps, 10_000_000);
        assert_eq!(m.report.policy().min_theory_r_squared, 0.85);
        assert_eq!(m.mam, MamConfig::default());
    }

    #[test]
    fn roundtrip() {
        let m = Manifest::from_toml(CAMEL).unwrap();
        let again = Manifest::from_toml(&m.to_toml()).unwrap();
        assert_eq!(m, again);
        assert_eq!(m.hash(), again.hash());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let m = Manifest::from_toml(CAMEL).unwrap();
        let mut moved = m.clone();
        moved.output.dir = "elsewhere".into();
        assert_eq!(m.hash(), moved.hash());
        let mut reseeded = m.clone();
        reseeded.experiment.as_mut().unwrap().master_seed = 8;
        assert_ne!(m.hash(), reseeded.hash());
        assert_eq!(m.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_manifests() {
        let swap = |from: &str, to: &str| Manifest::from_toml(&CAMEL.replace(from, to));
        assert!(swap("etas = [0.0009, 0.0008]", "etas = [0.0009, 0.0009]").is_err());
        assert!(swap("etas = [0.0009, 0.0008]", "etas = [-0.1]").is_err());
        assert!(swap("runs_per_eta = 10", "runs_per_eta = 0").is_err());
        assert!(swap("start_node = 2", "x0 = [0.0, 0.0]").is_err());
        assert!(swap("sigma = 50.0", "sigma = 50.0\nbogus = 1").is_err());
        assert!(swap("name = \"three_hump_camel_variant\"", "name = \"polynomial\"").is_err());
        let boxed = "name = \"three_hump_camel_variant\"\ndomain_lo = [-1.0, -1.0]";
        assert!(swap("name = \"three_hump_camel_variant\"", boxed).is_err());
    }

    #[test]
    fn inline_polynomial() {
        let text = r#"
[objective]
name = "polynomial"
terms = [{ exponents = [2], coeff = 0.5 }]
domain_lo = [-1.0]
domain_hi = [1.0]

[noise]
kind = "isotropic_gaussian"
variance = 1.0
"#;
        let m = Manifest::from_toml(text).unwrap();
        assert_eq!(m.objective.terms.as_ref().unwrap()[0].coeff, 0.5);
        assert!(m.experiment.is_none());
        assert_eq!(Manifest::from_toml(&m.to_toml()).unwrap(), m);
    }
}
