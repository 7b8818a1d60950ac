//! TOML experiment files.
//!
//! ```toml
//! [experiment]
//! problem = "annulus-neumann"   # circle | ellipse | annulus-neumann | annulus-dirichlet | semi-torus
//! method = "gpdm"               # dm | gpdm | vcdm
//! sizes = [540, 1024, 2070]     # counts, or [I, J] grids for the annulus
//! trials = 1
//! seed = 0
//!
//! [epsilon]
//! mode = "schedule"             # fixed (value) | tuned | schedule (rho, reference?, n_ref?)
//! rho = 1.0
//!
//! [settings]                    # every key optional
//! k = 200
//! dt = 1e-4
//! t_end = 0.005
//!
//! [output]
//! dir = "out/annulus"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::harness::{EpsilonSpec, ExperimentSpec, Method, RunSettings};
use crate::problems::{Problem, Size};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub problem: Problem,
    pub method: Method,
    pub sizes: Vec<Size>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn tuned() -> EpsilonSpec {
    EpsilonSpec::Tuned
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default = "tuned")]
    pub epsilon: EpsilonSpec,
    #[serde(default)]
    pub settings: RunSettings,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.sizes.is_empty() {
            return Err(HarnessError::Config("experiment.sizes is empty".into()));
        }
        if e.trials == 0 {
            return Err(HarnessError::Config("experiment.trials must be at least 1".into()));
        }
        if e.problem == Problem::SineBurgers {
            return Err(HarnessError::Config("sine-burgers is run by the burgers subcommand".into()));
        }
        let s = &self.settings;
        if !(s.dt > 0.0) || !(s.t_end >= s.dt) || s.k == 0 {
            return Err(HarnessError::Config("settings need dt > 0, t_end >= dt and k >= 1".into()));
        }
        match self.epsilon {
            EpsilonSpec::Fixed { value } if !(value > 0.0) => Err(HarnessError::Config("epsilon.value must be positive".into())),
            EpsilonSpec::Schedule { rho, reference, .. } if !rho.is_finite() || reference.is_some_and(|r| !(r > 0.0)) => {
                Err(HarnessError::Config("epsilon schedule needs finite rho and positive reference".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            problem: self.experiment.problem,
            method: self.experiment.method,
            sizes: self.experiment.sizes.clone(),
            trials: self.experiment.trials,
            seed: self.experiment.seed,
            epsilon: self.epsilon.clone(),
            settings: self.settings.clone(),
        }
    }
}
