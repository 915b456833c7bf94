//! Command-line and HTTP front ends over a [`genoshare::Workspace`].

pub mod server;

use genoshare::mechanism::{NoiseMode, QBounds, Semantics, DEFAULT_ALPHA};
use genoshare::pipeline::{PipelineError, RunConfig, Workspace};
use genoshare::postprocess::DEFAULT_LAMBDA;
use serde::{Deserialize, Serialize};

fn default_semantics() -> Semantics {
    Semantics::PerBit
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_trials() -> usize {
    200
}

/// Run settings for a dataset stored in the workspace. The CLI and the HTTP
/// API both build their [`RunConfig`] through [`RunParams::config`], so the
/// same settings give the same run id from either side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    pub epsilon: f64,
    #[serde(default = "default_semantics")]
    pub semantics: Semantics,
    #[serde(default)]
    pub mode: NoiseMode,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub q_bounds: QBounds,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub attack_trials: usize,
}

impl RunParams {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            semantics: default_semantics(),
            mode: NoiseMode::default(),
            alpha: DEFAULT_ALPHA,
            lambda: DEFAULT_LAMBDA,
            q_bounds: QBounds::default(),
            seed: 0,
            attack_trials: default_trials(),
        }
    }

    /// Config for the workspace dataset `name`.
    pub fn config(&self, workspace: &Workspace, name: &str) -> Result<RunConfig, PipelineError> {
        let (dataset, panel) = workspace.dataset_paths(name)?;
        Ok(self.config_for_paths(dataset, panel))
    }

    pub fn config_for_paths(&self, dataset: std::path::PathBuf, panel: std::path::PathBuf) -> RunConfig {
        RunConfig {
            dataset,
            panel,
            epsilon: self.epsilon,
            semantics: self.semantics,
            mode: self.mode,
            alpha: self.alpha,
            lambda: self.lambda,
            q_bounds: self.q_bounds,
            seed: self.seed,
            attack_trials: self.attack_trials,
        }
    }
}

/// Parses `"0.5,1,2"` into a list of ε values.
pub fn parse_epsilons(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad epsilon {t:?}: {e}")))
        .collect()
}
