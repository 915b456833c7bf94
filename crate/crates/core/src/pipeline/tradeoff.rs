use serde::{Deserialize, Serialize};

use super::{PipelineError, RunConfig, Workspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub epsilon: f64,
    pub run_id: Option<String>,
    pub avg_point_error: Option<f64>,
    pub mean_error: Option<f64>,
    pub attack_auc: Option<f64>,
    /// Set when this point's run failed; the other points are unaffected.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
}

/// One run per ε with everything else (including the seed) taken from
/// `base`. Runs already in the workspace are served from disk.
pub fn tradeoff_curve(
    workspace: &Workspace,
    base: &RunConfig,
    epsilons: &[f64],
) -> Result<TradeoffCurve, PipelineError> {
    if epsilons.is_empty() {
        return Err(PipelineError::Config("no epsilons given".into()));
    }
    if let Some(bad) = epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(PipelineError::Config(format!("invalid epsilon {bad}")));
    }
    if epsilons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PipelineError::Config("epsilons must be strictly increasing".into()));
    }
    let points = epsilons
        .iter()
        .map(|&epsilon| {
            let cfg = RunConfig { epsilon, ..base.clone() };
            match workspace.run(&cfg) {
                Ok(report) => TradeoffPoint {
                    epsilon,
                    run_id: Some(report.id),
                    avg_point_error: Some(report.utility.avg_point_error),
                    mean_error: Some(report.utility.mean_error),
                    attack_auc: Some(report.attack.auc),
                    error: None,
                },
                Err(e) => TradeoffPoint {
                    epsilon,
                    run_id: None,
                    avg_point_error: None,
                    mean_error: None,
                    attack_auc: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(TradeoffCurve { points })
}
