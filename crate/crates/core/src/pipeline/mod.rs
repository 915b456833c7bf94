//! End-to-end runs: ingest, perturb, restore, evaluate, attack, report.

mod tradeoff;
mod workspace;

pub use tradeoff::{tradeoff_curve, TradeoffCurve, TradeoffPoint};
pub use workspace::{
    Decision, DecisionEntry, DecisionRequest, DatasetInfo, Workspace, WORKSPACE_ENV,
};

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::attack::{self, AttackReport, DEFAULT_SMOOTHING};
use crate::ingest::{self, GenotypeDataset, ReferencePanel};
use crate::mechanism::{
    self, NoiseMode, NoiseModel, NoiseModelDocument, PrivacyBudget, QBounds, Semantics, DEFAULT_ALPHA,
};
use crate::metrics::{self, UtilityReport};
use crate::postprocess::{self, RestoreSummary, DEFAULT_LAMBDA};
use crate::synth;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rows in the synthetic public matrix used to plan chain noise.
const PUBLIC_SAMPLE_ROWS: usize = 256;

const DOMAIN_NOISE: u64 = 1;
const DOMAIN_NONMEMBERS: u64 = 2;
const DOMAIN_PUBLIC: u64 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage} failed: {message}")]
    Stage { stage: &'static str, message: String },

    #[error("workspace I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),
}

impl PipelineError {
    fn stage(stage: &'static str) -> impl FnOnce(String) -> PipelineError {
        move |message| PipelineError::Stage { stage, message }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> PipelineError {
    let path = path.into();
    move |source| PipelineError::Io { path, source }
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

/// Everything that determines a run's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Genotype matrix TSV.
    pub dataset: PathBuf,
    /// Reference panel TSV.
    pub panel: PathBuf,
    pub epsilon: f64,
    pub semantics: Semantics,
    pub mode: NoiseMode,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub q_bounds: QBounds,
    pub seed: u64,
    /// Synthetic non-member targets for the membership attack.
    #[serde(default = "default_trials")]
    pub attack_trials: usize,
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>, panel: impl Into<PathBuf>, epsilon: f64, seed: u64) -> Self {
        Self {
            dataset: dataset.into(),
            panel: panel.into(),
            epsilon,
            semantics: Semantics::PerBit,
            mode: NoiseMode::Independent,
            alpha: DEFAULT_ALPHA,
            lambda: DEFAULT_LAMBDA,
            q_bounds: QBounds::default(),
            seed,
            attack_trials: default_trials(),
        }
    }

    pub fn validate(&self) -> Result<PrivacyBudget, PipelineError> {
        let budget = PrivacyBudget::new(self.epsilon, self.semantics)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PipelineError::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(PipelineError::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        QBounds::new(self.q_bounds.min, self.q_bounds.max).map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.mode == NoiseMode::Markov && self.semantics != Semantics::PerRecord {
            return Err(PipelineError::Config("MARKOV noise requires PER_RECORD semantics".into()));
        }
        if self.attack_trials < 2 {
            return Err(PipelineError::Config("attack_trials must be at least 2".into()));
        }
        Ok(budget)
    }

    /// Hex SHA-256 of the canonical config, with input files identified by
    /// content digest rather than path.
    pub fn run_id(&self, dataset_bytes: &[u8], panel_bytes: &[u8]) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            dataset_sha256: String,
            panel_sha256: String,
            epsilon: f64,
            semantics: Semantics,
            mode: NoiseMode,
            alpha: f64,
            lambda: f64,
            q_bounds: &'a QBounds,
            seed: u64,
            attack_trials: usize,
        }
        let canonical = Canonical {
            dataset_sha256: sha256_hex(dataset_bytes),
            panel_sha256: sha256_hex(panel_bytes),
            epsilon: self.epsilon,
            semantics: self.semantics,
            mode: self.mode,
            alpha: self.alpha,
            lambda: self.lambda,
            q_bounds: &self.q_bounds,
            seed: self.seed,
            attack_trials: self.attack_trials,
        };
        sha256_hex(&serde_json::to_vec(&canonical).expect("plain data serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub id: String,
    pub config: RunConfig,
    pub epsilon_upper: f64,
    pub flip_probability: f64,
    pub bits_per_record: usize,
    pub dropped_snps: usize,
    pub utility: UtilityReport,
    pub attack: AttackReport,
    pub restore: RestoreSummary,
    /// Wall-clock milliseconds per stage. Kept out of `report.json` so the
    /// persisted report is a pure function of the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
    pub version: String,
}

/// In-memory result of a run, before persistence.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub shared: GenotypeDataset,
    pub noise_model: NoiseModelDocument,
}

struct Stopwatch {
    timings: BTreeMap<String, f64>,
    last: Instant,
}

impl Stopwatch {
    fn new() -> Self {
        Self { timings: BTreeMap::new(), last: Instant::now() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.insert(stage.to_owned(), (now - self.last).as_secs_f64() * 1e3);
        self.last = now;
    }
}

/// Reads the config's input files and runs every stage in memory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutput, PipelineError> {
    let dataset_bytes = std::fs::read(&cfg.dataset).map_err(io_err(&cfg.dataset))?;
    let panel_bytes = std::fs::read(&cfg.panel).map_err(io_err(&cfg.panel))?;
    run_pipeline_on(cfg, &dataset_bytes, &panel_bytes)
}

/// Runs every stage on already-loaded input bytes.
pub fn run_pipeline_on(
    cfg: &RunConfig,
    dataset_bytes: &[u8],
    panel_bytes: &[u8],
) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let id = cfg.run_id(dataset_bytes, panel_bytes);
    let mut clock = Stopwatch::new();

    let utf8 = |bytes: &[u8]| {
        std::str::from_utf8(bytes)
            .map(str::to_owned)
            .map_err(|e| PipelineError::Stage { stage: "ingest", message: e.to_string() })
    };
    let panel = ingest::parse_reference_panel(&utf8(panel_bytes)?)
        .map_err(|e| PipelineError::stage("ingest")(format!("panel: {e}")))?;
    let raw = ingest::parse_genotype_matrix(&utf8(dataset_bytes)?)
        .map_err(|e| PipelineError::stage("ingest")(format!("genotypes: {e}")))?;
    let (aligned, alignment) =
        ingest::align_to_reference(&raw, &panel).map_err(|e| PipelineError::stage("align")(e.to_string()))?;
    drop(raw);
    let original =
        ingest::impute_missing(&aligned, &panel).map_err(|e| PipelineError::stage("impute")(e.to_string()))?;
    drop(aligned);
    clock.lap("ingest");

    let encoded = ingest::encode_binary(&original).map_err(|e| PipelineError::stage("encode")(e.to_string()))?;
    let bits_per_record = encoded.bit_columns();
    clock.lap("encode");

    let model = calibrate(cfg, Some(&panel), original.rsids(), bits_per_record)?;
    clock.lap("calibrate");

    let noise_seed = noise_seed(cfg.seed);
    let noise = mechanism::sample_noise(&model, encoded.rows(), bits_per_record, noise_seed)
        .map_err(|e| PipelineError::stage("perturb")(e.to_string()))?;
    let perturbed =
        mechanism::xor_apply(&encoded, &noise).map_err(|e| PipelineError::stage("perturb")(e.to_string()))?;
    drop(noise);
    drop(encoded);
    clock.lap("perturb");

    let restored = postprocess::restore(&perturbed, &model, &panel, cfg.lambda)
        .map_err(|e| PipelineError::stage("restore")(e.to_string()))?;
    let restore_summary = restored.summary(cfg.lambda);
    clock.lap("restore");

    let shared = ingest::decode_binary(&restored.matrix);
    clock.lap("decode");

    let utility = metrics::utility_report(&original, &shared, cfg.epsilon, cfg.semantics)
        .map_err(|e| PipelineError::stage("metrics")(e.to_string()))?;
    clock.lap("metrics");

    let attack = membership_attack(&panel, &original, &shared, cfg.attack_trials, cfg.seed, cfg.epsilon)?;
    clock.lap("attack");

    let report = RunReport {
        id,
        config: cfg.clone(),
        epsilon_upper: model.epsilon_upper(),
        flip_probability: model.p(),
        bits_per_record,
        dropped_snps: alignment.dropped.len(),
        utility,
        attack,
        restore: restore_summary,
        timings_ms: Some(clock.timings),
        version: VERSION.to_owned(),
    };
    Ok(RunOutput { report, shared, noise_model: NoiseModelDocument { model, seed: noise_seed } })
}

/// Seed of the noise stream for a run seeded with `seed`.
pub fn noise_seed(seed: u64) -> u64 {
    mechanism::derive_seed(seed, DOMAIN_NOISE)
}

/// Calibrates the noise model for `cfg` on records of `bits_per_record`
/// bits over `rsids`. Chain noise is planned on a synthetic public sample
/// drawn from the panel, never on the target rows, and so needs `panel`.
pub fn calibrate(
    cfg: &RunConfig,
    panel: Option<&ReferencePanel>,
    rsids: &[String],
    bits_per_record: usize,
) -> Result<NoiseModel, PipelineError> {
    let budget = cfg.validate()?;
    let model = match cfg.mode {
        NoiseMode::Independent => mechanism::calibrate_independent(&budget, bits_per_record),
        NoiseMode::Markov => {
            let panel = panel.ok_or_else(|| PipelineError::Config("chain noise needs a reference panel".into()))?;
            let mafs = panel.mafs_for(rsids).map_err(|e| PipelineError::stage("calibrate")(e.to_string()))?;
            let public = synth::hwe_population(
                rsids,
                &mafs,
                PUBLIC_SAMPLE_ROWS,
                mechanism::derive_seed(cfg.seed, DOMAIN_PUBLIC),
                "public",
            );
            let public_bits =
                ingest::encode_binary(&public).map_err(|e| PipelineError::stage("calibrate")(e.to_string()))?;
            let plan = mechanism::build_correlation_blocks(public_bits.bits(), cfg.q_bounds);
            mechanism::calibrate_markov(&budget, &plan, bits_per_record, cfg.alpha)
        }
    }
    .map_err(|e| PipelineError::Config(e.to_string()))?;
    if model.p() >= 0.5 {
        return Err(PipelineError::Config(format!(
            "epsilon {} leaves no per-bit budget (flip probability 0.5)",
            cfg.epsilon
        )));
    }
    Ok(model)
}

/// Homer attack on `shared`: the rows of `original` are the members and
/// `trials` panel-drawn individuals the non-members.
pub fn membership_attack(
    panel: &ReferencePanel,
    original: &GenotypeDataset,
    shared: &GenotypeDataset,
    trials: usize,
    seed: u64,
    epsilon: f64,
) -> Result<AttackReport, PipelineError> {
    let fail = |e: String| PipelineError::Stage { stage: "attack", message: e };
    if original.rsids() != shared.rsids() {
        return Err(fail("original and shared matrices cover different SNPs".into()));
    }
    let reference = panel.mafs_for(original.rsids()).map_err(|e| fail(e.to_string()))?;
    let pool = attack::allele_frequencies(shared, DEFAULT_SMOOTHING).map_err(|e| fail(e.to_string()))?;
    let nonmembers = synth::hwe_population(
        original.rsids(),
        &reference,
        trials,
        mechanism::derive_seed(seed, DOMAIN_NONMEMBERS),
        "outsider",
    );
    attack::evaluate_attack(
        &pool,
        &reference,
        &attack::targets(original),
        &attack::targets(&nonmembers),
        epsilon,
    )
    .map_err(|e| fail(e.to_string()))
}
