//! On-disk workspace:
//!
//! ```text
//! datasets/<name>/{genotypes.tsv,panel.tsv}
//! runs/<id>/{report.json,shared.tsv,noise-model.json,timings.json}
//! decisions.jsonl
//! ```
//!
//! Run and dataset directories are written under `.staging/` and renamed
//! into place, so `runs/<id>` is either absent or complete.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{io_err, run_pipeline_on, PipelineError, RunConfig, RunOutput, RunReport};
use crate::ingest;

/// Environment variable naming the default workspace root.
pub const WORKSPACE_ENV: &str = "GENOSHARE_WORKSPACE";

const GENOTYPES_FILE: &str = "genotypes.tsv";
const PANEL_FILE: &str = "panel.tsv";
const REPORT_FILE: &str = "report.json";
const SHARED_FILE: &str = "shared.tsv";
const NOISE_MODEL_FILE: &str = "noise-model.json";
const TIMINGS_FILE: &str = "timings.json";
const DECISIONS_FILE: &str = "decisions.jsonl";
const STAGING_DIR: &str = ".staging";

static STAGING_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub samples: usize,
    pub snps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Share,
    Hold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub run_id: String,
    pub decision: Decision,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEntry {
    pub seq: u64,
    pub run_id: String,
    pub decision: Decision,
    pub rationale: String,
    /// Seconds since the Unix epoch.
    pub recorded_at: u64,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    /// Opens (creating if needed) a workspace rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        for dir in [root.join("datasets"), root.join("runs"), root.join(STAGING_DIR)] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(Self { root })
    }

    /// Opens an existing workspace without creating anything.
    pub fn existing(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(PipelineError::NotFound(format!("workspace {}", root.display())));
        }
        Self::open(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(id)
    }

    pub fn dataset_dir(&self, name: &str) -> PathBuf {
        self.root.join("datasets").join(name)
    }

    /// Paths of a stored dataset's genotype and panel files.
    pub fn dataset_paths(&self, name: &str) -> Result<(PathBuf, PathBuf), PipelineError> {
        validate_name(name)?;
        let dir = self.dataset_dir(name);
        let paths = (dir.join(GENOTYPES_FILE), dir.join(PANEL_FILE));
        if !paths.0.is_file() || !paths.1.is_file() {
            return Err(PipelineError::NotFound(format!("dataset {name}")));
        }
        Ok(paths)
    }

    /// Stores a new dataset after checking both files parse. Existing
    /// datasets are never replaced.
    pub fn add_dataset(&self, name: &str, genotypes: &str, panel: &str) -> Result<DatasetInfo, PipelineError> {
        validate_name(name)?;
        let ds = ingest::parse_genotype_matrix(genotypes)
            .map_err(|e| PipelineError::Config(format!("genotypes: {e}")))?;
        ingest::parse_reference_panel(panel).map_err(|e| PipelineError::Config(format!("panel: {e}")))?;
        let target = self.dataset_dir(name);
        if target.exists() {
            return Err(PipelineError::Conflict(format!("dataset {name} already exists")));
        }
        let staging = self.staging_dir(name);
        let write = || -> Result<(), PipelineError> {
            fs::create_dir_all(&staging).map_err(io_err(&staging))?;
            write_file(&staging.join(GENOTYPES_FILE), genotypes.as_bytes())?;
            write_file(&staging.join(PANEL_FILE), panel.as_bytes())?;
            fs::rename(&staging, &target).map_err(io_err(&target))
        };
        if let Err(e) = write() {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
        Ok(DatasetInfo { name: name.to_owned(), samples: ds.n(), snps: ds.m() })
    }

    pub fn list_datasets(&self) -> Result<Vec<DatasetInfo>, PipelineError> {
        let dir = self.root.join("datasets");
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with('.') {
                continue;
            }
            let Ok((genotypes, _)) = self.dataset_paths(&name) else {
                continue;
            };
            let text = fs::read_to_string(&genotypes).map_err(io_err(&genotypes))?;
            let mut lines = text.lines();
            let samples = lines.next().map_or(0, |h| h.split('\t').count().saturating_sub(1));
            out.push(DatasetInfo { name, samples, snps: lines.count() });
        }
        out.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(out)
    }

    /// Runs `cfg`, or returns the stored report if this exact run exists.
    pub fn run(&self, cfg: &RunConfig) -> Result<RunReport, PipelineError> {
        self.run_with_threads(cfg, None)
    }

    /// Like [`Workspace::run`] with an explicit worker count for the
    /// parallel stages. Output bytes do not depend on it.
    pub fn run_with_threads(&self, cfg: &RunConfig, threads: Option<usize>) -> Result<RunReport, PipelineError> {
        let dataset_bytes = fs::read(&cfg.dataset).map_err(io_err(&cfg.dataset))?;
        let panel_bytes = fs::read(&cfg.panel).map_err(io_err(&cfg.panel))?;
        cfg.validate()?;
        let id = cfg.run_id(&dataset_bytes, &panel_bytes);
        if let Some(report) = self.load_report(&id)? {
            return Ok(report);
        }
        let output = match threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| PipelineError::Config(e.to_string()))?;
                pool.install(|| run_pipeline_on(cfg, &dataset_bytes, &panel_bytes))?
            }
            None => run_pipeline_on(cfg, &dataset_bytes, &panel_bytes)?,
        };
        self.persist(&output)?;
        Ok(output.report)
    }

    /// Writes a run directory atomically. If the directory already exists
    /// (another writer finished first) the staged copy is discarded.
    pub fn persist(&self, output: &RunOutput) -> Result<PathBuf, PipelineError> {
        let id = &output.report.id;
        let target = self.run_dir(id);
        let staging = self.staging_dir(id);
        let write = || -> Result<(), PipelineError> {
            fs::create_dir_all(&staging).map_err(io_err(&staging))?;
            let mut report = output.report.clone();
            let timings = report.timings_ms.take();
            write_file(&staging.join(REPORT_FILE), &to_json(&report))?;
            write_file(&staging.join(SHARED_FILE), ingest::serialize_genotype_matrix(&output.shared).as_bytes())?;
            write_file(&staging.join(NOISE_MODEL_FILE), &to_json(&output.noise_model))?;
            if let Some(t) = timings {
                write_file(&staging.join(TIMINGS_FILE), &to_json(&t))?;
            }
            Ok(())
        };
        let result = write().and_then(|()| {
            if target.exists() {
                return Ok(());
            }
            fs::rename(&staging, &target).map_err(io_err(&target))
        });
        if staging.exists() {
            let _ = fs::remove_dir_all(&staging);
        }
        result.map(|()| target)
    }

    /// Stored report for `id` with its timings merged back in, if the run
    /// exists.
    pub fn load_report(&self, id: &str) -> Result<Option<RunReport>, PipelineError> {
        validate_name(id)?;
        let dir = self.run_dir(id);
        let path = dir.join(REPORT_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let mut report: RunReport = serde_json::from_slice(&bytes)
            .map_err(|e| PipelineError::Stage { stage: "load", message: e.to_string() })?;
        if let Ok(t) = fs::read(dir.join(TIMINGS_FILE)) {
            report.timings_ms = serde_json::from_slice(&t).ok();
        }
        Ok(Some(report))
    }

    pub fn list_runs(&self) -> Result<Vec<String>, PipelineError> {
        let dir = self.root.join("runs");
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') && entry.path().join(REPORT_FILE).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Removes staging directories left behind by interrupted writers.
    /// Only safe while no other process is writing to the workspace.
    pub fn sweep_staging(&self) -> Result<usize, PipelineError> {
        let dir = self.root.join(STAGING_DIR);
        let mut removed = 0;
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            fs::remove_dir_all(entry.path()).map_err(io_err(entry.path()))?;
            removed += 1;
        }
        Ok(removed)
    }

    /// Appends a steward decision. The run must exist and the rationale must
    /// not be blank.
    pub fn record_decision(&self, request: &DecisionRequest) -> Result<DecisionEntry, PipelineError> {
        if request.rationale.trim().is_empty() {
            return Err(PipelineError::Config("a decision needs a rationale".into()));
        }
        if self.load_report(&request.run_id)?.is_none() {
            return Err(PipelineError::NotFound(format!("completed run {}", request.run_id)));
        }
        let seq = self.list_decisions()?.first().map_or(1, |d| d.seq + 1);
        let entry = DecisionEntry {
            seq,
            run_id: request.run_id.clone(),
            decision: request.decision,
            rationale: request.rationale.clone(),
            recorded_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        let path = self.root.join(DECISIONS_FILE);
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        let mut line = serde_json::to_vec(&entry).expect("plain data serializes");
        line.push(b'\n');
        file.write_all(&line).map_err(io_err(&path))?;
        Ok(entry)
    }

    /// Every recorded decision, newest first.
    pub fn list_decisions(&self) -> Result<Vec<DecisionEntry>, PipelineError> {
        let path = self.root.join(DECISIONS_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let mut entries: Vec<DecisionEntry> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()
            .map_err(|e| PipelineError::Stage { stage: "decisions", message: e.to_string() })?;
        entries.reverse();
        Ok(entries)
    }

    fn staging_dir(&self, name: &str) -> PathBuf {
        let n = STAGING_COUNTER.fetch_add(1, Ordering::Relaxed);
        self.root.join(STAGING_DIR).join(format!("{name}-{}-{n}", std::process::id()))
    }
}

fn validate_name(name: &str) -> Result<(), PipelineError> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(PipelineError::Config(format!("invalid name {name:?}")))
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("plain data serializes");
    bytes.push(b'\n');
    bytes
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    fs::write(path, bytes).map_err(io_err(path))
}
