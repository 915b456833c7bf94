use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use genoshare::ingest::{self, GenotypeDataset, ReferencePanel};
use genoshare::mechanism::{self, NoiseMode, NoiseModel, NoiseModelDocument, PrivacyBudget, QBounds, Semantics};
use genoshare::pipeline::{self, tradeoff_curve, Workspace, WORKSPACE_ENV};
use genoshare::{metrics, postprocess, synth};
use genoshare_cli::server::{self, AppState};
use genoshare_cli::RunParams;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "genoshare", version, about = "Differentially private sharing of SNP genotype matrices")]
struct Cli {
    /// Workspace root for stored datasets, runs and decisions.
    #[arg(long, global = true, env = WORKSPACE_ENV, default_value = "genoshare-workspace")]
    workspace: PathBuf,

    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Genotype TSV -> two-bit binary TSV.
    Encode {
        #[arg(long)]
        input: PathBuf,
        /// Align to this panel and impute missing calls first.
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// XOR a binary TSV with calibrated noise.
    Perturb {
        #[arg(long)]
        input: PathBuf,
        /// Needed for chain noise, which is planned from panel frequencies.
        #[arg(long)]
        panel: Option<PathBuf>,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Where to write the noise model JSON.
        #[arg(long)]
        noise_model: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Restore a perturbed binary TSV toward panel frequencies and decode it.
    Restore {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        noise_model: PathBuf,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, default_value_t = postprocess::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Utility metrics of a shared matrix against the original.
    Evaluate {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        shared: PathBuf,
        /// Aligns and imputes the original as the pipeline does.
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = SemanticsArg::PerBit)]
        semantics: SemanticsArg,
    },
    /// Homer membership attack: original rows against panel-drawn outsiders.
    Attack {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        shared: PathBuf,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only echoed into the report.
        #[arg(long)]
        epsilon: f64,
    },
    /// Full pipeline, persisted in the workspace.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// One run per epsilon.
    Tradeoff {
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long, value_enum, default_value_t = SemanticsArg::PerBit)]
        semantics: SemanticsArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Independent)]
        mode: ModeArg,
        #[arg(long, default_value_t = mechanism::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Exhaustively check a noise model's privacy bound on short records.
    VerifyDp {
        #[arg(long)]
        bits: usize,
        /// Flip probability; otherwise calibrated from --epsilon.
        #[arg(long, conflicts_with = "epsilon")]
        p: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum, default_value_t = SemanticsArg::PerRecord)]
        semantics: SemanticsArg,
        /// Comma-separated chain stay probabilities (bits - 1 of them);
        /// selects chain noise.
        #[arg(long, value_delimiter = ',')]
        stay_probs: Option<Vec<f64>>,
    },
    /// Store a dataset in the workspace.
    Import {
        #[arg(long)]
        name: String,
        #[arg(long)]
        genotypes: PathBuf,
        #[arg(long)]
        panel: PathBuf,
    },
    /// Synthetic panel and Hardy-Weinberg cohort.
    Simulate {
        #[arg(long)]
        snps: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0.01)]
        min_maf: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Local HTTP API over the workspace.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Concurrent pipeline runs.
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Dataset stored in the workspace.
    #[arg(long, conflicts_with_all = ["dataset", "panel"], required_unless_present = "dataset")]
    name: Option<String>,
    /// Genotype TSV path.
    #[arg(long, requires = "panel")]
    dataset: Option<PathBuf>,
    /// Reference panel TSV path.
    #[arg(long, requires = "dataset")]
    panel: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = SemanticsArg::PerBit)]
    semantics: SemanticsArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Independent)]
    mode: ModeArg,
    #[arg(long, default_value_t = mechanism::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    q_min: f64,
    #[arg(long, default_value_t = 0.99)]
    q_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = postprocess::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 200)]
    attack_trials: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsArg {
    PerRecord,
    PerBit,
}

impl From<SemanticsArg> for Semantics {
    fn from(s: SemanticsArg) -> Self {
        match s {
            SemanticsArg::PerRecord => Semantics::PerRecord,
            SemanticsArg::PerBit => Semantics::PerBit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Independent,
    Markov,
}

impl From<ModeArg> for NoiseMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Independent => NoiseMode::Independent,
            ModeArg::Markov => NoiseMode::Markov,
        }
    }
}

impl NoiseArgs {
    fn params(&self, run: &RunArgs) -> RunParams {
        RunParams {
            epsilon: self.epsilon,
            semantics: self.semantics.into(),
            mode: self.mode.into(),
            alpha: self.alpha,
            lambda: run.lambda,
            q_bounds: QBounds { min: self.q_min, max: self.q_max },
            seed: self.seed,
            attack_trials: run.attack_trials,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Encode { input, panel, output } => {
            let mut ds = read_genotypes(&input)?;
            if let Some(panel) = panel {
                ds = align_and_impute(&ds, &read_panel(&panel)?)?;
            }
            let bm = ingest::encode_binary(&ds)?;
            write_output(output.as_deref(), &ingest::serialize_binary_matrix(&bm))?;
        }
        Command::Perturb { input, panel, noise, noise_model, output } => {
            let x = ingest::parse_binary_matrix(&read(&input)?).context("parsing binary matrix")?;
            let panel = panel.as_deref().map(read_panel).transpose()?;
            let cfg = noise
                .params(&RunArgs { lambda: postprocess::DEFAULT_LAMBDA, attack_trials: 200 })
                .config_for_paths(input.clone(), PathBuf::new());
            let model = pipeline::calibrate(&cfg, panel.as_ref(), x.rsids(), x.bit_columns())?;
            let seed = pipeline::noise_seed(cfg.seed);
            let z = mechanism::sample_noise(&model, x.rows(), x.bit_columns(), seed)?;
            let y = mechanism::xor_apply(&x, &z)?;
            write_output(Some(&noise_model), &json(&NoiseModelDocument { model, seed })?)?;
            write_output(output.as_deref(), &ingest::serialize_binary_matrix(&y))?;
        }
        Command::Restore { input, noise_model, panel, lambda, output } => {
            let y = ingest::parse_binary_matrix(&read(&input)?).context("parsing binary matrix")?;
            let doc: NoiseModelDocument =
                serde_json::from_str(&read(&noise_model)?).context("parsing noise model")?;
            let restored = postprocess::restore(&y, &doc.model, &read_panel(&panel)?, lambda)?;
            let shared = ingest::decode_binary(&restored.matrix);
            write_output(output.as_deref(), &ingest::serialize_genotype_matrix(&shared))?;
        }
        Command::Evaluate { original, shared, panel, epsilon, semantics } => {
            let mut g = read_genotypes(&original)?;
            if let Some(panel) = panel {
                g = align_and_impute(&g, &read_panel(&panel)?)?;
            }
            let report = metrics::utility_report(&g, &read_genotypes(&shared)?, epsilon, semantics.into())?;
            print_json(&report)?;
        }
        Command::Attack { original, shared, panel, trials, seed, epsilon } => {
            let panel = read_panel(&panel)?;
            let g = align_and_impute(&read_genotypes(&original)?, &panel)?;
            let report = pipeline::membership_attack(&panel, &g, &read_genotypes(&shared)?, trials, seed, epsilon)?;
            print_json(&report)?;
        }
        Command::Run { input, noise, run } => {
            let ws = Workspace::open(&cli.workspace)?;
            let cfg = input.config(&ws, &noise.params(&run))?;
            print_json(&ws.run(&cfg)?)?;
        }
        Command::Tradeoff { input, epsilons, semantics, mode, alpha, seed, run } => {
            let ws = Workspace::open(&cli.workspace)?;
            let noise = NoiseArgs { epsilon: 1.0, semantics, mode, alpha, q_min: 0.5, q_max: 0.99, seed };
            let cfg = input.config(&ws, &noise.params(&run))?;
            print_json(&tradeoff_curve(&ws, &cfg, &epsilons)?)?;
        }
        Command::VerifyDp { bits, p, epsilon, semantics, stay_probs } => {
            let model = match (stay_probs, p, epsilon) {
                (Some(qs), Some(p), _) => NoiseModel::markov(p, qs)?,
                (Some(_), None, _) => bail!("chain noise needs an explicit --p"),
                (None, Some(p), _) => NoiseModel::independent(p, semantics.into(), bits)?,
                (None, None, Some(eps)) => {
                    mechanism::calibrate_independent(&PrivacyBudget::new(eps, semantics.into())?, bits)?
                }
                (None, None, None) => bail!("give --p or --epsilon"),
            };
            let report = mechanism::verify_dp_bruteforce(&model, bits)?;
            print_json(&report)?;
            if !report.passes {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Import { name, genotypes, panel } => {
            let ws = Workspace::open(&cli.workspace)?;
            print_json(&ws.add_dataset(&name, &read(&genotypes)?, &read(&panel)?)?)?;
        }
        Command::Simulate { snps, samples, min_maf, seed, out_dir } => {
            let panel = synth::synthetic_panel(snps, min_maf, seed);
            let ds = synth::panel_population(&panel, samples, seed.wrapping_add(1), "sample");
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            write_output(Some(&out_dir.join("genotypes.tsv")), &ingest::serialize_genotype_matrix(&ds))?;
            write_output(Some(&out_dir.join("panel.tsv")), &ingest::serialize_reference_panel(&panel))?;
        }
        Command::Serve { host, port, workers } => {
            let ws = Workspace::open(&cli.workspace)?;
            let addr = format!("{host}:{port}");
            tokio::runtime::Runtime::new()?
                .block_on(server::serve(AppState::new(ws, workers), &addr))
                .with_context(|| format!("serving on {addr}"))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

impl InputArgs {
    fn config(&self, ws: &Workspace, params: &RunParams) -> Result<pipeline::RunConfig> {
        match (&self.name, &self.dataset, &self.panel) {
            (Some(name), _, _) => Ok(params.config(ws, name)?),
            (None, Some(dataset), Some(panel)) => Ok(params.config_for_paths(dataset.clone(), panel.clone())),
            _ => bail!("give --name or both --dataset and --panel"),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_genotypes(path: &Path) -> Result<GenotypeDataset> {
    ingest::parse_genotype_matrix(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn read_panel(path: &Path) -> Result<ReferencePanel> {
    ingest::parse_reference_panel(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn align_and_impute(ds: &GenotypeDataset, panel: &ReferencePanel) -> Result<GenotypeDataset> {
    let (aligned, report) = ingest::align_to_reference(ds, panel)?;
    if !report.dropped.is_empty() {
        eprintln!("dropped {} SNPs absent from the panel", report.dropped.len());
    }
    Ok(ingest::impute_missing(&aligned, panel)?)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    print!("{}", json(value)?);
    Ok(())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
