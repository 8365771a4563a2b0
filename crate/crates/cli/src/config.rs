use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use softrank_core::ablation::AblationSettings;
use softrank_core::{ForwardProcess, Parametrization, Reference, TaskKind, Variant};

/// Settings shared by every subcommand. Each can also come from `--config`.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Task: `sorting` or `tsp`
    #[arg(long, global = true)]
    pub task: Option<String>,
    /// Items per instance
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Denoiser: `oracle`, `tabular`, `mlp` or `pointer`
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Bridge noise scale, must be positive
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Number of reverse steps K on the uniform time grid
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Bridge endpoint distribution: `uniform` or `grid`
    #[arg(long, global = true)]
    pub reference: Option<String>,
    /// Forward corruption: `soft-rank` or `riffle`
    #[arg(long, global = true)]
    pub forward: Option<String>,
    /// Denoiser target: `sigma0` or `sigma-prev`
    #[arg(long, global = true)]
    pub param: Option<String>,
    /// Master seed (required, from a flag or the config file)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, env = "SOFTRANK_OUT")]
    pub out: Option<PathBuf>,
    /// Number of instances to generate, or training instances for `ablate`
    #[arg(long, global = true)]
    pub count: Option<usize>,
    /// Worker thread cap; outputs do not depend on it
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Record the full reverse trajectory of every sample
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub trajectories: Option<bool>,
    /// Training epochs
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Hidden width of the mlp and pointer models
    #[arg(long, global = true)]
    pub hidden: Option<usize>,
    /// Item embedding width of the pointer model
    #[arg(long, global = true)]
    pub embed: Option<usize>,
    /// Time buckets of the tabular model (defaults to `--steps`)
    #[arg(long, global = true)]
    pub buckets: Option<usize>,
    /// SGD learning rate
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lr: Option<f64>,
    /// SGD minibatch size
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Monte-Carlo draws per `validate-kernels` check
    #[arg(long, global = true)]
    pub draws: Option<usize>,
    /// Held-out instances for `ablate`
    #[arg(long, global = true)]
    pub test_count: Option<usize>,
    /// Dataset file (defaults to `<out>/dataset.jsonl`)
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Checkpoint file (defaults to `<out>/model.ckpt`)
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Sample file (defaults to `<out>/samples.jsonl`)
    #[arg(long, global = true)]
    pub samples: Option<PathBuf>,
}

impl Options {
    pub fn from_toml_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Field-wise `self` if set, else `fallback`.
    pub fn or(self, fallback: Options) -> Options {
        macro_rules! pick {
            ($($f:ident),*) => { Options { $($f: self.$f.or(fallback.$f)),* } };
        }
        pick!(
            task, n, model, eta, steps, reference, forward, param, seed, out, count, threads, trajectories, epochs,
            hidden, embed, buckets, lr, batch, draws, test_count, dataset, checkpoint, samples
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GenData,
    Train,
    Sample,
    Eval,
    ValidateKernels,
    Ablate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Train => "train",
            Command::Sample => "sample",
            Command::Eval => "eval",
            Command::ValidateKernels => "validate-kernels",
            Command::Ablate => "ablate",
        }
    }
}

/// Effective settings after applying flags, then the config file, then defaults.
/// This is what output headers echo and hash, so it leaves out anything that
/// does not change results: output location, input paths and thread count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub task: TaskKind,
    pub n: usize,
    pub model: Variant,
    pub eta: f64,
    pub steps: usize,
    pub reference: Reference,
    pub forward: ForwardProcess,
    pub param: Parametrization,
    pub seed: u64,
    pub count: usize,
    pub trajectories: bool,
    pub epochs: usize,
    pub hidden: usize,
    pub embed: usize,
    pub buckets: usize,
    pub lr: f64,
    pub batch: usize,
    pub draws: usize,
    pub test_count: usize,
}

/// Resolved settings plus the locations that are kept out of the header.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub run: RunConfig,
    /// Which of `task`, `n` and `model` were given explicitly.
    pub explicit: Explicit,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub samples: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Explicit {
    pub task: bool,
    pub n: bool,
    pub model: bool,
    pub forward: bool,
    pub param: bool,
}

pub const DEFAULT_OUT: &str = "softrank-out";

fn parse<T>(value: Option<&str>, default: T) -> anyhow::Result<T>
where
    T: std::str::FromStr<Err = softrank_core::Error>,
{
    match value {
        Some(v) => Ok(v.parse()?),
        None => Ok(default),
    }
}

pub fn resolve(command: Command, opts: Options) -> anyhow::Result<Resolved> {
    let Some(seed) = opts.seed else {
        bail!("a seed is required: pass --seed or set `seed` in the config file");
    };
    let ablation = AblationSettings::default();
    let is_ablate = command == Command::Ablate;
    let eta = opts.eta.unwrap_or(if command == Command::ValidateKernels { 0.1 } else { 0.3 });
    if eta <= 0.0 || !eta.is_finite() {
        bail!("--eta must be positive and finite, got {eta}");
    }
    let steps = opts.steps.unwrap_or(20);
    let run = RunConfig {
        command,
        task: parse(opts.task.as_deref(), TaskKind::Sorting)?,
        n: opts.n.unwrap_or(5),
        model: parse(opts.model.as_deref(), Variant::MlpCgpl)?,
        eta,
        steps,
        reference: parse(opts.reference.as_deref(), Reference::UniformUnitCube)?,
        forward: parse(opts.forward.as_deref(), ForwardProcess::SoftRank)?,
        param: parse(opts.param.as_deref(), Parametrization::PredictSigma0)?,
        seed,
        count: opts.count.unwrap_or(if is_ablate { ablation.train_count } else { 1000 }),
        trajectories: opts.trajectories.unwrap_or(false),
        epochs: opts.epochs.unwrap_or(if is_ablate { ablation.epochs } else { 30 }),
        hidden: opts.hidden.unwrap_or(if is_ablate { ablation.hidden } else { 64 }),
        embed: opts.embed.unwrap_or(ablation.embed),
        buckets: opts.buckets.unwrap_or(steps),
        lr: opts.lr.unwrap_or(ablation.learning_rate),
        batch: opts.batch.unwrap_or(ablation.batch_size),
        draws: opts.draws.unwrap_or(100_000),
        test_count: opts.test_count.unwrap_or(ablation.test_count),
    };
    for (name, v) in [("n", run.n), ("steps", run.steps), ("count", run.count), ("batch", run.batch)] {
        if v == 0 {
            bail!("--{name} must be positive");
        }
    }
    if run.n < 2 {
        bail!("--n must be at least 2, got {}", run.n);
    }
    if run.lr <= 0.0 || !run.lr.is_finite() {
        bail!("--lr must be positive and finite, got {}", run.lr);
    }
    if opts.threads == Some(0) {
        bail!("--threads must be positive");
    }
    let explicit = Explicit {
        task: opts.task.is_some(),
        n: opts.n.is_some(),
        model: opts.model.is_some(),
        forward: opts.forward.is_some(),
        param: opts.param.is_some(),
    };
    // The same flags name outputs for the command that produces the file.
    let inputs: &[&Option<PathBuf>] = match command {
        Command::GenData | Command::ValidateKernels | Command::Ablate => &[],
        Command::Train => &[&opts.dataset],
        Command::Sample => &[&opts.dataset, &opts.checkpoint],
        Command::Eval => &[&opts.dataset, &opts.samples],
    };
    for path in inputs.iter().copied().flatten() {
        if !path.is_file() {
            bail!("input file {} does not exist", path.display());
        }
    }
    Ok(Resolved {
        run,
        explicit,
        out: opts.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        threads: opts.threads,
        dataset: opts.dataset,
        checkpoint: opts.checkpoint,
        samples: opts.samples,
    })
}

impl RunConfig {
    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
