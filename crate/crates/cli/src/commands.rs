use std::fs;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use softrank_core::ablation::{run_grid, AblationCell, AblationSettings};
use softrank_core::denoiser::checkpoint::{read_checkpoint, write_checkpoint_with_run};
use softrank_core::denoiser::train;
use softrank_core::io::{read_dataset, write_dataset, write_dataset_with_run};
use softrank_core::metrics::{sorting_metrics, tsp_metrics};
use softrank_core::sampler::{sample_many, TrajectoryStep};
use softrank_core::tasks::generate_dataset;
use softrank_core::validation::{validate_kernels, ValidationSettings};
use softrank_core::{
    Architecture, BridgeParamsF64, DatasetF64, DenoiserModelF64, Instance, Permutation, SamplerConfig, TaskKind,
    TrainConfigF64, Variant,
};

use crate::config::{Command, Resolved};
use crate::records::{read_jsonl, Header, Inputs, JsonlWriter};

pub enum Outcome {
    Success,
    /// Ran to completion but a check failed.
    ValidationFailed(String),
}

pub fn run(mut r: Resolved) -> anyhow::Result<Outcome> {
    match r.run.command {
        Command::GenData => gen_data(&r),
        Command::Train => train_model(&mut r),
        Command::Sample => sample(&mut r),
        Command::Eval => eval(&mut r),
        Command::ValidateKernels => kernels(&r),
        Command::Ablate => ablate(&r),
    }
}

fn dataset_path(r: &Resolved) -> PathBuf {
    r.dataset.clone().unwrap_or_else(|| r.out.join("dataset.jsonl"))
}

fn checkpoint_path(r: &Resolved) -> PathBuf {
    r.checkpoint.clone().unwrap_or_else(|| r.out.join("model.ckpt"))
}

fn samples_path(r: &Resolved) -> PathBuf {
    r.samples.clone().unwrap_or_else(|| r.out.join("samples.jsonl"))
}

fn create_parent(path: &std::path::Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn gen_data(r: &Resolved) -> anyhow::Result<Outcome> {
    let run = &r.run;
    let ds = generate_dataset::<f64>(run.task, run.n, run.count, run.seed)?;
    let header = Header::new("softrank-dataset", run, &Inputs::default());
    let path = dataset_path(r);
    create_parent(&path)?;
    let mut bytes = Vec::new();
    write_dataset_with_run(&ds, Some(serde_json::to_value(&header)?), &mut bytes)?;
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} {} instances (n = {}) to {}", ds.instances.len(), run.task.name(), run.n, path.display());
    Ok(Outcome::Success)
}

/// Reads the dataset file if present, else generates one in memory. Held-out
/// data generated in-line uses `seed + 1` so it differs from the training set.
fn load_dataset(r: &mut Resolved, held_out: bool, inputs: &mut Inputs) -> anyhow::Result<DatasetF64> {
    let path = dataset_path(r);
    let (ds, bytes) = if path.is_file() {
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let ds = read_dataset(bytes.as_slice()).with_context(|| format!("reading {}", path.display()))?;
        (ds, bytes)
    } else {
        let seed = if held_out { r.run.seed.wrapping_add(1) } else { r.run.seed };
        let ds = generate_dataset::<f64>(r.run.task, r.run.n, r.run.count, seed)?;
        let mut bytes = Vec::new();
        write_dataset(&ds, &mut bytes)?;
        (ds, bytes)
    };
    if r.explicit.task && ds.kind != r.run.task {
        bail!("dataset task `{}` does not match --task `{}`", ds.kind.name(), r.run.task.name());
    }
    if r.explicit.n && ds.n != r.run.n {
        bail!("dataset has n = {} but --n is {}", ds.n, r.run.n);
    }
    r.run.task = ds.kind;
    r.run.n = ds.n;
    r.run.count = ds.instances.len();
    inputs.add("dataset", &bytes);
    Ok(ds)
}

fn bridge(r: &Resolved) -> anyhow::Result<BridgeParamsF64> {
    Ok(BridgeParamsF64::uniform(r.run.eta, r.run.steps, r.run.reference)?)
}

#[derive(Serialize)]
struct LossRecord {
    epoch: usize,
    loss: f64,
}

fn train_model(r: &mut Resolved) -> anyhow::Result<Outcome> {
    let mut inputs = Inputs::default();
    let ds = load_dataset(r, false, &mut inputs)?;
    let run = r.run.clone();
    let fdim = run.task.feature_dim();
    let arch = match run.model {
        Variant::Oracle => Architecture::oracle(run.task, run.n),
        Variant::TabularCgpl => Architecture::tabular(run.n, fdim, run.buckets),
        Variant::MlpCgpl => Architecture::mlp(run.n, fdim, run.hidden),
        Variant::MlpPointerCgpl => Architecture::pointer(run.n, fdim, run.hidden, run.embed),
    };
    let mut losses = Vec::new();
    let model = if run.model == Variant::Oracle {
        DenoiserModelF64::oracle(run.task, run.n)?
    } else {
        let examples = ds.examples();
        ensure!(!examples.is_empty(), "dataset has no labeled instances (exact TSP labels need n <= 9)");
        let model = DenoiserModelF64::init(arch, &mut ChaCha8Rng::seed_from_u64(run.seed))?;
        if run.epochs == 0 {
            model
        } else {
            let config = TrainConfigF64 {
                learning_rate: run.lr,
                batch_size: run.batch,
                epochs: run.epochs,
                bridge: bridge(r)?,
                forward: run.forward,
                parametrization: run.param,
                seed: run.seed,
            };
            let report = train(model, &examples, &config)?;
            losses = report.epoch_losses;
            report.model
        }
    };

    let header = Header::new("softrank-checkpoint", &run, &inputs);
    let ckpt = checkpoint_path(r);
    create_parent(&ckpt)?;
    let mut bytes = Vec::new();
    write_checkpoint_with_run(&model, Some(serde_json::to_value(&header)?), &mut bytes)?;
    fs::write(&ckpt, bytes).with_context(|| format!("writing {}", ckpt.display()))?;

    let mut trace = JsonlWriter::create(&r.out.join("loss.jsonl"), &Header::new("softrank-loss", &run, &inputs))?;
    for (epoch, &loss) in losses.iter().enumerate() {
        trace.write(&LossRecord { epoch: epoch + 1, loss })?;
    }
    let trace = trace.finish()?;
    match losses.last() {
        Some(l) => println!("trained {} for {} epochs, final loss {l:.6}", run.model.name(), losses.len()),
        None => println!("wrote untrained {} model", run.model.name()),
    }
    println!("checkpoint: {}\nloss trace: {}", ckpt.display(), trace.display());
    Ok(Outcome::Success)
}

fn load_model(r: &mut Resolved, inputs: &mut Inputs) -> anyhow::Result<DenoiserModelF64> {
    let path = checkpoint_path(r);
    let use_file = r.checkpoint.is_some() || !(r.explicit.model && r.run.model == Variant::Oracle);
    let model = if use_file && path.is_file() {
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        inputs.add("checkpoint", &bytes);
        read_checkpoint::<f64, _>(bytes.as_slice()).with_context(|| format!("reading {}", path.display()))?
    } else if r.run.model == Variant::Oracle {
        DenoiserModelF64::oracle(r.run.task, r.run.n)?
    } else {
        bail!("missing checkpoint {}; run `softrank train` first or pass --model oracle", path.display());
    };
    let arch = model.arch().clone();
    if r.explicit.model && arch.variant != r.run.model {
        bail!("checkpoint holds a {} model but --model is {}", arch.variant.name(), r.run.model.name());
    }
    if arch.n != r.run.n || arch.feature_dim != r.run.task.feature_dim() {
        bail!(
            "checkpoint expects n = {} with {} features per item, dataset has n = {} ({})",
            arch.n,
            arch.feature_dim,
            r.run.n,
            r.run.task.name()
        );
    }
    if let Some(task) = arch.task.filter(|&t| t != r.run.task) {
        bail!("oracle checkpoint solves {}, dataset is {}", task.name(), r.run.task.name());
    }
    r.run.model = arch.variant;
    r.run.hidden = arch.hidden;
    r.run.embed = arch.embed;
    r.run.buckets = arch.time_buckets;
    Ok(model)
}

#[derive(Serialize)]
struct SampleRecord<'a> {
    index: usize,
    permutation: &'a Permutation,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory: Option<&'a [TrajectoryStep<f64>]>,
}

#[derive(Deserialize)]
struct SampleLine {
    index: usize,
    permutation: Permutation,
}

fn sample(r: &mut Resolved) -> anyhow::Result<Outcome> {
    let mut inputs = Inputs::default();
    let ds = load_dataset(r, true, &mut inputs)?;
    let model = load_model(r, &mut inputs)?;
    let config = SamplerConfig::new(bridge(r)?, &model)
        .with_trajectory(r.run.trajectories)
        .with_forward(r.run.forward, r.run.param);
    let features: Vec<Vec<f64>> = ds.instances.iter().map(Instance::features).collect();
    let outputs = sample_many(&features, ds.kind.feature_dim(), &config, r.run.seed)?;

    let mut w = JsonlWriter::create(&samples_path(r), &Header::new("softrank-samples", &r.run, &inputs))?;
    for (index, o) in outputs.iter().enumerate() {
        w.write(&SampleRecord { index, permutation: &o.permutation, trajectory: o.trajectory.as_deref() })?;
    }
    let path = w.finish()?;
    println!("wrote {} samples to {}", outputs.len(), path.display());
    Ok(Outcome::Success)
}

fn eval(r: &mut Resolved) -> anyhow::Result<Outcome> {
    let mut inputs = Inputs::default();
    let ds = load_dataset(r, true, &mut inputs)?;
    let path = samples_path(r);
    let bytes = fs::read(&path).with_context(|| format!("reading {}; run `softrank sample` first", path.display()))?;
    let (sample_header, lines) =
        read_jsonl(&bytes, "softrank-samples").with_context(|| format!("reading {}", path.display()))?;
    if let (Some(expected), Some(actual)) = (sample_header.inputs.get("dataset"), inputs.get("dataset")) {
        ensure!(expected == actual, "{} was sampled from a different dataset", path.display());
    }
    inputs.add("samples", &bytes);
    let preds: Vec<Permutation> = lines
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let rec: SampleLine = serde_json::from_str(line).with_context(|| format!("sample record {i}"))?;
            ensure!(rec.index == i, "sample record {i} has index {}", rec.index);
            ensure!(rec.permutation.len() == ds.n, "sample {i} has length {}, dataset n = {}", rec.permutation.len(), ds.n);
            Ok(rec.permutation)
        })
        .collect::<anyhow::Result<_>>()?;
    ensure!(preds.len() == ds.instances.len(), "{} samples for {} instances", preds.len(), ds.instances.len());

    let record = match ds.kind {
        TaskKind::Sorting => {
            let truths: Vec<Permutation> = ds.examples().into_iter().map(|e| e.target).collect();
            serde_json::to_value(sorting_metrics(&preds, &truths)?)?
        }
        TaskKind::Tsp => {
            let instances: Vec<_> = ds
                .instances
                .iter()
                .map(|i| match i {
                    Instance::Tsp(t) => t.clone(),
                    Instance::Sorting(_) => unreachable!("dataset kind checked on read"),
                })
                .collect();
            serde_json::to_value(tsp_metrics(&instances, &preds)?)?
        }
    };
    let mut w = JsonlWriter::create(&r.out.join("metrics.jsonl"), &Header::new("softrank-metrics", &r.run, &inputs))?;
    w.write(&record)?;
    let out = w.finish()?;
    println!("{record}");
    println!("metrics: {}", out.display());
    Ok(Outcome::Success)
}

fn kernels(r: &Resolved) -> anyhow::Result<Outcome> {
    let settings = ValidationSettings { draws: r.run.draws, ..ValidationSettings::new(r.run.eta, r.run.seed) };
    let checks = validate_kernels(&settings)?;
    let mut w =
        JsonlWriter::create(&r.out.join("kernels.jsonl"), &Header::new("softrank-kernels", &r.run, &Inputs::default()))?;
    for c in &checks {
        w.write(c)?;
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {} = {:.3e} (threshold {:.1e})", c.name, c.statistic, c.threshold);
    }
    w.finish()?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::ValidationFailed(format!("kernel checks failed: {}", failed.join(", "))))
    }
}

fn ablate(r: &Resolved) -> anyhow::Result<Outcome> {
    let run = &r.run;
    ensure!(run.task == TaskKind::Sorting, "ablations run on the sorting task only");
    let pointer = match (r.explicit.model, run.model) {
        (false, _) => None,
        (true, Variant::MlpCgpl) => Some(false),
        (true, Variant::MlpPointerCgpl) => Some(true),
        (true, other) => bail!("ablations compare `mlp` and `pointer` models, not `{}`", other.name()),
    };
    let cells: Vec<AblationCell> = AblationCell::full_grid()
        .into_iter()
        .filter(|c| !r.explicit.forward || c.forward == run.forward)
        .filter(|c| !r.explicit.param || c.parametrization == run.param)
        .filter(|c| pointer.is_none_or(|p| c.pointer == p))
        .collect();
    let settings = AblationSettings {
        n: run.n,
        train_count: run.count,
        test_count: run.test_count,
        hidden: run.hidden,
        embed: run.embed,
        epochs: run.epochs,
        batch_size: run.batch,
        learning_rate: run.lr,
        eta: run.eta,
        steps: run.steps,
        reference: run.reference,
        seed: run.seed,
    };
    let rows = run_grid::<f64>(&settings, &cells)?;
    let mut w =
        JsonlWriter::create(&r.out.join("ablation.jsonl"), &Header::new("softrank-ablation", run, &Inputs::default()))?;
    println!("{:<16} {:<14} {:<12} {:>11} {:>9} {:>12}", "forward", "reverse model", "param", "kendall_tau", "accuracy", "correctness");
    for row in &rows {
        w.write(row)?;
        println!(
            "{:<16} {:<14} {:<12} {:>11.4} {:>9.4} {:>12.4}",
            row.forward_process, row.reverse_model, row.parametrization, row.kendall_tau, row.accuracy, row.correctness
        );
    }
    println!("table: {}", w.finish()?.display());
    Ok(Outcome::Success)
}
