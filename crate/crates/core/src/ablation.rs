//! Forward process × parametrization × reverse model grid on scalar sorting.
//!
//! Every cell trains on the same generated data with the same budget and is
//! evaluated by full reverse sampling on the same held-out instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::denoiser::{train, Architecture, DenoiserModel, ForwardProcess, Parametrization, TrainConfig};
use crate::error::Result;
use crate::metrics::{sorting_metrics, SortingMetrics};
use crate::sampler::{sample_many, SamplerConfig};
use crate::scalar::Real;
use crate::softrank::{BridgeParams, Reference};
use crate::tasks::{generate_dataset, Instance, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationCell {
    pub forward: ForwardProcess,
    pub parametrization: Parametrization,
    pub pointer: bool,
}

impl AblationCell {
    pub fn reverse_model(&self) -> &'static str {
        if self.pointer {
            "Pointer cGPL"
        } else {
            "cGPL"
        }
    }

    /// All eight combinations.
    pub fn full_grid() -> Vec<Self> {
        let mut cells = Vec::new();
        for forward in [ForwardProcess::SoftRank, ForwardProcess::RiffleShuffle] {
            for pointer in [false, true] {
                for parametrization in [Parametrization::PredictSigma0, Parametrization::PredictSigmaPrev] {
                    cells.push(Self { forward, parametrization, pointer });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSettings {
    pub n: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub hidden: usize,
    pub embed: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub eta: f64,
    pub steps: usize,
    pub reference: Reference,
    pub seed: u64,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            n: 5,
            train_count: 1000,
            test_count: 200,
            hidden: 48,
            embed: 16,
            epochs: 40,
            batch_size: 16,
            learning_rate: 0.05,
            eta: 0.3,
            steps: 20,
            reference: Reference::UniformUnitCube,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    #[serde(rename = "Forward Process")]
    pub forward_process: String,
    #[serde(rename = "Reverse Model")]
    pub reverse_model: String,
    #[serde(rename = "Parametrization")]
    pub parametrization: String,
    pub kendall_tau: f64,
    pub accuracy: f64,
    pub correctness: f64,
    pub final_train_loss: f64,
}

pub fn run_cell<T: Real>(settings: &AblationSettings, cell: AblationCell) -> Result<AblationRow> {
    let train_set = generate_dataset::<T>(TaskKind::Sorting, settings.n, settings.train_count, settings.seed)?;
    let test_set =
        generate_dataset::<T>(TaskKind::Sorting, settings.n, settings.test_count, settings.seed.wrapping_add(1))?;
    let bridge = BridgeParams::uniform(T::lit(settings.eta), settings.steps, settings.reference)?;

    let arch = if cell.pointer {
        Architecture::pointer(settings.n, 1, settings.hidden, settings.embed)
    } else {
        Architecture::mlp(settings.n, 1, settings.hidden)
    };
    let model = DenoiserModel::init(arch, &mut ChaCha8Rng::seed_from_u64(settings.seed))?;
    let config = TrainConfig {
        learning_rate: T::lit(settings.learning_rate),
        batch_size: settings.batch_size,
        epochs: settings.epochs,
        bridge: bridge.clone(),
        forward: cell.forward,
        parametrization: cell.parametrization,
        seed: settings.seed,
    };
    let report = train(model, &train_set.examples(), &config)?;

    let sampler = SamplerConfig::new(bridge, &report.model).with_forward(cell.forward, cell.parametrization);
    let features: Vec<Vec<T>> = test_set.instances.iter().map(Instance::features).collect();
    let preds: Vec<_> = sample_many(&features, 1, &sampler, settings.seed.wrapping_add(2))?
        .into_iter()
        .map(|o| o.permutation)
        .collect();
    let truths: Vec<_> = test_set.examples().into_iter().map(|e| e.target).collect();
    let SortingMetrics { kendall_tau, accuracy, correctness, .. } = sorting_metrics(&preds, &truths)?;
    Ok(AblationRow {
        forward_process: cell.forward.name().into(),
        reverse_model: cell.reverse_model().into(),
        parametrization: cell.parametrization.name().into(),
        kendall_tau,
        accuracy,
        correctness,
        final_train_loss: report.epoch_losses.last().map_or(f64::NAN, |l| l.to_f64_lossy()),
    })
}

pub fn run_grid<T: Real>(settings: &AblationSettings, cells: &[AblationCell]) -> Result<Vec<AblationRow>> {
    cells.iter().map(|&c| run_cell::<T>(settings, c)).collect()
}
