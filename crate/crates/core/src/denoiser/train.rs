//! Corruption of `(X, σ₀)` pairs and fixed-rate minibatch descent.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DenoiserModel, Observation, Variant};
use crate::error::{Error, Result};
use crate::kernels::{sample_reverse_step, ReverseKernelQuery};
use crate::permutation::Permutation;
use crate::scalar::Real;
use crate::softrank::{lift_to_grid, riffle_shuffle_step, sample_forward_marginal, sample_reference, BridgeParams};
use crate::tasks::Example;

/// Number of riffle shuffles at `t = 1`.
pub const RIFFLE_MAX_STEPS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForwardProcess {
    #[default]
    SoftRank,
    RiffleShuffle,
}

impl ForwardProcess {
    pub fn name(self) -> &'static str {
        match self {
            Self::SoftRank => "soft-rank",
            Self::RiffleShuffle => "riffle-shuffle",
        }
    }
}

impl std::str::FromStr for ForwardProcess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft-rank" | "softrank" => Ok(Self::SoftRank),
            "riffle" | "riffle-shuffle" => Ok(Self::RiffleShuffle),
            other => Err(Error::Config(format!("unknown forward process `{other}`"))),
        }
    }
}

/// What the model is trained to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parametrization {
    /// The clean permutation `σ₀`.
    #[default]
    PredictSigma0,
    /// The permutation one grid step earlier, `σ_s`.
    PredictSigmaPrev,
}

impl Parametrization {
    pub fn name(self) -> &'static str {
        match self {
            Self::PredictSigma0 => "sigma0",
            Self::PredictSigmaPrev => "sigma-prev",
        }
    }
}

impl std::str::FromStr for Parametrization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma0" | "x0" | "predict-sigma0" => Ok(Self::PredictSigma0),
            "sigma-prev" | "xprev" | "predict-sigma-prev" => Ok(Self::PredictSigmaPrev),
            other => Err(Error::Config(format!("unknown parametrization `{other}`"))),
        }
    }
}

/// Shuffles applied by the riffle forward process at time `t`.
pub fn riffle_steps<T: Real>(t: T) -> usize {
    (t.to_f64_lossy() * RIFFLE_MAX_STEPS as f64).round() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub learning_rate: T,
    pub batch_size: usize,
    pub epochs: usize,
    pub bridge: BridgeParams<T>,
    pub forward: ForwardProcess,
    pub parametrization: Parametrization,
    pub seed: u64,
}

impl<T: Real> TrainConfig<T> {
    pub fn new(bridge: BridgeParams<T>, seed: u64) -> Self {
        Self {
            learning_rate: T::lit(0.05),
            batch_size: 32,
            epochs: 100,
            bridge,
            forward: ForwardProcess::SoftRank,
            parametrization: Parametrization::PredictSigma0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        Ok(())
    }
}

/// One corrupted training pair: the noisy observation and the supervised target.
#[derive(Debug, Clone, PartialEq)]
pub struct Corruption<T> {
    pub t: T,
    pub observed: Permutation,
    pub target: Permutation,
}

/// Draws a grid time `t_k`, `k ∈ {1, …, K}`, and corrupts `sigma0` to it.
pub fn corrupt<T: Real, R: Rng + ?Sized>(
    sigma0: &Permutation,
    bridge: &BridgeParams<T>,
    forward: ForwardProcess,
    parametrization: Parametrization,
    rng: &mut R,
) -> Result<Corruption<T>> {
    let grid = bridge.time_grid();
    let k = rng.random_range(1..grid.len());
    let (s, t) = (grid[k - 1], grid[k]);
    match forward {
        ForwardProcess::SoftRank => {
            let n = sigma0.len();
            let z0 = lift_to_grid::<T>(sigma0);
            let z1 = sample_reference(bridge.reference(), n, rng)?;
            let z_t = if t == T::one() { z1.clone() } else { sample_forward_marginal(&z0, &z1, t, bridge.eta(), rng)? };
            let target = match parametrization {
                Parametrization::PredictSigma0 => sigma0.clone(),
                Parametrization::PredictSigmaPrev => {
                    let q = ReverseKernelQuery { s, t, z_t: &z_t, z0_hat: &z0, z1: &z1, eta: bridge.eta() };
                    sample_reverse_step(&q, rng)?.ranks()
                }
            };
            Ok(Corruption { t, observed: z_t.ranks(), target })
        }
        ForwardProcess::RiffleShuffle => {
            let (steps_s, steps_t) = (riffle_steps(s), riffle_steps(t));
            let mut state = sigma0.clone();
            let mut at_s = sigma0.clone();
            for step in 1..=steps_t {
                state = riffle_shuffle_step(&state, rng);
                if step == steps_s {
                    at_s = state.clone();
                }
            }
            let target = match parametrization {
                Parametrization::PredictSigma0 => sigma0.clone(),
                Parametrization::PredictSigmaPrev => at_s,
            };
            Ok(Corruption { t, observed: state, target })
        }
    }
}

/// Mean loss over a batch and, for learned variants, its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGradient<T> {
    pub loss: T,
    /// Empty for the oracle.
    pub gradient: Vec<T>,
}

/// Loss on already-corrupted pairs. Per-example terms are evaluated in
/// parallel and reduced in batch order.
pub fn corrupted_loss<T: Real>(
    model: &DenoiserModel<T>,
    batch: &[&Example<T>],
    corruptions: &[Corruption<T>],
) -> Result<LossAndGradient<T>> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    if batch.len() != corruptions.len() {
        return Err(Error::SizeMismatch { expected: batch.len(), got: corruptions.len() });
    }
    let with_grad = model.variant() != Variant::Oracle;
    let terms = batch
        .par_iter()
        .zip(corruptions.par_iter())
        .map(|(ex, c)| {
            let obs = Observation::new(&ex.features, ex.feature_dim, &c.observed)?;
            model.nll(&obs, c.t, &c.target, with_grad)
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = T::one() / T::from_usize_lossy(batch.len());
    let mut loss = T::zero();
    let mut gradient = vec![T::zero(); if with_grad { model.params().len() } else { 0 }];
    for (l, g) in terms {
        loss = loss + l;
        if let Some(g) = g {
            for (a, b) in gradient.iter_mut().zip(g) {
                *a = *a + b;
            }
        }
    }
    gradient.iter_mut().for_each(|g| *g = *g * scale);
    Ok(LossAndGradient { loss: loss * scale, gradient })
}

/// Soft-rank, σ₀-target loss with fresh corruptions drawn sequentially from `rng`.
pub fn training_loss<T: Real, R: Rng + ?Sized>(
    model: &DenoiserModel<T>,
    batch: &[&Example<T>],
    bridge: &BridgeParams<T>,
    rng: &mut R,
) -> Result<LossAndGradient<T>> {
    let corruptions = batch
        .iter()
        .map(|ex| corrupt(&ex.target, bridge, ForwardProcess::SoftRank, Parametrization::PredictSigma0, rng))
        .collect::<Result<Vec<_>>>()?;
    corrupted_loss(model, batch, &corruptions)
}

#[derive(Debug, Clone)]
pub struct TrainReport<T> {
    pub model: DenoiserModel<T>,
    /// Mean per-example loss of every epoch.
    pub epoch_losses: Vec<T>,
}

/// Fixed-rate minibatch gradient descent. All randomness comes from a
/// ChaCha8 stream seeded with `config.seed`.
pub fn train<T: Real>(model: DenoiserModel<T>, examples: &[Example<T>], config: &TrainConfig<T>) -> Result<TrainReport<T>> {
    config.validate()?;
    if model.variant() == Variant::Oracle {
        return Err(Error::Model("the oracle is not trainable".into()));
    }
    if examples.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let arch = model.arch().clone();
    if let Some(bad) = examples.iter().find(|ex| ex.n() != arch.n || ex.feature_dim != arch.feature_dim) {
        return Err(Error::SizeMismatch { expected: arch.n * arch.feature_dim, got: bad.features.len() });
    }
    let mut model = model;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = T::zero();
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example<T>> = chunk.iter().map(|&i| &examples[i]).collect();
            let corruptions = batch
                .iter()
                .map(|ex| corrupt(&ex.target, &config.bridge, config.forward, config.parametrization, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let LossAndGradient { loss, gradient } = corrupted_loss(&model, &batch, &corruptions)?;
            if !loss.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, reason: format!("non-finite loss {loss}") });
            }
            total = total + loss * T::from_usize_lossy(batch.len());
            for (p, g) in model.params_mut().iter_mut().zip(gradient) {
                *p = *p - config.learning_rate * g;
            }
        }
        epoch_losses.push(total / T::from_usize_lossy(examples.len()));
    }
    Ok(TrainReport { model, epoch_losses })
}

/// `σ_{t−1}` through the σ₀-predictor: draw `σ̂₀`, lift it, take one reverse
/// kernel step to `s`, and read off the ranks.
#[allow(clippy::too_many_arguments)]
pub fn predict_sigma_prev<T: Real, R: Rng + ?Sized>(
    model: &DenoiserModel<T>,
    features: &[T],
    feature_dim: usize,
    t: T,
    s: T,
    z_t: &crate::softrank::SoftRankVector<T>,
    z1: &crate::softrank::SoftRankVector<T>,
    eta: T,
    rng: &mut R,
) -> Result<Permutation> {
    let observed = z_t.ranks();
    let obs = Observation::new(features, feature_dim, &observed)?;
    let bound = model.bind(obs, t)?;
    let (sigma0, _) = crate::distributions::cgpl_sample(&bound, rng)?;
    let z0 = lift_to_grid::<T>(&sigma0);
    let q = ReverseKernelQuery { s, t, z_t, z0_hat: &z0, z1, eta };
    Ok(sample_reverse_step(&q, rng)?.ranks())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::Architecture;
    use crate::softrank::Reference;

    fn toy_examples(target: &Permutation, count: usize) -> Vec<Example<f64>> {
        let n = target.len();
        (0..count).map(|_| Example::new(vec![0.0; n], 1, target.clone()).unwrap()).collect()
    }

    #[test]
    fn zero_model_loss_is_log_factorial() {
        let bridge = BridgeParams::uniform(0.3, 10, Reference::UniformUnitCube).unwrap();
        let target = Permutation::from_ranks(vec![2, 3, 1]).unwrap();
        let examples = toy_examples(&target, 4);
        let batch: Vec<_> = examples.iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for arch in [Architecture::mlp(3, 1, 6), Architecture::pointer(3, 1, 6, 3), Architecture::tabular(3, 1, 10)] {
            let model = DenoiserModel::zeros(arch).unwrap();
            let out = training_loss(&model, &batch, &bridge, &mut rng).unwrap();
            assert!((out.loss - 6f64.ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn riffle_corruption_counts_steps() {
        assert_eq!(riffle_steps(0.0), 0);
        assert_eq!(riffle_steps(1.0), RIFFLE_MAX_STEPS);
        assert_eq!(riffle_steps(0.5), 4);
        let bridge = BridgeParams::uniform(0.3, 7, Reference::UniformUnitCube).unwrap();
        let sigma0 = Permutation::identity(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let c = corrupt(&sigma0, &bridge, ForwardProcess::RiffleShuffle, Parametrization::PredictSigmaPrev, &mut rng)
                .unwrap();
            if c.t == 1.0 / 7.0 {
                assert_eq!(c.target, sigma0);
            }
        }
    }

    #[test]
    fn sigma_prev_target_at_first_step_is_clean() {
        let bridge = BridgeParams::uniform(0.3, 1, Reference::UniformUnitCube).unwrap();
        let sigma0 = Permutation::from_ranks(vec![3, 1, 4, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = corrupt::<f64, _>(&sigma0, &bridge, ForwardProcess::SoftRank, Parametrization::PredictSigmaPrev, &mut rng)
            .unwrap();
        assert_eq!(c.t, 1.0);
        assert_eq!(c.target, sigma0);
    }

    #[test]
    fn config_validation() {
        let bridge = BridgeParams::uniform(0.3, 10, Reference::UniformUnitCube).unwrap();
        let mut cfg = TrainConfig::<f64>::new(bridge, 0);
        assert!(cfg.validate().is_ok());
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        cfg.learning_rate = 0.1;
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn oracle_refuses_training() {
        let bridge = BridgeParams::uniform(0.3, 10, Reference::UniformUnitCube).unwrap();
        let model = DenoiserModel::oracle(crate::tasks::TaskKind::Sorting, 3).unwrap();
        let examples = toy_examples(&Permutation::identity(3).unwrap(), 2);
        assert!(train(model, &examples, &TrainConfig::new(bridge, 0)).is_err());
    }
}
