//! Reverse-time generation of a permutation for one instance.
//!
//! The default configuration is the reflected Gaussian-bridge sampler: draw
//! `z_1` once, then for `k = K … 1` read the observed ordering from `z_t`,
//! sample `σ̂₀` from the model, lift it, and take one kernel step to
//! `s = t_{k−1}`. The last step has `s = 0`, so the output is the last `σ̂₀`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::denoiser::{riffle_steps, DenoiserModel, ForwardProcess, Observation, Parametrization};
use crate::distributions::cgpl_sample;
use crate::error::{Error, Result};
use crate::kernels::{sample_reverse_step, ReverseKernelQuery};
use crate::permutation::{kendall_distance, Permutation};
use crate::scalar::Real;
use crate::softrank::{lift_to_grid, random_permutation, riffle_shuffle_step, sample_reference, BridgeParams};
use crate::tasks::derived_rng;

#[derive(Debug, Clone)]
pub struct SamplerConfig<'m, T> {
    pub bridge: BridgeParams<T>,
    pub model: &'m DenoiserModel<T>,
    pub record_trajectory: bool,
    pub forward: ForwardProcess,
    pub parametrization: Parametrization,
}

impl<'m, T: Real> SamplerConfig<'m, T> {
    pub fn new(bridge: BridgeParams<T>, model: &'m DenoiserModel<T>) -> Self {
        Self {
            bridge,
            model,
            record_trajectory: false,
            forward: ForwardProcess::SoftRank,
            parametrization: Parametrization::PredictSigma0,
        }
    }

    pub fn with_trajectory(mut self, record: bool) -> Self {
        self.record_trajectory = record;
        self
    }

    pub fn with_forward(mut self, forward: ForwardProcess, parametrization: Parametrization) -> Self {
        self.forward = forward;
        self.parametrization = parametrization;
        self
    }
}

/// One recorded state. `z` is absent for the discrete riffle chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStep<T> {
    pub k: usize,
    pub t: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<T>>,
    pub sigma: Permutation,
    /// The model draw that produced this state; absent for the initial state.
    pub sigma0_hat: Option<Permutation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutput<T> {
    pub permutation: Permutation,
    pub trajectory: Option<Vec<TrajectoryStep<T>>>,
}

fn draw<T: Real, R: Rng + ?Sized>(
    model: &DenoiserModel<T>,
    features: &[T],
    feature_dim: usize,
    observed: &Permutation,
    t: T,
    rng: &mut R,
) -> Result<Permutation> {
    let obs = Observation::new(features, feature_dim, observed)?;
    Ok(cgpl_sample(&model.bind(obs, t)?, rng)?.0)
}

/// Runs the reverse chain on one instance (`features` is `n × feature_dim`).
pub fn reverse_sample<T: Real, R: Rng + ?Sized>(
    features: &[T],
    feature_dim: usize,
    config: &SamplerConfig<'_, T>,
    rng: &mut R,
) -> Result<SampleOutput<T>> {
    let n = config.model.arch().n;
    if n < 2 {
        return Err(Error::InvalidSize(format!("sampling needs n >= 2, got {n}")));
    }
    if features.len() != n * feature_dim {
        return Err(Error::SizeMismatch { expected: n * feature_dim, got: features.len() });
    }
    let grid = config.bridge.time_grid();
    let steps = grid.len() - 1;
    let eta = config.bridge.eta();
    let mut trajectory = config.record_trajectory.then(Vec::new);
    let mut record = |step: TrajectoryStep<T>| {
        if let Some(tr) = trajectory.as_mut() {
            tr.push(step);
        }
    };

    let permutation = match config.forward {
        ForwardProcess::SoftRank => {
            let z1 = sample_reference::<T, _>(config.bridge.reference(), n, rng)?;
            let mut z = z1.clone();
            record(TrajectoryStep { k: steps, t: T::one(), z: Some(z.as_slice().to_vec()), sigma: z.ranks(), sigma0_hat: None });
            for k in (1..=steps).rev() {
                let (s, t) = (grid[k - 1], grid[k]);
                let sigma_hat = draw(config.model, features, feature_dim, &z.ranks(), t, rng)?;
                z = match config.parametrization {
                    Parametrization::PredictSigma0 => {
                        let z0 = lift_to_grid::<T>(&sigma_hat);
                        let q = ReverseKernelQuery { s, t, z_t: &z, z0_hat: &z0, z1: &z1, eta };
                        sample_reverse_step(&q, rng)?
                    }
                    Parametrization::PredictSigmaPrev => lift_to_grid(&sigma_hat),
                };
                record(TrajectoryStep {
                    k: k - 1,
                    t: s,
                    z: Some(z.as_slice().to_vec()),
                    sigma: z.ranks(),
                    sigma0_hat: Some(sigma_hat),
                });
            }
            z.ranks()
        }
        ForwardProcess::RiffleShuffle => {
            let mut sigma = random_permutation(n, rng)?;
            record(TrajectoryStep { k: steps, t: T::one(), z: None, sigma: sigma.clone(), sigma0_hat: None });
            for k in (1..=steps).rev() {
                let (s, t) = (grid[k - 1], grid[k]);
                let sigma_hat = draw(config.model, features, feature_dim, &sigma, t, rng)?;
                sigma = match config.parametrization {
                    Parametrization::PredictSigma0 => {
                        let mut renoised = sigma_hat.clone();
                        for _ in 0..riffle_steps(s) {
                            renoised = riffle_shuffle_step(&renoised, rng);
                        }
                        renoised
                    }
                    Parametrization::PredictSigmaPrev => sigma_hat.clone(),
                };
                record(TrajectoryStep { k: k - 1, t: s, z: None, sigma: sigma.clone(), sigma0_hat: Some(sigma_hat) });
            }
            sigma
        }
    };
    Ok(SampleOutput { permutation, trajectory })
}

/// Samples every instance on its own stream `derived_rng(seed, i)`, in parallel.
pub fn sample_many<T: Real>(
    instances: &[Vec<T>],
    feature_dim: usize,
    config: &SamplerConfig<'_, T>,
    seed: u64,
) -> Result<Vec<SampleOutput<T>>> {
    instances
        .par_iter()
        .enumerate()
        .map(|(i, features)| reverse_sample(features, feature_dim, config, &mut derived_rng(seed, i as u64)))
        .collect()
}

/// Kendall distance between consecutive permutations.
pub fn jumpiness(states: &[Permutation]) -> Result<Vec<usize>> {
    if states.len() < 2 {
        return Err(Error::InvalidSize(format!("need at least 2 states, got {}", states.len())));
    }
    states.windows(2).map(|w| kendall_distance(&w[0], &w[1])).collect()
}

pub fn trajectory_jumpiness<T>(trajectory: &[TrajectoryStep<T>]) -> Result<Vec<usize>> {
    let states: Vec<Permutation> = trajectory.iter().map(|s| s.sigma.clone()).collect();
    jumpiness(&states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::Architecture;
    use crate::permutation::rank_of_coordinates;
    use crate::softrank::Reference;
    use crate::tasks::TaskKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn oracle_single_step_returns_truth() {
        let model = DenoiserModel::<f64>::oracle(TaskKind::Sorting, 4).unwrap();
        let bridge = BridgeParams::uniform(0.3, 1, Reference::UniformUnitCube).unwrap();
        let cfg = SamplerConfig::new(bridge, &model).with_trajectory(true);
        let values = [0.4, 0.1, 0.8, 0.3];
        let out = reverse_sample(&values, 1, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(out.permutation, rank_of_coordinates(&values).unwrap());
        let tr = out.trajectory.unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr[1].sigma0_hat.as_ref(), Some(&out.permutation));
    }

    #[test]
    fn jumpiness_examples() {
        let id = Permutation::identity(4).unwrap();
        assert_eq!(jumpiness(&[id.clone(), id.clone(), id.clone()]).unwrap(), vec![0, 0]);
        let a = Permutation::from_ranks(vec![2, 1, 3, 4]).unwrap();
        let b = Permutation::from_ranks(vec![3, 1, 2, 4]).unwrap();
        assert_eq!(jumpiness(&[id.clone(), a, b]).unwrap(), vec![1, 1]);
        assert!(jumpiness(&[id]).is_err());
    }

    #[test]
    fn riffle_sampler_with_oracle_is_exact() {
        let model = DenoiserModel::<f64>::oracle(TaskKind::Sorting, 5).unwrap();
        let bridge = BridgeParams::uniform(0.3, 7, Reference::UniformUnitCube).unwrap();
        for param in [Parametrization::PredictSigma0, Parametrization::PredictSigmaPrev] {
            let cfg = SamplerConfig::new(bridge.clone(), &model).with_forward(ForwardProcess::RiffleShuffle, param);
            let values = [0.5, 0.9, 0.1, 0.3, 0.7];
            let out = reverse_sample(&values, 1, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
            assert_eq!(out.permutation, rank_of_coordinates(&values).unwrap());
        }
    }

    #[test]
    fn rejects_mismatched_features() {
        let model = DenoiserModel::<f64>::zeros(Architecture::mlp(3, 1, 4)).unwrap();
        let bridge = BridgeParams::uniform(0.3, 5, Reference::UniformUnitCube).unwrap();
        let cfg = SamplerConfig::new(bridge, &model);
        assert!(reverse_sample(&[0.1, 0.2], 1, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
