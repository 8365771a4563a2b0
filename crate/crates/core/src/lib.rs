//! Permutation generation by diffusion over continuous soft ranks.
//!
//! A permutation `σ ∈ S_N` is lifted onto the grid `{0, 1/(N−1), …, 1}`,
//! diffused by a reflected Brownian bridge toward a reference draw, and
//! recovered by running the bridge backwards with a learned Plackett–Luce
//! style denoiser.
//!
//! ```
//! use rand::SeedableRng;
//! use softrank_core::{BridgeParamsF64, DenoiserModelF64, Reference, SamplerConfig, TaskKind};
//!
//! let model = DenoiserModelF64::oracle(TaskKind::Sorting, 4).unwrap();
//! let bridge = BridgeParamsF64::uniform(0.3, 20, Reference::UniformUnitCube).unwrap();
//! let config = SamplerConfig::new(bridge, &model);
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
//! let out = softrank_core::sampler::reverse_sample(&[0.9, 0.2, 0.5, 0.1], 1, &config, &mut rng).unwrap();
//! assert_eq!(out.permutation.ranks(), &[4, 2, 3, 1]);
//! ```

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ablation;
pub mod denoiser;
pub mod distributions;
pub mod error;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod permutation;
pub mod sampler;
pub mod scalar;
pub mod softrank;
pub mod tasks;
pub mod validation;

pub use denoiser::{Architecture, DenoiserModel, ForwardProcess, Observation, Parametrization, TrainConfig, Variant};
pub use distributions::{BiaffineParams, ScoreMatrix, StagewiseScorer};
pub use error::{Error, Result};
pub use kernels::{GaussianConditional, JointCovariance, ReverseKernelQuery};
pub use permutation::Permutation;
pub use sampler::SamplerConfig;
pub use scalar::Real;
pub use softrank::{BridgeParams, Reference, SoftRankVector};
pub use tasks::{Dataset, Example, Instance, SortingInstance, TaskKind, TspInstance};

pub type SoftRankVectorF64 = SoftRankVector<f64>;
pub type SoftRankVectorF32 = SoftRankVector<f32>;
pub type BridgeParamsF64 = BridgeParams<f64>;
pub type BridgeParamsF32 = BridgeParams<f32>;
pub type ScoreMatrixF64 = ScoreMatrix<f64>;
pub type ScoreMatrixF32 = ScoreMatrix<f32>;
pub type DenoiserModelF64 = DenoiserModel<f64>;
pub type DenoiserModelF32 = DenoiserModel<f32>;
pub type TrainConfigF64 = TrainConfig<f64>;
pub type TrainConfigF32 = TrainConfig<f32>;
pub type ExampleF64 = Example<f64>;
pub type DatasetF64 = Dataset<f64>;
