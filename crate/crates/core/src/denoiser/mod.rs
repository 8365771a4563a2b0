//! σ₀-prediction denoisers `p_θ(σ₀ | X_t, t)` with hand-written gradients.
//!
//! Every learnable variant stores its weights in one flat parameter vector
//! described by an [`Architecture`]; the layout of that vector is private to
//! the variant module but stable, and it is what checkpoints persist.
//!
//! A model is queried through an [`Observation`]: the instance features in
//! their original item order plus the observed rank-form permutation `σ_t`.
//! Logits are always returned over original items, so a sampled sequence can
//! be lifted back onto the soft-rank coordinates without relabeling.

pub mod checkpoint;
mod dense;
mod mlp;
mod pointer;
mod tabular;
pub mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{masked_log_softmax, ScoreMatrix, StagewiseScorer};
use crate::error::{Error, Result};
use crate::permutation::{rank_of_coordinates, Permutation};
use crate::scalar::Real;
use crate::tasks::{exact_tsp, TaskKind};

pub use train::{
    corrupt, corrupted_loss, predict_sigma_prev, riffle_steps, train, training_loss, Corruption, ForwardProcess,
    LossAndGradient, Parametrization, TrainConfig, TrainReport, RIFFLE_MAX_STEPS,
};

pub const TIME_EMBED_DIM: usize = 8;
pub const POSITION_EMBED_DIM: usize = 4;
/// Logit the oracle puts on the ground-truth next item.
pub const ORACLE_LOGIT: f64 = 30.0;
/// Tabular models enumerate S_n per time bucket.
pub const MAX_TABULAR_N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Oracle,
    TabularCgpl,
    MlpCgpl,
    MlpPointerCgpl,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Oracle => "oracle",
            Variant::TabularCgpl => "tabular-cgpl",
            Variant::MlpCgpl => "mlp-cgpl",
            Variant::MlpPointerCgpl => "mlp-pointer-cgpl",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "tabular" | "tabular-cgpl" => Ok(Self::TabularCgpl),
            "mlp" | "mlp-cgpl" | "cgpl" => Ok(Self::MlpCgpl),
            "pointer" | "mlp-pointer-cgpl" | "pointer-cgpl" => Ok(Self::MlpPointerCgpl),
            other => Err(Error::Config(format!("unknown model variant `{other}`"))),
        }
    }
}

/// Shape metadata; determines the parameter layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub variant: Variant,
    pub n: usize,
    pub feature_dim: usize,
    /// Hidden width of the dense trunks.
    pub hidden: usize,
    /// Width `d` of pointer embeddings.
    pub embed: usize,
    /// Number of time buckets of the tabular model.
    pub time_buckets: usize,
    /// Task the oracle solves; unused by learned variants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
}

impl Architecture {
    pub fn oracle(task: TaskKind, n: usize) -> Self {
        Self {
            variant: Variant::Oracle,
            n,
            feature_dim: task.feature_dim(),
            hidden: 0,
            embed: 0,
            time_buckets: 0,
            task: Some(task),
        }
    }

    pub fn tabular(n: usize, feature_dim: usize, time_buckets: usize) -> Self {
        Self { variant: Variant::TabularCgpl, n, feature_dim, hidden: 0, embed: 0, time_buckets, task: None }
    }

    pub fn mlp(n: usize, feature_dim: usize, hidden: usize) -> Self {
        Self { variant: Variant::MlpCgpl, n, feature_dim, hidden, embed: 0, time_buckets: 0, task: None }
    }

    pub fn pointer(n: usize, feature_dim: usize, hidden: usize, embed: usize) -> Self {
        Self { variant: Variant::MlpPointerCgpl, n, feature_dim, hidden, embed, time_buckets: 0, task: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSize(format!("models need n >= 2, got {}", self.n)));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        match self.variant {
            Variant::Oracle if self.task.is_none() => {
                Err(Error::Config("oracle architecture needs a task".into()))
            }
            Variant::TabularCgpl if self.n > MAX_TABULAR_N => Err(Error::Config(format!(
                "tabular model is limited to n <= {MAX_TABULAR_N}, got {}",
                self.n
            ))),
            Variant::TabularCgpl if self.time_buckets == 0 => {
                Err(Error::Config("tabular model needs at least one time bucket".into()))
            }
            Variant::MlpCgpl if self.hidden == 0 => Err(Error::Config("mlp needs hidden > 0".into())),
            Variant::MlpPointerCgpl if self.hidden == 0 || self.embed == 0 => {
                Err(Error::Config("pointer model needs hidden > 0 and embed > 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn param_count(&self) -> usize {
        match self.variant {
            Variant::Oracle => 0,
            Variant::TabularCgpl => tabular::Layout::new(self).len(),
            Variant::MlpCgpl => mlp::Layout::new(self).len(),
            Variant::MlpPointerCgpl => pointer::Layout::new(self).len(),
        }
    }
}

/// Instance features in original item order plus the observed ordering `σ_t`.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a, T> {
    pub features: &'a [T],
    pub feature_dim: usize,
    /// Rank form: `observed.position(k)` is where item `k` currently sits.
    pub observed: &'a Permutation,
}

impl<'a, T: Real> Observation<'a, T> {
    pub fn new(features: &'a [T], feature_dim: usize, observed: &'a Permutation) -> Result<Self> {
        if feature_dim == 0 || features.len() != observed.len() * feature_dim {
            return Err(Error::SizeMismatch { expected: observed.len() * feature_dim, got: features.len() });
        }
        Ok(Self { features, feature_dim, observed })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.observed.len()
    }

    #[inline]
    pub fn item(&self, k: usize) -> &'a [T] {
        &self.features[k * self.feature_dim..(k + 1) * self.feature_dim]
    }
}

/// Sinusoidal features `[sin(ω_j t), cos(ω_j t)]`, `ω_j = π 2^j / 2`.
pub fn time_embedding<T: Real>(t: T) -> [T; TIME_EMBED_DIM] {
    let mut out = [T::zero(); TIME_EMBED_DIM];
    for j in 0..TIME_EMBED_DIM / 2 {
        let w = T::PI() * T::lit((1u32 << j) as f64 / 2.0);
        out[2 * j] = (w * t).sin();
        out[2 * j + 1] = (w * t).cos();
    }
    out
}

/// Sinusoidal features of a position in `[0, 1]`.
pub fn position_embedding<T: Real>(pos: T) -> [T; POSITION_EMBED_DIM] {
    let mut out = [T::zero(); POSITION_EMBED_DIM];
    for j in 0..POSITION_EMBED_DIM / 2 {
        let w = T::PI() * T::lit((j + 1) as f64);
        out[2 * j] = (w * pos).sin();
        out[2 * j + 1] = (w * pos).cos();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel<T> {
    arch: Architecture,
    params: Vec<T>,
}

impl<T: Real> DenoiserModel<T> {
    pub fn oracle(task: TaskKind, n: usize) -> Result<Self> {
        Self::from_parts(Architecture::oracle(task, n), Vec::new())
    }

    /// All parameters zero. Every learned variant then emits zero logits.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let len = arch.param_count();
        Ok(Self { arch, params: vec![T::zero(); len] })
    }

    /// Glorot-initialised trunks with zero output heads, so the initial
    /// stagewise distributions are uniform.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        match model.arch.variant {
            Variant::Oracle | Variant::TabularCgpl => {}
            Variant::MlpCgpl => mlp::Layout::new(&model.arch).init(&mut model.params, rng),
            Variant::MlpPointerCgpl => pointer::Layout::new(&model.arch).init(&mut model.params, rng),
        }
        Ok(model)
    }

    pub fn from_parts(arch: Architecture, params: Vec<T>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::Model(format!(
                "{} expects {} parameters, got {}",
                arch.variant.name(),
                arch.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameter".into()));
        }
        Ok(Self { arch, params })
    }

    #[inline]
    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    #[inline]
    pub fn variant(&self) -> Variant {
        self.arch.variant
    }

    #[inline]
    pub fn params(&self) -> &[T] {
        &self.params
    }

    #[inline]
    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn check_observation(&self, obs: &Observation<'_, T>) -> Result<()> {
        if obs.n() != self.arch.n {
            return Err(Error::SizeMismatch { expected: self.arch.n, got: obs.n() });
        }
        if obs.feature_dim != self.arch.feature_dim {
            return Err(Error::SizeMismatch { expected: self.arch.feature_dim, got: obs.feature_dim });
        }
        Ok(())
    }

    /// Fixes `(X_t, t)` and precomputes whatever is prefix-independent.
    pub fn bind<'a>(&'a self, obs: Observation<'a, T>, t: T) -> Result<BoundDenoiser<'a, T>> {
        self.check_observation(&obs)?;
        let state = match self.arch.variant {
            Variant::Oracle => BoundState::Oracle { truth: oracle_sequence(self.arch.task, &obs)? },
            Variant::TabularCgpl => {
                BoundState::Static(tabular::Layout::new(&self.arch).score_matrix(&self.params, &obs, t))
            }
            Variant::MlpCgpl => BoundState::Mlp(mlp::Context::new(&obs, t)),
            Variant::MlpPointerCgpl => {
                BoundState::Pointer(pointer::Layout::new(&self.arch).encode(&self.params, &obs, t))
            }
        };
        Ok(BoundDenoiser { model: self, obs, t, state })
    }

    /// Logits over original items for stage `prefix.len()`.
    pub fn stage_logits(&self, obs: &Observation<'_, T>, prefix: &[usize], t: T) -> Result<Vec<T>> {
        self.bind(*obs, t)?.stage_logits(prefix)
    }

    /// `-log p_θ(target | X_t, t)` under teacher forcing, plus its gradient
    /// with respect to the parameters when `with_grad` is set.
    pub fn nll(&self, obs: &Observation<'_, T>, t: T, target: &Permutation, with_grad: bool) -> Result<(T, Option<Vec<T>>)> {
        self.check_observation(obs)?;
        if target.len() != self.arch.n {
            return Err(Error::SizeMismatch { expected: self.arch.n, got: target.len() });
        }
        let seq = target.to_sequence();
        let mut grad = with_grad.then(|| vec![T::zero(); self.params.len()]);
        let loss = match self.arch.variant {
            Variant::Oracle => {
                if with_grad {
                    return Err(Error::Model("the oracle has no parameters to differentiate".into()));
                }
                let bound = self.bind(*obs, t)?;
                -crate::distributions::scorer_log_prob(&bound, target)?
            }
            Variant::TabularCgpl => {
                tabular::Layout::new(&self.arch).nll(&self.params, obs, t, &seq, grad.as_deref_mut())
            }
            Variant::MlpCgpl => mlp::Layout::new(&self.arch).nll(&self.params, obs, t, &seq, grad.as_deref_mut()),
            Variant::MlpPointerCgpl => {
                pointer::Layout::new(&self.arch).nll(&self.params, obs, t, &seq, grad.as_deref_mut())
            }
        };
        Ok((loss, grad))
    }
}

fn oracle_sequence<T: Real>(task: Option<TaskKind>, obs: &Observation<'_, T>) -> Result<Vec<usize>> {
    match task {
        Some(TaskKind::Sorting) => {
            let values: Vec<T> = (0..obs.n()).map(|k| obs.item(k)[0]).collect();
            Ok(rank_of_coordinates(&values)?.to_sequence())
        }
        Some(TaskKind::Tsp) => {
            let points: Vec<[T; 2]> = (0..obs.n()).map(|k| [obs.item(k)[0], obs.item(k)[1]]).collect();
            let (tour, _) = exact_tsp(&points)?;
            Ok(tour.ranks().iter().map(|c| c - 1).collect())
        }
        None => Err(Error::Model("oracle without a task".into())),
    }
}

enum BoundState<T> {
    Oracle { truth: Vec<usize> },
    Static(ScoreMatrix<T>),
    Mlp(mlp::Context<T>),
    Pointer(pointer::Encoded<T>),
}

/// A model bound to one `(X_t, t)`; implements [`StagewiseScorer`].
pub struct BoundDenoiser<'a, T> {
    model: &'a DenoiserModel<T>,
    obs: Observation<'a, T>,
    t: T,
    state: BoundState<T>,
}

impl<T: Real> BoundDenoiser<'_, T> {
    pub fn t(&self) -> T {
        self.t
    }
}

impl<T: Real> StagewiseScorer<T> for BoundDenoiser<'_, T> {
    fn n_items(&self) -> usize {
        self.obs.n()
    }

    fn stage_logits(&self, prefix: &[usize]) -> Result<Vec<T>> {
        let n = self.obs.n();
        if prefix.len() >= n {
            return Err(Error::Model(format!("stage {} out of range for n = {n}", prefix.len())));
        }
        match &self.state {
            BoundState::Oracle { truth } => {
                let mut taken = vec![false; n];
                prefix.iter().for_each(|&k| taken[k] = true);
                let next = truth.iter().copied().find(|&k| !taken[k]).expect("prefix shorter than n");
                let mut logits = vec![T::zero(); n];
                logits[next] = T::lit(ORACLE_LOGIT);
                Ok(logits)
            }
            BoundState::Static(m) => Ok(m.column(prefix.len())),
            BoundState::Mlp(ctx) => {
                Ok(mlp::Layout::new(&self.model.arch).stage_logits(&self.model.params, &self.obs, ctx, prefix))
            }
            BoundState::Pointer(enc) => {
                Ok(pointer::Layout::new(&self.model.arch).stage_logits(&self.model.params, enc, prefix))
            }
        }
    }

    fn static_scores(&self) -> Option<ScoreMatrix<T>> {
        match &self.state {
            BoundState::Static(m) => Some(m.clone()),
            _ => None,
        }
    }
}

/// Softmax cross-entropy gradient for one stage: `p − onehot(target)` on the
/// feasible items, zero elsewhere. Returns the stage loss.
pub(crate) fn stage_xent<T: Real>(logits: &[T], taken: &[bool], target: usize, dlogits: &mut [T]) -> T {
    let logp = masked_log_softmax(logits, taken);
    for (k, g) in dlogits.iter_mut().enumerate() {
        *g = if taken[k] {
            T::zero()
        } else {
            logp[k].exp() - if k == target { T::one() } else { T::zero() }
        };
    }
    -logp[target]
}
