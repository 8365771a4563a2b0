//! Plackett–Luce family over S_n: PL, GPL (static per-stage scores), cGPL
//! (prefix-conditioned scores) and the bi-affine pointer head.
//!
//! Stages are read in sequence form: stage `i` picks the item that occupies
//! output position `i`. Public entry points that take a [`Permutation`]
//! expect rank form and invert it on the way in.

use rand::Rng;

use crate::error::{Error, Result};
use crate::permutation::{enumerate_all, Permutation};
use crate::scalar::{log_sum_exp, Real};

/// Additive stand-in for `-∞` on infeasible items.
pub fn mask_value<T: Real>() -> T {
    T::lit(-1e30)
}

/// Item × stage logits, `scores[k][i] = s_{k,i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> ScoreMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    /// `rows[k][i]` is the score of item `k` at stage `i`.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InvalidSize(format!("score matrix needs n >= 2, got {n}")));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::SizeMismatch { expected: n, got: row.len() });
            }
            data.extend(row);
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("score {bad}")));
        }
        Ok(Self { n, data })
    }

    /// PL as a GPL: the same item scores in every column.
    pub fn replicate(item_scores: &[T]) -> Result<Self> {
        Self::from_rows(item_scores.iter().map(|&s| vec![s; item_scores.len()]).collect())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, item: usize, stage: usize) -> T {
        self.data[item * self.n + stage]
    }

    #[inline]
    pub fn set(&mut self, item: usize, stage: usize, value: T) {
        self.data[item * self.n + stage] = value;
    }

    pub fn column(&self, stage: usize) -> Vec<T> {
        (0..self.n).map(|k| self.get(k, stage)).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
}

/// `{0, -∞}` mask derived from a sequence-form prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityMask {
    n: usize,
    /// `selected_at[k]`: stage at which item `k` is selected; `n` if never.
    selected_at: Vec<usize>,
}

impl FeasibilityMask {
    /// Mask for a full or partial sequence of distinct 0-based items.
    pub fn from_prefix(n: usize, prefix: &[usize]) -> Result<Self> {
        let mut selected_at = vec![n; n];
        for (stage, &item) in prefix.iter().enumerate() {
            if item >= n || selected_at[item] != n {
                return Err(Error::InvalidPermutation(format!("bad prefix item {item}")));
            }
            selected_at[item] = stage;
        }
        Ok(Self { n, selected_at })
    }

    /// Whether item `k` is still selectable at stage `i` (0-based).
    #[inline]
    pub fn is_feasible(&self, item: usize, stage: usize) -> bool {
        self.selected_at[item] >= stage
    }

    pub fn value<T: Real>(&self, item: usize, stage: usize) -> T {
        if self.is_feasible(item, stage) {
            T::zero()
        } else {
            mask_value()
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Masked log-softmax of one stage. `taken[k]` marks already selected items.
pub fn masked_log_softmax<T: Real>(logits: &[T], taken: &[bool]) -> Vec<T> {
    debug_assert!(taken.iter().any(|t| !t), "stage with an empty feasible set");
    let masked: Vec<T> =
        logits.iter().zip(taken).map(|(&s, &gone)| if gone { s + mask_value::<T>() } else { s }).collect();
    let lse = log_sum_exp(&masked);
    masked.into_iter().map(|s| s - lse).collect()
}

fn check_scores<T: Real>(scores: &ScoreMatrix<T>, sigma: &Permutation) -> Result<()> {
    if scores.n() != sigma.len() {
        return Err(Error::SizeMismatch { expected: scores.n(), got: sigma.len() });
    }
    Ok(())
}

/// Plackett–Luce log-probability, computed directly from the product form
/// `∏_i exp(s_{π(i)}) / Σ_{j >= i} exp(s_{π(j)})` with `π` the sequence form of `sigma`.
pub fn pl_log_prob<T: Real>(item_scores: &[T], sigma: &Permutation) -> Result<T> {
    if item_scores.len() != sigma.len() {
        return Err(Error::SizeMismatch { expected: sigma.len(), got: item_scores.len() });
    }
    let ordered: Vec<T> = sigma.to_sequence().into_iter().map(|k| item_scores[k]).collect();
    Ok((0..ordered.len()).map(|i| ordered[i] - log_sum_exp(&ordered[i..])).sum())
}

/// `Σ_i [ s̃_{π(i), i} − logsumexp_k s̃_{k, i} ]` for a rank-form permutation.
pub fn masked_stagewise_log_prob<T: Real>(scores: &ScoreMatrix<T>, sigma: &Permutation) -> Result<T> {
    check_scores(scores, sigma)?;
    Ok(sequence_log_prob(scores, &sigma.to_sequence()))
}

/// Stagewise log-likelihood of a sequence (0-based items in output order).
pub fn sequence_log_prob<T: Real>(scores: &ScoreMatrix<T>, seq: &[usize]) -> T {
    let n = scores.n();
    let mut taken = vec![false; n];
    let mut total = T::zero();
    for (stage, &item) in seq.iter().enumerate() {
        let logp = masked_log_softmax(&scores.column(stage), &taken);
        total = total + logp[item];
        taken[item] = true;
    }
    total
}

/// Log-likelihood and its gradient with respect to every score.
pub fn sequence_log_prob_grad<T: Real>(scores: &ScoreMatrix<T>, seq: &[usize]) -> (T, ScoreMatrix<T>) {
    let n = scores.n();
    let mut grad = ScoreMatrix::zeros(n);
    let mut taken = vec![false; n];
    let mut total = T::zero();
    for (stage, &item) in seq.iter().enumerate() {
        let logp = masked_log_softmax(&scores.column(stage), &taken);
        total = total + logp[item];
        for k in 0..n {
            if !taken[k] {
                let indicator = if k == item { T::one() } else { T::zero() };
                grad.set(k, stage, indicator - logp[k].exp());
            }
        }
        taken[item] = true;
    }
    (total, grad)
}

/// A source of stage logits for one `(X_t, t)` context.
///
/// GPL scorers can hand out the full matrix once through
/// [`StagewiseScorer::static_scores`]; cGPL scorers recompute each stage from
/// the instantiated prefix.
pub trait StagewiseScorer<T: Real> {
    fn n_items(&self) -> usize;

    /// Logits over all items for stage `prefix.len()`.
    fn stage_logits(&self, prefix: &[usize]) -> Result<Vec<T>>;

    /// The whole matrix, for prefix-agnostic scorers.
    fn static_scores(&self) -> Option<ScoreMatrix<T>> {
        None
    }
}

impl<T: Real> StagewiseScorer<T> for ScoreMatrix<T> {
    fn n_items(&self) -> usize {
        self.n
    }

    fn stage_logits(&self, prefix: &[usize]) -> Result<Vec<T>> {
        if prefix.len() >= self.n {
            return Err(Error::Model(format!("stage {} out of range", prefix.len())));
        }
        Ok(self.column(prefix.len()))
    }

    fn static_scores(&self) -> Option<ScoreMatrix<T>> {
        Some(self.clone())
    }
}

/// Draw an index from `exp(log_probs)`.
pub fn sample_categorical<T: Real, R: Rng + ?Sized>(log_probs: &[T], rng: &mut R) -> usize {
    let u = T::unit_uniform(rng);
    let mut acc = T::zero();
    let mut last_positive = 0;
    for (k, &lp) in log_probs.iter().enumerate() {
        let p = lp.exp();
        if p > T::zero() {
            last_positive = k;
        }
        acc = acc + p;
        if u < acc {
            return k;
        }
    }
    last_positive
}

/// Autoregressive sampling from a (c)GPL scorer.
///
/// Returns the sampled permutation in rank form together with the exact
/// log-probability of the realised sequence.
pub fn cgpl_sample<T: Real, S, R>(scorer: &S, rng: &mut R) -> Result<(Permutation, T)>
where
    S: StagewiseScorer<T> + ?Sized,
    R: Rng + ?Sized,
{
    let n = scorer.n_items();
    let cached = scorer.static_scores();
    let mut taken = vec![false; n];
    let mut seq = Vec::with_capacity(n);
    let mut log_prob = T::zero();
    for stage in 0..n {
        let logits = match &cached {
            Some(m) => m.column(stage),
            None => scorer.stage_logits(&seq)?,
        };
        if logits.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: logits.len() });
        }
        let logp = masked_log_softmax(&logits, &taken);
        let item = sample_categorical(&logp, rng);
        debug_assert!(!taken[item]);
        log_prob = log_prob + logp[item];
        taken[item] = true;
        seq.push(item);
    }
    Ok((Permutation::from_sequence(&seq)?, log_prob))
}

/// Log-likelihood of `sigma` (rank form) under a scorer, recomputing stage
/// logits along the permutation's own prefix.
pub fn scorer_log_prob<T: Real, S>(scorer: &S, sigma: &Permutation) -> Result<T>
where
    S: StagewiseScorer<T> + ?Sized,
{
    let n = scorer.n_items();
    if n != sigma.len() {
        return Err(Error::SizeMismatch { expected: n, got: sigma.len() });
    }
    let seq = sigma.to_sequence();
    let mut taken = vec![false; n];
    let mut total = T::zero();
    for stage in 0..n {
        let logits = scorer.stage_logits(&seq[..stage])?;
        let logp = masked_log_softmax(&logits, &taken);
        total = total + logp[seq[stage]];
        taken[seq[stage]] = true;
    }
    Ok(total)
}

/// Parameters of `s_k = dᵀ W e_k + uᵀ d + vᵀ e_k + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiaffineParams<T> {
    pub dim: usize,
    /// Row-major `dim × dim`.
    pub w: Vec<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub b: T,
}

impl<T: Real> BiaffineParams<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, w: vec![T::zero(); dim * dim], u: vec![T::zero(); dim], v: vec![T::zero(); dim], b: T::zero() }
    }

    fn check(&self) -> Result<()> {
        let d = self.dim;
        if self.w.len() != d * d || self.u.len() != d || self.v.len() != d {
            return Err(Error::SizeMismatch { expected: d, got: self.u.len().max(self.v.len()) });
        }
        Ok(())
    }
}

/// Pointer logits of every encoded item against one decoder state.
pub fn biaffine_scores<T: Real>(enc: &[Vec<T>], dec: &[T], params: &BiaffineParams<T>) -> Result<Vec<T>> {
    params.check()?;
    let d = params.dim;
    if dec.len() != d {
        return Err(Error::SizeMismatch { expected: d, got: dec.len() });
    }
    // dᵀW, then a dot product per item.
    let dw: Vec<T> = (0..d).map(|j| (0..d).map(|i| dec[i] * params.w[i * d + j]).sum()).collect();
    let offset: T = params.u.iter().zip(dec).map(|(&a, &b)| a * b).sum::<T>() + params.b;
    enc.iter()
        .map(|e| {
            if e.len() != d {
                return Err(Error::SizeMismatch { expected: d, got: e.len() });
            }
            let bilinear: T = dw.iter().zip(e).map(|(&a, &b)| a * b).sum();
            let linear: T = params.v.iter().zip(e).map(|(&a, &b)| a * b).sum();
            Ok(bilinear + linear + offset)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GplFit<T> {
    pub scores: ScoreMatrix<T>,
    pub total_variation: T,
    pub iterations: usize,
}

pub const FIT_LEARNING_RATE: f64 = 0.5;
pub const FIT_MAX_ITERATIONS: usize = 10_000;
pub const FIT_TV_TOLERANCE: f64 = 1e-3;

/// Exact distribution of a static score matrix over S_n, indexed by
/// [`Permutation::lex_index`].
pub fn gpl_probability_table<T: Real>(scores: &ScoreMatrix<T>) -> Result<Vec<T>> {
    enumerate_all(scores.n())?.map(|sigma| masked_stagewise_log_prob(scores, &sigma).map(T::exp)).collect()
}

/// Gradient descent on the cross-entropy `−Σ_σ target(σ) log p(σ)` until the
/// total variation to `target` drops below [`FIT_TV_TOLERANCE`].
///
/// `target` is indexed by [`Permutation::lex_index`] and must sum to one.
pub fn fit_gpl_to_target<T: Real>(n: usize, target: &[T]) -> Result<GplFit<T>> {
    if n > 4 {
        return Err(Error::TooLarge(format!("GPL fitting is limited to n <= 4, got {n}")));
    }
    let perms: Vec<Permutation> = enumerate_all(n)?.collect();
    if target.len() != perms.len() {
        return Err(Error::SizeMismatch { expected: perms.len(), got: target.len() });
    }
    if target.iter().any(|&p| !(p >= T::zero())) {
        return Err(Error::Domain("target has negative or NaN mass".into()));
    }
    let total: T = target.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::Domain(format!("target sums to {total}, not 1")));
    }
    let seqs: Vec<Vec<usize>> = perms.iter().map(Permutation::to_sequence).collect();
    let lr = T::lit(FIT_LEARNING_RATE);
    let mut scores = ScoreMatrix::<T>::zeros(n);
    let mut tv = T::infinity();
    for iteration in 0..=FIT_MAX_ITERATIONS {
        let mut grad = ScoreMatrix::zeros(n);
        let mut abs_diff = T::zero();
        for (seq, &p_target) in seqs.iter().zip(target) {
            let (logp, g) = sequence_log_prob_grad(&scores, seq);
            abs_diff = abs_diff + (logp.exp() - p_target).abs();
            if p_target > T::zero() {
                for (acc, &gi) in grad.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *acc = *acc + p_target * gi;
                }
            }
        }
        tv = abs_diff / T::lit(2.0);
        if tv < T::lit(FIT_TV_TOLERANCE) {
            return Ok(GplFit { scores, total_variation: tv, iterations: iteration });
        }
        // ascent on Σ target · log p
        for (s, &g) in scores.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *s = *s + lr * g;
        }
    }
    Err(Error::NotConverged { achieved_tv: tv.to_f64_lossy(), iterations: FIT_MAX_ITERATIONS })
}
