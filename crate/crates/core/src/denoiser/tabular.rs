//! One free GPL score matrix per `(time bucket, observed permutation)`.

use super::{Architecture, Observation};
use crate::distributions::{sequence_log_prob_grad, ScoreMatrix};
use crate::permutation::factorial;
use crate::scalar::Real;

pub(super) struct Layout {
    n: usize,
    buckets: usize,
    states: usize,
}

impl Layout {
    pub(super) fn new(arch: &Architecture) -> Self {
        let states = factorial(arch.n).expect("tabular n is validated");
        Self { n: arch.n, buckets: arch.time_buckets, states }
    }

    pub(super) fn len(&self) -> usize {
        self.buckets * self.states * self.n * self.n
    }

    /// Bucket `b` covers `(b/K, (b+1)/K]`; `t = 0` falls into bucket 0.
    pub(super) fn bucket<T: Real>(&self, t: T) -> usize {
        let k = self.buckets as f64;
        let raw = (t.to_f64_lossy() * k - 1e-9).ceil() as i64 - 1;
        raw.clamp(0, self.buckets as i64 - 1) as usize
    }

    fn offset<T: Real>(&self, obs: &Observation<'_, T>, t: T) -> usize {
        let block = self.n * self.n;
        (self.bucket(t) * self.states + obs.observed.lex_index()) * block
    }

    pub(super) fn score_matrix<T: Real>(&self, params: &[T], obs: &Observation<'_, T>, t: T) -> ScoreMatrix<T> {
        let off = self.offset(obs, t);
        let mut m = ScoreMatrix::zeros(self.n);
        m.as_mut_slice().copy_from_slice(&params[off..off + self.n * self.n]);
        m
    }

    pub(super) fn nll<T: Real>(
        &self,
        params: &[T],
        obs: &Observation<'_, T>,
        t: T,
        seq: &[usize],
        grad: Option<&mut [T]>,
    ) -> T {
        let m = self.score_matrix(params, obs, t);
        let (lp, g) = sequence_log_prob_grad(&m, seq);
        if let Some(grad) = grad {
            let off = self.offset(obs, t);
            for (d, &gi) in grad[off..off + self.n * self.n].iter_mut().zip(g.as_slice()) {
                *d = *d - gi;
            }
        }
        -lp
    }
}
