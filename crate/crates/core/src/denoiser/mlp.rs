//! Two-layer tanh MLP producing one cGPL stage at a time.
//!
//! Stage input: item features laid out in observed order, a multi-hot of the
//! already selected slots, the features of the last selected item, the
//! prefix length over `n`, and the time embedding. The head emits one logit
//! per observed slot, which is then mapped back onto items.

use rand::Rng;

use super::dense::{affine, affine_backward, glorot, tanh_affine_backward, tanh_in_place};
use super::{stage_xent, time_embedding, Architecture, Observation, TIME_EMBED_DIM};
use crate::scalar::Real;

pub(super) struct Layout {
    n: usize,
    f: usize,
    h: usize,
    in_dim: usize,
}

struct Slices<'p, T> {
    w1: &'p [T],
    b1: &'p [T],
    w2: &'p [T],
    b2: &'p [T],
    w3: &'p [T],
    b3: &'p [T],
}

/// Prefix-independent part of a bound MLP.
pub(super) struct Context<T> {
    /// `slots[j]` is the item observed at position `j`.
    slots: Vec<usize>,
    time: [T; TIME_EMBED_DIM],
}

impl<T: Real> Context<T> {
    pub(super) fn new(obs: &Observation<'_, T>, t: T) -> Self {
        Self { slots: obs.observed.to_sequence(), time: time_embedding(t) }
    }
}

struct Forward<T> {
    x: Vec<T>,
    h1: Vec<T>,
    h2: Vec<T>,
    out: Vec<T>,
}

impl Layout {
    pub(super) fn new(arch: &Architecture) -> Self {
        let (n, f) = (arch.n, arch.feature_dim);
        Self { n, f, h: arch.hidden, in_dim: n * f + n + f + 1 + TIME_EMBED_DIM }
    }

    fn sizes(&self) -> [usize; 6] {
        let (n, h, d) = (self.n, self.h, self.in_dim);
        [h * d, h, h * h, h, n * h, n]
    }

    pub(super) fn len(&self) -> usize {
        self.sizes().iter().sum()
    }

    fn split<'p, T>(&self, p: &'p [T]) -> Slices<'p, T> {
        let [a, b, c, d, e, _] = self.sizes();
        let (w1, rest) = p.split_at(a);
        let (b1, rest) = rest.split_at(b);
        let (w2, rest) = rest.split_at(c);
        let (b2, rest) = rest.split_at(d);
        let (w3, b3) = rest.split_at(e);
        Slices { w1, b1, w2, b2, w3, b3 }
    }

    pub(super) fn init<T: Real, R: Rng + ?Sized>(&self, params: &mut [T], rng: &mut R) {
        let [a, b, c, ..] = self.sizes();
        glorot(&mut params[..a], self.in_dim, self.h, rng);
        glorot(&mut params[a + b..a + b + c], self.h, self.h, rng);
    }

    fn input<T: Real>(&self, obs: &Observation<'_, T>, ctx: &Context<T>, prefix: &[usize]) -> Vec<T> {
        let (n, f) = (self.n, self.f);
        let mut x = Vec::with_capacity(self.in_dim);
        for &k in &ctx.slots {
            x.extend_from_slice(obs.item(k));
        }
        let mut selected = vec![T::zero(); n];
        for &k in prefix {
            selected[obs.observed.position(k)] = T::one();
        }
        x.extend_from_slice(&selected);
        match prefix.last() {
            Some(&k) => x.extend_from_slice(obs.item(k)),
            None => x.extend(std::iter::repeat_n(T::zero(), f)),
        }
        x.push(T::from_usize_lossy(prefix.len()) / T::from_usize_lossy(n));
        x.extend_from_slice(&ctx.time);
        x
    }

    fn forward<T: Real>(&self, p: &Slices<'_, T>, x: Vec<T>) -> Forward<T> {
        let mut h1 = vec![T::zero(); self.h];
        affine(p.w1, p.b1, &x, &mut h1);
        tanh_in_place(&mut h1);
        let mut h2 = vec![T::zero(); self.h];
        affine(p.w2, p.b2, &h1, &mut h2);
        tanh_in_place(&mut h2);
        let mut out = vec![T::zero(); self.n];
        affine(p.w3, p.b3, &h2, &mut out);
        Forward { x, h1, h2, out }
    }

    fn to_items<T: Real>(&self, ctx: &Context<T>, out: &[T]) -> Vec<T> {
        let mut logits = vec![T::zero(); self.n];
        for (j, &k) in ctx.slots.iter().enumerate() {
            logits[k] = out[j];
        }
        logits
    }

    pub(super) fn stage_logits<T: Real>(
        &self,
        params: &[T],
        obs: &Observation<'_, T>,
        ctx: &Context<T>,
        prefix: &[usize],
    ) -> Vec<T> {
        let fwd = self.forward(&self.split(params), self.input(obs, ctx, prefix));
        self.to_items(ctx, &fwd.out)
    }

    pub(super) fn nll<T: Real>(
        &self,
        params: &[T],
        obs: &Observation<'_, T>,
        t: T,
        seq: &[usize],
        mut grad: Option<&mut [T]>,
    ) -> T {
        let ctx = Context::new(obs, t);
        let p = self.split(params);
        let n = self.n;
        let mut taken = vec![false; n];
        let mut loss = T::zero();
        let mut d_items = vec![T::zero(); n];
        for (stage, &target) in seq.iter().enumerate() {
            let fwd = self.forward(&p, self.input(obs, &ctx, &seq[..stage]));
            let logits = self.to_items(&ctx, &fwd.out);
            loss = loss + stage_xent(&logits, &taken, target, &mut d_items);
            taken[target] = true;
            if let Some(g) = grad.as_deref_mut() {
                let d_out: Vec<T> = ctx.slots.iter().map(|&k| d_items[k]).collect();
                self.backward(&p, &fwd, &d_out, g);
            }
        }
        loss
    }

    fn backward<T: Real>(&self, p: &Slices<'_, T>, fwd: &Forward<T>, d_out: &[T], grad: &mut [T]) {
        let [a, b, c, d, e, _] = self.sizes();
        let (gw1, rest) = grad.split_at_mut(a);
        let (gb1, rest) = rest.split_at_mut(b);
        let (gw2, rest) = rest.split_at_mut(c);
        let (gb2, rest) = rest.split_at_mut(d);
        let (gw3, gb3) = rest.split_at_mut(e);
        let mut dh2 = vec![T::zero(); self.h];
        affine_backward(p.w3, &fwd.h2, d_out, gw3, gb3, Some(&mut dh2));
        let mut dh1 = vec![T::zero(); self.h];
        tanh_affine_backward(p.w2, &fwd.h1, &fwd.h2, &dh2, gw2, gb2, Some(&mut dh1));
        tanh_affine_backward(p.w1, &fwd.x, &fwd.h1, &dh1, gw1, gb1, None);
    }
}
