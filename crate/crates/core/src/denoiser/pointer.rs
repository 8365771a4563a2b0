//! Pointer-style cGPL: a per-item encoder, a prefix-conditioned decoder, and
//! a biaffine head `s_k = dᵀ W e_k + uᵀ d + vᵀ e_k + b`.
//!
//! Encoder: `e_k = tanh(W_e [x_k, pos(σ_t(k)), time] + b_e)`.
//! Decoder input per stage: mean of all `e`, sum of selected `e` over `n`,
//! the last and the first selected `e`, prefix length over `n`, time.

use rand::Rng;

use super::dense::{affine, glorot, tanh_affine_backward, tanh_in_place};
use super::{position_embedding, stage_xent, time_embedding, Architecture, Observation, POSITION_EMBED_DIM, TIME_EMBED_DIM};
use crate::scalar::Real;

pub(super) struct Layout {
    n: usize,
    f: usize,
    h: usize,
    d: usize,
    enc_in: usize,
    dec_in: usize,
}

struct Slices<'p, T> {
    we: &'p [T],
    be: &'p [T],
    w1: &'p [T],
    b1: &'p [T],
    w2: &'p [T],
    b2: &'p [T],
    w: &'p [T],
    u: &'p [T],
    v: &'p [T],
    b: T,
}

/// Encoder output for one observation.
pub(super) struct Encoded<T> {
    inputs: Vec<Vec<T>>,
    e: Vec<Vec<T>>,
    mean: Vec<T>,
    time: [T; TIME_EMBED_DIM],
}

struct Decoded<T> {
    x: Vec<T>,
    h1: Vec<T>,
    dvec: Vec<T>,
}

impl Layout {
    pub(super) fn new(arch: &Architecture) -> Self {
        let (f, d) = (arch.feature_dim, arch.embed);
        Self {
            n: arch.n,
            f,
            h: arch.hidden,
            d,
            enc_in: f + POSITION_EMBED_DIM + TIME_EMBED_DIM,
            dec_in: 4 * d + 1 + TIME_EMBED_DIM,
        }
    }

    fn sizes(&self) -> [usize; 10] {
        let (h, d) = (self.h, self.d);
        [d * self.enc_in, d, h * self.dec_in, h, d * h, d, d * d, d, d, 1]
    }

    pub(super) fn len(&self) -> usize {
        self.sizes().iter().sum()
    }

    fn offsets(&self) -> [usize; 11] {
        let mut out = [0; 11];
        for (i, s) in self.sizes().iter().enumerate() {
            out[i + 1] = out[i] + s;
        }
        out
    }

    fn split<'p, T: Real>(&self, p: &'p [T]) -> Slices<'p, T> {
        let o = self.offsets();
        let s = |i: usize| &p[o[i]..o[i + 1]];
        Slices { we: s(0), be: s(1), w1: s(2), b1: s(3), w2: s(4), b2: s(5), w: s(6), u: s(7), v: s(8), b: p[o[9]] }
    }

    pub(super) fn init<T: Real, R: Rng + ?Sized>(&self, params: &mut [T], rng: &mut R) {
        let o = self.offsets();
        glorot(&mut params[o[0]..o[1]], self.enc_in, self.d, rng);
        glorot(&mut params[o[2]..o[3]], self.dec_in, self.h, rng);
        glorot(&mut params[o[4]..o[5]], self.h, self.d, rng);
    }

    pub(super) fn encode<T: Real>(&self, params: &[T], obs: &Observation<'_, T>, t: T) -> Encoded<T> {
        let p = self.split(params);
        let time = time_embedding(t);
        let denom = T::from_usize_lossy(self.n - 1);
        let mut inputs = Vec::with_capacity(self.n);
        let mut e = Vec::with_capacity(self.n);
        let mut mean = vec![T::zero(); self.d];
        for k in 0..self.n {
            let mut x = Vec::with_capacity(self.enc_in);
            x.extend_from_slice(obs.item(k));
            debug_assert_eq!(x.len(), self.f);
            x.extend_from_slice(&position_embedding(T::from_usize_lossy(obs.observed.position(k)) / denom));
            x.extend_from_slice(&time);
            let mut ek = vec![T::zero(); self.d];
            affine(p.we, p.be, &x, &mut ek);
            tanh_in_place(&mut ek);
            for (m, &v) in mean.iter_mut().zip(&ek) {
                *m = *m + v / T::from_usize_lossy(self.n);
            }
            inputs.push(x);
            e.push(ek);
        }
        Encoded { inputs, e, mean, time }
    }

    fn decode<T: Real>(&self, p: &Slices<'_, T>, enc: &Encoded<T>, prefix: &[usize]) -> Decoded<T> {
        let (d, nf) = (self.d, T::from_usize_lossy(self.n));
        let mut x = Vec::with_capacity(self.dec_in);
        x.extend_from_slice(&enc.mean);
        let mut sel = vec![T::zero(); d];
        for &k in prefix {
            for (s, &v) in sel.iter_mut().zip(&enc.e[k]) {
                *s = *s + v / nf;
            }
        }
        x.extend_from_slice(&sel);
        for pick in [prefix.last(), prefix.first()] {
            match pick {
                Some(&k) => x.extend_from_slice(&enc.e[k]),
                None => x.extend(std::iter::repeat_n(T::zero(), d)),
            }
        }
        x.push(T::from_usize_lossy(prefix.len()) / nf);
        x.extend_from_slice(&enc.time);
        let mut h1 = vec![T::zero(); self.h];
        affine(p.w1, p.b1, &x, &mut h1);
        tanh_in_place(&mut h1);
        let mut dvec = vec![T::zero(); d];
        affine(p.w2, p.b2, &h1, &mut dvec);
        tanh_in_place(&mut dvec);
        Decoded { x, h1, dvec }
    }

    fn head<T: Real>(&self, p: &Slices<'_, T>, enc: &Encoded<T>, dvec: &[T]) -> Vec<T> {
        let d = self.d;
        // q = Wᵀ d + v, so s_k = q · e_k + uᵀ d + b.
        let mut q = p.v.to_vec();
        for (r, &dr) in dvec.iter().enumerate() {
            for (qc, &wrc) in q.iter_mut().zip(&p.w[r * d..(r + 1) * d]) {
                *qc = *qc + dr * wrc;
            }
        }
        let shift = p.u.iter().zip(dvec).map(|(&a, &b)| a * b).sum::<T>() + p.b;
        enc.e.iter().map(|ek| q.iter().zip(ek).map(|(&a, &b)| a * b).sum::<T>() + shift).collect()
    }

    pub(super) fn stage_logits<T: Real>(&self, params: &[T], enc: &Encoded<T>, prefix: &[usize]) -> Vec<T> {
        let p = self.split(params);
        let dec = self.decode(&p, enc, prefix);
        self.head(&p, enc, &dec.dvec)
    }

    pub(super) fn nll<T: Real>(
        &self,
        params: &[T],
        obs: &Observation<'_, T>,
        t: T,
        seq: &[usize],
        grad: Option<&mut [T]>,
    ) -> T {
        let p = self.split(params);
        let enc = self.encode(params, obs, t);
        let (n, d) = (self.n, self.d);
        let nf = T::from_usize_lossy(n);
        let o = self.offsets();
        let mut taken = vec![false; n];
        let mut loss = T::zero();
        let mut g = vec![T::zero(); n];
        let mut grad = grad;
        let mut de = vec![vec![T::zero(); d]; n];
        for (stage, &target) in seq.iter().enumerate() {
            let prefix = &seq[..stage];
            let dec = self.decode(&p, &enc, prefix);
            let logits = self.head(&p, &enc, &dec.dvec);
            loss = loss + stage_xent(&logits, &taken, target, &mut g);
            taken[target] = true;
            let Some(grad) = grad.as_deref_mut() else { continue };

            // Head.
            let gsum: T = g.iter().copied().sum();
            let mut ge = vec![T::zero(); d];
            for (k, &gk) in g.iter().enumerate() {
                for (a, &b) in ge.iter_mut().zip(&enc.e[k]) {
                    *a = *a + gk * b;
                }
            }
            let mut dd = vec![T::zero(); d];
            for r in 0..d {
                let row = &p.w[r * d..(r + 1) * d];
                dd[r] = row.iter().zip(&ge).map(|(&a, &b)| a * b).sum::<T>() + p.u[r] * gsum;
                for c in 0..d {
                    grad[o[6] + r * d + c] = grad[o[6] + r * d + c] + dec.dvec[r] * ge[c];
                }
                grad[o[7] + r] = grad[o[7] + r] + dec.dvec[r] * gsum;
                grad[o[8] + r] = grad[o[8] + r] + ge[r];
            }
            grad[o[9]] = grad[o[9]] + gsum;
            let mut q = p.v.to_vec();
            for (r, &dr) in dec.dvec.iter().enumerate() {
                for (qc, &wrc) in q.iter_mut().zip(&p.w[r * d..(r + 1) * d]) {
                    *qc = *qc + dr * wrc;
                }
            }
            for (k, &gk) in g.iter().enumerate() {
                for (a, &b) in de[k].iter_mut().zip(&q) {
                    *a = *a + gk * b;
                }
            }

            // Decoder.
            let (head, tail) = grad.split_at_mut(o[4]);
            let (gw2, rest) = tail.split_at_mut(o[5] - o[4]);
            let gb2 = &mut rest[..d];
            let (gw1, gb1) = head[o[2]..o[4]].split_at_mut(o[3] - o[2]);
            let mut dh1 = vec![T::zero(); self.h];
            tanh_affine_backward(p.w2, &dec.h1, &dec.dvec, &dd, gw2, gb2, Some(&mut dh1));
            let mut dx = vec![T::zero(); self.dec_in];
            tanh_affine_backward(p.w1, &dec.x, &dec.h1, &dh1, gw1, gb1, Some(&mut dx));

            // Decoder input back onto the embeddings.
            for ek in de.iter_mut() {
                for (a, &b) in ek.iter_mut().zip(&dx[..d]) {
                    *a = *a + b / nf;
                }
            }
            for &k in prefix {
                for (a, &b) in de[k].iter_mut().zip(&dx[d..2 * d]) {
                    *a = *a + b / nf;
                }
            }
            if let (Some(&last), Some(&first)) = (prefix.last(), prefix.first()) {
                for (a, &b) in de[last].iter_mut().zip(&dx[2 * d..3 * d]) {
                    *a = *a + b;
                }
                for (a, &b) in de[first].iter_mut().zip(&dx[3 * d..4 * d]) {
                    *a = *a + b;
                }
            }
        }

        if let Some(grad) = grad {
            let (gwe, rest) = grad[..o[2]].split_at_mut(o[1]);
            for ((x, e), d) in enc.inputs.iter().zip(&enc.e).zip(&de) {
                tanh_affine_backward(p.we, x, e, d, gwe, rest, None);
            }
        }
        loss
    }
}
