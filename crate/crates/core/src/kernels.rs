//! Closed-form Gaussian conditionals of the unreflected Brownian bridge.
//!
//! For `0 < s < t <= 1` and `μ(u) = (1 - u) ẑ_0 + u z_1`,
//!
//! ```text
//! z_s | z_t, ẑ_0, z_1 ~ N( μ(s) + (s/t)(z_t - μ(t)),  η² s (t - s) / t )
//! ```
//!
//! coordinate-wise. Reflection is applied to the draw afterwards.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::softrank::SoftRankVector;

#[derive(Debug, Clone, Copy)]
pub struct ReverseKernelQuery<'a, T> {
    pub s: T,
    pub t: T,
    pub z_t: &'a SoftRankVector<T>,
    pub z0_hat: &'a SoftRankVector<T>,
    pub z1: &'a SoftRankVector<T>,
    pub eta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional<T> {
    pub mean: Vec<T>,
    /// Shared by every coordinate.
    pub var: T,
}

impl<'a, T: Real> ReverseKernelQuery<'a, T> {
    fn validate(&self) -> Result<()> {
        let n = self.z_t.len();
        for v in [self.z0_hat, self.z1] {
            if v.len() != n {
                return Err(Error::SizeMismatch { expected: n, got: v.len() });
            }
        }
        if !(self.eta > T::zero()) {
            return Err(Error::Domain(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.s >= T::zero() && self.s < self.t && self.t <= T::one()) {
            return Err(Error::Domain(format!(
                "reverse kernel needs 0 <= s < t <= 1, got s = {}, t = {}",
                self.s, self.t
            )));
        }
        Ok(())
    }
}

/// Conditional mean and variance of `z_s` given `(z_t, ẑ_0, z_1)`.
/// `s = 0` returns `(ẑ_0, 0)` exactly.
pub fn bridge_mean_var<T: Real>(q: &ReverseKernelQuery<'_, T>) -> Result<GaussianConditional<T>> {
    q.validate()?;
    if q.s == T::zero() {
        return Ok(GaussianConditional { mean: q.z0_hat.as_slice().to_vec(), var: T::zero() });
    }
    let (s, t) = (q.s, q.t);
    let ratio = s / t;
    let mean = q
        .z_t
        .as_slice()
        .iter()
        .zip(q.z0_hat.as_slice())
        .zip(q.z1.as_slice())
        .map(|((&zt, &z0), &z1)| {
            let mu_s = (T::one() - s) * z0 + s * z1;
            let mu_t = (T::one() - t) * z0 + t * z1;
            mu_s + ratio * (zt - mu_t)
        })
        .collect();
    let raw = q.eta * q.eta * s * (t - s) / t;
    debug_assert!(raw >= -T::lit(1e-14) * q.eta * q.eta, "negative kernel variance {raw}");
    Ok(GaussianConditional { mean, var: raw.max(T::zero()) })
}

/// Unreflected draw `μ(s) + (s/t)(z_t − μ(t)) + η √(s(t−s)/t) ε`.
pub fn sample_reverse_unconstrained<T: Real, R: Rng + ?Sized>(
    q: &ReverseKernelQuery<'_, T>,
    rng: &mut R,
) -> Result<Vec<T>> {
    let GaussianConditional { mean, var } = bridge_mean_var(q)?;
    if var == T::zero() {
        return Ok(mean);
    }
    let sd = var.sqrt();
    Ok(mean.into_iter().map(|m| m + sd * T::standard_normal(rng)).collect())
}

/// Reverse-kernel draw folded back into `[0, 1]^N`.
pub fn sample_reverse_step<T: Real, R: Rng + ?Sized>(
    q: &ReverseKernelQuery<'_, T>,
    rng: &mut R,
) -> Result<SoftRankVector<T>> {
    SoftRankVector::from_unconstrained(sample_reverse_unconstrained(q, rng)?)
}

/// Second moments of `(z_s, z_t)` under the bridge, `s < t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointCovariance<T> {
    pub v_s: T,
    pub v_t: T,
    pub c_st: T,
    /// `v_s v_t − c²`.
    pub det: T,
}

pub fn joint_covariance<T: Real>(s: T, t: T, eta: T) -> Result<JointCovariance<T>> {
    if !(s > T::zero() && s < t && t < T::one()) {
        return Err(Error::Domain(format!("joint covariance needs 0 < s < t < 1, got s = {s}, t = {t}")));
    }
    if !(eta > T::zero()) {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    let e2 = eta * eta;
    let v_s = e2 * s * (T::one() - s);
    let v_t = e2 * t * (T::one() - t);
    let c_st = e2 * s * (T::one() - t);
    Ok(JointCovariance { v_s, v_t, c_st, det: v_s * v_t - c_st * c_st })
}
