//! Self-checks of the bridge kernels that can run outside the test harness.
//!
//! Each check reports a measured statistic and the threshold it must stay under.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{bridge_mean_var, joint_covariance, sample_reverse_step, ReverseKernelQuery};
use crate::softrank::{reflect, sample_forward_marginal, SoftRankVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationSettings {
    /// Noise scale for the Monte-Carlo checks. Keep it small so reflection stays inactive.
    pub eta: f64,
    pub draws: usize,
    pub identity_trials: usize,
    pub seed: u64,
}

impl ValidationSettings {
    pub fn new(eta: f64, seed: u64) -> Self {
        Self { eta, draws: 100_000, identity_trials: 1000, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta must be positive and finite, got {}", self.eta)));
        }
        if self.draws < 100 || self.identity_trials == 0 {
            return Err(Error::Config("need at least 100 draws and one identity trial".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCheck {
    pub name: &'static str,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
}

impl KernelCheck {
    fn below(name: &'static str, statistic: f64, threshold: f64) -> Self {
        Self { name, passed: statistic.is_finite() && statistic < threshold, statistic, threshold }
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn bounce(mut x: f64) -> f64 {
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > 1.0 {
            x = 2.0 - x;
        } else {
            return x;
        }
    }
}

fn sv(xs: &[f64]) -> Result<SoftRankVector<f64>> {
    SoftRankVector::new(xs.to_vec())
}

/// Runs every kernel check with its own derived random stream.
pub fn validate_kernels(settings: &ValidationSettings) -> Result<Vec<KernelCheck>> {
    settings.validate()?;
    let rng = |stream: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(settings.seed);
        r.set_stream(stream);
        r
    };
    let mut checks = identity_checks(settings.identity_trials, &mut rng(1))?;
    checks.extend(reverse_moment_checks(settings.eta, settings.draws, &mut rng(2))?);
    checks.extend(marginal_checks(settings.eta, settings.draws, &mut rng(3))?);
    checks.extend(chapman_kolmogorov_checks(settings.eta, settings.draws, &mut rng(4))?);
    checks.push(reflection_check(10_000, &mut rng(5))?);
    Ok(checks)
}

fn identity_checks(trials: usize, rng: &mut ChaCha8Rng) -> Result<Vec<KernelCheck>> {
    let (mut ratio_err, mut var_err, mut oracle_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..trials {
        let t: f64 = rng.random_range(0.02..0.98);
        let s: f64 = rng.random_range(0.01..t);
        let eta: f64 = rng.random_range(0.05..2.0);
        let jc = joint_covariance(s, t, eta)?;
        ratio_err = ratio_err.max((jc.c_st / jc.v_t - s / t).abs());
        let cond = jc.v_s - jc.c_st * jc.c_st / jc.v_t;
        var_err = var_err.max((cond - eta * eta * s * (t - s) / t).abs());

        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..3).map(|_| rng.random()).collect() };
        let (zt, z0, z1) = (sv(&draw(rng))?, sv(&draw(rng))?, sv(&draw(rng))?);
        let g = bridge_mean_var(&ReverseKernelQuery { s, t, z_t: &zt, z0_hat: &z0, z1: &z1, eta })?;
        for i in 0..3 {
            let (a, b) = (z0.as_slice()[i], z1.as_slice()[i]);
            let (mu_s, mu_t) = ((1.0 - s) * a + s * b, (1.0 - t) * a + t * b);
            let generic = mu_s + jc.c_st / jc.v_t * (zt.as_slice()[i] - mu_t);
            oracle_err = oracle_err.max((g.mean[i] - generic).abs());
        }
        oracle_err = oracle_err.max((g.var - cond).abs());
    }
    Ok(vec![
        KernelCheck::below("covariance_ratio_identity", ratio_err, 1e-12),
        KernelCheck::below("conditional_variance_identity", var_err, 1e-12),
        KernelCheck::below("gaussian_conditioning_oracle", oracle_err, 1e-12),
    ])
}

/// Largest |mean z-score| and |variance ratio − 1| over coordinates.
fn moment_stats(cols: &[Vec<f64>], means: &[f64], var: f64) -> (f64, f64) {
    let (mut z, mut r) = (0.0f64, 0.0f64);
    for (col, &mu) in cols.iter().zip(means) {
        let (m, v) = mean_var(col);
        z = z.max((m - mu).abs() / (var / col.len() as f64).sqrt());
        r = r.max((v / var - 1.0).abs());
    }
    (z, r)
}

fn reverse_moment_checks(eta: f64, draws: usize, rng: &mut ChaCha8Rng) -> Result<Vec<KernelCheck>> {
    let (s, t) = (0.3, 0.7);
    let (zt, z0, z1) = (sv(&[0.5, 0.45])?, sv(&[0.4, 0.6])?, sv(&[0.55, 0.5])?);
    let q = ReverseKernelQuery { s, t, z_t: &zt, z0_hat: &z0, z1: &z1, eta };
    let g = bridge_mean_var(&q)?;
    let mut cols: Vec<Vec<f64>> = (0..2).map(|_| Vec::with_capacity(draws)).collect();
    for _ in 0..draws {
        let z = sample_reverse_step(&q, rng)?;
        for (c, &x) in cols.iter_mut().zip(z.as_slice()) {
            c.push(x);
        }
    }
    let (z, r) = moment_stats(&cols, &g.mean, g.var);
    Ok(vec![
        KernelCheck::below("reverse_kernel_mean_zscore", z, 3.0),
        KernelCheck::below("reverse_kernel_variance_ratio_error", r, 0.1),
    ])
}

fn marginal_checks(eta: f64, draws: usize, rng: &mut ChaCha8Rng) -> Result<Vec<KernelCheck>> {
    let (s, t) = (0.25, 0.6);
    let (z0, z1) = (sv(&[0.3, 0.7])?, sv(&[0.6, 0.4])?);
    let mut cols: Vec<Vec<f64>> = (0..2).map(|_| Vec::with_capacity(draws)).collect();
    for _ in 0..draws {
        let zt = sample_forward_marginal(&z0, &z1, t, eta, rng)?;
        let zs = sample_reverse_step(&ReverseKernelQuery { s, t, z_t: &zt, z0_hat: &z0, z1: &z1, eta }, rng)?;
        for (c, &x) in cols.iter_mut().zip(zs.as_slice()) {
            c.push(x);
        }
    }
    let means: Vec<f64> =
        z0.as_slice().iter().zip(z1.as_slice()).map(|(a, b)| (1.0 - s) * a + s * b).collect();
    let (z, r) = moment_stats(&cols, &means, eta * eta * s * (1.0 - s));
    Ok(vec![
        KernelCheck::below("forward_reverse_marginal_mean_zscore", z, 3.0),
        KernelCheck::below("forward_reverse_marginal_variance_ratio_error", r, 0.1),
    ])
}

fn chapman_kolmogorov_checks(eta: f64, draws: usize, rng: &mut ChaCha8Rng) -> Result<Vec<KernelCheck>> {
    let (s, u, t) = (0.2, 0.45, 0.8);
    let (zt, z0, z1) = (sv(&[0.5, 0.5])?, sv(&[0.35, 0.65])?, sv(&[0.6, 0.45])?);
    let direct = ReverseKernelQuery { s, t, z_t: &zt, z0_hat: &z0, z1: &z1, eta };
    let (mut one, mut two) = (Vec::with_capacity(draws), Vec::with_capacity(draws));
    for _ in 0..draws {
        one.push(sample_reverse_step(&direct, rng)?.as_slice()[0]);
        let zu = sample_reverse_step(&ReverseKernelQuery { s: u, ..direct }, rng)?;
        two.push(sample_reverse_step(&ReverseKernelQuery { s, t: u, z_t: &zu, ..direct }, rng)?.as_slice()[0]);
    }
    let ((m1, v1), (m2, v2)) = (mean_var(&one), mean_var(&two));
    let z = (m1 - m2).abs() / ((v1 + v2) / draws as f64).sqrt();
    Ok(vec![
        KernelCheck::below("chapman_kolmogorov_mean_zscore", z, 3.0),
        KernelCheck::below("chapman_kolmogorov_variance_ratio_error", (v1 / v2 - 1.0).abs(), 0.1),
    ])
}

fn reflection_check(points: usize, rng: &mut ChaCha8Rng) -> Result<KernelCheck> {
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x: f64 = rng.random_range(-10.0..10.0);
        worst = worst.max((reflect(x)? - bounce(x)).abs());
    }
    Ok(KernelCheck::below("reflection_vs_bounce", worst, 1e-12))
}
