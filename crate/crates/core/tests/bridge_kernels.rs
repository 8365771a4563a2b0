use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softrank_core::kernels::{bridge_mean_var, joint_covariance, sample_reverse_step, ReverseKernelQuery};
use softrank_core::softrank::{
    reflect, sample_forward_marginal, sample_reference, simulate_forward_path, BridgeParams, Reference,
};
use softrank_core::SoftRankVector;

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

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn sv(xs: &[f64]) -> SoftRankVector<f64> {
    SoftRankVector::new(xs.to_vec()).unwrap()
}

#[test]
fn covariance_identities_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let t: f64 = rng.random_range(0.02..0.98);
        let s: f64 = rng.random_range(0.01..t);
        let eta: f64 = rng.random_range(0.05..2.0);
        if !(s > 0.0 && s < t) {
            continue;
        }
        let jc = joint_covariance(s, t, eta).unwrap();
        assert!((jc.c_st / jc.v_t - s / t).abs() < 1e-12);
        let cond = jc.v_s - jc.c_st * jc.c_st / jc.v_t;
        assert!((cond - eta * eta * s * (t - s) / t).abs() < 1e-12);

        let z: Vec<f64> = (0..3).map(|_| rng.random()).collect();
        let z0: Vec<f64> = (0..3).map(|_| rng.random()).collect();
        let z1: Vec<f64> = (0..3).map(|_| rng.random()).collect();
        let (z, z0, z1) = (sv(&z), sv(&z0), sv(&z1));
        let q = ReverseKernelQuery { s, t, z_t: &z, z0_hat: &z0, z1: &z1, eta };
        let g = bridge_mean_var(&q).unwrap();
        for i in 0..3 {
            let (a, b, zt) = (z0.as_slice()[i], z1.as_slice()[i], z.as_slice()[i]);
            let (mu_s, mu_t) = ((1.0 - s) * a + s * b, (1.0 - t) * a + t * b);
            let generic = mu_s + jc.c_st / jc.v_t * (zt - mu_t);
            assert!((g.mean[i] - generic).abs() < 1e-12);
        }
        assert!((g.var - cond).abs() < 1e-12);
    }
}

#[test]
fn reverse_draws_match_closed_form_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (s, t, eta) = (0.3, 0.7, 0.1);
    let (zt, z0, z1) = (sv(&[0.5, 0.45]), sv(&[0.4, 0.6]), sv(&[0.55, 0.5]));
    let q = ReverseKernelQuery { s, t, z_t: &zt, z0_hat: &z0, z1: &z1, eta };
    let g = bridge_mean_var(&q).unwrap();
    let draws = 100_000;
    let mut cols: Vec<Vec<f64>> = (0..2).map(|_| Vec::with_capacity(draws)).collect();
    for _ in 0..draws {
        let z = sample_reverse_step(&q, &mut rng).unwrap();
        for (c, &x) in cols.iter_mut().zip(z.as_slice()) {
            c.push(x);
        }
    }
    for (i, col) in cols.iter().enumerate() {
        let (m, v) = mean_var(col);
        let se = (g.var / draws as f64).sqrt();
        assert!((m - g.mean[i]).abs() < 3.0 * se, "coordinate {i}: mean {m} vs {}", g.mean[i]);
        assert!((v / g.var - 1.0).abs() < 0.1, "coordinate {i}: variance {v} vs {}", g.var);
    }
}

#[test]
fn reverse_kernel_preserves_forward_marginals() {
    // z_t from the forward marginal, then one reverse step, lands on the forward marginal at s.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (s, t, eta) = (0.25, 0.6, 0.1);
    let (z0, z1) = (sv(&[0.3, 0.7]), sv(&[0.6, 0.4]));
    let draws = 100_000;
    let mut xs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let zt = sample_forward_marginal(&z0, &z1, t, eta, &mut rng).unwrap();
        let q = ReverseKernelQuery { s, t, z_t: &zt, z0_hat: &z0, z1: &z1, eta };
        xs.push(sample_reverse_step(&q, &mut rng).unwrap().as_slice()[0]);
    }
    let (m, v) = mean_var(&xs);
    let (mean, var) = ((1.0 - s) * 0.3 + s * 0.6, eta * eta * s * (1.0 - s));
    assert!((m - mean).abs() < 3.0 * (var / draws as f64).sqrt());
    assert!((v / var - 1.0).abs() < 0.1);
}

#[test]
fn chapman_kolmogorov_two_steps_equal_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (s, u, t, eta) = (0.2, 0.45, 0.8, 0.1);
    let (zt, z0, z1) = (sv(&[0.5, 0.5]), sv(&[0.35, 0.65]), sv(&[0.6, 0.45]));
    let direct = ReverseKernelQuery { s, t, z_t: &zt, z0_hat: &z0, z1: &z1, eta };
    let draws = 100_000;
    let (mut one, mut two) = (Vec::with_capacity(draws), Vec::with_capacity(draws));
    for _ in 0..draws {
        one.push(sample_reverse_step(&direct, &mut rng).unwrap().as_slice()[0]);
        let zu = sample_reverse_step(&ReverseKernelQuery { s: u, ..direct }, &mut rng).unwrap();
        let q2 = ReverseKernelQuery { s, t: u, z_t: &zu, ..direct };
        two.push(sample_reverse_step(&q2, &mut rng).unwrap().as_slice()[0]);
    }
    let ((m1, v1), (m2, v2)) = (mean_var(&one), mean_var(&two));
    let se = ((v1 + v2) / draws as f64).sqrt();
    assert!((m1 - m2).abs() < 3.0 * se, "means {m1} vs {m2}");
    assert!((v1 / v2 - 1.0).abs() < 0.1, "variances {v1} vs {v2}");
}

#[test]
fn reflect_matches_bounce_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let x: f64 = rng.random_range(-10.0..10.0);
        assert!((reflect(x).unwrap() - bounce(x)).abs() < 1e-12, "x = {x}");
    }
    assert!(reflect(f64::NAN).is_err());
    assert!(reflect(f64::INFINITY).is_err());
}

#[test]
fn forward_path_agrees_with_marginal() {
    // Euler-Maruyama endpoint moments at an interior grid time vs the closed form.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = BridgeParams::uniform(0.1, 50, Reference::UniformUnitCube).unwrap();
    let (z0, z1) = (sv(&[0.4, 0.6]), sv(&[0.6, 0.4]));
    let k = 20;
    let t = params.time_grid()[k];
    let draws = 20_000;
    let xs: Vec<f64> =
        (0..draws).map(|_| simulate_forward_path(&z0, &z1, &params, &mut rng).unwrap()[k].as_slice()[0]).collect();
    let (m, v) = mean_var(&xs);
    let (mean, var) = (0.4 + t * 0.2, 0.01 * t * (1.0 - t));
    assert!((m - mean).abs() < 4.0 * (var / draws as f64).sqrt());
    assert!((v / var - 1.0).abs() < 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn simulated_states_stay_in_unit_cube(seed in any::<u64>(), n in 2usize..8, eta in 0.05f64..3.0, steps in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = BridgeParams::uniform(eta, steps, Reference::UniformUnitCube).unwrap();
        let z0 = sample_reference::<f64, _>(Reference::GridOfRandomPermutation, n, &mut rng).unwrap();
        let z1 = sample_reference::<f64, _>(Reference::UniformUnitCube, n, &mut rng).unwrap();
        let path = simulate_forward_path(&z0, &z1, &params, &mut rng).unwrap();
        prop_assert_eq!(path.len(), steps + 1);
        prop_assert_eq!(path.last().unwrap(), &z1);
        for z in &path {
            prop_assert!(z.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn reflect_is_idempotent_and_symmetric(x in -50.0f64..50.0) {
        let r = reflect(x).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(reflect(r).unwrap(), r);
        prop_assert!((reflect(-x).unwrap() - r).abs() < 1e-12);
        prop_assert!((reflect(x + 2.0).unwrap() - r).abs() < 1e-12);
    }
}
