use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softrank_core::distributions::{
    cgpl_sample, fit_gpl_to_target, gpl_probability_table, masked_stagewise_log_prob, pl_log_prob, scorer_log_prob,
    ScoreMatrix, StagewiseScorer,
};
use softrank_core::permutation::{enumerate_all, Permutation};
use softrank_core::Result;

fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> ScoreMatrix<f64> {
    ScoreMatrix::from_rows((0..n).map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).collect()).unwrap()
}

/// Scorer whose logits depend on the whole prefix, so it is a genuine cGPL.
struct PrefixScorer {
    base: ScoreMatrix<f64>,
}

impl StagewiseScorer<f64> for PrefixScorer {
    fn n_items(&self) -> usize {
        self.base.n()
    }

    fn stage_logits(&self, prefix: &[usize]) -> Result<Vec<f64>> {
        let mut logits = self.base.column(prefix.len());
        if let Some(&last) = prefix.last() {
            for (k, l) in logits.iter_mut().enumerate() {
                *l += 0.7 * ((k as f64) - (last as f64)).abs() - 0.3 * prefix.len() as f64 * k as f64;
            }
        }
        Ok(logits)
    }
}

/// Wraps a matrix but hides `static_scores`, forcing per-stage recomputation.
struct Opaque(ScoreMatrix<f64>);

impl StagewiseScorer<f64> for Opaque {
    fn n_items(&self) -> usize {
        self.0.n()
    }

    fn stage_logits(&self, prefix: &[usize]) -> Result<Vec<f64>> {
        Ok(self.0.column(prefix.len()))
    }
}

#[test]
fn stagewise_likelihoods_normalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 2..=4 {
        for _ in 0..20 {
            let m = random_matrix(n, &mut rng);
            let total: f64 =
                enumerate_all(n).unwrap().map(|s| masked_stagewise_log_prob(&m, &s).unwrap().exp()).sum();
            assert!((total - 1.0).abs() < 1e-10, "n = {n}: total {total}");
            let pl: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let total: f64 = enumerate_all(n).unwrap().map(|s| pl_log_prob(&pl, &s).unwrap().exp()).sum();
            assert!((total - 1.0).abs() < 1e-10);
            let scorer = PrefixScorer { base: m };
            let total: f64 = enumerate_all(n).unwrap().map(|s| scorer_log_prob(&scorer, &s).unwrap().exp()).sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn prefix_agnostic_cgpl_equals_gpl() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 2..=5 {
        let m = random_matrix(n, &mut rng);
        let opaque = Opaque(m.clone());
        for sigma in enumerate_all(n).unwrap() {
            let a = masked_stagewise_log_prob(&m, &sigma).unwrap();
            let b = scorer_log_prob(&opaque, &sigma).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}

fn check_frequencies<S: StagewiseScorer<f64>>(scorer: &S, seed: u64) {
    let n = scorer.n_items();
    let perms: Vec<Permutation> = enumerate_all(n).unwrap().collect();
    let exact: Vec<f64> = perms.iter().map(|s| scorer_log_prob(scorer, s).unwrap().exp()).collect();
    let draws = 100_000;
    let mut counts = vec![0usize; perms.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws {
        let (sigma, lp) = cgpl_sample(scorer, &mut rng).unwrap();
        let idx = sigma.lex_index();
        assert!((lp.exp() - exact[idx]).abs() < 1e-12);
        counts[idx] += 1;
    }
    for (c, p) in counts.iter().zip(&exact) {
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((*c as f64 - draws as f64 * p).abs() <= 3.0 * sd + 1.0, "count {c} vs expected {}", draws as f64 * p);
    }
}

#[test]
fn sampling_frequencies_match_exact_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_matrix(3, &mut rng);
    check_frequencies(&m, 10);
    check_frequencies(&PrefixScorer { base: m }, 11);
}

#[test]
fn gpl_fit_recovers_a_two_point_mixture() {
    let perms: Vec<Permutation> = enumerate_all(3).unwrap().collect();
    let mut target = vec![0.0f64; perms.len()];
    // (1,2,3) and (1,3,2) share their first stage, so GPL can represent the mixture.
    target[0] = 0.5;
    target[1] = 0.5;
    let fit = fit_gpl_to_target(3, &target).unwrap();
    assert!(fit.total_variation < 1e-3);
    let table = gpl_probability_table(&fit.scores).unwrap();
    let tv: f64 = table.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
    assert!((tv - fit.total_variation).abs() < 1e-12);
}
