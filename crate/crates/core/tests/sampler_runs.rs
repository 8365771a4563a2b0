use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softrank_core::denoiser::{Architecture, DenoiserModel};
use softrank_core::permutation::{enumerate_all, rank_of_coordinates, Permutation};
use softrank_core::sampler::{jumpiness, reverse_sample, sample_many, trajectory_jumpiness, SamplerConfig};
use softrank_core::softrank::{
    lift_to_grid, random_permutation, riffle_shuffle_step, sample_reference, simulate_forward_path, BridgeParams,
    Reference,
};
use softrank_core::tasks::{generate_dataset, Instance, TaskKind};

#[test]
fn oracle_recovers_every_instance() {
    for n in [5, 8] {
        let model = DenoiserModel::<f64>::oracle(TaskKind::Sorting, n).unwrap();
        let ds = generate_dataset::<f64>(TaskKind::Sorting, n, 300, 40 + n as u64).unwrap();
        let features: Vec<Vec<f64>> = ds.instances.iter().map(Instance::features).collect();
        let truths: Vec<Permutation> = ds.examples().into_iter().map(|e| e.target).collect();
        for steps in [1, 5, 20] {
            let bridge = BridgeParams::uniform(0.3, steps, Reference::UniformUnitCube).unwrap();
            let config = SamplerConfig::new(bridge, &model);
            let out = sample_many(&features, 1, &config, steps as u64).unwrap();
            for (o, t) in out.iter().zip(&truths) {
                assert_eq!(&o.permutation, t);
            }
        }
    }
}

#[test]
fn uniform_model_gives_uniform_outputs() {
    let model = DenoiserModel::<f64>::zeros(Architecture::mlp(3, 1, 4)).unwrap();
    let bridge = BridgeParams::uniform(0.3, 5, Reference::UniformUnitCube).unwrap();
    let config = SamplerConfig::new(bridge, &model);
    let runs = 60_000;
    let features = vec![vec![0.2, 0.9, 0.4]; runs];
    let out = sample_many(&features, 1, &config, 5).unwrap();
    let mut counts = [0usize; 6];
    for o in &out {
        counts[o.permutation.lex_index()] += 1;
    }
    let p = 1.0 / 6.0;
    let sd = (runs as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - runs as f64 * p).abs() < 3.0 * sd, "{counts:?}");
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = DenoiserModel::<f64>::init(Architecture::pointer(5, 1, 6, 4), &mut rng).unwrap();
    let bridge = BridgeParams::uniform(0.3, 10, Reference::UniformUnitCube).unwrap();
    let config = SamplerConfig::new(bridge, &model).with_trajectory(true);
    let x = [0.3, 0.1, 0.8, 0.5, 0.6];
    let a = reverse_sample(&x, 1, &config, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = reverse_sample(&x, 1, &config, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
    let tr = a.trajectory.unwrap();
    assert_eq!(tr.len(), 11);
    assert_eq!(tr.last().unwrap().sigma, a.permutation);
    assert_eq!(trajectory_jumpiness(&tr).unwrap().len(), 10);
}

#[test]
fn soft_rank_paths_move_more_smoothly_than_riffles() {
    let n = 8;
    let params = BridgeParams::uniform(0.3, 100, Reference::UniformUnitCube).unwrap();
    let (mut soft, mut riffle) = (0.0, 0.0);
    let seeds = 1000;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma0 = random_permutation(n, &mut rng).unwrap();
        let z0 = lift_to_grid::<f64>(&sigma0);
        let z1 = sample_reference(Reference::UniformUnitCube, n, &mut rng).unwrap();
        let path = simulate_forward_path(&z0, &z1, &params, &mut rng).unwrap();
        let states: Vec<Permutation> = path.iter().map(|z| z.ranks()).collect();
        let d = jumpiness(&states).unwrap();
        soft += d.iter().sum::<usize>() as f64 / d.len() as f64;

        let mut chain = vec![sigma0];
        for _ in 0..10 {
            let next = riffle_shuffle_step(chain.last().unwrap(), &mut rng);
            chain.push(next);
        }
        let d = jumpiness(&chain).unwrap();
        riffle += d.iter().sum::<usize>() as f64 / d.len() as f64;
    }
    let (soft, riffle) = (soft / seeds as f64, riffle / seeds as f64);
    assert!(soft < riffle, "soft-rank {soft} vs riffle {riffle}");
}

#[test]
fn single_step_grid_returns_one_model_draw() {
    let model = DenoiserModel::<f64>::oracle(TaskKind::Sorting, 6).unwrap();
    let bridge = BridgeParams::uniform(0.3, 1, Reference::GridOfRandomPermutation).unwrap();
    let config = SamplerConfig::new(bridge, &model).with_trajectory(true);
    let x = [0.5, 0.2, 0.9, 0.1, 0.7, 0.3];
    let out = reverse_sample(&x, 1, &config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let tr = out.trajectory.unwrap();
    assert_eq!(tr.len(), 2);
    assert_eq!(tr[1].z.as_deref().unwrap(), lift_to_grid::<f64>(&rank_of_coordinates(&x).unwrap()).as_slice());
}

#[test]
fn all_permutations_reachable_from_uniform_model() {
    let model = DenoiserModel::<f64>::zeros(Architecture::tabular(4, 1, 3)).unwrap();
    let bridge = BridgeParams::uniform(0.3, 3, Reference::UniformUnitCube).unwrap();
    let config = SamplerConfig::new(bridge, &model);
    let features = vec![vec![0.0; 4]; 3000];
    let mut seen = [false; 24];
    for o in sample_many(&features, 1, &config, 0).unwrap() {
        seen[o.permutation.lex_index()] = true;
    }
    assert!(seen.iter().all(|&s| s));
    assert_eq!(enumerate_all(4).unwrap().count(), 24);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sampler_states_stay_in_unit_cube(seed in any::<u64>(), n in 2usize..7, steps in 1usize..12, eta in 0.05f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = DenoiserModel::<f64>::zeros(Architecture::mlp(n, 1, 3)).unwrap();
        let bridge = BridgeParams::uniform(eta, steps, Reference::UniformUnitCube).unwrap();
        let config = SamplerConfig::new(bridge, &model).with_trajectory(true);
        let x = vec![0.5; n];
        let out = reverse_sample(&x, 1, &config, &mut rng).unwrap();
        for step in out.trajectory.unwrap() {
            let z = step.z.unwrap();
            prop_assert!(z.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert_eq!(rank_of_coordinates(&z).unwrap(), step.sigma);
        }
    }
}
