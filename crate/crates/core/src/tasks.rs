//! Desk-scale benchmark tasks: scalar sorting and small Euclidean TSP, with
//! exact evaluation oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::{rank_of_coordinates, Permutation};
use crate::scalar::Real;

/// Largest instance `exact_tsp` accepts: (9 − 1)! / 2 = 20160 tours.
pub const MAX_EXACT_TSP: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Sorting,
    Tsp,
}

impl TaskKind {
    pub fn feature_dim(self) -> usize {
        match self {
            TaskKind::Sorting => 1,
            TaskKind::Tsp => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Sorting => "sorting",
            TaskKind::Tsp => "tsp",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sorting" | "sort" => Ok(Self::Sorting),
            "tsp" => Ok(Self::Tsp),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

/// A training/evaluation pair `(X, σ_0)`: flattened `n × feature_dim`
/// features and the target in rank form.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub features: Vec<T>,
    pub feature_dim: usize,
    pub target: Permutation,
}

impl<T: Real> Example<T> {
    pub fn new(features: Vec<T>, feature_dim: usize, target: Permutation) -> Result<Self> {
        if feature_dim == 0 || features.len() != target.len() * feature_dim {
            return Err(Error::SizeMismatch { expected: target.len() * feature_dim, got: features.len() });
        }
        Ok(Self { features, feature_dim, target })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.target.len()
    }

    #[inline]
    pub fn item(&self, k: usize) -> &[T] {
        &self.features[k * self.feature_dim..(k + 1) * self.feature_dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortingInstance<T> {
    pub values: Vec<T>,
    /// Ranks of `values` in ascending order.
    pub ground_truth: Permutation,
}

impl<T: Real> SortingInstance<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        let ground_truth = rank_of_coordinates(&values)?;
        Ok(Self { values, ground_truth })
    }

    /// Values min–max normalised to `[0, 1]` within the instance.
    pub fn features(&self) -> Vec<T> {
        let lo = self.values.iter().copied().fold(T::infinity(), T::min);
        let hi = self.values.iter().copied().fold(T::neg_infinity(), T::max);
        let span = hi - lo;
        if span > T::zero() {
            self.values.iter().map(|&v| (v - lo) / span).collect()
        } else {
            vec![T::zero(); self.values.len()]
        }
    }

    pub fn to_example(&self) -> Example<T> {
        Example { features: self.features(), feature_dim: 1, target: self.ground_truth.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TspInstance<T> {
    pub points: Vec<[T; 2]>,
    /// Visit order, canonicalised (see [`canonical_tour`]).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimal_tour: Option<Permutation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimal_length: Option<T>,
}

impl<T: Real> TspInstance<T> {
    pub fn new(points: Vec<[T; 2]>) -> Self {
        Self { points, optimal_tour: None, optimal_length: None }
    }

    pub fn with_exact_solution(points: Vec<[T; 2]>) -> Result<Self> {
        let (tour, length) = exact_tsp(&points)?;
        Ok(Self { points, optimal_tour: Some(tour), optimal_length: Some(length) })
    }

    pub fn features(&self) -> Vec<T> {
        self.points.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    /// Example supervised by the canonical optimal tour; `None` when unlabeled.
    pub fn to_example(&self) -> Option<Example<T>> {
        let tour = self.optimal_tour.as_ref()?;
        Some(Example { features: self.features(), feature_dim: 2, target: tour.inverse() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Instance<T> {
    Sorting(SortingInstance<T>),
    Tsp(TspInstance<T>),
}

impl<T: Real> Instance<T> {
    pub fn n(&self) -> usize {
        match self {
            Instance::Sorting(s) => s.values.len(),
            Instance::Tsp(t) => t.points.len(),
        }
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            Instance::Sorting(_) => TaskKind::Sorting,
            Instance::Tsp(_) => TaskKind::Tsp,
        }
    }

    pub fn features(&self) -> Vec<T> {
        match self {
            Instance::Sorting(s) => s.features(),
            Instance::Tsp(t) => t.features(),
        }
    }

    pub fn to_example(&self) -> Option<Example<T>> {
        match self {
            Instance::Sorting(s) => Some(s.to_example()),
            Instance::Tsp(t) => t.to_example(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub kind: TaskKind,
    pub n: usize,
    pub seed: u64,
    pub instances: Vec<Instance<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn examples(&self) -> Vec<Example<T>> {
        self.instances.iter().filter_map(Instance::to_example).collect()
    }
}

fn distance<T: Real>(a: &[T; 2], b: &[T; 2]) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn cycle_length<T: Real>(points: &[[T; 2]], order: &[usize]) -> T {
    let n = order.len();
    (0..n).map(|i| distance(&points[order[i]], &points[order[(i + 1) % n]])).sum()
}

/// Closed tour length `Σ ‖v_{π(i)} − v_{π(i+1)}‖` where the one-line
/// notation of `visit_order` lists cities in visiting order.
pub fn tour_length<T: Real>(points: &[[T; 2]], visit_order: &Permutation) -> Result<T> {
    if points.len() != visit_order.len() {
        return Err(Error::SizeMismatch { expected: points.len(), got: visit_order.len() });
    }
    let order: Vec<usize> = visit_order.ranks().iter().map(|r| r - 1).collect();
    Ok(cycle_length(points, &order))
}

/// Rotates a visit order to start at city 1 and orients it so the second city
/// has the smaller label of the two neighbours.
pub fn canonical_tour(visit_order: &Permutation) -> Permutation {
    let order = visit_order.ranks();
    let n = order.len();
    let start = order.iter().position(|&c| c == 1).expect("city 1 present");
    let mut rotated: Vec<usize> = (0..n).map(|i| order[(start + i) % n]).collect();
    if n > 2 && rotated[1] > rotated[n - 1] {
        rotated[1..].reverse();
    }
    Permutation::from_ranks(rotated).expect("rotation of a permutation")
}

/// Exhaustive search over the (n − 1)!/2 tours that start at city 1 and have
/// a second city smaller than the last one.
pub fn exact_tsp<T: Real>(points: &[[T; 2]]) -> Result<(Permutation, T)> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidSize(format!("TSP needs n >= 2, got {n}")));
    }
    if n > MAX_EXACT_TSP {
        return Err(Error::TooLarge(format!("exact TSP is limited to n <= {MAX_EXACT_TSP}, got {n}")));
    }
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best: Option<(Vec<usize>, T)> = None;
    let mut order = vec![0usize; n];
    loop {
        if n <= 2 || rest[0] < rest[rest.len() - 1] {
            order[1..].copy_from_slice(&rest);
            let len = cycle_length(points, &order);
            if best.as_ref().is_none_or(|(_, b)| len < *b) {
                best = Some((order.clone(), len));
            }
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    let (order, len) = best.expect("at least one tour");
    let tour = Permutation::from_ranks(order.into_iter().map(|c| c + 1).collect())?;
    Ok((tour, len))
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| v[j] > v[i]).expect("successor exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Greedy nearest-neighbour tour from `start` (0-based).
pub fn nearest_neighbor_tour<T: Real>(points: &[[T; 2]], start: usize) -> Result<Permutation> {
    let n = points.len();
    if start >= n {
        return Err(Error::Domain(format!("start city {start} outside 0..{n}")));
    }
    let mut visited = vec![false; n];
    let mut order = vec![start];
    visited[start] = true;
    while order.len() < n {
        let here = &points[*order.last().unwrap()];
        let next = (0..n)
            .filter(|&c| !visited[c])
            .min_by(|&a, &b| distance(here, &points[a]).partial_cmp(&distance(here, &points[b])).unwrap())
            .unwrap();
        visited[next] = true;
        order.push(next);
    }
    Permutation::from_ranks(order.into_iter().map(|c| c + 1).collect())
}

/// `(L_pred − L_opt) / L_opt`.
pub fn optimality_gap<T: Real>(pred_length: T, opt_length: T) -> Result<T> {
    if !(opt_length > T::zero()) {
        return Err(Error::Domain(format!("optimal length must be positive, got {opt_length}")));
    }
    Ok((pred_length - opt_length) / opt_length)
}

/// Independent RNG stream for item `index` under `seed`.
pub fn derived_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn sorting_instance<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> SortingInstance<T> {
    loop {
        let values: Vec<T> = (0..n).map(|_| T::unit_uniform(rng)).collect();
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).all(|w| w[0] < w[1]) {
            return SortingInstance::new(values).expect("n >= 2 checked");
        }
    }
}

fn tsp_points<T: Real, R: Rng>(n: usize, rng: &mut R) -> Vec<[T; 2]> {
    (0..n).map(|_| [T::unit_uniform(rng), T::unit_uniform(rng)]).collect()
}

/// Reproducible synthetic dataset; instance `i` draws from stream `i` of `seed`.
/// TSP instances carry exact labels when `n <= 9`.
pub fn generate_dataset<T: Real>(kind: TaskKind, n: usize, count: usize, seed: u64) -> Result<Dataset<T>> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("instances need n >= 2, got {n}")));
    }
    let instances = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = derived_rng(seed, i as u64);
            match kind {
                TaskKind::Sorting => Ok(Instance::Sorting(sorting_instance(n, &mut rng))),
                TaskKind::Tsp => {
                    let points = tsp_points(n, &mut rng);
                    if n <= MAX_EXACT_TSP {
                        TspInstance::with_exact_solution(points).map(Instance::Tsp)
                    } else {
                        Ok(Instance::Tsp(TspInstance::new(points)))
                    }
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { kind, n, seed, instances })
}
