//! Continuous soft-rank representation of permutations and the reflected
//! Brownian-bridge forward process on `[0, 1]^N`.
//!
//! Each coordinate follows, independently,
//!
//! ```text
//! dz_t = (z_1 - z_t) / (1 - t) dt + η dw_t + dl_t
//! ```
//!
//! where `l_t` keeps the state inside `[0, 1]`. The boundary term is realised
//! by folding with [`reflect`], a closed-form triangle wave.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Permutation;
use crate::scalar::Real;

/// A point of `[0, 1]^N`, `N >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SoftRankVector<T> {
    values: Vec<T>,
}

impl<T: Real> SoftRankVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSize(format!("soft-rank vectors need N >= 2, got {}", values.len())));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::Domain(format!("soft rank {bad} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    /// Folds every coordinate into `[0, 1]` with [`reflect`].
    pub fn from_unconstrained(values: Vec<T>) -> Result<Self> {
        let values = values.into_iter().map(reflect).collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    /// Permutation induced by ordering the coordinates.
    pub fn ranks(&self) -> Permutation {
        crate::permutation::rank_of_coordinates(&self.values).expect("N >= 2 by construction")
    }
}

/// Distribution of the bridge endpoint `z_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// i.i.d. Uniform[0, 1] coordinates.
    #[default]
    UniformUnitCube,
    /// Grid lift of a uniformly random permutation.
    GridOfRandomPermutation,
}

impl std::str::FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "uniform-unit-cube" => Ok(Self::UniformUnitCube),
            "grid" | "grid-of-random-permutation" => Ok(Self::GridOfRandomPermutation),
            other => Err(Error::Config(format!("unknown reference distribution `{other}`"))),
        }
    }
}

/// Noise scale, time grid `0 = t_0 < … < t_K = 1` and reference distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeParams<T> {
    eta: T,
    time_grid: Vec<T>,
    reference: Reference,
}

impl<T: Real> BridgeParams<T> {
    /// Uniform grid `t_k = k / K`.
    pub fn uniform(eta: T, steps: usize, reference: Reference) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("time grid needs K >= 1 steps".into()));
        }
        let k = T::from_usize_lossy(steps);
        let mut grid: Vec<T> = (0..=steps).map(|i| T::from_usize_lossy(i) / k).collect();
        grid[steps] = T::one();
        Self::with_grid(eta, grid, reference)
    }

    pub fn with_grid(eta: T, time_grid: Vec<T>, reference: Reference) -> Result<Self> {
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::Config(format!("eta must be positive and finite, got {eta}")));
        }
        if time_grid.len() < 2 {
            return Err(Error::Config("time grid needs at least the endpoints 0 and 1".into()));
        }
        if time_grid[0] != T::zero() || time_grid[time_grid.len() - 1] != T::one() {
            return Err(Error::Config("time grid must start at exactly 0 and end at exactly 1".into()));
        }
        if time_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("time grid must be strictly increasing".into()));
        }
        Ok(Self { eta, time_grid, reference })
    }

    #[inline]
    pub fn eta(&self) -> T {
        self.eta
    }

    #[inline]
    pub fn time_grid(&self) -> &[T] {
        &self.time_grid
    }

    /// Number of steps K.
    #[inline]
    pub fn steps(&self) -> usize {
        self.time_grid.len() - 1
    }

    #[inline]
    pub fn reference(&self) -> Reference {
        self.reference
    }
}

/// Canonical grid point `g_r = (r - 1) / (N - 1)` for 1-based rank `r`.
#[inline]
pub fn grid_point<T: Real>(rank: usize, n: usize) -> T {
    T::from_usize_lossy(rank - 1) / T::from_usize_lossy(n - 1)
}

/// `Φ(σ)_i = g_{σ(i)}`.
pub fn lift_to_grid<T: Real>(sigma: &Permutation) -> SoftRankVector<T> {
    let n = sigma.len();
    SoftRankVector { values: sigma.ranks().iter().map(|&r| grid_point(r, n)).collect() }
}

/// Triangle-wave folding of the real line onto `[0, 1]`:
/// `y = x mod 2`, then `y` if `y <= 1` else `2 - y`.
pub fn reflect<T: Real>(x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("cannot reflect {x}")));
    }
    if x >= T::zero() && x <= T::one() {
        return Ok(x);
    }
    let two = T::lit(2.0);
    let mut y = x % two;
    if y < T::zero() {
        y = y + two;
    }
    // `y + 2` can round up to exactly 2 for tiny negative remainders.
    if y >= two {
        y = y - two;
    }
    Ok(if y <= T::one() { y } else { two - y })
}

pub fn sample_reference<T: Real, R: Rng + ?Sized>(reference: Reference, n: usize, rng: &mut R) -> Result<SoftRankVector<T>> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("reference draw needs n >= 2, got {n}")));
    }
    match reference {
        Reference::UniformUnitCube => {
            Ok(SoftRankVector { values: (0..n).map(|_| T::unit_uniform(rng)).collect() })
        }
        Reference::GridOfRandomPermutation => {
            let sigma = random_permutation(n, rng)?;
            Ok(lift_to_grid(&sigma))
        }
    }
}

pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Permutation> {
    let mut seq: Vec<usize> = (0..n).collect();
    seq.shuffle(rng);
    Permutation::from_sequence(&seq)
}

fn check_pair<T: Real>(z0: &SoftRankVector<T>, z1: &SoftRankVector<T>) -> Result<()> {
    if z0.len() != z1.len() {
        return Err(Error::SizeMismatch { expected: z0.len(), got: z1.len() });
    }
    Ok(())
}

/// Euler–Maruyama simulation of the reflected bridge on the parameter grid.
///
/// Returns one state per grid time, `K + 1` in total. The final step is a
/// deterministic pin to `z1`; the drift is never evaluated at `t = 1`.
pub fn simulate_forward_path<T: Real, R: Rng + ?Sized>(
    z0: &SoftRankVector<T>,
    z1: &SoftRankVector<T>,
    params: &BridgeParams<T>,
    rng: &mut R,
) -> Result<Vec<SoftRankVector<T>>> {
    check_pair(z0, z1)?;
    let grid = params.time_grid();
    let eta = params.eta();
    let mut path = Vec::with_capacity(grid.len());
    path.push(z0.clone());
    let mut z = z0.values.clone();
    for k in 0..grid.len() - 1 {
        let (t, t_next) = (grid[k], grid[k + 1]);
        if k + 2 == grid.len() {
            path.push(z1.clone());
            break;
        }
        let dt = t_next - t;
        let sd = eta * dt.sqrt();
        let remaining = T::one() - t;
        for (zi, &target) in z.iter_mut().zip(&z1.values) {
            let drift = (target - *zi) / remaining;
            *zi = reflect(*zi + dt * drift + sd * T::standard_normal(rng))?;
        }
        path.push(SoftRankVector { values: z.clone() });
    }
    Ok(path)
}

/// One-shot draw from the bridge marginal at `t`, followed by reflection:
/// `reflect(N((1 - t) z0 + t z1, η² t (1 - t)))` per coordinate.
pub fn sample_forward_marginal<T: Real, R: Rng + ?Sized>(
    z0: &SoftRankVector<T>,
    z1: &SoftRankVector<T>,
    t: T,
    eta: T,
    rng: &mut R,
) -> Result<SoftRankVector<T>> {
    check_pair(z0, z1)?;
    if !(t > T::zero() && t < T::one()) {
        return Err(Error::Domain(format!("forward marginal needs 0 < t < 1, got {t}")));
    }
    let sd = eta * (t * (T::one() - t)).sqrt();
    let values = z0
        .values
        .iter()
        .zip(&z1.values)
        .map(|(&a, &b)| reflect((T::one() - t) * a + t * b + sd * T::standard_normal(rng)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SoftRankVector { values })
}

/// One Gilbert–Shannon–Reeds riffle shuffle of the deck whose order is the
/// sequence form of `sigma`. The cut is Binomial(N, 1/2); cards then drop
/// from each packet with probability proportional to its remaining size.
pub fn riffle_shuffle_step<R: Rng + ?Sized>(sigma: &Permutation, rng: &mut R) -> Permutation {
    let cut = (0..sigma.len()).filter(|_| rng.random_bool(0.5)).count();
    riffle_with_cut(sigma, cut, rng)
}

/// GSR interleaving after a fixed cut of the top `cut` cards.
fn riffle_with_cut<R: Rng + ?Sized>(sigma: &Permutation, cut: usize, rng: &mut R) -> Permutation {
    let deck = sigma.to_sequence();
    let n = deck.len();
    let (left, right) = deck.split_at(cut);
    let (mut li, mut ri) = (0, 0);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (l_left, r_left) = (left.len() - li, right.len() - ri);
        if rng.random_range(0..l_left + r_left) < l_left {
            out.push(left[li]);
            li += 1;
        } else {
            out.push(right[ri]);
            ri += 1;
        }
    }
    Permutation::from_sequence(&out).expect("interleaving preserves the deck")
}
