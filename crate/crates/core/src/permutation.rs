//! Permutations in rank (one-line) form, rank/argsort conversions and the
//! rank-based evaluation metrics.
//!
//! A [`Permutation`] stores `ranks[i] = σ(i)`, the 1-based position element `i`
//! takes in the permuted ordering. The *sequence form* (which element sits at
//! each position) is the inverse and is what autoregressive samplers and tour
//! evaluators consume; [`Permutation::to_sequence`] and
//! [`Permutation::from_sequence`] convert between the two.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest `n` for which [`enumerate_all`] agrees to run.
pub const MAX_ENUMERATION: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    ranks: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(ranks: Vec<usize>) -> Result<Self> {
        Permutation::from_ranks(ranks)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.ranks
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.ranks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("permutations need n >= 2, got {n}")));
    }
    Ok(())
}

fn check_same_len(a: &Permutation, b: &Permutation) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch { expected: a.len(), got: b.len() });
    }
    Ok(())
}

impl Permutation {
    /// Builds a permutation from 1-based ranks, validating the bijection.
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        let n = ranks.len();
        check_size(n)?;
        let mut seen = vec![false; n];
        for &r in &ranks {
            if r == 0 || r > n {
                return Err(Error::InvalidPermutation(format!("rank {r} outside 1..={n}")));
            }
            if std::mem::replace(&mut seen[r - 1], true) {
                return Err(Error::InvalidPermutation(format!("rank {r} repeated")));
            }
        }
        Ok(Self { ranks })
    }

    /// Builds a permutation from its sequence form: `seq[p]` is the 0-based
    /// element placed at 0-based position `p`.
    pub fn from_sequence(seq: &[usize]) -> Result<Self> {
        let n = seq.len();
        check_size(n)?;
        let mut ranks = vec![0usize; n];
        for (p, &item) in seq.iter().enumerate() {
            if item >= n {
                return Err(Error::InvalidPermutation(format!("item {item} outside 0..{n}")));
            }
            if ranks[item] != 0 {
                return Err(Error::InvalidPermutation(format!("item {item} repeated")));
            }
            ranks[item] = p + 1;
        }
        Ok(Self { ranks })
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_size(n)?;
        Ok(Self { ranks: (1..=n).collect() })
    }

    /// The order-reversing permutation relative to `self`: rank `r` becomes `n + 1 - r`.
    pub fn reverse(&self) -> Self {
        let n = self.len();
        Self { ranks: self.ranks.iter().map(|&r| n + 1 - r).collect() }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// 1-based ranks, `ranks()[i] = σ(i + 1)`.
    #[inline]
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// 0-based position of 0-based element `i`.
    #[inline]
    pub fn position(&self, i: usize) -> usize {
        self.ranks[i] - 1
    }

    /// Sequence form: element (0-based) occupying each position.
    pub fn to_sequence(&self) -> Vec<usize> {
        let mut seq = vec![0usize; self.len()];
        for (i, &r) in self.ranks.iter().enumerate() {
            seq[r - 1] = i;
        }
        seq
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0usize; self.len()];
        for (i, &r) in self.ranks.iter().enumerate() {
            inv[r - 1] = i + 1;
        }
        Self { ranks: inv }
    }

    /// Moves element `i` to position `σ(i)`: `out[σ(i)] = items[i]`.
    pub fn apply<I: Clone>(&self, items: &[I]) -> Result<Vec<I>> {
        if items.len() != self.len() {
            return Err(Error::SizeMismatch { expected: self.len(), got: items.len() });
        }
        Ok(self.to_sequence().into_iter().map(|i| items[i].clone()).collect())
    }

    /// `(a ∘ b)(i) = a(b(i))`.
    pub fn compose(a: &Permutation, b: &Permutation) -> Result<Permutation> {
        check_same_len(a, b)?;
        Ok(Self { ranks: b.ranks.iter().map(|&r| a.ranks[r - 1]).collect() })
    }

    pub fn is_identity(&self) -> bool {
        self.ranks.iter().enumerate().all(|(i, &r)| r == i + 1)
    }

    /// Index of this permutation in lexicographic order of rank vectors
    /// (Lehmer code), in `0..n!`.
    pub fn lex_index(&self) -> usize {
        let n = self.len();
        let mut index = 0usize;
        for i in 0..n {
            let smaller_after = self.ranks[i + 1..].iter().filter(|&&r| r < self.ranks[i]).count();
            index = index * (n - i) + smaller_after;
        }
        index
    }

    /// Inverse of [`Permutation::lex_index`].
    pub fn from_lex_index(n: usize, mut index: usize) -> Result<Self> {
        check_size(n)?;
        let total = factorial(n).ok_or_else(|| Error::TooLarge(format!("{n}! overflows")))?;
        if index >= total {
            return Err(Error::Domain(format!("lex index {index} >= {n}!")));
        }
        let mut digits = vec![0usize; n];
        for i in (0..n).rev() {
            let radix = n - i;
            digits[i] = index % radix;
            index /= radix;
        }
        let mut pool: Vec<usize> = (1..=n).collect();
        let ranks = digits.into_iter().map(|d| pool.remove(d)).collect();
        Ok(Self { ranks })
    }
}

pub fn factorial(n: usize) -> Option<usize> {
    (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k))
}

/// `σ = argsort(argsort(z))` with 1-based ranks; ties are broken by ascending
/// index so equal coordinates keep their original relative order.
pub fn rank_of_coordinates<T: Real>(z: &[T]) -> Result<Permutation> {
    check_size(z.len())?;
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[a].partial_cmp(&z[b]).unwrap_or(Ordering::Equal));
    Ok(Permutation::from_sequence(&order).expect("argsort is a bijection"))
}

/// Number of discordant pairs between two permutations (bubble-sort distance).
pub fn kendall_distance(a: &Permutation, b: &Permutation) -> Result<usize> {
    check_same_len(a, b)?;
    let (ra, rb) = (a.ranks(), b.ranks());
    let n = a.len();
    let mut discordant = 0;
    for i in 0..n {
        for j in i + 1..n {
            if (ra[i] < ra[j]) != (rb[i] < rb[j]) {
                discordant += 1;
            }
        }
    }
    Ok(discordant)
}

/// Kendall τ-a. Inputs are permutations, so there are no ties and
/// concordant + discordant = n(n-1)/2.
pub fn kendall_tau(pred: &Permutation, truth: &Permutation) -> Result<f64> {
    let discordant = kendall_distance(pred, truth)? as f64;
    let n = pred.len() as f64;
    let pairs = n * (n - 1.0) / 2.0;
    Ok((pairs - 2.0 * discordant) / pairs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchScore {
    pub exact_match: bool,
    /// Fraction of elements whose rank agrees.
    pub correctness: f64,
}

pub fn accuracy_and_correctness(pred: &Permutation, truth: &Permutation) -> Result<MatchScore> {
    check_same_len(pred, truth)?;
    let hits = pred.ranks().iter().zip(truth.ranks()).filter(|(a, b)| a == b).count();
    Ok(MatchScore {
        exact_match: hits == pred.len(),
        correctness: hits as f64 / pred.len() as f64,
    })
}

/// Iterator over all of S_n in lexicographic order of rank vectors.
#[derive(Debug, Clone)]
pub struct AllPermutations {
    next: Option<Vec<usize>>,
}

impl Iterator for AllPermutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_lexicographic(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation { ranks: current })
    }
}

fn next_lexicographic(v: &mut [usize]) -> bool {
    let n = v.len();
    let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| v[j] > v[i]).expect("successor exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

pub fn enumerate_all(n: usize) -> Result<AllPermutations> {
    check_size(n)?;
    if n > MAX_ENUMERATION {
        return Err(Error::TooLarge(format!(
            "enumerating S_{n} ({n}! elements) exceeds the n <= {MAX_ENUMERATION} guard"
        )));
    }
    Ok(AllPermutations { next: Some((1..=n).collect()) })
}
