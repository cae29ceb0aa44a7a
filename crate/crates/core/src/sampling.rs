//! All randomness used by the simulator.
//!
//! Streams are keyed rather than sequential: the ChaCha key is the tuple
//! `(master seed, purpose, round, client)` itself, so the draws a client makes
//! in a round never depend on what any other client or round consumed.

use rand::{Rng, RngCore};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problems::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    Cohort,
    Permutation,
    /// i.i.d. local indices for the with-replacement baseline.
    LocalIndex,
    /// Problem generators.
    Problem,
    /// Restart points of the descent oracles.
    Restart,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Cohort => 1,
            StreamPurpose::Permutation => 2,
            StreamPurpose::LocalIndex => 3,
            StreamPurpose::Problem => 4,
            StreamPurpose::Restart => 5,
        }
    }
}

/// Deterministic pseudo-random stream; identical keys give identical output
/// on every platform.
#[derive(Clone, Debug)]
pub struct RngStream(ChaCha12Rng);

impl RngStream {
    pub fn derive(master_seed: u64, round: u64, client: Option<usize>, purpose: StreamPurpose) -> Self {
        let client_word = client.map_or(0, |c| c as u64 + 1);
        let mut key = [0u8; 32];
        for (chunk, word) in key.chunks_exact_mut(8).zip([master_seed, purpose.tag(), round, client_word]) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        RngStream(ChaCha12Rng::from_seed(key))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        self.0.random_range(0..bound as u64) as usize
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// A bijection on `{0, …, n−1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::input(format!("{order:?} is not a permutation")));
            }
        }
        Ok(Permutation(order))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Uniform permutation by Fisher–Yates.
pub fn sample_permutation(n: usize, rng: &mut RngStream) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::input("permutation length must be >= 1"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i + 1);
        order.swap(i, j);
    }
    Ok(Permutation(order))
}

/// The clients participating in one round, sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CohortSample(Vec<usize>);

impl CohortSample {
    pub fn full(clients: usize) -> Self {
        CohortSample((0..clients).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Uniform `size`-subset of `{0, …, clients−1}` by partial Fisher–Yates.
pub fn sample_cohort(clients: usize, size: usize, rng: &mut RngStream) -> Result<CohortSample> {
    if size == 0 || size > clients {
        return Err(Error::input(format!("cohort size {size} must lie in [1, {clients}]")));
    }
    if size == clients {
        return Ok(CohortSample::full(clients));
    }
    let mut pool: Vec<usize> = (0..clients).collect();
    for i in 0..size {
        let j = i + rng.below(clients - i);
        pool.swap(i, j);
    }
    pool.truncate(size);
    pool.sort_unstable();
    Ok(CohortSample(pool))
}

/// `E‖X̄_π − X̄‖² = (n−k)/(k(n−1)) σ²` for a uniform `k`-subset of `n`
/// vectors with population variance `σ²`. Defined as 0 when `n = 1`.
pub fn swr_formula(sigma_sq: f64, n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::input(format!("subset size {k} must lie in [1, {n}]")));
    }
    if n == 1 {
        return Ok(0.0);
    }
    Ok((n - k) as f64 / (k as f64 * (n - 1) as f64) * sigma_sq)
}

/// Population variance `(1/n) Σ ‖X_i − X̄‖²`.
pub fn population_variance(xs: &[Vector]) -> f64 {
    let mean = mean_of(xs.iter());
    xs.iter().map(|x| (x - &mean).norm_squared()).sum::<f64>() / xs.len() as f64
}

fn mean_of<'a>(xs: impl ExactSizeIterator<Item = &'a Vector>) -> Vector {
    let n = xs.len() as f64;
    let mut it = xs;
    let first = it.next().expect("non-empty").clone();
    it.fold(first, |acc, x| acc + x) / n
}

pub const SWR_ENUMERATION_LIMIT: usize = 12;

/// Exact moments of the mean of a uniform `k`-subset, by enumerating all
/// `C(n, k)` subsets.
#[derive(Clone, Debug)]
pub struct SwrMoments {
    pub mean: Vector,
    pub variance: f64,
    pub subsets: usize,
}

pub fn swr_moments_oracle(xs: &[Vector], k: usize) -> Result<SwrMoments> {
    let n = xs.len();
    if n > SWR_ENUMERATION_LIMIT {
        return Err(Error::Resource(format!("enumeration limited to n <= {SWR_ENUMERATION_LIMIT}, got {n}")));
    }
    if k == 0 || k > n {
        return Err(Error::input(format!("subset size {k} must lie in [1, {n}]")));
    }
    let population_mean = mean_of(xs.iter());
    let d = xs[0].len();
    let mut mean_acc = Vector::zeros(d);
    let mut var_acc = 0.0;
    let mut subsets = 0usize;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let subset_mean = mean_of(idx.iter().map(|&i| &xs[i]).collect::<Vec<_>>().into_iter());
        var_acc += (&subset_mean - &population_mean).norm_squared();
        mean_acc += subset_mean;
        subsets += 1;
        // Next k-combination in lexicographic order.
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            break;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(SwrMoments { mean: mean_acc / subsets as f64, variance: var_acc / subsets as f64, subsets })
}
