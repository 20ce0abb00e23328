//! Conditioned Galton–Watson trees and uniform full binary trees.
//!
//! All paths draw an exchangeable degree sequence conditioned on summing to
//! `p − 1` and then apply the cycle lemma. For the binary and geometric
//! families the conditioned sequence is drawn directly in `O(p)`; every
//! other law goes through rejection.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::offspring::{Family, OffspringDistribution};
use crate::tree::Tree;

pub const DEFAULT_MAX_PROPOSALS: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplerError {
    #[error("no tree of size {p} has positive weight under this offspring law")]
    InfeasibleSize { p: usize },
    #[error("rejection budget of {proposals} proposals exhausted")]
    RejectionBudgetExceeded { proposals: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Direct conditional draw where one exists, rejection otherwise.
    #[default]
    Auto,
    /// Always i.i.d. proposals rejected until the degree sum is `p − 1`.
    Rejection,
}

#[derive(Debug, Clone, Copy)]
pub struct SamplerOptions {
    pub method: Method,
    pub max_proposals: u64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self { method: Method::Auto, max_proposals: DEFAULT_MAX_PROPOSALS }
    }
}

/// Rotates a degree sequence with `Σ(k_i − 1) = −1` into the unique cyclic
/// shift whose Łukasiewicz walk stays nonnegative before the last step.
/// Returns the rotation amount.
pub fn cycle_lemma_rotate(degrees: &mut [usize]) -> usize {
    let mut walk: i64 = 0;
    let mut best = i64::MAX;
    let mut at = 0;
    for (i, &k) in degrees.iter().enumerate() {
        walk += k as i64 - 1;
        if walk < best {
            best = walk;
            at = i + 1;
        }
    }
    debug_assert_eq!(walk, -1, "degree sequence must sum to its length minus one");
    let shift = at % degrees.len().max(1);
    degrees.rotate_left(shift);
    shift
}

pub fn sample_conditioned_gw<R: Rng + ?Sized>(
    dist: &OffspringDistribution,
    p: usize,
    rng: &mut R,
) -> Result<Tree, SamplerError> {
    sample_conditioned_gw_with(dist, p, rng, SamplerOptions::default())
}

pub fn sample_conditioned_gw_with<R: Rng + ?Sized>(
    dist: &OffspringDistribution,
    p: usize,
    rng: &mut R,
    opts: SamplerOptions,
) -> Result<Tree, SamplerError> {
    if !dist.is_feasible(p) {
        return Err(SamplerError::InfeasibleSize { p });
    }
    let mut degrees = match (opts.method, dist.family()) {
        (Method::Auto, Family::Binary { .. }) => binary_sequence(p, rng),
        (Method::Auto, Family::Geometric { .. }) => composition_sequence(p, rng),
        _ => rejection_sequence(dist, p, rng, opts.max_proposals)?,
    };
    cycle_lemma_rotate(&mut degrees);
    let tree = Tree::from_degrees(degrees).expect("cycle lemma output is a valid walk");
    debug_assert_eq!(tree.len(), p);
    Ok(tree)
}

/// Uniform full binary tree with `n` internal nodes (`2n + 1` nodes).
pub fn sample_uniform_full_binary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Tree {
    sample_conditioned_gw(&OffspringDistribution::critical_binary(), 2 * n + 1, rng)
        .expect("odd sizes are always feasible for binary offspring")
}

// i.i.d. {0,2} conditioned on n twos: a uniform n-subset of positions.
fn binary_sequence<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<usize> {
    let n = (p - 1) / 2;
    let mut ks = vec![0usize; p];
    ks[..n].fill(2);
    ks.shuffle(rng);
    ks
}

// i.i.d. geometric conditioned on the sum is uniform over weak compositions
// of p - 1 into p parts: stars and bars.
fn composition_sequence<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<usize> {
    let mut marks = vec![false; 2 * (p - 1)];
    marks[..p - 1].fill(true); // true = bar
    marks.shuffle(rng);
    let mut ks = Vec::with_capacity(p);
    let mut run = 0;
    for bar in marks {
        if bar {
            ks.push(run);
            run = 0;
        } else {
            run += 1;
        }
    }
    ks.push(run);
    ks
}

fn rejection_sequence<R: Rng + ?Sized>(
    dist: &OffspringDistribution,
    p: usize,
    rng: &mut R,
    budget: u64,
) -> Result<Vec<usize>, SamplerError> {
    let target = p - 1;
    let mut ks = Vec::with_capacity(p);
    for _ in 0..budget {
        ks.clear();
        let mut sum = 0usize;
        let mut ok = true;
        for _ in 0..p {
            let k = dist.sample(rng);
            sum = sum.saturating_add(k);
            if sum > target {
                ok = false;
                break;
            }
            ks.push(k);
        }
        if ok && sum == target {
            return Ok(ks);
        }
    }
    Err(SamplerError::RejectionBudgetExceeded { proposals: budget })
}
