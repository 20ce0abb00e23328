//! Additive functionals of finite trees: the measure `A_t`, toll sums,
//! balance indices and the MRCA depth sums `D_k`.
//!
//! Everything that the index identities touch is computed in `u128` so the
//! identities can be checked with zero tolerance at sizes around `10^6`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::{Real, Scalar};
use crate::tree::Tree;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FunctionalError {
    #[error("tree is not full binary")]
    NotFullBinary,
    #[error("toll undefined at n = {n}")]
    TollUndefined { n: usize },
    #[error("k = {k} exceeds the supported maximum of {MAX_K}")]
    KTooLarge { k: u32 },
    #[error("k must be positive")]
    KZero,
    #[error("integer overflow")]
    Overflow,
}

pub const MAX_K: u32 = 8;

/// Test function `f` on `[0, 1]`.
#[derive(Clone)]
pub enum WeightFunction<S> {
    /// `x ↦ x^a 1_{(0,1]}(x)`; zero at the origin for every `a`.
    Power(f64),
    Constant(S),
    Callback(Arc<dyn Fn(S) -> S + Send + Sync>),
}

impl<S: Scalar> WeightFunction<S> {
    pub fn one() -> Self {
        WeightFunction::Constant(S::one())
    }

    pub fn identity() -> Self {
        WeightFunction::Power(1.0)
    }

    pub fn callback(f: impl Fn(S) -> S + Send + Sync + 'static) -> Self {
        WeightFunction::Callback(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: S) -> S {
        match self {
            WeightFunction::Power(a) => {
                if x <= S::zero() {
                    S::zero()
                } else {
                    x.pow_real(*a)
                }
            }
            WeightFunction::Constant(c) => c.clone(),
            WeightFunction::Callback(f) => f(x),
        }
    }
}

impl<S: Real> WeightFunction<S> {
    /// `x ↦ x · f(x)^2`, the variance weight of the fluctuation limit.
    pub fn x_times_square(&self) -> Self {
        match self {
            WeightFunction::Power(a) => WeightFunction::Power(1.0 + 2.0 * a),
            WeightFunction::Constant(c) => {
                let c2 = *c * *c;
                WeightFunction::callback(move |x| x * c2)
            }
            WeightFunction::Callback(f) => {
                let f = f.clone();
                WeightFunction::callback(move |x| {
                    let y = f(x);
                    x * y * y
                })
            }
        }
    }

    /// `x ↦ c ∧ f(x)`.
    pub fn truncated(&self, c: S) -> Self {
        let f = self.clone();
        WeightFunction::callback(move |x| {
            let y = f.eval(x);
            if y < c {
                y
            } else {
                c
            }
        })
    }
}

impl<S: fmt::Debug> fmt::Debug for WeightFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::Power(a) => write!(f, "Power({a})"),
            WeightFunction::Constant(c) => write!(f, "Constant({c:?})"),
            WeightFunction::Callback(_) => f.write_str("Callback(..)"),
        }
    }
}

/// `A_t(f) = Σ_v |t_v| f(|t_v| / |t|)`.
pub fn measure_a<S: Scalar>(t: &Tree, f: &WeightFunction<S>) -> S {
    let n = t.len() as u64;
    let mut acc = S::zero();
    for &s in t.subtree_sizes() {
        let x = S::from_ratio(s as u64, n);
        acc += S::from_ratio(s as u64, 1) * f.eval(x);
    }
    acc
}

/// `A_n(f) = |t|^{−3/2} A_t(f)`.
pub fn measure_a_scaled<F: Real>(t: &Tree, f: &WeightFunction<F>) -> F {
    measure_a(t, f) * F::of_usize(t.len()).powf(F::of(-1.5))
}

/// Toll sequence `b_n`, `n ≥ 1`.
#[derive(Clone)]
pub enum Toll<S> {
    /// `values[n − 1] = b_n`.
    Sequence(Vec<S>),
    Callback(Arc<dyn Fn(usize) -> S + Send + Sync>),
}

impl<S: Scalar> Toll<S> {
    pub fn callback(f: impl Fn(usize) -> S + Send + Sync + 'static) -> Self {
        Toll::Callback(Arc::new(f))
    }

    fn at(&self, n: usize) -> Result<S, FunctionalError> {
        match self {
            Toll::Sequence(v) => v.get(n.wrapping_sub(1)).cloned().ok_or(FunctionalError::TollUndefined { n }),
            Toll::Callback(f) => Ok(f(n)),
        }
    }
}

/// `F(t) = Σ_v b_{|t_v|}`.
pub fn additive_functional<S: Scalar>(t: &Tree, toll: &Toll<S>) -> Result<S, FunctionalError> {
    let mut acc = S::zero();
    for &s in t.subtree_sizes() {
        acc += toll.at(s)?;
    }
    Ok(acc)
}

/// The same functional through `F(t) = F(t_1) + F(t_2) + b_{|t|}`,
/// `F({∅}) = b_1`, evaluated bottom-up on a full binary tree.
pub fn additive_functional_recursive<S: Scalar>(t: &Tree, toll: &Toll<S>) -> Result<S, FunctionalError> {
    if !t.is_full_binary() {
        return Err(FunctionalError::NotFullBinary);
    }
    let mut f: Vec<Option<S>> = vec![None; t.len()];
    for v in (0..t.len()).rev() {
        let own = toll.at(t.subtree_size(v))?;
        f[v] = Some(if t.is_leaf(v) {
            own
        } else {
            let l = t.child(v, 0).expect("binary");
            let r = t.child(v, 1).expect("binary");
            let fl = f[l].take().expect("child done");
            let fr = f[r].take().expect("child done");
            fl + fr + own
        });
    }
    Ok(f[0].take().expect("root done"))
}

/// `Z*_β(t) = Σ_v |t_v|^β`.
pub fn power_sum<F: Real>(t: &Tree, beta: f64) -> F {
    let b = F::of(beta);
    t.subtree_sizes().iter().fold(F::zero(), |acc, &s| acc + F::of_usize(s).powf(b))
}

/// `|t|^{−(β+1/2)} Σ_v |t_v|^β`, the Catalan-model scaling.
pub fn power_sum_scaled<F: Real>(t: &Tree, beta: f64) -> F {
    power_sum::<F>(t, beta) * F::of_usize(t.len()).powf(F::of(-(beta + 0.5)))
}

/// `a_p p^{−(β+1)} Σ_v |t_v|^β`, the conditioned-GW scaling.
pub fn power_sum_gw_scaled<F: Real>(t: &Tree, beta: f64, a_p: f64) -> F {
    power_sum::<F>(t, beta) * F::of(a_p) * F::of_usize(t.len()).powf(F::of(-(beta + 1.0)))
}

/// Classical indices. The binary-only entries are `None` on trees that are
/// not full binary. `W` and `Co` sum over ordered pairs.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IndexBundle {
    pub path_length: u128,
    pub wiener: u128,
    pub sackin: Option<u128>,
    pub colless: Option<u128>,
    pub cophenetic: Option<u128>,
    pub chi: Option<u128>,
    pub shape: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Sums {
    n: u128,
    a1: u128,
    squares: u128,
}

fn sums(t: &Tree) -> Sums {
    let mut a1 = 0u128;
    let mut squares = 0u128;
    for &s in t.subtree_sizes() {
        a1 += s as u128;
        squares += (s as u128) * (s as u128);
    }
    Sums { n: t.len() as u128, a1, squares }
}

/// `χ(t) = Σ_{v ∈ t*} min(|t_{v1}|, |t_{v2}|)`.
pub fn chi(t: &Tree) -> Result<u128, FunctionalError> {
    if !t.is_full_binary() {
        return Err(FunctionalError::NotFullBinary);
    }
    let sz = t.subtree_sizes();
    Ok((0..t.len())
        .filter(|&v| !t.is_leaf(v))
        .map(|v| {
            let l = v + 1;
            let r = l + sz[l];
            sz[l].min(sz[r]) as u128
        })
        .sum())
}

pub fn path_length(t: &Tree) -> u128 {
    let s = sums(t);
    s.a1 - s.n
}

pub fn wiener(t: &Tree) -> u128 {
    let s = sums(t);
    2 * (s.n * s.a1 - s.squares)
}

pub fn sackin(t: &Tree) -> Result<u128, FunctionalError> {
    if !t.is_full_binary() {
        return Err(FunctionalError::NotFullBinary);
    }
    Ok((sums(t).a1 - 1) / 2)
}

pub fn colless(t: &Tree) -> Result<u128, FunctionalError> {
    let x = chi(t)?;
    let s = sums(t);
    Ok((s.a1 - s.n - 2 * x) / 2)
}

pub fn cophenetic(t: &Tree) -> Result<u128, FunctionalError> {
    if !t.is_full_binary() {
        return Err(FunctionalError::NotFullBinary);
    }
    let s = sums(t);
    Ok((s.squares + 1 - s.n * s.n - s.n) / 4)
}

/// `Σ_v log |t_v|`.
pub fn shape_functional(t: &Tree) -> f64 {
    t.subtree_sizes().iter().map(|&s| (s as f64).ln()).sum()
}

/// All indices from the subtree-size sums. With `brute_force`, each one is
/// also recomputed from its raw definition and any disagreement panics.
pub fn classic_indices(t: &Tree, brute_force: bool) -> IndexBundle {
    let s = sums(t);
    let binary = t.is_full_binary();
    let bundle = IndexBundle {
        path_length: s.a1 - s.n,
        wiener: 2 * (s.n * s.a1 - s.squares),
        sackin: binary.then(|| (s.a1 - 1) / 2),
        colless: if binary { colless(t).ok() } else { None },
        cophenetic: binary.then(|| (s.squares + 1 - s.n * s.n - s.n) / 4),
        chi: if binary { chi(t).ok() } else { None },
        shape: shape_functional(t),
    };
    if brute_force {
        let raw = brute::indices(t);
        assert_eq!(bundle.path_length, raw.path_length, "path length mismatch on {t}");
        assert_eq!(bundle.wiener, raw.wiener, "Wiener mismatch on {t}");
        assert_eq!(bundle.sackin, raw.sackin, "Sackin mismatch on {t}");
        assert_eq!(bundle.colless, raw.colless, "Colless mismatch on {t}");
        assert_eq!(bundle.cophenetic, raw.cophenetic, "cophenetic mismatch on {t}");
    }
    bundle
}

/// `D_k(t) = Σ_{u ∈ t^k} d(∅, 𝔪(u)) = Σ_v |t_v|^k − |t|^k`.
pub fn d_k(t: &Tree, k: u32) -> Result<u128, FunctionalError> {
    if k == 0 {
        return Err(FunctionalError::KZero);
    }
    if k > MAX_K {
        return Err(FunctionalError::KTooLarge { k });
    }
    let pow = |s: usize| (s as u128).checked_pow(k).ok_or(FunctionalError::Overflow);
    let mut total = 0u128;
    for &s in &t.subtree_sizes()[1..] {
        total = total.checked_add(pow(s)?).ok_or(FunctionalError::Overflow)?;
    }
    Ok(total)
}

/// Raw-definition oracles, quadratic or worse.
pub mod brute {
    use std::collections::VecDeque;

    use super::{FunctionalError, IndexBundle, MAX_K};
    use crate::tree::Tree;

    fn neighbours(t: &Tree) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); t.len()];
        for v in 1..t.len() {
            let p = t.parents()[v];
            adj[v].push(p);
            adj[p].push(v);
        }
        adj
    }

    /// `Σ_{u,w} d(u, w)` over ordered pairs, one BFS per source.
    pub fn wiener(t: &Tree) -> u128 {
        let adj = neighbours(t);
        let n = t.len();
        let mut total = 0u128;
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for src in 0..n {
            dist.fill(usize::MAX);
            dist[src] = 0;
            queue.push_back(src);
            while let Some(v) = queue.pop_front() {
                total += dist[v] as u128;
                for &w in &adj[v] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        total
    }

    pub fn path_length(t: &Tree) -> u128 {
        t.depths().iter().map(|&d| d as u128).sum()
    }

    pub fn sackin(t: &Tree) -> u128 {
        t.leaves().map(|v| t.depth(v) as u128).sum()
    }

    pub fn colless(t: &Tree) -> u128 {
        let leaves_under = |v: usize| (v..v + t.subtree_size(v)).filter(|&w| t.is_leaf(w)).count();
        (0..t.len())
            .filter(|&v| !t.is_leaf(v))
            .map(|v| {
                let kids: Vec<usize> = t.children(v).collect();
                let (l, r) = (leaves_under(kids[0]), leaves_under(kids[1]));
                l.abs_diff(r) as u128
            })
            .sum()
    }

    /// `Σ_{u ≠ w ∈ L(t)} d(∅, u ∧ w)` over ordered leaf pairs.
    pub fn cophenetic(t: &Tree) -> u128 {
        let leaves: Vec<usize> = t.leaves().collect();
        let mut total = 0u128;
        for &u in &leaves {
            for &w in &leaves {
                if u != w {
                    total += t.mrca_depth([u, w]).expect("valid") as u128;
                }
            }
        }
        total
    }

    pub fn indices(t: &Tree) -> IndexBundle {
        let binary = t.is_full_binary();
        IndexBundle {
            path_length: path_length(t),
            wiener: wiener(t),
            sackin: binary.then(|| sackin(t)),
            colless: binary.then(|| colless(t)),
            cophenetic: binary.then(|| cophenetic(t)),
            chi: None,
            shape: super::shape_functional(t),
        }
    }

    /// `D_k` by enumerating all `|t|^k` ordered node tuples.
    pub fn d_k(t: &Tree, k: u32) -> Result<u128, FunctionalError> {
        if k == 0 {
            return Err(FunctionalError::KZero);
        }
        if k > MAX_K {
            return Err(FunctionalError::KTooLarge { k });
        }
        let n = t.len();
        let mut idx = vec![0usize; k as usize];
        let mut total = 0u128;
        loop {
            total += t.mrca_depth(idx.iter().copied()).expect("valid") as u128;
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    return Ok(total);
                }
                idx[pos] += 1;
                if idx[pos] < n {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
}
