//! Binary trees with branch lengths spanned by leaves of an excursion.
//!
//! Given leaf times `t_1 < … < t_{n+1}` and the heights `y_k` above them,
//! the spanned tree is determined by the minima `g_k` of the excursion over
//! the gaps `[t_k, t_{k+1}]`: its internal nodes are the gaps, arranged as
//! the Cartesian tree of `(g_k)` (the deepest split is the root), each
//! internal node carries `g_k − g_parent` and each leaf carries
//! `y_k − max(g_{k−1}, g_k)`.
//!
//! [`embed_marked_tree`] reads the minima off the grid. [`embed_uniform_leaves`]
//! draws continuous uniform leaf times and refines the excursion between
//! grid points by its conditional law (a Brownian bridge kept positive), so
//! no time ever has to be snapped to the grid.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use thiserror::Error;

use crate::excursion::Excursion;
use crate::tree::Tree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("split between leaves {left} and {right} is not a unique interior grid minimum")]
    DegenerateArgmin { left: usize, right: usize },
    #[error("leaf times must be sorted, distinct and interior: {0}")]
    InvalidTimes(String),
    #[error("shape is not full binary")]
    NotFullBinary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedTree {
    pub shape: Tree,
    /// Length of the branch below each node, in preorder.
    pub lengths: Vec<f64>,
    /// Sorted leaf times in `(0, 1)`.
    pub leaf_times: Vec<f64>,
    /// Preorder index of the leaf attached to each leaf time.
    pub leaf_nodes: Vec<usize>,
}

impl MarkedTree {
    /// `L_n = Σ_v h_{n,v}`.
    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn root_length(&self) -> f64 {
        self.lengths[0]
    }

    /// Number of internal nodes `n`.
    pub fn internal_count(&self) -> usize {
        (self.shape.len() - 1) / 2
    }

    /// Sum of the lengths from the root down to and including each node.
    pub fn heights(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.lengths.len()];
        for v in 0..out.len() {
            let above = self.shape.parent(v).map_or(0.0, |p| out[p]);
            out[v] = above + self.lengths[v];
        }
        out
    }

    /// Heights of the leaves in leaf-time order.
    pub fn leaf_heights(&self) -> Vec<f64> {
        let h = self.heights();
        self.leaf_nodes.iter().map(|&v| h[v]).collect()
    }
}

/// Assembles the spanned tree from leaf heights `y` (length `n + 1`) and
/// gap minima `g` (length `n`). Ties between gaps that compete for the same
/// split are reported as degenerate.
fn assemble(y: &[f64], g: &[f64], times: Vec<f64>) -> Result<MarkedTree, EmbeddingError> {
    let n = g.len();
    debug_assert_eq!(y.len(), n + 1);
    // min-Cartesian tree of the gaps
    let mut left = vec![usize::MAX; n];
    let mut right = vec![usize::MAX; n];
    let mut stack: Vec<usize> = Vec::with_capacity(64);
    for k in 0..n {
        let mut last = usize::MAX;
        while let Some(&top) = stack.last() {
            if g[top] == g[k] {
                return Err(EmbeddingError::DegenerateArgmin { left: top, right: k + 1 });
            }
            if g[top] > g[k] {
                last = stack.pop().expect("nonempty");
            } else {
                break;
            }
        }
        left[k] = last;
        if let Some(&top) = stack.last() {
            right[top] = k;
        }
        stack.push(k);
    }
    let mut degrees = Vec::with_capacity(2 * n + 1);
    let mut lengths = Vec::with_capacity(2 * n + 1);
    let mut leaf_nodes = vec![0usize; n + 1];
    enum Item {
        Gap(usize, f64),
        Leaf(usize, f64),
    }
    let root = if n == 0 { Item::Leaf(0, 0.0) } else { Item::Gap(stack[0], 0.0) };
    let mut todo = vec![root];
    while let Some(item) = todo.pop() {
        match item {
            Item::Gap(k, base) => {
                degrees.push(2);
                lengths.push(g[k] - base);
                let r = if right[k] == usize::MAX { Item::Leaf(k + 1, g[k]) } else { Item::Gap(right[k], g[k]) };
                let l = if left[k] == usize::MAX { Item::Leaf(k, g[k]) } else { Item::Gap(left[k], g[k]) };
                todo.push(r);
                todo.push(l);
            }
            Item::Leaf(k, base) => {
                degrees.push(0);
                leaf_nodes[k] = lengths.len();
                lengths.push(y[k] - base);
            }
        }
    }
    let shape = Tree::from_degrees(degrees).expect("Cartesian tree is a valid binary tree");
    Ok(MarkedTree { shape, lengths, leaf_times: times, leaf_nodes })
}

/// The spanned tree for leaves at the grid indices `times` (sorted,
/// distinct, strictly inside `0..M`). Each gap must have a unique minimum
/// strictly between its two leaves.
pub fn embed_marked_tree(h: &Excursion<f64>, times: &[usize]) -> Result<MarkedTree, EmbeddingError> {
    let m = h.grid();
    if times.is_empty() {
        return Err(EmbeddingError::InvalidTimes("no leaves".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) || times[0] == 0 || *times.last().expect("nonempty") >= m {
        return Err(EmbeddingError::InvalidTimes(format!("{times:?}")));
    }
    let v = h.values();
    let y: Vec<f64> = times.iter().map(|&t| v[t]).collect();
    let mut g = Vec::with_capacity(times.len() - 1);
    for (k, w) in times.windows(2).enumerate() {
        let degenerate = EmbeddingError::DegenerateArgmin { left: k, right: k + 1 };
        let (a, b) = (w[0], w[1]);
        if b == a + 1 {
            return Err(degenerate);
        }
        let mut best = a + 1;
        let mut tied = false;
        for i in a + 2..b {
            if v[i] < v[best] {
                best = i;
                tied = false;
            } else if v[i] == v[best] {
                tied = true;
            }
        }
        if tied || v[best] >= v[a] || v[best] >= v[b] {
            return Err(degenerate);
        }
        g.push(v[best]);
    }
    let grid = times.iter().map(|&t| t as f64 / m as f64).collect();
    assemble(&y, &g, grid)
}

/// Brownian bridge kept positive, variance rate `rate`, from `a` at time 0
/// to `b` at time `tau`: a draw of its value at time `s`.
fn positive_bridge_point<R: Rng + ?Sized>(a: f64, b: f64, tau: f64, s: f64, rate: f64, rng: &mut R) -> f64 {
    let sd = (rate * s * (tau - s) / tau).sqrt();
    if a == 0.0 || b == 0.0 {
        // Bessel(3) bridge: norm of a three-dimensional Brownian bridge
        // started from the zero end
        let shift = if a == 0.0 { b * s / tau } else { a * (tau - s) / tau };
        let x: f64 = shift + sd * rng.sample::<f64, _>(StandardNormal);
        let y: f64 = sd * rng.sample::<f64, _>(StandardNormal);
        let z: f64 = sd * rng.sample::<f64, _>(StandardNormal);
        return (x * x + y * y + z * z).sqrt();
    }
    let mean = a + (b - a) * s / tau;
    loop {
        let y = mean + sd * rng.sample::<f64, _>(StandardNormal);
        if y <= 0.0 {
            continue;
        }
        // probability that both halves stay positive
        let keep = -(-2.0 * a * y / (rate * s)).exp_m1() * -(-2.0 * y * b / (rate * (tau - s))).exp_m1();
        if rng.random::<f64>() < keep {
            return y;
        }
    }
}

/// Minimum of a Brownian bridge from `a` to `b` over duration `tau`,
/// conditioned to stay positive.
fn positive_bridge_min<R: Rng + ?Sized>(a: f64, b: f64, tau: f64, rate: f64, rng: &mut R) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    // P(min > m) ∝ 1 − exp(−2(a−m)(b−m)/(rate τ)); invert on (p0, 1]
    let p0 = (-2.0 * a * b / (rate * tau)).exp();
    let u: f64 = rng.random();
    let w = 1.0 - u * (1.0 - p0);
    let c = -0.5 * rate * tau * w.ln();
    let d = a - b;
    0.5 * ((a + b) - (d * d + 4.0 * c).sqrt())
}

/// Spanned tree of `n + 1` i.i.d. uniform leaves of the excursion. The path
/// between grid points is resampled from its conditional law given the grid
/// values, with variance rate `2/α`.
pub fn embed_uniform_leaves<R: Rng + ?Sized>(h: &Excursion<f64>, n: usize, rng: &mut R) -> MarkedTree {
    let m = h.grid();
    let v = h.values();
    let rate = 2.0 / h.alpha();
    let dt = 1.0 / m as f64;
    let mut times: Vec<f64> = (0..=n).map(|_| rng.random::<f64>()).collect();
    times.sort_by(f64::total_cmp);
    // leaf heights, cell by cell, each conditioned on the previous point of
    // the same cell
    let mut y = Vec::with_capacity(n + 1);
    let cell_of = |t: f64| ((t * m as f64) as usize).min(m - 1);
    let mut prev_cell = usize::MAX;
    let (mut t0, mut y0) = (0.0, 0.0);
    for &t in &times {
        let c = cell_of(t);
        if c != prev_cell {
            prev_cell = c;
            t0 = c as f64 * dt;
            y0 = v[c];
        }
        let t1 = (c + 1) as f64 * dt;
        let s = (t - t0).max(f64::MIN_POSITIVE);
        let tau = t1 - t0;
        let val = positive_bridge_point(y0, v[c + 1], tau, s.min(tau * (1.0 - 1e-15)), rate, rng);
        y.push(val);
        t0 = t;
        y0 = val;
    }
    // gap minima over the refined pieces
    let mut g = Vec::with_capacity(n);
    for k in 0..n {
        let (ta, tb) = (times[k], times[k + 1]);
        let (ca, cb) = (cell_of(ta), cell_of(tb));
        let low = if ca == cb {
            positive_bridge_min(y[k], y[k + 1], tb - ta, rate, rng)
        } else {
            let mut low = positive_bridge_min(y[k], v[ca + 1], (ca + 1) as f64 * dt - ta, rate, rng);
            for c in ca + 1..cb {
                low = low.min(positive_bridge_min(v[c], v[c + 1], dt, rate, rng));
            }
            low.min(positive_bridge_min(v[cb], y[k + 1], tb - cb as f64 * dt, rate, rng))
        };
        g.push(low);
    }
    match assemble(&y, &g, times.clone()) {
        Ok(t) => t,
        Err(_) => {
            // exact ties between continuous draws; redraw
            log::debug!("tied gap minima, redrawing the leaves");
            embed_uniform_leaves(h, n, rng)
        }
    }
}

/// `(L E_v / S)_v` with `E_v` i.i.d. unit exponentials, `S = Σ E_v`.
pub fn sample_branch_lengths_gamma<R: Rng + ?Sized>(
    shape: &Tree,
    total: f64,
    rng: &mut R,
) -> Result<Vec<f64>, EmbeddingError> {
    if !shape.is_full_binary() {
        return Err(EmbeddingError::NotFullBinary);
    }
    let e: Vec<f64> = (0..shape.len()).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    Ok(e.iter().map(|x| total * x / s).collect())
}
