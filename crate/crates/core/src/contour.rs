//! Contour process of a finite ordered tree and the contour functionals
//! `𝒟_k`.
//!
//! Times are integers `0..=2|t|`; the process is linear between them with
//! slope `±1` except on the terminal flat `[2|t| − 2, 2|t|]`. All integrals
//! are taken in the contour time `u = 2x`, so for instance
//! `𝒟_1 = ½ ∫_0^{2|t|} C(u) du`.

use std::sync::OnceLock;

use rayon::prelude::*;
use thiserror::Error;

use crate::rmq::SparseTable;
use crate::scalar::Scalar;
use crate::tree::Tree;
use crate::Rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    #[error("time {0} outside the contour domain [0, {1}]")]
    OutOfDomain(f64, f64),
    #[error("k must be positive")]
    KZero,
}

#[derive(Debug)]
pub struct Contour {
    heights: Vec<u32>,
    /// `L_k`: time of the first visit to the `k`-th node in preorder.
    arrival: Vec<usize>,
    sizes: Vec<usize>,
    depths: Vec<usize>,
    rmq: OnceLock<SparseTable<u32>>,
}

impl Clone for Contour {
    fn clone(&self) -> Self {
        Self {
            heights: self.heights.clone(),
            arrival: self.arrival.clone(),
            sizes: self.sizes.clone(),
            depths: self.depths.clone(),
            rmq: OnceLock::new(),
        }
    }
}

/// Half-open time interval `[start, end)`.
pub type Span = (usize, usize);

pub fn build_contour(t: &Tree) -> Contour {
    let n = t.len();
    let mut heights = Vec::with_capacity(2 * n + 1);
    let mut arrival = vec![0usize; n];
    heights.push(0u32);
    let mut cur = 0usize;
    for (v, at) in arrival.iter_mut().enumerate().skip(1) {
        let target = t.depth(v) - 1;
        while cur > target {
            cur -= 1;
            heights.push(cur as u32);
        }
        cur += 1;
        heights.push(cur as u32);
        *at = heights.len() - 1;
    }
    while cur > 0 {
        cur -= 1;
        heights.push(cur as u32);
    }
    heights.push(0);
    heights.push(0);
    debug_assert_eq!(heights.len(), 2 * n + 1);
    Contour { heights, arrival, sizes: t.subtree_sizes().to_vec(), depths: t.depths().to_vec(), rmq: OnceLock::new() }
}

impl Contour {
    pub fn heights(&self) -> &[u32] {
        &self.heights
    }

    /// `|t|`.
    pub fn node_count(&self) -> usize {
        self.sizes.len()
    }

    /// Right end `2|t|` of the time domain.
    pub fn duration(&self) -> usize {
        self.heights.len() - 1
    }

    fn rmq(&self) -> &SparseTable<u32> {
        self.rmq.get_or_init(|| SparseTable::new(self.heights.clone()))
    }

    fn check(&self, s: f64) -> Result<(), ContourError> {
        let end = self.duration() as f64;
        if (0.0..=end).contains(&s) {
            Ok(())
        } else {
            Err(ContourError::OutOfDomain(s, end))
        }
    }

    /// Linear interpolation at real time `s`.
    pub fn eval(&self, s: f64) -> Result<f64, ContourError> {
        self.check(s)?;
        Ok(self.eval_unchecked(s))
    }

    #[inline]
    fn eval_unchecked(&self, s: f64) -> f64 {
        let last = self.duration();
        let i = (s.floor() as usize).min(last);
        if i == last {
            return self.heights[last] as f64;
        }
        let (a, b) = (self.heights[i] as f64, self.heights[i + 1] as f64);
        a + (b - a) * (s - i as f64)
    }

    /// `m_C(a, b)`: the minimum of the contour over the interval with bounds
    /// `a` and `b`.
    pub fn min(&self, a: f64, b: f64) -> Result<f64, ContourError> {
        self.check(a)?;
        self.check(b)?;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut m = self.eval_unchecked(lo).min(self.eval_unchecked(hi));
        let (first, last) = (lo.ceil() as usize, hi.floor() as usize);
        if first <= last {
            m = m.min(self.rmq().min(first, last) as f64);
        }
        Ok(m)
    }

    /// `I_u` for the node with preorder index `v`: two unit pieces whose union
    /// is the time spent on the edge below `v`. The root gets the terminal
    /// flat `[2|t| − 2, 2|t|]`, split at its midpoint.
    pub fn interval(&self, v: usize) -> [Span; 2] {
        let end = self.duration();
        if v == 0 {
            return [(end - 2, end - 1), (end - 1, end)];
        }
        let l = self.arrival[v];
        let l2 = l + 2 * (self.sizes[v] - 1);
        [(l - 1, l), (l2, l2 + 1)]
    }

    /// `(s, (a_p/p) C(2ps))` at `points + 1` equally spaced `s ∈ [0, 1]`,
    /// with `p = |t|`.
    pub fn scaled_samples(&self, a_p: f64, points: usize) -> Vec<(f64, f64)> {
        let p = self.node_count() as f64;
        (0..=points)
            .map(|i| {
                let s = i as f64 / points as f64;
                (s, a_p / p * self.eval_unchecked(2.0 * p * s))
            })
            .collect()
    }

    /// Depth `d(∅, v)` of the node with preorder index `v`.
    pub fn depth(&self, v: usize) -> usize {
        self.depths[v]
    }

    pub fn max_height(&self) -> u32 {
        self.heights.iter().copied().max().unwrap_or(0)
    }

    /// `∫_0^{2|t|} C(u) du`, exact.
    pub fn area(&self) -> Rational {
        let twice: i128 = self.heights.windows(2).map(|w| (w[0] + w[1]) as i128).sum();
        Rational::new(twice, 2)
    }

    /// `𝒟_1 = ½ ∫ C`.
    pub fn d1(&self) -> Rational {
        self.area() / Rational::from_integer(2)
    }

    /// `6 ∫∫_{u<v} m_C(u, v) du dv`, exactly, by the closed form of each
    /// unit cell.
    fn lower_triangle_sixths(&self) -> i128 {
        let h = &self.heights;
        let cells = h.len() - 1;
        (0..cells)
            .into_par_iter()
            .map(|a| {
                // diagonal cell: u < v inside [a, a+1]
                let (ha, hb) = (h[a] as i128, h[a + 1] as i128);
                let mut acc = match hb - ha {
                    1 => 3 * ha + 1,
                    -1 => 3 * ha - 2,
                    _ => 3 * ha,
                };
                let left_dips = hb > ha;
                let mut c = i128::MAX;
                for b in a + 1..cells {
                    c = c.min(h[b] as i128);
                    // m = c − max(left deficit, right deficit); each deficit
                    // is a unit ramp from 1 to 0 when the edge dips below c.
                    let left = left_dips && ha < c;
                    let right = (h[b + 1] as i128) < c;
                    acc += match (left, right) {
                        (false, false) => 6 * c,
                        (true, true) => 6 * c - 4,
                        _ => 6 * c - 3,
                    };
                }
                acc
            })
            .sum()
    }

    /// `𝒟_2 = ½ ∫∫_{u<v} m_C(u, v) du dv`, exact.
    pub fn d2(&self) -> Rational {
        Rational::new(self.lower_triangle_sixths(), 12)
    }

    /// `𝒟_k`. Exact for `k ≤ 2`; otherwise midpoint quadrature with `refine`
    /// subcells per unit time.
    pub fn d_k(&self, k: u32, refine: usize) -> Result<DkEstimate, ContourError> {
        match k {
            0 => Err(ContourError::KZero),
            1 => Ok(DkEstimate::exact(self.d1())),
            2 => Ok(DkEstimate::exact(self.d2())),
            _ => Ok(self.d_k_midpoint(k, refine)),
        }
    }

    // 𝒟_k = 2^{−k} (k(k−1)/2) ∫∫_{[0,2|t|]²} |v−u|^{k−2} m(u∧v, u∨v).
    // The integrand is Lipschitz with constant L in each variable, so the
    // midpoint rule with step δ errs by at most (2|t|)² · 2L · δ/4.
    pub fn d_k_midpoint(&self, k: u32, refine: usize) -> DkEstimate {
        assert!(k >= 2, "the midpoint rule needs k >= 2");
        let refine = refine.max(1);
        let end = self.duration();
        let steps = end * refine;
        let delta = 1.0 / refine as f64;
        let mids: Vec<f64> = (0..steps).map(|i| (i as f64 + 0.5) * delta).collect();
        let vals: Vec<f64> = mids.iter().map(|&s| self.eval_unchecked(s)).collect();
        let e = (k - 2) as i32;
        let h = &self.heights;
        let upper: f64 = (0..steps)
            .into_par_iter()
            .map(|i| {
                let mut run = vals[i];
                let mut row = 0.0;
                let mut next_int = (mids[i].floor() as usize) + 1;
                for j in i + 1..steps {
                    while (next_int as f64) < mids[j] {
                        run = run.min(h[next_int] as f64);
                        next_int += 1;
                    }
                    let m = run.min(vals[j]);
                    row += (mids[j] - mids[i]).powi(e) * m;
                }
                row
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>();
        // the diagonal only contributes when the weight |v−u|^0 is 1
        let diagonal: f64 = if e == 0 { vals.iter().sum() } else { 0.0 };
        let full = (2.0 * upper + diagonal) * delta * delta;
        let scale = 0.5 * (k * (k - 1)) as f64 / 2f64.powi(k as i32);
        let span = end as f64;
        let height = self.max_height() as f64;
        let lip = (k - 2) as f64 * span.powi(e - 1) * height + span.powi(e);
        let bound = scale * span * span * 2.0 * lip * delta / 4.0;
        DkEstimate { value: scale * full, exact: None, step: Some(delta), error_bound: bound }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DkEstimate {
    pub value: f64,
    pub exact: Option<Rational>,
    /// Quadrature step in contour time, when quadrature was used.
    pub step: Option<f64>,
    /// Bound on `|value − 𝒟_k|`.
    pub error_bound: f64,
}

impl DkEstimate {
    fn exact(q: Rational) -> Self {
        Self { value: q.to_f64_lossy(), exact: Some(q), step: None, error_bound: 0.0 }
    }
}
