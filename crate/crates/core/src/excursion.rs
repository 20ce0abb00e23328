//! Discretized excursions and the functionals `σ_{r,s}`, `Z_β` and `Φ_h`.
//!
//! An [`Excursion`] is a nonnegative function on the grid `{0, 1/M, …, 1}`
//! vanishing at both ends. Its grid version of `σ_{r,s}` counts the cells
//! `[j, j+1]` joined to the grid point `i` above level `r`:
//!
//! ```text
//! σ̂_{r,i} = #{ j : min h[min(i,j) ..= max(i,j+1)] ≥ r } / M
//! ```
//!
//! As a function of `r` this is a step function whose jumps sit at values
//! of `h`, so `Z_β` and `Φ_h(f)` are finite sums. They are evaluated in
//! `O(M)` from the nearest-smaller-value structure of `h`: each grid point
//! `v` owns the levels `(max(h[L_v], h[R_v]), h_v]`, over which the connected
//! component of `v` is the index range `(L_v, R_v)`.

use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::functionals::WeightFunction;
use crate::rmq::SparseTable;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExcursionError {
    #[error("grid index {index} outside 0..={m}")]
    OutOfDomain { index: usize, m: usize },
    #[error("beta = {0} is outside the admissible range")]
    BetaOutOfRange(f64),
    #[error("not an excursion: {0}")]
    Invalid(String),
    #[error("excursion file, line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug)]
pub struct Excursion<F> {
    values: Vec<F>,
    alpha: f64,
    rmq: OnceLock<SparseTable<F>>,
}

impl<F: Real> Clone for Excursion<F> {
    fn clone(&self) -> Self {
        Self { values: self.values.clone(), alpha: self.alpha, rmq: OnceLock::new() }
    }
}

impl<F: Real> PartialEq for Excursion<F> {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && self.alpha == other.alpha
    }
}

impl<F: Real> Excursion<F> {
    pub fn new(values: Vec<F>, alpha: f64) -> Result<Self, ExcursionError> {
        if values.len() < 2 {
            return Err(ExcursionError::Invalid("need at least two grid points".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ExcursionError::Invalid(format!("alpha must be positive, got {alpha}")));
        }
        let m = values.len() - 1;
        if values[0] != F::zero() || values[m] != F::zero() {
            return Err(ExcursionError::Invalid("endpoints must vanish".into()));
        }
        if let Some(i) = values.iter().position(|v| !(*v >= F::zero()) || !v.is_finite()) {
            return Err(ExcursionError::Invalid(format!("value at index {i} is negative or not finite")));
        }
        Ok(Self { values, alpha, rmq: OnceLock::new() })
    }

    /// `h(i/M) = f(i/M)`; `f` must vanish at 0 and 1.
    pub fn from_fn(m: usize, alpha: f64, f: impl Fn(f64) -> f64) -> Result<Self, ExcursionError> {
        let values = (0..=m).map(|i| F::of(f(i as f64 / m as f64))).collect();
        Self::new(values, alpha)
    }

    /// `h(x) = min(x, 1 − x)`.
    pub fn tent(m: usize) -> Self {
        let values = (0..=m).map(|i| F::of_usize(i.min(m - i)) / F::of_usize(m)).collect();
        Self::new(values, 2.0).expect("tent is an excursion")
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// Grid resolution `M`.
    pub fn grid(&self) -> usize {
        self.values.len() - 1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `c · h`, same grid and `α`.
    pub fn scaled(&self, c: F) -> Self {
        Self { values: self.values.iter().map(|&v| v * c).collect(), alpha: self.alpha, rmq: OnceLock::new() }
    }

    fn rmq(&self) -> &SparseTable<F> {
        self.rmq.get_or_init(|| SparseTable::new(self.values.clone()))
    }

    /// Linear interpolation at `s ∈ [0, 1]`.
    pub fn eval(&self, s: f64) -> F {
        let m = self.grid();
        let x = s.clamp(0.0, 1.0) * m as f64;
        let i = (x.floor() as usize).min(m - 1);
        let frac = F::of(x - i as f64);
        self.values[i] + (self.values[i + 1] - self.values[i]) * frac
    }

    /// `m̂(i, j)`: minimum of `h` over grid indices between `i` and `j`.
    pub fn grid_min(&self, i: usize, j: usize) -> F {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.rmq().min(lo, hi)
    }

    /// `m_h(s, t)` for the piecewise-linear interpolant, `s, t ∈ [0, 1]`.
    pub fn min(&self, s: f64, t: f64) -> F {
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        let m = self.grid() as f64;
        let mut best = self.eval(lo).min(self.eval(hi));
        let (first, last) = ((lo * m).ceil() as usize, (hi * m).floor() as usize);
        if first <= last {
            best = best.min(self.rmq().min(first, last.min(self.grid())));
        }
        best
    }

    /// `σ̂_{r,i}`; zero when `r > h(i/M)`.
    pub fn sigma_rs(&self, r: F, i: usize) -> Result<F, ExcursionError> {
        let m = self.grid();
        if i > m {
            return Err(ExcursionError::OutOfDomain { index: i, m });
        }
        let h = &self.values;
        if r > h[i] {
            return Ok(F::zero());
        }
        let mut lo = i;
        while lo > 0 && h[lo - 1] >= r {
            lo -= 1;
        }
        let mut hi = i;
        while hi < m && h[hi + 1] >= r {
            hi += 1;
        }
        Ok(F::of_usize(hi - lo) / F::of_usize(m))
    }

    /// `(component size, owned level range)` for every grid point: the size
    /// counts grid indices in `(L_v, R_v)`.
    fn components(&self) -> Vec<(usize, F)> {
        let h = &self.values;
        let n = h.len();
        // nearest index to the left with h <= h_v, to the right with h < h_v
        let mut left = vec![usize::MAX; n];
        let mut right = vec![n; n];
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        for i in 0..n {
            while let Some(&top) = stack.last() {
                if h[top] > h[i] {
                    right[top] = i;
                    stack.pop();
                } else {
                    break;
                }
            }
            if let Some(&top) = stack.last() {
                left[i] = top;
            }
            stack.push(i);
        }
        (0..n)
            .map(|v| {
                let lo = if left[v] == usize::MAX { F::zero() } else { h[left[v]] };
                let hi = if right[v] == n { F::zero() } else { h[right[v]] };
                let start = left[v].wrapping_add(1);
                (right[v] - start, h[v] - lo.max(hi))
            })
            .collect()
    }

    /// `Φ̂_h(f) = (1/M) Σ_i ∫_0^{h_i} f(σ̂_{r,i}) dr`.
    pub fn phi(&self, f: &WeightFunction<F>) -> F {
        let m = F::of_usize(self.grid());
        let mut acc = F::zero();
        for (size, height) in self.components() {
            if height > F::zero() {
                let sigma = F::of_usize(size - 1) / m;
                acc += F::of_usize(size) * height * f.eval(sigma);
            }
        }
        acc / m
    }

    /// `Ẑ_β = Φ̂_h(x^{β−1} 1_{(0,1]})`.
    pub fn z_beta(&self, beta: f64) -> Result<F, ExcursionError> {
        if !(beta > 0.0) {
            return Err(ExcursionError::BetaOutOfRange(beta));
        }
        if beta <= 0.5 {
            log::warn!("Z_beta is infinite for Brownian excursions when beta <= 1/2 (beta = {beta})");
        }
        Ok(self.phi(&WeightFunction::Power(beta - 1.0)))
    }

    /// `∫ h`, trapezoid rule (exact for the interpolant).
    pub fn area(&self) -> F {
        let m = F::of_usize(self.grid());
        let inner = self.values.iter().fold(F::zero(), |a, &v| a + v);
        inner / m
    }

    /// `Z_β` through `½ β(β−1) ∫∫ |t−s|^{β−2} m(s,t)`, with the kernel
    /// integrated exactly over each pair of grid cells and `m` replaced on
    /// cells `i ≤ j` by the grid minimum over indices `i ..= j + 1`.
    pub fn z_beta_pairwise(&self, beta: f64) -> Result<F, ExcursionError> {
        if !(beta > 1.0) {
            return Err(ExcursionError::BetaOutOfRange(beta));
        }
        let m = self.grid();
        let h = &self.values;
        let b = F::of(beta);
        let two = F::of(2.0);
        // K(d) = ∫∫_{cells at lag d} β(β−1)|t−s|^{β−2} in cell units
        let kernel: Vec<F> = (0..m)
            .map(|d| {
                let d = F::of_usize(d);
                (d + F::one()).powf(b) - two * d.powf(b) + (d - F::one()).abs().powf(b)
            })
            .collect();
        let mut total = F::zero();
        for i in 0..m {
            let mut run = h[i].min(h[i + 1]);
            let mut row = kernel[0] * run;
            for j in i + 1..m {
                run = run.min(h[j + 1]);
                row += two * kernel[j - i] * run;
            }
            total += row;
        }
        Ok(F::of(0.5) * total * F::of_usize(m).powf(-b))
    }

    /// Text form: `M alpha` then one value per line.
    pub fn to_text(&self) -> String
    where
        F: fmt::Display,
    {
        let mut s = format!("{} {}\n", self.grid(), self.alpha);
        for v in &self.values {
            s.push_str(&v.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self, ExcursionError>
    where
        F: std::str::FromStr,
        <F as std::str::FromStr>::Err: fmt::Display,
    {
        let mut lines =
            text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let perr = |line: usize, message: String| ExcursionError::Parse { line: line + 1, message };
        let (hl, header) = lines.next().ok_or_else(|| perr(0, "missing header".into()))?;
        let mut parts = header.split_whitespace();
        let m: usize =
            parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| perr(hl, "expected grid size M".into()))?;
        let alpha: f64 = parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| perr(hl, "expected alpha".into()))?;
        let mut values = Vec::with_capacity(m + 1);
        for (ln, l) in lines {
            values.push(l.trim().parse::<F>().map_err(|e| perr(ln, e.to_string()))?);
        }
        if values.len() != m + 1 {
            return Err(perr(hl, format!("expected {} values, found {}", m + 1, values.len())));
        }
        Self::new(values, alpha)
    }
}

/// Rotates the bridge at its leftmost minimum over `0..M`.
fn vervaat(bridge: &[f64]) -> Vec<f64> {
    let m = bridge.len() - 1;
    let mut rho = 0;
    for i in 1..m {
        if bridge[i] < bridge[rho] {
            rho = i;
        }
    }
    (0..=m).map(|i| bridge[(rho + i) % m] - bridge[rho]).collect()
}

/// Bridge from walk increments: partial sums minus the linear drift.
pub fn bridge_from_increments(increments: &[f64]) -> Vec<f64> {
    let m = increments.len();
    let mut walk = Vec::with_capacity(m + 1);
    walk.push(0.0);
    for &x in increments {
        let last = *walk.last().expect("nonempty");
        walk.push(last + x);
    }
    let end = walk[m];
    walk.iter().enumerate().map(|(i, w)| w - end * i as f64 / m as f64).collect()
}

/// Vervaat transform of the bridge built from `increments`, then scaled by
/// `√(2/α)`.
pub fn vervaat_from_increments<F: Real>(increments: &[f64], alpha: f64) -> Result<Excursion<F>, ExcursionError> {
    if increments.len() < 2 {
        return Err(ExcursionError::Invalid("need at least two increments".into()));
    }
    let scale = (2.0 / alpha).sqrt();
    let e = vervaat(&bridge_from_increments(increments));
    Excursion::new(e.iter().map(|&v| F::of(v * scale)).collect(), alpha)
}

/// Gaussian bridge on `M` steps, Vervaat-rotated and scaled to `√(2/α) B`.
pub fn sample_brownian_excursion<F: Real, R: Rng + ?Sized>(
    m: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Excursion<F>, ExcursionError> {
    if m < 2 {
        return Err(ExcursionError::Invalid(format!("grid size must be at least 2, got {m}")));
    }
    let sd = 1.0 / (m as f64).sqrt();
    loop {
        let inc: Vec<f64> =
            (0..m).map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).collect();
        let e = vervaat_from_increments::<F>(&inc, alpha)?;
        // a tied minimum leaves an interior zero; it has probability zero
        if e.values[1..m].iter().all(|&v| v > F::zero()) {
            return Ok(e);
        }
        log::debug!("resampling an excursion with an interior zero");
    }
}

/// How the grid values of a random excursion are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExcursionSampler {
    /// Vervaat transform of a Gaussian bridge. Rotating at the grid minimum
    /// rather than the true one leaves the grid values about half a step
    /// deviation below the excursion they approximate.
    #[default]
    Vervaat,
    /// Norm of a three-dimensional Brownian bridge, which is a Bessel(3)
    /// bridge: exact in law at the grid times.
    Bessel3,
}

impl std::str::FromStr for ExcursionSampler {
    type Err = ExcursionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vervaat" => Ok(Self::Vervaat),
            "bessel3" | "bessel" => Ok(Self::Bessel3),
            other => Err(ExcursionError::Invalid(format!("unknown excursion sampler {other:?}"))),
        }
    }
}

impl fmt::Display for ExcursionSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Vervaat => "vervaat",
            Self::Bessel3 => "bessel3",
        })
    }
}

/// `√(2/α) |(b_1, b_2, b_3)|` for three independent standard bridges on `M`
/// steps.
pub fn sample_bessel_excursion<F: Real, R: Rng + ?Sized>(
    m: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Excursion<F>, ExcursionError> {
    if m < 2 {
        return Err(ExcursionError::Invalid(format!("grid size must be at least 2, got {m}")));
    }
    let sd = 1.0 / (m as f64).sqrt();
    let mut sq = vec![0.0f64; m + 1];
    for _ in 0..3 {
        let inc: Vec<f64> =
            (0..m).map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).collect();
        for (acc, b) in sq.iter_mut().zip(bridge_from_increments(&inc)) {
            *acc += b * b;
        }
    }
    let scale = (2.0 / alpha).sqrt();
    let mut values: Vec<F> = sq.iter().map(|&x| F::of(scale * x.sqrt())).collect();
    // the drift correction leaves rounding noise at the pinned end
    values[0] = F::zero();
    values[m] = F::zero();
    Excursion::new(values, alpha)
}

pub fn sample_excursion<F: Real, R: Rng + ?Sized>(
    m: usize,
    alpha: f64,
    sampler: ExcursionSampler,
    rng: &mut R,
) -> Result<Excursion<F>, ExcursionError> {
    match sampler {
        ExcursionSampler::Vervaat => sample_brownian_excursion(m, alpha, rng),
        ExcursionSampler::Bessel3 => sample_bessel_excursion(m, alpha, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn tent4() -> Excursion<f64> {
        Excursion::tent(4)
    }

    #[test]
    fn vervaat_hand_examples() {
        let b = bridge_from_increments(&[0.5, 0.5, -0.5, 0.0]);
        assert_eq!(b, vec![0.0, 0.375, 0.75, 0.125, 0.0]);
        let e: Excursion<f64> = vervaat_from_increments(&[0.5, 0.5, -0.5, 0.0], 2.0).unwrap();
        assert_eq!(e.values(), &[0.0, 0.375, 0.75, 0.125, 0.0]);
        let e: Excursion<f64> = vervaat_from_increments(&[0.5, 0.5, -0.5, -0.5], 2.0).unwrap();
        assert_eq!(e.values(), &[0.0, 0.5, 1.0, 0.5, 0.0]);
        // rotation at an interior minimum
        let e: Excursion<f64> = vervaat_from_increments(&[-1.0, 0.5, 0.5, 0.0], 2.0).unwrap();
        assert_eq!(e.values(), &[0.0, 0.5, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn sampled_excursion_postconditions() {
        let mut rng = stream(2, 0);
        for m in [2, 3, 64, 1000] {
            let e: Excursion<f64> = sample_brownian_excursion(m, 2.0, &mut rng).unwrap();
            let v = e.values();
            assert_eq!((v[0], v[m]), (0.0, 0.0));
            assert!(v[1..m].iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn bessel_excursion_postconditions() {
        let mut rng = stream(3, 0);
        for m in [2, 5, 256] {
            let e: Excursion<f64> = sample_bessel_excursion(m, 2.0, &mut rng).unwrap();
            let v = e.values();
            assert_eq!((v[0], v[m]), (0.0, 0.0));
            assert!(v[1..m].iter().all(|&x| x > 0.0));
        }
        // E[e(1/2)] = 2√2/√π · √(1/4) for α = 2
        let mean: f64 =
            (0..4000).map(|_| sample_bessel_excursion::<f64, _>(2, 2.0, &mut rng).unwrap().values()[1]).sum::<f64>()
                / 4000.0;
        let want = (8.0 / std::f64::consts::PI).sqrt() * 0.5;
        assert!((mean - want).abs() < 0.02, "{mean} vs {want}");
    }

    #[test]
    fn sigma_tent_example() {
        let t = tent4();
        assert_eq!(t.sigma_rs(0.25, 2).unwrap(), 0.5);
        assert_eq!(t.sigma_rs(0.0, 1).unwrap(), 1.0);
        assert_eq!(t.sigma_rs(0.3, 1).unwrap(), 0.0);
        assert!(t.sigma_rs(0.0, 5).is_err());
    }

    // literal definition: count qualifying cells, integrate the step
    // function over the sorted breakpoints
    fn brute_phi(e: &Excursion<f64>, f: &WeightFunction<f64>) -> f64 {
        let h = e.values();
        let m = e.grid();
        let mut total = 0.0;
        for i in 0..=m {
            let mut levels: Vec<f64> = h.iter().copied().filter(|&x| x <= h[i]).collect();
            levels.push(0.0);
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            for w in levels.windows(2) {
                let r = 0.5 * (w[0] + w[1]);
                let count = (0..m)
                    .filter(|&j| {
                        let (lo, hi) = (i.min(j), i.max(j + 1));
                        h[lo..=hi].iter().all(|&x| x >= r)
                    })
                    .count();
                total += (w[1] - w[0]) * f.eval(count as f64 / m as f64);
            }
        }
        total / m as f64
    }

    #[test]
    fn sweep_matches_literal_definition() {
        let mut rng = stream(4, 0);
        let mut cases: Vec<Excursion<f64>> = vec![tent4(), Excursion::tent(10)];
        cases.push(Excursion::new(vec![0.0, 1.0, 0.2, 1.0, 0.0], 2.0).unwrap());
        cases.push(Excursion::new(vec![0.0, 0.5, 0.5, 0.25, 0.5, 0.0], 2.0).unwrap());
        for _ in 0..5 {
            cases.push(sample_brownian_excursion(37, 2.0, &mut rng).unwrap());
        }
        for e in &cases {
            for f in [
                WeightFunction::Power(0.0),
                WeightFunction::Power(1.0),
                WeightFunction::Power(-0.3),
                WeightFunction::Constant(1.0),
            ] {
                let a = e.phi(&f);
                let b = brute_phi(e, &f);
                assert!((a - b).abs() < 1e-12, "{f:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tent_closed_forms() {
        let t: Excursion<f64> = Excursion::tent(1 << 10);
        let m = 1024.0f64;
        assert!((t.phi(&WeightFunction::Constant(1.0)) - 0.25).abs() < 1e-15);
        // only the apex cell loses its level range under the f(0) = 0 rule
        assert!((t.z_beta(1.0).unwrap() - (0.25 - 1.0 / (m * m))).abs() < 1e-15);
        assert!((t.z_beta(2.0).unwrap() - 1.0 / 6.0).abs() < 1e-3);
        assert!((t.z_beta_pairwise(2.0).unwrap() - 1.0 / 6.0).abs() < 1e-3);
        assert!((t.z_beta(3.0).unwrap() - 0.125).abs() < 1e-3);
        assert_eq!(t.z_beta_pairwise(1.0), Err(ExcursionError::BetaOutOfRange(1.0)));
    }

    #[test]
    fn identity_function_equals_z2() {
        let mut rng = stream(6, 0);
        let e: Excursion<f64> = sample_brownian_excursion(512, 2.0, &mut rng).unwrap();
        assert_eq!(e.phi(&WeightFunction::identity()), e.z_beta(2.0).unwrap());
    }

    #[test]
    fn vertical_scaling_is_linear() {
        let mut rng = stream(8, 0);
        let e: Excursion<f64> = sample_brownian_excursion(256, 2.0, &mut rng).unwrap();
        for c in [0.25, 2.0, 8.0] {
            for beta in [0.75, 1.5, 3.0] {
                assert_eq!(e.scaled(c).z_beta(beta).unwrap(), c * e.z_beta(beta).unwrap());
            }
        }
        let z = e.z_beta(2.0).unwrap();
        assert!((e.scaled(3.7).z_beta(2.0).unwrap() - 3.7 * z).abs() <= 1e-13 * z);
    }

    #[test]
    fn text_roundtrip() {
        let mut rng = stream(9, 0);
        let e: Excursion<f64> = sample_brownian_excursion(16, 0.5, &mut rng).unwrap();
        let back = Excursion::<f64>::parse_text(&format!("# comment\n{}", e.to_text())).unwrap();
        assert_eq!(back, e);
        assert!(Excursion::<f64>::parse_text("3 2\n0\n1\n0\n").is_err());
    }

    #[test]
    fn interpolant_minimum() {
        let t = tent4();
        assert!((t.min(0.1, 0.9) - 0.1).abs() < 1e-15);
        assert!((t.min(0.4, 0.6) - 0.4).abs() < 1e-15);
        assert_eq!(t.grid_min(1, 3), 0.25);
    }

    #[test]
    fn f32_excursions_work() {
        let t: Excursion<f32> = Excursion::tent(256);
        assert!((t.z_beta(2.0).unwrap() - 1.0 / 6.0).abs() < 1e-3);
    }
}
