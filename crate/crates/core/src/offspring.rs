//! Offspring laws for simply generated trees and their critical
//! normalization.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Geometric, Zeta};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OffspringError {
    #[error("invalid offspring law: {0}")]
    InvalidParameter(String),
    #[error("no sign change of q g'(q) - g(q) was bracketed; the weights are not generic")]
    NonGenericWeights,
    #[error("generating function overflowed at q = {0} before a root was bracketed")]
    DivergentSeries(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `𝔭(0) = p0`, `𝔭(2) = 1 − p0`.
    Binary { p0: f64 },
    /// `𝔭(k) = (1 − q) q^k`.
    Geometric { q: f64 },
    /// `𝔭(k) = k^{−1−γ}/ζ(γ)` for `k ≥ 1`, `𝔭(0) = 1 − ζ(1+γ)/ζ(γ)`; critical for every `γ > 1`.
    PowerLaw { gamma: f64 },
    /// Arbitrary finite support.
    Finite,
}

#[derive(Debug, Clone)]
enum Draw {
    Binary(f64),
    Geometric(Geometric),
    PowerLaw { p0: f64, tail: Zeta<f64> },
    Finite(WeightedAliasIndex<f64>),
}

#[derive(Debug, Clone)]
pub struct OffspringDistribution {
    family: Family,
    probs: Vec<f64>,
    mean: f64,
    variance: f64,
    span: usize,
    draw: Draw,
}

/// Riemann zeta for real `s > 1` by Euler–Maclaurin summation.
pub fn riemann_zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1, got {s}");
    const N: usize = 12;
    // B_{2j} / (2j)!
    const COEF: [f64; 6] =
        [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0, 1.0 / 47900160.0, -691.0 / 1307674368000.0];
    let n = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s(s+1)...(s+2j-2) times N^{-s-2j+1}
    let mut rise = s;
    let mut npow = n.powf(-s - 1.0);
    for (j, c) in COEF.iter().enumerate() {
        sum += c * rise * npow;
        let m = 2.0 * j as f64;
        rise *= (s + m + 1.0) * (s + m + 2.0);
        npow /= n * n;
    }
    sum
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn invalid(msg: impl Into<String>) -> OffspringError {
    OffspringError::InvalidParameter(msg.into())
}

impl OffspringDistribution {
    pub fn binary(p0: f64) -> Result<Self, OffspringError> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(invalid(format!("binary p0 must lie in (0,1), got {p0}")));
        }
        let mean = 2.0 * (1.0 - p0);
        Ok(Self {
            family: Family::Binary { p0 },
            probs: vec![p0, 0.0, 1.0 - p0],
            mean,
            variance: 4.0 * (1.0 - p0) - mean * mean,
            span: 2,
            draw: Draw::Binary(p0),
        })
    }

    /// The critical binary law, `𝔭(0) = 𝔭(2) = 1/2`.
    pub fn critical_binary() -> Self {
        Self::binary(0.5).expect("valid")
    }

    pub fn geometric(q: f64) -> Result<Self, OffspringError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(invalid(format!("geometric q must lie in (0,1), got {q}")));
        }
        let geo = Geometric::new(1.0 - q).map_err(|e| invalid(e.to_string()))?;
        Ok(Self {
            family: Family::Geometric { q },
            probs: Vec::new(),
            mean: q / (1.0 - q),
            variance: q / ((1.0 - q) * (1.0 - q)),
            span: 1,
            draw: Draw::Geometric(geo),
        })
    }

    pub fn power_law(gamma: f64) -> Result<Self, OffspringError> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(invalid(format!("power-law gamma must exceed 1, got {gamma}")));
        }
        let z = riemann_zeta(gamma);
        let p0 = 1.0 - riemann_zeta(1.0 + gamma) / z;
        let variance = if gamma > 2.0 { riemann_zeta(gamma - 1.0) / z - 1.0 } else { f64::INFINITY };
        let tail = Zeta::new(1.0 + gamma).map_err(|e| invalid(e.to_string()))?;
        Ok(Self {
            family: Family::PowerLaw { gamma },
            probs: Vec::new(),
            mean: 1.0,
            variance,
            span: 1,
            draw: Draw::PowerLaw { p0, tail },
        })
    }

    /// A probability vector `probs[k] = 𝔭(k)`, used as given (no
    /// normalization to criticality; see [`criticalize`]).
    pub fn finite(probs: Vec<f64>) -> Result<Self, OffspringError> {
        if probs.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        check_standing(&probs)?;
        let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let second: f64 = probs.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
        let span = probs.iter().enumerate().skip(1).filter(|(_, &p)| p > 0.0).fold(0, |g, (k, _)| gcd(g, k));
        let alias = WeightedAliasIndex::new(probs.clone()).map_err(|e| invalid(e.to_string()))?;
        Ok(Self {
            family: Family::Finite,
            probs,
            mean,
            variance: second - mean * mean,
            span,
            draw: Draw::Finite(alias),
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn pmf(&self, k: usize) -> f64 {
        match self.family {
            Family::Binary { .. } | Family::Finite => self.probs.get(k).copied().unwrap_or(0.0),
            Family::Geometric { q } => (1.0 - q) * q.powi(k as i32),
            Family::PowerLaw { gamma } => match &self.draw {
                Draw::PowerLaw { p0, .. } if k == 0 => *p0,
                _ => (k as f64).powf(-1.0 - gamma) / riemann_zeta(gamma),
            },
        }
    }

    /// Largest degree with positive mass, if the support is finite.
    pub fn max_degree(&self) -> Option<usize> {
        match self.family {
            Family::Binary { .. } | Family::Finite => self.probs.iter().rposition(|&p| p > 0.0),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `σ²`, `+∞` for the stable-domain power laws.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }

    /// gcd of the positive part of the support. Every tree size `p` must
    /// satisfy `span | p − 1`.
    pub fn span(&self) -> usize {
        self.span
    }

    pub fn is_critical(&self) -> bool {
        (self.mean - 1.0).abs() <= 1e-12
    }

    /// Whether some tree with `p` nodes has positive weight.
    pub fn is_feasible(&self, p: usize) -> bool {
        if p == 0 {
            return false;
        }
        let target = p - 1;
        if !target.is_multiple_of(self.span) {
            return false;
        }
        match self.family {
            Family::Binary { .. } | Family::Geometric { .. } | Family::PowerLaw { .. } => true,
            Family::Finite => {
                if self.pmf(1) > 0.0 || target == 0 {
                    return true;
                }
                // p - 1 must be a sum of positive support elements; with 0 in
                // the support at most p - 1 of them are needed.
                let parts: Vec<usize> = (2..self.probs.len()).filter(|&k| self.probs[k] > 0.0).collect();
                let mut reach = vec![false; target + 1];
                reach[0] = true;
                for s in 1..=target {
                    reach[s] = parts.iter().any(|&k| k <= s && reach[s - k]);
                }
                reach[target]
            }
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.draw {
            Draw::Binary(p0) => {
                if rng.random::<f64>() < *p0 {
                    0
                } else {
                    2
                }
            }
            Draw::Geometric(g) => g.sample(rng) as usize,
            Draw::PowerLaw { p0, tail } => {
                if rng.random::<f64>() < *p0 {
                    0
                } else {
                    // saturating cast; huge draws only ever cause a rejection
                    tail.sample(rng) as usize
                }
            }
            Draw::Finite(alias) => alias.sample(rng),
        }
    }

    /// The critical law with the same conditioned tree law.
    pub fn criticalize(&self) -> Result<Self, OffspringError> {
        match self.family {
            Family::Binary { .. } => Ok(Self::critical_binary()),
            Family::Geometric { .. } => Self::geometric(0.5),
            Family::PowerLaw { .. } => Ok(self.clone()),
            Family::Finite => criticalize(&self.probs),
        }
    }
}

fn check_standing(w: &[f64]) -> Result<(), OffspringError> {
    if w.first().copied().unwrap_or(0.0) <= 0.0 {
        return Err(invalid("weight of degree 0 must be positive"));
    }
    if !w.iter().skip(2).any(|&x| x > 0.0) {
        return Err(invalid("some degree k >= 2 must carry positive weight"));
    }
    Ok(())
}

/// Normalizes a finite weight sequence to the critical probability law
/// `𝔭(k) = w_k q^k / g(q)`, where `q` solves `q g'(q) = g(q)`.
pub fn criticalize(weights: &[f64]) -> Result<OffspringDistribution, OffspringError> {
    criticalize_within(weights, None)
}

/// As [`criticalize`], restricting the root search to `q < radius` (for
/// truncations of series with a finite radius of convergence).
pub fn criticalize_within(weights: &[f64], radius: Option<f64>) -> Result<OffspringDistribution, OffspringError> {
    if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(invalid("weights must be finite and nonnegative"));
    }
    check_standing(weights)?;
    // φ(q) = q g'(q) − g(q) = Σ (k − 1) w_k q^k
    let phi =
        |q: f64| -> f64 { weights.iter().enumerate().rev().fold(0.0, |acc, (k, &w)| acc * q + (k as f64 - 1.0) * w) };
    let mut lo = 0.0;
    let mut hi = radius.map_or(1.0, |r| r.min(1.0));
    loop {
        let v = phi(hi);
        if !v.is_finite() {
            return Err(OffspringError::DivergentSeries(hi));
        }
        if v > 0.0 {
            break;
        }
        if v == 0.0 {
            lo = hi;
            break;
        }
        lo = hi;
        let next = hi * 2.0;
        match radius {
            Some(r) if next >= r => {
                let edge = r * (1.0 - 1e-15);
                if edge <= hi || phi(edge) <= 0.0 {
                    return Err(OffspringError::NonGenericWeights);
                }
                hi = edge;
                break;
            }
            _ => hi = next,
        }
        if hi > 1e300 {
            return Err(OffspringError::DivergentSeries(hi));
        }
    }
    if lo < hi {
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-16 * hi {
                break;
            }
            if phi(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let q = if phi(hi).abs() < phi(lo).abs() { hi } else { lo };
    let mut probs: Vec<f64> = weights.iter().enumerate().map(|(k, &w)| w * q.powi(k as i32)).collect();
    let g: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= g);
    while probs.last() == Some(&0.0) {
        probs.pop();
    }
    log::debug!("criticalized at q = {q:.17}");
    OffspringDistribution::finite(probs)
}

impl fmt::Display for OffspringDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Binary { p0 } => write!(f, "binary:{p0}"),
            Family::Geometric { q } => write!(f, "geometric:{q}"),
            Family::PowerLaw { gamma } => write!(f, "powerlaw:{gamma}"),
            Family::Finite => {
                let ws: Vec<String> = self.probs.iter().map(|p| p.to_string()).collect();
                write!(f, "weights:[{}]", ws.join(","))
            }
        }
    }
}

/// Parses `binary:p0`, `geometric:q` and `powerlaw:gamma`. `weights:` specs
/// name files and are resolved by the caller.
impl FromStr for OffspringDistribution {
    type Err = OffspringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = s.split_once(':').ok_or_else(|| invalid(format!("expected family:param, got {s:?}")))?;
        let num = || arg.trim().parse::<f64>().map_err(|e| invalid(format!("{arg:?}: {e}")));
        match name.trim() {
            "binary" => Self::binary(num()?),
            "geometric" => Self::geometric(num()?),
            "powerlaw" => Self::power_law(num()?),
            "weights" => {
                let ws: Result<Vec<f64>, _> = arg.split(',').map(|w| w.trim().parse::<f64>()).collect();
                criticalize(&ws.map_err(|e| invalid(e.to_string()))?)
            }
            other => Err(invalid(format!("unknown offspring family {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_known_values() {
        let pi = std::f64::consts::PI;
        assert!((riemann_zeta(2.0) - pi * pi / 6.0).abs() < 1e-14);
        assert!((riemann_zeta(4.0) - pi.powi(4) / 90.0).abs() < 1e-14);
        assert!((riemann_zeta(1.5) - 2.612_375_348_685_488).abs() < 1e-12);
    }

    #[test]
    fn binary_weights_normalize_to_half() {
        let d = criticalize(&[1.0, 0.0, 1.0]).unwrap();
        assert!((d.pmf(0) - 0.5).abs() < 1e-12 && (d.pmf(2) - 0.5).abs() < 1e-12);
        assert!((d.mean() - 1.0).abs() < 1e-12);
        assert_eq!(d.span(), 2);
    }

    #[test]
    fn geometric_is_a_fixed_point() {
        let w: Vec<f64> = (0..60).map(|k| 0.5f64.powi(k + 1)).collect();
        let d = criticalize(&w).unwrap();
        for (k, wk) in w.iter().enumerate() {
            assert!((d.pmf(k) - wk).abs() < 1e-12, "k = {k}");
        }
        let g = OffspringDistribution::geometric(0.3).unwrap().criticalize().unwrap();
        assert_eq!(g.family(), Family::Geometric { q: 0.5 });
        assert!((g.variance() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_weights_give_poisson_one() {
        let mut w = vec![1.0];
        for k in 1..40 {
            let prev = w[k - 1];
            w.push(prev / k as f64);
        }
        let d = criticalize(&w).unwrap();
        let e = (-1.0f64).exp();
        for (k, wk) in w.iter().enumerate().take(12) {
            assert!((d.pmf(k) - e * wk).abs() < 1e-12);
        }
        assert!((d.mean() - 1.0).abs() < 1e-12);
        let total: f64 = (0..40).map(|k| d.pmf(k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standing_assumptions_enforced() {
        assert!(criticalize(&[0.0, 1.0, 1.0]).is_err());
        assert!(criticalize(&[1.0, 1.0]).is_err());
        assert!(OffspringDistribution::binary(1.0).is_err());
    }

    #[test]
    fn radius_without_root_is_not_generic() {
        // φ(q) = −1 + q² has its root at 1, outside radius 0.5
        assert_eq!(criticalize_within(&[1.0, 0.0, 1.0], Some(0.5)).unwrap_err(), OffspringError::NonGenericWeights);
    }

    #[test]
    fn power_law_is_critical() {
        let d = OffspringDistribution::power_law(1.5).unwrap();
        let mass: f64 = d.pmf(0) + (1..200_000).map(|k| d.pmf(k)).sum::<f64>();
        assert!((mass - 1.0).abs() < 1e-6);
        assert!(d.variance().is_infinite());
        assert!(d.pmf(0) > 0.0);
    }

    #[test]
    fn feasibility() {
        let b = OffspringDistribution::critical_binary();
        assert!(b.is_feasible(1) && b.is_feasible(3) && !b.is_feasible(2));
        // support {0, 3, 5}: p - 1 must be in the numerical semigroup <3, 5>
        let d = OffspringDistribution::finite(vec![0.5, 0.0, 0.0, 0.25, 0.0, 0.25]).unwrap();
        assert_eq!(d.span(), 1);
        let feasible: Vec<usize> = (1..12).filter(|&p| d.is_feasible(p)).collect();
        assert_eq!(feasible, vec![1, 4, 6, 7, 9, 10, 11]);
    }

    #[test]
    fn parse_roundtrip() {
        let d: OffspringDistribution = "geometric:0.5".parse().unwrap();
        assert_eq!(d.to_string(), "geometric:0.5");
        assert!("nope:1".parse::<OffspringDistribution>().is_err());
        assert!("binary".parse::<OffspringDistribution>().is_err());
    }
}
