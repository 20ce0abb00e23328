//! Closed-form moment targets and the small amount of statistics the
//! experiments need: summaries, chi-square goodness of fit and the
//! two-sample Kolmogorov–Smirnov test.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::scalar::pairwise_sum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("beta = {beta} must exceed {min}")]
    BetaOutOfRange { beta: f64, min: f64 },
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),
}

fn gamma_ratio(a: f64, b: f64) -> f64 {
    (ln_gamma(a) - ln_gamma(b)).exp()
}

/// `E[Z_β] = Γ(β − ½) / (2√α Γ(β))`, finite for `β > ½`.
pub fn expected_z(beta: f64, alpha: f64) -> Result<f64, StatsError> {
    expected_z_h(beta, 2.0, alpha)
}

/// Mean of the height-process analogue for a `γ`-stable branching
/// mechanism `ψ(λ) = κλ^γ`. Reduces to [`expected_z`] at `γ = 2`.
pub fn expected_z_h(beta: f64, gamma: f64, kappa: f64) -> Result<f64, StatsError> {
    if !(gamma > 1.0 && gamma <= 2.0) {
        return Err(StatsError::ParameterDomain(format!("gamma = {gamma} not in (1, 2]")));
    }
    if !(kappa > 0.0) {
        return Err(StatsError::ParameterDomain(format!("kappa = {kappa}")));
    }
    let inv = 1.0 / gamma;
    if !(beta > inv) {
        return Err(StatsError::BetaOutOfRange { beta, min: inv });
    }
    let scale = if gamma == 2.0 { kappa.sqrt() } else { kappa.powf(inv) };
    Ok(gamma_ratio(beta - inv, beta + 1.0 - 2.0 * inv) / (gamma * scale))
}

/// Limit mean of `|T_n|^{-(β+1/2)} Σ_v |T_{n,v}|^β` for uniform full binary
/// trees: `√(2α) E[Z_β]`, which does not depend on `α`.
pub fn catalan_limit_mean(beta: f64) -> Result<f64, StatsError> {
    Ok(expected_z(beta, 2.0)? * 2.0)
}

/// Limit mean of `p^{-(β+1/2)} Σ_v |τ_v|^β` for a critical Galton–Watson
/// law with offspring variance `σ²`: `(2/σ) E[Z_β]` at `α = 2`.
pub fn gw_limit_mean(beta: f64, sigma: f64) -> Result<f64, StatsError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(StatsError::ParameterDomain(format!("sigma = {sigma}")));
    }
    Ok(expected_z(beta, 2.0)? * 2.0 / sigma)
}

/// Limits of the scaled classical indices `(P, W, S, C, Co)` for the
/// Catalan model, normalized by `|T|^{3/2}` except `W` and `Co` which use
/// `|T|^{5/2}`.
pub fn index_limit_means() -> [f64; 5] {
    let z1 = expected_z(1.0, 2.0).unwrap();
    let z2 = expected_z(2.0, 2.0).unwrap();
    let root = 2.0; // √(2α) at α = 2
    [root * z1, root * 2.0 * (z1 - z2), root * z1 / 2.0, root * z1 / 2.0, root * z2 / 4.0]
}

/// `E[E_1^a E_2^b / S_m^c]` for i.i.d. unit exponentials with `S_m` their
/// sum over `m` variables.
pub fn exp_gamma_moment(m: usize, a: f64, b: f64, c: f64) -> Result<f64, StatsError> {
    check_exp_gamma(m, a, b, c)?;
    let m = m as f64;
    Ok((ln_gamma(1.0 + a) + ln_gamma(1.0 + b) + ln_gamma(m + a + b - c) - ln_gamma(m + a + b)).exp())
}

fn check_exp_gamma(m: usize, a: f64, b: f64, c: f64) -> Result<(), StatsError> {
    if m < 2 || a < 0.0 || b < 0.0 || c < 0.0 || !(m as f64 + a + b > c) {
        return Err(StatsError::ParameterDomain(format!("m = {m}, a = {a}, b = {b}, c = {c}")));
    }
    Ok(())
}

/// Monte Carlo estimate of [`exp_gamma_moment`] with its standard error.
pub fn exp_gamma_moment_mc<R: Rng + ?Sized>(
    m: usize,
    a: f64,
    b: f64,
    c: f64,
    draws: usize,
    rng: &mut R,
) -> Result<Summary, StatsError> {
    check_exp_gamma(m, a, b, c)?;
    // S_m = E_1 + E_2 + (rest), the rest being Gamma(m - 2, 1).
    let rest = (m > 2).then(|| Gamma::new((m - 2) as f64, 1.0).unwrap());
    let xs: Vec<f64> = (0..draws)
        .map(|_| {
            let e1: f64 = Exp1.sample(rng);
            let e2: f64 = Exp1.sample(rng);
            let s = e1 + e2 + rest.as_ref().map_or(0.0, |g| g.sample(rng));
            e1.powf(a) * e2.powf(b) / s.powf(c)
        })
        .collect();
    Ok(Summary::of(&xs))
}

fn binomial(n: u64, p: f64) -> Result<Binomial, StatsError> {
    Binomial::new(p, n).map_err(|e| StatsError::ParameterDomain(e.to_string()))
}

/// `E[1/(1+X)]` for `X ~ Bin(n, p)` in closed form.
pub fn binomial_inverse_moment(n: u64, p: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::ParameterDomain(format!("p = {p}")));
    }
    // 1 - (1-p)^{n+1} without cancellation for small p
    let tail = -((n + 1) as f64 * (-p).ln_1p()).exp_m1();
    Ok(tail / (p * (n + 1) as f64))
}

/// `E[g(X)]` for `X ~ Bin(n, p)` by summing over the full pmf.
pub fn binomial_expectation(n: u64, p: f64, g: impl Fn(u64) -> f64) -> Result<f64, StatsError> {
    let law = binomial(n, p)?;
    let terms: Vec<f64> = (0..=n).map(|k| law.pmf(k) * g(k)).collect();
    Ok(pairwise_sum(&terms))
}

pub fn binomial_inverse_moment_enumerated(n: u64, p: f64) -> Result<f64, StatsError> {
    binomial_expectation(n, p, |k| 1.0 / (1 + k) as f64)
}

/// `(E[(2X+1)^{-a}], (1 ∧ 1/(p(n+1)))^a)`. The first never exceeds the
/// second for `a ∈ (0, 1]`.
pub fn binomial_bound_i(n: u64, p: f64, a: f64) -> Result<(f64, f64), StatsError> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(StatsError::ParameterDomain(format!("a = {a}")));
    }
    let lhs = binomial_expectation(n, p, |k| ((2 * k + 1) as f64).powf(-a))?;
    let rhs = (1.0f64).min(1.0 / (p * (n + 1) as f64)).powf(a);
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRatioBracket {
    pub lower: f64,
    pub ratio: f64,
    pub upper: f64,
}

impl GammaRatioBracket {
    pub fn holds(&self, slack: f64) -> bool {
        self.lower <= self.ratio + slack && self.ratio <= self.upper + slack
    }
}

/// `(n+1)^{s−1} ≤ Γ(n+s)/Γ(n+1) ≤ n^{s−1}`.
pub fn gamma_ratio_bounds(n: u64, s: f64) -> Result<GammaRatioBracket, StatsError> {
    if n == 0 || !(0.0..=1.0).contains(&s) {
        return Err(StatsError::ParameterDomain(format!("n = {n}, s = {s}")));
    }
    let n = n as f64;
    Ok(GammaRatioBracket { lower: (n + 1.0).powf(s - 1.0), ratio: gamma_ratio(n + s, n + 1.0), upper: n.powf(s - 1.0) })
}

/// `E[L_n] = Γ(n + 3/2) / (√α Γ(n+1))`; `L_n²` is `Gamma(n+1)` with rate `α`.
pub fn expected_total_length(n: usize, alpha: f64) -> f64 {
    gamma_ratio(n as f64 + 1.5, n as f64 + 1.0) / alpha.sqrt()
}

pub fn expected_total_length_sq(n: usize, alpha: f64) -> f64 {
    (n + 1) as f64 / alpha
}

/// `E[h_{n,∅}] = E[L_n]/(2n+1)`.
pub fn expected_root_length(n: usize, alpha: f64) -> f64 {
    expected_total_length(n, alpha) / (2 * n + 1) as f64
}

/// `[1/(2√(α(n+1))), 1/(2√(αn))]`, the upper end infinite at `n = 0`.
pub fn root_length_bracket(n: usize, alpha: f64) -> (f64, f64) {
    let lo = 1.0 / (2.0 * (alpha * (n + 1) as f64).sqrt());
    let hi = if n == 0 { f64::INFINITY } else { 1.0 / (2.0 * (alpha * n as f64).sqrt()) };
    (lo, hi)
}

pub fn sample_total_length<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> f64 {
    let g = Gamma::new((n + 1) as f64, 1.0).unwrap();
    (g.sample(rng) / alpha).sqrt()
}

/// Moments of a sample. Sums are pairwise so that the result depends
/// only on the order of the data.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub std_dev: f64,
    /// `std_dev / √count`.
    pub std_error: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                count: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                std_dev: f64::NAN,
                std_error: f64::NAN,
                skewness: f64::NAN,
                excess_kurtosis: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = pairwise_sum(xs) / nf;
        let dev: Vec<f64> = xs.iter().map(|x| x - mean).collect();
        let pow = |k: i32| pairwise_sum(&dev.iter().map(|d| d.powi(k)).collect::<Vec<_>>()) / nf;
        let (m2, m3, m4) = (pow(2), pow(3), pow(4));
        let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
        let std_dev = variance.sqrt();
        Self {
            count: n,
            mean,
            variance,
            std_dev,
            std_error: std_dev / nf.sqrt(),
            skewness: m3 / m2.powf(1.5),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
        }
    }

    /// Large-sample z-score of the skewness under normality.
    pub fn skewness_z(&self) -> f64 {
        self.skewness / (6.0 / self.count as f64).sqrt()
    }

    pub fn kurtosis_z(&self) -> f64 {
        self.excess_kurtosis / (24.0 / self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Pearson goodness of fit of `observed` counts against cell
/// probabilities `probs` (which must sum to one).
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<TestResult, StatsError> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(StatsError::ParameterDomain("need at least two matching cells".into()));
    }
    let total: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let law = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    Ok(TestResult { statistic: stat, p_value: law.sf(stat) })
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction to the effective size).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::ParameterDomain("empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok(TestResult { statistic: d, p_value: kolmogorov_q(lambda) })
}

/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
