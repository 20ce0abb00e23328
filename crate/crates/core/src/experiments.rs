//! Monte Carlo experiments comparing finite trees with their limits.
//!
//! Every replicate draws from its own stream and results are reduced in
//! replicate order, so a report depends on the seed and the replicate
//! count only. Wall-clock time is recorded only on request.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::embedding::{embed_uniform_leaves, sample_branch_lengths_gamma};
use crate::excursion::{sample_excursion, Excursion, ExcursionSampler};
use crate::functionals::{classic_indices, measure_a_scaled, power_sum_gw_scaled, power_sum_scaled, WeightFunction};
use crate::offspring::OffspringDistribution;
use crate::rng::{par_replicates, stream};
use crate::sampler::{sample_conditioned_gw, sample_uniform_full_binary, SamplerError};
use crate::stats::{
    catalan_limit_mean, expected_root_length, expected_total_length, expected_total_length_sq, expected_z,
    gw_limit_mean, index_limit_means, ks_two_sample, root_length_bracket, Summary,
};
use crate::tree::Tree;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid experiment configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Point(f64),
    Interval(f64, f64),
    AtLeast(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// No limit is claimed for this configuration.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendPoint {
    pub size: usize,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub params: BTreeMap<String, Value>,
    pub estimate: f64,
    pub std_error: f64,
    pub target: Option<Target>,
    /// Allowed distance from the target: `k·SE` plus the bias band.
    pub band: f64,
    pub verdict: Verdict,
    pub runtime_s: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trend: Vec<TrendPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ExperimentReport {
    fn judged(
        experiment: &str,
        params: &BTreeMap<String, Value>,
        estimate: f64,
        std_error: f64,
        target: Option<Target>,
        band: f64,
    ) -> Self {
        let verdict = match target {
            None => Verdict::None,
            Some(t) if within(estimate, t, band) => Verdict::Pass,
            Some(_) => Verdict::Fail,
        };
        Self {
            experiment: experiment.to_string(),
            params: params.clone(),
            estimate,
            std_error,
            target,
            band,
            verdict,
            runtime_s: None,
            trend: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Whether the distance to a point target shrinks from the smallest to
    /// the largest size of the trend.
    pub fn trend_toward_target(&self) -> Option<bool> {
        let Some(Target::Point(t)) = self.target else { return None };
        let (first, last) = (self.trend.first()?, self.trend.last()?);
        Some((last.estimate - t).abs() < (first.estimate - t).abs())
    }
}

fn within(x: f64, target: Target, band: f64) -> bool {
    match target {
        Target::Point(t) => (x - t).abs() <= band,
        Target::Interval(lo, hi) => x >= lo - band && x <= hi + band,
        Target::AtLeast(t) => x >= t - band,
    }
}

/// Per-replicate raw values, one row per replicate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub reports: Vec<ExperimentReport>,
    pub raw: RawTable,
}

impl ExperimentRun {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.verdict != Verdict::Fail)
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    /// Uniform full binary trees with `n` internal nodes.
    Catalan,
    /// Galton–Watson trees conditioned on size `p`.
    Gw(OffspringDistribution),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    /// `|T|^{-(β+½)} Σ_v |T_v|^β`.
    PowerSum { beta: f64 },
    /// `(P, W, S, C, Co)` under their natural scalings. Catalan only.
    Indices,
}

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub model: Model,
    pub statistic: Statistic,
    /// Internal node counts for Catalan, total sizes for GW. The verdict is
    /// taken at the last entry.
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub se_multiplier: f64,
    /// Relative bias band. Defaults to 5% (Catalan) and 10% (GW).
    pub bias: Option<f64>,
    /// Normalizing constant for offspring laws of infinite variance.
    pub a_p: Option<f64>,
    pub timing: bool,
}

impl ConvergenceConfig {
    pub fn new(model: Model, statistic: Statistic, sizes: Vec<usize>, reps: usize, seed: u64) -> Self {
        Self { model, statistic, sizes, reps, seed, se_multiplier: 3.0, bias: None, a_p: None, timing: false }
    }
}

const INDEX_NAMES: [&str; 5] = ["path_length", "wiener", "sackin", "colless", "cophenetic"];

// Replicate r at the k-th size draws from stream (seed, k·2^32 + r).
fn per_size<T: Send>(seed: u64, k: usize, reps: usize, f: impl Fn(&mut crate::rng::TreeRng) -> T + Sync) -> Vec<T> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, ((k as u64) << 32) | r as u64);
            f(&mut rng)
        })
        .collect()
}

fn scaled_indices(t: &Tree) -> [f64; 5] {
    let b = classic_indices(t, false);
    let n = t.len() as f64;
    let (s3, s5) = (n.powf(1.5), n.powf(2.5));
    [
        b.path_length as f64 / s3,
        b.wiener as f64 / s5,
        b.sackin.unwrap_or(0) as f64 / s3,
        b.colless.unwrap_or(0) as f64 / s3,
        b.cophenetic.unwrap_or(0) as f64 / s5,
    ]
}

pub fn run_convergence_experiment(cfg: &ConvergenceConfig) -> Result<ExperimentRun, ConfigError> {
    let start = Instant::now();
    if cfg.sizes.is_empty() || cfg.reps < 2 {
        return Err(ConfigError::Invalid("need at least one size and two replicates".into()));
    }
    let mut params = BTreeMap::new();
    params.insert("replicates".into(), json!(cfg.reps));
    params.insert("seed".into(), json!(cfg.seed));
    params.insert("sizes".into(), json!(cfg.sizes));

    // scaling and target per statistic column
    let (model_name, sigma) = match &cfg.model {
        Model::Catalan => ("catalan", Some(1.0)),
        Model::Gw(d) => {
            params.insert("offspring".into(), json!(d.to_string()));
            ("gw", Some(d.sigma()).filter(|s| s.is_finite()))
        }
    };
    params.insert("model".into(), json!(model_name));
    let bias = cfg.bias.unwrap_or(match cfg.model {
        Model::Catalan => 0.05,
        Model::Gw(_) => 0.10,
    });
    params.insert("bias_band".into(), json!(bias));
    params.insert("se_multiplier".into(), json!(cfg.se_multiplier));

    let (names, targets): (Vec<String>, Vec<Option<f64>>) = match cfg.statistic {
        Statistic::PowerSum { beta } => {
            params.insert("beta".into(), json!(beta));
            let target = match (&cfg.model, sigma) {
                (Model::Catalan, _) => Some(catalan_limit_mean(beta).map_err(|e| ConfigError::Invalid(e.to_string()))?),
                (Model::Gw(_), Some(s)) => {
                    Some(gw_limit_mean(beta, s).map_err(|e| ConfigError::Invalid(e.to_string()))?)
                }
                (Model::Gw(_), None) => None,
            };
            (vec![format!("power_sum_{beta}")], vec![target])
        }
        Statistic::Indices => {
            if !matches!(cfg.model, Model::Catalan) {
                return Err(ConfigError::Invalid("index limits are only claimed for the Catalan model".into()));
            }
            (
                INDEX_NAMES.iter().map(|s| s.to_string()).collect(),
                index_limit_means().iter().map(|&t| Some(t)).collect(),
            )
        }
    };
    if sigma.is_none() && cfg.a_p.is_none() {
        return Err(ConfigError::Invalid("infinite-variance offspring needs an explicit a_p".into()));
    }
    if let Some(a) = cfg.a_p {
        params.insert("a_p".into(), json!(a));
    }

    let draw = |rng: &mut crate::rng::TreeRng, size: usize| -> Result<Tree, SamplerError> {
        match &cfg.model {
            Model::Catalan => Ok(sample_uniform_full_binary(size, rng)),
            Model::Gw(d) => sample_conditioned_gw(d, size, rng),
        }
    };
    let stat = |t: &Tree| -> Vec<f64> {
        match cfg.statistic {
            Statistic::PowerSum { beta } => match (sigma, cfg.a_p) {
                (None, Some(a_p)) => vec![power_sum_gw_scaled::<f64>(t, beta, a_p)],
                _ => vec![power_sum_scaled::<f64>(t, beta)],
            },
            Statistic::Indices => scaled_indices(t).to_vec(),
        }
    };

    let mut trends = vec![Vec::new(); names.len()];
    let mut last: Vec<Vec<f64>> = Vec::new();
    for (k, &size) in cfg.sizes.iter().enumerate() {
        let rows: Vec<Vec<f64>> = per_size(cfg.seed, k, cfg.reps, |rng| draw(rng, size).map(|t| stat(&t)))
            .into_iter()
            .collect::<Result<_, _>>()?;
        for (c, trend) in trends.iter_mut().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            let s = Summary::of(&col);
            trend.push(TrendPoint { size, estimate: s.mean, std_error: s.std_error });
        }
        last = rows;
    }

    let runtime = cfg.timing.then(|| start.elapsed().as_secs_f64());
    let mut reports = Vec::new();
    for (c, name) in names.iter().enumerate() {
        let col: Vec<f64> = last.iter().map(|r| r[c]).collect();
        let s = Summary::of(&col);
        let target = targets[c];
        let band = cfg.se_multiplier * s.std_error + bias * target.map_or(0.0, f64::abs);
        let mut rep = ExperimentReport::judged(
            &format!("converge.{model_name}.{name}"),
            &params,
            s.mean,
            s.std_error,
            target.map(Target::Point),
            band,
        );
        rep.trend = std::mem::take(&mut trends[c]);
        rep.runtime_s = runtime;
        if target.is_some() {
            rep.notes.push("target is the mean of a distributional limit; uniform integrability assumed".into());
        } else {
            rep.notes.push("no finite-variance reduction applies; estimate reported without verdict".into());
        }
        reports.push(rep);
    }
    let size = *cfg.sizes.last().unwrap();
    let mut columns = vec!["replicate".to_string(), "size".to_string()];
    columns.extend(names.iter().cloned());
    let rows = last
        .into_iter()
        .enumerate()
        .map(|(r, vals)| {
            let mut row = vec![r as f64, size as f64];
            row.extend(vals);
            row
        })
        .collect();
    Ok(ExperimentRun { reports, raw: RawTable { columns, rows } })
}

#[derive(Debug, Clone)]
pub struct FluctuationConfig {
    /// Number of internal nodes of the embedded tree.
    pub n: usize,
    pub grid: usize,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub f: WeightFunction<f64>,
    pub sampler: ExcursionSampler,
    pub variance_band: f64,
    pub skewness_limit: f64,
    pub timing: bool,
}

impl FluctuationConfig {
    pub fn new(n: usize, grid: usize, reps: usize, seed: u64) -> Self {
        Self {
            n,
            grid,
            alpha: 2.0,
            reps,
            seed,
            f: WeightFunction::one(),
            sampler: ExcursionSampler::Bessel3,
            variance_band: 0.15,
            skewness_limit: 4.0,
            timing: false,
        }
    }
}

/// `E[Φ_e(f)]` where it has a closed form.
pub fn expected_phi(f: &WeightFunction<f64>, alpha: f64) -> Option<f64> {
    match f {
        WeightFunction::Power(a) => expected_z(a + 1.0, alpha).ok(),
        WeightFunction::Constant(c) => expected_z(1.0, alpha).ok().map(|z| c * z),
        WeightFunction::Callback(_) => None,
    }
}

fn fluctuation_variance_target(f: &WeightFunction<f64>, alpha: f64) -> Option<f64> {
    let weight = match f {
        // x·c² has a closed form; the generic helper returns a callback
        WeightFunction::Constant(c) => return expected_z(2.0, alpha).ok().map(|z| (2.0 * alpha).sqrt() * c * c * z),
        other => other.x_times_square(),
    };
    expected_phi(&weight, alpha).map(|e| (2.0 * alpha).sqrt() * e)
}

/// `Δ = |T_n|^{1/4} (A_n(f) − √(2α) Φ̂_e(f))` with `T_n` spanned by
/// uniform leaves of the same excursion.
pub fn run_fluctuation_experiment(cfg: &FluctuationConfig) -> Result<ExperimentRun, ConfigError> {
    let start = Instant::now();
    if cfg.reps < 2 || cfg.grid < 2 {
        return Err(ConfigError::Invalid("need two replicates and a grid of at least 2".into()));
    }
    let root = (2.0 * cfg.alpha).sqrt();
    let wf2 = cfg.f.x_times_square();
    let rows: Vec<[f64; 3]> = par_replicates(cfg.seed, cfg.reps, |_, rng| {
        let h: Excursion<f64> = sample_excursion(cfg.grid, cfg.alpha, cfg.sampler, rng).expect("grid checked");
        let mt = embed_uniform_leaves(&h, cfg.n, rng);
        let size = mt.shape.len() as f64;
        let a_n = measure_a_scaled(&mt.shape, &cfg.f);
        let phi = h.phi(&cfg.f);
        let delta = size.powf(0.25) * (a_n - root * phi);
        let phi2 = h.phi(&wf2);
        [delta, phi2, delta / (root.sqrt() * phi2.sqrt())]
    });
    let deltas: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let studentized: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let d = Summary::of(&deltas);
    let st = Summary::of(&studentized);

    let mut params = BTreeMap::new();
    params.insert("n".into(), json!(cfg.n));
    params.insert("grid".into(), json!(cfg.grid));
    params.insert("alpha".into(), json!(cfg.alpha));
    params.insert("replicates".into(), json!(cfg.reps));
    params.insert("seed".into(), json!(cfg.seed));
    params.insert("f".into(), json!(format!("{:?}", cfg.f)));
    params.insert("sampler".into(), json!(cfg.sampler.to_string()));

    let runtime = cfg.timing.then(|| start.elapsed().as_secs_f64());
    let mut reports = Vec::new();
    reports.push(ExperimentReport::judged(
        "fluctuate.mean",
        &params,
        d.mean,
        d.std_error,
        Some(Target::Point(0.0)),
        3.0 * d.std_error,
    ));

    // SE of the sample variance from the fourth central moment
    let n = d.count as f64;
    let m4 = (d.excess_kurtosis + 3.0) * d.variance * d.variance;
    let var_se = ((m4 - d.variance * d.variance * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    let vt = fluctuation_variance_target(&cfg.f, cfg.alpha);
    let band = cfg.variance_band * vt.map_or(0.0, f64::abs);
    let mut var =
        ExperimentReport::judged("fluctuate.variance", &params, d.variance, var_se, vt.map(Target::Point), band);
    var.notes.push(format!("relative band {}", cfg.variance_band));
    reports.push(var);

    let lim = cfg.skewness_limit;
    let mut skew = ExperimentReport::judged(
        "fluctuate.studentized_skewness_z",
        &params,
        st.skewness_z(),
        1.0,
        Some(Target::Interval(-lim, lim)),
        0.0,
    );
    skew.notes.push("studentized by the estimated variance weight; the band is deliberately wide".into());
    reports.push(skew);
    let mut kurt =
        ExperimentReport::judged("fluctuate.studentized_kurtosis_z", &params, st.kurtosis_z(), 1.0, None, 0.0);
    kurt.notes.push("reported only: the limit is a Gaussian mixture".into());
    reports.push(kurt);
    for r in &mut reports {
        r.runtime_s = runtime;
    }

    let raw = RawTable {
        columns: vec!["replicate".into(), "delta".into(), "phi_xf2".into(), "studentized".into()],
        rows: rows.iter().enumerate().map(|(i, r)| vec![i as f64, r[0], r[1], r[2]]).collect(),
    };
    Ok(ExperimentRun { reports, raw })
}

#[derive(Debug, Clone)]
pub struct LengthConfig {
    pub n: usize,
    pub alpha: f64,
    pub grid: usize,
    pub reps: usize,
    pub seed: u64,
    pub sampler: ExcursionSampler,
    pub ks_level: f64,
    pub timing: bool,
}

impl LengthConfig {
    pub fn new(n: usize, grid: usize, reps: usize, seed: u64) -> Self {
        Self { n, alpha: 2.0, grid, reps, seed, sampler: ExcursionSampler::Bessel3, ks_level: 0.001, timing: false }
    }
}

/// Moments of `L_n` and `h_{n,∅}` on embedded trees, and a KS comparison of
/// `h_{n,∅}/L_n` with its exponential surrogate `E_∅/S`.
pub fn total_length_stats(cfg: &LengthConfig) -> Result<ExperimentRun, ConfigError> {
    let start = Instant::now();
    if cfg.reps < 100 {
        return Err(ConfigError::Invalid(format!("need at least 100 replicates, got {}", cfg.reps)));
    }
    if cfg.grid < 2 {
        return Err(ConfigError::Invalid("grid must be at least 2".into()));
    }
    let rows: Vec<[f64; 4]> = par_replicates(cfg.seed, cfg.reps, |_, rng| {
        let h: Excursion<f64> = sample_excursion(cfg.grid, cfg.alpha, cfg.sampler, rng).expect("grid checked");
        let mt = embed_uniform_leaves(&h, cfg.n, rng);
        let total = mt.total_length();
        let surrogate = sample_branch_lengths_gamma(&mt.shape, 1.0, rng).expect("embedded shapes are binary")[0];
        [total, mt.root_length(), mt.root_length() / total, surrogate]
    });
    let col = |c: usize| -> Vec<f64> { rows.iter().map(|r| r[c]).collect() };
    let total = col(0);
    let sq: Vec<f64> = total.iter().map(|x| x * x).collect();

    let mut params = BTreeMap::new();
    params.insert("n".into(), json!(cfg.n));
    params.insert("alpha".into(), json!(cfg.alpha));
    params.insert("grid".into(), json!(cfg.grid));
    params.insert("replicates".into(), json!(cfg.reps));
    params.insert("seed".into(), json!(cfg.seed));
    params.insert("sampler".into(), json!(cfg.sampler.to_string()));

    let mut reports = Vec::new();
    let s = Summary::of(&total);
    reports.push(ExperimentReport::judged(
        "embed.total_length_mean",
        &params,
        s.mean,
        s.std_error,
        Some(Target::Point(expected_total_length(cfg.n, cfg.alpha))),
        3.0 * s.std_error,
    ));
    let s = Summary::of(&sq);
    reports.push(ExperimentReport::judged(
        "embed.total_length_second_moment",
        &params,
        s.mean,
        s.std_error,
        Some(Target::Point(expected_total_length_sq(cfg.n, cfg.alpha))),
        3.0 * s.std_error,
    ));
    let s = Summary::of(&col(1));
    let (lo, hi) = root_length_bracket(cfg.n, cfg.alpha);
    let mut root = ExperimentReport::judged(
        "embed.root_length_mean",
        &params,
        s.mean,
        s.std_error,
        Some(Target::Interval(lo, hi)),
        3.0 * s.std_error,
    );
    root.notes.push(format!("exact mean {}", expected_root_length(cfg.n, cfg.alpha)));
    reports.push(root);
    let ks = ks_two_sample(&col(2), &col(3)).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let mut kr = ExperimentReport::judged(
        "embed.root_share_ks_p",
        &params,
        ks.p_value,
        f64::NAN,
        Some(Target::AtLeast(cfg.ks_level)),
        0.0,
    );
    kr.notes.push(format!("KS statistic {}", ks.statistic));
    reports.push(kr);
    let runtime = cfg.timing.then(|| start.elapsed().as_secs_f64());
    for r in &mut reports {
        r.runtime_s = runtime;
    }
    let raw = RawTable {
        columns: vec![
            "replicate".into(),
            "total_length".into(),
            "root_length".into(),
            "root_share".into(),
            "surrogate_share".into(),
        ],
        rows: rows.iter().enumerate().map(|(i, r)| vec![i as f64, r[0], r[1], r[2], r[3]]).collect(),
    };
    Ok(ExperimentRun { reports, raw })
}
