//! `treelab`: sample random trees and excursions, evaluate their
//! functionals and run the convergence experiments.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use treelab::contour::build_contour;
use treelab::embedding::embed_uniform_leaves;
use treelab::excursion::{sample_excursion, ExcursionSampler};
use treelab::experiments::{
    run_convergence_experiment, run_fluctuation_experiment, total_length_stats, ConvergenceConfig, ExperimentRun,
    FluctuationConfig, LengthConfig, Model, Statistic,
};
use treelab::functionals::{self, classic_indices, power_sum, power_sum_gw_scaled, power_sum_scaled};
use treelab::rng::{par_replicates, stream};
use treelab::sampler::{sample_conditioned_gw, sample_uniform_full_binary};
use treelab::tree::{parse_tree_file, write_tree_lines, Tree};
use treelab::verify::{run_verify, VerifyConfig};
use treelab::{Excursion64, OffspringDistribution, Rational, Weight64};

mod output;

use output::{emit, Format, Header, Table};

#[derive(Parser)]
#[command(name = "treelab", version, about = "Random trees, contour processes and Brownian excursions")]
struct Cli {
    /// Seed of every random stream in the run.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for replicate-level parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record wall-clock time in reports. Makes output run-dependent.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample trees and write them one per line.
    Sample(SampleArgs),
    /// Classical indices of every tree in a file.
    Indices(IndicesArgs),
    /// Power sums of subtree sizes.
    Functional(FunctionalArgs),
    /// MRCA depth sums and their contour integrals.
    Dk(DkArgs),
    /// Contour process of one tree.
    Contour(ContourArgs),
    /// Sample excursions (or read one) and evaluate Z_beta.
    Excursion(ExcursionArgs),
    /// Marked binary tree spanned by uniform leaves of an excursion.
    Embed(EmbedArgs),
    /// Mean of a scaled statistic against its limit.
    Converge(ConvergeArgs),
    /// Fluctuations of A_n around the excursion functional.
    Fluctuate(FluctuateArgs),
    /// Exact-identity suite; exits 1 on any failure.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Catalan,
    Gw,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Catalan)]
    model: ModelKind,
    /// Offspring law for `--model gw`: binary:P0, geometric:Q, powerlaw:G or weights:W0,W1,...
    #[arg(long, default_value = "geometric:0.5")]
    offspring: OffspringDistribution,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Internal nodes (Catalan).
    #[arg(long)]
    n: Option<usize>,
    /// Total size (Galton-Watson).
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TreeInput {
    /// Tree file: one preorder degree sequence per line.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct IndicesArgs {
    #[command(flatten)]
    io: TreeInput,
    /// Recompute every index from its raw definition and fail on mismatch.
    #[arg(long)]
    brute: bool,
}

#[derive(Args)]
struct FunctionalArgs {
    #[command(flatten)]
    io: TreeInput,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    beta: Vec<f64>,
    /// Galton-Watson normalizing constant; adds an `a_p`-scaled column.
    #[arg(long)]
    a_p: Option<f64>,
}

#[derive(Args)]
struct DkArgs {
    #[command(flatten)]
    io: TreeInput,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    k: Vec<u32>,
    /// Quadrature cells per unit contour time for k >= 3.
    #[arg(long, default_value_t = 4)]
    refine: usize,
}

#[derive(Args)]
struct ContourArgs {
    #[command(flatten)]
    io: TreeInput,
    /// Zero-based line of the tree in the file.
    #[arg(long, default_value_t = 0)]
    tree: usize,
    /// Emit `(s, (a_p/p) C(2ps))` at this many equal steps instead of the
    /// integer breakpoints.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    a_p: f64,
}

#[derive(Args)]
struct ExcursionArgs {
    /// Read an excursion file instead of sampling.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 4096)]
    grid: usize,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = ExcursionSampler::Vervaat)]
    sampler: ExcursionSampler,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    beta: Vec<f64>,
    /// Add the pairwise form of Z_beta for every beta > 1.
    #[arg(long)]
    pairwise: bool,
    /// Write the first excursion in the excursion file format.
    #[arg(long)]
    save: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct EmbedArgs {
    /// Internal nodes of the spanned tree.
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 1 << 14)]
    grid: usize,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = ExcursionSampler::Bessel3)]
    sampler: ExcursionSampler,
    /// Run the branch-length moment study instead of emitting one tree.
    #[arg(long)]
    stats: bool,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Scaled classical indices instead of a power sum (Catalan only).
    #[arg(long)]
    indices: bool,
    /// Sizes, smallest first: internal nodes for Catalan, total size for GW.
    #[arg(long, alias = "p", value_delimiter = ',', default_value = "4000")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    /// Relative bias band, overriding the model default.
    #[arg(long)]
    bias: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    se: f64,
    #[arg(long)]
    a_p: Option<f64>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct FluctuateArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 1 << 14)]
    grid: usize,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = ExcursionSampler::Bessel3)]
    sampler: ExcursionSampler,
    /// Test function: one, power:A or const:C.
    #[arg(long, default_value = "one")]
    f: String,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    trees: usize,
    #[arg(long, default_value_t = 2001)]
    max_size: usize,
    #[arg(long, default_value_t = 200)]
    sandwich_trees: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A request that parsed but cannot be served; exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure_status(&e))
        }
    }
}

/// 2 for requests that cannot be served, 1 for everything else.
fn failure_status(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let header = Header::new(cli.seed);
    match cli.command {
        Command::Sample(a) => sample(a, cli.seed, &header),
        Command::Indices(a) => indices(a, &header),
        Command::Functional(a) => functional(a, &header),
        Command::Dk(a) => dk(a, &header),
        Command::Contour(a) => contour(a, &header),
        Command::Excursion(a) => excursion(a, cli.seed, &header),
        Command::Embed(a) => embed(a, cli.seed, cli.timing, &header),
        Command::Converge(a) => converge(a, cli.seed, cli.timing, &header),
        Command::Fluctuate(a) => fluctuate(a, cli.seed, cli.timing, &header),
        Command::Verify(a) => verify(a, cli.seed, &header),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn read_trees(path: &Path) -> Result<Vec<Tree>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_tree_file(&text).with_context(|| format!("parsing {}", path.display()))
}

fn sample(a: SampleArgs, seed: u64, header: &Header) -> Result<()> {
    let trees: Vec<Tree> = match a.model.model {
        ModelKind::Catalan => {
            let n = a.n.ok_or_else(|| usage("--model catalan needs --n"))?;
            par_replicates(seed, a.reps, |_, rng| sample_uniform_full_binary(n, rng))
        }
        ModelKind::Gw => {
            let p = a.p.ok_or_else(|| usage("--model gw needs --p"))?;
            let d = &a.model.offspring;
            if !d.is_feasible(p) {
                return Err(usage(format!("no tree of size {p} has positive weight under {d}")));
            }
            par_replicates(seed, a.reps, |_, rng| sample_conditioned_gw(d, p, rng))
                .into_iter()
                .collect::<Result<_, _>>()?
        }
    };
    emit(a.out.as_deref(), &(header.comment() + &write_tree_lines(&trees)))
}

fn opt(v: Option<u128>) -> Value {
    v.map_or(Value::Null, |x| json!(x.to_string()))
}

fn indices(a: IndicesArgs, header: &Header) -> Result<()> {
    let trees = read_trees(&a.io.input)?;
    let mut table = Table::new([
        "tree",
        "nodes",
        "leaves",
        "path_length",
        "wiener",
        "sackin",
        "colless",
        "cophenetic",
        "chi",
        "shape",
    ]);
    for (i, t) in trees.iter().enumerate() {
        let b = classic_indices(t, false);
        if a.brute {
            let raw = functionals::brute::indices(t);
            let same = (raw.path_length, raw.wiener, raw.sackin, raw.colless, raw.cophenetic)
                == (b.path_length, b.wiener, b.sackin, b.colless, b.cophenetic);
            anyhow::ensure!(same, "tree {i}: closed forms disagree with the raw definitions");
        }
        table.push(vec![
            json!(i),
            json!(t.len()),
            json!(t.leaf_count()),
            json!(b.path_length.to_string()),
            json!(b.wiener.to_string()),
            opt(b.sackin),
            opt(b.colless),
            opt(b.cophenetic),
            opt(b.chi),
            json!(b.shape),
        ]);
    }
    emit(a.io.out.as_deref(), &table.render(a.io.format, header))
}

fn functional(a: FunctionalArgs, header: &Header) -> Result<()> {
    let trees = read_trees(&a.io.input)?;
    let mut table = Table::new(["tree", "nodes", "beta", "power_sum", "scaled", "gw_scaled"]);
    for (i, t) in trees.iter().enumerate() {
        for &beta in &a.beta {
            table.push(vec![
                json!(i),
                json!(t.len()),
                json!(beta),
                json!(power_sum::<f64>(t, beta)),
                json!(power_sum_scaled::<f64>(t, beta)),
                a.a_p.map_or(Value::Null, |ap| json!(power_sum_gw_scaled::<f64>(t, beta, ap))),
            ]);
        }
    }
    emit(a.io.out.as_deref(), &table.render(a.io.format, header))
}

fn dk(a: DkArgs, header: &Header) -> Result<()> {
    let trees = read_trees(&a.io.input)?;
    let mut table = Table::new(["tree", "nodes", "k", "d_k", "contour", "contour_exact", "error_bound", "sandwich"]);
    for (i, t) in trees.iter().enumerate() {
        let c = build_contour(t);
        for &k in &a.k {
            let d = functionals::d_k(t, k).map_err(|e| usage(e.to_string()))?;
            let est = c.d_k(k, a.refine).map_err(|e| usage(e.to_string()))?;
            let cap = (t.len() as f64).powi(k as i32);
            let sandwich = match est.exact {
                Some(q) => {
                    let gap = Rational::from_integer(d as i128) - q;
                    gap >= Rational::from_integer(0) && gap <= Rational::from_integer((t.len() as i128).pow(k))
                }
                None => {
                    let gap = d as f64 - est.value;
                    gap >= -est.error_bound && gap <= cap + est.error_bound
                }
            };
            table.push(vec![
                json!(i),
                json!(t.len()),
                json!(k),
                json!(d.to_string()),
                json!(est.value),
                est.exact.map_or(Value::Null, |q| json!(q.to_string())),
                json!(est.error_bound),
                json!(sandwich),
            ]);
        }
    }
    emit(a.io.out.as_deref(), &table.render(a.io.format, header))
}

fn contour(a: ContourArgs, header: &Header) -> Result<()> {
    let trees = read_trees(&a.io.input)?;
    let t = trees.get(a.tree).ok_or_else(|| usage(format!("file has {} trees, asked for {}", trees.len(), a.tree)))?;
    let c = build_contour(t);
    let table = match a.points {
        None => {
            let mut table = Table::new(["u", "height"]);
            for (u, &h) in c.heights().iter().enumerate() {
                table.push(vec![json!(u), json!(h)]);
            }
            table
        }
        Some(points) => {
            let mut table = Table::new(["s", "value"]);
            for (s, v) in c.scaled_samples(a.a_p, points.max(1)) {
                table.push(vec![json!(s), json!(v)]);
            }
            table
        }
    };
    emit(a.io.out.as_deref(), &table.render(a.io.format, header))
}

fn z_columns(e: &Excursion64, betas: &[f64], pairwise: bool) -> Result<Vec<Value>> {
    let mut row = vec![json!(e.area())];
    for &b in betas {
        row.push(json!(e.z_beta(b).map_err(|x| usage(x.to_string()))?));
    }
    if pairwise {
        for &b in betas.iter().filter(|&&b| b > 1.0) {
            row.push(json!(e.z_beta_pairwise(b).map_err(|x| usage(x.to_string()))?));
        }
    }
    Ok(row)
}

fn excursion(a: ExcursionArgs, seed: u64, header: &Header) -> Result<()> {
    let mut cols = vec!["replicate".to_string(), "area".to_string()];
    cols.extend(a.beta.iter().map(|b| format!("z_{b}")));
    if a.pairwise {
        cols.extend(a.beta.iter().filter(|&&b| b > 1.0).map(|b| format!("z_pairwise_{b}")));
    }
    let mut table = Table::new(cols);
    let excursions: Vec<Excursion64> = match &a.input {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            vec![Excursion64::parse_text(&text).with_context(|| format!("parsing {}", path.display()))?]
        }
        None => {
            if a.grid < 2 {
                return Err(usage("--grid must be at least 2"));
            }
            par_replicates(seed, a.reps, |_, rng| {
                sample_excursion(a.grid, a.alpha, a.sampler, rng).expect("grid checked")
            })
        }
    };
    for (r, e) in excursions.iter().enumerate() {
        let mut row = vec![json!(r)];
        row.extend(z_columns(e, &a.beta, a.pairwise)?);
        table.push(row);
    }
    if let (Some(path), Some(first)) = (&a.save, excursions.first()) {
        emit(Some(path), &(header.comment() + &first.to_text()))?;
    }
    emit(a.out.as_deref(), &table.render(a.format, header))
}

fn write_run(run: &ExperimentRun, json_path: Option<&Path>, csv_path: Option<&Path>, header: &Header) -> Result<()> {
    emit(json_path, &header.wrap_json("reports", serde_json::to_value(&run.reports)?))?;
    if let Some(p) = csv_path {
        emit(Some(p), &(header.comment() + &run.raw.to_csv()))?;
    }
    Ok(())
}

fn embed(a: EmbedArgs, seed: u64, timing: bool, header: &Header) -> Result<()> {
    if a.grid < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    if a.stats {
        let mut cfg = LengthConfig::new(a.n, a.grid, a.reps, seed);
        cfg.alpha = a.alpha;
        cfg.sampler = a.sampler;
        cfg.timing = timing;
        let run = total_length_stats(&cfg).map_err(|e| usage(e.to_string()))?;
        return write_run(&run, a.json.as_deref(), a.csv.as_deref(), header);
    }
    let mut rng = stream(seed, 0);
    let h: Excursion64 = sample_excursion(a.grid, a.alpha, a.sampler, &mut rng)?;
    let mt = embed_uniform_leaves(&h, a.n, &mut rng);
    let lengths: Vec<String> = mt.lengths.iter().map(|x| x.to_string()).collect();
    let text = format!("{}{}\n{}\n", header.comment(), mt.shape.serialize(), lengths.join(" "));
    emit(a.out.as_deref(), &text)
}

fn converge(a: ConvergeArgs, seed: u64, timing: bool, header: &Header) -> Result<()> {
    let model = match a.model.model {
        ModelKind::Catalan => Model::Catalan,
        ModelKind::Gw => Model::Gw(a.model.offspring.clone()),
    };
    let statistic = if a.indices { Statistic::Indices } else { Statistic::PowerSum { beta: a.beta } };
    let mut cfg = ConvergenceConfig::new(model, statistic, a.n.clone(), a.reps, seed);
    cfg.bias = a.bias;
    cfg.se_multiplier = a.se;
    cfg.a_p = a.a_p;
    cfg.timing = timing;
    let run = run_convergence_experiment(&cfg).map_err(|e| usage(e.to_string()))?;
    write_run(&run, a.json.as_deref(), a.csv.as_deref(), header)
}

fn parse_weight(s: &str) -> Result<Weight64> {
    let bad = || usage(format!("bad test function {s:?}; expected one, power:A or const:C"));
    match s.split_once(':') {
        None if s == "one" => Ok(Weight64::one()),
        Some(("power", a)) => Ok(Weight64::Power(a.parse().map_err(|_| bad())?)),
        Some(("const", c)) => Ok(Weight64::Constant(c.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

fn fluctuate(a: FluctuateArgs, seed: u64, timing: bool, header: &Header) -> Result<()> {
    let mut cfg = FluctuationConfig::new(a.n, a.grid, a.reps, seed);
    cfg.alpha = a.alpha;
    cfg.sampler = a.sampler;
    cfg.f = parse_weight(&a.f)?;
    cfg.timing = timing;
    let run = run_fluctuation_experiment(&cfg).map_err(|e| usage(e.to_string()))?;
    write_run(&run, a.json.as_deref(), a.csv.as_deref(), header)
}

fn verify(a: VerifyArgs, seed: u64, header: &Header) -> Result<()> {
    let mut cfg = VerifyConfig::new(a.trees, a.max_size, seed);
    cfg.sandwich_trees = a.sandwich_trees;
    let report = run_verify(&cfg);
    emit(a.out.as_deref(), &format!("{}{report}", header.comment()))?;
    if !report.passed() {
        let names: Vec<&str> = report.failures().map(|r| r.name).collect();
        anyhow::bail!("verification failed: {}", names.join("; "));
    }
    Ok(())
}
