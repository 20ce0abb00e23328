//! The exact-identity suite behind `treelab verify`.
//!
//! Each closed form is compared with an independent count taken from the
//! raw definition: linear-time where one exists, quadratic or worse on
//! small trees only.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::contour::build_contour;
use crate::excursion::Excursion;
use crate::functionals::{self, brute, Toll, WeightFunction};
use crate::offspring::OffspringDistribution;
use crate::rng::par_replicates;
use crate::sampler::{sample_conditioned_gw, sample_uniform_full_binary};
use crate::stats;
use crate::tree::{parse_tree_file, write_tree_lines, Tree};
use crate::Rational;

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub trees: usize,
    pub max_size: usize,
    pub seed: u64,
    /// Trees on which the quadratic contour scan for `𝒟_2` runs.
    pub sandwich_trees: usize,
    /// Size limit for the all-pairs oracles.
    pub pair_limit: usize,
    /// Extra small trees (at most 12 nodes) for tuple enumeration.
    pub tiny_trees: usize,
}

impl VerifyConfig {
    pub fn new(trees: usize, max_size: usize, seed: u64) -> Self {
        Self { trees, max_size, seed, sandwich_trees: 200, pair_limit: 400, tiny_trees: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckRow {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed == r.total)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| r.passed != r.total)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5);
        writeln!(f, "{:<width$}  {:>9}  {:>9}  status", "check", "passed", "total")?;
        for r in &self.rows {
            let status = if r.passed == r.total { "ok" } else { "FAIL" };
            writeln!(f, "{:<width$}  {:>9}  {:>9}  {status}", r.name, r.passed, r.total)?;
        }
        Ok(())
    }
}

const TREE_CHECKS: [&str; 16] = [
    "path length = A_t(1) - |t|",
    "Wiener via subtree sizes = edge cuts",
    "Wiener = all-pairs BFS",
    "Sackin = leaf depth sum",
    "Colless via chi = leaf imbalance",
    "chi = leaf-count minima",
    "cophenetic = MRCA pair count",
    "cophenetic = leaf-pair MRCA scan",
    "A_t(1) exact in rationals",
    "toll sum = toll recursion",
    "D_1 = MRCA tuple count",
    "D_2 = MRCA tuple count",
    "D_3 = MRCA tuple count",
    "D_4 = MRCA tuple count",
    "0 <= D_1 - contour D_1 <= |t|",
    "0 <= D_2 - contour D_2 <= |t|^2",
];

const ROUND_TRIPS: [&str; 3] = ["text round trip", "degree sequence round trip", "address round trip"];

// Σ_v d(v) · #{k-tuples with MRCA exactly v}.
fn d_k_by_mrca(t: &Tree, k: u32) -> u128 {
    let sz = t.subtree_sizes();
    (0..t.len())
        .map(|v| {
            let own = (sz[v] as u128).pow(k);
            let kids: u128 = t.children(v).map(|c| (sz[c] as u128).pow(k)).sum();
            t.depth(v) as u128 * (own - kids)
        })
        .sum()
}

fn leaf_counts(t: &Tree) -> Vec<u128> {
    let mut out = vec![0u128; t.len()];
    for v in (0..t.len()).rev() {
        out[v] = if t.is_leaf(v) { 1 } else { t.children(v).map(|c| out[c]).sum() };
    }
    out
}

fn check_tree(t: &Tree, sandwich: bool, pair_limit: usize) -> Vec<Option<bool>> {
    let n = t.len() as u128;
    let sz = t.subtree_sizes();
    let binary = t.is_full_binary();
    let leaves = leaf_counts(t);
    let a1: u128 = sz.iter().map(|&s| s as u128).sum();
    let small = t.len() <= pair_limit;

    let edge_cuts: u128 = sz[1..].iter().map(|&s| 2 * s as u128 * (n - s as u128)).sum();
    let chi_leaves = binary.then(|| {
        (0..t.len())
            .filter(|&v| !t.is_leaf(v))
            .map(|v| {
                let kids: Vec<usize> = t.children(v).collect();
                2 * leaves[kids[0]].min(leaves[kids[1]]) - 1
            })
            .sum::<u128>()
    });
    let coph_pairs = binary.then(|| {
        (0..t.len())
            .filter(|&v| !t.is_leaf(v))
            .map(|v| {
                let kids: u128 = t.children(v).map(|c| leaves[c] * leaves[c]).sum();
                t.depth(v) as u128 * (leaves[v] * leaves[v] - kids)
            })
            .sum::<u128>()
    });
    let toll = Toll::callback(|s: usize| Rational::new((s * s) as i128 + 7, 3));

    let mut out = vec![
        Some(functionals::path_length(t) == brute::path_length(t)),
        Some(functionals::wiener(t) == edge_cuts),
        small.then(|| functionals::wiener(t) == brute::wiener(t)),
        binary.then(|| functionals::sackin(t).ok() == Some(brute::sackin(t))),
        binary.then(|| functionals::colless(t).ok() == Some(brute::colless(t))),
        chi_leaves.map(|c| functionals::chi(t).ok() == Some(c)),
        coph_pairs.map(|c| functionals::cophenetic(t).ok() == Some(c)),
        (binary && small).then(|| functionals::cophenetic(t).ok() == Some(brute::cophenetic(t))),
        Some(functionals::measure_a::<Rational>(t, &WeightFunction::one()) == Rational::from_integer(a1 as i128)),
        binary.then(|| {
            functionals::additive_functional(t, &toll).ok() == functionals::additive_functional_recursive(t, &toll).ok()
        }),
    ];
    for k in 1..=4 {
        out.push(Some(functionals::d_k(t, k).ok() == Some(d_k_by_mrca(t, k))));
    }
    if sandwich {
        let c = build_contour(t);
        for (k, contour_dk) in [(1u32, c.d1()), (2, c.d2())] {
            let d = Rational::from_integer(functionals::d_k(t, k).expect("k <= 2") as i128);
            let gap = d - contour_dk;
            let cap = Rational::from_integer((n as i128).pow(k));
            out.push(Some(gap >= Rational::from_integer(0) && gap <= cap));
        }
    } else {
        out.extend([None, None]);
    }
    out
}

fn round_trips(t: &Tree) -> [bool; 3] {
    let text = t.serialize();
    let parsed = Tree::parse(&text).map(|u| &u == t).unwrap_or(false);
    let degrees = Tree::from_degrees(t.degrees().to_vec()).map(|u| &u == t).unwrap_or(false);
    let address = (0..t.len()).all(|v| t.node_at(&t.address(v)) == Some(v));
    [parsed, degrees, address]
}

fn draw_tree<R: Rng + ?Sized>(i: usize, max_size: usize, rng: &mut R) -> Tree {
    let geometric = OffspringDistribution::geometric(0.5).expect("valid");
    if i.is_multiple_of(2) {
        let n = rng.random_range(1..=((max_size - 1) / 2).max(1));
        sample_uniform_full_binary(n, rng)
    } else {
        let p = rng.random_range(1..=max_size);
        sample_conditioned_gw(&geometric, p, rng).expect("geometric offspring is feasible at every size")
    }
}

pub fn run_verify(cfg: &VerifyConfig) -> VerifyReport {
    let max_size = cfg.max_size.max(3);
    let trees: Vec<Tree> = par_replicates(cfg.seed, cfg.trees, |i, rng| draw_tree(i, max_size, rng));

    let per_tree: Vec<(Vec<Option<bool>>, [bool; 3])> = trees
        .par_iter()
        .enumerate()
        .map(|(i, t)| (check_tree(t, i < cfg.sandwich_trees, cfg.pair_limit), round_trips(t)))
        .collect();

    let mut rows: Vec<CheckRow> = TREE_CHECKS.iter().map(|&name| CheckRow { name, passed: 0, total: 0 }).collect();
    for (checks, _) in &per_tree {
        for (row, c) in rows.iter_mut().zip(checks) {
            if let Some(ok) = c {
                row.total += 1;
                row.passed += *ok as usize;
            }
        }
    }
    for (j, &name) in ROUND_TRIPS.iter().enumerate() {
        let passed = per_tree.iter().filter(|(_, r)| r[j]).count();
        rows.push(CheckRow { name, passed, total: per_tree.len() });
    }
    let file_ok = parse_tree_file(&write_tree_lines(&trees)).map(|back| back == trees).unwrap_or(false);
    rows.push(CheckRow { name: "tree file round trip", passed: file_ok as usize, total: 1 });

    // tuple enumeration on tiny trees, a different stream from the main set
    let tiny: Vec<Tree> = par_replicates(cfg.seed ^ 0x7469_6e79, cfg.tiny_trees, |i, rng| draw_tree(i, 12, rng));
    let tiny_ok: Vec<[bool; 4]> = tiny
        .par_iter()
        .map(|t| {
            let b = brute::indices(t);
            let f = functionals::classic_indices(t, false);
            let idx = b.path_length == f.path_length
                && b.wiener == f.wiener
                && b.sackin == f.sackin
                && b.colless == f.colless
                && b.cophenetic == f.cophenetic;
            let dk = |k| functionals::d_k(t, k).ok() == brute::d_k(t, k).ok();
            [idx, dk(1), dk(2), dk(3)]
        })
        .collect();
    for (j, name) in [
        "indices = raw definitions (|t| <= 12)",
        "D_1 = tuple enumeration",
        "D_2 = tuple enumeration",
        "D_3 = tuple enumeration",
    ]
    .into_iter()
    .enumerate()
    {
        rows.push(CheckRow { name, passed: tiny_ok.iter().filter(|r| r[j]).count(), total: tiny_ok.len() });
    }

    rows.push(hand_sandwich());
    rows.push(excursion_round_trip());
    rows.extend(appendix_rows());
    VerifyReport { rows }
}

// cherry: D_1 = 2, contour 1; caterpillar on 5 nodes: 6 and 4
fn hand_sandwich() -> CheckRow {
    let cases = [("2 0 0", 2u128, Rational::from_integer(1)), ("2 0 2 0 0", 6, Rational::from_integer(4))];
    let passed = cases
        .iter()
        .filter(|(text, d, dd)| {
            let t = Tree::parse(text).expect("literal");
            functionals::d_k(&t, 1).ok() == Some(*d) && build_contour(&t).d1() == *dd
        })
        .count();
    CheckRow { name: "hand values of D_1 and its contour form", passed, total: cases.len() }
}

fn excursion_round_trip() -> CheckRow {
    let e = Excursion::<f64>::tent(64);
    let ok = Excursion::<f64>::parse_text(&e.to_text()).map(|b| b == e).unwrap_or(false);
    CheckRow { name: "excursion text round trip", passed: ok as usize, total: 1 }
}

fn appendix_rows() -> Vec<CheckRow> {
    let ns = [0u64, 1, 2, 5, 10, 50, 200];
    let ps = [0.01, 0.1, 0.3, 0.5, 0.9];
    let mut closed = CheckRow { name: "E[1/(1+X)] closed form = enumeration", passed: 0, total: 0 };
    let mut bound = CheckRow { name: "E[(2X+1)^-a] <= min(1, 1/(p(n+1)))^a", passed: 0, total: 0 };
    for &n in &ns {
        for &p in &ps {
            closed.total += 1;
            let a = stats::binomial_inverse_moment(n, p);
            let b = stats::binomial_inverse_moment_enumerated(n, p);
            if let (Ok(a), Ok(b)) = (a, b) {
                closed.passed += ((a - b).abs() <= 1e-12) as usize;
            }
            for a in [0.25, 0.5, 1.0] {
                bound.total += 1;
                if let Ok((lhs, rhs)) = stats::binomial_bound_i(n, p, a) {
                    bound.passed += (lhs <= rhs) as usize;
                }
            }
        }
    }
    let mut gamma = CheckRow { name: "Gamma ratio bracket", passed: 0, total: 0 };
    for n in [1u64, 2, 5, 10, 100, 1000, 100_000] {
        for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
            gamma.total += 1;
            gamma.passed += stats::gamma_ratio_bounds(n, s).map(|b| b.holds(1e-12)).unwrap_or(false) as usize;
        }
    }
    let mut expo = CheckRow { name: "E[E_root/S] = 1/(2n+1)", passed: 0, total: 0 };
    for n in [1usize, 2, 10, 100, 1000] {
        expo.total += 1;
        let v = stats::exp_gamma_moment(2 * n + 1, 1.0, 0.0, 1.0).unwrap_or(f64::NAN);
        expo.passed += ((v - 1.0 / (2 * n + 1) as f64).abs() <= 1e-12) as usize;
    }
    let mut reduce = CheckRow { name: "stable mean at gamma = 2 equals Brownian mean", passed: 0, total: 0 };
    for beta in [0.6, 1.0, 2.0, 3.5] {
        reduce.total += 1;
        reduce.passed += (stats::expected_z_h(beta, 2.0, 2.0).ok() == stats::expected_z(beta, 2.0).ok()) as usize;
    }
    vec![closed, bound, gamma, expo, reduce]
}
