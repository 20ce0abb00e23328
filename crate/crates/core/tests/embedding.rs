mod common;

use common::{plane_trees, shape_law_p};
use treelab::embedding::{embed_marked_tree, embed_uniform_leaves, sample_branch_lengths_gamma};
use treelab::excursion::{sample_excursion, ExcursionSampler};
use treelab::rng::{par_replicates, stream};
use treelab::stats::Summary;
use treelab::{Excursion64, Tree};

const M: usize = 1 << 11;

fn bessel(rng: &mut treelab::rng::TreeRng) -> Excursion64 {
    sample_excursion(M, 2.0, ExcursionSampler::Bessel3, rng).unwrap()
}

#[test]
fn branch_lengths_are_exchangeable() {
    let n = 20;
    let rows: Vec<Vec<f64>> = par_replicates(1, 5000, |_, rng| {
        let h = bessel(rng);
        embed_uniform_leaves(&h, n, rng).lengths
    });
    let all: Vec<f64> = rows.iter().flatten().copied().collect();
    let grand = Summary::of(&all).mean;
    for j in 0..2 * n + 1 {
        let s = Summary::of(&rows.iter().map(|r| r[j]).collect::<Vec<_>>());
        assert!((s.mean - grand).abs() <= 4.0 * s.std_error, "position {j}: {} vs {grand}", s.mean);
    }
}

#[test]
fn two_leaf_shapes_are_equally_likely() {
    let shapes: Vec<Tree> = plane_trees(5).into_iter().filter(Tree::is_full_binary).collect();
    let s: Vec<Tree> = par_replicates(2, 20_000, |_, rng| {
        let h = bessel(rng);
        embed_uniform_leaves(&h, 2, rng).shape
    });
    assert!(shape_law_p(&shapes, &[0.5, 0.5], &s) > 0.001);
}

#[test]
fn grid_leaves_sit_on_the_path() {
    let h = bessel(&mut stream(3, 0));
    // strict local maxima keep every gap minimum inside its gap
    let v = h.values();
    let times: Vec<usize> = (1..M).filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1]).step_by(7).collect();
    assert!(times.len() > 10);
    match embed_marked_tree(&h, &times) {
        Ok(mt) => {
            for (y, &t) in mt.leaf_heights().iter().zip(&times) {
                assert!((y - h.values()[t]).abs() <= 1e-12);
            }
            assert!(mt.lengths.iter().all(|&l| l >= 0.0));
        }
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn uniform_leaves_sit_near_the_interpolant() {
    let tol = 10.0 * (2.0 / (2.0 * M as f64)).sqrt();
    for i in 0..20 {
        let mut rng = stream(4, i);
        let h = bessel(&mut rng);
        let mt = embed_uniform_leaves(&h, 30, &mut rng);
        assert_eq!(mt.internal_count(), 30);
        assert!(mt.shape.is_full_binary());
        for (y, &t) in mt.leaf_heights().iter().zip(&mt.leaf_times) {
            assert!((y - h.eval(t)).abs() <= tol, "{y} vs {}", h.eval(t));
        }
        assert!(mt.lengths.iter().all(|&l| l >= 0.0));
    }
}

#[test]
fn gamma_lengths_sum_to_the_total() {
    let t = Tree::parse("2 2 0 0 0").unwrap();
    let l = sample_branch_lengths_gamma(&t, 3.5, &mut stream(5, 0)).unwrap();
    assert_eq!(l.len(), 5);
    assert!((l.iter().sum::<f64>() - 3.5).abs() < 1e-12);
    assert!(sample_branch_lengths_gamma(&Tree::parse("1 0").unwrap(), 1.0, &mut stream(5, 1)).is_err());
}

#[test]
fn gamma_lengths_of_small_shapes() {
    assert_eq!(sample_branch_lengths_gamma(&Tree::single(), 2.5, &mut stream(6, 0)).unwrap(), vec![2.5]);
    let cherry = Tree::parse("2 0 0").unwrap();
    let rows: Vec<Vec<f64>> =
        par_replicates(6, 100_000, |_, rng| sample_branch_lengths_gamma(&cherry, 1.0, rng).unwrap());
    for j in 0..3 {
        let s = Summary::of(&rows.iter().map(|r| r[j]).collect::<Vec<_>>());
        assert!((s.mean - 1.0 / 3.0).abs() <= 4.0 * s.std_error);
    }
}

#[test]
fn degenerate_grid_times_are_reported() {
    let h = Excursion64::tent(8);
    assert!(embed_marked_tree(&h, &[]).is_err());
    assert!(embed_marked_tree(&h, &[5, 3]).is_err());
    assert!(embed_marked_tree(&h, &[0, 4]).is_err());
}
