#![allow(dead_code)]

use std::collections::BTreeMap;

use treelab::stats::chi_square_gof;
use treelab::Tree;

/// Every plane tree on `p` nodes.
pub fn plane_trees(p: usize) -> Vec<Tree> {
    fn grow(prefix: &mut Vec<usize>, open: i64, p: usize, out: &mut Vec<Tree>) {
        let left = p - prefix.len();
        if left == 0 {
            if open == 0 {
                out.push(Tree::from_degrees(prefix.clone()).unwrap());
            }
            return;
        }
        if open <= 0 {
            return;
        }
        for k in 0..left {
            prefix.push(k);
            grow(prefix, open - 1 + k as i64, p, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), 1, p, &mut out);
    out
}

/// Chi-square p-value of `samples` against `probs` over `shapes`.
pub fn shape_law_p(shapes: &[Tree], probs: &[f64], samples: &[Tree]) -> f64 {
    let index: BTreeMap<String, usize> = shapes.iter().enumerate().map(|(i, t)| (t.serialize(), i)).collect();
    let mut counts = vec![0u64; shapes.len()];
    for t in samples {
        counts[*index.get(&t.serialize()).expect("sample outside the enumerated support")] += 1;
    }
    chi_square_gof(&counts, probs).unwrap().p_value
}
