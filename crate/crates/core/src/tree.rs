//! Ordered rooted finite trees in flattened preorder form.
//!
//! A tree is stored by its preorder degree sequence (the Łukasiewicz
//! encoding) together with parent, depth and subtree-size caches. Node `0`
//! is the root; the subtree above node `v` occupies the contiguous index
//! range `v..v + subtree_size[v]`, and the children of `v` are
//! `v + 1`, `v + 1 + size[v + 1]`, ... in lexicographic order.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("malformed degree sequence: {0}")]
    MalformedDegreeSequence(String),
    #[error("node index {index} out of range for a tree with {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("empty node set")]
    EmptyNodeSet,
    #[error("operation requires a tree with more than one node")]
    SingleNodeTree,
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

#[derive(Clone, PartialEq, Eq)]
pub struct Tree {
    degrees: Vec<usize>,
    parent: Vec<usize>,
    depth: Vec<usize>,
    subtree_size: Vec<usize>,
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tree[{}]", self.serialize())
    }
}

/// Checks the Łukasiewicz condition: total `Σ(k_i − 1) = −1` and every
/// strict prefix stays nonnegative. Returns the offending position on failure.
fn check_lukasiewicz(degrees: &[usize]) -> Result<(), (usize, String)> {
    if degrees.is_empty() {
        return Err((0, "empty sequence".into()));
    }
    let mut walk: i64 = 0;
    for (i, &k) in degrees.iter().enumerate() {
        walk += k as i64 - 1;
        if walk < 0 && i + 1 < degrees.len() {
            return Err((i, format!("prefix of length {} reaches -1 before the end", i + 1)));
        }
    }
    if walk != -1 {
        let sum: usize = degrees.iter().sum();
        return Err((degrees.len(), format!("degrees sum to {sum}, expected {}", degrees.len() - 1)));
    }
    Ok(())
}

impl Tree {
    /// The one-node tree `{∅}`.
    pub fn single() -> Self {
        Self::from_degrees(vec![0]).expect("leaf tree is valid")
    }

    pub fn from_degrees(degrees: Vec<usize>) -> Result<Self, TreeError> {
        check_lukasiewicz(&degrees).map_err(|(_, m)| TreeError::MalformedDegreeSequence(m))?;
        let n = degrees.len();
        let mut parent = vec![0usize; n];
        let mut depth = vec![0usize; n];
        // open internal nodes still waiting for children: (node, remaining)
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for v in 0..n {
            if let Some(top) = stack.last_mut() {
                parent[v] = top.0;
                depth[v] = depth[top.0] + 1;
                top.1 -= 1;
                if top.1 == 0 {
                    stack.pop();
                }
            }
            if degrees[v] > 0 {
                stack.push((v, degrees[v]));
            }
        }
        let mut subtree_size = vec![1usize; n];
        for v in (1..n).rev() {
            subtree_size[parent[v]] += subtree_size[v];
        }
        let tree = Self { degrees, parent, depth, subtree_size };
        debug_assert_eq!(tree.degrees.iter().sum::<usize>(), n - 1);
        Ok(tree)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    /// Trees always contain their root.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    /// Parent of each node; the root is its own parent.
    #[inline]
    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    #[inline]
    pub fn parent(&self, v: usize) -> Option<usize> {
        (v != 0).then(|| self.parent[v])
    }

    #[inline]
    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    #[inline]
    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    /// `|t_v|` for every node.
    #[inline]
    pub fn subtree_sizes(&self) -> &[usize] {
        &self.subtree_size
    }

    #[inline]
    pub fn subtree_size(&self, v: usize) -> usize {
        self.subtree_size[v]
    }

    #[inline]
    pub fn is_leaf(&self, v: usize) -> bool {
        self.degrees[v] == 0
    }

    pub fn leaf_count(&self) -> usize {
        self.degrees.iter().filter(|&&k| k == 0).count()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&v| self.degrees[v] == 0)
    }

    /// Every node has zero or two children.
    pub fn is_full_binary(&self) -> bool {
        self.degrees.iter().all(|&k| k == 0 || k == 2)
    }

    pub fn children(&self, v: usize) -> Children<'_> {
        Children { tree: self, next: v + 1, remaining: self.degrees[v] }
    }

    /// `i`-th child of `v` (0-based), if any.
    pub fn child(&self, v: usize, i: usize) -> Option<usize> {
        self.children(v).nth(i)
    }

    /// Whether `a` is an ancestor of `b` in the large sense (`a ≼ b`).
    #[inline]
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        a <= b && b < a + self.subtree_size[a]
    }

    fn check_index(&self, v: usize) -> Result<(), TreeError> {
        if v < self.len() {
            Ok(())
        } else {
            Err(TreeError::IndexOutOfRange { index: v, len: self.len() })
        }
    }

    /// Most recent common ancestor of two nodes.
    pub fn lca(&self, u: usize, w: usize) -> Result<usize, TreeError> {
        self.mrca([u, w])
    }

    /// Most recent common ancestor of a nonempty node set.
    pub fn mrca<I: IntoIterator<Item = usize>>(&self, nodes: I) -> Result<usize, TreeError> {
        let mut lo = usize::MAX;
        let mut hi = 0;
        for v in nodes {
            self.check_index(v)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo == usize::MAX {
            return Err(TreeError::EmptyNodeSet);
        }
        // the preorder range [lo, hi] is covered exactly by the ancestors of lo
        // whose subtree extends past hi
        let mut a = lo;
        while !self.is_ancestor(a, hi) {
            a = self.parent[a];
        }
        Ok(a)
    }

    /// `d(∅, 𝔪(nodes))`.
    pub fn mrca_depth<I: IntoIterator<Item = usize>>(&self, nodes: I) -> Result<usize, TreeError> {
        Ok(self.depth[self.mrca(nodes)?])
    }

    /// Graph distance `d(u, w) = d(∅,u) + d(∅,w) − 2 d(∅, u∧w)`.
    pub fn distance(&self, u: usize, w: usize) -> Result<usize, TreeError> {
        let a = self.lca(u, w)?;
        Ok(self.depth[u] + self.depth[w] - 2 * self.depth[a])
    }

    /// Neveu address of a node: the child ranks (1-based) along the path
    /// from the root. The root has the empty address.
    pub fn address(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.depth[v]);
        let mut cur = v;
        while cur != 0 {
            let p = self.parent[cur];
            let rank = self.children(p).position(|c| c == cur).expect("child of its parent") + 1;
            out.push(rank);
            cur = p;
        }
        out.reverse();
        out
    }

    /// Node with the given Neveu address.
    pub fn node_at(&self, address: &[usize]) -> Option<usize> {
        let mut v = 0;
        for &rank in address {
            v = self.child(v, rank.checked_sub(1)?)?;
        }
        Some(v)
    }

    /// `t* = t ∖ L(t)`: the tree on the internal nodes, ancestry preserved.
    pub fn strip_leaves(&self) -> Result<Tree, TreeError> {
        if self.len() == 1 {
            return Err(TreeError::SingleNodeTree);
        }
        let degrees: Vec<usize> = (0..self.len())
            .filter(|&v| !self.is_leaf(v))
            .map(|v| self.children(v).filter(|&c| !self.is_leaf(c)).count())
            .collect();
        Tree::from_degrees(degrees)
    }

    /// Canonical text form: preorder degrees separated by single spaces.
    pub fn serialize(&self) -> String {
        let mut s = String::with_capacity(self.len() * 2);
        for (i, k) in self.degrees.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&k.to_string());
        }
        s
    }

    pub fn parse(text: &str) -> Result<Tree, TreeError> {
        let mut degrees = Vec::new();
        let mut offsets = Vec::new();
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b' ' | b'\t' | b'\n' | b'\r' => i += 1,
                b'0'..=b'9' => {
                    let start = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let k = text[start..i]
                        .parse::<usize>()
                        .map_err(|e| TreeError::Parse { offset: start, message: e.to_string() })?;
                    degrees.push(k);
                    offsets.push(start);
                }
                c => {
                    return Err(TreeError::Parse {
                        offset: i,
                        message: format!("unexpected character {:?}", c as char),
                    })
                }
            }
        }
        check_lukasiewicz(&degrees).map_err(|(pos, message)| TreeError::Parse {
            offset: offsets.get(pos).copied().unwrap_or(text.len()),
            message,
        })?;
        Tree::from_degrees(degrees)
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl FromStr for Tree {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tree::parse(s)
    }
}

pub struct Children<'a> {
    tree: &'a Tree,
    next: usize,
    remaining: usize,
}

impl Iterator for Children<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        let c = self.next;
        self.remaining -= 1;
        self.next = c + self.tree.subtree_size[c];
        Some(c)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

/// Reads a tree file: one tree per line, `#` lines are comments.
pub fn parse_tree_file(text: &str) -> Result<Vec<Tree>, TreeError> {
    let mut out = Vec::new();
    let mut base = 0;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.trim().is_empty() && !body.trim_start().starts_with('#') {
            let t = Tree::parse(body).map_err(|e| match e {
                TreeError::Parse { offset, message } => TreeError::Parse { offset: base + offset, message },
                other => other,
            })?;
            out.push(t);
        }
        base += line.len();
    }
    Ok(out)
}

/// Writes trees in the tree file format (no header).
pub fn write_tree_lines<'a, I: IntoIterator<Item = &'a Tree>>(trees: I) -> String {
    let mut s = String::new();
    for t in trees {
        s.push_str(&t.serialize());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cherry() -> Tree {
        Tree::from_degrees(vec![2, 0, 0]).unwrap()
    }

    fn caterpillar() -> Tree {
        Tree::from_degrees(vec![2, 2, 0, 0, 0]).unwrap()
    }

    #[test]
    fn leaf_only_tree() {
        let t = Tree::from_degrees(vec![0]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.subtree_sizes(), &[1]);
        assert!(t.is_leaf(0));
        assert_eq!(t.parent(0), None);
        assert_eq!(t.parents(), &[0]);
    }

    #[test]
    fn cherry_structure() {
        let t = cherry();
        assert_eq!(t.subtree_sizes(), &[3, 1, 1]);
        assert_eq!(t.address(1), vec![1]);
        assert_eq!(t.address(2), vec![2]);
        assert_eq!(t.parents(), &[0, 0, 0]);
    }

    #[test]
    fn caterpillar_structure() {
        let t = caterpillar();
        assert_eq!(t.subtree_sizes(), &[5, 3, 1, 1, 1]);
        let addrs: Vec<Vec<usize>> = (0..5).map(|v| t.address(v)).collect();
        assert_eq!(addrs, vec![vec![], vec![1], vec![1, 1], vec![1, 2], vec![2]]);
        assert_eq!(t.node_at(&[1, 2]), Some(3));
        assert_eq!(t.node_at(&[3]), None);
    }

    #[test]
    fn malformed_sequences() {
        assert!(matches!(Tree::from_degrees(vec![]), Err(TreeError::MalformedDegreeSequence(_))));
        assert!(matches!(Tree::from_degrees(vec![2, 0]), Err(TreeError::MalformedDegreeSequence(_))));
        // correct sum, but the walk dies early
        assert!(matches!(Tree::from_degrees(vec![0, 2, 0]), Err(TreeError::MalformedDegreeSequence(_))));
        assert!(matches!(Tree::from_degrees(vec![1, 0, 0]), Err(TreeError::MalformedDegreeSequence(_))));
    }

    #[test]
    fn mrca_examples() {
        let c = cherry();
        assert_eq!(c.mrca_depth([1, 2]).unwrap(), 0);
        let cat = caterpillar();
        let n11 = cat.node_at(&[1, 1]).unwrap();
        let n12 = cat.node_at(&[1, 2]).unwrap();
        assert_eq!(cat.mrca_depth([n11, n12]).unwrap(), 1);
        for v in 0..cat.len() {
            assert_eq!(cat.mrca_depth([v]).unwrap(), cat.depth(v));
        }
        assert_eq!(cat.mrca_depth(Vec::new()), Err(TreeError::EmptyNodeSet));
        assert!(matches!(cat.mrca_depth([7]), Err(TreeError::IndexOutOfRange { index: 7, len: 5 })));
        assert_eq!(cat.distance(n11, 4).unwrap(), 3);
    }

    #[test]
    fn strip_leaves_examples() {
        assert_eq!(cherry().strip_leaves().unwrap(), Tree::single());
        assert_eq!(caterpillar().strip_leaves().unwrap().degrees(), &[1, 0]);
        assert_eq!(Tree::single().strip_leaves(), Err(TreeError::SingleNodeTree));
    }

    #[test]
    fn serialization_examples() {
        assert_eq!(Tree::single().serialize(), "0");
        assert_eq!(Tree::parse("0").unwrap(), Tree::single());
        assert_eq!(cherry().serialize(), "2 0 0");
        assert_eq!(Tree::parse("2 0 0").unwrap(), cherry());
        assert!(matches!(Tree::parse("2 0"), Err(TreeError::Parse { offset: 3, .. })));
        assert!(matches!(Tree::parse("2 x 0"), Err(TreeError::Parse { offset: 2, .. })));
        assert!(matches!(Tree::parse("0 0"), Err(TreeError::Parse { offset: 0, .. })));
    }

    #[test]
    fn tree_file_skips_comments_and_offsets_errors() {
        let text = "# header\n0\n2 0 0\n";
        let trees = parse_tree_file(text).unwrap();
        assert_eq!(trees, vec![Tree::single(), cherry()]);
        assert_eq!(write_tree_lines(&trees), "0\n2 0 0\n");
        let bad = "0\n2 0\n";
        assert!(matches!(parse_tree_file(bad), Err(TreeError::Parse { offset: 5, .. })));
    }

    // n - 1 child slots thrown into n bins, then rotated into a valid walk.
    pub(crate) fn arb_tree(max: usize) -> impl Strategy<Value = Tree> {
        (1usize..max).prop_flat_map(|n| (Just(n), prop::collection::vec(0..n, n - 1))).prop_map(|(n, slots)| {
            let mut ks = vec![0usize; n];
            for s in slots {
                ks[s] += 1;
            }
            crate::sampler::cycle_lemma_rotate(&mut ks);
            Tree::from_degrees(ks).unwrap()
        })
    }

    fn brute_sizes(t: &Tree) -> Vec<usize> {
        fn rec(t: &Tree, v: usize, out: &mut [usize]) -> usize {
            let s = 1 + t.children(v).map(|c| rec(t, c, out)).sum::<usize>();
            out[v] = s;
            s
        }
        let mut out = vec![0; t.len()];
        rec(t, 0, &mut out);
        out
    }

    proptest! {
        #[test]
        fn roundtrip_and_sizes(t in arb_tree(500)) {
            prop_assert_eq!(t.degrees().iter().sum::<usize>(), t.len() - 1);
            prop_assert_eq!(Tree::parse(&t.serialize()).unwrap(), t.clone());
            prop_assert_eq!(brute_sizes(&t), t.subtree_sizes().to_vec());
            for v in 0..t.len() {
                prop_assert_eq!(t.is_leaf(v), t.subtree_size(v) == 1);
                let end = v + t.subtree_size(v);
                prop_assert!((v + 1..end).all(|w| t.is_ancestor(v, w)));
            }
        }

        #[test]
        fn four_point_condition(t in arb_tree(30)) {
            let n = t.len();
            let d = |a: usize, b: usize| t.distance(a, b).unwrap();
            for a in 0..n { for b in 0..n {
                prop_assert_eq!(d(a, b), d(b, a));
                for c in 0..n {
                    prop_assert!(d(a, c) <= d(a, b) + d(b, c));
                    for e in 0..n {
                        let lhs = d(a, b) + d(c, e);
                        prop_assert!(lhs <= (d(a, c) + d(b, e)).max(d(a, e) + d(b, c)));
                    }
                }
            }}
        }
    }
}
