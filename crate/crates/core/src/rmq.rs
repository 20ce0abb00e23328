//! Sparse-table range-minimum queries: `O(n log n)` build, `O(1)` query.

/// Which index wins among equal minima.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    Leftmost,
    Rightmost,
}

/// Range-minimum table over a fixed sequence.
///
/// `levels[k][i]` holds the argmin of `values[i..i + 2^k]`.
#[derive(Debug, Clone)]
pub struct SparseTable<T> {
    values: Vec<T>,
    levels: Vec<Vec<u32>>,
    tie: TieBreak,
}

impl<T: PartialOrd + Copy> SparseTable<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self::with_tie_break(values, TieBreak::Leftmost)
    }

    pub fn with_tie_break(values: Vec<T>, tie: TieBreak) -> Self {
        let n = values.len();
        assert!(n <= u32::MAX as usize, "sequence too long for a u32 sparse table");
        let mut levels: Vec<Vec<u32>> = Vec::new();
        if n > 0 {
            levels.push((0..n as u32).collect());
            let mut k = 1;
            while (1usize << k) <= n {
                let half = 1usize << (k - 1);
                let prev = &levels[k - 1];
                let row: Vec<u32> = (0..=n - (1 << k)).map(|i| pick(&values, tie, prev[i], prev[i + half])).collect();
                levels.push(row);
                k += 1;
            }
        }
        Self { values, levels, tie }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Argmin over the inclusive range `lo..=hi`.
    #[inline]
    pub fn argmin(&self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi && hi < self.values.len());
        let span = hi - lo + 1;
        let k = (usize::BITS - 1 - span.leading_zeros()) as usize;
        let row = &self.levels[k];
        pick(&self.values, self.tie, row[lo], row[hi + 1 - (1 << k)]) as usize
    }

    /// Minimum value over the inclusive range `lo..=hi`.
    #[inline]
    pub fn min(&self, lo: usize, hi: usize) -> T {
        self.values[self.argmin(lo, hi)]
    }
}

#[inline]
fn pick<T: PartialOrd + Copy>(values: &[T], tie: TieBreak, a: u32, b: u32) -> u32 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let (x, y) = (values[lo as usize], values[hi as usize]);
    match tie {
        TieBreak::Leftmost => {
            if y < x {
                hi
            } else {
                lo
            }
        }
        TieBreak::Rightmost => {
            if x < y {
                lo
            } else {
                hi
            }
        }
    }
}
