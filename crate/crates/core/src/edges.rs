//! Bijection between row index `l` and unordered node pairs `(i, j)`, `i < j`,
//! enumerated row-major over pairs: (0,1), (0,2), ..., (0,p-1), (1,2), ...

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeIndex {
    p: usize,
}

impl EdgeIndex {
    pub fn new(p: usize) -> Self {
        EdgeIndex { p }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// N = p(p−1)/2.
    pub fn len(&self) -> usize {
        self.p * self.p.saturating_sub(1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row of the pair `{i, j}` (order of arguments is irrelevant).
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j && i < self.p && j < self.p);
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        // Rows before node i: sum_{a<i} (p-1-a) = i(2p-i-1)/2.
        i * (2 * self.p - i - 1) / 2 + (j - i - 1)
    }

    /// Pair of row `l`, with `i < j`.
    pub fn pair(&self, l: usize) -> (usize, usize) {
        debug_assert!(l < self.len());
        let p = self.p as f64;
        // Invert the triangular offset, then correct for rounding.
        let disc = (2.0 * p - 1.0).powi(2) - 8.0 * l as f64;
        let mut i = (((2.0 * p - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor() as usize;
        i = i.min(self.p - 2);
        while i > 0 && self.row_start(i) > l {
            i -= 1;
        }
        while i + 1 < self.p - 1 && self.row_start(i + 1) <= l {
            i += 1;
        }
        let j = l - self.row_start(i) + i + 1;
        (i, j)
    }

    #[inline]
    fn row_start(&self, i: usize) -> usize {
        i * (2 * self.p - i - 1) / 2
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.p).flat_map(move |i| ((i + 1)..self.p).map(move |j| (i, j)))
    }
}
