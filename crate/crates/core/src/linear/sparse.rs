//! Compressed sparse row storage with a fixed pattern.

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<S> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<S>,
}

impl<S: Scalar> CsrMatrix<S> {
    /// Zero matrix with the given per-row column sets. Columns are sorted and
    /// deduplicated here.
    pub fn from_pattern(n: usize, mut rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.iter().all(|&c| c < n));
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![S::zero(); col_idx.len()];
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, S)]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for &(r, c, _) in triplets {
            rows[r].push(c);
        }
        let mut m = Self::from_pattern(n, rows);
        for &(r, c, v) in triplets {
            let k = m.position(r, c).expect("pattern contains entry");
            m.values[k] += v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let trip: Vec<_> = (0..n).map(|i| (i, i, S::one())).collect();
        Self::from_triplets(n, &trip)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[S]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn row_mut(&mut self, r: usize) -> (&[usize], &mut [S]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &mut self.values[a..b])
    }

    /// Index into the value array of entry `(r, c)`, if structurally present.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].binary_search(&c).ok().map(|k| a + k)
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.position(r, c).map_or(S::zero(), |k| self.values[k])
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = S::zero());
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        (0..self.n)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn max_abs(&self) -> S {
        self.values.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|` over stored entries.
    pub fn max_asymmetry(&self) -> S {
        let mut worst = S::zero();
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Infinity norm.
    pub fn norm_inf(&self) -> S {
        (0..self.n)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<S>())
            .fold(S::zero(), S::max)
    }

    /// Lower and upper bandwidth of the pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for r in 0..self.n {
            for &c in self.row(r).0 {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    pub fn diagonal(&self) -> Vec<S> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<S> {
        let mut d = vec![S::zero(); self.n * self.n];
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d[r * self.n + c] = v;
            }
        }
        d
    }
}
