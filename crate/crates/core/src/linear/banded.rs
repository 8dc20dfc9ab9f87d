//! Banded direct factorizations: LU with partial pivoting and symmetric LDLᵀ.

use crate::scalar::Scalar;

use super::{CsrMatrix, LinearError};

/// LU with row interchanges, LINPACK layout: multipliers stay at the row
/// position where they were computed and pivots are replayed during solves.
pub struct BandLu<S> {
    n: usize,
    kl: usize,
    width: usize,
    a: Vec<S>,
    piv: Vec<usize>,
}

impl<S: Scalar> BandLu<S> {
    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.width - self.kl - 1);
        r * self.width + (c + self.kl - r)
    }

    pub fn factor(m: &CsrMatrix<S>) -> Result<Self, LinearError> {
        let n = m.n();
        let (kl, ku) = m.bandwidths();
        // room for fill-in from pivoting: kl extra super-diagonals
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            width,
            a: vec![S::zero(); n * width],
            piv: vec![0; n],
        };
        for r in 0..n {
            let (cols, vals) = m.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let k = lu.idx(r, c);
                lu.a[k] = v;
            }
        }
        let scale = m.max_abs();
        let upper = kl + ku;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.a[lu.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = lu.a[lu.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            lu.piv[k] = p;
            if best == S::zero() || best <= scale * S::epsilon() * S::lit(1e-6) {
                return Err(LinearError::Singular { pivot: k });
            }
            let last_col = (k + upper).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (i1, i2) = (lu.idx(k, c), lu.idx(p, c));
                    lu.a.swap(i1, i2);
                }
            }
            let d = lu.a[lu.idx(k, k)];
            let pivot_start = lu.idx(k, k);
            for r in k + 1..=last_row {
                let ik = lu.idx(r, k);
                let f = lu.a[ik] / d;
                lu.a[ik] = f;
                if f == S::zero() {
                    continue;
                }
                let len = last_col - k;
                let rs = lu.idx(r, k + 1);
                let (head, tail) = lu.a.split_at_mut(rs);
                let pivot_row = &head[pivot_start + 1..pivot_start + 1 + len];
                for (x, &y) in tail[..len].iter_mut().zip(pivot_row) {
                    *x -= f * y;
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk == S::zero() {
                continue;
            }
            for r in k + 1..=(k + self.kl).min(n - 1) {
                x[r] -= self.a[self.idx(r, k)] * xk;
            }
        }
        let upper = self.width - self.kl - 1;
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in r + 1..=(r + upper).min(n - 1) {
                acc -= self.a[self.idx(r, c)] * x[c];
            }
            x[r] = acc / self.a[self.idx(r, r)];
        }
        x
    }
}

/// LDLᵀ without pivoting, upper band storage.
pub struct BandLdlt<S> {
    n: usize,
    k: usize,
    /// row `r` holds columns `r..=r+k`; diagonal slot keeps `d_r`.
    u: Vec<S>,
}

impl<S: Scalar> BandLdlt<S> {
    pub fn factor(m: &CsrMatrix<S>) -> Result<Self, LinearError> {
        let n = m.n();
        let (kl, ku) = m.bandwidths();
        let k = kl.max(ku);
        let w = k + 1;
        let mut u = vec![S::zero(); n * w];
        for r in 0..n {
            let (cols, vals) = m.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c >= r {
                    u[r * w + (c - r)] = v;
                }
            }
        }
        let scale = m.max_abs();
        for j in 0..n {
            let d = u[j * w];
            if d == S::zero() || d.abs() <= scale * S::epsilon() * S::lit(1e-6) {
                return Err(LinearError::Breakdown { pivot: j });
            }
            let last = (j + k).min(n - 1);
            for i in j + 1..=last {
                let uji = u[j * w + (i - j)];
                if uji == S::zero() {
                    continue;
                }
                let f = uji / d;
                // row i, columns i..=last, against row j columns i..=last
                let len = last - i + 1;
                let (head, tail) = u.split_at_mut(i * w);
                let src = &head[j * w + (i - j)..j * w + (i - j) + len];
                for (x, &y) in tail[..len].iter_mut().zip(src) {
                    *x -= f * y;
                }
            }
            // store L multipliers in place of the row (scaled by 1/d)
            for i in j + 1..=last {
                u[j * w + (i - j)] = u[j * w + (i - j)] / d;
            }
        }
        Ok(Self { n, k, u })
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let (n, k, w) = (self.n, self.k, self.k + 1);
        let mut x = b.to_vec();
        // L y = b, with L[i][j] = u[j][i-j]
        for j in 0..n {
            let xj = x[j];
            if xj == S::zero() {
                continue;
            }
            for i in j + 1..=(j + k).min(n - 1) {
                x[i] -= self.u[j * w + (i - j)] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.u[j * w];
        }
        for j in (0..n).rev() {
            let mut acc = x[j];
            for i in j + 1..=(j + k).min(n - 1) {
                acc -= self.u[j * w + (i - j)] * x[i];
            }
            x[j] = acc;
        }
        x
    }
}
