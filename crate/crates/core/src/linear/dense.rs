//! Small dense LU with partial pivoting.

use crate::scalar::Scalar;

use super::LinearError;

/// Row-major square matrix factorized in place.
#[derive(Clone, Debug)]
pub struct DenseLu<S> {
    n: usize,
    lu: Vec<S>,
    piv: Vec<usize>,
}

impl<S: Scalar> DenseLu<S> {
    pub fn factor(n: usize, mut a: Vec<S>) -> Result<Self, LinearError> {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(S::zero(), |m, v| m.max(v.abs()));
        let mut piv = (0..n).collect::<Vec<_>>();
        for k in 0..n {
            let (mut p, mut best) = (k, a[k * n + k].abs());
            for r in k + 1..n {
                let v = a[r * n + k].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= scale * S::epsilon() * S::lit(1e-3) || best == S::zero() {
                return Err(LinearError::Singular { pivot: k });
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                piv.swap(k, p);
            }
            let d = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / d;
                if f == S::zero() {
                    continue;
                }
                a[r * n + k] = f;
                for c in k + 1..n {
                    let v = a[k * n + c];
                    a[r * n + c] -= f * v;
                }
            }
        }
        Ok(Self { n, lu: a, piv })
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.n;
        let mut x: Vec<S> = self.piv.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= self.lu[r * n + c] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in r + 1..n {
                acc -= self.lu[r * n + c] * x[c];
            }
            x[r] = acc / self.lu[r * n + r];
        }
        x
    }
}

/// Solve `A x = b` for a row-major dense `A`.
pub fn dense_solve<S: Scalar>(n: usize, a: Vec<S>, b: &[S]) -> Result<Vec<S>, LinearError> {
    Ok(DenseLu::factor(n, a)?.solve(b))
}
