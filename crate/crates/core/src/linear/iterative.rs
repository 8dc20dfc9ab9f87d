//! Jacobi-preconditioned Krylov solvers.

use crate::scalar::Scalar;

use super::{norm2, CsrMatrix, LinearError};

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn inverse_diagonal<S: Scalar>(a: &CsrMatrix<S>) -> Vec<S> {
    a.diagonal()
        .into_iter()
        .map(|d| if d == S::zero() { S::one() } else { S::one() / d })
        .collect()
}

pub fn conjugate_gradient<S: Scalar>(
    a: &CsrMatrix<S>,
    b: &[S],
    rel_tol: S,
    max_iters: usize,
) -> Result<Vec<S>, LinearError> {
    let n = a.n();
    let dinv = inverse_diagonal(a);
    let bn = norm2(b);
    let mut x = vec![S::zero(); n];
    if bn == S::zero() {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<S> = r.iter().zip(&dinv).map(|(r, d)| *r * *d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iters {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if pap == S::zero() {
            return Err(LinearError::NotConverged {
                iterations: it,
                residual: (norm2(&r) / bn).to_f64_lossy(),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= rel_tol * bn {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinearError::NotConverged {
        iterations: max_iters,
        residual: (norm2(&r) / bn).to_f64_lossy(),
    })
}

pub fn bicgstab<S: Scalar>(
    a: &CsrMatrix<S>,
    b: &[S],
    rel_tol: S,
    max_iters: usize,
) -> Result<Vec<S>, LinearError> {
    let n = a.n();
    let dinv = inverse_diagonal(a);
    let bn = norm2(b);
    let mut x = vec![S::zero(); n];
    if bn == S::zero() {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (S::one(), S::one(), S::one());
    let mut v = vec![S::zero(); n];
    let mut p = vec![S::zero(); n];
    let fail = |it: usize, r: &[S]| LinearError::NotConverged {
        iterations: it,
        residual: (norm2(r) / bn).to_f64_lossy(),
    };
    for it in 0..max_iters {
        let rho_new = dot(&r_hat, &r);
        if rho_new == S::zero() || omega == S::zero() {
            return Err(fail(it, &r));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph: Vec<S> = p.iter().zip(&dinv).map(|(p, d)| *p * *d).collect();
        v = a.matvec(&ph);
        let rv = dot(&r_hat, &v);
        if rv == S::zero() {
            return Err(fail(it, &r));
        }
        alpha = rho / rv;
        let s: Vec<S> = r.iter().zip(&v).map(|(r, v)| *r - alpha * *v).collect();
        if norm2(&s) <= rel_tol * bn {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return Ok(x);
        }
        let sh: Vec<S> = s.iter().zip(&dinv).map(|(s, d)| *s * *d).collect();
        let t = a.matvec(&sh);
        let tt = dot(&t, &t);
        omega = if tt == S::zero() { S::zero() } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= rel_tol * bn {
            return Ok(x);
        }
    }
    Err(fail(max_iters, &r))
}
