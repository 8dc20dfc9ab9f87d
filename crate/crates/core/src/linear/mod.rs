//! Sparse storage and linear solvers for the Newton tangent.

mod banded;
mod dense;
mod iterative;
mod sparse;

pub use banded::{BandLdlt, BandLu};
pub use dense::{dense_solve, DenseLu};
pub use iterative::{bicgstab, conjugate_gradient};
pub use sparse::CsrMatrix;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinearError {
    #[error("matrix is numerically singular at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("symmetric factorization broke down at pivot {pivot}")]
    Breakdown { pivot: usize },
    #[error("iterative solver stalled after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("linear residual {residual:e} above tolerance {tol:e}")]
    Inaccurate { residual: f64, tol: f64 },
    #[error("dimension mismatch: matrix {n}, right-hand side {m}")]
    Dimension { n: usize, m: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    /// Banded factorization: LDLᵀ for symmetric systems, pivoted LU otherwise.
    #[default]
    Direct,
    /// Jacobi-preconditioned CG (symmetric) or BiCGStab (general).
    Iterative,
}

fn norm2<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|x| *x * *x).sum::<S>().sqrt()
}

/// Normwise backward error `‖b − Ax‖ / (‖A‖‖x‖ + ‖b‖)` in the infinity norm.
pub fn backward_error<S: Scalar>(a: &CsrMatrix<S>, x: &[S], b: &[S]) -> S {
    let ax = a.matvec(x);
    let r = b
        .iter()
        .zip(&ax)
        .fold(S::zero(), |m, (bi, ai)| m.max((*bi - *ai).abs()));
    let xn = x.iter().fold(S::zero(), |m, v| m.max(v.abs()));
    let bn = b.iter().fold(S::zero(), |m, v| m.max(v.abs()));
    let den = a.norm_inf() * xn + bn;
    if den == S::zero() {
        S::zero()
    } else {
        r / den
    }
}

/// Tolerance on the backward error: `1e-12`, relaxed to a few ulps for `f32`.
pub fn residual_tolerance<S: Scalar>() -> S {
    S::lit(1e-12).max(S::epsilon() * S::lit(64.0))
}

/// Solve `A x = b`.
///
/// The symmetric flag selects LDLᵀ (falling back to pivoted LU if the
/// unpivoted factorization meets a tiny pivot) or CG. Direct solutions get up
/// to three steps of iterative refinement if the backward error exceeds
/// [`residual_tolerance`].
pub fn linear_solve<S: Scalar>(
    a: &CsrMatrix<S>,
    b: &[S],
    symmetric: bool,
    kind: LinearSolverKind,
) -> Result<Vec<S>, LinearError> {
    let n = a.n();
    if b.len() != n {
        return Err(LinearError::Dimension { n, m: b.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let tol = residual_tolerance::<S>();
    match kind {
        LinearSolverKind::Direct => {
            let solver: Box<dyn Fn(&[S]) -> Vec<S>> = if symmetric {
                match BandLdlt::factor(a) {
                    Ok(f) => Box::new(move |r| f.solve(r)),
                    Err(_) => {
                        let f = BandLu::factor(a)?;
                        Box::new(move |r| f.solve(r))
                    }
                }
            } else {
                let f = BandLu::factor(a)?;
                Box::new(move |r| f.solve(r))
            };
            let mut x = solver(b);
            for _ in 0..3 {
                if backward_error(a, &x, b) <= tol {
                    break;
                }
                let ax = a.matvec(&x);
                let r: Vec<S> = b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect();
                let dx = solver(&r);
                x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += *di);
            }
            let be = backward_error(a, &x, b);
            if !(be <= tol) {
                return Err(LinearError::Inaccurate {
                    residual: be.to_f64_lossy(),
                    tol: tol.to_f64_lossy(),
                });
            }
            Ok(x)
        }
        LinearSolverKind::Iterative => {
            let rel = tol;
            let max_it = 20 * n + 100;
            if symmetric {
                conjugate_gradient(a, b, rel, max_it)
            } else {
                bicgstab(a, b, rel, max_it)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::<f64>::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        for sym in [false, true] {
            for kind in [LinearSolverKind::Direct, LinearSolverKind::Iterative] {
                assert_eq!(linear_solve(&a, &b, sym, kind).unwrap(), b);
            }
        }
    }

    #[test]
    fn spd_two_by_two() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 2.0f64), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        for sym in [false, true] {
            for kind in [LinearSolverKind::Direct, LinearSolverKind::Iterative] {
                let x = linear_solve(&a, &[1.0, 1.0], sym, kind).unwrap();
                assert!((x[0] - 1.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn laplacian_matches_dense_oracle() {
        let n = 40;
        let a = laplacian(n);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let oracle = dense_solve(n, a.to_dense(), &b).unwrap();
        for sym in [false, true] {
            for kind in [LinearSolverKind::Direct, LinearSolverKind::Iterative] {
                let x = linear_solve(&a, &b, sym, kind).unwrap();
                for (u, v) in x.iter().zip(&oracle) {
                    assert!((u - v).abs() <= 1e-10 * v.abs().max(1.0), "{sym} {kind:?}");
                }
            }
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // symmetric indefinite with zero leading diagonal: LDLᵀ breaks down, LU takes over
        let a = CsrMatrix::from_triplets(
            3,
            &[(0, 1, 1.0f64), (1, 0, 1.0), (1, 1, 1.0), (1, 2, 2.0), (2, 1, 2.0), (2, 2, -1.0)],
        );
        let x_true = [0.5, -1.0, 2.0];
        let b = a.matvec(&x_true);
        let x = linear_solve(&a, &b, true, LinearSolverKind::Direct).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn banded_lu_agrees_with_dense_on_nonsymmetric_band() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            for d in 0..4usize {
                if i + d < n {
                    t.push((i, i + d, 1.0 / (1.0 + (i + 2 * d) as f64)));
                }
                if d > 0 && d < 3 && i >= d {
                    t.push((i, i - d, (i as f64 * 0.37 + d as f64).sin()));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, &t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let oracle = dense_solve(n, a.to_dense(), &b).unwrap();
        let x = BandLu::factor(&a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&oracle) {
            assert!((u - v).abs() <= 1e-10 * v.abs().max(1.0));
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(linear_solve(&a, &[1.0, 0.0], false, LinearSolverKind::Direct).is_err());
    }
}
