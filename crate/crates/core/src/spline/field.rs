use std::ops::{Index, IndexMut};
use std::path::Path;

use crate::io::{atomic_write_csv, fmt_float, IoError};
use crate::scalar::Scalar;

use super::{SplineError, SplineSpace};

/// Control-point displacement coefficients, flat index `3·cp + component`
/// with `cp = i + n0·(j + n1·k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldCoeffs<S> {
    dims: [usize; 3],
    data: Vec<S>,
}

impl<S: Scalar> FieldCoeffs<S> {
    pub fn zeros(space: &SplineSpace<S>) -> Self {
        Self::zeros_dims(space.dofs_per_axis())
    }

    pub fn zeros_dims(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![S::zero(); 3 * dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<S>) -> Result<Self, SplineError> {
        let expected = 3 * dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(SplineError::Shape {
                expected,
                got: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    /// Field with `f(cp_multi_index) -> [u1, u2, u3]` at every control point.
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut([usize; 3]) -> [S; 3]) -> Self {
        let mut out = Self::zeros_dims(dims);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let cp = i + dims[0] * (j + dims[1] * k);
                    let v = f([i, j, k]);
                    out.data[3 * cp..3 * cp + 3].copy_from_slice(&v);
                }
            }
        }
        out
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn n_control_points(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn matches(&self, space: &SplineSpace<S>) -> bool {
        self.dims == space.dofs_per_axis()
    }

    pub fn check(&self, space: &SplineSpace<S>) -> Result<(), SplineError> {
        if self.matches(space) {
            Ok(())
        } else {
            Err(SplineError::Shape {
                expected: space.n_dofs(),
                got: self.data.len(),
            })
        }
    }

    /// `a·self + b·other`
    pub fn lincomb(&self, a: S, other: &Self, b: S) -> Self {
        assert_eq!(self.dims, other.dims);
        Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * *x + b * *y)
                .collect(),
        }
    }

    pub fn scaled(&self, a: S) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|x| *x * a).collect(),
        }
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    /// Cast to another scalar type.
    pub fn cast<T: Scalar>(&self) -> FieldCoeffs<T> {
        FieldCoeffs {
            dims: self.dims,
            data: self.data.iter().map(|v| T::lit(v.to_f64_lossy())).collect(),
        }
    }
}

impl<S> Index<usize> for FieldCoeffs<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        &self.data[i]
    }
}

impl<S> IndexMut<usize> for FieldCoeffs<S> {
    fn index_mut(&mut self, i: usize) -> &mut S {
        &mut self.data[i]
    }
}

/// Displacement `u[i]`, gradient `grad[i][J] = u_i,J` and second gradient
/// `hess[i][J][K] = u_i,JK` at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldPoint<S> {
    pub u: [S; 3],
    pub grad: [[S; 3]; 3],
    pub hess: [[[S; 3]; 3]; 3],
}

impl<S: Scalar> FieldPoint<S> {
    pub fn zero() -> Self {
        Self {
            u: [S::zero(); 3],
            grad: [[S::zero(); 3]; 3],
            hess: [[[S::zero(); 3]; 3]; 3],
        }
    }
}

impl<S: Scalar> SplineSpace<S> {
    pub fn interpolate_field(&self, coeffs: &FieldCoeffs<S>, x: [S; 3]) -> Result<FieldPoint<S>, SplineError> {
        coeffs.check(self)?;
        let basis = self.eval_basis(x)?;
        let mut out = FieldPoint::zero();
        for b in &basis {
            for i in 0..3 {
                let c = coeffs.data[3 * b.index + i];
                out.u[i] += c * b.value;
                for j in 0..3 {
                    out.grad[i][j] += c * b.grad[j];
                    for k in 0..3 {
                        out.hess[i][j][k] += c * b.hess[j][k];
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample<S> {
    pub x: [S; 3],
    pub field: FieldPoint<S>,
}

/// Evaluate on the `m³` lattice `X = (i, j, k)/(m − 1)`, `X1` fastest.
pub fn sample_lattice<S: Scalar>(
    space: &SplineSpace<S>,
    coeffs: &FieldCoeffs<S>,
    m: usize,
) -> Result<Vec<FieldSample<S>>, SplineError> {
    let m = m.max(2);
    let h = S::one() / S::from_usize_lossy(m - 1);
    let mut out = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                let x = [i, j, k].map(|v| (S::from_usize_lossy(v) * h).min(S::one()));
                out.push(FieldSample {
                    x,
                    field: space.interpolate_field(coeffs, x)?,
                });
            }
        }
    }
    Ok(out)
}

/// CSV with header `X1,X2,X3,u1,u2,u3` followed by `extra` columns, whose
/// values come from `extra_values(sample)`.
pub fn write_field_csv<S: Scalar>(
    path: &Path,
    samples: &[FieldSample<S>],
    extra: &[&str],
    mut extra_values: impl FnMut(&FieldSample<S>) -> Vec<String>,
) -> Result<(), IoError> {
    let mut header = vec!["X1", "X2", "X3", "u1", "u2", "u3"];
    header.extend_from_slice(extra);
    let rows = samples.iter().map(|s| {
        let mut r: Vec<String> = s.x.iter().chain(s.field.u.iter()).map(|v| fmt_float(*v)).collect();
        r.extend(extra_values(s));
        r
    });
    atomic_write_csv(path, &header, rows)
}
