//! Tensor-product quadratic B-spline spaces on the unit cube.

mod field;
mod knots;
mod refine;

pub use field::{sample_lattice, write_field_csv, FieldCoeffs, FieldPoint, FieldSample};
pub use knots::{ders_basis_funs, KnotVector, DEGREE, LOCAL};
pub use refine::{interpolate, knot_insert, transfer_matrix};

use crate::quadrature::gauss_legendre_unit;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplineError {
    #[error("mesh needs at least 2 elements per axis, got {n_elem}")]
    InvalidMesh { n_elem: usize },
    #[error("breakpoints must increase strictly from 0 to 1")]
    InvalidKnots,
    #[error("point coordinate {x} outside [0, 1]")]
    Domain { x: f64 },
    #[error("fine knot vector does not contain the coarse one")]
    NotNested,
    #[error("coefficient array has {got} entries, space expects {expected}")]
    Shape { expected: usize, got: usize },
}

/// Basis function `index` with value, gradient and Hessian at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisValue<S> {
    pub index: usize,
    pub value: S,
    pub grad: [S; 3],
    pub hess: [[S; 3]; 3],
}

/// Quadrature points per element and axis.
pub const QP_1D: usize = DEGREE + 1;
/// Basis functions supported on one element.
pub const ELEM_DOFS: usize = LOCAL * LOCAL * LOCAL;

/// 1D basis data at one quadrature point: `d[deriv][local]`.
pub type Basis1d<S> = [[S; LOCAL]; 3];

#[derive(Clone, Debug)]
struct AxisTables<S> {
    /// `[element][qp]` physical coordinate
    points: Vec<[S; QP_1D]>,
    /// `[element][qp]` weight including element width
    weights: Vec<[S; QP_1D]>,
    /// `[element][qp]`
    basis: Vec<[Basis1d<S>; QP_1D]>,
}

/// Tensor-product space with precomputed element quadrature and connectivity.
#[derive(Clone, Debug)]
pub struct SplineSpace<S> {
    axes: [KnotVector<S>; 3],
    tables: [AxisTables<S>; 3],
    conn: Vec<[usize; ELEM_DOFS]>,
}

impl<S: Scalar> SplineSpace<S> {
    pub fn new(axes: [KnotVector<S>; 3]) -> Self {
        let (gx, gw) = gauss_legendre_unit::<S>(QP_1D);
        let tables = std::array::from_fn(|a| {
            let kv = &axes[a];
            let ne = kv.n_elements();
            let mut t = AxisTables {
                points: Vec::with_capacity(ne),
                weights: Vec::with_capacity(ne),
                basis: Vec::with_capacity(ne),
            };
            for e in 0..ne {
                let (lo, hi) = kv.element_bounds(e);
                let h = hi - lo;
                let pts: [S; QP_1D] = std::array::from_fn(|q| lo + h * gx[q]);
                t.weights.push(std::array::from_fn(|q| h * gw[q]));
                t.basis.push(std::array::from_fn(|q| kv.basis_derivs(e, pts[q])));
                t.points.push(pts);
            }
            t
        });
        let ne = [0, 1, 2].map(|a| axes[a].n_elements());
        let nb = [0, 1, 2].map(|a| axes[a].n_basis());
        let mut conn = Vec::with_capacity(ne[0] * ne[1] * ne[2]);
        for e2 in 0..ne[2] {
            for e1 in 0..ne[1] {
                for e0 in 0..ne[0] {
                    conn.push(std::array::from_fn(|l| {
                        let (j0, j1, j2) = (l % LOCAL, (l / LOCAL) % LOCAL, l / (LOCAL * LOCAL));
                        let i0 = axes[0].global_index(e0, j0);
                        let i1 = axes[1].global_index(e1, j1);
                        let i2 = axes[2].global_index(e2, j2);
                        i0 + nb[0] * (i1 + nb[1] * i2)
                    }));
                }
            }
        }
        Self { axes, tables, conn }
    }

    pub fn axes(&self) -> &[KnotVector<S>; 3] {
        &self.axes
    }

    pub fn is_periodic(&self) -> bool {
        self.axes[0].is_periodic()
    }

    pub fn dofs_per_axis(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.axes[a].n_basis())
    }

    pub fn elements_per_axis(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.axes[a].n_elements())
    }

    pub fn n_control_points(&self) -> usize {
        self.dofs_per_axis().iter().product()
    }

    /// Scalar unknowns: three displacement components per control point.
    pub fn n_dofs(&self) -> usize {
        3 * self.n_control_points()
    }

    pub fn n_elements(&self) -> usize {
        self.conn.len()
    }

    pub fn cp_index(&self, i: [usize; 3]) -> usize {
        let n = self.dofs_per_axis();
        i[0] + n[0] * (i[1] + n[1] * i[2])
    }

    pub fn cp_multi_index(&self, cp: usize) -> [usize; 3] {
        let n = self.dofs_per_axis();
        [cp % n[0], (cp / n[0]) % n[1], cp / (n[0] * n[1])]
    }

    /// Element `(e0, e1, e2)` from its flat id.
    pub fn element_multi_index(&self, elem: usize) -> [usize; 3] {
        let n = self.elements_per_axis();
        [elem % n[0], (elem / n[0]) % n[1], elem / (n[0] * n[1])]
    }

    /// Control points supported on an element, local order `j0 + 3(j1 + 3 j2)`.
    pub fn element_dofs(&self, elem: usize) -> &[usize; ELEM_DOFS] {
        &self.conn[elem]
    }

    /// 1D basis data of `axis` on element `e` at quadrature point `q`.
    #[inline]
    pub fn qp_basis_1d(&self, axis: usize, e: usize, q: usize) -> &Basis1d<S> {
        &self.tables[axis].basis[e][q]
    }

    #[inline]
    pub fn qp_point_1d(&self, axis: usize, e: usize, q: usize) -> S {
        self.tables[axis].points[e][q]
    }

    #[inline]
    pub fn qp_weight_1d(&self, axis: usize, e: usize, q: usize) -> S {
        self.tables[axis].weights[e][q]
    }

    /// All `ELEM_DOFS` basis functions at element quadrature point `q`
    /// (`q[a] < QP_1D`), plus the quadrature weight and point.
    pub fn element_qp(&self, elem: usize, q: [usize; 3]) -> ([BasisValue<S>; ELEM_DOFS], S, [S; 3]) {
        let e = self.element_multi_index(elem);
        let b = [0, 1, 2].map(|a| self.qp_basis_1d(a, e[a], q[a]));
        let w = self.qp_weight_1d(0, e[0], q[0]) * self.qp_weight_1d(1, e[1], q[1]) * self.qp_weight_1d(2, e[2], q[2]);
        let x = [0, 1, 2].map(|a| self.qp_point_1d(a, e[a], q[a]));
        let dofs = &self.conn[elem];
        let vals = std::array::from_fn(|l| {
            tensor_basis(dofs[l], [l % LOCAL, (l / LOCAL) % LOCAL, l / (LOCAL * LOCAL)], b)
        });
        (vals, w, x)
    }

    /// The 27 nonzero basis functions at `x` with value, gradient and Hessian.
    pub fn eval_basis(&self, x: [S; 3]) -> Result<Vec<BasisValue<S>>, SplineError> {
        let mut e = [0usize; 3];
        let mut d: [Basis1d<S>; 3] = [[[S::zero(); LOCAL]; 3]; 3];
        for a in 0..3 {
            e[a] = self.axes[a].element_of(x[a])?;
            d[a] = self.axes[a].basis_derivs(e[a], x[a]);
        }
        let nb = self.dofs_per_axis();
        let mut out = Vec::with_capacity(ELEM_DOFS);
        for j2 in 0..LOCAL {
            for j1 in 0..LOCAL {
                for j0 in 0..LOCAL {
                    let i0 = self.axes[0].global_index(e[0], j0);
                    let i1 = self.axes[1].global_index(e[1], j1);
                    let i2 = self.axes[2].global_index(e[2], j2);
                    let cp = i0 + nb[0] * (i1 + nb[1] * i2);
                    out.push(tensor_basis(cp, [j0, j1, j2], [&d[0], &d[1], &d[2]]));
                }
            }
        }
        Ok(out)
    }
}

#[inline]
fn tensor_basis<S: Scalar>(index: usize, j: [usize; 3], b: [&Basis1d<S>; 3]) -> BasisValue<S> {
    // f[a][d]: d-th derivative along axis a
    let f = [0, 1, 2].map(|a| [b[a][0][j[a]], b[a][1][j[a]], b[a][2][j[a]]]);
    let comp = |d: [usize; 3]| f[0][d[0]] * f[1][d[1]] * f[2][d[2]];
    let mut hess = [[S::zero(); 3]; 3];
    for r in 0..3 {
        for c in r..3 {
            let mut d = [0usize; 3];
            d[r] += 1;
            d[c] += 1;
            hess[r][c] = comp(d);
            hess[c][r] = hess[r][c];
        }
    }
    BasisValue {
        index,
        value: comp([0, 0, 0]),
        grad: [comp([1, 0, 0]), comp([0, 1, 0]), comp([0, 0, 1])],
        hess,
    }
}

/// Uniform space with `n_elem` elements per axis.
pub fn make_uniform_space<S: Scalar>(n_elem: usize, periodic: bool) -> Result<SplineSpace<S>, SplineError> {
    let kv = KnotVector::uniform(n_elem, periodic)?;
    Ok(SplineSpace::new([kv.clone(), kv.clone(), kv]))
}

#[cfg(test)]
mod tests;
