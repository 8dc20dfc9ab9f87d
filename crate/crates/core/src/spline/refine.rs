use crate::linear::DenseLu;
use crate::scalar::Scalar;

use super::{FieldCoeffs, KnotVector, SplineError, SplineSpace, DEGREE};

fn same_knot<S: Scalar>(a: S, b: S) -> bool {
    (a - b).abs() <= S::lit(1e-12)
}

/// Interior breakpoints of `fine` missing from `coarse`, or `NotNested`.
fn inserted_knots<S: Scalar>(coarse: &KnotVector<S>, fine: &KnotVector<S>) -> Result<Vec<S>, SplineError> {
    if coarse.is_periodic() != fine.is_periodic() {
        return Err(SplineError::NotNested);
    }
    let fb = fine.breakpoints();
    let mut extra = Vec::new();
    let mut j = 0;
    for &c in coarse.breakpoints() {
        while j < fb.len() && !same_knot(fb[j], c) && fb[j] < c {
            extra.push(fb[j]);
            j += 1;
        }
        if j == fb.len() || !same_knot(fb[j], c) {
            return Err(SplineError::NotNested);
        }
        j += 1;
    }
    Ok(extra)
}

/// Row-major `n_fine × n_coarse` matrix mapping coarse coefficients to the
/// fine coefficients of the same function.
pub fn transfer_matrix<S: Scalar>(coarse: &KnotVector<S>, fine: &KnotVector<S>) -> Result<Vec<S>, SplineError> {
    let extra = inserted_knots(coarse, fine)?;
    let nc = coarse.n_basis();
    let nf = fine.n_basis();
    if coarse.is_periodic() {
        // nested periodic spaces: exact collocation at the fine Greville points
        let g = fine.greville();
        let af = fine.collocation(&g)?;
        let ac = coarse.collocation(&g)?;
        let lu = DenseLu::factor(nf, af).map_err(|_| SplineError::NotNested)?;
        let mut t = vec![S::zero(); nf * nc];
        for c in 0..nc {
            let col: Vec<S> = (0..nf).map(|r| ac[r * nc + c]).collect();
            for (r, v) in lu.solve(&col).into_iter().enumerate() {
                t[r * nc + c] = v;
            }
        }
        return Ok(t);
    }
    // Boehm insertion, one knot at a time
    let p = DEGREE;
    let mut knots = coarse.knots().to_vec();
    let mut rows: Vec<Vec<S>> = (0..nc)
        .map(|i| {
            let mut r = vec![S::zero(); nc];
            r[i] = S::one();
            r
        })
        .collect();
    for x in extra {
        let k = knots.partition_point(|u| *u <= x) - 1;
        let n_old = rows.len();
        let mut next = Vec::with_capacity(n_old + 1);
        for i in 0..=n_old {
            if i + p <= k {
                next.push(rows[i].clone());
            } else if i <= k {
                let alpha = (x - knots[i]) / (knots[i + p] - knots[i]);
                next.push(
                    rows[i]
                        .iter()
                        .zip(&rows[i - 1])
                        .map(|(a, b)| alpha * *a + (S::one() - alpha) * *b)
                        .collect(),
                );
            } else {
                next.push(rows[i - 1].clone());
            }
        }
        knots.insert(k + 1, x);
        rows = next;
    }
    debug_assert_eq!(rows.len(), nf);
    Ok(rows.concat())
}

/// Apply a linear map to every 1D fiber of `data` along `axis`.
fn map_axis<S: Scalar>(
    data: &[S],
    dims: [usize; 3],
    axis: usize,
    new_len: usize,
    op: impl Fn(&[S]) -> Vec<S>,
) -> (Vec<S>, [usize; 3]) {
    let mut nd = dims;
    nd[axis] = new_len;
    let mut out = vec![S::zero(); 3 * nd[0] * nd[1] * nd[2]];
    let flat = |d: [usize; 3], i: [usize; 3]| i[0] + d[0] * (i[1] + d[1] * i[2]);
    let (a1, a2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut fiber = vec![S::zero(); dims[axis]];
    for i1 in 0..dims[a1] {
        for i2 in 0..dims[a2] {
            for comp in 0..3 {
                let mut idx = [0usize; 3];
                idx[a1] = i1;
                idx[a2] = i2;
                for (t, f) in fiber.iter_mut().enumerate() {
                    idx[axis] = t;
                    *f = data[3 * flat(dims, idx) + comp];
                }
                for (t, v) in op(&fiber).into_iter().enumerate() {
                    idx[axis] = t;
                    out[3 * flat(nd, idx) + comp] = v;
                }
            }
        }
    }
    (out, nd)
}

/// Represent a coarse field exactly on a nested finer space.
pub fn knot_insert<S: Scalar>(
    coarse_space: &SplineSpace<S>,
    coarse: &FieldCoeffs<S>,
    fine_space: &SplineSpace<S>,
) -> Result<FieldCoeffs<S>, SplineError> {
    coarse.check(coarse_space)?;
    let mut data = coarse.as_slice().to_vec();
    let mut dims = coarse.dims();
    for a in 0..3 {
        let t = transfer_matrix(&coarse_space.axes()[a], &fine_space.axes()[a])?;
        let nc = dims[a];
        let nf = fine_space.dofs_per_axis()[a];
        let (d, nd) = map_axis(&data, dims, a, nf, |x| {
            (0..nf)
                .map(|r| t[r * nc..(r + 1) * nc].iter().zip(x).map(|(a, b)| *a * *b).sum())
                .collect()
        });
        data = d;
        dims = nd;
    }
    FieldCoeffs::from_vec(dims, data)
}

/// Coefficients whose spline agrees with `f` at the tensor Greville points.
pub fn interpolate<S: Scalar>(
    space: &SplineSpace<S>,
    f: impl Fn([S; 3]) -> [S; 3],
) -> Result<FieldCoeffs<S>, SplineError> {
    let g: [Vec<S>; 3] = std::array::from_fn(|a| space.axes()[a].greville());
    let dims = space.dofs_per_axis();
    let mut data = FieldCoeffs::from_fn(dims, |i| f([g[0][i[0]], g[1][i[1]], g[2][i[2]]])).into_vec();
    for a in 0..3 {
        let n = dims[a];
        let lu = DenseLu::factor(n, space.axes()[a].collocation(&g[a])?).map_err(|_| SplineError::InvalidKnots)?;
        data = map_axis(&data, dims, a, n, |x| lu.solve(x)).0;
    }
    FieldCoeffs::from_vec(dims, data)
}
