use crate::scalar::Scalar;

use super::SplineError;

/// Polynomial degree of every space in this crate.
pub const DEGREE: usize = 2;
/// Nonzero basis functions per element and axis.
pub const LOCAL: usize = DEGREE + 1;

/// Knot vector on `[0, 1]` without repeated interior knots.
///
/// Open vectors are clamped (end knots repeated `DEGREE + 1` times). Periodic
/// vectors are stored in extended form: `DEGREE` ghost knots on each side
/// continue the spacing across the wrap, and basis index `i` is identified
/// with `i mod n_elements`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector<S> {
    breaks: Vec<S>,
    knots: Vec<S>,
    periodic: bool,
}

impl<S: Scalar> KnotVector<S> {
    pub fn uniform(n_elem: usize, periodic: bool) -> Result<Self, SplineError> {
        if n_elem < 2 {
            return Err(SplineError::InvalidMesh { n_elem });
        }
        let n = S::from_usize_lossy(n_elem);
        let breaks = (0..=n_elem)
            .map(|i| S::from_usize_lossy(i) / n)
            .collect();
        Self::from_breakpoints(breaks, periodic)
    }

    /// Knot vector with the given strictly increasing breakpoints from 0 to 1.
    pub fn from_breakpoints(breaks: Vec<S>, periodic: bool) -> Result<Self, SplineError> {
        let n_elem = breaks.len().saturating_sub(1);
        if n_elem < 2 {
            return Err(SplineError::InvalidMesh { n_elem });
        }
        let ok_ends = breaks[0] == S::zero() && breaks[n_elem] == S::one();
        if !ok_ends || breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SplineError::InvalidKnots);
        }
        let p = DEGREE;
        let mut knots = Vec::with_capacity(n_elem + 2 * p + 1);
        if periodic {
            for j in 0..p {
                knots.push(breaks[n_elem - (p - j)] - S::one());
            }
            knots.extend_from_slice(&breaks);
            for j in 1..=p {
                knots.push(breaks[j] + S::one());
            }
        } else {
            knots.extend(std::iter::repeat(S::zero()).take(p));
            knots.extend_from_slice(&breaks);
            knots.extend(std::iter::repeat(S::one()).take(p));
        }
        Ok(Self {
            breaks,
            knots,
            periodic,
        })
    }

    pub fn degree(&self) -> usize {
        DEGREE
    }

    pub fn knots(&self) -> &[S] {
        &self.knots
    }

    pub fn breakpoints(&self) -> &[S] {
        &self.breaks
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn n_elements(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn n_basis(&self) -> usize {
        if self.periodic {
            self.n_elements()
        } else {
            self.knots.len() - DEGREE - 1
        }
    }

    /// Element containing `x`; the right end belongs to the last element.
    pub fn element_of(&self, x: S) -> Result<usize, SplineError> {
        if !(x >= S::zero() && x <= S::one()) {
            return Err(SplineError::Domain {
                x: x.to_f64_lossy(),
            });
        }
        let n = self.n_elements();
        // first breakpoint strictly greater than x, minus one
        let e = self.breaks.partition_point(|b| *b <= x);
        Ok(e.saturating_sub(1).min(n - 1))
    }

    pub fn element_bounds(&self, e: usize) -> (S, S) {
        (self.breaks[e], self.breaks[e + 1])
    }

    /// Global basis index of local function `j` on element `e`.
    #[inline]
    pub fn global_index(&self, e: usize, j: usize) -> usize {
        if self.periodic {
            (e + j) % self.n_elements()
        } else {
            e + j
        }
    }

    /// Values and first/second derivatives of the `LOCAL` nonzero basis
    /// functions on element `e` at `x`: `out[d][j]`.
    pub fn basis_derivs(&self, e: usize, x: S) -> [[S; LOCAL]; 3] {
        ders_basis_funs(&self.knots, e + DEGREE, x)
    }

    /// Greville abscissae in `[0, 1)` (periodic) or `[0, 1]` (open).
    pub fn greville(&self) -> Vec<S> {
        let half = S::lit(0.5);
        (0..self.n_basis())
            .map(|i| {
                let g = (self.knots[i + 1] + self.knots[i + 2]) * half;
                if self.periodic && g < S::zero() {
                    g + S::one()
                } else {
                    g
                }
            })
            .collect()
    }

    /// Collocation matrix `A[r][c] = N_c(x_r)`, row-major.
    pub fn collocation(&self, xs: &[S]) -> Result<Vec<S>, SplineError> {
        let n = self.n_basis();
        let mut a = vec![S::zero(); xs.len() * n];
        for (r, &x) in xs.iter().enumerate() {
            let e = self.element_of(x)?;
            let d = self.basis_derivs(e, x);
            for j in 0..LOCAL {
                a[r * n + self.global_index(e, j)] += d[0][j];
            }
        }
        Ok(a)
    }
}

/// Nonzero B-spline basis functions and their first two derivatives on knot
/// span `span` (`knots[span] <= x < knots[span + 1]`), degree `DEGREE`.
pub fn ders_basis_funs<S: Scalar>(knots: &[S], span: usize, x: S) -> [[S; LOCAL]; 3] {
    let p = DEGREE;
    let mut ndu = [[S::zero(); LOCAL]; LOCAL];
    let mut left = [S::zero(); LOCAL];
    let mut right = [S::zero(); LOCAL];
    ndu[0][0] = S::one();
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = S::zero();
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = [[S::zero(); LOCAL]; 3];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = [[S::zero(); LOCAL]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = S::one();
        for k in 1..=2usize.min(p) {
            let mut d = S::zero();
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = S::from_usize_lossy(p);
    for k in 1..=2 {
        for j in 0..=p {
            ders[k][j] *= fac;
        }
        fac *= S::from_usize_lossy(p - k);
    }
    ders
}
