//! Global residual and tangent of the weak form over a spline space, with
//! constraints eliminated, and the Newton driver.

mod newton;

pub use newton::{newton_solve, write_residual_csv, NewtonConfig, NewtonReport, NonlinearSystem, SolveError};

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::integrators::{self, HalfStepStates, SchemeConfig};
use crate::linear::CsrMatrix;
use crate::material::{f_index, gf_index, EnergyDensity, NZ};
use crate::scalar::Scalar;
use crate::spline::{BasisValue, FieldCoeffs, FieldPoint, SplineSpace, ELEM_DOFS, QP_1D};

#[cfg(test)]
mod tests;

/// Unknowns per element.
pub const ELEM_UNKNOWNS: usize = 3 * ELEM_DOFS;

const FIXED: usize = usize::MAX;
const CHUNK: usize = 128;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssemblyError {
    #[error("field has {got} coefficients, space expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("dof {dof} constrained twice")]
    DuplicateConstraint { dof: usize },
    #[error("dof {dof} out of range (space has {n_dofs})")]
    OutOfRange { dof: usize, n_dofs: usize },
}

/// Prescribed values on individual unknowns `3·cp + component`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet<S> {
    fixed: BTreeMap<usize, S>,
}

impl<S: Scalar> ConstraintSet<S> {
    pub fn new() -> Self {
        Self { fixed: BTreeMap::new() }
    }

    pub fn fix(&mut self, cp: usize, comp: usize, value: S) -> Result<(), AssemblyError> {
        assert!(comp < 3);
        let dof = 3 * cp + comp;
        if self.fixed.insert(dof, value).is_some() {
            return Err(AssemblyError::DuplicateConstraint { dof });
        }
        Ok(())
    }

    /// All components of every control point on the outer layer of the
    /// non-periodic axes, fixed at zero.
    pub fn boundary_layer(space: &SplineSpace<S>) -> Self {
        let n = space.dofs_per_axis();
        let periodic = space.is_periodic();
        let mut set = Self::new();
        for cp in 0..space.n_control_points() {
            let idx = space.cp_multi_index(cp);
            let on_boundary = !periodic && (0..3).any(|a| idx[a] == 0 || idx[a] + 1 == n[a]);
            if on_boundary {
                for comp in 0..3 {
                    set.fixed.insert(3 * cp + comp, S::zero());
                }
            }
        }
        set
    }

    /// All three components of one control point fixed at zero.
    pub fn pin(cp: usize) -> Self {
        let mut set = Self::new();
        for comp in 0..3 {
            set.fixed.insert(3 * cp + comp, S::zero());
        }
        set
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed.contains_key(&dof)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, S)> + '_ {
        self.fixed.iter().map(|(d, v)| (*d, *v))
    }

    /// Overwrite the constrained entries of `u` with their prescribed values.
    pub fn apply(&self, u: &mut FieldCoeffs<S>) {
        for (d, v) in self.iter() {
            u[d] = v;
        }
    }
}

/// Which discrete equation is assembled.
#[derive(Clone, Copy, Debug)]
pub enum Mode<'a, S> {
    /// One time step; the unknown field is `uⁿ⁺¹`.
    Dynamic {
        u_nm1: &'a FieldCoeffs<S>,
        u_n: &'a FieldCoeffs<S>,
        dt: S,
        scheme: SchemeConfig<S>,
    },
    /// Equilibrium without inertia or damping; the unknown is `u` itself.
    Static,
}

/// Residual over free unknowns and, on request, the tangent in the unknown.
#[derive(Clone, Debug)]
pub struct AssembledSystem<S> {
    pub residual: Vec<S>,
    pub tangent: Option<CsrMatrix<S>>,
    pub symmetric: bool,
}

impl<S: Scalar> AssembledSystem<S> {
    pub fn residual_norm(&self) -> S {
        self.residual.iter().fold(S::zero(), |a, r| a + *r * *r).sqrt()
    }
}

/// Field value, gradient and Hessian at a quadrature point.
pub fn field_at<S: Scalar>(basis: &[BasisValue<S>; ELEM_DOFS], coeffs: &FieldCoeffs<S>) -> FieldPoint<S> {
    let data = coeffs.as_slice();
    let mut out = FieldPoint::zero();
    for b in basis {
        for i in 0..3 {
            let c = data[3 * b.index + i];
            if c == S::zero() {
                continue;
            }
            out.u[i] += c * b.value;
            for j in 0..3 {
                out.grad[i][j] += c * b.grad[j];
                for k in 0..3 {
                    out.hess[i][j][k] += c * b.hess[j][k];
                }
            }
        }
    }
    out
}

/// `ζ` of a displacement sample with `F = F_base + ∇u`.
pub fn zeta_of<S: Scalar>(fp: &FieldPoint<S>, f_base: &[[S; 3]; 3]) -> [S; NZ] {
    let mut z = [S::zero(); NZ];
    for i in 0..3 {
        for j in 0..3 {
            z[f_index(i, j)] = f_base[i][j] + fp.grad[i][j];
            for k in 0..3 {
                z[gf_index(i, j, k)] = fp.hess[i][j][k];
            }
        }
    }
    z
}

pub fn identity3<S: Scalar>() -> [[S; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { S::one() } else { S::zero() }))
}

fn all_qps() -> impl Iterator<Item = [usize; 3]> {
    (0..QP_1D).flat_map(|q2| (0..QP_1D).flat_map(move |q1| (0..QP_1D).map(move |q0| [q0, q1, q2])))
}

/// Integrate a pointwise quantity over the domain with the assembly
/// quadrature. `f` receives the samples of `fields` (in order) and the point.
/// Per-element sums are reduced in element order.
pub fn integrate<S, F>(space: &SplineSpace<S>, fields: &[&FieldCoeffs<S>], f: F) -> S
where
    S: Scalar,
    F: Fn(&[FieldPoint<S>], [S; 3]) -> S + Sync,
{
    let per_elem: Vec<S> = (0..space.n_elements())
        .into_par_iter()
        .map(|e| {
            let mut acc = S::zero();
            let mut pts = Vec::with_capacity(fields.len());
            for q in all_qps() {
                let (basis, w, x) = space.element_qp(e, q);
                pts.clear();
                pts.extend(fields.iter().map(|c| field_at(&basis, c)));
                acc += w * f(&pts, x);
            }
            acc
        })
        .collect();
    per_elem.into_iter().fold(S::zero(), |a, v| a + v)
}

/// The 12 derivative weights of a basis function that map `u_i` into ζ:
/// `N,J` then `N,JK`.
#[inline]
/// Basis derivatives `N,J` followed by the distinct `N,JK` (`J ≤ K`).
fn derivative_weights<S: Scalar>(b: &BasisValue<S>) -> [S; NW] {
    let mut g = [S::zero(); NW];
    g[..3].copy_from_slice(&b.grad);
    for (r, &(j, k)) in HESS_PAIRS.iter().enumerate() {
        g[3 + r] = b.hess[j][k];
    }
    g
}

/// Folded derivative weights per basis function.
const NW: usize = 9;
const HESS_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// ζ entries of component `i` paired with the folded weight they multiply.
fn component_slots(i: usize) -> [(usize, usize); 12] {
    std::array::from_fn(|p| {
        if p < 3 {
            (p, f_index(i, p))
        } else {
            let (j, k) = ((p - 3) / 3, (p - 3) % 3);
            let r = HESS_PAIRS.iter().position(|&pr| pr == (j.min(k), j.max(k))).expect("pair listed");
            (3 + r, gf_index(i, j, k))
        }
    })
}

/// Stress vector collapsed onto the folded weights of each component.
fn fold_stress<S: Scalar>(stress: &[S; NZ], slots: &[[(usize, usize); 12]; 3]) -> [[S; NW]; 3] {
    std::array::from_fn(|i| {
        let mut v = [S::zero(); NW];
        for &(r, z) in &slots[i] {
            v[r] += stress[z];
        }
        v
    })
}

struct ElementOutput<S> {
    residual: [S; ELEM_UNKNOWNS],
    tangent: Option<Vec<S>>,
}

/// Assembles residuals and tangents for one space, energy and constraint set.
pub struct Assembler<'a, S: Scalar, E> {
    space: &'a SplineSpace<S>,
    energy: &'a E,
    constraints: ConstraintSet<S>,
    f_base: [[S; 3]; 3],
    free: Vec<usize>,
    slot: Vec<usize>,
    pattern: CsrMatrix<S>,
}

impl<'a, S: Scalar, E: EnergyDensity<S>> Assembler<'a, S, E> {
    pub fn new(space: &'a SplineSpace<S>, energy: &'a E, constraints: ConstraintSet<S>) -> Result<Self, AssemblyError> {
        let n_dofs = space.n_dofs();
        if let Some((dof, _)) = constraints.iter().find(|(d, _)| *d >= n_dofs) {
            return Err(AssemblyError::OutOfRange { dof, n_dofs });
        }
        let mut slot = vec![FIXED; n_dofs];
        let mut free = Vec::with_capacity(n_dofs - constraints.len());
        for (d, s) in slot.iter_mut().enumerate() {
            if !constraints.is_fixed(d) {
                *s = free.len();
                free.push(d);
            }
        }
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); free.len()];
        let slot_ref = &slot;
        for e in 0..space.n_elements() {
            let local: Vec<usize> = space
                .element_dofs(e)
                .iter()
                .flat_map(|&cp| (0..3).map(move |i| slot_ref[3 * cp + i]))
                .filter(|&s| s != FIXED)
                .collect();
            for &r in &local {
                rows[r].extend_from_slice(&local);
            }
        }
        let pattern = CsrMatrix::from_pattern(free.len(), rows);
        Ok(Self {
            space,
            energy,
            constraints,
            f_base: identity3(),
            free,
            slot,
            pattern,
        })
    }

    /// Use `F = F̄ + ∇u` instead of `F = I + ∇u`.
    pub fn with_base_gradient(mut self, f_base: [[S; 3]; 3]) -> Self {
        self.f_base = f_base;
        self
    }

    pub fn space(&self) -> &SplineSpace<S> {
        self.space
    }

    pub fn energy(&self) -> &E {
        self.energy
    }

    pub fn base_gradient(&self) -> &[[S; 3]; 3] {
        &self.f_base
    }

    pub fn constraints(&self) -> &ConstraintSet<S> {
        &self.constraints
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Global unknown index of each free unknown.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    /// Free-unknown index of global unknown `dof`, if it is free.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        (self.slot[dof] != FIXED).then_some(self.slot[dof])
    }

    pub fn gather_free(&self, u: &FieldCoeffs<S>) -> Vec<S> {
        self.free.iter().map(|&d| u[d]).collect()
    }

    /// `u[free] += scale·du`.
    pub fn add_free(&self, u: &mut FieldCoeffs<S>, du: &[S], scale: S) {
        for (&d, v) in self.free.iter().zip(du) {
            u[d] += scale * *v;
        }
    }

    fn check(&self, u: &FieldCoeffs<S>) -> Result<(), AssemblyError> {
        if u.len() != self.space.n_dofs() {
            return Err(AssemblyError::Dimension {
                expected: self.space.n_dofs(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Residual of the discrete weak form tested against every free basis
    /// function, and optionally its derivative with respect to `u`.
    pub fn assemble(&self, u: &FieldCoeffs<S>, mode: &Mode<'_, S>, with_tangent: bool) -> Result<AssembledSystem<S>, AssemblyError> {
        self.check(u)?;
        if let Mode::Dynamic { u_nm1, u_n, .. } = mode {
            self.check(u_nm1)?;
            self.check(u_n)?;
        }
        let symmetric = match mode {
            Mode::Dynamic { scheme, .. } => scheme.is_symmetric(),
            Mode::Static => true,
        };
        let mut residual = vec![S::zero(); self.free.len()];
        let mut tangent = with_tangent.then(|| {
            let mut t = self.pattern.clone();
            t.clear();
            t
        });
        let n_elem = self.space.n_elements();
        let mut start = 0;
        while start < n_elem {
            let end = (start + CHUNK).min(n_elem);
            let outputs: Vec<ElementOutput<S>> = (start..end)
                .into_par_iter()
                .map(|e| self.element(e, u, mode, with_tangent, symmetric))
                .collect();
            for (e, out) in (start..end).zip(outputs) {
                self.scatter(e, &out, &mut residual, tangent.as_mut());
            }
            start = end;
        }
        Ok(AssembledSystem {
            residual,
            tangent,
            symmetric,
        })
    }

    fn local_slots(&self, e: usize) -> [usize; ELEM_UNKNOWNS] {
        let dofs = self.space.element_dofs(e);
        std::array::from_fn(|r| self.slot[3 * dofs[r / 3] + r % 3])
    }

    fn scatter(&self, e: usize, out: &ElementOutput<S>, residual: &mut [S], tangent: Option<&mut CsrMatrix<S>>) {
        let slots = self.local_slots(e);
        for (r, &s) in slots.iter().enumerate() {
            if s != FIXED {
                residual[s] += out.residual[r];
            }
        }
        if let (Some(k), Some(ke)) = (tangent, out.tangent.as_ref()) {
            let mut cols: Vec<(usize, usize)> = slots.iter().enumerate().filter(|(_, &s)| s != FIXED).map(|(c, &s)| (s, c)).collect();
            cols.sort_unstable();
            for (r, &sr) in slots.iter().enumerate() {
                if sr == FIXED {
                    continue;
                }
                let row = &ke[r * ELEM_UNKNOWNS..(r + 1) * ELEM_UNKNOWNS];
                let (idx, vals) = k.row_mut(sr);
                let mut pos = 0;
                for &(sc, c) in &cols {
                    while idx[pos] < sc {
                        pos += 1;
                    }
                    debug_assert_eq!(idx[pos], sc, "pattern covers element coupling");
                    vals[pos] += row[c];
                }
            }
        }
    }

    fn element(&self, e: usize, u: &FieldCoeffs<S>, mode: &Mode<'_, S>, with_tangent: bool, symmetric: bool) -> ElementOutput<S> {
        let mut res = [S::zero(); ELEM_UNKNOWNS];
        let mut ke = with_tangent.then(|| vec![S::zero(); ELEM_UNKNOWNS * ELEM_UNKNOWNS]);
        let half = S::lit(0.5);
        let rho = self.energy.density();
        let c = self.energy.damping();
        let slots: [[(usize, usize); 12]; 3] = std::array::from_fn(component_slots);
        let mut mass_block = vec![S::zero(); if with_tangent { ELEM_DOFS * ELEM_DOFS } else { 0 }];
        for q in all_qps() {
            let (basis, w, _) = self.space.element_qp(e, q);
            let fp = field_at(&basis, u);
            let z_new = zeta_of(&fp, &self.f_base);
            let (stress, tan, inertia, mass) = match mode {
                Mode::Static => {
                    let g = self.energy.gradient(&z_new);
                    let t = with_tangent.then(|| self.energy.hessian(&z_new));
                    (g, t, [S::zero(); 3], S::zero())
                }
                Mode::Dynamic { u_nm1, u_n, dt, scheme } => {
                    let fm1 = field_at(&basis, u_nm1);
                    let f0 = field_at(&basis, u_n);
                    let z_m1 = zeta_of(&fm1, &self.f_base);
                    let z_0 = zeta_of(&f0, &self.f_base);
                    let minus = std::array::from_fn(|m| half * (z_0[m] + z_m1[m]));
                    let plus = std::array::from_fn(|m| half * (z_new[m] + z_0[m]));
                    let h = HalfStepStates::new(minus, plus);
                    let r = integrators::evaluate(&h, self.energy, scheme, with_tangent);
                    let (acc, vel) = integrators::kinematic_stencils(&fm1.u, &f0.u, &fp.u, *dt);
                    let inertia = std::array::from_fn(|i| rho * acc[i] + c * vel[i]);
                    let mass = rho / (*dt * *dt) + c / (S::lit(2.0) * *dt);
                    (r.stress, r.tangent, inertia, mass)
                }
            };

            let weights: [[S; NW]; ELEM_DOFS] = std::array::from_fn(|a| derivative_weights(&basis[a]));
            let sf = fold_stress(&stress, &slots);
            for a in 0..ELEM_DOFS {
                let n_a = basis[a].value;
                for i in 0..3 {
                    let mut v = n_a * inertia[i];
                    for (g, s) in weights[a].iter().zip(&sf[i]) {
                        v += *g * *s;
                    }
                    res[3 * a + i] += w * v;
                }
            }

            if let (Some(ke), Some(t)) = (ke.as_mut(), tan.as_ref()) {
                for a in 0..ELEM_DOFS {
                    let na = w * mass * basis[a].value;
                    for b in 0..ELEM_DOFS {
                        mass_block[a * ELEM_DOFS + b] += na * basis[b].value;
                    }
                }
                // tf[i][j][r][s]: w·T folded onto the weights of components i and j
                let mut tf = [[[[S::zero(); NW]; NW]; 3]; 3];
                for i in 0..3 {
                    for &(r, zm) in &slots[i] {
                        let tm = &t[zm];
                        for j in 0..3 {
                            let row = &mut tf[i][j][r];
                            for &(sx, zn) in &slots[j] {
                                row[sx] += w * tm[zn];
                            }
                        }
                    }
                }
                // y[b][j][i][r] = Σ_s tf[i][j][r][s] g_b[s]
                let mut y = vec![[[[S::zero(); NW]; 3]; 3]; ELEM_DOFS];
                for (yb, gb) in y.iter_mut().zip(&weights) {
                    for j in 0..3 {
                        for i in 0..3 {
                            for r in 0..NW {
                                let tr = &tf[i][j][r];
                                let mut acc = S::zero();
                                for s in 0..NW {
                                    acc += tr[s] * gb[s];
                                }
                                yb[j][i][r] = acc;
                            }
                        }
                    }
                }
                for a in 0..ELEM_DOFS {
                    let ga = &weights[a];
                    let b0 = if symmetric { a } else { 0 };
                    for i in 0..3 {
                        let row = (3 * a + i) * ELEM_UNKNOWNS;
                        for b in b0..ELEM_DOFS {
                            let yb = &y[b];
                            for j in 0..3 {
                                let yr = &yb[j][i];
                                let mut acc = S::zero();
                                for r in 0..NW {
                                    acc += ga[r] * yr[r];
                                }
                                ke[row + 3 * b + j] += acc;
                            }
                        }
                    }
                }
            }
        }
        if let Some(ke) = ke.as_mut() {
            for a in 0..ELEM_DOFS {
                for b in 0..ELEM_DOFS {
                    let m = mass_block[a * ELEM_DOFS + b];
                    for i in 0..3 {
                        ke[(3 * a + i) * ELEM_UNKNOWNS + 3 * b + i] += m;
                    }
                }
            }
        }
        if symmetric {
            if let Some(ke) = ke.as_mut() {
                for a in 0..ELEM_DOFS {
                    for b in 0..a {
                        for i in 0..3 {
                            for j in 0..3 {
                                ke[(3 * a + i) * ELEM_UNKNOWNS + 3 * b + j] = ke[(3 * b + j) * ELEM_UNKNOWNS + 3 * a + i];
                            }
                        }
                    }
                }
            }
        }
        ElementOutput { residual: res, tangent: ke }
    }
}
