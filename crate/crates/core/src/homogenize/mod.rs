//! Periodic cell problems under an imposed average deformation gradient
//! `F̄ = I + ηD`, and the effective strain, stress and energy of their
//! solutions.

#[cfg(test)]
mod tests;

use std::path::Path;

use crate::assembly::{identity3, integrate, newton_solve, zeta_of, Assembler, AssemblyError, ConstraintSet, Mode, NewtonConfig, SolveError};
use crate::io::{atomic_write_csv, fmt_float, IoError};
use crate::material::{f_index, gf_index, EnergyDensity};
use crate::scalar::Scalar;
use crate::spline::{interpolate, FieldCoeffs, KnotVector, SplineError, SplineSpace};

pub type Mat3<S> = [[S; 3]; 3];

#[derive(Debug, thiserror::Error)]
pub enum HomogenizeError {
    #[error("cell problems need a periodic space")]
    NotPeriodic,
    #[error("average deformation gradient is singular (det = {det:e})")]
    SingularLoading { det: f64 },
    #[error("invalid loading: {0}")]
    Invalid(String),
    #[error("eta = {eta}: {source}")]
    Solve {
        eta: f64,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Direction of the loading path used in the effective-response study.
pub fn reference_direction<S: Scalar>() -> Mat3<S> {
    [
        [0.040382, -0.004023, -0.004722],
        [-0.004023, -0.003081, 0.001542],
        [-0.004722, 0.001542, 0.001676],
    ]
    .map(|r| r.map(S::lit))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroLoading<S> {
    pub direction: Mat3<S>,
    /// Sorted load parameters at which results are recorded.
    pub eta_values: Vec<S>,
    /// Largest change of `η` between consecutive solves; larger gaps are
    /// bridged by unrecorded intermediate solves.
    pub max_increment: S,
}

impl<S: Scalar> MacroLoading<S> {
    pub fn new(direction: Mat3<S>, eta_values: Vec<S>) -> Self {
        Self {
            direction,
            eta_values,
            max_increment: S::lit(0.1),
        }
    }

    /// `n` evenly spaced values from `a` to `b`.
    pub fn evenly_spaced(direction: Mat3<S>, a: S, b: S, n: usize) -> Self {
        let values = match n {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * S::from_usize_lossy(k) / S::from_usize_lossy(n - 1)).collect(),
        };
        Self::new(direction, values)
    }

    pub fn validate(&self) -> Result<(), HomogenizeError> {
        if self.eta_values.iter().any(|e| !e.is_finite()) {
            return Err(HomogenizeError::Invalid("non-finite eta".into()));
        }
        if self.eta_values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(HomogenizeError::Invalid("eta values must be strictly increasing".into()));
        }
        if !(self.max_increment > S::zero()) {
            return Err(HomogenizeError::Invalid("max_increment must be positive".into()));
        }
        if self.direction.iter().flatten().any(|v| !v.is_finite()) {
            return Err(HomogenizeError::Invalid("non-finite direction".into()));
        }
        Ok(())
    }

    /// `I + ηD`.
    pub fn fbar(&self, eta: S) -> Mat3<S> {
        let mut f = identity3();
        for (fr, dr) in f.iter_mut().zip(&self.direction) {
            for (v, d) in fr.iter_mut().zip(dr) {
                *v += eta * *d;
            }
        }
        f
    }
}

/// `½(F̄ᵀF̄ − I)`.
pub fn effective_strain<S: Scalar>(fbar: &Mat3<S>) -> Mat3<S> {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let c = (0..3).fold(S::zero(), |a, k| a + fbar[k][i] * fbar[k][j]);
            S::lit(0.5) * (c - if i == j { S::one() } else { S::zero() })
        })
    })
}

fn inverse3<S: Scalar>(a: &Mat3<S>) -> Result<Mat3<S>, HomogenizeError> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let scale = a.iter().flatten().fold(S::zero(), |m, v| m.max(v.abs()));
    if !(det.abs() > S::lit(1e-14) * scale * scale * scale) {
        return Err(HomogenizeError::SingularLoading { det: det.to_f64_lossy() });
    }
    let mut inv = [[S::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
        }
    }
    Ok(inv)
}

fn mat_mul<S: Scalar>(a: &Mat3<S>, b: &Mat3<S>) -> Mat3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).fold(S::zero(), |acc, k| acc + a[i][k] * b[k][j])))
}

/// Newton solution of the static cell problem with `F = F̄ + ∇u`, `u`
/// periodic and control point 0 held at zero.
pub fn periodic_equilibrium<S: Scalar, E: EnergyDensity<S>>(
    space: &SplineSpace<S>,
    energy: &E,
    fbar: &Mat3<S>,
    u_start: &FieldCoeffs<S>,
    ncfg: &NewtonConfig<S>,
) -> Result<(FieldCoeffs<S>, usize), SolveError> {
    let asm = cell_assembler(space, energy, fbar).map_err(SolveError::Assembly)?;
    let mut u = u_start.clone();
    if u.len() != space.n_dofs() {
        return Err(SolveError::Assembly(AssemblyError::Dimension {
            expected: space.n_dofs(),
            got: u.len(),
        }));
    }
    // remove the rigid translation so the pinned point is at rest
    for comp in 0..3 {
        let shift = u[comp];
        for cp in 0..space.n_control_points() {
            u[3 * cp + comp] -= shift;
        }
    }
    let (u, report) = newton_solve(&(&asm, Mode::Static), u, ncfg)?;
    Ok((u, report.iterations))
}

fn cell_assembler<'a, S: Scalar, E: EnergyDensity<S>>(
    space: &'a SplineSpace<S>,
    energy: &'a E,
    fbar: &Mat3<S>,
) -> Result<Assembler<'a, S, E>, AssemblyError> {
    Ok(Assembler::new(space, energy, ConstraintSet::pin(0))?.with_base_gradient(*fbar))
}

/// Cell averages of a solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveStress<S> {
    /// Volume average of the first Piola-Kirchhoff stress.
    pub p_bar: Mat3<S>,
    /// `F̄⁻¹P̄`.
    pub s_bar: Mat3<S>,
    /// Volume average of the higher-order stress, `b_bar[i][J][K]`.
    pub b_bar: [Mat3<S>; 3],
    /// Volume average of the energy density.
    pub psi_bar: S,
}

pub fn effective_stress<S: Scalar, E: EnergyDensity<S>>(
    space: &SplineSpace<S>,
    energy: &E,
    u: &FieldCoeffs<S>,
    fbar: &Mat3<S>,
) -> Result<EffectiveStress<S>, HomogenizeError> {
    u.check(space)?;
    let inv = inverse3(fbar)?;
    let volume = integrate(space, &[], |_, _| S::one());
    let avg = |m: usize| integrate(space, &[u], |p, _| energy.gradient(&zeta_of(&p[0], fbar))[m]) / volume;
    let p_bar: Mat3<S> = std::array::from_fn(|i| std::array::from_fn(|j| avg(f_index(i, j))));
    let b_bar = std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| avg(gf_index(i, j, k)))));
    let psi_bar = integrate(space, &[u], |p, _| energy.psi(&zeta_of(&p[0], fbar))) / volume;
    Ok(EffectiveStress {
        p_bar,
        s_bar: mat_mul(&inv, &p_bar),
        b_bar,
        psi_bar,
    })
}

/// The same periodic field on the clamped space with the same breakpoints.
pub fn to_open_space<S: Scalar>(space: &SplineSpace<S>, u: &FieldCoeffs<S>) -> Result<(SplineSpace<S>, FieldCoeffs<S>), SplineError> {
    let axes: Vec<KnotVector<S>> = space
        .axes()
        .iter()
        .map(|kv| KnotVector::from_breakpoints(kv.breakpoints().to_vec(), false))
        .collect::<Result<_, _>>()?;
    let open = SplineSpace::new([axes[0].clone(), axes[1].clone(), axes[2].clone()]);
    u.check(space)?;
    let v = interpolate(&open, |x| space.interpolate_field(u, x).expect("Greville points lie in the domain").u)?;
    Ok((open, v))
}

/// Average first Piola-Kirchhoff stress from boundary reactions.
///
/// The periodic solution is represented on the clamped space with the same
/// breakpoints, where the affine fields `X_J e_i` are available. The internal
/// force vector of that representation is tested against `X_J e_i`, keeping
/// only control points whose support touches the boundary. Interior forces
/// vanish at equilibrium, so this agrees with the volume average exactly when
/// the cell is equilibrated.
pub fn traction_average<S: Scalar, E: EnergyDensity<S>>(
    space: &SplineSpace<S>,
    energy: &E,
    u: &FieldCoeffs<S>,
    fbar: &Mat3<S>,
) -> Result<Mat3<S>, HomogenizeError> {
    if !space.is_periodic() {
        return Err(HomogenizeError::NotPeriodic);
    }
    u.check(space)?;
    let (open, v) = to_open_space(space, u)?;
    let asm = Assembler::new(&open, energy, ConstraintSet::new())?.with_base_gradient(*fbar);
    let forces = asm.assemble(&v, &Mode::Static, false)?.residual;
    let dims = open.dofs_per_axis();
    let greville: [Vec<S>; 3] = std::array::from_fn(|a| open.axes()[a].greville());
    let volume = integrate(space, &[], |_, _| S::one());
    let mut p = [[S::zero(); 3]; 3];
    for cp in 0..open.n_control_points() {
        let idx = open.cp_multi_index(cp);
        let on_boundary = (0..3).any(|a| idx[a] <= 1 || idx[a] + 2 >= dims[a]);
        if !on_boundary {
            continue;
        }
        for (i, row) in p.iter_mut().enumerate() {
            let f = forces[asm.free_index(3 * cp + i).expect("all unknowns free")];
            for (j, v) in row.iter_mut().enumerate() {
                *v += f * greville[j][idx[j]];
            }
        }
    }
    Ok(p.map(|r| r.map(|x| x / volume)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveRecord<S> {
    pub eta: S,
    pub fbar: Mat3<S>,
    pub e_bar: Mat3<S>,
    pub s_bar: Mat3<S>,
    pub p_bar: Mat3<S>,
    pub p_bar_traction: Mat3<S>,
    pub b_bar: [Mat3<S>; 3],
    pub psi_bar: S,
    /// Newton iterations of the recorded solve.
    pub newton_iters: usize,
}

impl<S: Scalar> EffectiveRecord<S> {
    /// `‖S̄ − S̄ᵀ‖ / max(1, ‖S̄‖)` in the max norm.
    pub fn stress_asymmetry(&self) -> S {
        let s = &self.s_bar;
        let mut asym = S::zero();
        let mut size = S::one();
        for i in 0..3 {
            for j in 0..3 {
                asym = asym.max((s[i][j] - s[j][i]).abs());
                size = size.max(s[i][j].abs());
            }
        }
        asym / size
    }

    /// Largest difference of the volume and traction averages relative to
    /// `max(1, |P̄|)`.
    pub fn traction_mismatch(&self) -> S {
        let mut diff = S::zero();
        let mut size = S::one();
        for i in 0..3 {
            for j in 0..3 {
                diff = diff.max((self.p_bar[i][j] - self.p_bar_traction[i][j]).abs());
                size = size.max(self.p_bar[i][j].abs());
            }
        }
        diff / size
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EffectiveResponse<S> {
    pub records: Vec<EffectiveRecord<S>>,
    /// Solution at each record.
    pub solutions: Vec<FieldCoeffs<S>>,
}

#[derive(Debug)]
pub struct SweepFailure<S> {
    pub error: HomogenizeError,
    pub partial: EffectiveResponse<S>,
}

impl<S> std::fmt::Display for SweepFailure<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl<S: std::fmt::Debug> std::error::Error for SweepFailure<S> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Solve every load parameter by continuation from `seed`, an equilibrium
/// guess at `seed_eta`.
///
/// The sweep walks upward from the value nearest `seed_eta`, then downward
/// from it, warm-starting each solve from its neighbour. Records come back
/// sorted by `η`. On failure the records solved so far are kept.
pub fn continuation_sweep<S: Scalar, E: EnergyDensity<S>>(
    space: &SplineSpace<S>,
    energy: &E,
    loading: &MacroLoading<S>,
    seed: &FieldCoeffs<S>,
    seed_eta: S,
    ncfg: &NewtonConfig<S>,
) -> Result<EffectiveResponse<S>, SweepFailure<S>> {
    let mut done: Vec<(EffectiveRecord<S>, FieldCoeffs<S>)> = Vec::new();
    let finish = |mut done: Vec<(EffectiveRecord<S>, FieldCoeffs<S>)>| {
        done.sort_by(|a, b| a.0.eta.partial_cmp(&b.0.eta).unwrap_or(std::cmp::Ordering::Equal));
        let (records, solutions) = done.into_iter().unzip();
        EffectiveResponse { records, solutions }
    };
    let pre = if !space.is_periodic() {
        Err(HomogenizeError::NotPeriodic)
    } else {
        loading.validate()
    };
    if let Err(error) = pre {
        return Err(SweepFailure { error, partial: finish(done) });
    }
    let etas = &loading.eta_values;
    if etas.is_empty() {
        return Ok(finish(done));
    }
    let start = (0..etas.len())
        .min_by(|&a, &b| {
            let (da, db) = ((etas[a] - seed_eta).abs(), (etas[b] - seed_eta).abs());
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("non-empty");
    let up: Vec<usize> = (start..etas.len()).collect();
    let down: Vec<usize> = (0..start).rev().collect();
    for path in [up, down] {
        let mut u = seed.clone();
        let mut eta = seed_eta;
        for k in path {
            match solve_to(space, energy, loading, &u, eta, etas[k], ncfg) {
                Ok((sol, rec)) => {
                    u = sol.clone();
                    eta = etas[k];
                    done.push((rec, sol));
                }
                Err(error) => return Err(SweepFailure { error, partial: finish(done) }),
            }
        }
    }
    Ok(finish(done))
}

/// Continue from `(u, from)` to `to` in steps no larger than the increment.
fn solve_to<S: Scalar, E: EnergyDensity<S>>(
    space: &SplineSpace<S>,
    energy: &E,
    loading: &MacroLoading<S>,
    u: &FieldCoeffs<S>,
    from: S,
    to: S,
    ncfg: &NewtonConfig<S>,
) -> Result<(FieldCoeffs<S>, EffectiveRecord<S>), HomogenizeError> {
    let gap = (to - from).abs();
    let n_sub = (gap / loading.max_increment).ceil().to_f64_lossy().max(1.0) as usize;
    let mut u = u.clone();
    let mut iters = 0;
    for s in 1..=n_sub {
        let eta = if s == n_sub {
            to
        } else {
            from + (to - from) * S::from_usize_lossy(s) / S::from_usize_lossy(n_sub)
        };
        let fbar = loading.fbar(eta);
        let (sol, it) = periodic_equilibrium(space, energy, &fbar, &u, ncfg).map_err(|source| HomogenizeError::Solve {
            eta: eta.to_f64_lossy(),
            source,
        })?;
        u = sol;
        iters = it;
    }
    let fbar = loading.fbar(to);
    let eff = effective_stress(space, energy, &u, &fbar)?;
    let p_bar_traction = traction_average(space, energy, &u, &fbar)?;
    let rec = EffectiveRecord {
        eta: to,
        fbar,
        e_bar: effective_strain(&fbar),
        s_bar: eff.s_bar,
        p_bar: eff.p_bar,
        p_bar_traction,
        b_bar: eff.b_bar,
        psi_bar: eff.psi_bar,
        newton_iters: iters,
    };
    Ok((u, rec))
}

/// One row per record: `eta`, `Ē` and `S̄` in Voigt order, `Psi_bar`, and the
/// Newton iterations.
pub fn write_sweep_csv<S: Scalar>(path: &Path, response: &EffectiveResponse<S>) -> Result<(), IoError> {
    const VOIGT: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
    let header = [
        "eta", "E11", "E22", "E33", "E23", "E13", "E12", "S11", "S22", "S33", "S23", "S13", "S12", "Psi_bar", "newton_iters",
    ];
    atomic_write_csv(
        path,
        &header,
        response.records.iter().map(|r| {
            let mut row = vec![fmt_float(r.eta)];
            row.extend(VOIGT.iter().map(|&(i, j)| fmt_float(r.e_bar[i][j])));
            row.extend(VOIGT.iter().map(|&(i, j)| fmt_float(r.s_bar[i][j])));
            row.push(fmt_float(r.psi_bar));
            row.push(r.newton_iters.to_string());
            row
        }),
    )
}

/// Carry a field onto a periodic space by interpolation at its Greville
/// points, e.g. to seed a cell problem with a relaxed microstructure.
pub fn map_to_space<S: Scalar>(from: &SplineSpace<S>, u: &FieldCoeffs<S>, to: &SplineSpace<S>) -> Result<FieldCoeffs<S>, SplineError> {
    u.check(from)?;
    interpolate(to, |x| from.interpolate_field(u, x).expect("Greville points lie in the domain").u)
}

/// A few long-wave sinusoids, periodic on the unit cube, with displacement
/// gradients of order `amplitude` and control point 0 at rest. Damped
/// dynamics from this state on a periodic space relaxes into a twinned
/// microstructure for the three-well energy.
pub fn long_wave_perturbation<S: Scalar>(space: &SplineSpace<S>, amplitude: S) -> Result<FieldCoeffs<S>, SplineError> {
    let tp = S::lit(2.0 * std::f64::consts::PI);
    let a = amplitude / tp;
    let mut u = interpolate(space, |x| {
        [
            a * ((tp * x[0]).sin() + S::lit(0.3) * (tp * x[1] + S::one()).sin()),
            -a * ((tp * x[1]).sin() + S::lit(0.2) * (tp * x[2] + S::lit(2.0)).sin()),
            S::lit(0.5) * a * (tp * x[2] + S::lit(0.5)).sin(),
        ]
    })?;
    for comp in 0..3 {
        let shift = u[comp];
        for cp in 0..space.n_control_points() {
            u[3 * cp + comp] -= shift;
        }
    }
    Ok(u)
}
