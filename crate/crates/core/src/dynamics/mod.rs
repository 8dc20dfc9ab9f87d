//! Time stepping: initial states, the per-step solve with its energy ledger,
//! and the relaxation driver that coarsens the step and stops at steady
//! state.
//!
//! States are carried as pairs `(uⁿ⁻¹, uⁿ)`. The time attached to a pair is
//! the half point `(tⁿ⁻¹ + tⁿ)/2`, and the initial pair sits at `t = 0`.

mod convergence;
mod restart;


pub use convergence::{
    l2_distance, least_squares_slope, temporal_convergence_study, write_convergence_csv, ConvergenceRow, ConvergenceTable,
};
pub use restart::{read_restart, write_restart, RESTART_MAGIC};

use std::path::Path;

use crate::assembly::{integrate, newton_solve, zeta_of, Assembler, AssemblyError, ConstraintSet, Mode, NewtonConfig, SolveError};
use crate::integrators::{SchemeConfig, SchemeError};
use crate::io::{atomic_write_csv, fmt_float, IoError};
use crate::material::{classify_phase, e2_e3, EnergyDensity, MaterialParams};
use crate::scalar::Scalar;
use crate::spline::{
    interpolate, knot_insert, make_uniform_space, sample_lattice, write_field_csv, FieldCoeffs, FieldSample, SplineError, SplineSpace,
};

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("invalid run setting {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: SolveError,
    },
    #[error("step {step}: energy balance defect {defect:e} exceeds {tol:e}")]
    Balance { step: usize, defect: f64, tol: f64 },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Io(#[from] IoError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> DynamicsError {
    DynamicsError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialCondition<S> {
    pub u0: FieldCoeffs<S>,
    pub v0: FieldCoeffs<S>,
}

/// Elements per axis of the space carrying the standard bump.
pub const BUMP_MESH: usize = 16;
/// Control point of the standard bump on its own space.
pub const BUMP_INDEX: [usize; 3] = [9, 2, 1];
pub const BUMP_AMPLITUDE: f64 = 1e-3;

impl<S: Scalar> InitialCondition<S> {
    pub fn at_rest(u0: FieldCoeffs<S>) -> Self {
        let v0 = FieldCoeffs::zeros_dims(u0.dims());
        Self { u0, v0 }
    }

    /// A single quadratic B-spline bump in `u₁` of amplitude `1e-3`, defined
    /// on a `16³` open space near `(1/2, 0, 0)` and carried over to `space`,
    /// at rest. Nested spaces receive it exactly by knot insertion, others
    /// by interpolation at their Greville points. Boundary control points
    /// are zeroed afterwards.
    pub fn standard_bump(space: &SplineSpace<S>) -> Result<Self, DynamicsError> {
        if space.is_periodic() {
            return Err(invalid("space", "the bump is defined on the clamped cube"));
        }
        let coarse = make_uniform_space::<S>(BUMP_MESH, false)?;
        let mut c = FieldCoeffs::zeros(&coarse);
        c[3 * coarse.cp_index(BUMP_INDEX)] = S::lit(BUMP_AMPLITUDE);
        let nested = space.elements_per_axis().iter().all(|n| n % BUMP_MESH == 0);
        let mut u0 = if nested {
            knot_insert(&coarse, &c, space)?
        } else {
            interpolate(space, |x| coarse.interpolate_field(&c, x).map(|p| p.u).unwrap_or([S::zero(); 3]))?
        };
        ConstraintSet::boundary_layer(space).apply(&mut u0);
        Ok(Self::at_rest(u0))
    }
}

/// Two consecutive states, the step between them, and the half-point time.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePair<S> {
    pub prev: FieldCoeffs<S>,
    pub curr: FieldCoeffs<S>,
    pub dt: S,
    /// Steps taken since the initial pair.
    pub step: usize,
    pub t_half: S,
}

impl<S: Scalar> StatePair<S> {
    /// `(uⁿ + uⁿ⁻¹)/2`.
    pub fn midpoint(&self) -> FieldCoeffs<S> {
        self.curr.lincomb(S::lit(0.5), &self.prev, S::lit(0.5))
    }

    /// `(uⁿ − uⁿ⁻¹)/Δt`.
    pub fn velocity(&self) -> FieldCoeffs<S> {
        let inv = S::one() / self.dt;
        self.curr.lincomb(inv, &self.prev, -inv)
    }

    /// The pair with step `dt` sharing this pair's midpoint and velocity.
    pub fn with_step(&self, dt: S) -> Self {
        let ic = InitialCondition {
            u0: self.midpoint(),
            v0: self.velocity(),
        };
        let mut out = init_states(&ic, dt);
        out.step = self.step;
        out.t_half = self.t_half;
        out
    }
}

/// `u¹ = u₀ + (Δt/2)v₀`, `u⁰ = u₀ − (Δt/2)v₀`, so the pair's midpoint is
/// `u₀` and its difference quotient `v₀`.
pub fn init_states<S: Scalar>(ic: &InitialCondition<S>, dt: S) -> StatePair<S> {
    let h = S::lit(0.5) * dt;
    StatePair {
        prev: ic.u0.lincomb(S::one(), &ic.v0, -h),
        curr: ic.u0.lincomb(S::one(), &ic.v0, h),
        dt,
        step: 0,
        t_half: S::zero(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRecord<S> {
    pub step: usize,
    pub t_half: S,
    pub dt: S,
    pub kinetic: S,
    pub internal: S,
    pub total: S,
    /// `−Δt ∫ c |{u̇}|² dV` over the step.
    pub dissipation: S,
    pub newton_iters: usize,
    /// `|(Π⁺ − Π⁻)/Δt + ∫ c |{u̇}|² dV|`.
    pub balance_defect: S,
    pub balance_tol: S,
}

/// Energy of the initial pair followed by one record per step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyLedger<S> {
    pub initial: Option<HalfPointEnergy<S>>,
    pub records: Vec<EnergyRecord<S>>,
}

impl<S: Scalar> EnergyLedger<S> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Totals, starting with the initial pair.
    pub fn totals(&self) -> Vec<S> {
        self.initial.iter().map(|e| e.total()).chain(self.records.iter().map(|r| r.total)).collect()
    }

    /// `Π(last) − Π(initial)`.
    pub fn drift(&self) -> S {
        let t = self.totals();
        match (t.first(), t.last()) {
            (Some(a), Some(b)) => *b - *a,
            _ => S::zero(),
        }
    }

    /// Whether no total exceeds its predecessor by more than `tol`.
    pub fn is_non_increasing(&self, tol: S) -> bool {
        self.totals().windows(2).all(|w| w[1] <= w[0] + tol)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), IoError> {
        atomic_write_csv(
            path,
            &["step", "t_half", "kinetic", "internal", "total", "dissipation", "newton_iters"],
            self.records.iter().map(|r| {
                vec![
                    r.step.to_string(),
                    fmt_float(r.t_half),
                    fmt_float(r.kinetic),
                    fmt_float(r.internal),
                    fmt_float(r.total),
                    fmt_float(r.dissipation),
                    r.newton_iters.to_string(),
                ]
            }),
        )
    }
}

/// Kinetic and internal energy of a pair at its half point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPointEnergy<S> {
    pub kinetic: S,
    pub internal: S,
}

impl<S: Scalar> HalfPointEnergy<S> {
    pub fn total(&self) -> S {
        self.kinetic + self.internal
    }
}

/// `∫ ½ρ|(uⁿ − uⁿ⁻¹)/Δt|² dV` and `∫ Ψ(ζ((uⁿ + uⁿ⁻¹)/2)) dV`.
pub fn half_point_energy<S: Scalar, E: EnergyDensity<S>>(asm: &Assembler<'_, S, E>, pair: &StatePair<S>) -> HalfPointEnergy<S> {
    let energy = asm.energy();
    let f_base = *asm.base_gradient();
    let rho = energy.density();
    let half = S::lit(0.5);
    let v = pair.velocity();
    let mid = pair.midpoint();
    let kinetic = integrate(asm.space(), &[&v], |p, _| half * rho * dot3(&p[0].u, &p[0].u));
    let internal = integrate(asm.space(), &[&mid], |p, _| energy.psi(&zeta_of(&p[0], &f_base)));
    HalfPointEnergy { kinetic, internal }
}

/// `−Δt ∫ c |(uⁿ⁺¹ − uⁿ⁻¹)/(2Δt)|² dV`.
pub fn step_dissipation<S: Scalar, E: EnergyDensity<S>>(
    asm: &Assembler<'_, S, E>,
    u_nm1: &FieldCoeffs<S>,
    u_np1: &FieldCoeffs<S>,
    dt: S,
) -> S {
    let c = asm.energy().damping();
    if c == S::zero() {
        return S::zero();
    }
    let inv = S::one() / (S::lit(2.0) * dt);
    let vel = u_np1.lincomb(inv, u_nm1, -inv);
    -dt * integrate(asm.space(), &[&vel], |p, _| c * dot3(&p[0].u, &p[0].u))
}

fn dot3<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `10 · residual_tol · √n_free · max(1, |Π|)`.
pub fn balance_tolerance<S: Scalar>(residual_tol: S, n_free: usize, pi: S) -> S {
    S::lit(10.0) * residual_tol * S::from_usize_lossy(n_free).sqrt() * pi.abs().max(S::one())
}

/// Outcome of one step.
#[derive(Clone, Debug)]
pub struct StepResult<S> {
    pub states: StatePair<S>,
    pub record: EnergyRecord<S>,
    pub residual_norms: Vec<S>,
    /// Half-point energy of the new pair, to chain into the next step.
    pub energy: HalfPointEnergy<S>,
}

/// Advance `(uⁿ⁻¹, uⁿ)` to `(uⁿ, uⁿ⁺¹)` and account for the energy change.
///
/// `before` is the half-point energy of `states` if already known. The
/// balance is enforced for schemes that satisfy the energy identity exactly,
/// and only recorded for the others.
pub fn step<S: Scalar, E: EnergyDensity<S>>(
    asm: &Assembler<'_, S, E>,
    states: &StatePair<S>,
    scheme: &SchemeConfig<S>,
    newton: &NewtonConfig<S>,
    before: Option<HalfPointEnergy<S>>,
) -> Result<StepResult<S>, DynamicsError> {
    let n = states.step + 1;
    let dt = states.dt;
    let mode = Mode::Dynamic {
        u_nm1: &states.prev,
        u_n: &states.curr,
        dt,
        scheme: *scheme,
    };
    let (u_new, report) = newton_solve(&(asm, mode), states.curr.clone(), newton).map_err(|source| DynamicsError::Step { step: n, source })?;
    let before = before.unwrap_or_else(|| half_point_energy(asm, states));
    let dissipation = step_dissipation(asm, &states.prev, &u_new, dt);
    let next = StatePair {
        prev: states.curr.clone(),
        curr: u_new,
        dt,
        step: n,
        t_half: states.t_half + dt,
    };
    let after = half_point_energy(asm, &next);
    let defect = ((after.total() - before.total()) - dissipation).abs() / dt;
    let tol = balance_tolerance(newton.residual_tol, asm.n_free(), after.total().abs().max(before.total().abs()));
    if scheme.is_conservative() && !(defect <= tol) {
        return Err(DynamicsError::Balance {
            step: n,
            defect: defect.to_f64_lossy(),
            tol: tol.to_f64_lossy(),
        });
    }
    let record = EnergyRecord {
        step: n,
        t_half: next.t_half,
        dt,
        kinetic: after.kinetic,
        internal: after.internal,
        total: after.total(),
        dissipation,
        newton_iters: report.iterations,
        balance_defect: defect,
        balance_tol: tol,
    };
    Ok(StepResult {
        states: next,
        record,
        residual_norms: report.residual_norms,
        energy: after,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig<S> {
    pub dt: S,
    /// Step used once the per-step dissipation has dropped below the threshold.
    pub dt_coarse: S,
    pub dissipation_switch_threshold: S,
    pub t_end: S,
    pub scheme: SchemeConfig<S>,
    pub newton: NewtonConfig<S>,
    /// Half-point times at which the midpoint field is kept.
    pub snapshot_times: Vec<S>,
    pub allow_dt_switch: bool,
    pub stop_at_steady_state: bool,
    /// Consecutive low-dissipation steps before a steady state is considered.
    pub steady_steps: usize,
    /// Bound on the static residual norm for a steady state to be accepted.
    pub steady_residual_tol: S,
}

impl<S: Scalar> RunConfig<S> {
    pub fn new(dt: S, t_end: S, scheme: SchemeConfig<S>) -> Self {
        Self {
            dt,
            dt_coarse: S::lit(2e-2),
            dissipation_switch_threshold: S::lit(1e-6),
            t_end,
            scheme,
            newton: NewtonConfig::default(),
            snapshot_times: [0.04, 0.07, 0.10, 0.25].into_iter().map(S::lit).collect(),
            allow_dt_switch: true,
            stop_at_steady_state: true,
            steady_steps: 5,
            steady_residual_tol: S::lit(1e-6),
        }
    }

    /// Fixed step, no snapshots, no early stop.
    pub fn fixed(dt: S, t_end: S, scheme: SchemeConfig<S>) -> Self {
        Self {
            snapshot_times: Vec::new(),
            allow_dt_switch: false,
            stop_at_steady_state: false,
            ..Self::new(dt, t_end, scheme)
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = |field, v: S| {
            if v > S::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("{v} must be positive")))
            }
        };
        positive("dt", self.dt)?;
        positive("dt_coarse", self.dt_coarse)?;
        positive("dissipation_switch_threshold", self.dissipation_switch_threshold)?;
        positive("steady_residual_tol", self.steady_residual_tol)?;
        positive("newton.residual_tol", self.newton.residual_tol)?;
        if self.dt_coarse < self.dt {
            return Err(invalid("dt_coarse", format!("{} is smaller than dt = {}", self.dt_coarse, self.dt)));
        }
        if !(self.t_end >= S::zero()) || !self.t_end.is_finite() {
            return Err(invalid("t_end", format!("{} must be non-negative", self.t_end)));
        }
        if self.steady_steps == 0 {
            return Err(invalid("steady_steps", "must be at least 1"));
        }
        self.scheme.validate()?;
        Ok(())
    }
}

/// Midpoint field kept at a requested time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<S> {
    pub requested: S,
    pub t_half: S,
    pub u: FieldCoeffs<S>,
}

/// Lattice samples of a snapshot with `e2`, `e3` and the phase label.
pub fn write_snapshot_csv<S: Scalar>(
    path: &Path,
    space: &SplineSpace<S>,
    u: &FieldCoeffs<S>,
    params: &MaterialParams<S>,
    lattice: usize,
) -> Result<(), DynamicsError> {
    let samples = sample_lattice(space, u, lattice)?;
    write_field_csv(path, &samples, &["e2", "e3", "phase"], |s: &FieldSample<S>| {
        let f: [[S; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| s.field.grad[i][j] + if i == j { S::one() } else { S::zero() }));
        let (e2, e3) = e2_e3(&f);
        vec![fmt_float(e2), fmt_float(e3), classify_phase(e2, e3, params).label().to_string()]
    })?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RunOutput<S> {
    pub states: StatePair<S>,
    pub ledger: EnergyLedger<S>,
    pub snapshots: Vec<Snapshot<S>>,
    /// `(step, iteration, residual norm)` for every Newton iterate.
    pub residual_history: Vec<(usize, usize, f64)>,
    /// Step after which `dt_coarse` was used.
    pub switched_at: Option<usize>,
    pub steady_state: bool,
}

/// A failed run with everything computed before the failure.
#[derive(Debug)]
pub struct RunFailure<S> {
    pub error: DynamicsError,
    pub partial: Box<RunOutput<S>>,
}

impl<S> std::fmt::Display for RunFailure<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl<S: std::fmt::Debug> std::error::Error for RunFailure<S> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub fn run<S: Scalar, E: EnergyDensity<S>>(
    asm: &Assembler<'_, S, E>,
    ic: &InitialCondition<S>,
    cfg: &RunConfig<S>,
) -> Result<RunOutput<S>, RunFailure<S>> {
    run_from(asm, init_states(ic, cfg.dt), cfg)
}

/// Step from `states` until `t_end` or a steady state.
///
/// The step switches to `dt_coarse` the first time the per-step dissipation
/// falls below the threshold after having exceeded it. A steady state needs
/// `steady_steps` consecutive steps below the threshold and a static residual
/// at the midpoint within `steady_residual_tol`.
pub fn run_from<S: Scalar, E: EnergyDensity<S>>(
    asm: &Assembler<'_, S, E>,
    states: StatePair<S>,
    cfg: &RunConfig<S>,
) -> Result<RunOutput<S>, RunFailure<S>> {
    let mut out = RunOutput {
        states,
        ledger: EnergyLedger::default(),
        snapshots: Vec::new(),
        residual_history: Vec::new(),
        switched_at: None,
        steady_state: false,
    };
    let fail = |error: DynamicsError, out: RunOutput<S>| RunFailure {
        error,
        partial: Box::new(out),
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, out));
    }
    if out.states.prev.len() != asm.space().n_dofs() || out.states.curr.len() != asm.space().n_dofs() {
        let e = AssemblyError::Dimension {
            expected: asm.space().n_dofs(),
            got: out.states.curr.len(),
        };
        return Err(fail(e.into(), out));
    }
    let mut snapshot_times: Vec<S> = cfg.snapshot_times.clone();
    snapshot_times.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut next_snapshot = 0;
    let mut energy = half_point_energy(asm, &out.states);
    out.ledger.initial = Some(energy);
    let mut armed = false;
    let mut quiet = 0usize;

    loop {
        let slack = S::lit(1e-9) * out.states.dt;
        while next_snapshot < snapshot_times.len() && snapshot_times[next_snapshot] <= out.states.t_half + slack {
            out.snapshots.push(Snapshot {
                requested: snapshot_times[next_snapshot],
                t_half: out.states.t_half,
                u: out.states.midpoint(),
            });
            next_snapshot += 1;
        }
        if out.states.t_half + out.states.dt > cfg.t_end + slack {
            break;
        }
        let res = match step(asm, &out.states, &cfg.scheme, &cfg.newton, Some(energy)) {
            Ok(r) => r,
            Err(e) => return Err(fail(e, out)),
        };
        for (i, r) in res.residual_norms.iter().enumerate() {
            out.residual_history.push((res.record.step, i, r.to_f64_lossy()));
        }
        let dissipated = res.record.dissipation.abs();
        out.ledger.records.push(res.record);
        out.states = res.states;
        energy = res.energy;

        if dissipated >= cfg.dissipation_switch_threshold {
            armed = true;
            quiet = 0;
            continue;
        }
        if !armed {
            continue;
        }
        quiet += 1;
        if cfg.allow_dt_switch && out.switched_at.is_none() && cfg.dt_coarse > out.states.dt {
            out.states = out.states.with_step(cfg.dt_coarse);
            out.switched_at = Some(out.states.step);
            energy = half_point_energy(asm, &out.states);
        }
        if cfg.stop_at_steady_state && quiet >= cfg.steady_steps {
            match static_residual(asm, &out.states.midpoint()) {
                Ok(r) if r <= cfg.steady_residual_tol => {
                    out.steady_state = true;
                    break;
                }
                Ok(_) => {}
                Err(e) => return Err(fail(e.into(), out)),
            }
        }
    }
    Ok(out)
}

/// Residual norm of the equilibrium problem with inertia and damping dropped.
pub fn static_residual<S: Scalar, E: EnergyDensity<S>>(asm: &Assembler<'_, S, E>, u: &FieldCoeffs<S>) -> Result<S, AssemblyError> {
    Ok(asm.assemble(u, &Mode::Static, false)?.residual_norm())
}
