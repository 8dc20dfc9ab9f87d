use std::path::Path;

use crate::io::{atomic_write_csv, fmt_float, IoError};
use crate::linear::{linear_solve, LinearError, LinearSolverKind};
use crate::scalar::Scalar;
use crate::spline::FieldCoeffs;

use super::{AssembledSystem, Assembler, AssemblyError, Mode};
use crate::material::EnergyDensity;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig<S> {
    /// Bound on the Euclidean norm of the residual over free unknowns.
    pub residual_tol: S,
    pub max_iters: usize,
    pub linear: LinearSolverKind,
}

impl<S: Scalar> Default for NewtonConfig<S> {
    fn default() -> Self {
        Self {
            residual_tol: S::lit(1e-10),
            max_iters: 25,
            linear: LinearSolverKind::Direct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport<S> {
    /// Number of linear solves performed.
    pub iterations: usize,
    /// Residual norm before each iteration and after the last.
    pub residual_norms: Vec<S>,
}

/// A residual over free unknowns of a coefficient field.
pub trait NonlinearSystem<S: Scalar> {
    fn evaluate(&self, u: &FieldCoeffs<S>, with_tangent: bool) -> Result<AssembledSystem<S>, AssemblyError>;

    /// `u[free] += du`.
    fn update(&self, u: &mut FieldCoeffs<S>, du: &[S]);
}

impl<S: Scalar, E: EnergyDensity<S>> NonlinearSystem<S> for (&Assembler<'_, S, E>, Mode<'_, S>) {
    fn evaluate(&self, u: &FieldCoeffs<S>, with_tangent: bool) -> Result<AssembledSystem<S>, AssemblyError> {
        self.0.assemble(u, &self.1, with_tangent)
    }

    fn update(&self, u: &mut FieldCoeffs<S>, du: &[S]) {
        self.0.add_free(u, du, S::one());
    }
}

/// Newton iteration from `u` until the residual norm drops to the tolerance.
pub fn newton_solve<S: Scalar>(
    system: &impl NonlinearSystem<S>,
    mut u: FieldCoeffs<S>,
    cfg: &NewtonConfig<S>,
) -> Result<(FieldCoeffs<S>, NewtonReport<S>), SolveError> {
    let mut report = NewtonReport::default();
    let mut norm = system.evaluate(&u, false)?.residual_norm();
    report.residual_norms.push(norm);
    loop {
        if !norm.is_finite() || (norm > cfg.residual_tol && report.iterations >= cfg.max_iters) {
            return Err(SolveError::NonConvergence {
                iterations: report.iterations,
                residual: norm.to_f64_lossy(),
            });
        }
        if norm <= cfg.residual_tol {
            return Ok((u, report));
        }
        let sys = system.evaluate(&u, true)?;
        let k = sys.tangent.as_ref().expect("tangent requested");
        let rhs: Vec<S> = sys.residual.iter().map(|r| -*r).collect();
        let du = linear_solve(k, &rhs, sys.symmetric, cfg.linear)?;
        system.update(&mut u, &du);
        report.iterations += 1;
        norm = system.evaluate(&u, false)?.residual_norm();
        report.residual_norms.push(norm);
    }
}

/// Residual history as `step,iter,residual_norm`.
pub fn write_residual_csv(path: &Path, rows: &[(usize, usize, f64)]) -> Result<(), IoError> {
    atomic_write_csv(
        path,
        &["step", "iter", "residual_norm"],
        rows.iter().map(|(s, i, r)| vec![s.to_string(), i.to_string(), fmt_float(*r)]),
    )
}
