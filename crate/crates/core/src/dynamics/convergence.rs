use std::path::Path;

use crate::assembly::{integrate, Assembler};
use crate::io::{atomic_write_csv, fmt_float, IoError};
use crate::material::EnergyDensity;
use crate::scalar::Scalar;
use crate::spline::{FieldCoeffs, SplineSpace};

use super::{invalid, run, DynamicsError, InitialCondition, RunConfig};

/// `(∫ |a − b|² dV)^{1/2}` with the assembly quadrature.
pub fn l2_distance<S: Scalar>(space: &SplineSpace<S>, a: &FieldCoeffs<S>, b: &FieldCoeffs<S>) -> S {
    let d = a.lincomb(S::one(), b, -S::one());
    integrate(space, &[&d], |p, _| p[0].u.iter().fold(S::zero(), |acc, v| acc + *v * *v)).sqrt()
}

/// Least-squares slope of `log y` against `log x`, if at least two points
/// are usable.
pub fn least_squares_slope<S: Scalar>(points: &[(S, S)]) -> Option<S> {
    let logs: Vec<(S, S)> = points
        .iter()
        .filter(|(x, y)| *x > S::zero() && *y > S::zero() && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = S::from_usize_lossy(logs.len());
    let mx = logs.iter().fold(S::zero(), |a, p| a + p.0) / n;
    let my = logs.iter().fold(S::zero(), |a, p| a + p.1) / n;
    let sxy = logs.iter().fold(S::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
    let sxx = logs.iter().fold(S::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
    (sxx > S::zero()).then(|| sxy / sxx)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow<S> {
    pub dt: S,
    /// `None` if the run did not finish.
    pub l2_error: Option<S>,
    pub failure: Option<String>,
    pub newton_iters: Vec<usize>,
    /// Midpoint field at `t_end`.
    pub solution: Option<FieldCoeffs<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable<S> {
    pub reference_dt: S,
    pub t_end: S,
    pub rows: Vec<ConvergenceRow<S>>,
    pub reference: FieldCoeffs<S>,
}

impl<S: Scalar> ConvergenceTable<S> {
    /// Fitted order over the finished rows.
    pub fn slope(&self) -> Option<S> {
        let pts: Vec<(S, S)> = self.rows.iter().filter_map(|r| r.l2_error.map(|e| (r.dt, e))).collect();
        least_squares_slope(&pts)
    }
}

fn steps_to(t_end: f64, dt: f64) -> Option<usize> {
    let k = (t_end / dt).round();
    ((k * dt - t_end).abs() <= 1e-9 * dt && k >= 1.0).then_some(k as usize)
}

/// Run every step size and the reference to `t_end` and compare the midpoint
/// fields there. A failing member run becomes a row without error; a failing
/// reference run is an error.
pub fn temporal_convergence_study<S: Scalar, E: EnergyDensity<S>>(
    asm: &Assembler<'_, S, E>,
    ic: &InitialCondition<S>,
    base: &RunConfig<S>,
    dts: &[S],
    reference_dt: S,
) -> Result<ConvergenceTable<S>, DynamicsError> {
    if dts.is_empty() {
        return Err(invalid("dt", "no step sizes given"));
    }
    let t_end = base.t_end;
    for &dt in dts.iter().chain(std::iter::once(&reference_dt)) {
        if !(dt > S::zero()) || steps_to(t_end.to_f64_lossy(), dt.to_f64_lossy()).is_none() {
            return Err(invalid("dt", format!("{dt} does not divide t_end = {t_end}")));
        }
    }
    let cfg_for = |dt: S| RunConfig {
        dt,
        dt_coarse: dt.max(base.dt_coarse),
        snapshot_times: Vec::new(),
        allow_dt_switch: false,
        stop_at_steady_state: false,
        ..base.clone()
    };
    let reference = run(asm, ic, &cfg_for(reference_dt)).map_err(|f| f.error)?.states.midpoint();
    let rows = dts
        .iter()
        .map(|&dt| match run(asm, ic, &cfg_for(dt)) {
            Ok(out) => {
                let u = out.states.midpoint();
                ConvergenceRow {
                    dt,
                    l2_error: Some(l2_distance(asm.space(), &u, &reference)),
                    failure: None,
                    newton_iters: out.ledger.records.iter().map(|r| r.newton_iters).collect(),
                    solution: Some(u),
                }
            }
            Err(f) => ConvergenceRow {
                dt,
                l2_error: None,
                failure: Some(f.error.to_string()),
                newton_iters: f.partial.ledger.records.iter().map(|r| r.newton_iters).collect(),
                solution: None,
            },
        })
        .collect();
    Ok(ConvergenceTable {
        reference_dt,
        t_end,
        rows,
        reference,
    })
}

/// `dt,l2_error,slope`, the slope being the local order against the previous
/// finished row. Unfinished rows read `DNF`.
pub fn write_convergence_csv<S: Scalar>(path: &Path, table: &ConvergenceTable<S>) -> Result<(), IoError> {
    let mut prev: Option<(S, S)> = None;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| match r.l2_error {
            Some(e) => {
                let slope = prev.and_then(|p| least_squares_slope(&[p, (r.dt, e)]));
                prev = Some((r.dt, e));
                vec![fmt_float(r.dt), fmt_float(e), slope.map_or_else(|| "NaN".to_string(), fmt_float)]
            }
            None => vec![fmt_float(r.dt), "DNF".into(), "DNF".into()],
        })
        .collect();
    atomic_write_csv(path, &["dt", "l2_error", "slope"], rows)
}
