use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use gradelast::assembly::{write_residual_csv, Assembler, ConstraintSet};
use gradelast::dynamics::{
    init_states, read_restart, run_from, temporal_convergence_study, write_convergence_csv, write_restart, write_snapshot_csv, DynamicsError,
    InitialCondition, RunOutput, StatePair,
};
use gradelast::homogenize::{continuation_sweep, long_wave_perturbation, map_to_space, write_sweep_csv, HomogenizeError};
use gradelast::integrators::SchemeKind;
use gradelast::io::{atomic_write, atomic_write_csv, fmt_float, IoError};
use gradelast::spline::{make_uniform_space, FieldCoeffs, SplineSpace};

use crate::energy::Material;
use crate::spec::{parse_scheme, RunSpec};
use crate::CliError;

/// Bound used for the symmetry and traction checks printed by `homogenize`.
pub const HOMOGENIZE_CHECK_TOL: f64 = 1e-8;

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Io(io) => io.into(),
            DynamicsError::Invalid { .. } => CliError::Usage(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

fn space_of(spec: &RunSpec) -> Result<SplineSpace<f64>, CliError> {
    make_uniform_space(spec.mesh.elements, spec.mesh.periodic).map_err(|e| CliError::Usage(format!("mesh: {e}")))
}

fn constraints_of(space: &SplineSpace<f64>) -> ConstraintSet<f64> {
    if space.is_periodic() {
        ConstraintSet::pin(0)
    } else {
        ConstraintSet::boundary_layer(space)
    }
}

fn assembler<'a>(space: &'a SplineSpace<f64>, material: &'a Material) -> Result<Assembler<'a, f64, Material>, CliError> {
    Assembler::new(space, material, constraints_of(space)).map_err(|e| CliError::Usage(e.to_string()))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    atomic_write(path, |w: &mut dyn Write| w.write_all(text.as_bytes()))?;
    Ok(())
}

/// Initial pair for a dynamic run with step `dt`.
fn initial_states(spec: &RunSpec, space: &SplineSpace<f64>, dt: f64) -> Result<StatePair<f64>, CliError> {
    match spec.initial.kind.as_str() {
        "bump" => Ok(init_states(&InitialCondition::standard_bump(space)?, dt)),
        "rest" => Ok(init_states(&InitialCondition::at_rest(FieldCoeffs::zeros(space)), dt)),
        "waves" => {
            let u0 = long_wave_perturbation(space, spec.initial.amplitude).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(init_states(&InitialCondition::at_rest(u0), dt))
        }
        "restart" => {
            let path = spec.initial.restart.as_ref().ok_or_else(|| CliError::Usage("initial.restart: restart file required".into()))?;
            let pair: StatePair<f64> = read_restart(path)?;
            if pair.curr.dims() != space.dofs_per_axis() {
                return Err(CliError::Usage(format!(
                    "restart has {:?} control points per axis, mesh has {:?}",
                    pair.curr.dims(),
                    space.dofs_per_axis()
                )));
            }
            Ok(if pair.dt == dt { pair } else { pair.with_step(dt) })
        }
        other => Err(CliError::Usage(format!("initial.kind: unknown initial condition {other:?}"))),
    }
}

fn write_run_outputs(dir: &Path, spec: &RunSpec, space: &SplineSpace<f64>, out: &RunOutput<f64>) -> Result<(), CliError> {
    out.ledger.write_csv(&dir.join("energy.csv"))?;
    write_residual_csv(&dir.join("residuals.csv"), &out.residual_history)?;
    write_restart(&dir.join("restart.bin"), &out.states)?;
    let params = spec.material_params();
    for s in &out.snapshots {
        let name = format!("snapshot_t{:.4}.csv", s.requested);
        write_snapshot_csv(&dir.join(name), space, &s.u, &params, spec.output.snapshot_lattice)?;
    }
    Ok(())
}

/// Time-step and write every output of the run; returns the summary text.
pub fn cmd_run(spec: &RunSpec) -> Result<String, CliError> {
    spec.validate()?;
    let kind = spec.scheme_kind()?;
    let cfg = spec.run_config(kind)?;
    let material = spec.material()?;
    let space = space_of(spec)?;
    let asm = assembler(&space, &material)?;
    let states = initial_states(spec, &space, cfg.dt)?;
    let dir = spec.output_dir();
    create_dir(&dir)?;
    write_text(&dir.join("spec.toml"), &spec.to_toml())?;
    let (out, failure) = match run_from(&asm, states, &cfg) {
        Ok(out) => (out, None),
        Err(f) => (*f.partial, Some(f.error)),
    };
    write_run_outputs(&dir, spec, &space, &out)?;
    let summary = run_summary(kind, &out, &dir);
    match failure {
        None => Ok(summary),
        Some(e) => Err(CliError::Solver(format!("{summary}run failed: {e}"))),
    }
}

fn run_summary(kind: SchemeKind, out: &RunOutput<f64>, dir: &Path) -> String {
    let ledger = &out.ledger;
    let initial = ledger.initial.map_or(f64::NAN, |e| e.total());
    let last = ledger.records.last();
    let final_total = last.map_or(initial, |r| r.total);
    let dissipated: f64 = ledger.records.iter().map(|r| r.dissipation).sum();
    let bound: f64 = ledger.records.iter().map(|r| r.balance_tol).sum();
    let mut s = String::new();
    s += &format!("scheme: {kind}\n");
    s += &format!("steps: {}\n", ledger.len());
    s += &format!("t_half: {}\n", fmt_float(out.states.t_half));
    s += &format!("total energy: initial {} final {}\n", fmt_float(initial), fmt_float(final_total));
    s += &format!("energy change: {}\n", fmt_float(final_total - initial));
    s += &format!("dissipated: {}\n", fmt_float(dissipated));
    s += &format!("balance bound: {}\n", fmt_float(bound));
    s += &format!(
        "balance: |change - dissipated| = {} ({})\n",
        fmt_float((final_total - initial - dissipated).abs()),
        if (final_total - initial - dissipated).abs() <= bound { "within bound" } else { "exceeds bound" }
    );
    if let Some(k) = out.switched_at {
        s += &format!("switched to coarse step after step {k}\n");
    }
    if out.steady_state {
        s += "steady state reached\n";
    }
    s += &format!("output: {}\n", dir.display());
    s
}

fn scheme_list(names: &[String], fallback: SchemeKind) -> Result<Vec<SchemeKind>, CliError> {
    if names.is_empty() {
        Ok(vec![fallback])
    } else {
        names.iter().map(|n| parse_scheme(n)).collect()
    }
}

/// Temporal convergence study per scheme; writes `convergence_<scheme>.csv`.
pub fn cmd_converge(spec: &RunSpec, dts_override: &[f64]) -> Result<String, CliError> {
    spec.validate()?;
    let dts: Vec<f64> = if dts_override.is_empty() { spec.converge.dts.clone() } else { dts_override.to_vec() };
    if dts.len() < 3 {
        return Err(CliError::Usage(format!("converge needs at least 3 step sizes, got {}", dts.len())));
    }
    let reference = spec
        .converge
        .reference_dt
        .unwrap_or_else(|| dts.iter().copied().fold(f64::INFINITY, f64::min) / 4.0);
    let schemes = scheme_list(&spec.converge.schemes, spec.scheme_kind()?)?;
    let material = spec.material()?;
    let space = space_of(spec)?;
    let asm = assembler(&space, &material)?;
    let ic = match spec.initial.kind.as_str() {
        "rest" => InitialCondition::at_rest(FieldCoeffs::zeros(&space)),
        "bump" => InitialCondition::standard_bump(&space)?,
        "waves" => InitialCondition::at_rest(long_wave_perturbation(&space, spec.initial.amplitude).map_err(|e| CliError::Usage(e.to_string()))?),
        other => return Err(CliError::Usage(format!("converge needs a fresh initial condition, not {other:?}"))),
    };
    let dir = spec.output_dir();
    let mut summary = String::new();
    let mut failed = false;
    for kind in schemes {
        let base = spec.run_config(kind)?;
        let table = temporal_convergence_study(&asm, &ic, &base, &dts, reference)?;
        create_dir(&dir)?;
        write_convergence_csv(&dir.join(format!("convergence_{kind}.csv")), &table)?;
        failed |= table.rows.iter().any(|r| r.l2_error.is_none());
        summary += &format!(
            "{kind}: slope {}\n",
            table.slope().map_or_else(|| "undetermined".to_string(), fmt_float)
        );
    }
    if failed {
        Err(CliError::Solver(format!("{summary}some runs did not finish (DNF rows)")))
    } else {
        Ok(summary)
    }
}

/// Newton iteration histogram over schemes and step sizes.
pub fn cmd_compare(spec: &RunSpec, schemes_override: &[String], dts_override: &[f64]) -> Result<String, CliError> {
    spec.validate()?;
    let names = if schemes_override.is_empty() { &spec.compare.schemes } else { schemes_override };
    let schemes: Vec<SchemeKind> = if names.is_empty() {
        SchemeKind::ALL.to_vec()
    } else {
        names.iter().map(|n| parse_scheme(n)).collect::<Result<_, _>>()?
    };
    let dts: Vec<f64> = match (dts_override.is_empty(), spec.compare.dts.is_empty()) {
        (false, _) => dts_override.to_vec(),
        (true, false) => spec.compare.dts.clone(),
        (true, true) => vec![spec.time.dt],
    };
    let material = spec.material()?;
    let space = space_of(spec)?;
    let asm = assembler(&space, &material)?;
    let mut columns = Vec::new();
    let mut summary = String::new();
    for &kind in &schemes {
        for &dt in &dts {
            let mut cfg = spec.run_config(kind)?;
            cfg.dt = dt;
            cfg.dt_coarse = cfg.dt_coarse.max(dt);
            cfg.allow_dt_switch = false;
            cfg.stop_at_steady_state = false;
            cfg.snapshot_times.clear();
            cfg.validate()?;
            let states = initial_states(spec, &space, dt)?;
            let label = format!("{kind}@{}", fmt_float(dt));
            match run_from(&asm, states, &cfg) {
                Ok(out) => {
                    let mut counts = BTreeMap::new();
                    for r in &out.ledger.records {
                        *counts.entry(r.newton_iters).or_insert(0usize) += 1;
                    }
                    summary += &format!("{label}: {} steps\n", out.ledger.len());
                    columns.push((label, Some(counts)));
                }
                Err(f) => {
                    summary += &format!("{label}: DNF after {} steps ({})\n", f.partial.ledger.len(), f.error);
                    columns.push((label, None));
                }
            }
        }
    }
    let dir = spec.output_dir();
    create_dir(&dir)?;
    write_histogram(&dir.join("iterations.csv"), &columns)?;
    Ok(summary)
}

type HistogramColumn = (String, Option<BTreeMap<usize, usize>>);

/// Rows are iteration counts, columns `scheme@dt`; unfinished runs read
/// `DNF` in every row.
pub fn write_histogram(path: &Path, columns: &[HistogramColumn]) -> Result<(), IoError> {
    let iters: std::collections::BTreeSet<usize> = columns.iter().filter_map(|c| c.1.as_ref()).flat_map(|m| m.keys().copied()).collect();
    let mut header = vec!["iterations".to_string()];
    header.extend(columns.iter().map(|c| c.0.clone()));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = iters.iter().map(|&n| {
        let mut row = vec![n.to_string()];
        row.extend(columns.iter().map(|(_, counts)| match counts {
            Some(m) => m.get(&n).copied().unwrap_or(0).to_string(),
            None => "DNF".to_string(),
        }));
        row
    });
    atomic_write_csv(path, &header_refs, rows)
}

fn homogenize_seed(spec: &RunSpec, space: &SplineSpace<f64>) -> Result<FieldCoeffs<f64>, CliError> {
    let seed = spec.homogenize.seed.as_str();
    if seed == "homogeneous" {
        return Ok(FieldCoeffs::zeros(space));
    }
    if seed.is_empty() {
        return Err(CliError::Usage("homogenize.seed: restart file or \"homogeneous\" required".into()));
    }
    let pair: StatePair<f64> = read_restart(&PathBuf::from(seed))?;
    let u = pair.midpoint();
    let dims = u.dims();
    if dims[0] != dims[1] || dims[1] != dims[2] {
        return Err(CliError::Usage(format!("seed has unequal axes {dims:?}")));
    }
    // open spaces carry two more control points per axis than elements
    let source = if dims[0] == spec.mesh.elements {
        make_uniform_space(dims[0], true)
    } else if dims[0] >= 5 {
        make_uniform_space(dims[0] - 2, false)
    } else {
        return Err(CliError::Usage(format!("seed with {dims:?} control points fits no mesh")));
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    map_to_space(&source, &u, space).map_err(|e| CliError::Usage(format!("seed: {e}")))
}

/// Effective response sweep; writes `sweep.csv` and `loading.toml`.
pub fn cmd_homogenize(spec: &RunSpec) -> Result<String, CliError> {
    if !spec.mesh.periodic {
        return Err(CliError::Usage("homogenize needs mesh.periodic = true".into()));
    }
    spec.validate_static()?;
    let loading = spec.loading()?;
    let material = spec.material()?;
    let space = space_of(spec)?;
    let seed = homogenize_seed(spec, &space)?;
    let ncfg = spec.newton_config()?;
    let mut summary = String::new();
    summary += &format!("D = {:?}\n", loading.direction);
    let dir = spec.output_dir();
    create_dir(&dir)?;
    write_text(
        &dir.join("loading.toml"),
        &format!(
            "direction = {:?}\neta = {:?}\nmax_increment = {:?}\n",
            loading.direction, loading.eta_values, loading.max_increment
        ),
    )?;
    let (response, failure) = match continuation_sweep(&space, &material, &loading, &seed, spec.homogenize.seed_eta, &ncfg) {
        Ok(r) => (r, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    write_sweep_csv(&dir.join("sweep.csv"), &response)?;
    for r in &response.records {
        let sym = r.stress_asymmetry();
        let trac = r.traction_mismatch();
        summary += &format!(
            "eta {}: S symmetry {} ({}), traction {} ({})\n",
            fmt_float(r.eta),
            fmt_float(sym),
            if sym <= HOMOGENIZE_CHECK_TOL { "pass" } else { "FAIL" },
            fmt_float(trac),
            if trac <= HOMOGENIZE_CHECK_TOL { "pass" } else { "FAIL" },
        );
    }
    match failure {
        None => Ok(summary),
        Some(HomogenizeError::Invalid(msg)) => Err(CliError::Usage(msg)),
        Some(e) => Err(CliError::Solver(format!("{summary}sweep failed: {e}"))),
    }
}
