//! Run specification files.
//!
//! A spec is TOML with one table per concern. Every key has a default, so a
//! spec only lists what differs, e.g.
//!
//! ```toml
//! [time]
//! dt = 1e-3
//! t_end = 0.05
//!
//! [material]
//! c = 1.0
//! ```

use std::path::{Path, PathBuf};

use gradelast::assembly::NewtonConfig;
use gradelast::dynamics::RunConfig;
use gradelast::homogenize::{reference_direction, MacroLoading};
use gradelast::integrators::{SchemeConfig, SchemeKind};
use gradelast::linear::LinearSolverKind;
use gradelast::material::{DiagonalQuadratic, MaterialParams, ThreeWell};
use serde::{Deserialize, Serialize};

use crate::energy::Material;
use crate::CliError;

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "GRADELAST_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub material: MaterialSpec,
    #[serde(default)]
    pub newton: NewtonSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub converge: ConvergeSpec,
    #[serde(default)]
    pub compare: CompareSpec,
    #[serde(default)]
    pub homogenize: HomogenizeSpec,
    /// Worker threads for assembly; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    /// Seed for randomized states.
    #[serde(default)]
    pub seed: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSpec {
    pub elements: usize,
    pub periodic: bool,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            elements: 8,
            periodic: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSpec {
    pub kind: String,
    pub kappa_f_max: Option<usize>,
    pub kappa_gradf_max: Option<usize>,
    pub l_gs: Option<f64>,
}

impl Default for SchemeSpec {
    fn default() -> Self {
        Self {
            kind: "taylor_full".into(),
            kappa_f_max: None,
            kappa_gradf_max: None,
            l_gs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub dt: f64,
    pub t_end: f64,
    pub dt_coarse: f64,
    pub dissipation_switch_threshold: f64,
    pub snapshot_times: Vec<f64>,
    pub allow_dt_switch: bool,
    pub stop_at_steady_state: bool,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 0.05,
            dt_coarse: 2e-2,
            dissipation_switch_threshold: 1e-6,
            snapshot_times: Vec::new(),
            allow_dt_switch: false,
            stop_at_steady_state: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSpec {
    /// `three_well` or `linear_elastic`.
    pub model: String,
    pub c: f64,
    pub rho: Option<f64>,
    pub r: Option<f64>,
    pub l: Option<f64>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub b3: Option<f64>,
    pub b4: Option<f64>,
    pub b5: Option<f64>,
    /// Shear modulus of the `linear_elastic` model.
    pub mu: Option<f64>,
    /// Gradient modulus of the `linear_elastic` model.
    pub kappa: Option<f64>,
}

impl Default for MaterialSpec {
    fn default() -> Self {
        Self {
            model: "three_well".into(),
            c: 0.0,
            rho: None,
            r: None,
            l: None,
            b1: None,
            b2: None,
            b3: None,
            b4: None,
            b5: None,
            mu: None,
            kappa: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSpec {
    pub residual_tol: f64,
    pub max_iters: usize,
    /// `direct` or `iterative`.
    pub linear: String,
}

impl Default for NewtonSpec {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_iters: 25,
            linear: "direct".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSpec {
    /// `bump`, `rest`, `waves` (periodic meshes) or `restart`.
    pub kind: String,
    pub restart: Option<PathBuf>,
    /// Strain amplitude of the `waves` perturbation.
    pub amplitude: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            kind: "bump".into(),
            restart: None,
            amplitude: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Lattice points per axis in snapshot files.
    pub snapshot_lattice: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("output"),
            snapshot_lattice: 16,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeSpec {
    pub dts: Vec<f64>,
    pub reference_dt: Option<f64>,
    /// Schemes to study; empty means `scheme.kind`.
    pub schemes: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSpec {
    pub schemes: Vec<String>,
    pub dts: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomogenizeSpec {
    pub eta_min: f64,
    pub eta_max: f64,
    pub count: usize,
    pub max_increment: f64,
    /// Loading direction; the reference direction if absent.
    pub direction: Option<[[f64; 3]; 3]>,
    /// `homogeneous`, or the path of a restart file whose midpoint field
    /// seeds the sweep.
    pub seed: String,
    pub seed_eta: f64,
}

impl Default for HomogenizeSpec {
    fn default() -> Self {
        Self {
            eta_min: -1.5,
            eta_max: 1.0,
            count: 26,
            max_increment: 0.1,
            direction: None,
            seed: "homogeneous".into(),
            seed_eta: 0.0,
        }
    }
}

impl RunSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("malformed spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(msg) => CliError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn scheme_kind(&self) -> Result<SchemeKind, CliError> {
        parse_scheme(&self.scheme.kind)
    }

    pub fn scheme_config(&self, kind: SchemeKind) -> SchemeConfig<f64> {
        let mut cfg = SchemeConfig::new(kind);
        if let Some(k) = self.scheme.kappa_f_max {
            cfg.kappa_f_max = k;
        }
        if let Some(k) = self.scheme.kappa_gradf_max {
            cfg.kappa_gradf_max = k;
        }
        if let Some(l) = self.scheme.l_gs {
            cfg.l_gs = l;
        }
        cfg
    }

    pub fn newton_config(&self) -> Result<NewtonConfig<f64>, CliError> {
        let linear = match self.newton.linear.as_str() {
            "direct" => LinearSolverKind::Direct,
            "iterative" => LinearSolverKind::Iterative,
            other => return Err(usage("newton.linear", format!("unknown solver {other:?}"))),
        };
        Ok(NewtonConfig {
            residual_tol: self.newton.residual_tol,
            max_iters: self.newton.max_iters,
            linear,
        })
    }

    pub fn run_config(&self, kind: SchemeKind) -> Result<RunConfig<f64>, CliError> {
        let t = &self.time;
        let mut cfg = RunConfig::new(t.dt, t.t_end, self.scheme_config(kind));
        cfg.dt_coarse = t.dt_coarse.max(t.dt);
        cfg.dissipation_switch_threshold = t.dissipation_switch_threshold;
        cfg.snapshot_times = t.snapshot_times.clone();
        cfg.allow_dt_switch = t.allow_dt_switch;
        cfg.stop_at_steady_state = t.stop_at_steady_state;
        cfg.newton = self.newton_config()?;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn material_params(&self) -> MaterialParams<f64> {
        let m = &self.material;
        let mut p = MaterialParams::with_radius(m.r.unwrap_or(0.25), m.l.unwrap_or(0.025), m.c);
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.b1, m.b1);
        set(&mut p.b2, m.b2);
        set(&mut p.b3, m.b3);
        set(&mut p.b4, m.b4);
        set(&mut p.b5, m.b5);
        set(&mut p.rho, m.rho);
        p
    }

    pub fn material(&self) -> Result<Material, CliError> {
        match self.material.model.as_str() {
            "three_well" => {
                let p = self.material_params();
                p.validate().map_err(|e| usage("material", e.to_string()))?;
                Ok(Material::ThreeWell(ThreeWell::new(p)))
            }
            "linear_elastic" => {
                let mut toy = DiagonalQuadratic::linear_elastic(self.material.mu.unwrap_or(1.0), self.material.kappa.unwrap_or(1e-3));
                toy.rho = self.material.rho.unwrap_or(1.0);
                toy.c = self.material.c;
                if !(toy.rho > 0.0 && toy.c >= 0.0) {
                    return Err(usage("material", "rho must be positive and c non-negative"));
                }
                Ok(Material::LinearElastic(toy))
            }
            other => Err(usage("material.model", format!("unknown model {other:?}"))),
        }
    }

    pub fn loading(&self) -> Result<MacroLoading<f64>, CliError> {
        let h = &self.homogenize;
        let mut l = MacroLoading::evenly_spaced(h.direction.unwrap_or_else(reference_direction), h.eta_min, h.eta_max, h.count);
        l.max_increment = h.max_increment;
        l.validate().map_err(|e| usage("homogenize", e.to_string()))?;
        Ok(l)
    }

    /// Output directory, relocated under the output root if one is set and
    /// the directory is relative.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output.dir.is_relative() => PathBuf::from(root).join(&self.output.dir),
            _ => self.output.dir.clone(),
        }
    }

    /// Checks shared by every command.
    pub fn validate_static(&self) -> Result<(), CliError> {
        if self.mesh.elements < 3 {
            return Err(usage("mesh.elements", "need at least 3 elements per axis"));
        }
        self.newton_config()?;
        self.material()?;
        Ok(())
    }

    /// Checks for the time-stepping commands; none needs any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.validate_static()?;
        if self.output.snapshot_lattice < 2 {
            return Err(usage("output.snapshot_lattice", "need at least 2 points per axis"));
        }
        let kind = self.scheme_kind()?;
        self.run_config(kind)?;
        match self.initial.kind.as_str() {
            "bump" if self.mesh.periodic => return Err(usage("initial.kind", "the bump needs a clamped mesh")),
            "waves" if !self.mesh.periodic => return Err(usage("initial.kind", "waves need a periodic mesh")),
            "bump" | "rest" | "waves" => {}
            "restart" if self.initial.restart.is_some() => {}
            "restart" => return Err(usage("initial.restart", "restart file required")),
            other => return Err(usage("initial.kind", format!("unknown initial condition {other:?}"))),
        }
        Ok(())
    }
}

pub fn parse_scheme(name: &str) -> Result<SchemeKind, CliError> {
    SchemeKind::parse(name).ok_or_else(|| usage("scheme", format!("unknown scheme {name:?} (gonzalez, taylor_full, taylor_reduced)")))
}

fn usage(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{field}: {msg}"))
}
