//! Scenario configuration, read from TOML.
//!
//! ```toml
//! scenario = "beam_free_space"
//! seed = 7
//!
//! [particles]
//! count = 5000
//!
//! [field]
//! modes = 32
//! truncation = 1.5
//! solver = "direct"        # or "precomputed"
//! method = "pif"           # or "pic"
//! shape = { kind = "bspline", order = 2 }   # radius defaults to 1/modes
//!
//! [time]
//! dt = 5e-4
//! steps = 500
//! b_z = 300.0
//!
//! [boundary]               # beam_dirichlet only
//! radius = 0.5
//! nodes = 128
//! data = "zero"            # "linear_y" or { tabulated = [...] }
//! ```
//!
//! Every table except `[field]` and `[time]` has defaults; unknown keys are
//! rejected.

use crate::error::{Error, Result};
use crate::field::{FieldSolveConfig, SolverMode};
use crate::greens::TruncatedGreen;
use crate::nufft::DEFAULT_TOLERANCE;
use crate::shapes::ShapeFunction;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PoissonManufactured,
    BeamFreeSpace,
    BeamDirichlet,
    LaplaceManufactured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Pif,
    Pic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Direct,
    Precomputed,
}

impl From<SolverKind> for SolverMode {
    fn from(s: SolverKind) -> Self {
        match s {
            SolverKind::Direct => SolverMode::Direct,
            SolverKind::Precomputed => SolverMode::Precomputed,
        }
    }
}

/// What to do with a particle that leaves the region where fields are valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapePolicy {
    #[default]
    Abort,
    /// Pin it at its last valid position with zero velocity; it keeps
    /// contributing charge.
    Freeze,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Bspline {
        #[serde(default = "default_order")]
        order: usize,
        /// Defaults to `1 / modes`.
        radius: Option<f64>,
    },
    Gaussian { sigma: f64, radius: f64 },
}

fn default_order() -> usize {
    2
}

impl Default for ShapeSpec {
    fn default() -> Self {
        ShapeSpec::Bspline { order: 2, radius: None }
    }
}

impl ShapeSpec {
    pub fn build(&self, modes: usize) -> Result<ShapeFunction> {
        match *self {
            ShapeSpec::Bspline { order, radius } => ShapeFunction::radial_bspline(order, radius.unwrap_or(1.0 / modes as f64)),
            ShapeSpec::Gaussian { sigma, radius } => ShapeFunction::truncated_gaussian(sigma, radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    pub count: usize,
    /// Charge and mass of the whole ensemble; each particle carries
    /// `1/count` of both.
    #[serde(default = "one")]
    pub total_charge: f64,
    #[serde(default = "one")]
    pub total_mass: f64,
    #[serde(default = "sigma_x")]
    pub sigma_x: f64,
    #[serde(default = "sigma_y")]
    pub sigma_y: f64,
    #[serde(default = "one")]
    pub thermal_velocity: f64,
}

fn one() -> f64 {
    1.0
}
fn sigma_x() -> f64 {
    1.0 / 30.0
}
fn sigma_y() -> f64 {
    0.1
}

impl Default for ParticleSpec {
    fn default() -> Self {
        Self {
            count: 5000,
            total_charge: 1.0,
            total_mass: 1.0,
            sigma_x: sigma_x(),
            sigma_y: sigma_y(),
            thermal_velocity: 1.0,
        }
    }
}

impl ParticleSpec {
    pub fn charge(&self) -> f64 {
        self.total_charge / self.count as f64
    }

    pub fn mass(&self) -> f64 {
        self.total_mass / self.count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub modes: usize,
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub shape: ShapeSpec,
    /// Precomputed kernels are loaded from here when the file matches and
    /// written here otherwise.
    #[serde(default)]
    pub kernel_cache: Option<PathBuf>,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            modes: 32,
            truncation: default_truncation(),
            solver: SolverKind::default(),
            method: Method::default(),
            tolerance: DEFAULT_TOLERANCE,
            shape: ShapeSpec::default(),
            kernel_cache: None,
        }
    }
}

fn default_truncation() -> f64 {
    crate::greens::DEFAULT_RADIUS
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub steps: usize,
    #[serde(default)]
    pub b_z: f64,
    #[serde(default = "default_every")]
    pub diagnostic_every: usize,
    #[serde(default)]
    pub escape: EscapePolicy,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self {
            dt: 5e-4,
            steps: 0,
            b_z: 0.0,
            diagnostic_every: 1,
            escape: EscapePolicy::default(),
        }
    }
}

fn default_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryData {
    Zero,
    /// `f(x, y) = y`.
    LinearY,
    /// One value per node.
    Tabulated(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default = "half")]
    pub radius: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "zero_data")]
    pub data: BoundaryData,
}

fn half() -> f64 {
    0.5
}
fn default_nodes() -> usize {
    128
}
fn zero_data() -> BoundaryData {
    BoundaryData::Zero
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self {
            radius: 0.5,
            nodes: 128,
            data: BoundaryData::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Overridden by `--out`; falls back to `FSPIF_OUT_DIR`, then `out`.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Potential snapshots every this many steps; 0 disables them.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "default_snapshot_grid")]
    pub snapshot_grid: usize,
}

fn default_snapshot_grid() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    /// Mode counts for the Poisson study.
    #[serde(default = "default_study_modes")]
    pub modes: Vec<usize>,
    /// Fourier interpolation grid for the Poisson study.
    #[serde(default = "default_snapshot_grid")]
    pub refine: usize,
    /// Node counts for the Laplace study.
    #[serde(default = "default_study_nodes")]
    pub boundary_nodes: Vec<usize>,
    /// Evaluation grid (over the square around the disk) for the Laplace study.
    #[serde(default = "default_eval_grid")]
    pub eval_grid: usize,
    /// Time steps for the energy study; every run covers `final_time`.
    #[serde(default = "default_dts")]
    pub dts: Vec<f64>,
    #[serde(default = "default_final_time")]
    pub final_time: f64,
    /// Solvers compared by the energy and Poisson studies.
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
}

fn default_study_modes() -> Vec<usize> {
    vec![16, 24, 32, 40]
}
fn default_study_nodes() -> Vec<usize> {
    vec![16, 32, 64, 128]
}
fn default_eval_grid() -> usize {
    256
}
fn default_dts() -> Vec<f64> {
    vec![1e-3, 5e-4, 2.5e-4]
}
fn default_final_time() -> f64 {
    0.25
}
fn default_solvers() -> Vec<SolverKind> {
    vec![SolverKind::Direct, SolverKind::Precomputed]
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            modes: default_study_modes(),
            refine: default_snapshot_grid(),
            boundary_nodes: default_study_nodes(),
            eval_grid: default_eval_grid(),
            dts: default_dts(),
            final_time: default_final_time(),
            solvers: default_solvers(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: u64,
    #[serde(default)]
    pub particles: ParticleSpec,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub study: StudySpec,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let p = &self.particles;
        if p.count == 0 {
            return bad("particles.count must be positive".into());
        }
        for (name, v) in [
            ("particles.total_charge", p.total_charge),
            ("particles.total_mass", p.total_mass),
            ("particles.sigma_x", p.sigma_x),
            ("particles.sigma_y", p.sigma_y),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(p.thermal_velocity >= 0.0 && p.thermal_velocity.is_finite()) {
            return bad("particles.thermal_velocity must be non-negative".into());
        }
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            return bad(format!("time.dt must be positive, got {}", self.time.dt));
        }
        if !self.time.b_z.is_finite() {
            return bad("time.b_z must be finite".into());
        }
        if self.time.diagnostic_every == 0 {
            return bad("time.diagnostic_every must be positive".into());
        }
        if self.scenario == Scenario::BeamDirichlet {
            let b = self.boundary.clone().unwrap_or_default();
            if !(b.radius > 0.0 && b.radius <= 0.5) {
                return bad(format!("boundary.radius must lie in (0, 0.5], got {}", b.radius));
            }
            if let BoundaryData::Tabulated(v) = &b.data {
                if v.len() != b.nodes {
                    return bad(format!("tabulated boundary data has {} values for {} nodes", v.len(), b.nodes));
                }
            }
            if self.field.method == Method::Pic {
                return bad("the PIC baseline supports free space only".into());
            }
        }
        if self.study.dts.iter().any(|&d| !(d > 0.0)) || !(self.study.final_time > 0.0) {
            return bad("study time steps and final_time must be positive".into());
        }
        if self.scenario == Scenario::LaplaceManufactured {
            if let Some(b) = &self.boundary {
                if !(b.radius > 0.0 && b.radius.is_finite()) || b.nodes < 8 {
                    return bad("boundary needs a positive radius and at least 8 nodes".into());
                }
            }
            return Ok(());
        }
        // shape and truncation radius
        self.field_config(self.field.solver)?;
        Ok(())
    }

    pub fn shape(&self) -> Result<ShapeFunction> {
        self.field.shape.build(self.field.modes)
    }

    pub fn green(&self) -> Result<TruncatedGreen> {
        TruncatedGreen::new(2, self.field.truncation)
    }

    pub fn field_config(&self, solver: SolverKind) -> Result<FieldSolveConfig> {
        Ok(FieldSolveConfig::new(self.field.modes, self.shape()?, self.field.truncation)?
            .with_mode(solver.into())
            .with_tolerance(self.field.tolerance))
    }

    pub fn boundary_spec(&self) -> Option<BoundarySpec> {
        match self.scenario {
            Scenario::BeamDirichlet => Some(self.boundary.clone().unwrap_or_default()),
            _ => None,
        }
    }
}
