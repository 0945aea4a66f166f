//! Run configuration: TOML (or JSON) file, defaults, and CLI overrides.

use std::path::{Path, PathBuf};

use flexcable::control::{LqrWeights, RiccatiOptions};
use flexcable::dynamics::multi::{CableUnit, MultiPointParams, RigidLoadParams};
use flexcable::dynamics::{CableParams, QuadParams, SingleModel};
use flexcable::flatness::multi::{FlatOutputsMultiPoint, FlatOutputsRigid};
use flexcable::flatness::FlatOutputsSingle;
use flexcable::linearize::StateLayout;
use flexcable::signal::{RotationSignal, Signal, Signal3};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Single,
    MultiPoint,
    MultiRigid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemKind,
    pub seed: u64,
    pub out: PathBuf,
    pub quad: QuadConfig,
    pub cable: CableConfig,
    pub trajectory: TrajectoryConfig,
    pub lqr: LqrConfig,
    pub sim: SimConfig,
    pub checks: CheckConfig,
    pub gates: GateConfig,
    pub trials: Vec<TrialConfig>,
    pub multi_point: MultiPointConfig,
    pub multi_rigid: MultiRigidConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::Single,
            seed: 0,
            out: PathBuf::from("out"),
            quad: QuadConfig::default(),
            cable: CableConfig::default(),
            trajectory: TrajectoryConfig::default(),
            lqr: LqrConfig::default(),
            sim: SimConfig::default(),
            checks: CheckConfig::default(),
            gates: GateConfig::default(),
            trials: TrialConfig::defaults(),
            multi_point: MultiPointConfig::default(),
            multi_rigid: MultiRigidConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    pub mass: f64,
    /// Principal moments of inertia (kg m²).
    pub inertia: [f64; 3],
    pub gravity: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            mass: 0.85,
            inertia: [0.557e-2, 0.557e-2, 1.05e-2],
            gravity: 9.81,
        }
    }
}

impl QuadConfig {
    pub fn params(&self) -> Result<QuadParams> {
        Ok(QuadParams::new(
            self.mass,
            Matrix3::from_diagonal(&Vector3::from(self.inertia)),
            self.gravity,
        )?)
    }
}

/// Link masses (kg, top to bottom; the last is the load) and lengths (m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CableConfig {
    pub masses: Vec<f64>,
    pub lengths: Vec<f64>,
}

impl Default for CableConfig {
    fn default() -> Self {
        Self {
            masses: vec![0.1; 5],
            lengths: vec![0.25; 5],
        }
    }
}

impl CableConfig {
    pub fn params(&self) -> Result<CableParams> {
        Ok(CableParams::new(self.masses.clone(), self.lengths.clone())?)
    }

    pub fn links(&self) -> usize {
        self.masses.len()
    }
}

/// Load trajectory `x = a_x(1 − cos 2πf₁t)`, `y = a_y sin 2πf₂t`,
/// `z = a_z cos 2πf₃t`, or an arbitrary signal description in `outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    pub amplitude: [f64; 3],
    pub frequency_hz: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outputs: Option<FlatOutputsSingle>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            amplitude: [2.0, 2.5, 1.5],
            frequency_hz: [0.25, 0.2, 1.0 / 7.0],
            outputs: None,
        }
    }
}

impl TrajectoryConfig {
    pub fn flat_outputs(&self) -> FlatOutputsSingle {
        self.outputs
            .clone()
            .unwrap_or_else(|| FlatOutputsSingle::lissajous(self.amplitude, self.frequency_hz))
    }
}

/// `Q₁ = diag(b₀ I₆, b₁ I₆, b₂ I₃ₙ, b₃ I₃ₙ)`, `Q₂ = q2 I₄`, `P_T = p_terminal I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LqrConfig {
    pub q1_blocks: [f64; 4],
    pub q2: f64,
    pub p_terminal: f64,
    /// Grid step of the stored gain table (s).
    pub dt: f64,
    pub substeps: usize,
}

impl Default for LqrConfig {
    fn default() -> Self {
        Self {
            q1_blocks: [0.5, 0.75, 1.0, 0.75],
            q2: 0.2,
            p_terminal: 0.01,
            dt: 0.01,
            substeps: flexcable::control::DEFAULT_SUBSTEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Interval between rows of the plan file (s).
    pub plan_dt: f64,
    /// Times at which full configurations are written to the snapshot file.
    pub snapshot_times: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 30.0,
            plan_dt: 0.01,
            snapshot_times: vec![0.0, 2.0, 5.0, 10.0, 15.0, 30.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    pub lincheck_times: usize,
    pub lincheck_step: f64,
    pub lincheck_tolerance: f64,
    pub flatcheck_samples: usize,
    pub flatcheck_tolerance: f64,
    pub multi_samples: usize,
    pub multi_duration: f64,
    pub multi_tolerance: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            lincheck_times: 20,
            lincheck_step: 1e-6,
            lincheck_tolerance: 1e-4,
            flatcheck_samples: 300,
            flatcheck_tolerance: 1e-6,
            multi_samples: 100,
            multi_duration: 20.0,
            multi_tolerance: 1e-6,
        }
    }
}

/// Convergence gates for closed-loop trials. These thresholds are set by
/// this tool, not taken from published results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    pub position: f64,
    pub psi: f64,
    pub settle_by: f64,
    /// Bound on the load error for a trial that starts on the reference.
    pub exact_start: f64,
    pub constraint: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            position: 0.05,
            psi: 0.01,
            settle_by: 15.0,
            exact_start: 1e-6,
            constraint: 1e-9,
        }
    }
}

/// Initial condition of a closed-loop trial, relative to the reference at
/// `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialConfig {
    pub name: String,
    /// Rigid translation of quadrotor and cable (m).
    pub offset: [f64; 3],
    /// Quadrotor attitude perturbation: rotation about `attitude_axis`
    /// (inertial frame) by `attitude_deg`.
    pub attitude_axis: [f64; 3],
    pub attitude_deg: f64,
    /// Per-link rotation about `deflection_axis`; missing entries are zero.
    pub deflection_deg: Vec<f64>,
    pub deflection_axis: [f64; 3],
    /// Half-width of a seeded, uniformly drawn extra position offset (m).
    pub random_offset: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            name: "I".into(),
            offset: [0.0; 3],
            attitude_axis: [1.0, 0.0, 0.0],
            attitude_deg: 0.0,
            deflection_deg: Vec::new(),
            deflection_axis: [1.0, 0.0, 0.0],
            random_offset: 0.0,
        }
    }
}

impl TrialConfig {
    /// Trial I starts on the reference, II with the whole system shifted by
    /// (0.3, −0.3, 0.2) m, III with the quadrotor rolled 15° and the links
    /// deflected by alternating ±20°.
    pub fn defaults() -> Vec<Self> {
        vec![
            Self::default(),
            Self {
                name: "II".into(),
                offset: [0.3, -0.3, 0.2],
                ..Self::default()
            },
            Self {
                name: "III".into(),
                attitude_deg: 15.0,
                deflection_deg: vec![20.0, -20.0, 20.0, -20.0, 20.0],
                ..Self::default()
            },
        ]
    }

    pub fn is_exact_start(&self) -> bool {
        self.offset == [0.0; 3]
            && self.attitude_deg == 0.0
            && self.deflection_deg.iter().all(|&d| d == 0.0)
            && self.random_offset == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiPointConfig {
    /// Links per cable; the number of entries is the number of quadrotors.
    pub links: Vec<usize>,
    pub link_mass: f64,
    pub link_length: f64,
    pub load_mass: f64,
    pub load: Signal3,
    /// Last-link tension vectors of cables 2..p (N).
    pub tensions: Vec<Signal3>,
    /// One per quadrotor; zero yaw when empty.
    pub yaws: Vec<Signal>,
}

fn slow_orbit() -> Signal3 {
    Signal3::new(
        Signal::one_minus_cos(0.6, 0.1),
        Signal::sin(0.5, 0.08),
        Signal::Sum {
            terms: vec![Signal::constant(1.0), Signal::cos(0.3, 0.05)],
        },
    )
}

impl Default for MultiPointConfig {
    fn default() -> Self {
        Self {
            links: vec![5, 5],
            link_mass: 0.1,
            link_length: 0.25,
            load_mass: 0.5,
            load: slow_orbit(),
            tensions: vec![Signal3::new(
                Signal::Sum {
                    terms: vec![Signal::constant(1.0), Signal::sin(0.2, 0.1)],
                },
                Signal::constant(0.2),
                Signal::constant(-0.25 * 9.81),
            )],
            yaws: Vec::new(),
        }
    }
}

fn units(quad: &QuadConfig, links: &[usize], mass: f64, length: f64) -> Result<Vec<CableUnit>> {
    let qp = quad.params()?;
    links
        .iter()
        .map(|&n| Ok(CableUnit::new(qp.clone(), CableParams::uniform(n, mass, length)?)))
        .collect()
}

fn yaws_or_zero(yaws: &[Signal], p: usize) -> Vec<Signal> {
    if yaws.is_empty() {
        vec![Signal::zero(); p]
    } else {
        yaws.to_vec()
    }
}

impl MultiPointConfig {
    pub fn params(&self, quad: &QuadConfig) -> Result<MultiPointParams> {
        Ok(MultiPointParams::new(
            units(quad, &self.links, self.link_mass, self.link_length)?,
            self.load_mass,
        )?)
    }

    pub fn outputs(&self) -> FlatOutputsMultiPoint {
        FlatOutputsMultiPoint {
            load: self.load.clone(),
            tensions: self.tensions.clone(),
            yaws: yaws_or_zero(&self.yaws, self.links.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiRigidConfig {
    pub links: Vec<usize>,
    pub link_mass: f64,
    pub link_length: f64,
    pub load_mass: f64,
    pub load_inertia: [f64; 3],
    /// Attachment points in the load frame; a ring of `attachment_radius`
    /// when empty.
    pub attachments: Vec<[f64; 3]>,
    pub attachment_radius: f64,
    pub load: Signal3,
    pub attitude: RotationSignal,
    /// Kernel coordinates Λ (3p − 6 entries); zero when empty.
    pub lambda: Vec<Signal>,
    pub yaws: Vec<Signal>,
}

impl Default for MultiRigidConfig {
    fn default() -> Self {
        Self {
            links: vec![5; 4],
            link_mass: 0.1,
            link_length: 0.25,
            load_mass: 0.6,
            load_inertia: [0.02, 0.02, 0.035],
            attachments: Vec::new(),
            attachment_radius: 0.3,
            load: slow_orbit(),
            attitude: RotationSignal {
                base: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                axis: [0.0, 0.0, 1.0],
                angle: Signal::sin(0.4, 0.05),
            },
            lambda: Vec::new(),
            yaws: Vec::new(),
        }
    }
}

impl MultiRigidConfig {
    pub fn attachment_points(&self) -> Vec<Vector3<f64>> {
        if !self.attachments.is_empty() {
            return self.attachments.iter().map(|a| Vector3::from(*a)).collect();
        }
        let p = self.links.len();
        (0..p)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / p as f64;
                Vector3::new(a.cos(), a.sin(), 0.0) * self.attachment_radius
            })
            .collect()
    }

    pub fn params(&self, quad: &QuadConfig) -> Result<RigidLoadParams> {
        Ok(RigidLoadParams::new(
            units(quad, &self.links, self.link_mass, self.link_length)?,
            self.load_mass,
            Matrix3::from_diagonal(&Vector3::from(self.load_inertia)),
            self.attachment_points(),
        )?)
    }

    pub fn outputs(&self) -> FlatOutputsRigid {
        FlatOutputsRigid {
            load: self.load.clone(),
            attitude: self.attitude.clone(),
            lambda: self.lambda.clone(),
            yaws: yaws_or_zero(&self.yaws, self.links.len()),
        }
    }
}

impl RunConfig {
    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.cable.masses.len() != self.cable.lengths.len() || self.cable.masses.is_empty() {
            return bad("cable masses and lengths must be non-empty and of equal length".into());
        }
        for (name, v) in [
            ("sim.dt", self.sim.dt),
            ("sim.horizon", self.sim.horizon),
            ("sim.plan_dt", self.sim.plan_dt),
            ("lqr.dt", self.lqr.dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.lqr.substeps == 0 {
            return bad("lqr.substeps must be positive".into());
        }
        let steps = self.sim.horizon / self.lqr.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return bad("sim.horizon must be a multiple of lqr.dt".into());
        }
        if self.seed > i64::MAX as u64 {
            return bad("seed must fit in a signed 64-bit integer".into());
        }
        let mut names: Vec<_> = self.trials.iter().map(|t| t.name.to_ascii_lowercase()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.trials.len() {
            return bad("trial names must be unique".into());
        }
        self.quad.params()?;
        self.cable.params()?;
        Ok(())
    }

    pub fn single_model(&self) -> Result<SingleModel> {
        Ok(SingleModel::new(self.quad.params()?, self.cable.params()?))
    }

    pub fn flat_outputs(&self) -> FlatOutputsSingle {
        self.trajectory.flat_outputs()
    }

    pub fn weights(&self) -> Result<LqrWeights> {
        let n = self.cable.links();
        let lay = StateLayout::new(n);
        let b = self.lqr.q1_blocks;
        let diag = DVector::from_iterator(
            lay.dim(),
            std::iter::repeat_n(b[0], 6)
                .chain(std::iter::repeat_n(b[1], 6))
                .chain(std::iter::repeat_n(b[2], 3 * n))
                .chain(std::iter::repeat_n(b[3], 3 * n)),
        );
        Ok(LqrWeights::new(
            DMatrix::from_diagonal(&diag),
            DMatrix::identity(4, 4) * self.lqr.q2,
            DMatrix::identity(lay.dim(), lay.dim()) * self.lqr.p_terminal,
            self.sim.horizon,
        )?)
    }

    pub fn riccati_options(&self) -> RiccatiOptions {
        RiccatiOptions {
            dt: self.lqr.dt,
            substeps: self.lqr.substeps,
        }
    }

    pub fn trial(&self, name: &str) -> Result<&TrialConfig> {
        self.trials
            .iter()
            .find(|t| t.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| HarnessError::UnknownTrial(name.to_string()))
    }

    /// A configuration that keeps the load still at `position`.
    pub fn hover(position: [f64; 3]) -> Self {
        let mut cfg = Self::default();
        cfg.trajectory.outputs = Some(FlatOutputsSingle::hover(position));
        cfg
    }
}
