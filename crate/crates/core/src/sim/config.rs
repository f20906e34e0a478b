use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::filter::FilterGains;
use crate::sensing::{derive_seed, vision_world_rotation, ForceNoiseModel, VisionMeasurement};
use crate::so3::{from_euler_zyx, EulerZYX, RotationMatrix, Vec3};
use crate::superquadric::{inside_outside, Superquadric};

pub const SCHEMA_VERSION: u32 = 1;

pub const PRESET_NAMES: [&str; 6] = [
    "case_a",
    "case_b",
    "case_c",
    "case_d",
    "edge_grasp",
    "case_a_vision",
];

/// A rotation given either as a row-major matrix or as ZYX Euler angles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RotationSpec {
    Matrix([[f64; 3]; 3]),
    Euler(EulerZYX),
}

impl RotationSpec {
    pub fn identity() -> Self {
        Self::Euler(EulerZYX::new(0.0, 0.0, 0.0))
    }

    pub fn euler(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self::Euler(EulerZYX::new(yaw, pitch, roll))
    }

    pub fn resolve(&self) -> Result<RotationMatrix, SimError> {
        match self {
            Self::Matrix(rows) => Ok(RotationMatrix::from_rows(*rows)?),
            Self::Euler(e) => {
                if !e.as_array().iter().all(|v| v.is_finite()) {
                    return Err(SimError::Invalid("non-finite Euler angle".into()));
                }
                Ok(from_euler_zyx(e))
            }
        }
    }
}

impl From<RotationMatrix> for RotationSpec {
    fn from(r: RotationMatrix) -> Self {
        Self::Matrix(r.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub mean: f64,
    pub variance: f64,
    pub sample_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    /// End-effector position in the world frame, m.
    pub ee_position: [f64; 3],
    pub k_c: f64,
    pub beta: f64,
    /// Constant force read by the sensor, N.
    pub f_measured: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    /// Estimated end-effector-to-body rotation applied to the measured force
    /// before it enters the residual (edge grasps).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_frame_correction: Option<RotationSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PegInCamera {
    Constant(RotationSpec),
    /// The camera reports the true body orientation exactly.
    TrueRotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisionConfig {
    pub r_cam_world: RotationSpec,
    pub peg_in_camera: PegInCamera,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub k_p: f64,
}

fn default_converge_tol() -> f64 {
    1e-2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub superquadric: Superquadric,
    pub arms: [ArmConfig; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vision: Option<VisionConfig>,
    pub gains: GainsConfig,
    pub r_hat0: RotationSpec,
    pub r_true: RotationSpec,
    /// Step size, s.
    pub dt: f64,
    /// Simulated time, s.
    pub duration: f64,
    pub seed: u64,
    /// Final trace error below which a run counts as converged.
    #[serde(default = "default_converge_tol")]
    pub converge_tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ArmRuntime {
    pub k_c: f64,
    pub ee_position_world: Vec3,
    pub f_measured: Vec3,
    pub noise: Option<ForceNoiseModel>,
    pub force_frame_correction: Option<RotationMatrix>,
}

/// A validated scenario with every rotation resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub superquadric: Superquadric,
    pub(crate) arms: [ArmRuntime; 2],
    pub gains: FilterGains,
    pub vision: Option<RotationMatrix>,
    pub r_hat0: RotationMatrix,
    pub r_true: RotationMatrix,
    pub dt: f64,
    pub steps: u64,
    pub converge_tol: f64,
}

impl Scenario {
    pub fn is_noisy(&self) -> bool {
        self.arms
            .iter()
            .any(|a| a.noise.is_some_and(|n| n.variance > 0.0))
    }
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::Invalid(msg.into())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<Scenario, SimError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(invalid(format!(
                "duration {} shorter than dt",
                self.duration
            )));
        }
        let ratio = self.duration / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-6 * steps {
            return Err(invalid("duration must be an integer multiple of dt"));
        }
        if !(self.converge_tol > 0.0) {
            return Err(invalid("converge_tol must be positive"));
        }
        self.superquadric.validate()?;
        let gains = FilterGains::new(self.arms[0].beta, self.arms[1].beta, self.gains.k_p)?;
        let r_hat0 = self.r_hat0.resolve()?;
        let r_true = self.r_true.resolve()?;

        let vision = match (&self.vision, gains.k_p > 0.0) {
            (None, true) => return Err(crate::error::FilterError::MissingVision.into()),
            (None, false) => None,
            (Some(v), _) => {
                let r_cam_world = v.r_cam_world.resolve()?;
                let r_peg_cam = match &v.peg_in_camera {
                    PegInCamera::Constant(spec) => spec.resolve()?,
                    PegInCamera::TrueRotation => r_cam_world.transpose().compose(&r_true),
                };
                Some(vision_world_rotation(&VisionMeasurement {
                    r_cam_world,
                    r_peg_cam,
                }))
            }
        };

        let mut arms = [None, None];
        for (i, arm) in self.arms.iter().enumerate() {
            if !(arm.k_c > 0.0 && arm.k_c.is_finite()) {
                return Err(invalid(format!("arm {i}: k_c must be positive")));
            }
            let ee = vec3(arm.ee_position);
            let f = vec3(arm.f_measured);
            if !ee.iter().chain(f.iter()).all(|v| v.is_finite()) {
                return Err(invalid(format!("arm {i}: non-finite vector")));
            }
            let body = r_true.transpose().apply(&ee);
            if body.norm() <= crate::superquadric::ORIGIN_GUARD
                || inside_outside(&self.superquadric, &body) < 1.0
            {
                return Err(invalid(format!(
                    "arm {i}: end-effector lies inside the superquadric"
                )));
            }
            let noise = match arm.noise {
                None => None,
                Some(n) => {
                    if !(n.variance >= 0.0 && n.mean.is_finite() && n.variance.is_finite()) {
                        return Err(invalid(format!("arm {i}: noise variance must be >= 0")));
                    }
                    let hold = n.sample_time / self.dt;
                    if !(n.sample_time > 0.0)
                        || hold < 1.0 - 1e-9
                        || (hold - hold.round()).abs() > 1e-6
                    {
                        return Err(invalid(format!(
                            "arm {i}: noise sample_time must be a positive multiple of dt"
                        )));
                    }
                    Some(ForceNoiseModel {
                        mean: n.mean,
                        variance: n.variance,
                        sample_time: n.sample_time,
                        seed: derive_seed(self.seed, i as u64),
                    })
                }
            };
            let force_frame_correction = arm
                .force_frame_correction
                .map(|r| r.resolve())
                .transpose()?;
            arms[i] = Some(ArmRuntime {
                k_c: arm.k_c,
                ee_position_world: ee,
                f_measured: f,
                noise,
                force_frame_correction,
            });
        }

        Ok(Scenario {
            name: self.name.clone(),
            superquadric: self.superquadric,
            arms: arms.map(Option::unwrap),
            gains,
            vision,
            r_hat0,
            r_true,
            dt: self.dt,
            steps: steps as u64,
            converge_tol: self.converge_tol,
        })
    }
}

fn arm(ee: [f64; 3], f: [f64; 3]) -> ArmConfig {
    ArmConfig {
        ee_position: ee,
        k_c: 1.0,
        beta: -1.0,
        f_measured: f,
        noise: None,
        force_frame_correction: None,
    }
}

fn base(name: &str, p1: [f64; 3], r_true: RotationSpec) -> ScenarioConfig {
    let p2 = [-p1[0], -p1[1], -p1[2]];
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        superquadric: Superquadric::default(),
        arms: [arm(p1, [-1.0, 0.0, 0.0]), arm(p2, [1.0, 0.0, 0.0])],
        vision: None,
        gains: GainsConfig { k_p: 0.0 },
        r_hat0: RotationSpec::identity(),
        r_true,
        dt: 0.01,
        duration: 60.0,
        seed: 0,
        converge_tol: default_converge_tol(),
    }
}

/// Built-in scenarios.
///
/// * `case_a`: body in the horizontal plane, haptics only.
/// * `case_b`: grasp points along ±(1,1,1), haptics only; the reference
///   rotation is yaw 45°, pitch −45°.
/// * `case_c`: `case_b` plus a camera reporting yaw 45° with `k_p = 1`.
/// * `case_d`: `case_c` with zero-mean Gaussian force noise (σ² = 0.5 and 2,
///   held for 0.2 s).
/// * `edge_grasp`: square-section box held at the midpoints of two opposite
///   edges, sensor forces rotated into the body frame.
/// * `case_a_vision`: `case_a` geometry with a camera that reports the true
///   rotation, used for convergence sweeps from random starts.
pub fn preset(name: &str) -> Result<ScenarioConfig, SimError> {
    let quarter = PI / 4.0;
    let config = match name {
        "case_a" => base(
            "case_a",
            [-0.3, -0.3, 0.0],
            RotationSpec::euler(quarter, 0.0, 0.0),
        ),
        "case_b" => base(
            "case_b",
            [-0.3, -0.3, -0.3],
            RotationSpec::euler(quarter, -quarter, 0.0),
        ),
        "case_c" => {
            let mut c = preset("case_b")?;
            c.name = "case_c".into();
            c.gains.k_p = 1.0;
            c.vision = Some(VisionConfig {
                r_cam_world: RotationSpec::identity(),
                peg_in_camera: PegInCamera::Constant(RotationSpec::euler(quarter, 0.0, 0.0)),
            });
            c
        }
        "case_d" => {
            let mut c = preset("case_c")?;
            c.name = "case_d".into();
            c.seed = 1;
            for (arm, variance) in c.arms.iter_mut().zip([0.5, 2.0]) {
                arm.noise = Some(NoiseConfig {
                    mean: 0.0,
                    variance,
                    sample_time: 0.2,
                });
            }
            c
        }
        "edge_grasp" => {
            let mut c = base("edge_grasp", [-0.12, -0.12, 0.0], RotationSpec::identity());
            c.superquadric = Superquadric {
                ax: 0.1,
                ay: 0.1,
                az: 0.25,
                eps1: 0.2,
                eps2: 0.2,
            };
            c.r_hat0 = RotationSpec::euler(quarter, 0.0, 0.0);
            for arm in &mut c.arms {
                arm.force_frame_correction = Some(RotationSpec::euler(quarter, 0.0, 0.0));
            }
            c
        }
        "case_a_vision" => {
            let mut c = preset("case_a")?;
            c.name = "case_a_vision".into();
            c.gains.k_p = 1.0;
            c.vision = Some(VisionConfig {
                r_cam_world: RotationSpec::identity(),
                peg_in_camera: PegInCamera::TrueRotation,
            });
            c
        }
        other => return Err(SimError::UnknownPreset(other.to_string())),
    };
    Ok(config)
}
