//! Measurement models: virtual-spring force prediction, haptic mismatch,
//! vision frame composition and sampled Gaussian force noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::so3::{RotationMatrix, Vec3};
use crate::superquadric::{radial_displacement, Superquadric};

/// One arm's contact with the grasped body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HapticChannel {
    /// Virtual spring coefficient, N/m.
    pub k_c: f64,
    /// End-effector position in the world frame, m.
    pub ee_position_world: Vec3,
    /// Force reported by the sensor, N.
    pub f_measured: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisionMeasurement {
    /// Camera orientation in the world frame.
    pub r_cam_world: RotationMatrix,
    /// Body orientation as seen by the camera.
    pub r_peg_cam: RotationMatrix,
}

/// Zero-order-hold Gaussian noise added to a measured force.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceNoiseModel {
    pub mean: f64,
    pub variance: f64,
    /// Hold interval between resamples, s.
    pub sample_time: f64,
    pub seed: u64,
}

/// Virtual spring force `k_c · d(R̂ᵀ p)` in the estimated body frame.
pub fn estimated_force(
    sq: &Superquadric,
    r_hat: &RotationMatrix,
    ee_position_world: &Vec3,
    k_c: f64,
) -> Result<Vec3, GeometryError> {
    let body = r_hat.transpose().apply(ee_position_world);
    Ok(radial_displacement(sq, &body)?.d * k_c)
}

/// `f_e × f`
pub fn haptic_mismatch(f_e: &Vec3, f: &Vec3) -> Vec3 {
    f_e.cross(f)
}

pub fn vision_world_rotation(v: &VisionMeasurement) -> RotationMatrix {
    v.r_cam_world.compose(&v.r_peg_cam)
}

/// Maps a force measured in the end-effector frame into the body frame using
/// an estimate of the end-effector-to-body rotation.
pub fn edge_grasp_force_correction(f_ee: &Vec3, r_peg_from_ee_est: &RotationMatrix) -> Vec3 {
    r_peg_from_ee_est.apply(f_ee)
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from a parent seed and a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(stream.wrapping_add(0x632B_E59B_D9B4_E019)))
}

impl ForceNoiseModel {
    /// Index of the hold interval containing `t`.
    pub fn sample_index(&self, t: f64) -> u64 {
        (t / self.sample_time + 1e-9).floor().max(0.0) as u64
    }

    /// Noise on one component for one hold interval. A pure function of
    /// `(seed, component, index)`.
    pub fn sample(&self, component: usize, index: u64) -> f64 {
        if self.variance == 0.0 {
            return self.mean;
        }
        let stream = derive_seed(self.seed, component as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(stream, index));
        let z: f64 = StandardNormal.sample(&mut rng);
        self.mean + self.variance.sqrt() * z
    }
}

pub fn apply_force_noise(f_clean: &Vec3, model: &ForceNoiseModel, t: f64) -> Vec3 {
    let k = model.sample_index(t);
    Vec3::new(
        f_clean.x + model.sample(0, k),
        f_clean.y + model.sample(1, k),
        f_clean.z + model.sample(2, k),
    )
}
