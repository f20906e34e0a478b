//! Complementary filter on SO(3) driven by haptic residuals and an optional
//! vision rotation.
//!
//! The estimate follows `dR̂/dt = R̂·hat(ω)` with the body-frame correction
//! `ω = β1·f_h1 + β2·f_h2 + k_p·σ`, where `f_hi = f_ei × f_i` and
//! `σ = vex(Pa(R̂ᵀ·Rv))`. Each step is integrated with the exact exponential.

use serde::{Deserialize, Serialize};

use crate::error::FilterError;
use crate::sensing::{estimated_force, haptic_mismatch, HapticChannel};
use crate::so3::{pa_projection, rodrigues_step, rotation_error, RotationMatrix, Vec3};
use crate::superquadric::Superquadric;

/// Orthonormality defect above which the estimate is projected back onto SO(3).
pub const RENORMALIZE_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterGains {
    pub beta1: f64,
    pub beta2: f64,
    pub k_p: f64,
}

impl FilterGains {
    pub fn new(beta1: f64, beta2: f64, k_p: f64) -> Result<Self, FilterError> {
        let g = Self { beta1, beta2, k_p };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if ![self.beta1, self.beta2, self.k_p]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(FilterError::InvalidGains("non-finite gain".into()));
        }
        if self.k_p < 0.0 {
            return Err(FilterError::InvalidGains(format!("k_p = {} < 0", self.k_p)));
        }
        if self.beta1 == 0.0 && self.beta2 == 0.0 && self.k_p == 0.0 {
            return Err(FilterError::InvalidGains("all gains are zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterState {
    pub r_hat: RotationMatrix,
    pub t: f64,
    pub dt: f64,
    /// Number of steps taken.
    pub step: u64,
}

impl FilterState {
    pub fn new(r_hat: RotationMatrix, dt: f64) -> Self {
        Self {
            r_hat,
            t: 0.0,
            dt,
            step: 0,
        }
    }
}

/// Body-frame angular rate applied to the estimate, rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectionTerm {
    pub omega: Vec3,
}

/// Everything computed while evaluating the correction at one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub f_e: [Vec3; 2],
    pub f_h: [Vec3; 2],
    pub sigma: Vec3,
    pub correction: CorrectionTerm,
    /// `tr(R̃) + 1` when vision is active.
    pub unstable_distance: Option<f64>,
}

pub fn sigma(r_hat: &RotationMatrix, r_vision_world: &RotationMatrix) -> Vec3 {
    pa_projection(rotation_error(r_hat, r_vision_world).matrix()).vex()
}

pub fn correction(f_h1: &Vec3, f_h2: &Vec3, sigma: &Vec3, gains: &FilterGains) -> CorrectionTerm {
    CorrectionTerm {
        omega: f_h1 * gains.beta1 + f_h2 * gains.beta2 + sigma * gains.k_p,
    }
}

/// `tr(R̃) + 1`: zero exactly on the unstable set `{tr R̃ = −1}`.
pub fn unstable_set_distance(r_err: &RotationMatrix) -> f64 {
    r_err.trace() + 1.0
}

/// Evaluates residuals and the correction at the current estimate without
/// advancing it. `vision` is the body orientation in the world frame.
pub fn evaluate(
    r_hat: &RotationMatrix,
    sq: &Superquadric,
    channels: &[HapticChannel; 2],
    vision: Option<&RotationMatrix>,
    gains: &FilterGains,
) -> Result<StepDiagnostics, FilterError> {
    let mut f_e = [Vec3::zeros(); 2];
    let mut f_h = [Vec3::zeros(); 2];
    for (i, ch) in channels.iter().enumerate() {
        f_e[i] = estimated_force(sq, r_hat, &ch.ee_position_world, ch.k_c)?;
        f_h[i] = haptic_mismatch(&f_e[i], &ch.f_measured);
    }
    let (sigma, unstable_distance) = match (vision, gains.k_p > 0.0) {
        (Some(rv), true) => (
            sigma(r_hat, rv),
            Some(unstable_set_distance(&rotation_error(r_hat, rv))),
        ),
        (None, true) => return Err(FilterError::MissingVision),
        (_, false) => (Vec3::zeros(), None),
    };
    Ok(StepDiagnostics {
        f_e,
        f_h,
        sigma,
        correction: correction(&f_h[0], &f_h[1], &sigma, gains),
        unstable_distance,
    })
}

/// Advances the estimate by one step with the given correction.
pub fn integrate(state: &FilterState, correction: &CorrectionTerm) -> FilterState {
    let mut r_hat = rodrigues_step(&state.r_hat, &correction.omega, state.dt);
    if r_hat.defect() > RENORMALIZE_THRESHOLD {
        log::warn!(
            "orthonormality defect {:.3e}, renormalizing",
            r_hat.defect()
        );
        r_hat = r_hat.renormalized();
    }
    let step = state.step + 1;
    FilterState {
        r_hat,
        t: step as f64 * state.dt,
        dt: state.dt,
        step,
    }
}

pub fn filter_step(
    state: &FilterState,
    sq: &Superquadric,
    channels: &[HapticChannel; 2],
    vision: Option<&RotationMatrix>,
    gains: &FilterGains,
) -> Result<(FilterState, StepDiagnostics), FilterError> {
    let diag = evaluate(&state.r_hat, sq, channels, vision, gains)?;
    Ok((integrate(state, &diag.correction), diag))
}
