//! Rotation-group algebra on 3×3 matrices.
//!
//! Rotations are kept in matrix form throughout. The Lie algebra so(3) is
//! identified with ℝ³ through [`hat`] and [`vex`]; [`rodrigues_step`] is the
//! closed-form exponential used to integrate body-frame angular rates.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::So3Error;

pub type Vec3 = Vector3<f64>;

/// Tolerance on `‖R Rᵀ − I‖_F` and `|det R − 1|` for a valid rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Maximum symmetric part accepted by [`vex`].
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Guard on `|r31|` below which ZYX Euler angles are well defined.
pub const GIMBAL_GUARD: f64 = 1e-9;

/// An element of SO(3), stored as an orthonormal matrix with determinant +1.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates `m` against the orthonormality and determinant tolerances.
    pub fn new(m: Matrix3<f64>) -> Result<Self, So3Error> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(So3Error::NonFinite);
        }
        let defect = orthonormality_defect(&m);
        let det = m.determinant();
        if defect > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(So3Error::NotARotation { defect, det });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix without checking it. Callers guarantee the invariants.
    pub fn new_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, So3Error> {
        Self::new(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation about a unit `axis` by `angle`, via the axis-angle formula.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        rodrigues_step(&Self::identity(), &(axis * angle), 1.0)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(v: [f64; 9]) -> Result<Self, So3Error> {
        Self::new(Matrix3::from_row_slice(&v))
    }

    pub fn defect(&self) -> f64 {
        orthonormality_defect(&self.0)
    }

    /// Nearest rotation in the Frobenius sense (polar factor).
    pub fn renormalized(&self) -> Self {
        let svd = self.0.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Self(u * d * v_t)
    }

    /// Geodesic distance to the identity, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let s = vex_unchecked(&self.0).norm();
        let c = 0.5 * (self.0.trace() - 1.0);
        s.atan2(c)
    }
}

impl fmt::Debug for RotationMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.to_row_major();
        write!(
            f,
            "RotationMatrix[[{:.6}, {:.6}, {:.6}], [{:.6}, {:.6}, {:.6}], [{:.6}, {:.6}, {:.6}]]",
            r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]
        )
    }
}

impl TryFrom<[[f64; 3]; 3]> for RotationMatrix {
    type Error = So3Error;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        Self::from_rows(rows)
    }
}

impl From<RotationMatrix> for [[f64; 3]; 3] {
    fn from(r: RotationMatrix) -> Self {
        let m = r.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

/// An element of so(3). Only constructible through [`hat`] or
/// [`pa_projection`], so it is anti-symmetric by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkewMatrix(Matrix3<f64>);

impl SkewMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn vex(&self) -> Vec3 {
        vex_unchecked(&self.0)
    }
}

/// Yaw-pitch-roll angles with `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerZYX {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerZYX {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self { yaw, pitch, roll }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.yaw, self.pitch, self.roll]
    }
}

pub fn orthonormality_defect(m: &Matrix3<f64>) -> f64 {
    (m * m.transpose() - Matrix3::identity()).norm()
}

pub fn hat(w: &Vec3) -> SkewMatrix {
    SkewMatrix(Matrix3::new(
        0.0, -w.z, w.y, //
        w.z, 0.0, -w.x, //
        -w.y, w.x, 0.0,
    ))
}

fn vex_unchecked(m: &Matrix3<f64>) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Inverse of [`hat`] on a raw matrix. Rejects matrices whose symmetric part
/// exceeds [`SKEW_TOLERANCE`] in Frobenius norm.
pub fn vex(m: &Matrix3<f64>) -> Result<Vec3, So3Error> {
    let sym = 0.5 * (m + m.transpose());
    let norm = sym.norm();
    if !(norm <= SKEW_TOLERANCE) {
        return Err(So3Error::NotSkew(norm));
    }
    Ok(vex_unchecked(m))
}

/// Anti-symmetric projection `½(A − Aᵀ)`.
pub fn pa_projection(a: &Matrix3<f64>) -> SkewMatrix {
    let mut s = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                s[(i, j)] = 0.5 * (a[(i, j)] - a[(j, i)]);
            }
        }
    }
    SkewMatrix(s)
}

/// Unnormalized sinc, `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// One exact exponential step `R·exp(dt·hat(a))` written in Rodrigues form:
/// `R·(I + α·dt·hat(a) + γ·(dt·hat(a))²)` with `α = sinc(θ)`,
/// `γ = ½·sinc²(θ/2)` and `θ = dt·‖a‖` (Euclidean norm of the rate vector).
pub fn rodrigues_step(r: &RotationMatrix, a: &Vec3, dt: f64) -> RotationMatrix {
    let theta = dt * a.norm();
    let alpha = sinc(theta);
    let half = sinc(0.5 * theta);
    let gamma = 0.5 * half * half;
    let k = hat(&(a * dt)).0;
    let increment = Matrix3::identity() + k * alpha + (k * k) * gamma;
    RotationMatrix(r.0 * increment)
}

/// Orientation error `R̂ᵀ·Rv`.
pub fn rotation_error(r_hat: &RotationMatrix, r_meas: &RotationMatrix) -> RotationMatrix {
    RotationMatrix(r_hat.0.transpose() * r_meas.0)
}

/// `trace(I − R_trueᵀ·R̂)`, in `[0, 4]`.
pub fn trace_error(r_true: &RotationMatrix, r_hat: &RotationMatrix) -> f64 {
    // trace(Aᵀ B) = Σ A_ij B_ij
    3.0 - r_true.0.component_mul(&r_hat.0).sum()
}

pub fn from_euler_zyx(e: &EulerZYX) -> RotationMatrix {
    RotationMatrix::rot_z(e.yaw)
        .compose(&RotationMatrix::rot_y(e.pitch))
        .compose(&RotationMatrix::rot_x(e.roll))
}

pub fn to_euler_zyx(r: &RotationMatrix) -> Result<EulerZYX, So3Error> {
    let m = &r.0;
    let r31 = m[(2, 0)];
    if r31.abs() > 1.0 - GIMBAL_GUARD {
        return Err(So3Error::GimbalLock(r31));
    }
    Ok(EulerZYX {
        yaw: m[(1, 0)].atan2(m[(0, 0)]),
        pitch: (-r31).asin(),
        roll: m[(2, 1)].atan2(m[(2, 2)]),
    })
}

/// Total version of [`to_euler_zyx`]: at gimbal lock the roll is set to zero
/// and the remaining rotation is attributed to yaw.
pub fn to_euler_zyx_or_locked(r: &RotationMatrix) -> EulerZYX {
    to_euler_zyx(r).unwrap_or_else(|_| {
        let m = &r.0;
        let pitch = if m[(2, 0)] < 0.0 { PI / 2.0 } else { -PI / 2.0 };
        EulerZYX {
            yaw: (-m[(0, 1)]).atan2(m[(1, 1)]),
            pitch,
            roll: 0.0,
        }
    })
}

fn first_nonzero_positive(mut v: Vec3) -> Vec3 {
    if let Some(c) = v.iter().copied().find(|c| *c != 0.0) {
        if c < 0.0 {
            v = -v;
        }
    }
    v
}

/// Unit axis and angle in `[0, π]`. The identity maps to `((1,0,0), 0)`; at
/// exactly `π` the axis sign is fixed by making its first nonzero component
/// positive.
const PI_TIE_TOLERANCE: f64 = 1e-12;

pub fn to_axis_angle(r: &RotationMatrix) -> (Vec3, f64) {
    let m = &r.0;
    let skew = vex_unchecked(m);
    let s = skew.norm();
    let c = 0.5 * (m.trace() - 1.0);
    let angle = s.atan2(c);
    if s == 0.0 && c > 0.0 {
        return (Vec3::x(), 0.0);
    }
    if angle < 0.5 * PI {
        return (skew / s, angle);
    }
    // Near π the skew part vanishes; recover the axis from the symmetric part
    // (R + Rᵀ)/2 = cos θ·I + (1 − cos θ)·n nᵀ.
    let b = (0.5 * (m + m.transpose()) - Matrix3::identity() * c) / (1.0 - c);
    let i = (0..3)
        .max_by(|&a, &b_| b[(a, a)].partial_cmp(&b[(b_, b_)]).unwrap())
        .unwrap();
    let mut axis = b.column(i).into_owned();
    axis /= axis.norm();
    // Rotations by exactly π and its rounding neighbours share a canonical
    // axis so that plots of the π-ball stay deterministic.
    let dot = axis.dot(&skew);
    if dot.abs() <= PI_TIE_TOLERANCE {
        axis = first_nonzero_positive(axis);
    } else if dot < 0.0 {
        axis = -axis;
    }
    (axis, angle)
}

/// Axis·angle point inside the closed π-ball.
pub fn to_rotation_vector(r: &RotationMatrix) -> Vec3 {
    let (axis, angle) = to_axis_angle(r);
    axis * angle
}

/// Haar-uniform rotation: axis from a normalized Gaussian triple, angle drawn
/// with density proportional to `1 − cos θ` on `[0, π]` by rejection.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> RotationMatrix {
    let axis = loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            break v / n;
        }
    };
    let angle = loop {
        let theta: f64 = rng.random_range(0.0..PI);
        let accept: f64 = rng.random();
        if 2.0 * accept <= 1.0 - theta.cos() {
            break theta;
        }
    };
    RotationMatrix::from_axis_angle(&axis, angle)
}
