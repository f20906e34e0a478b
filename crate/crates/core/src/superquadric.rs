//! Superellipsoid object model.
//!
//! The implicit function is
//! `f(p) = ((x/ax)^{2/ε2} + (y/ay)^{2/ε2})^{ε2/ε1} + (z/az)^{2/ε1} − 1`
//! and the inside-outside function is `F = f + 1`. Normalized coordinates
//! are taken in absolute value before the fractional powers.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::so3::Vec3;

/// Shape exponent range accepted by [`fit_superquadric`].
pub const FIT_EPS_RANGE: (f64, f64) = (0.1, 2.0);

/// Queries closer than this to the body origin are rejected.
pub const ORIGIN_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superquadric {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for Superquadric {
    /// Ellipsoid elongated along x, sized so that the reference grasp points
    /// at ±(0.3, 0.3, 0) m lie outside the surface.
    fn default() -> Self {
        Self {
            ax: 0.25,
            ay: 0.05,
            az: 0.05,
            eps1: 1.0,
            eps2: 1.0,
        }
    }
}

impl Superquadric {
    pub fn new(ax: f64, ay: f64, az: f64, eps1: f64, eps2: f64) -> Result<Self, GeometryError> {
        let sq = Self {
            ax,
            ay,
            az,
            eps1,
            eps2,
        };
        sq.validate()?;
        Ok(sq)
    }

    pub fn sphere(radius: f64) -> Self {
        Self {
            ax: radius,
            ay: radius,
            az: radius,
            eps1: 1.0,
            eps2: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, value) in [("ax", self.ax), ("ay", self.ay), ("az", self.az)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(GeometryError::InvalidParameter { name, value });
            }
        }
        for (name, value) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(value > 0.0 && value <= 2.0) {
                return Err(GeometryError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    pub fn params(&self) -> [f64; 5] {
        [self.ax, self.ay, self.az, self.eps1, self.eps2]
    }

    fn from_params(p: [f64; 5]) -> Self {
        Self {
            ax: p[0],
            ay: p[1],
            az: p[2],
            eps1: p[3],
            eps2: p[4],
        }
    }

    /// Semi-axes multiplied by `lambda`, exponents unchanged.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            ax: self.ax * lambda,
            ay: self.ay * lambda,
            az: self.az * lambda,
            ..*self
        }
    }
}

/// Displacement from the surface to a query point along the ray from the
/// body origin, expressed in the body frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialDisplacement {
    pub d: Vec3,
}

pub fn inside_outside(sq: &Superquadric, p: &Vec3) -> f64 {
    let x = (p.x / sq.ax).abs();
    let y = (p.y / sq.ay).abs();
    let z = (p.z / sq.az).abs();
    let xy = x.powf(2.0 / sq.eps2) + y.powf(2.0 / sq.eps2);
    xy.powf(sq.eps2 / sq.eps1) + z.powf(2.0 / sq.eps1)
}

pub fn implicit_value(sq: &Superquadric, p: &Vec3) -> f64 {
    inside_outside(sq, p) - 1.0
}

/// `d = p·(1 − F(p)^{−ε1/2})`. Points outward outside the body and inward
/// when `p` penetrates it.
pub fn radial_displacement(
    sq: &Superquadric,
    p: &Vec3,
) -> Result<RadialDisplacement, GeometryError> {
    let norm = p.norm();
    if !(norm > ORIGIN_GUARD) {
        return Err(GeometryError::Singularity(norm));
    }
    let f = inside_outside(sq, p);
    let scale = 1.0 - f.powf(-0.5 * sq.eps1);
    Ok(RadialDisplacement { d: p * scale })
}

/// `sign(v)·|v|^e`
fn signed_pow(v: f64, e: f64) -> f64 {
    v.signum() * v.abs().powf(e)
}

/// Point on the surface at latitude `eta ∈ [−π/2, π/2]` and longitude
/// `omega ∈ [−π, π)` of the spherical product parametrization.
pub fn surface_point(sq: &Superquadric, eta: f64, omega: f64) -> Vec3 {
    let (se, ce) = eta.sin_cos();
    let (so, co) = omega.sin_cos();
    let ring = signed_pow(ce, sq.eps1);
    Vec3::new(
        sq.ax * ring * signed_pow(co, sq.eps2),
        sq.ay * ring * signed_pow(so, sq.eps2),
        sq.az * signed_pow(se, sq.eps1),
    )
}

pub fn sample_surface(sq: &Superquadric, n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let eta = rng.random_range(-0.5 * PI..=0.5 * PI);
            let omega = rng.random_range(-PI..PI);
            surface_point(sq, eta, omega)
        })
        .collect()
}

fn fit_cost(sq: &Superquadric, cloud: &[Vec3]) -> f64 {
    let volume = sq.ax * sq.ay * sq.az;
    cloud
        .iter()
        .map(|p| {
            let r = inside_outside(sq, p).powf(sq.eps1) - 1.0;
            volume * r * r
        })
        .sum()
}

fn clamp_params(mut p: [f64; 5]) -> [f64; 5] {
    for a in &mut p[..3] {
        *a = a.max(1e-6);
    }
    for e in &mut p[3..] {
        *e = e.clamp(FIT_EPS_RANGE.0, FIT_EPS_RANGE.1);
    }
    p
}

const FIT_MIN_POINTS: usize = 20;
const FIT_MAX_ITERATIONS: usize = 20_000;

/// Least-squares superquadric fit of a body-frame-aligned cloud using a
/// Nelder-Mead simplex over the five shape parameters.
pub fn fit_superquadric(
    cloud: &[Vec3],
    initial: &Superquadric,
) -> Result<Superquadric, GeometryError> {
    if cloud.len() < FIT_MIN_POINTS {
        return Err(GeometryError::TooFewPoints {
            needed: FIT_MIN_POINTS,
            got: cloud.len(),
        });
    }
    initial.validate()?;
    let start = clamp_params(initial.params());

    let n = cloud.len() as f64;
    let mean = cloud.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cov = cloud.iter().fold(Matrix3::zeros(), |a, p| {
        a + (p - mean) * (p - mean).transpose()
    }) / n;
    let eig = cov.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0) || lo < 1e-12 * hi {
        return Err(GeometryError::NonConvergence {
            reason: "point cloud spread is rank deficient".into(),
            best: Superquadric::from_params(start),
            cost: fit_cost(&Superquadric::from_params(start), cloud),
        });
    }

    let cost = |p: &[f64; 5]| fit_cost(&Superquadric::from_params(clamp_params(*p)), cloud);
    let mut best = start;
    let mut converged = false;
    let mut budget = FIT_MAX_ITERATIONS;
    // Restart from the current best until a restart no longer improves it.
    for _ in 0..8 {
        let before = cost(&best);
        let (p, ok, used) = nelder_mead(&cost, best, budget);
        best = clamp_params(p);
        budget = budget.saturating_sub(used);
        converged = ok;
        if !ok || before - cost(&best) <= 1e-15 * before.max(1e-300) {
            break;
        }
    }
    let result = Superquadric::from_params(best);
    if !converged {
        return Err(GeometryError::NonConvergence {
            reason: format!("iteration cap of {FIT_MAX_ITERATIONS} reached"),
            best: result,
            cost: fit_cost(&result, cloud),
        });
    }
    Ok(result)
}

/// Returns `(argmin, converged, iterations used)`.
fn nelder_mead<F>(f: &F, x0: [f64; 5], max_iter: usize) -> ([f64; 5], bool, usize)
where
    F: Fn(&[f64; 5]) -> f64,
{
    const N: usize = 5;
    let mut simplex: Vec<([f64; 5], f64)> = Vec::with_capacity(N + 1);
    simplex.push((x0, f(&x0)));
    for i in 0..N {
        let mut x = x0;
        x[i] += if x[i].abs() > 1e-8 {
            0.05 * x[i]
        } else {
            2.5e-4
        };
        simplex.push((x, f(&x)));
    }
    let combine = |a: &[f64; 5], b: &[f64; 5], t: f64| -> [f64; 5] {
        let mut out = [0.0; 5];
        for k in 0..N {
            out[k] = a[k] + t * (b[k] - a[k]);
        }
        out
    };
    for iter in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[N].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| {
                x.iter()
                    .zip(simplex[0].0.iter())
                    .map(|(a, b)| (a - b).abs())
            })
            .fold(0.0_f64, f64::max);
        if spread <= 1e-16 * simplex[0].1.abs().max(1e-20) + 1e-30 && size < 1e-10 {
            return (simplex[0].0, true, iter);
        }
        if size < 1e-13 {
            return (simplex[0].0, true, iter);
        }
        let mut centroid = [0.0; 5];
        for (x, _) in &simplex[..N] {
            for k in 0..N {
                centroid[k] += x[k] / N as f64;
            }
        }
        let worst = simplex[N];
        let reflected = combine(&centroid, &worst.0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, -2.0);
            let fe = f(&expanded);
            simplex[N] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (reflected, fr);
        } else {
            let (target, ft) = if fr < worst.1 {
                (reflected, fr)
            } else {
                (worst.0, worst.1)
            };
            let contracted = combine(&centroid, &target, 0.5);
            let fc = f(&contracted);
            if fc < ft {
                simplex[N] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let x = combine(&best, &entry.0, 0.5);
                    *entry = (x, f(&x));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, false, max_iter)
}

/// Reads whitespace-separated `x y z` triples, one point per line. Blank
/// lines and lines starting with `#` are skipped.
pub fn read_point_cloud<R: BufRead>(reader: R) -> Result<Vec<Vec3>, GeometryError> {
    let mut points = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| GeometryError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = trimmed
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e: std::num::ParseFloatError| GeometryError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        if values.len() != 3 {
            return Err(GeometryError::Parse {
                line: i + 1,
                message: format!("expected 3 values, got {}", values.len()),
            });
        }
        points.push(Vec3::new(values[0], values[1], values[2]));
    }
    Ok(points)
}

pub fn write_point_cloud<W: Write>(mut writer: W, points: &[Vec3]) -> Result<(), GeometryError> {
    for p in points {
        writeln!(writer, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z)
            .map_err(|e| GeometryError::Io(e.to_string()))?;
    }
    Ok(())
}
